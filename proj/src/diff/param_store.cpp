#include "aime/diff/param_store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "aime/common/sha256.hpp"

namespace aime::diff {

namespace {
constexpr std::uint32_t kMagic = 0x434d4941;  // "AIMC"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

// Matrices are serialized row-major regardless of Eigen's in-memory layout.
void write_matrix(std::ostream& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      write_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
    }
  }
}

void read_matrix(std::istream& in, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = std::bit_cast<double>(read_u64(in));
    }
  }
}
}  // namespace

Matrix& ParamStore::add(const std::string& name, Matrix init) {
  if (has(name)) throw DomainError("ParamStore: duplicate parameter '" + name + "'");
  index_.emplace(name, items_.size());
  names_.push_back(name);
  items_.push_back(std::move(init));
  return items_.back();
}

const Matrix& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("ParamStore: unknown parameter '" + name + "'");
  return items_[it->second];
}

Matrix& ParamStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("ParamStore: unknown parameter '" + name + "'");
  return items_[it->second];
}

std::size_t ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DomainError("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : items_) n += static_cast<std::size_t>(m.size());
  return n;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const std::string& n : names_) {
    if (n.rfind(prefix, 0) == 0) out.push_back(n);
  }
  return out;
}

std::string ParamStore::sha256() const {
  Sha256 h;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    h.update(names_[i]);
    h.update_u64(static_cast<std::uint64_t>(items_[i].rows()));
    h.update_u64(static_cast<std::uint64_t>(items_[i].cols()));
    const Matrix& m = items_[i];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        h.update_u64(std::bit_cast<std::uint64_t>(m(r, c)));
      }
    }
  }
  return h.hex_digest();
}

void ParamStore::save(const std::filesystem::path& path,
                      const nlohmann::ordered_json& header_extra) const {
  nlohmann::ordered_json header;
  header["version"] = kVersion;
  if (!header_extra.is_null() && !header_extra.empty()) header["meta"] = header_extra;
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < items_.size(); ++i) {
    entries.push_back({{"name", names_[i]},
                       {"rows", items_[i].rows()},
                       {"cols", items_[i].cols()}});
  }
  header["entries"] = std::move(entries);
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetIoError(DataErrorCode::io_failure, "cannot open " + path.string());
  write_u32(out, kMagic);
  write_u64(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const Matrix& m : items_) write_matrix(out, m);
  if (!out) throw DatasetIoError(DataErrorCode::io_failure, "write failed: " + path.string());
}

ParamStore ParamStore::load(const std::filesystem::path& path, nlohmann::ordered_json* header_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetIoError(DataErrorCode::io_failure, "cannot open " + path.string());
  if (read_u32(in) != kMagic) {
    throw DatasetIoError(DataErrorCode::bad_manifest, "bad magic in " + path.string());
  }
  const std::uint64_t header_len = read_u64(in);
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DatasetIoError(DataErrorCode::truncated_payload, "truncated header: " + path.string());
  nlohmann::ordered_json header = nlohmann::ordered_json::parse(header_str, nullptr, false);
  if (header.is_discarded()) {
    throw DatasetIoError(DataErrorCode::bad_manifest, "unparseable header: " + path.string());
  }
  if (header.value("version", 0u) != kVersion) {
    throw DatasetIoError(DataErrorCode::version_mismatch, "checkpoint version mismatch");
  }

  ParamStore store;
  for (const auto& e : header.at("entries")) {
    Matrix m(e.at("rows").get<Eigen::Index>(), e.at("cols").get<Eigen::Index>());
    read_matrix(in, m);
    if (!in) {
      throw DatasetIoError(DataErrorCode::truncated_payload, "truncated payload: " + path.string());
    }
    store.add(e.at("name").get<std::string>(), std::move(m));
  }
  if (header_out) *header_out = header;
  return store;
}

TapeBinding::TapeBinding(Tape& tape, const ParamStore& store, bool tracked)
    : store_(&store), tracked_(tracked) {
  leaves_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    leaves_.push_back(tracked ? tape.leaf(store.value(i)) : tape.constant(store.value(i)));
  }
}

const Array& TapeBinding::operator[](const std::string& name) const {
  return leaves_[store_->index_of(name)];
}

}  // namespace aime::diff
