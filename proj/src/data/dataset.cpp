#include "aime/data/dataset.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "aime/common/sha256.hpp"

namespace aime::data {

std::string to_string(DatasetRole role) {
  return role == DatasetRole::embodiment ? "embodiment" : "demonstration";
}

DatasetRole role_from_string(const std::string& s) {
  if (s == "embodiment") return DatasetRole::embodiment;
  if (s == "demonstration") return DatasetRole::demonstration;
  throw DomainError("unknown dataset role '" + s + "'");
}

Dataset::Dataset(DatasetRole role, std::vector<Trajectory> trajectories)
    : role_(role), trajectories_(std::move(trajectories)) {
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    const Trajectory& tr = trajectories_[i];
    if (tr.length() < 1) throw DomainError("dataset: empty trajectory " + std::to_string(i));
    if (!tr.observations.allFinite()) {
      throw DomainError("dataset: non-finite observation in trajectory " + std::to_string(i));
    }
    if (obs_dim_ == 0) obs_dim_ = static_cast<int>(tr.observations.cols());
    if (tr.observations.cols() != obs_dim_) {
      throw DomainError("dataset: inhomogeneous observation dimension");
    }
    if (tr.actions.has_value() != trajectories_[0].actions.has_value()) {
      throw DomainError("dataset: actions must be present on all trajectories or none");
    }
    if (tr.actions) {
      if (role_ == DatasetRole::demonstration) {
        throw DomainError("dataset: demonstration role forbids actions");
      }
      if (!tr.actions->allFinite()) throw DomainError("dataset: non-finite action");
      if (tr.actions->rows() != tr.length()) {
        throw DomainError("dataset: need one action per observation");
      }
      if (action_dim_ == 0) action_dim_ = static_cast<int>(tr.actions->cols());
      if (tr.actions->cols() != action_dim_) {
        throw DomainError("dataset: inhomogeneous action dimension");
      }
    }
    if (tr.rewards) {
      if (tr.rewards->size() != tr.length()) throw DomainError("dataset: reward length mismatch");
      if (!tr.rewards->allFinite()) throw DomainError("dataset: non-finite reward");
    }
  }
}

Eigen::Index Dataset::min_length() const {
  Eigen::Index m = 0;
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    const Eigen::Index len = trajectories_[i].length();
    m = (i == 0) ? len : std::min(m, len);
  }
  return m;
}

double Dataset::mean_return() const {
  if (trajectories_.empty()) return 0.0;
  double total = 0.0;
  for (const Trajectory& tr : trajectories_) total += tr.episode_return();
  return total / static_cast<double>(trajectories_.size());
}

namespace {

void hash_matrix(Sha256& h, const Matrix& m) {
  h.update_u64(static_cast<std::uint64_t>(m.rows()));
  h.update_u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      h.update_u64(std::bit_cast<std::uint64_t>(m(r, c)));
    }
  }
}

}  // namespace

Manifest Dataset::manifest() const {
  Manifest m;
  m.role = role_;
  m.n_trajectories = static_cast<int>(trajectories_.size());
  m.obs_dim = obs_dim_;
  m.action_dim = action_dim_;
  m.has_rewards = !trajectories_.empty() && trajectories_[0].rewards.has_value();

  Sha256 content, obs_only;
  for (const Trajectory& tr : trajectories_) {
    content.update("obs");
    hash_matrix(content, tr.observations);
    hash_matrix(obs_only, tr.observations);
    if (tr.actions) {
      content.update("act");
      hash_matrix(content, *tr.actions);
    }
    if (tr.rewards) {
      content.update("rew");
      hash_matrix(content, Matrix(*tr.rewards));
    }
    content.update_u64(tr.seed);
    content.update(tr.env_id);
    content.update(tr.task_id);
  }
  m.content_hash = content.hex_digest();
  m.obs_hash = obs_only.hex_digest();
  return m;
}

Dataset Dataset::prefix(std::size_t n) const {
  if (n > trajectories_.size()) throw DomainError("dataset: prefix longer than dataset");
  return Dataset(role_, std::vector<Trajectory>(trajectories_.begin(),
                                                trajectories_.begin() + static_cast<long>(n)));
}

Dataset strip_actions(const Dataset& dataset) {
  std::vector<Trajectory> out;
  out.reserve(dataset.size());
  for (const Trajectory& tr : dataset.trajectories()) {
    Trajectory copy = tr;
    copy.actions.reset();
    out.push_back(std::move(copy));
  }
  return Dataset(DatasetRole::demonstration, std::move(out));
}

Dataset concat(const std::vector<Dataset>& parts) {
  if (parts.empty()) throw DomainError("concat: no datasets");
  std::vector<Trajectory> all;
  for (const Dataset& d : parts) {
    if (d.role() != parts[0].role()) throw DomainError("concat: mixed roles");
    all.insert(all.end(), d.trajectories().begin(), d.trajectories().end());
  }
  return Dataset(parts[0].role(), std::move(all));
}

// ---------------------------------------------------------------------------
// storage

namespace {

constexpr int kFormatVersion = 1;

void write_blob(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetIoError(DataErrorCode::io_failure, "cannot open " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(m(r, c));
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) throw DatasetIoError(DataErrorCode::io_failure, "write failed: " + path.string());
}

Matrix read_blob(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetIoError(DataErrorCode::io_failure, "cannot open " + path.string());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      unsigned char b[8];
      in.read(reinterpret_cast<char*>(b), 8);
      if (!in) {
        throw DatasetIoError(DataErrorCode::truncated_payload,
                             "truncated payload: " + path.string());
      }
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
      m(r, c) = std::bit_cast<double>(bits);
    }
  }
  return m;
}

std::string traj_stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "t%05zu", i);
  return buf;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Manifest m = dataset.manifest();

  nlohmann::ordered_json j;
  j["version"] = kFormatVersion;
  j["role"] = to_string(m.role);
  j["n_trajectories"] = m.n_trajectories;
  j["obs_dim"] = m.obs_dim;
  j["action_dim"] = m.action_dim;
  j["has_rewards"] = m.has_rewards;
  j["content_hash"] = m.content_hash;
  j["obs_hash"] = m.obs_hash;
  nlohmann::ordered_json trajs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Trajectory& tr = dataset.at(i);
    trajs.push_back({{"length", tr.length()},
                     {"seed", tr.seed},
                     {"env_id", tr.env_id},
                     {"task_id", tr.task_id}});
    write_blob(dir / (traj_stem(i) + ".obs.bin"), tr.observations);
    if (tr.actions) write_blob(dir / (traj_stem(i) + ".act.bin"), *tr.actions);
    if (tr.rewards) write_blob(dir / (traj_stem(i) + ".rew.bin"), Matrix(*tr.rewards));
  }
  j["trajectories"] = std::move(trajs);

  std::ofstream out(dir / "manifest.json");
  if (!out) throw DatasetIoError(DataErrorCode::io_failure, "cannot write manifest");
  out << j.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DatasetIoError(DataErrorCode::io_failure, "missing manifest in " + dir.string());
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DatasetIoError(DataErrorCode::bad_manifest, "unparseable manifest");
  if (j.value("version", -1) != kFormatVersion) {
    throw DatasetIoError(DataErrorCode::version_mismatch, "dataset format version mismatch");
  }

  const DatasetRole role = role_from_string(j.at("role").get<std::string>());
  const int obs_dim = j.at("obs_dim").get<int>();
  const int action_dim = j.at("action_dim").get<int>();
  const bool has_rewards = j.at("has_rewards").get<bool>();

  std::vector<Trajectory> trajs;
  const auto& list = j.at("trajectories");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list[i];
    const Eigen::Index len = e.at("length").get<Eigen::Index>();
    Trajectory tr;
    tr.observations = read_blob(dir / (traj_stem(i) + ".obs.bin"), len, obs_dim);
    if (action_dim > 0) tr.actions = read_blob(dir / (traj_stem(i) + ".act.bin"), len, action_dim);
    if (has_rewards) tr.rewards = Vector(read_blob(dir / (traj_stem(i) + ".rew.bin"), len, 1));
    tr.seed = e.at("seed").get<std::uint64_t>();
    tr.env_id = e.at("env_id").get<std::string>();
    tr.task_id = e.at("task_id").get<std::string>();
    trajs.push_back(std::move(tr));
  }

  Dataset dataset(role, std::move(trajs));
  const Manifest m = dataset.manifest();
  if (m.content_hash != j.at("content_hash").get<std::string>()) {
    throw DatasetIoError(DataErrorCode::hash_mismatch, "dataset content hash mismatch");
  }
  return dataset;
}

}  // namespace aime::data
