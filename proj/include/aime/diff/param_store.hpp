#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "aime/diff/tape.hpp"

namespace aime::diff {

/// Ordered collection of named parameter matrices. Iteration order is the
/// insertion order, which fixes the optimizer update order and the checkpoint
/// layout, keeping runs reproducible.
class ParamStore {
 public:
  Matrix& add(const std::string& name, Matrix init);
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  const Matrix& at(const std::string& name) const;
  Matrix& at(const std::string& name);

  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t index_of(const std::string& name) const;
  const Matrix& value(std::size_t i) const { return items_[i]; }
  Matrix& value(std::size_t i) { return items_[i]; }

  std::size_t scalar_count() const;
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;

  /// SHA-256 over the canonical byte layout (names, shapes, little-endian
  /// payload in store order).
  std::string sha256() const;

  /// Flat container file: magic, JSON header (entry names/shapes + extra
  /// metadata such as a config hash), then little-endian 64-bit payload.
  void save(const std::filesystem::path& path, const nlohmann::ordered_json& header_extra = {}) const;
  static ParamStore load(const std::filesystem::path& path, nlohmann::ordered_json* header_out = nullptr);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binds every parameter of a store onto a tape, either as tracked leaves
/// (trainable) or constants (frozen). Leaves are created in store order.
class TapeBinding {
 public:
  TapeBinding(Tape& tape, const ParamStore& store, bool tracked);

  const Array& operator[](const std::string& name) const;
  const std::vector<Array>& leaves() const { return leaves_; }
  const ParamStore& store() const { return *store_; }
  bool tracked() const { return tracked_; }

 private:
  const ParamStore* store_;
  std::vector<Array> leaves_;
  bool tracked_;
};

}  // namespace aime::diff
