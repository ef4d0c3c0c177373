#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aime/common/errors.hpp"
#include "aime/common/rng.hpp"

namespace aime::data {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One episode. Row t of `observations` is o_{t+1}; row t of `actions` is
/// a_t, the action applied right before that observation was emitted (the
/// filtering convention q(s_t | s_{t-1}, a_{t-1}, o_t)). Rewards align with
/// observations. o_0 is intentionally not stored: consumers start from the
/// zero belief and never condition on it.
struct Trajectory {
  Matrix observations;             // T x obs_dim
  std::optional<Matrix> actions;   // T x action_dim
  std::optional<Vector> rewards;   // T
  std::uint64_t seed = 0;
  std::string env_id;
  std::string task_id;

  Eigen::Index length() const { return observations.rows(); }
  double episode_return() const { return rewards ? rewards->sum() : 0.0; }
};

enum class DatasetRole { embodiment, demonstration };

std::string to_string(DatasetRole role);
DatasetRole role_from_string(const std::string& s);

struct Manifest {
  int version = 1;
  DatasetRole role = DatasetRole::embodiment;
  int n_trajectories = 0;
  int obs_dim = 0;
  int action_dim = 0;  // 0 when actions are absent
  bool has_rewards = false;
  std::string content_hash;  // over every stored field
  std::string obs_hash;      // over observation payloads only
};

/// Immutable set of trajectories with a role tag. Demonstration datasets are
/// structurally action-free: constructing one with actions anywhere throws,
/// so no accessor can ever expose demo actions. Observation dimensions are
/// homogeneous and all payloads finite.
class Dataset {
 public:
  /// Empty embodiment-role dataset.
  Dataset() = default;
  Dataset(DatasetRole role, std::vector<Trajectory> trajectories);

  DatasetRole role() const { return role_; }
  std::size_t size() const { return trajectories_.size(); }
  bool empty() const { return trajectories_.empty(); }
  const Trajectory& at(std::size_t i) const { return trajectories_.at(i); }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  bool has_actions() const { return action_dim_ > 0; }
  Eigen::Index min_length() const;
  double mean_return() const;

  Manifest manifest() const;

  /// First n trajectories (demo-count sweeps use nested prefixes).
  Dataset prefix(std::size_t n) const;

 private:
  DatasetRole role_;
  std::vector<Trajectory> trajectories_;
  int obs_dim_ = 0;
  int action_dim_ = 0;
};

/// Drops actions, keeps observations and rewards bit-exactly, retags as
/// demonstration data.
Dataset strip_actions(const Dataset& dataset);

/// Concatenates datasets (mix-dataset construction). Roles must match; the
/// per-trajectory content is preserved bit-exactly.
Dataset concat(const std::vector<Dataset>& parts);

/// Directory format: manifest.json plus one little-endian float64 blob per
/// trajectory field. load(save(d)) is bit-identical to d; failures raise
/// DatasetIoError with a distinct code per mode.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace aime::data
