#pragma once

#include "aime/data/dataset.hpp"

namespace aime::data {

/// A minibatch of aligned sequence chunks in step-major layout: obs[t] is an
/// (obs_dim x B) matrix whose column j is step t of chunk j; act likewise
/// (empty when sampled without actions). act[t] holds the action applied
/// right before obs[t] was observed.
struct ChunkBatch {
  std::vector<Matrix> obs;
  std::vector<Matrix> act;
  std::vector<std::pair<std::size_t, Eigen::Index>> origin;  // (trajectory, offset)

  Eigen::Index length() const { return static_cast<Eigen::Index>(obs.size()); }
  Eigen::Index batch() const { return obs.empty() ? 0 : obs[0].cols(); }
};

/// Draws B chunks of length L uniformly over all valid (trajectory, offset)
/// pairs, deterministically under the rng stream. Throws if L exceeds the
/// shortest trajectory or if actions are requested but absent.
ChunkBatch sample_chunks(const Dataset& dataset, Eigen::Index batch, Eigen::Index chunk_len,
                         SeededRng& rng, bool with_actions);

/// Deterministic whole-prefix chunk of one trajectory (batch of size 1), for
/// probes and planning.
ChunkBatch trajectory_chunk(const Trajectory& trajectory, Eigen::Index chunk_len,
                            bool with_actions);

}  // namespace aime::data
