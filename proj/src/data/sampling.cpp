#include "aime/data/sampling.hpp"

namespace aime::data {

ChunkBatch sample_chunks(const Dataset& dataset, Eigen::Index batch, Eigen::Index chunk_len,
                         SeededRng& rng, bool with_actions) {
  if (dataset.empty()) throw DomainError("sample_chunks: empty dataset");
  if (batch < 1) throw DomainError("sample_chunks: batch must be >= 1");
  if (chunk_len < 1 || chunk_len > dataset.min_length()) {
    throw DomainError("sample_chunks: chunk length " + std::to_string(chunk_len) +
                      " exceeds shortest trajectory " + std::to_string(dataset.min_length()));
  }
  if (with_actions && !dataset.has_actions()) {
    throw DomainError("sample_chunks: dataset has no actions");
  }

  // Valid offsets per trajectory: 0 .. T - L.
  std::vector<std::uint64_t> cumulative(dataset.size());
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    total += static_cast<std::uint64_t>(dataset.at(i).length() - chunk_len + 1);
    cumulative[i] = total;
  }

  ChunkBatch out;
  out.origin.reserve(static_cast<std::size_t>(batch));
  for (Eigen::Index j = 0; j < batch; ++j) {
    const std::uint64_t pick = rng.uniform_index(total);
    std::size_t traj = 0;
    while (cumulative[traj] <= pick) ++traj;
    const std::uint64_t base = traj == 0 ? 0 : cumulative[traj - 1];
    out.origin.emplace_back(traj, static_cast<Eigen::Index>(pick - base));
  }

  out.obs.assign(static_cast<std::size_t>(chunk_len), Matrix(dataset.obs_dim(), batch));
  if (with_actions) {
    out.act.assign(static_cast<std::size_t>(chunk_len), Matrix(dataset.action_dim(), batch));
  }
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto [traj, offset] = out.origin[static_cast<std::size_t>(j)];
    const Trajectory& tr = dataset.at(traj);
    for (Eigen::Index t = 0; t < chunk_len; ++t) {
      out.obs[static_cast<std::size_t>(t)].col(j) = tr.observations.row(offset + t).transpose();
      if (with_actions) {
        out.act[static_cast<std::size_t>(t)].col(j) = tr.actions->row(offset + t).transpose();
      }
    }
  }
  return out;
}

ChunkBatch trajectory_chunk(const Trajectory& trajectory, Eigen::Index chunk_len,
                            bool with_actions) {
  if (chunk_len < 1 || chunk_len > trajectory.length()) {
    throw DomainError("trajectory_chunk: bad chunk length");
  }
  if (with_actions && !trajectory.actions) {
    throw DomainError("trajectory_chunk: trajectory has no actions");
  }
  ChunkBatch out;
  out.origin.emplace_back(0, 0);
  out.obs.reserve(static_cast<std::size_t>(chunk_len));
  for (Eigen::Index t = 0; t < chunk_len; ++t) {
    out.obs.push_back(trajectory.observations.row(t).transpose());
    if (with_actions) out.act.push_back(trajectory.actions->row(t).transpose());
  }
  return out;
}

}  // namespace aime::data
