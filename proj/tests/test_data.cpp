#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "aime/data/collect.hpp"
#include "aime/data/dataset.hpp"
#include "aime/data/sampling.hpp"
#include "aime/env/pointmass.hpp"

using namespace aime;
using namespace aime::data;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("aime_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

Dataset make_pointmass_dataset(int episodes, std::uint64_t seed,
                               env::ObsMode mode = env::ObsMode::mdp) {
  env::PointMassConfig cfg;
  cfg.mode = mode;
  env::PointMassEnv env(cfg);
  env::Task task = env.task("reach-east");
  auto policy = expert_policy(task);
  return collect(env, task, *policy, episodes, seed);
}

}  // namespace

TEST_CASE("collect: zero episodes yield an empty dataset with a valid manifest") {
  Dataset d = make_pointmass_dataset(0, 1);
  CHECK(d.empty());
  Manifest m = d.manifest();
  CHECK(m.n_trajectories == 0);
  CHECK(!m.content_hash.empty());
}

TEST_CASE("collect: fixed seed reproduces the dataset byte-identically") {
  env::PointMassEnv env(env::PointMassConfig{});
  env::Task task = env.task("reach-east");
  auto p1 = uniform_random_policy(2);
  auto p2 = uniform_random_policy(2);
  Dataset a = collect(env, task, *p1, 5, 77);
  Dataset b = collect(env, task, *p2, 5, 77);
  CHECK(a.manifest().content_hash == b.manifest().content_hash);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.at(i).observations == b.at(i).observations);
    CHECK(*a.at(i).actions == *b.at(i).actions);
  }
}

TEST_CASE("collect: expert return matches the frozen simulation fixture") {
  // Same controller and environment as the fixture in test_env.cpp; the
  // collection path must reproduce comparable returns (collection uses its
  // own derived seed streams, so equality is statistical, not bitwise).
  Dataset d = make_pointmass_dataset(20, 31);
  CHECK(d.mean_return() == doctest::Approx(36.7).epsilon(0.05));
}

TEST_CASE("collect: non-finite policy action aborts with the episode index") {
  env::PointMassEnv env(env::PointMassConfig{});
  env::Task task = env.task("reach-east");

  class BrokenPolicy final : public RolloutPolicy {
   public:
    void begin_episode(std::uint64_t) override {}
    env::Vector act(const env::Vector&, const env::Vector&) override {
      env::Vector a(2);
      a << std::nan(""), 0.0;
      return a;
    }
  } broken;
  CHECK_THROWS_WITH_AS(collect(env, task, broken, 1, 3),
                       doctest::Contains("episode 0"), NumericalError);
}

TEST_CASE("strip_actions: preserves observations bit-exactly and retags the role") {
  Dataset d = make_pointmass_dataset(4, 9);
  Manifest before = d.manifest();
  Dataset demo = strip_actions(d);

  CHECK(demo.role() == DatasetRole::demonstration);
  CHECK(!demo.has_actions());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(demo.at(i).observations == d.at(i).observations);
    CHECK(!demo.at(i).actions.has_value());
  }
  Manifest after = demo.manifest();
  CHECK(after.content_hash != before.content_hash);
  CHECK(after.obs_hash == before.obs_hash);
}

TEST_CASE("dataset: demonstration role structurally forbids actions") {
  Dataset d = make_pointmass_dataset(2, 5);
  CHECK_THROWS_AS(Dataset(DatasetRole::demonstration, d.trajectories()), DomainError);
  Dataset demo = strip_actions(d);
  for (const Trajectory& tr : demo.trajectories()) CHECK(!tr.actions.has_value());
}

TEST_CASE("save/load: round trip is bit-exact") {
  auto dir = temp_dir("roundtrip");
  Dataset d = make_pointmass_dataset(10, 13, env::ObsMode::lpomdp);
  save_dataset(d, dir);
  Dataset loaded = load_dataset(dir);
  CHECK(loaded.role() == d.role());
  CHECK(loaded.size() == d.size());
  CHECK(loaded.manifest().content_hash == d.manifest().content_hash);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(loaded.at(i).observations == d.at(i).observations);
    CHECK(*loaded.at(i).actions == *d.at(i).actions);
    CHECK(*loaded.at(i).rewards == *d.at(i).rewards);
    CHECK(loaded.at(i).seed == d.at(i).seed);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("save/load: empty dataset round trip") {
  auto dir = temp_dir("empty");
  Dataset d = make_pointmass_dataset(0, 1);
  save_dataset(d, dir);
  Dataset loaded = load_dataset(dir);
  CHECK(loaded.empty());
  CHECK(loaded.manifest().content_hash == d.manifest().content_hash);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load: corrupted payload byte raises hash mismatch") {
  auto dir = temp_dir("corrupt");
  Dataset d = make_pointmass_dataset(3, 21);
  save_dataset(d, dir);
  {
    std::fstream f(dir / "t00001.obs.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(24);
    char byte = 0x5a;
    f.write(&byte, 1);
  }
  try {
    load_dataset(dir);
    FAIL("expected DatasetIoError");
  } catch (const DatasetIoError& err) {
    CHECK(err.code() == DataErrorCode::hash_mismatch);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("load: version and truncation raise distinct codes") {
  auto dir = temp_dir("versions");
  Dataset d = make_pointmass_dataset(2, 22);
  save_dataset(d, dir);

  // Truncate one payload.
  std::filesystem::resize_file(dir / "t00000.obs.bin", 8);
  try {
    load_dataset(dir);
    FAIL("expected DatasetIoError");
  } catch (const DatasetIoError& err) {
    CHECK(err.code() == DataErrorCode::truncated_payload);
  }

  // Rewrite manifest with a foreign version.
  save_dataset(d, dir);
  {
    std::ifstream in(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    auto pos = text.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 12, "\"version\": 9");
    std::ofstream out(dir / "manifest.json");
    out << text;
  }
  try {
    load_dataset(dir);
    FAIL("expected DatasetIoError");
  } catch (const DatasetIoError& err) {
    CHECK(err.code() == DataErrorCode::version_mismatch);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("concat: mix dataset preserves per-trajectory content bit-exactly") {
  Dataset a = make_pointmass_dataset(3, 41);
  Dataset b = make_pointmass_dataset(2, 42);
  Dataset mix = concat({a, b});
  CHECK(mix.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(mix.at(i).observations == a.at(i).observations);
    CHECK(*mix.at(i).actions == *a.at(i).actions);
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(mix.at(a.size() + i).observations == b.at(i).observations);
  }
}

TEST_CASE("sample_chunks: full-length chunks are whole trajectories") {
  Dataset d = make_pointmass_dataset(3, 51);
  const Eigen::Index horizon = d.at(0).length();
  SeededRng rng(1);
  ChunkBatch batch = sample_chunks(d, 4, horizon, rng, true);
  CHECK(batch.length() == horizon);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const auto [traj, offset] = batch.origin[static_cast<std::size_t>(j)];
    CHECK(offset == 0);
    for (Eigen::Index t = 0; t < horizon; ++t) {
      CHECK(batch.obs[static_cast<std::size_t>(t)].col(j) ==
            d.at(traj).observations.row(t).transpose());
      CHECK(batch.act[static_cast<std::size_t>(t)].col(j) ==
            d.at(traj).actions->row(t).transpose());
    }
  }
}

TEST_CASE("sample_chunks: deterministic under the seed") {
  Dataset d = make_pointmass_dataset(4, 52);
  SeededRng r1(9), r2(9);
  ChunkBatch a = sample_chunks(d, 8, 10, r1, true);
  ChunkBatch b = sample_chunks(d, 8, 10, r2, true);
  CHECK(a.origin == b.origin);
  for (std::size_t t = 0; t < a.obs.size(); ++t) {
    CHECK(a.obs[t] == b.obs[t]);
    CHECK(a.act[t] == b.act[t]);
  }
}

TEST_CASE("sample_chunks: oversized chunk length is rejected") {
  Dataset d = make_pointmass_dataset(2, 53);
  SeededRng rng(1);
  CHECK_THROWS_AS(sample_chunks(d, 2, d.at(0).length() + 1, rng, true), DomainError);
}

TEST_CASE("sample_chunks: offsets are uniform over valid positions") {
  Dataset d = make_pointmass_dataset(2, 54);  // 2 x 50 steps
  const Eigen::Index chunk = 41;              // 10 valid offsets per trajectory
  const int draws = 10000;
  SeededRng rng(2);
  std::vector<int> counts(20, 0);
  for (int i = 0; i < draws; ++i) {
    ChunkBatch batch = sample_chunks(d, 1, chunk, rng, false);
    const auto [traj, offset] = batch.origin[0];
    counts[traj * 10 + static_cast<std::size_t>(offset)]++;
  }
  const double expected = draws / 20.0;
  const double se = std::sqrt(draws * (1.0 / 20) * (19.0 / 20));
  for (int c : counts) {
    CHECK(std::abs(c - expected) <= 4.0 * se);
  }
}
