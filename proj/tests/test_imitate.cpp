#include <doctest.h>

#include <cmath>

#include "aime/diff/grad_check.hpp"
#include "aime/env/pointmass.hpp"
#include "aime/imitate/deploy.hpp"
#include "aime/imitate/idm.hpp"
#include "aime/imitate/plan.hpp"
#include "support.hpp"

using namespace aime;
using namespace aime::diff;
using namespace aime::imitate;

namespace {

env::LinGaussEnv noiseless_env(double init_spread = 0.15) {
  env::LinGaussConfig cfg = env::default_lingauss(true);
  cfg.params.p0.setConstant(init_spread * init_spread);
  return env::LinGaussEnv(cfg);
}

data::ChunkBatch demo_chunk(const data::Dataset& demo, Eigen::Index len, std::uint64_t seed,
                            Eigen::Index batch = 2) {
  SeededRng rng(seed);
  return data::sample_chunks(demo, batch, len, rng, false);
}

}  // namespace

TEST_CASE("aime_phase2: zero epochs return the fresh zero-mean policy") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  data::Dataset demo = data::strip_actions(testing::collect_lingauss_expert(env, 3, 1));

  ImitationConfig cfg;
  cfg.epochs = 0;
  cfg.chunk_len = 10;
  Phase2Result result = aime_phase2(model, demo, cfg, 5);
  CHECK(result.log.empty());

  // Zero-initialized output head: the mean action is exactly 0 everywhere.
  Tape tape;
  TapeBinding bind(tape, result.policy.params(), false);
  MlpArrays pol = result.policy.bind(bind);
  SeededRng rng(2);
  Matrix h(2, 3), s(2, 3);
  for (int i = 0; i < 6; ++i) {
    h(i / 3, i % 3) = rng.normal();
    s(i / 3, i % 3) = rng.normal();
  }
  TanhGaussian pi = result.policy.dist(pol, tape.constant(h), tape.constant(s));
  CHECK(pi.mean_action().value().isZero(0.0));
}

TEST_CASE("aime_phase2: rejects demo data that still carries actions") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  data::Dataset body = testing::collect_lingauss_expert(env, 2, 3);
  ImitationConfig cfg;
  CHECK_THROWS_AS(aime_phase2(model, body, cfg, 1), DomainError);
}

TEST_CASE("aime_phase2: world model is frozen through hundreds of updates") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  data::Dataset withActions = testing::collect_lingauss_expert(env, 6, 7);
  data::Dataset demo = data::strip_actions(withActions);

  const std::string before = model.params_hash();
  ImitationConfig cfg;
  cfg.epochs = 5;
  cfg.steps_per_epoch = 100;  // 500 updates
  cfg.batch = 4;
  cfg.chunk_len = 15;
  Phase2Result result = aime_phase2(model, demo, cfg, 11);
  CHECK(model.params_hash() == before);
  CHECK(result.log.size() == 5);
}

TEST_CASE("aime_phase2: amortized action inference recovers expert actions on LinGauss") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  data::Dataset withActions = testing::collect_lingauss_expert(env, 20, 42);
  data::Dataset demo = data::strip_actions(withActions);

  ImitationConfig cfg;
  cfg.epochs = 8;
  cfg.steps_per_epoch = 100;
  cfg.batch = 16;
  cfg.chunk_len = 25;
  Phase2Result result = aime_phase2(model, demo, cfg, 7, &withActions);
  CHECK(result.log.back().action_mse <= 1e-2);
  // The logged objective ascends overall.
  CHECK(result.log.back().j > result.log.front().j);
}

TEST_CASE("phase-2 objective: masks decompose exactly on identical sampled paths") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  data::Dataset demo = data::strip_actions(testing::collect_lingauss_expert(env, 4, 13));
  LatentPolicy policy(PolicyConfig{16, 1}, model.config().det_size, model.config().stoch_size,
                      model.config().action_dim, 17);

  data::ChunkBatch chunk = demo_chunk(demo, 12, 19);
  const auto full = evaluate_phase2_objective(model, policy, chunk, 23, ImitationConfig::Mask::full);
  const auto rec =
      evaluate_phase2_objective(model, policy, chunk, 23, ImitationConfig::Mask::rec_only);
  const auto kl =
      evaluate_phase2_objective(model, policy, chunk, 23, ImitationConfig::Mask::kl_only);
  CHECK(full.j == full.j_rec + full.j_kl);
  CHECK(rec.j == full.j_rec);
  CHECK(kl.j == full.j_kl);
  CHECK(std::abs(full.j - (rec.j + kl.j)) <= 1e-12);
}

TEST_CASE("phase-2 objective: policy-parameter gradient matches finite differences") {
  // Tiny world model and a 3-step chunk; the gradient flows through sampled
  // actions into the dynamics (the mechanism phase 2 relies on).
  wm::SSMConfig mcfg;
  mcfg.obs_dim = 2;
  mcfg.action_dim = 2;
  mcfg.det_size = 5;
  mcfg.stoch_size = 3;
  mcfg.hidden = 6;
  mcfg.hidden_layers = 1;
  wm::WorldModel model(mcfg, 29);
  LatentPolicy policy(PolicyConfig{6, 1}, 5, 3, 2, 31);
  // Perturb the zero head so the check is not run at a degenerate point.
  SeededRng prng(33);
  for (std::size_t i = 0; i < policy.params().size(); ++i) {
    Matrix& m = policy.params().value(i);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += 0.3 * prng.normal();
  }

  SeededRng drng(37);
  std::vector<Matrix> obs;
  for (int t = 0; t < 3; ++t) {
    Matrix o(2, 2);
    for (int i = 0; i < 4; ++i) o(i / 2, i % 2) = drng.normal();
    obs.push_back(o);
  }
  // Fixed noise draws shared across probe evaluations.
  std::vector<Matrix> lat_noise, act_noise;
  {
    SeededRng lrng(41), arng(43);
    wm::GaussianNoise ln(lrng), an(arng);
    for (int t = 0; t < 3; ++t) {
      act_noise.push_back(an.next(2, 2));
      lat_noise.push_back(ln.next(3, 2));
    }
  }

  std::vector<Matrix> point;
  const auto names = policy.params().names();
  for (std::size_t i = 0; i < names.size(); ++i) point.push_back(policy.params().value(i));

  auto fn = [&](Tape& t, const std::vector<Array>& v) {
    TapeBinding model_bind(t, model.params(), false);
    wm::SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
    MlpArrays pol;
    for (std::size_t i = 0; i < v.size(); i += 2) {
      pol.w.push_back(v[i]);
      pol.b.push_back(v[i + 1]);
    }
    wm::StateBelief belief = wm::initial_belief(t, mcfg, 2);
    Array rec_sum, kl_sum;
    for (int step = 0; step < 3; ++step) {
      TanhGaussian pi = policy.dist(pol, belief.h, belief.s);
      Array action = pi.sample(t.constant(act_noise[static_cast<std::size_t>(step)]));
      Array o = t.constant(obs[static_cast<std::size_t>(step)]);
      belief = wm::posterior_step(arrays, mcfg, belief, action, wm::encode(arrays, mcfg, o),
                                  t.constant(lat_noise[static_cast<std::size_t>(step)]));
      Gaussian dec = wm::decode(arrays, mcfg, belief.h, belief.s);
      Array rec_t = gaussian_logpdf(dec, o);
      Array kl_t = kl_diag_gaussian(belief.posterior, belief.prior);
      rec_sum = step == 0 ? rec_t : add(rec_sum, rec_t);
      kl_sum = step == 0 ? kl_t : add(kl_sum, kl_t);
    }
    return scale(add(sum(rec_sum), sum(neg(kl_sum))), 0.5);
  };
  CHECK(grad_check(fn, point, 1e-5).max_rel_err <= 1e-4);
}

TEST_CASE("joint_kl_check: the policy term cancels to floating-point noise") {
  SeededRng seeds(51);
  for (int trial = 0; trial < 20; ++trial) {
    wm::SSMConfig mcfg;
    mcfg.obs_dim = 2 + static_cast<int>(seeds.uniform_index(3));
    mcfg.action_dim = 1 + static_cast<int>(seeds.uniform_index(3));
    mcfg.det_size = 4 + static_cast<int>(seeds.uniform_index(5));
    mcfg.stoch_size = 2 + static_cast<int>(seeds.uniform_index(4));
    mcfg.hidden = 8;
    mcfg.hidden_layers = 1;
    wm::WorldModel model(mcfg, 100 + trial);
    LatentPolicy policy(PolicyConfig{8, 1}, mcfg.det_size, mcfg.stoch_size, mcfg.action_dim,
                        200 + trial);
    // Random head so the policy log-terms are far from zero.
    SeededRng prng(300 + trial);
    for (std::size_t i = 0; i < policy.params().size(); ++i) {
      Matrix& m = policy.params().value(i);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += 0.5 * prng.normal();
    }

    const Eigen::Index len = 1 + static_cast<Eigen::Index>(seeds.uniform_index(8));
    data::ChunkBatch chunk;
    SeededRng orng(400 + trial);
    for (Eigen::Index t = 0; t < len; ++t) {
      Matrix o(mcfg.obs_dim, 2);
      for (Eigen::Index i = 0; i < o.size(); ++i) o(i % o.rows(), i / o.rows()) = orng.normal();
      chunk.obs.push_back(o);
    }
    auto res = joint_kl_check(model, policy, chunk, 500 + trial);
    CHECK(std::abs(res.lhs - res.rhs) <= 1e-10);
  }
}

TEST_CASE("joint_kl_check: holds for a near-deterministic policy and long chunks") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  data::Dataset demo = data::strip_actions(testing::collect_lingauss_expert(env, 4, 61));

  LatentPolicy policy(PolicyConfig{16, 1}, model.config().det_size, model.config().stoch_size,
                      model.config().action_dim, 63);
  // Drive the pre-tanh stddev to its floor: log-prob magnitudes get large,
  // the cancellation must still be exact.
  policy.params().at("policy.b1").bottomRows(model.config().action_dim).setConstant(-40.0);

  for (Eigen::Index len : {1, 5, 30}) {
    data::ChunkBatch chunk = demo_chunk(demo, len, 65u + static_cast<std::uint64_t>(len));
    auto res = joint_kl_check(model, policy, chunk, 67);
    CHECK(std::abs(res.lhs - res.rhs) <= 1e-10);
  }
}

TEST_CASE("plan_actions: flat objective returns the zero initialization") {
  wm::WorldModel model = testing::action_blind_model(2, 2);
  SeededRng rng(71);
  Matrix obs(1, 2);
  obs << rng.normal(), rng.normal();
  PlanConfig cfg;
  cfg.iterations = 50;
  PlanResult res = plan_actions(model, obs, cfg, 73);
  CHECK(res.actions == Matrix::Zero(1, 2));
  CHECK(res.best_objective == res.initial_objective);
}

TEST_CASE("plan_actions: recovers true actions on noiseless invertible LinGauss") {
  env::LinGaussConfig cfg = env::default_lingauss(true);
  cfg.params.p0.setZero();  // known initial state: the optimum is the true sequence
  env::LinGaussEnv env(cfg);
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  env::Task task = env.task("regulate");
  auto rnd = data::uniform_random_policy(2);
  data::Dataset demos = data::collect(env, task, *rnd, 2, 42);

  PlanConfig pcfg;
  pcfg.iterations = 1000;
  pcfg.lr = 0.1;
  double mse = 0.0;
  Eigen::Index count = 0;
  for (std::size_t k = 0; k < demos.size(); ++k) {
    const auto& tr = demos.at(k);
    PlanResult res = plan_actions(model, tr.observations, pcfg, 100 + k);
    mse += (res.actions - *tr.actions).squaredNorm();
    count += tr.actions->size();
    CHECK(res.best_objective >= res.initial_objective);
  }
  CHECK(mse / static_cast<double>(count) <= 1e-3);
}

TEST_CASE("plan_actions: never loses to its initialization on random models") {
  SeededRng seeds(81);
  for (int trial = 0; trial < 5; ++trial) {
    wm::SSMConfig mcfg;
    mcfg.obs_dim = 2;
    mcfg.action_dim = 2;
    mcfg.det_size = 6;
    mcfg.stoch_size = 3;
    mcfg.hidden = 8;
    mcfg.hidden_layers = 1;
    wm::WorldModel model(mcfg, 900 + trial);
    Matrix obs(6, 2);
    for (Eigen::Index i = 0; i < obs.size(); ++i)
      obs(i % obs.rows(), i / obs.rows()) = seeds.normal();
    PlanConfig pcfg;
    pcfg.iterations = 40;
    PlanResult res = plan_actions(model, obs, pcfg, 910 + trial);
    CHECK(res.best_objective >= res.initial_objective);
  }
}

TEST_CASE("train_idm_head: learns a constant-action dataset and leaves the model frozen") {
  env::LinGaussEnv env = noiseless_env();
  env::Task task = env.task("regulate");

  class ConstantPolicy final : public data::RolloutPolicy {
   public:
    void begin_episode(std::uint64_t) override {}
    env::Vector act(const env::Vector&, const env::Vector&) override {
      env::Vector a(2);
      a << 0.4, -0.3;
      return a;
    }
  } constant_policy;
  data::Dataset body = data::collect(env, task, constant_policy, 6, 91);

  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  const std::string frozen = model.params_hash();
  IdmConfig cfg;
  cfg.epochs = 8;
  cfg.steps_per_epoch = 50;
  cfg.batch = 8;
  cfg.chunk_len = 15;
  IdmResult result = train_idm_head(model, body, cfg, 93);
  CHECK(model.params_hash() == frozen);

  // Mean prediction approaches the constant action.
  Tape tape;
  TapeBinding model_bind(tape, model.params(), false);
  TapeBinding idm_bind(tape, result.idm.params(), false);
  wm::SSMArrays arrays = wm::bind_ssm(model_bind, model.config());
  MlpArrays idm_arrays = result.idm.bind(idm_bind);
  SeededRng srng(95);
  data::ChunkBatch chunk = data::sample_chunks(body, 6, 10, srng, true);
  wm::StateBelief belief = wm::initial_belief(tape, model.config(), 6);
  double err = 0.0;
  int count = 0;
  SeededRng nrng(97);
  wm::GaussianNoise noise(nrng);
  for (Eigen::Index t = 0; t < chunk.length(); ++t) {
    Array feat = tape.constant(chunk.obs[static_cast<std::size_t>(t)]);
    TanhGaussian pred = result.idm.dist(idm_arrays, belief.h, belief.s, feat);
    Matrix mean = pred.mean_action().value();
    for (Eigen::Index j = 0; j < mean.cols(); ++j) {
      err += std::abs(mean(0, j) - 0.4) + std::abs(mean(1, j) + 0.3);
      count += 2;
    }
    belief = wm::posterior_step(arrays, model.config(), belief,
                                tape.constant(chunk.act[static_cast<std::size_t>(t)]), feat,
                                tape.constant(noise.next(model.config().stoch_size, 6)));
  }
  CHECK(err / count <= 0.05);

  // Held-out likelihood beats a fresh initialization.
  data::Dataset held = data::collect(env, task, constant_policy, 3, 99);
  LatentIdm fresh(cfg, model.config().det_size, model.config().stoch_size,
                  model.config().feature_dim(), model.config().action_dim, 101);
  const double trained_ll = idm_log_likelihood(model, result.idm, held, 8, 15, 103);
  const double fresh_ll = idm_log_likelihood(model, fresh, held, 8, 15, 103);
  CHECK(trained_ll > fresh_ll);
}

TEST_CASE("aime_idm_phase2: matched distributions give zero divergence, model stays frozen") {
  env::LinGaussEnv env = noiseless_env();
  wm::WorldModel model = testing::exact_lingauss_model(env.params());
  const auto& mcfg = model.config();

  // IDM that ignores the feature block and equals the policy head exactly.
  LatentPolicy policy(PolicyConfig{8, 1}, mcfg.det_size, mcfg.stoch_size, mcfg.action_dim, 111);
  SeededRng prng(113);
  for (std::size_t i = 0; i < policy.params().size(); ++i) {
    Matrix& m = policy.params().value(i);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += 0.4 * prng.normal();
  }
  IdmConfig icfg;
  icfg.hidden = 8;
  icfg.layers = 1;
  LatentIdm idm(icfg, mcfg.det_size, mcfg.stoch_size, mcfg.feature_dim(), mcfg.action_dim, 115);
  {
    const Matrix& pw0 = policy.params().at("policy.w0");
    Matrix& iw0 = idm.params().at("idm.w0");
    iw0.setZero();
    iw0.leftCols(pw0.cols()) = pw0;
    idm.params().at("idm.b0") = policy.params().at("policy.b0");
    idm.params().at("idm.w1") = policy.params().at("policy.w1");
    idm.params().at("idm.b1") = policy.params().at("policy.b1");
  }

  Tape tape;
  TapeBinding pol_bind(tape, policy.params(), false);
  TapeBinding idm_bind(tape, idm.params(), false);
  MlpArrays pol = policy.bind(pol_bind);
  MlpArrays idm_arrays = idm.bind(idm_bind);
  SeededRng rng(117);
  Matrix h(mcfg.det_size, 2), s(mcfg.stoch_size, 2), f(mcfg.feature_dim(), 2);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i % h.rows(), i / h.rows()) = rng.normal();
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i % s.rows(), i / s.rows()) = rng.normal();
  for (Eigen::Index i = 0; i < f.size(); ++i) f(i % f.rows(), i / f.rows()) = rng.normal();
  TanhGaussian q = idm.dist(idm_arrays, tape.constant(h), tape.constant(s), tape.constant(f));
  TanhGaussian pi = policy.dist(pol, tape.constant(h), tape.constant(s));
  CHECK(kl_tanh_gaussian(q, pi).value().cwiseAbs().maxCoeff() == 0.0);

  // End-to-end variant run preserves the frozen stores.
  data::Dataset withActions = testing::collect_lingauss_expert(env, 6, 119);
  data::Dataset demo = data::strip_actions(withActions);
  IdmResult trained = train_idm_head(model, withActions, icfg, 121);
  const std::string model_hash = model.params_hash();
  const std::string idm_hash = trained.idm.params().sha256();
  ImitationConfig p2;
  p2.epochs = 2;
  p2.steps_per_epoch = 30;
  p2.batch = 4;
  p2.chunk_len = 15;
  Phase2Result res = aime_idm_phase2(model, trained.idm, demo, p2, 123, &withActions);
  CHECK(model.params_hash() == model_hash);
  CHECK(trained.idm.params().sha256() == idm_hash);
  CHECK(res.log.size() == 2);
}

TEST_CASE("deploy_policy: a fresh zero-mean policy reproduces the no-op rollout bit-exactly") {
  env::PointMassConfig pcfg;
  pcfg.mode = env::ObsMode::lpomdp;
  env::PointMassEnv env(pcfg);
  env::Task task = env.task("reach-east");

  wm::SSMConfig mcfg;
  mcfg.obs_dim = env.obs_dim();
  mcfg.action_dim = env.action_dim();
  mcfg.det_size = 8;
  mcfg.stoch_size = 4;
  mcfg.hidden = 8;
  mcfg.hidden_layers = 1;
  wm::WorldModel model(mcfg, 131);
  LatentPolicy policy(PolicyConfig{8, 1}, 8, 4, 2, 133);  // zero head -> mean action 0

  auto returns = deploy_policy(model, policy, env, task, 4, 135);
  auto again = deploy_policy(model, policy, env, task, 4, 135);
  CHECK(returns == again);

  class NoOp final : public data::RolloutPolicy {
   public:
    void begin_episode(std::uint64_t) override {}
    env::Vector act(const env::Vector&, const env::Vector&) override {
      return env::Vector::Zero(2);
    }
  } noop;
  data::Dataset ref = data::collect(env, task, noop, 4, 135);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(returns[e] == ref.at(e).episode_return());
  }
}

TEST_CASE("normalized_return: anchors expert at 100 and the random baseline at 0") {
  CHECK(normalized_return({10.0, 10.0}, 10.0, 2.0) == doctest::Approx(100.0));
  CHECK(normalized_return({2.0}, 10.0, 2.0) == doctest::Approx(0.0));
  CHECK(normalized_return({6.0}, 10.0, 2.0) == doctest::Approx(50.0));
  CHECK_THROWS_AS(normalized_return({1.0}, 5.0, 5.0), DomainError);
}
