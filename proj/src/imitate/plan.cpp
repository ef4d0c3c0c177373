#include "aime/imitate/plan.hpp"

#include <cmath>

#include "aime/diff/adam.hpp"

namespace aime::imitate {

using namespace aime::diff;
using wm::SSMArrays;
using wm::SSMConfig;
using wm::StateBelief;

PlanResult plan_actions(const wm::WorldModel& model, const Matrix& observations,
                        const PlanConfig& cfg, std::uint64_t seed) {
  const SSMConfig& mcfg = model.config();
  const Eigen::Index horizon = observations.rows();
  if (horizon < 1) throw ShapeError("plan_actions: empty observation sequence");
  if (observations.cols() != mcfg.obs_dim) throw ShapeError("plan_actions: bad observation dim");
  const std::string frozen_hash = model.params_hash();

  // One latent-noise draw shared by every iteration.
  SeededRng noise_rng(derive_seed(seed, "plan-noise"));
  std::vector<Matrix> noise_draws;
  {
    wm::GaussianNoise src(noise_rng);
    for (Eigen::Index t = 0; t < horizon; ++t) noise_draws.push_back(src.next(mcfg.stoch_size, 1));
  }

  ParamStore variables;
  variables.add("plan.u", Matrix::Zero(mcfg.action_dim, horizon));
  AdamOptimizer optimizer(variables, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});

  const auto evaluate = [&](Tape& tape, const Array& u, const SSMArrays& arrays) {
    StateBelief belief = wm::initial_belief(tape, mcfg, 1);
    Array rec_sum, kl_sum;
    for (Eigen::Index t = 0; t < horizon; ++t) {
      Array action = vtanh(cols(u, t, 1));
      Array obs = tape.constant(observations.row(t).transpose());
      belief = wm::posterior_step(arrays, mcfg, belief, action, wm::encode(arrays, mcfg, obs),
                                  tape.constant(noise_draws[static_cast<std::size_t>(t)]));
      Gaussian dec = wm::decode(arrays, mcfg, belief.h, belief.s);
      Array rec_t = gaussian_logpdf(dec, obs);
      Array kl_t = kl_diag_gaussian(belief.posterior, belief.prior);
      rec_sum = t == 0 ? rec_t : add(rec_sum, rec_t);
      kl_sum = t == 0 ? kl_t : add(kl_sum, kl_t);
    }
    return add(sum(rec_sum), sum(neg(kl_sum)));
  };

  PlanResult result;
  Matrix best_u = variables.at("plan.u");
  double best_j = -std::numeric_limits<double>::infinity();
  Tape tape;
  for (int iter = 0; iter <= cfg.iterations; ++iter) {
    tape.clear();
    TapeBinding model_bind(tape, model.params(), false);
    TapeBinding var_bind(tape, variables, true);
    SSMArrays arrays = wm::bind_ssm(model_bind, mcfg);
    Array u = var_bind["plan.u"];
    Array objective = evaluate(tape, u, arrays);
    const double j = objective.value()(0, 0);
    if (!std::isfinite(j)) {
      throw NumericalError("plan_actions: non-finite objective", iter);
    }
    if (iter == 0) result.initial_objective = j;
    if (j > best_j) {
      best_j = j;
      best_u = u.value();
    }
    if (iter == cfg.iterations) break;  // final iterate evaluated, no further update
    tape.backward(neg(objective));
    optimizer.step(var_bind);
  }

  if (model.params_hash() != frozen_hash) {
    throw FrozenViolation("plan_actions: world-model parameters changed");
  }
  result.best_objective = best_j;
  result.actions = best_u.array().tanh().matrix().transpose();
  return result;
}

}  // namespace aime::imitate
