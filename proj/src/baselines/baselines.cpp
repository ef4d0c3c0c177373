#include "aime/baselines/baselines.hpp"

#include <cmath>

#include "aime/diff/adam.hpp"

namespace aime::baselines {

using namespace aime::diff;

void to_json(nlohmann::ordered_json& j, const BaselinesConfig& cfg) {
  j = nlohmann::ordered_json{
      {"stack", cfg.stack},       {"hidden", cfg.hidden},
      {"layers", cfg.layers},     {"epochs", cfg.epochs},
      {"steps_per_epoch", cfg.steps_per_epoch},
      {"batch", cfg.batch},       {"lr", cfg.lr},
      {"grad_clip", cfg.grad_clip},
      {"val_fraction", cfg.val_fraction},
  };
}

void from_json(const nlohmann::ordered_json& j, BaselinesConfig& cfg) {
  cfg.stack = j.value("stack", cfg.stack);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.layers = j.value("layers", cfg.layers);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.grad_clip = j.value("grad_clip", cfg.grad_clip);
  cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
}

namespace {

Eigen::Index pair_count(const data::Dataset& dataset) {
  Eigen::Index n = 0;
  for (const data::Trajectory& tr : dataset.trajectories()) n += tr.length();
  return n;
}

}  // namespace

PairSet idm_pairs(const data::Dataset& dataset, int stack) {
  if (!dataset.has_actions()) throw DomainError("idm_pairs: actions required");
  const int d = dataset.obs_dim();
  PairSet out;
  out.inputs.resize((stack + 1) * d, pair_count(dataset));
  out.targets.resize(dataset.action_dim(), out.inputs.cols());
  Eigen::Index col = 0;
  for (const data::Trajectory& tr : dataset.trajectories()) {
    for (Eigen::Index t = 0; t < tr.length(); ++t, ++col) {
      out.inputs.block(0, col, stack * d, 1) = stacked_input(tr, t, stack);
      out.inputs.block(stack * d, col, d, 1) = tr.observations.row(t).transpose();
      out.targets.col(col) = tr.actions->row(t).transpose();
    }
  }
  return out;
}

PairSet bc_pairs(const data::Dataset& dataset, int stack) {
  if (!dataset.has_actions()) throw DomainError("bc_pairs: actions required");
  const int d = dataset.obs_dim();
  PairSet out;
  out.inputs.resize(stack * d, pair_count(dataset));
  out.targets.resize(dataset.action_dim(), out.inputs.cols());
  Eigen::Index col = 0;
  for (const data::Trajectory& tr : dataset.trajectories()) {
    for (Eigen::Index t = 0; t < tr.length(); ++t, ++col) {
      out.inputs.col(col) = stacked_input(tr, t, stack);
      out.targets.col(col) = tr.actions->row(t).transpose();
    }
  }
  return out;
}

PairSet forward_pairs(const data::Dataset& dataset, int stack) {
  if (!dataset.has_actions()) throw DomainError("forward_pairs: actions required");
  const int d = dataset.obs_dim();
  PairSet out;
  out.inputs.resize(stack * d + dataset.action_dim(), pair_count(dataset));
  out.targets.resize(d, out.inputs.cols());
  Eigen::Index col = 0;
  for (const data::Trajectory& tr : dataset.trajectories()) {
    for (Eigen::Index t = 0; t < tr.length(); ++t, ++col) {
      out.inputs.block(0, col, stack * d, 1) = stacked_input(tr, t, stack);
      out.inputs.block(stack * d, col, dataset.action_dim(), 1) = tr.actions->row(t).transpose();
      out.targets.col(col) = tr.observations.row(t).transpose();
    }
  }
  return out;
}

std::pair<PairSet, PairSet> split_pairs(const PairSet& pairs, double val_fraction,
                                        std::uint64_t seed) {
  const Eigen::Index n = pairs.size();
  if (n < 2) throw DomainError("split_pairs: need at least two pairs");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  SeededRng rng(derive_seed(seed, "pair-split"));
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  Eigen::Index val_n = static_cast<Eigen::Index>(std::llround(val_fraction * static_cast<double>(n)));
  val_n = std::clamp<Eigen::Index>(val_n, 1, n - 1);

  PairSet train, val;
  train.inputs.resize(pairs.inputs.rows(), n - val_n);
  train.targets.resize(pairs.targets.rows(), n - val_n);
  val.inputs.resize(pairs.inputs.rows(), val_n);
  val.targets.resize(pairs.targets.rows(), val_n);
  for (Eigen::Index i = 0; i < n - val_n; ++i) {
    train.inputs.col(i) = pairs.inputs.col(order[static_cast<std::size_t>(i)]);
    train.targets.col(i) = pairs.targets.col(order[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < val_n; ++i) {
    val.inputs.col(i) = pairs.inputs.col(order[static_cast<std::size_t>(n - val_n + i)]);
    val.targets.col(i) = pairs.targets.col(order[static_cast<std::size_t>(n - val_n + i)]);
  }
  return {std::move(train), std::move(val)};
}

ObsIdm::ObsIdm(StackedPolicyConfig cfg, int obs_dim, int action_dim, std::uint64_t seed)
    : config_(cfg), obs_dim_(obs_dim), action_dim_(action_dim) {
  SeededRng rng(derive_seed(seed, "obs-idm-init"));
  init_mlp(params_, "obsidm",
           MlpSpec{input_dim(), 2 * action_dim,
                   std::vector<int>(static_cast<std::size_t>(cfg.layers), cfg.hidden)},
           rng);
}

MlpArrays ObsIdm::bind(const TapeBinding& binding) const { return bind_mlp(binding, "obsidm"); }

TanhGaussian ObsIdm::dist(const MlpArrays& arrays, const Array& input) const {
  return tanh_gaussian_head(arrays, input);
}

Matrix ObsIdm::label(const Matrix& inputs) const {
  Tape tape;
  TapeBinding binding(tape, params_, false);
  MlpArrays arrays = bind_mlp(binding, "obsidm");
  return dist(arrays, tape.constant(inputs)).mean_action().value();
}

ObsForwardModel::ObsForwardModel(StackedPolicyConfig cfg, int obs_dim, int action_dim,
                                 std::uint64_t seed)
    : config_(cfg), obs_dim_(obs_dim), action_dim_(action_dim) {
  SeededRng rng(derive_seed(seed, "obs-fwd-init"));
  init_mlp(params_, "obsfwd",
           MlpSpec{input_dim(), obs_dim,
                   std::vector<int>(static_cast<std::size_t>(cfg.layers), cfg.hidden)},
           rng);
}

MlpArrays ObsForwardModel::bind(const TapeBinding& binding) const {
  return bind_mlp(binding, "obsfwd");
}

Gaussian ObsForwardModel::dist(const MlpArrays& arrays, const Array& input) const {
  Array mean = mlp_forward(arrays, input);
  Array ones = mean.tape()->constant(Matrix::Ones(mean.rows(), mean.cols()));
  return Gaussian(mean, ones);
}

namespace {

Matrix gather(const Matrix& source, const std::vector<Eigen::Index>& cols) {
  Matrix out(source.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = source.col(cols[i]);
  return out;
}

/// NLL of targets under the head; `tanh_head` picks the distribution family.
Array head_nll(const MlpArrays& arrays, bool tanh_head, Tape& tape, const Matrix& inputs,
               const Matrix& targets) {
  Array in = tape.constant(inputs);
  Array tg = tape.constant(targets);
  Array lp;
  if (tanh_head) {
    lp = TanhGaussian(gaussian_head(arrays, in)).log_prob(tg);
  } else {
    Array mean = mlp_forward(arrays, in);
    Array ones = tape.constant(Matrix::Ones(mean.rows(), mean.cols()));
    lp = gaussian_logpdf(Gaussian(mean, ones), tg);
  }
  return scale(sum(neg(lp)), 1.0 / static_cast<double>(inputs.cols()));
}

/// Minibatch NLL training with per-epoch validation and best-checkpoint
/// selection (the untrained initialization is a candidate too).
std::vector<SupervisedLog> train_supervised(ParamStore& store, const std::string& prefix,
                                            bool tanh_head, const PairSet& all,
                                            const BaselinesConfig& cfg, std::uint64_t seed,
                                            bool select_best = true) {
  auto [train, val] = split_pairs(all, cfg.val_fraction, seed);
  AdamOptimizer optimizer(store, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  SeededRng batch_rng(derive_seed(seed, "supervised-batch"));

  const auto eval_val = [&]() {
    Tape tape;
    TapeBinding binding(tape, store, false);
    MlpArrays arrays = bind_mlp(binding, prefix);
    return head_nll(arrays, tanh_head, tape, val.inputs, val.targets).value()(0, 0);
  };

  std::vector<SupervisedLog> log;
  std::vector<Matrix> best;
  double best_val = eval_val();
  for (std::size_t i = 0; i < store.size(); ++i) best.push_back(store.value(i));
  log.push_back(SupervisedLog{0, std::numeric_limits<double>::quiet_NaN(), best_val});

  Tape tape;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double train_nll = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::vector<Eigen::Index> pick(static_cast<std::size_t>(cfg.batch));
      for (auto& idx : pick) {
        idx = static_cast<Eigen::Index>(
            batch_rng.uniform_index(static_cast<std::uint64_t>(train.size())));
      }
      tape.clear();
      TapeBinding binding(tape, store, true);
      MlpArrays arrays = bind_mlp(binding, prefix);
      Array nll = head_nll(arrays, tanh_head, tape, gather(train.inputs, pick),
                           gather(train.targets, pick));
      if (!std::isfinite(nll.value()(0, 0))) {
        throw TrainingDiverged("supervised: loss diverged", epoch, step);
      }
      tape.backward(nll);
      optimizer.step(binding);
      train_nll += nll.value()(0, 0);
    }
    const double val_nll = eval_val();
    log.push_back(
        SupervisedLog{epoch, train_nll / static_cast<double>(cfg.steps_per_epoch), val_nll});
    if (val_nll < best_val) {
      best_val = val_nll;
      for (std::size_t i = 0; i < store.size(); ++i) best[i] = store.value(i);
    }
  }
  if (select_best) {
    for (std::size_t i = 0; i < store.size(); ++i) store.value(i) = best[i];
  }
  return log;
}

StackedPolicyConfig stacked_config(const BaselinesConfig& cfg) {
  return StackedPolicyConfig{cfg.stack, cfg.hidden, cfg.layers};
}

}  // namespace

IdmExplicitResult train_idm_explicit(const data::Dataset& body, const BaselinesConfig& cfg,
                                     std::uint64_t seed) {
  ObsIdm idm(stacked_config(cfg), body.obs_dim(), body.action_dim(), derive_seed(seed, "idm"));
  PairSet pairs = idm_pairs(body, cfg.stack);
  auto log = train_supervised(idm.params(), "obsidm", true, pairs, cfg, seed);
  return IdmExplicitResult{std::move(idm), std::move(log)};
}

BcoResult bco(const data::Dataset& body, const data::Dataset& demo, const BaselinesConfig& cfg,
              std::uint64_t seed) {
  if (demo.has_actions()) throw DomainError("bco: demo dataset must be action-free");
  IdmExplicitResult idm = train_idm_explicit(body, cfg, derive_seed(seed, "bco-idm"));

  // Label every demo step with the IDM mean, then clone.
  const int d = demo.obs_dim();
  PairSet labeled;
  Eigen::Index n = 0;
  for (const data::Trajectory& tr : demo.trajectories()) n += tr.length();
  labeled.inputs.resize(cfg.stack * d, n);
  Matrix idm_inputs((cfg.stack + 1) * d, n);
  Eigen::Index col = 0;
  for (const data::Trajectory& tr : demo.trajectories()) {
    for (Eigen::Index t = 0; t < tr.length(); ++t, ++col) {
      labeled.inputs.col(col) = stacked_input(tr, t, cfg.stack);
      idm_inputs.block(0, col, cfg.stack * d, 1) = labeled.inputs.col(col);
      idm_inputs.block(cfg.stack * d, col, d, 1) = tr.observations.row(t).transpose();
    }
  }
  labeled.targets = idm.idm.label(idm_inputs);

  StackedObsPolicy policy(stacked_config(cfg), d, body.action_dim(), derive_seed(seed, "bco-bc"));
  auto bc_log = train_supervised(policy.params(), "bcpol", true, labeled, cfg,
                                 derive_seed(seed, "bco-bc"));
  return BcoResult{std::move(policy), std::move(idm.log), std::move(bc_log)};
}

BcResult bc_oracle(const data::Dataset& demo_with_actions, const BaselinesConfig& cfg,
                   std::uint64_t seed) {
  PairSet pairs = bc_pairs(demo_with_actions, cfg.stack);
  StackedObsPolicy policy(stacked_config(cfg), demo_with_actions.obs_dim(),
                          demo_with_actions.action_dim(), derive_seed(seed, "bc-oracle"));
  auto log = train_supervised(policy.params(), "bcpol", true, pairs, cfg,
                              derive_seed(seed, "bc-oracle"));
  return BcResult{std::move(policy), std::move(log)};
}

ForwardModelResult train_forward_model(const data::Dataset& body, const BaselinesConfig& cfg,
                                       std::uint64_t seed) {
  ObsForwardModel forward(stacked_config(cfg), body.obs_dim(), body.action_dim(),
                          derive_seed(seed, "iidm-fwd"));
  PairSet fwd_pairs = forward_pairs(body, cfg.stack);
  auto log = train_supervised(forward.params(), "obsfwd", false, fwd_pairs, cfg,
                              derive_seed(seed, "iidm-fwd"));
  return ForwardModelResult{std::move(forward), std::move(log)};
}

IidmPolicyResult iidm_policy(const ObsForwardModel& forward, const data::Dataset& demo,
                             int action_dim, const BaselinesConfig& cfg, std::uint64_t seed) {
  if (demo.has_actions()) throw DomainError("iidm: demo dataset must be action-free");
  const std::string frozen = forward.params_hash();

  // Policy training: maximize demo next-observation likelihood with actions
  // sampled from the policy, gradients flowing through the forward model.
  const int d = demo.obs_dim();
  PairSet demo_pairs;  // inputs: stack_t, targets: o_{t+1}
  Eigen::Index n = 0;
  for (const data::Trajectory& tr : demo.trajectories()) n += tr.length();
  demo_pairs.inputs.resize(cfg.stack * d, n);
  demo_pairs.targets.resize(d, n);
  Eigen::Index col = 0;
  for (const data::Trajectory& tr : demo.trajectories()) {
    for (Eigen::Index t = 0; t < tr.length(); ++t, ++col) {
      demo_pairs.inputs.col(col) = stacked_input(tr, t, cfg.stack);
      demo_pairs.targets.col(col) = tr.observations.row(t).transpose();
    }
  }

  StackedObsPolicy policy(stacked_config(cfg), d, action_dim,
                          derive_seed(seed, "iidm-policy"));
  AdamOptimizer optimizer(policy.params(), AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  SeededRng batch_rng(derive_seed(seed, "iidm-batch"));
  SeededRng noise_rng(derive_seed(seed, "iidm-noise"));

  std::vector<SupervisedLog> policy_log;
  Tape tape;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double nll_sum = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::vector<Eigen::Index> pick(static_cast<std::size_t>(cfg.batch));
      for (auto& idx : pick) {
        idx = static_cast<Eigen::Index>(
            batch_rng.uniform_index(static_cast<std::uint64_t>(demo_pairs.size())));
      }
      tape.clear();
      TapeBinding fwd_bind(tape, forward.params(), false);
      TapeBinding pol_bind(tape, policy.params(), true);
      MlpArrays fwd_arrays = forward.bind(fwd_bind);
      MlpArrays pol_arrays = policy.bind(pol_bind);

      Array stack = tape.constant(gather(demo_pairs.inputs, pick));
      Array next_obs = tape.constant(gather(demo_pairs.targets, pick));
      Matrix noise(action_dim, cfg.batch);
      for (Eigen::Index i = 0; i < noise.size(); ++i) {
        noise(i % noise.rows(), i / noise.rows()) = noise_rng.normal();
      }
      Array action = policy.dist(pol_arrays, stack).sample(tape.constant(noise));
      Gaussian pred = forward.dist(fwd_arrays, vcat(stack, action));
      Array nll = scale(sum(neg(gaussian_logpdf(pred, next_obs))),
                        1.0 / static_cast<double>(cfg.batch));
      if (!std::isfinite(nll.value()(0, 0))) {
        throw TrainingDiverged("iidm: policy loss diverged", epoch, step);
      }
      tape.backward(nll);
      optimizer.step(pol_bind);
      nll_sum += nll.value()(0, 0);
    }
    policy_log.push_back(SupervisedLog{epoch, nll_sum / static_cast<double>(cfg.steps_per_epoch),
                                       std::numeric_limits<double>::quiet_NaN()});
  }

  if (forward.params_hash() != frozen) {
    throw FrozenViolation("iidm: forward model changed during policy training");
  }
  return IidmPolicyResult{std::move(policy), std::move(policy_log)};
}

IidmResult iidm(const data::Dataset& body, const data::Dataset& demo, const BaselinesConfig& cfg,
                std::uint64_t seed) {
  ForwardModelResult fwd = train_forward_model(body, cfg, seed);
  IidmPolicyResult pol = iidm_policy(fwd.forward, demo, body.action_dim(), cfg, seed);
  return IidmResult{std::move(pol.policy), std::move(fwd.forward), std::move(fwd.log),
                    std::move(pol.log)};
}

}  // namespace aime::baselines
