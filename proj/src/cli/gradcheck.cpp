#include "aime/cli/gradcheck.hpp"

#include <cstdio>
#include <functional>

#include "aime/diff/grad_check.hpp"
#include "aime/diff/nets.hpp"
#include "aime/imitate/policy.hpp"
#include "aime/wm/elbo.hpp"

namespace aime::cli {

using namespace aime::diff;

namespace {

Matrix random_matrix(int r, int c, SeededRng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

struct Registry {
  std::vector<GradCheckCase> cases;
  void run(const std::string& name, double tol, const ScalarFn& fn,
           const std::vector<Matrix>& point, double step = 1e-5) {
    GradCheckCase c;
    c.name = name;
    c.tolerance = tol;
    c.max_rel_err = grad_check(fn, point, step).max_rel_err;
    c.passed = c.max_rel_err <= tol;
    cases.push_back(c);
  }
};

wm::SSMConfig tiny_ssm(int obs = 3, int act = 2) {
  wm::SSMConfig cfg;
  cfg.obs_dim = obs;
  cfg.action_dim = act;
  cfg.det_size = 6;
  cfg.stoch_size = 3;
  cfg.hidden = 8;
  cfg.hidden_layers = 1;
  return cfg;
}

// Assembles MLP/GRU views over probe leaves laid out in ParamStore order.
wm::SSMArrays arrays_from_leaves(const std::vector<std::string>& names,
                                 const std::vector<Array>& v, const wm::SSMConfig& cfg) {
  wm::SSMArrays arrays;
  auto mlp_from = [&](const std::string& prefix) {
    MlpArrays out;
    for (int k = 0;; ++k) {
      bool found = false;
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == prefix + ".w" + std::to_string(k)) {
          out.w.push_back(v[i]);
          found = true;
        } else if (names[i] == prefix + ".b" + std::to_string(k)) {
          out.b.push_back(v[i]);
        }
      }
      if (!found) break;
    }
    return out;
  };
  if (cfg.encoder == wm::SSMConfig::Encoder::mlp) arrays.enc = mlp_from("phi.enc");
  arrays.post = mlp_from("phi.post");
  arrays.prior = mlp_from("theta.prior");
  arrays.dec = mlp_from("theta.dec");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "theta.gru.wx") arrays.gru.wx = v[i];
    if (names[i] == "theta.gru.wh") arrays.gru.wh = v[i];
    if (names[i] == "theta.gru.bx") arrays.gru.bx = v[i];
    if (names[i] == "theta.gru.bh") arrays.gru.bh = v[i];
  }
  return arrays;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_suite() {
  Registry reg;
  SeededRng rng(20240);

  // --- elementwise and fused distribution blocks (1e-6)
  {
    const Matrix x = random_matrix(5, 3, rng);
    auto unary_case = [&](const std::string& name, auto op) {
      reg.run(name, 1e-6,
              [op](Tape&, const std::vector<Array>& v) { return sum(op(v[0])); }, {x});
    };
    unary_case("elementwise/elu", [](const Array& a) { return elu(a); });
    unary_case("elementwise/sigmoid", [](const Array& a) { return sigmoid(a); });
    unary_case("elementwise/softplus", [](const Array& a) { return softplus(a); });
    unary_case("elementwise/tanh", [](const Array& a) { return vtanh(a); });
    unary_case("elementwise/exp", [](const Array& a) { return vexp(a); });
    unary_case("elementwise/square", [](const Array& a) { return square(a); });
  }
  {
    std::vector<Matrix> point{random_matrix(3, 2, rng), random_matrix(3, 2, rng, 0.5),
                              random_matrix(3, 2, rng), random_matrix(3, 2, rng, 0.5),
                              random_matrix(3, 2, rng)};
    reg.run("dist/kl-diag-gaussian", 1e-6,
            [](Tape&, const std::vector<Array>& v) {
              Gaussian q(v[0], add_scalar(softplus(v[1]), 1e-3));
              Gaussian p(v[2], add_scalar(softplus(v[3]), 1e-3));
              return sum(kl_diag_gaussian(q, p));
            },
            point);
    reg.run("dist/gaussian-logpdf", 1e-6,
            [](Tape&, const std::vector<Array>& v) {
              Gaussian d(v[0], add_scalar(softplus(v[1]), 1e-3));
              return sum(gaussian_logpdf(d, v[4]));
            },
            point);
    const Matrix noise = random_matrix(3, 2, rng);
    reg.run("dist/rsample", 1e-6,
            [noise](Tape& t, const std::vector<Array>& v) {
              Gaussian d(v[0], add_scalar(softplus(v[1]), 1e-3));
              return sum(square(rsample(d, t.constant(noise))));
            },
            point);
    const Matrix act = random_matrix(3, 2, rng, 0.4);
    reg.run("dist/tanh-gaussian-logprob", 1e-6,
            [act](Tape& t, const std::vector<Array>& v) {
              TanhGaussian d(v[0], add_scalar(softplus(v[1]), 1e-3));
              return sum(d.log_prob(t.constant(act.array().tanh().matrix())));
            },
            point);
  }

  // --- network blocks (1e-6)
  {
    ParamStore store;
    SeededRng init(1);
    init_mlp(store, "f", MlpSpec{3, 2, {5, 4}}, init);
    std::vector<Matrix> point{random_matrix(3, 2, rng)};
    for (std::size_t i = 0; i < store.size(); ++i) point.push_back(store.value(i));
    reg.run("nets/mlp-forward", 1e-6,
            [](Tape&, const std::vector<Array>& v) {
              MlpArrays mlp;
              for (std::size_t i = 1; i < v.size(); i += 2) {
                mlp.w.push_back(v[i]);
                mlp.b.push_back(v[i + 1]);
              }
              return sum(square(mlp_forward(mlp, v[0])));
            },
            point);
  }
  {
    ParamStore store;
    SeededRng init(2);
    init_gru(store, "g", GruSpec{3, 4}, init);
    std::vector<Matrix> point{random_matrix(3, 2, rng), random_matrix(4, 2, rng),
                              store.at("g.wx"), store.at("g.wh"),
                              random_matrix(12, 1, rng, 0.2), random_matrix(12, 1, rng, 0.2)};
    reg.run("nets/gru-step", 1e-6,
            [](Tape&, const std::vector<Array>& v) {
              GruArrays g{v[2], v[3], v[4], v[5]};
              return sum(square(gru_step(g, v[0], v[1])));
            },
            point);
  }

  // --- model paths
  const wm::SSMConfig cfg = tiny_ssm();
  wm::WorldModel model(cfg, 3);
  const auto names = model.params().names();

  {
    // Two chained recurrent steps, gradient w.r.t. both actions (1e-5).
    const Matrix n0 = random_matrix(3, 1, rng);
    reg.run("model/prior-two-steps", 1e-5,
            [&](Tape& t, const std::vector<Array>& v) {
              TapeBinding bind(t, model.params(), false);
              wm::SSMArrays arrays = wm::bind_ssm(bind, cfg);
              wm::StateBelief belief = wm::initial_belief(t, cfg, 1);
              auto [h1, prior1] = wm::prior_step(arrays, cfg, belief, v[0]);
              wm::StateBelief mid;
              mid.h = h1;
              mid.s = rsample(prior1, t.constant(n0));
              auto [h2, prior2] = wm::prior_step(arrays, cfg, mid, v[1]);
              return add(sum(square(prior2.mean)), sum(square(h2)));
            },
            {random_matrix(2, 1, rng), random_matrix(2, 1, rng)});
  }
  {
    // Posterior step: downstream reconstruction w.r.t. the action (1e-5).
    const Matrix obs = random_matrix(3, 1, rng);
    const Matrix noise = random_matrix(3, 1, rng);
    reg.run("model/posterior-action-grad", 1e-5,
            [&](Tape& t, const std::vector<Array>& v) {
              TapeBinding bind(t, model.params(), false);
              wm::SSMArrays arrays = wm::bind_ssm(bind, cfg);
              wm::StateBelief next =
                  wm::posterior_step(arrays, cfg, wm::initial_belief(t, cfg, 1), v[0],
                                     t.constant(obs), t.constant(noise));
              Gaussian dec = wm::decode(arrays, cfg, next.h, next.s);
              return sum(gaussian_logpdf(dec, t.constant(obs)));
            },
            {random_matrix(2, 1, rng)});
  }
  {
    // Full sequence objective w.r.t. every model parameter (1e-4).
    wm::SSMConfig lcfg = tiny_ssm();
    lcfg.decoder_var = wm::SSMConfig::DecoderVar::learned;
    wm::WorldModel lmodel(lcfg, 4);
    const auto lnames = lmodel.params().names();
    std::vector<Matrix> obs_m, act_m, noise_m;
    for (int t = 0; t < 3; ++t) {
      obs_m.push_back(random_matrix(3, 2, rng));
      act_m.push_back(random_matrix(2, 2, rng));
      noise_m.push_back(random_matrix(3, 2, rng));
    }
    std::vector<Matrix> point;
    for (std::size_t i = 0; i < lmodel.params().size(); ++i) {
      point.push_back(lmodel.params().value(i));
    }
    reg.run("model/elbo-parameters", 1e-4,
            [&](Tape& t, const std::vector<Array>& v) {
              wm::SSMArrays arrays = arrays_from_leaves(lnames, v, lcfg);
              std::vector<Array> obs, act;
              for (int s = 0; s < 3; ++s) {
                obs.push_back(t.constant(obs_m[static_cast<std::size_t>(s)]));
                act.push_back(t.constant(act_m[static_cast<std::size_t>(s)]));
              }
              wm::ReplayNoise noise(noise_m);
              return wm::elbo_terms(arrays, lcfg, obs, act, noise).total;
            },
            point);
  }
  {
    // Phase-2 objective w.r.t. policy parameters through sampled actions (1e-4).
    imitate::LatentPolicy policy(imitate::PolicyConfig{6, 1}, cfg.det_size, cfg.stoch_size,
                                 cfg.action_dim, 5);
    SeededRng jitter(6);
    for (std::size_t i = 0; i < policy.params().size(); ++i) {
      Matrix& m = policy.params().value(i);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += 0.3 * jitter.normal();
    }
    std::vector<Matrix> obs_m, lat_noise, act_noise;
    for (int t = 0; t < 3; ++t) {
      obs_m.push_back(random_matrix(3, 2, rng));
      lat_noise.push_back(random_matrix(3, 2, rng));
      act_noise.push_back(random_matrix(2, 2, rng));
    }
    std::vector<Matrix> point;
    for (std::size_t i = 0; i < policy.params().size(); ++i) {
      point.push_back(policy.params().value(i));
    }
    reg.run("imitation/policy-grad-through-actions", 1e-4,
            [&](Tape& t, const std::vector<Array>& v) {
              TapeBinding bind(t, model.params(), false);
              wm::SSMArrays arrays = wm::bind_ssm(bind, cfg);
              MlpArrays pol;
              for (std::size_t i = 0; i < v.size(); i += 2) {
                pol.w.push_back(v[i]);
                pol.b.push_back(v[i + 1]);
              }
              wm::StateBelief belief = wm::initial_belief(t, cfg, 2);
              Array rec_sum, kl_sum;
              for (int step = 0; step < 3; ++step) {
                TanhGaussian pi = policy.dist(pol, belief.h, belief.s);
                Array action = pi.sample(t.constant(act_noise[static_cast<std::size_t>(step)]));
                Array o = t.constant(obs_m[static_cast<std::size_t>(step)]);
                belief = wm::posterior_step(arrays, cfg, belief, action, o,
                                            t.constant(lat_noise[static_cast<std::size_t>(step)]));
                Gaussian dec = wm::decode(arrays, cfg, belief.h, belief.s);
                Array rec_t = gaussian_logpdf(dec, o);
                Array kl_t = kl_diag_gaussian(belief.posterior, belief.prior);
                rec_sum = step == 0 ? rec_t : add(rec_sum, rec_t);
                kl_sum = step == 0 ? kl_t : add(kl_sum, kl_t);
              }
              return scale(add(sum(rec_sum), sum(neg(kl_sum))), 0.5);
            },
            point);
  }
  {
    // MLP-encoder feature path (1e-6).
    wm::SSMConfig ecfg = tiny_ssm();
    ecfg.encoder = wm::SSMConfig::Encoder::mlp;
    ecfg.encoder_out = 4;
    wm::WorldModel emodel(ecfg, 7);
    reg.run("model/encoder-mlp", 1e-6,
            [&](Tape& t, const std::vector<Array>& v) {
              TapeBinding bind(t, emodel.params(), false);
              wm::SSMArrays arrays = wm::bind_ssm(bind, ecfg);
              return sum(square(wm::encode(arrays, ecfg, v[0])));
            },
            {random_matrix(3, 2, rng)});
  }

  return reg.cases;
}

bool report_gradcheck(const std::vector<GradCheckCase>& cases) {
  bool all = true;
  std::printf("%-40s %12s %10s  %s\n", "check", "max-rel-err", "tolerance", "status");
  for (const GradCheckCase& c : cases) {
    std::printf("%-40s %12.3e %10.0e  %s\n", c.name.c_str(), c.max_rel_err, c.tolerance,
                c.passed ? "PASS" : "FAIL");
    all = all && c.passed;
  }
  std::printf("%zu checks, %s\n", cases.size(), all ? "all passed" : "FAILURES present");
  return all;
}

}  // namespace aime::cli
