#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "llp/harness.hpp"

// Self-check suite behind the `verify` command: every library-level invariant
// exercised with fixed seeds, reported as a machine-readable verdict.  The
// output is a pure function of the build, so reruns must be byte-identical.
//
// Fault injections exist to prove the checks can fail: each one corrupts a
// specific quantity inside the corresponding check and nothing else.

namespace llp {

enum class FaultInjection { None, DsqBiasSignFlip, EzWrongP };

inline const char* to_string(FaultInjection f) {
  switch (f) {
    case FaultInjection::None: return "none";
    case FaultInjection::DsqBiasSignFlip: return "dsq-bias-sign-flip";
    case FaultInjection::EzWrongP: return "ez-wrong-p";
  }
  return "?";
}

struct VerifyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyReport {
  bool all_pass = false;
  FaultInjection fault = FaultInjection::None;
  std::vector<VerifyCheck> checks;
};

namespace detail {

// Small random discrete instance: support size in [2, max_support], bernoulli
// labels, index-encoded points.
inline DiscreteDistribution random_discrete(Rng& rng, std::size_t max_support) {
  std::size_t m = 2 + rng.uniform_below(max_support - 1);
  DiscreteDistribution dist;
  std::vector<double> w(m);
  double total = 0.0;
  for (double& v : w) {
    v = 0.05 + rng.uniform01();
    total += v;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double prob = i + 1 == m ? 1.0 - acc : w[i] / total;
    acc += prob;
    dist.xs.push_back(Instance{{static_cast<double>(i)}});
    dist.ys.push_back(rng.bernoulli(0.5) ? 1 : 0);
    dist.probs.push_back(prob);
  }
  dist.validate();
  return dist;
}

inline Predictor random_table_predictor(Rng& rng, std::size_t support) {
  std::vector<double> v(support);
  for (double& x : v) x = rng.uniform01();
  return Predictor::from_function([v](const Instance& x) {
    return v[instance_index(x)];
  });
}

inline std::string fmt(double v) { return format_double(v); }

}  // namespace detail

inline VerifyReport verify_suite(FaultInjection fault = FaultInjection::None,
                                 unsigned threads = 1) {
  VerifyReport rep;
  rep.fault = fault;
  auto add = [&](std::string name, bool pass, std::string detail) {
    rep.checks.push_back({std::move(name), pass, std::move(detail)});
  };

  // Debiased-square decomposition on random real-valued predictors: the
  // identity, nonnegativity of the square term, and the two-sided bias bound
  // 0 <= B <= (k-1)/k * SQ.
  {
    Rng rng(101);
    const double tol = 1e-9;
    bool id_ok = true, sq_ok = true, bias_ok = true;
    double worst_low = 0.0, worst_high = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
      int k = 2 + static_cast<int>(rng.uniform_below(7));
      std::size_t n = 3 + rng.uniform_below(38);
      double a = 4.0 * rng.uniform01() - 2.0;
      double b = 4.0 * rng.uniform01() - 2.0;
      double q = rng.uniform01();
      std::vector<Instance> xs;
      std::vector<std::uint8_t> ys;
      for (std::size_t i = 0; i < n * static_cast<std::size_t>(k); ++i) {
        xs.push_back(Instance{{2.0 * rng.uniform01() - 1.0}});
        ys.push_back(rng.bernoulli(q) ? 1 : 0);
      }
      BagDataset ds = make_bags_in_order(std::move(xs), std::move(ys), k);
      Predictor f = Predictor::from_function([a, b](const Instance& x) {
        return sigmoid(a * x.features[0] + b);
      });
      DsqRisk r = dsq_empirical_risk(f, ds, LossRule::dsq_plugin());
      if (fault == FaultInjection::DsqBiasSignFlip) {
        r.bias_hat = -r.bias_hat;
        r.dsq = r.sq - r.bias_hat;
      }
      id_ok = id_ok && r.dsq == r.sq - r.bias_hat;
      sq_ok = sq_ok && r.sq >= 0.0;
      double cap = static_cast<double>(k - 1) / static_cast<double>(k) * r.sq;
      worst_low = std::min(worst_low, r.bias_hat);
      worst_high = std::max(worst_high, r.bias_hat - cap);
      bias_ok = bias_ok && r.bias_hat >= -tol && r.bias_hat <= cap + tol;
    }
    add("debias-identity", id_ok, "dsq == sq - bias on 1000 random pairs");
    add("debias-sq-nonneg", sq_ok, "square term nonnegative on 1000 random pairs");
    add("debias-bias-bound", bias_ok,
        "bias within [0, (k-1)/k sq]; min bias " + detail::fmt(worst_low) +
            ", max excess over cap " + detail::fmt(worst_high));
  }

  // Exact enumeration: EZ unbiasedness against the soft risk, and the square
  // loss expectation identity.  Both to 1e-12 on 20 random small instances.
  {
    Rng rng(202);
    double max_ez = 0.0, max_sq = 0.0, max_gap_vs_analytic = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      DiscreteDistribution dist = detail::random_discrete(rng, 4);
      int k = 1 + static_cast<int>(rng.uniform_below(6));
      Predictor f = detail::random_table_predictor(rng, dist.support_size());
      double p_true = dist.p();
      double p_used =
          p_true + (fault == FaultInjection::EzWrongP ? 0.05 : 0.0);
      double expect =
          exact_expected_bag_loss(LossRule::ez_known(p_used), f, dist, k);
      double soft = exact_soft_risk(f, dist);
      double gap = std::abs(expect - soft);
      max_ez = std::max(max_ez, gap);
      // the estimate is linear in p, so a wrong p shifts it by exactly
      // delta (k-1) (2 E f - 1)
      double analytic = (p_used - p_true) * static_cast<double>(k - 1) *
                        (2.0 * expected_prediction(f, dist) - 1.0);
      max_gap_vs_analytic =
          std::max(max_gap_vs_analytic, std::abs((expect - soft) - analytic));

      double sq =
          exact_expected_bag_loss(LossRule::pm_sq(false), f, dist, k);
      double inst_sq = exact_square_risk(f, dist);
      double ef = expected_prediction(f, dist);
      double dev = ef - p_true;
      double identity = inst_sq / static_cast<double>(k) +
                        static_cast<double>(k - 1) / static_cast<double>(k) *
                            dev * dev;
      max_sq = std::max(max_sq, std::abs(sq - identity));
    }
    add("ez-unbiased-enum", max_ez <= 1e-12,
        "max |E[ez] - soft risk| = " + detail::fmt(max_ez) +
            "; |bias - analytic offset| = " +
            detail::fmt(max_gap_vs_analytic));
    add("square-identity-enum", max_sq <= 1e-12,
        "max identity gap " + detail::fmt(max_sq));
  }

  // Separation condition of the lower-bound family at d=6.
  {
    Rng rng(303);
    bool ok = true;
    double worst = std::numeric_limits<double>::infinity();
    for (double gamma : {0.5, 0.0625}) {
      LowerBoundFamily fam;
      fam.d = 6;
      fam.gamma = gamma;
      std::size_t count = fam.index_count();
      for (int trial = 0; trial < 200; ++trial) {
        std::size_t j = rng.uniform_below(count);
        std::size_t i = rng.uniform_below(count);
        std::size_t i2 = rng.uniform_below(count - 1);
        if (i2 >= i) ++i2;
        double v = separation_check(fam, j, i, i2);
        worst = std::min(worst, v - gamma);
        ok = ok && v >= gamma - 1e-12;
      }
    }
    add("separation-condition", ok,
        "min(value - gamma) = " + detail::fmt(worst) + " over 400 triples");
  }

  // gamma = 1/2 means labels are the member coordinate exactly.
  {
    LowerBoundFamily fam;
    fam.d = 6;
    fam.gamma = 0.5;
    fam.member = 11;
    BagDataset ds = lower_bound_sample(fam, 40, 5, 404);
    bool ok = ds.true_labels.has_value();
    for (std::size_t i = 0; ok && i < ds.n(); ++i) {
      for (std::size_t j = 0; j < ds.bags[i].instances.size(); ++j) {
        if ((*ds.true_labels)[i][j] !=
            static_cast<std::uint8_t>(
                ds.bags[i].instances[j].features[fam.member])) {
          ok = false;
          break;
        }
      }
    }
    add("lower-bound-deterministic", ok,
        "gamma = 1/2 labels equal the member coordinate");
  }

  // Finite differences agree with the analytic gradient for every rule and
  // both architectures.
  {
    Rng rng(505);
    double worst = 0.0;
    for (GradRule rule : {GradRule::EZLog, GradRule::EZSq, GradRule::PMLog,
                          GradRule::PMSq, GradRule::DebiasedSq}) {
      for (bool mlp : {false, true}) {
        std::vector<Instance> xs;
        std::vector<std::uint8_t> ys;
        for (int i = 0; i < 15; ++i) {
          xs.push_back(Instance{{2.0 * rng.uniform01() - 1.0,
                                 2.0 * rng.uniform01() - 1.0}});
          ys.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        BagDataset ds = make_bags_in_order(std::move(xs), std::move(ys), 3);
        auto model = mlp ? ParametricModel::mlp(2, 6) : ParametricModel::linear(2);
        model.init(rng.next_u64());
        std::vector<const Bag*> batch;
        for (const Bag& b : ds.bags) batch.push_back(&b);
        TrainConfig cfg;
        cfg.rule = rule;
        cfg.beta = 0.6;
        BatchState st{0.5, ds.p_hat()};
        worst = std::max(worst, grad_check(model, batch, cfg, st).max_rel_err);
      }
    }
    add("grad-check", worst < 1e-5,
        "max rel err " + detail::fmt(worst) + " over 5 rules x 2 archs");
  }

  // Full-batch debiased square with beta = 0 equals the debiased risk.
  {
    Rng rng(606);
    std::vector<Instance> xs;
    std::vector<std::uint8_t> ys;
    for (int i = 0; i < 40; ++i) {
      xs.push_back(Instance{{2.0 * rng.uniform01() - 1.0}});
      ys.push_back(rng.bernoulli(0.4) ? 1 : 0);
    }
    BagDataset ds = make_bags_in_order(std::move(xs), std::move(ys), 5);
    auto model = ParametricModel::linear(1);
    model.init(99);
    std::vector<const Bag*> batch;
    for (const Bag& b : ds.bags) batch.push_back(&b);
    TrainConfig cfg;
    cfg.rule = GradRule::DebiasedSq;
    cfg.beta = 0.0;
    BatchState st{0.77, ds.p_hat()};
    double loss = batch_loss_and_grad(model, batch, cfg, st).loss;
    double oracle =
        dsq_empirical_risk(model.as_predictor(), ds, LossRule::dsq_plugin()).dsq;
    double gap = std::abs(loss - oracle);
    add("dsq-beta0-identity", gap <= 1e-10, "gap " + detail::fmt(gap));
  }

  // Sweeps are a pure function of the spec: rerun and a different thread count
  // must serialize to the same bytes.
  {
    SweepSpec spec;
    spec.instance = "prop32";
    spec.rule = LossRule::pm_sq();
    spec.k = 3;
    spec.n_grid = {20, 40};
    spec.trials = 3;
    spec.seed = 7;
    std::string once = sweep_csv_string(run_sweep(spec, 1));
    std::string again = sweep_csv_string(run_sweep(spec, 1));
    std::string threaded = sweep_csv_string(run_sweep(spec, 4));
    bool ok = once == again && once == threaded;
    add("sweep-determinism", ok,
        ok ? "rerun and threads=4 byte-identical"
           : "rerun or thread count changed the CSV");
  }

  // Rate fitting recovers an exact power law.
  {
    std::vector<SweepRow> rows;
    for (std::size_t n : {100, 200, 400, 800}) {
      SweepRow r;
      r.n = n;
      r.excess_risk = 0.37 / static_cast<double>(n);
      rows.push_back(r);
    }
    RateFit fit = fit_rate(rows);
    double gap = std::abs(fit.slope + 1.0);
    add("rate-fit-power-law", gap <= 1e-6,
        "slope " + detail::fmt(fit.slope) + ", |slope + 1| = " +
            detail::fmt(gap));
  }

  // Estimation needs 1/eps^2 samples while learning is geometric.
  {
    EstimationGapSpec spec;
    spec.trials = 1500;
    spec.seed = 808;
    EstimationGapReport gap = estimation_vs_learning(spec, threads);
    bool ok = gap.unbiased && gap.std_slope > -0.6 && gap.std_slope < -0.4 &&
              gap.learning_slope <= -0.75;
    add("estimation-gap", ok,
        "std slope " + detail::fmt(gap.std_slope) + ", learning slope " +
            (gap.learning_measurable ? detail::fmt(gap.learning_slope)
                                     : std::string("-inf")) +
            ", max bias " + detail::fmt(gap.max_bias_sigmas) + " sigmas");
  }

  rep.all_pass = true;
  for (const VerifyCheck& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
  return rep;
}

inline nlohmann::ordered_json verify_report_json(const VerifyReport& rep) {
  nlohmann::ordered_json j;
  j["all_pass"] = rep.all_pass;
  j["fault"] = to_string(rep.fault);
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const VerifyCheck& c : rep.checks) {
    nlohmann::ordered_json q;
    q["name"] = c.name;
    q["pass"] = c.pass;
    q["detail"] = c.detail;
    checks.push_back(q);
  }
  j["checks"] = checks;
  return j;
}

}  // namespace llp
