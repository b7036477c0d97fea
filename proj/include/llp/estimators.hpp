#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/data.hpp"
#include "llp/finite_class.hpp"
#include "llp/random.hpp"

// Loss rules on label-proportion bags.
//
// Five rules are implemented:
//   EPRM01  exact proportion matching, 0-1 on bags: 1{f_bar != alpha}
//   PM_SQ   square proportion matching: (f_bar - alpha)^2, optionally k-scaled
//   PM_LOG  cross-entropy proportion matching with clamped f_bar
//   DSQ     debiased square: k-scaled square risk minus (k-1)(Ef_hat - p_hat)^2
//   EZ      per-bag unbiased estimate of the instance 0-1 risk
//
// The numeric kernels below take bag summaries (predicted mean, label count)
// so that the same formulas back the empirical estimators, the exact
// enumeration oracle, and the fast threshold-class sweep.

namespace llp {

struct LossRule {
  enum class Tag { EPRM01, PM_SQ, PM_LOG, DSQ, EZ };
  enum class PMode { Known, Plugin, Split };

  Tag tag = Tag::PM_SQ;
  bool k_scaled = false;    // PM_SQ only: multiply the bag loss by k
  double eps_log = 1e-7;    // PM_LOG / log-loss clamp
  PMode p_mode = PMode::Plugin;
  double p = std::numeric_limits<double>::quiet_NaN();  // used when Known
  std::uint64_t split_seed = 0;                         // used when Split

  static LossRule eprm() { return {Tag::EPRM01}; }
  static LossRule pm_sq(bool k_scaled = false) {
    LossRule r{Tag::PM_SQ};
    r.k_scaled = k_scaled;
    return r;
  }
  static LossRule pm_log(double eps = 1e-7) {
    LossRule r{Tag::PM_LOG};
    r.eps_log = eps;
    return r;
  }
  static LossRule dsq_known(double p) {
    LossRule r{Tag::DSQ};
    r.p_mode = PMode::Known;
    r.p = p;
    return r;
  }
  static LossRule dsq_plugin() {
    LossRule r{Tag::DSQ};
    r.p_mode = PMode::Plugin;
    return r;
  }
  static LossRule ez_known(double p) {
    LossRule r{Tag::EZ};
    r.p_mode = PMode::Known;
    r.p = p;
    return r;
  }
  static LossRule ez_plugin() {
    LossRule r{Tag::EZ};
    r.p_mode = PMode::Plugin;
    return r;
  }
  static LossRule ez_split(std::uint64_t seed) {
    LossRule r{Tag::EZ};
    r.p_mode = PMode::Split;
    r.split_seed = seed;
    return r;
  }
};

inline const char* to_string(LossRule::Tag t) {
  switch (t) {
    case LossRule::Tag::EPRM01: return "eprm01";
    case LossRule::Tag::PM_SQ: return "pm-sq";
    case LossRule::Tag::PM_LOG: return "pm-log";
    case LossRule::Tag::DSQ: return "dsq";
    case LossRule::Tag::EZ: return "ez";
  }
  return "?";
}

// ---- numeric kernels -------------------------------------------------------

// EPRM 0-1 bag loss from exact integer counts.
inline double eprm_loss_counts(int pred_count, int label_count) {
  return pred_count == label_count ? 0.0 : 1.0;
}

inline double pm_sq_loss(double f_bar, double alpha, int k, bool k_scaled) {
  double d = f_bar - alpha;
  return k_scaled ? static_cast<double>(k) * d * d : d * d;
}

inline double pm_log_loss(double f_bar, double alpha, double eps) {
  double c = std::clamp(f_bar, eps, 1.0 - eps);
  return -alpha * std::log(c) - (1.0 - alpha) * std::log(1.0 - c);
}

// Per-bag unbiased estimate of the instance 0-1 risk:
//   (k(alpha - p) + p)(1 - f_bar) + (k(p - alpha) + (1 - p)) f_bar
inline double ez_loss(double f_bar, double alpha, double p, int k) {
  double a = static_cast<double>(k) * (alpha - p) + p;
  double c = static_cast<double>(k) * (p - alpha) + (1.0 - p);
  return a * (1.0 - f_bar) + c * f_bar;
}

// ---- predictor-level bag losses -------------------------------------------

// Exact predicted label count of a finite hypothesis on a bag.
inline int predicted_count(const FiniteHypothesis& f, const Bag& bag) {
  int c = 0;
  for (const Instance& x : bag.instances) c += f.predict_index(instance_index(x));
  return c;
}

// Mean prediction over the bag.  For finite hypotheses this is an exact
// integer count divided by k.
inline double predicted_mean(const Predictor& f, const Bag& bag) {
  if (f.is_finite()) {
    return static_cast<double>(predicted_count(*f.finite, bag)) /
           static_cast<double>(bag.instances.size());
  }
  double s = 0.0;
  for (const Instance& x : bag.instances) s += f(x);
  return s / static_cast<double>(bag.instances.size());
}

// EPRM compares exact integer counts, so it only accepts finite hypotheses;
// real-valued predictors have no exact proportion to match.
inline double eprm_bag_loss(const Predictor& f, const Bag& bag) {
  if (!f.is_finite()) {
    throw std::invalid_argument(
        "eprm_bag_loss: proportion matching with an indicator loss requires a "
        "binary finite hypothesis");
  }
  return eprm_loss_counts(predicted_count(*f.finite, bag), bag.label_count);
}

inline double pm_sq_bag_loss(const Predictor& f, const Bag& bag, bool k_scaled) {
  return pm_sq_loss(predicted_mean(f, bag), bag.alpha(),
                    static_cast<int>(bag.instances.size()), k_scaled);
}

inline double pm_log_bag_loss(const Predictor& f, const Bag& bag, double eps) {
  return pm_log_loss(predicted_mean(f, bag), bag.alpha(), eps);
}

inline double ez_bag_loss(const Predictor& f, const Bag& bag, double p) {
  return ez_loss(predicted_mean(f, bag), bag.alpha(), p,
                 static_cast<int>(bag.instances.size()));
}

// ---- summation -------------------------------------------------------------

// Fixed-tree pairwise sum: the reduction order depends only on the length, so
// parallel callers that fill `v` by index get bit-identical results regardless
// of scheduling.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("pairwise_mean: empty input");
  return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

// ---- dataset-level risks ----------------------------------------------------

inline double resolve_p(const LossRule& rule, const BagDataset& ds) {
  switch (rule.p_mode) {
    case LossRule::PMode::Known:
      if (!std::isfinite(rule.p)) {
        throw std::invalid_argument("LossRule: p_mode=known but p is not set");
      }
      return rule.p;
    case LossRule::PMode::Plugin:
      return ds.p_hat();
    case LossRule::PMode::Split:
      throw std::invalid_argument("resolve_p: split mode has no single p");
  }
  throw std::invalid_argument("resolve_p: bad p_mode");
}

struct DsqRisk {
  double dsq = 0.0;   // sq - bias_hat
  double sq = 0.0;    // (1/n) sum_i k (f_bar_i - alpha_i)^2
  double bias_hat = 0.0;  // (k-1) (Ef_hat - p_hat)^2
};

// Debiased square risk.  The square term is k-scaled; the bias estimate uses
// the dataset mean prediction against p (known or plugin).
inline DsqRisk dsq_empirical_risk(const Predictor& f, const BagDataset& ds,
                                  const LossRule& rule) {
  if (rule.p_mode == LossRule::PMode::Split) {
    throw std::invalid_argument("dsq_empirical_risk: split mode is not defined "
                                "for the debiased square rule");
  }
  std::size_t n = ds.n();
  int k = ds.k;
  std::vector<double> sq_terms(n), means(n);
  for (std::size_t i = 0; i < n; ++i) {
    double fb = predicted_mean(f, ds.bags[i]);
    double d = fb - ds.bags[i].alpha();
    sq_terms[i] = static_cast<double>(k) * d * d;
    means[i] = fb;
  }
  DsqRisk r;
  r.sq = pairwise_mean(sq_terms);
  double ef = pairwise_mean(means);
  double p = resolve_p(rule, ds);
  double dev = ef - p;
  r.bias_hat = static_cast<double>(k - 1) * dev * dev;
  r.dsq = r.sq - r.bias_hat;
  return r;
}

// Deterministic even/odd split of bag indices after a seeded shuffle.  Even
// positions estimate p, odd positions carry the risk average.
struct SplitIndices {
  std::vector<std::size_t> p_half;
  std::vector<std::size_t> risk_half;
};

inline SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 2) {
    throw std::invalid_argument(
        "split mode requires at least 2 bags, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  SplitIndices s;
  for (std::size_t pos = 0; pos < n; ++pos) {
    (pos % 2 == 0 ? s.p_half : s.risk_half).push_back(order[pos]);
  }
  return s;
}

inline double ez_empirical_risk(const Predictor& f, const BagDataset& ds,
                                const LossRule& rule) {
  if (rule.p_mode == LossRule::PMode::Split) {
    SplitIndices s = split_indices(ds.n(), rule.split_seed);
    double p_hat = 0.0;
    for (std::size_t i : s.p_half) p_hat += ds.bags[i].alpha();
    p_hat /= static_cast<double>(s.p_half.size());
    std::vector<double> losses(s.risk_half.size());
    for (std::size_t j = 0; j < s.risk_half.size(); ++j) {
      const Bag& b = ds.bags[s.risk_half[j]];
      losses[j] = ez_loss(predicted_mean(f, b), b.alpha(), p_hat, ds.k);
    }
    return pairwise_mean(losses);
  }
  double p = resolve_p(rule, ds);
  std::vector<double> losses(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const Bag& b = ds.bags[i];
    losses[i] = ez_loss(predicted_mean(f, b), b.alpha(), p, ds.k);
  }
  return pairwise_mean(losses);
}

// Offset estimate of the risk difference L(f) - L(fstar).  Algebraically equal
// to ez risk(f) minus ez risk(fstar) at the same p; the p-dependent parts
// cancel, which is what makes the split-sample analysis go through.
inline double ez_offset(const Predictor& f, const Predictor& fstar,
                        const BagDataset& ds, double p) {
  int k = ds.k;
  std::vector<double> terms(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const Bag& b = ds.bags[i];
    double coeff =
        static_cast<double>(k) * (2.0 * b.alpha() - 2.0 * p) + (2.0 * p - 1.0);
    terms[i] = coeff * (predicted_mean(fstar, b) - predicted_mean(f, b));
  }
  return pairwise_mean(terms);
}

// Instance-level 0-1 risk against the retained true labels.  Real-valued
// predictions are thresholded at 0.5 with ties going to class 1.
inline double zero_one_risk(const Predictor& f, const BagDataset& ds) {
  if (!ds.true_labels) {
    throw std::invalid_argument("zero_one_risk: dataset has no true labels");
  }
  std::size_t errors = 0, total = 0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const Bag& b = ds.bags[i];
    const auto& ls = (*ds.true_labels)[i];
    for (std::size_t j = 0; j < b.instances.size(); ++j) {
      int pred = f(b.instances[j]) >= 0.5 ? 1 : 0;
      errors += (pred != ls[j]);
      ++total;
    }
  }
  return static_cast<double>(errors) / static_cast<double>(total);
}

// Canonical empirical objective a minimizer optimizes for each rule.
inline double empirical_risk(const LossRule& rule, const Predictor& f,
                             const BagDataset& ds) {
  switch (rule.tag) {
    case LossRule::Tag::EPRM01: {
      std::vector<double> losses(ds.n());
      for (std::size_t i = 0; i < ds.n(); ++i) {
        losses[i] = eprm_bag_loss(f, ds.bags[i]);
      }
      return pairwise_mean(losses);
    }
    case LossRule::Tag::PM_SQ: {
      std::vector<double> losses(ds.n());
      for (std::size_t i = 0; i < ds.n(); ++i) {
        losses[i] = pm_sq_bag_loss(f, ds.bags[i], rule.k_scaled);
      }
      return pairwise_mean(losses);
    }
    case LossRule::Tag::PM_LOG: {
      std::vector<double> losses(ds.n());
      for (std::size_t i = 0; i < ds.n(); ++i) {
        losses[i] = pm_log_bag_loss(f, ds.bags[i], rule.eps_log);
      }
      return pairwise_mean(losses);
    }
    case LossRule::Tag::DSQ:
      return dsq_empirical_risk(f, ds, rule).dsq;
    case LossRule::Tag::EZ:
      return ez_empirical_risk(f, ds, rule);
  }
  throw std::invalid_argument("empirical_risk: bad rule tag");
}

}  // namespace llp
