#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/distribution.hpp"
#include "llp/estimators.hpp"
#include "llp/finite_class.hpp"
#include "llp/parallel.hpp"

// Exact computations used as oracles: population risks, exact expected bag
// losses by enumeration, and exhaustive empirical risk minimization over a
// finite class.

namespace llp {

// Population 0-1 risk of a (thresholded) predictor under a finite distribution.
inline double exact_risk(const Predictor& f, const DiscreteDistribution& dist) {
  double r = 0.0;
  for (std::size_t i = 0; i < dist.support_size(); ++i) {
    int pred = f(dist.xs[i]) >= 0.5 ? 1 : 0;
    if (pred != dist.ys[i]) r += dist.probs[i];
  }
  return r;
}

// E[f(x)] under the instance marginal.
inline double expected_prediction(const Predictor& f,
                                  const DiscreteDistribution& dist) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.support_size(); ++i) {
    s += dist.probs[i] * f(dist.xs[i]);
  }
  return s;
}

// E[y(1 - f(x)) + (1 - y) f(x)]: what the EZ estimator is unbiased for.
// Coincides with exact_risk for binary predictors.
inline double exact_soft_risk(const Predictor& f,
                              const DiscreteDistribution& dist) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.support_size(); ++i) {
    double v = f(dist.xs[i]);
    s += dist.probs[i] * (dist.ys[i] ? 1.0 - v : v);
  }
  return s;
}

// E[(f(x) - y)^2]; also coincides with exact_risk for binary predictors.
inline double exact_square_risk(const Predictor& f,
                                const DiscreteDistribution& dist) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.support_size(); ++i) {
    double d = f(dist.xs[i]) - static_cast<double>(dist.ys[i]);
    s += dist.probs[i] * d * d;
  }
  return s;
}

// Mismatch probability floor for a predictor at disagreement rate q from the
// labeling rule, over a bag of k independent draws:
//   1/2 - (1/2) (1 - 2q)^k
// equivalently the probability that Binomial(k, q) is odd.
inline double exact_proportional_risk(double q, int k) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("exact_proportional_risk: q must be in [0, 1]");
  }
  if (k < 1) throw std::invalid_argument("exact_proportional_risk: k must be >= 1");
  return 0.5 - 0.5 * std::pow(1.0 - 2.0 * q, k);
}

// Same quantity summed term by term; an independent cross-check route.
inline double binomial_odd_probability(double q, int k) {
  double total = 0.0;
  double coeff = 1.0;  // C(k, j), updated incrementally
  for (int j = 0; j <= k; ++j) {
    if (j % 2 == 1) {
      total += coeff * std::pow(q, j) * std::pow(1.0 - q, k - j);
    }
    coeff = coeff * static_cast<double>(k - j) / static_cast<double>(j + 1);
  }
  return total;
}

namespace detail {

// Per-atom view of a predictor for enumeration: exact 0/1 for finite
// hypotheses, real values in [0, 1] otherwise.
struct AtomPredictions {
  std::vector<double> value;
  bool integral = false;
};

inline AtomPredictions atom_predictions(const Predictor& f,
                                        const DiscreteDistribution& dist) {
  AtomPredictions ap;
  ap.integral = f.is_finite();
  ap.value.reserve(dist.support_size());
  for (const Instance& x : dist.xs) ap.value.push_back(f(x));
  return ap;
}

inline double bag_loss_from_summary(const LossRule& rule, double pred_sum,
                                    bool integral, int label_count, int k,
                                    double p) {
  double alpha = static_cast<double>(label_count) / static_cast<double>(k);
  double f_bar = pred_sum / static_cast<double>(k);
  switch (rule.tag) {
    case LossRule::Tag::EPRM01:
      if (!integral) {
        throw std::invalid_argument(
            "exact_expected_bag_loss: the indicator rule requires a binary "
            "finite hypothesis");
      }
      return eprm_loss_counts(static_cast<int>(std::lround(pred_sum)),
                              label_count);
    case LossRule::Tag::PM_SQ:
      return pm_sq_loss(f_bar, alpha, k, rule.k_scaled);
    case LossRule::Tag::PM_LOG:
      return pm_log_loss(f_bar, alpha, rule.eps_log);
    case LossRule::Tag::EZ:
      return ez_loss(f_bar, alpha, p, k);
    case LossRule::Tag::DSQ:
      throw std::invalid_argument(
          "exact_expected_bag_loss: the debiased square objective is "
          "dataset-level, not a bag loss");
  }
  throw std::invalid_argument("exact_expected_bag_loss: bad rule tag");
}

// Full m^k enumeration, depth-first with running products/sums.
inline long double enumerate_sequences(const LossRule& rule,
                                       const AtomPredictions& ap,
                                       const DiscreteDistribution& dist, int k,
                                       double p) {
  std::size_t m = dist.support_size();
  long double total = 0.0L;
  auto walk = [&](auto&& self, int depth, long double weight, double pred_sum,
                  int label_count) -> void {
    if (depth == k) {
      total += weight * static_cast<long double>(bag_loss_from_summary(
                            rule, pred_sum, ap.integral, label_count, k, p));
      return;
    }
    for (std::size_t a = 0; a < m; ++a) {
      self(self, depth + 1, weight * static_cast<long double>(dist.probs[a]),
           pred_sum + ap.value[a], label_count + dist.ys[a]);
    }
  };
  walk(walk, 0, 1.0L, 0.0, 0);
  return total;
}

// Composition enumeration: occupancy counts (c_1..c_m), sum k, weighted by
// exact multinomial coefficients.  The coefficient is carried down the
// recursion as an exact unsigned __int128 (fits for k <= 40, m <= 8, max
// ~1.9e31 < 2^127), updated one count at a time via C(left, c) =
// C(left, c-1) (left-c+1)/c, which stays integral at every step.
inline long double enumerate_compositions(const LossRule& rule,
                                          const AtomPredictions& ap,
                                          const DiscreteDistribution& dist,
                                          int k, double p) {
  std::size_t m = dist.support_size();
  // probs[a]^c for the closing atom, so leaves cost O(1).
  std::vector<long double> last_pow(static_cast<std::size_t>(k) + 1, 1.0L);
  for (int c = 1; c <= k; ++c) {
    last_pow[c] = last_pow[c - 1] * static_cast<long double>(dist.probs[m - 1]);
  }
  long double total = 0.0L;
  auto walk = [&](auto&& self, std::size_t atom, int left,
                  unsigned __int128 coeff, long double prob_product,
                  double pred_sum, int label_count) -> void {
    if (atom + 1 == m) {
      long double w = static_cast<long double>(coeff) * prob_product *
                      last_pow[left];
      double ps = pred_sum + static_cast<double>(left) * ap.value[atom];
      int lc = label_count + left * dist.ys[atom];
      total += w * static_cast<long double>(bag_loss_from_summary(
                       rule, ps, ap.integral, lc, k, p));
      return;
    }
    unsigned __int128 binom = 1;  // C(left, c), updated as c grows
    long double pw = 1.0L;        // probs[atom]^c
    double ps = pred_sum;
    int lc = label_count;
    for (int c = 0; c <= left; ++c) {
      if (c > 0) {
        binom = binom * static_cast<unsigned>(left - c + 1) /
                static_cast<unsigned>(c);
        pw *= static_cast<long double>(dist.probs[atom]);
        ps += ap.value[atom];
        lc += dist.ys[atom];
      }
      self(self, atom + 1, left - c, coeff * binom, prob_product * pw, ps, lc);
    }
  };
  walk(walk, 0, k, 1, 1.0L, 0.0, 0);
  return total;
}

}  // namespace detail

enum class EnumerationPath { Auto, Sequences, Compositions };

// Exact E[bag loss] over a bag of k i.i.d. draws from dist.  Enumerates all
// m^k draw sequences when that is small enough, otherwise all occupancy
// compositions with exact multinomial coefficients (feasible up to k=40, m=8).
inline double exact_expected_bag_loss(const LossRule& rule, const Predictor& f,
                                      const DiscreteDistribution& dist, int k,
                                      EnumerationPath path = EnumerationPath::Auto) {
  dist.validate();
  if (k < 1) throw std::invalid_argument("exact_expected_bag_loss: k must be >= 1");
  double p = dist.p();
  if (rule.tag == LossRule::Tag::EZ && rule.p_mode == LossRule::PMode::Known) {
    p = rule.p;
  }
  detail::AtomPredictions ap = detail::atom_predictions(f, dist);
  std::size_t m = dist.support_size();
  double log_seq = static_cast<double>(k) * std::log2(static_cast<double>(m));
  bool seq_ok = log_seq <= std::log2(1e7);
  bool comp_ok = k <= 40 && m <= 8;
  if (path == EnumerationPath::Auto) {
    path = seq_ok ? EnumerationPath::Sequences : EnumerationPath::Compositions;
    if (!seq_ok && !comp_ok) {
      throw std::invalid_argument(
          "exact_expected_bag_loss: infeasible enumeration (m=" +
          std::to_string(m) + ", k=" + std::to_string(k) + " gives m^k ~ 2^" +
          std::to_string(log_seq) +
          " sequences; compositions need k <= 40 and m <= 8)");
    }
  } else if (path == EnumerationPath::Compositions && !comp_ok) {
    throw std::invalid_argument(
        "exact_expected_bag_loss: composition path needs k <= 40 and m <= 8 "
        "for exact coefficients, got k=" + std::to_string(k) +
        ", m=" + std::to_string(m));
  }
  long double total = path == EnumerationPath::Sequences
                          ? detail::enumerate_sequences(rule, ap, dist, k, p)
                          : detail::enumerate_compositions(rule, ap, dist, k, p);
  return static_cast<double>(total);
}

// ---- exhaustive minimization over a finite class ----------------------------

struct MinimizationResult {
  std::size_t best_index = 0;
  double best_value = 0.0;
  std::vector<double> all_values;
  // Indices whose value is within 1e-12 of the minimum, ascending.  best_index
  // is always tie_set.front().
  std::vector<std::size_t> tie_set;
};

constexpr double kTieTolerance = 1e-12;

namespace detail {

// Sparse per-bag histogram over instance-space indices; hypothesis evaluation
// on a bag becomes a handful of table lookups instead of k.
struct BagHistogram {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> cells;  // (index, count)
  int label_count = 0;
};

inline std::vector<BagHistogram> bag_histograms(const FiniteClass& cls,
                                                const BagDataset& ds) {
  std::vector<BagHistogram> hists(ds.n());
  std::vector<std::uint32_t> scratch(cls.instance_space.size(), 0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const Bag& b = ds.bags[i];
    BagHistogram& h = hists[i];
    h.label_count = b.label_count;
    std::vector<std::uint32_t> touched;
    for (const Instance& x : b.instances) {
      std::size_t idx = instance_index(x);
      if (idx >= cls.instance_space.size()) {
        throw std::invalid_argument(
            "minimize: bag instance index " + std::to_string(idx) +
            " outside the class's instance space");
      }
      if (scratch[idx]++ == 0) touched.push_back(static_cast<std::uint32_t>(idx));
    }
    for (std::uint32_t idx : touched) {
      h.cells.emplace_back(idx, scratch[idx]);
      scratch[idx] = 0;
    }
  }
  return hists;
}

inline int hist_pred_count(const std::vector<std::uint8_t>& row,
                           const BagHistogram& h) {
  int c = 0;
  for (auto [idx, cnt] : h.cells) c += static_cast<int>(cnt) * row[idx];
  return c;
}

}  // namespace detail

// Exhaustive empirical risk minimization of `rule` over every row of `cls`.
// Ties within 1e-12 of the minimum are reported; the winner is the lowest
// index.  Hypothesis evaluations are independent, so they may be spread over
// threads; values land in index-addressed slots and the argmin scan is
// sequential, making the result thread-count invariant.
inline MinimizationResult minimize(const LossRule& rule, const FiniteClass& cls,
                                   const BagDataset& ds, unsigned threads = 1) {
  cls.validate();
  ds.validate();
  if (ds.feature_dim != 1) {
    throw std::invalid_argument(
        "minimize: finite-class datasets must be index-encoded (feature_dim 1)");
  }
  std::vector<detail::BagHistogram> hists = detail::bag_histograms(cls, ds);
  std::size_t n = ds.n();
  int k = ds.k;

  // Shared, hypothesis-independent pieces.
  double p_known_or_plugin = 0.0;
  SplitIndices split;
  double p_split = 0.0;
  if (rule.tag == LossRule::Tag::EZ && rule.p_mode == LossRule::PMode::Split) {
    split = split_indices(n, rule.split_seed);
    double s = 0.0;
    for (std::size_t i : split.p_half) {
      s += static_cast<double>(hists[i].label_count) / static_cast<double>(k);
    }
    p_split = s / static_cast<double>(split.p_half.size());
  } else if (rule.tag == LossRule::Tag::EZ || rule.tag == LossRule::Tag::DSQ) {
    p_known_or_plugin = resolve_p(rule, ds);
  }

  MinimizationResult res;
  res.all_values.assign(cls.size(), 0.0);
  parallel_for(cls.size(), threads, [&](std::size_t h) {
    const auto& row = cls.table[h];
    double value = 0.0;
    switch (rule.tag) {
      case LossRule::Tag::EPRM01: {
        std::vector<double> losses(n);
        for (std::size_t i = 0; i < n; ++i) {
          losses[i] = eprm_loss_counts(detail::hist_pred_count(row, hists[i]),
                                       hists[i].label_count);
        }
        value = pairwise_mean(losses);
        break;
      }
      case LossRule::Tag::PM_SQ: {
        std::vector<double> losses(n);
        for (std::size_t i = 0; i < n; ++i) {
          double fb = static_cast<double>(detail::hist_pred_count(row, hists[i])) /
                      static_cast<double>(k);
          double alpha = static_cast<double>(hists[i].label_count) /
                         static_cast<double>(k);
          losses[i] = pm_sq_loss(fb, alpha, k, rule.k_scaled);
        }
        value = pairwise_mean(losses);
        break;
      }
      case LossRule::Tag::PM_LOG: {
        std::vector<double> losses(n);
        for (std::size_t i = 0; i < n; ++i) {
          double fb = static_cast<double>(detail::hist_pred_count(row, hists[i])) /
                      static_cast<double>(k);
          double alpha = static_cast<double>(hists[i].label_count) /
                         static_cast<double>(k);
          losses[i] = pm_log_loss(fb, alpha, rule.eps_log);
        }
        value = pairwise_mean(losses);
        break;
      }
      case LossRule::Tag::DSQ: {
        std::vector<double> sq_terms(n), means(n);
        for (std::size_t i = 0; i < n; ++i) {
          double fb = static_cast<double>(detail::hist_pred_count(row, hists[i])) /
                      static_cast<double>(k);
          double alpha = static_cast<double>(hists[i].label_count) /
                         static_cast<double>(k);
          double d = fb - alpha;
          sq_terms[i] = static_cast<double>(k) * d * d;
          means[i] = fb;
        }
        double dev = pairwise_mean(means) - p_known_or_plugin;
        value = pairwise_mean(sq_terms) - static_cast<double>(k - 1) * dev * dev;
        break;
      }
      case LossRule::Tag::EZ: {
        if (rule.p_mode == LossRule::PMode::Split) {
          std::vector<double> losses(split.risk_half.size());
          for (std::size_t j = 0; j < split.risk_half.size(); ++j) {
            const auto& hist = hists[split.risk_half[j]];
            double fb = static_cast<double>(detail::hist_pred_count(row, hist)) /
                        static_cast<double>(k);
            double alpha = static_cast<double>(hist.label_count) /
                           static_cast<double>(k);
            losses[j] = ez_loss(fb, alpha, p_split, k);
          }
          value = pairwise_mean(losses);
        } else {
          std::vector<double> losses(n);
          for (std::size_t i = 0; i < n; ++i) {
            double fb = static_cast<double>(detail::hist_pred_count(row, hists[i])) /
                        static_cast<double>(k);
            double alpha = static_cast<double>(hists[i].label_count) /
                           static_cast<double>(k);
            losses[i] = ez_loss(fb, alpha, p_known_or_plugin, k);
          }
          value = pairwise_mean(losses);
        }
        break;
      }
    }
    res.all_values[h] = value;
  });

  double best = res.all_values[0];
  for (double v : res.all_values) best = std::min(best, v);
  for (std::size_t h = 0; h < res.all_values.size(); ++h) {
    if (res.all_values[h] <= best + kTieTolerance) res.tie_set.push_back(h);
  }
  res.best_index = res.tie_set.front();
  res.best_value = res.all_values[res.best_index];
  return res;
}

}  // namespace llp
