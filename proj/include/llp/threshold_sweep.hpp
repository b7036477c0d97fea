#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "llp/estimators.hpp"
#include "llp/exact.hpp"
#include "llp/synthetic.hpp"

// Specialized empirical-risk minimization over the threshold class, consuming
// the grid-index sample form directly.  Row indexing matches threshold_class:
// rows 0..m-1 are h_j = 1{x >= j}, rows m..2m-1 their complements.
//
// Two scoring paths:
//
//   Exact  scores every row from a (k+1) x (k+1) kernel table and a pairwise
//          mean in bag order, which reproduces minimize() bit for bit
//          (all_values, best_index, tie_set).  Cost O(nk + m n).
//
//   Fast   maintains running accumulators and only visits thresholds where the
//          prediction vector actually changes (occupied cells), so the grid
//          can be much finer than the sample.  Cost O(m + nk).  Accumulator
//          round-off can drift a few 1e-12 from the exact value, enough to
//          reorder near-ties, so Fast reports best_index / best_value only
//          (all_values and tie_set stay empty).  EPRM counts are integers and
//          do not drift.
//
// Both paths are sequential and deterministic.

namespace llp {

enum class SweepMode { Auto, Exact, Fast };

namespace detail {

// Per-bag loss from the (predicted count, label count) summary, same kernels
// the empirical estimators use.
inline double summary_bag_loss(const LossRule& rule, int c, int lc, int k,
                               double p) {
  double f_bar = static_cast<double>(c) / static_cast<double>(k);
  double alpha = static_cast<double>(lc) / static_cast<double>(k);
  switch (rule.tag) {
    case LossRule::Tag::EPRM01:
      return eprm_loss_counts(c, lc);
    case LossRule::Tag::PM_SQ:
      return pm_sq_loss(f_bar, alpha, k, rule.k_scaled);
    case LossRule::Tag::PM_LOG:
      return pm_log_loss(f_bar, alpha, rule.eps_log);
    case LossRule::Tag::DSQ:
      // handled at the dataset level; the square term alone lands here
      return static_cast<double>(k) * (f_bar - alpha) * (f_bar - alpha);
    case LossRule::Tag::EZ:
      return ez_loss(f_bar, alpha, p, k);
  }
  throw std::invalid_argument("summary_bag_loss: bad rule tag");
}

struct SweepContext {
  std::size_t m = 0;
  std::size_t n = 0;        // bags scored (risk half only under split)
  int k = 0;
  double p = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::uint32_t> scored;     // bag ids scored, in scoring order
  std::vector<std::uint32_t> cell_of;    // instance -> cell, scored bags only
  std::vector<std::uint32_t> bag_of;     // instance -> position in `scored`
  std::vector<int> label_counts;         // per scored bag
};

inline SweepContext make_sweep_context(const LossRule& rule,
                                       const ThresholdSample& s,
                                       std::size_t m) {
  if (m < 1 || m > (1u << 20)) {
    throw std::invalid_argument("threshold sweep: m must be in [1, 2^20]");
  }
  if (s.n == 0 || s.k <= 0) {
    throw std::invalid_argument("threshold sweep: empty sample");
  }
  if (s.xs.size() != s.n * static_cast<std::size_t>(s.k) ||
      s.label_counts.size() != s.n) {
    throw std::invalid_argument("threshold sweep: inconsistent sample shape");
  }
  for (std::uint32_t x : s.xs) {
    if (x >= m) {
      throw std::invalid_argument("threshold sweep: grid index out of range");
    }
  }
  if (rule.tag == LossRule::Tag::DSQ &&
      rule.p_mode == LossRule::PMode::Split) {
    throw std::invalid_argument(
        "threshold sweep: split mode is not defined for the debiased square "
        "rule");
  }

  SweepContext ctx;
  ctx.m = m;
  ctx.k = s.k;
  std::size_t k = static_cast<std::size_t>(s.k);

  auto alpha_of = [&](std::size_t i) {
    return static_cast<double>(s.label_counts[i]) / static_cast<double>(s.k);
  };

  if (rule.p_mode == LossRule::PMode::Split) {
    // Same partition and marginal arithmetic as ez_empirical_risk.
    SplitIndices sp = split_indices(s.n, rule.split_seed);
    double p_hat = 0.0;
    for (std::size_t i : sp.p_half) p_hat += alpha_of(i);
    ctx.p = p_hat / static_cast<double>(sp.p_half.size());
    ctx.scored.assign(sp.risk_half.begin(), sp.risk_half.end());
  } else {
    ctx.scored.resize(s.n);
    for (std::size_t i = 0; i < s.n; ++i) {
      ctx.scored[i] = static_cast<std::uint32_t>(i);
    }
    if (rule.tag == LossRule::Tag::EZ || rule.tag == LossRule::Tag::DSQ) {
      if (rule.p_mode == LossRule::PMode::Known) {
        if (!std::isfinite(rule.p)) {
          throw std::invalid_argument("LossRule: p_mode=known but p is not set");
        }
        ctx.p = rule.p;
      } else {
        double acc = 0.0;  // matches BagDataset::p_hat term for term
        for (std::size_t i = 0; i < s.n; ++i) acc += alpha_of(i);
        ctx.p = acc / static_cast<double>(s.n);
      }
    }
  }

  ctx.n = ctx.scored.size();
  ctx.label_counts.resize(ctx.n);
  ctx.cell_of.resize(ctx.n * k);
  ctx.bag_of.resize(ctx.n * k);
  for (std::size_t pos = 0; pos < ctx.n; ++pos) {
    std::size_t i = ctx.scored[pos];
    ctx.label_counts[pos] = s.label_counts[i];
    for (std::size_t j = 0; j < k; ++j) {
      ctx.cell_of[pos * k + j] = s.xs[i * k + j];
      ctx.bag_of[pos * k + j] = static_cast<std::uint32_t>(pos);
    }
  }
  return ctx;
}

// Instance ids grouped by cell, CSR layout.
struct CellIndex {
  std::vector<std::uint32_t> offsets;  // size m + 1
  std::vector<std::uint32_t> items;    // instance ids ordered by cell
};

inline CellIndex build_cell_index(const SweepContext& ctx) {
  CellIndex ci;
  ci.offsets.assign(ctx.m + 1, 0);
  for (std::uint32_t c : ctx.cell_of) ++ci.offsets[c + 1];
  for (std::size_t x = 0; x < ctx.m; ++x) ci.offsets[x + 1] += ci.offsets[x];
  ci.items.resize(ctx.cell_of.size());
  std::vector<std::uint32_t> cursor(ci.offsets.begin(), ci.offsets.end() - 1);
  for (std::uint32_t inst = 0; inst < ctx.cell_of.size(); ++inst) {
    ci.items[cursor[ctx.cell_of[inst]]++] = inst;
  }
  return ci;
}

inline MinimizationResult sweep_exact(const LossRule& rule,
                                      const SweepContext& ctx) {
  int k = ctx.k;
  std::size_t n = ctx.n, m = ctx.m;
  CellIndex ci = build_cell_index(ctx);

  // kernel tables by predicted count, one row per label count actually present
  std::vector<std::vector<double>> pos(static_cast<std::size_t>(k) + 1),
      neg(static_cast<std::size_t>(k) + 1);
  for (int c = 0; c <= k; ++c) {
    pos[c].resize(static_cast<std::size_t>(k) + 1);
    neg[c].resize(static_cast<std::size_t>(k) + 1);
    for (int lc = 0; lc <= k; ++lc) {
      pos[c][lc] = summary_bag_loss(rule, c, lc, k, ctx.p);
      neg[c][lc] = summary_bag_loss(rule, k - c, lc, k, ctx.p);
    }
  }

  bool dsq = rule.tag == LossRule::Tag::DSQ;
  std::vector<int> count(n, k);
  std::vector<double> buf(n), means(n);
  MinimizationResult res;
  res.all_values.assign(2 * m, 0.0);

  for (std::size_t j = 0; j < m; ++j) {
    if (j > 0) {
      for (std::uint32_t idx = ci.offsets[j - 1]; idx < ci.offsets[j]; ++idx) {
        --count[ctx.bag_of[ci.items[idx]]];
      }
    }
    for (int orient = 0; orient < 2; ++orient) {
      const auto& table = orient == 0 ? pos : neg;
      for (std::size_t i = 0; i < n; ++i) {
        buf[i] = table[count[i]][ctx.label_counts[i]];
      }
      double value;
      if (dsq) {
        // same shape as dsq_empirical_risk: k-scaled square mean minus the
        // plug-in bias estimate
        for (std::size_t i = 0; i < n; ++i) {
          int c = orient == 0 ? count[i] : k - count[i];
          means[i] = static_cast<double>(c) / static_cast<double>(k);
        }
        double sq = pairwise_mean(buf);
        double dev = pairwise_mean(means) - ctx.p;
        value = sq - static_cast<double>(k - 1) * dev * dev;
      } else {
        value = pairwise_mean(buf);
      }
      res.all_values[orient == 0 ? j : m + j] = value;
    }
  }

  double best = res.all_values[0];
  for (double v : res.all_values) best = std::min(best, v);
  for (std::size_t h = 0; h < res.all_values.size(); ++h) {
    if (res.all_values[h] <= best + kTieTolerance) res.tie_set.push_back(h);
  }
  res.best_index = res.tie_set.front();
  res.best_value = res.all_values[res.best_index];
  return res;
}

inline MinimizationResult sweep_fast(const LossRule& rule,
                                     const SweepContext& ctx) {
  int k = ctx.k;
  std::size_t n = ctx.n, m = ctx.m;
  CellIndex ci = build_cell_index(ctx);

  bool eprm = rule.tag == LossRule::Tag::EPRM01;
  bool dsq = rule.tag == LossRule::Tag::DSQ;

  std::vector<int> count(n, k);

  // Orientation accumulators.  For EPRM these are integer mismatch counts;
  // otherwise sums of per-bag losses (for DSQ, of the k-scaled square term).
  long long mis_pos = 0, mis_neg = 0;
  double sum_pos = 0.0, sum_neg = 0.0;
  long long pred_total = 0;  // sum of counts, for the DSQ bias term

  auto bag_term = [&](int c, int lc, bool flip) {
    return summary_bag_loss(rule, flip ? k - c : c, lc, k, ctx.p);
  };

  for (std::size_t i = 0; i < n; ++i) {
    int lc = ctx.label_counts[i];
    if (eprm) {
      mis_pos += k != lc;
      mis_neg += 0 != lc;
    } else {
      sum_pos += bag_term(k, lc, false);
      sum_neg += bag_term(k, lc, true);
      pred_total += k;
    }
  }

  double inv_n = 1.0 / static_cast<double>(n);
  double nk = static_cast<double>(n) * static_cast<double>(k);
  auto value_at = [&](int orient) {
    if (eprm) {
      return static_cast<double>(orient == 0 ? mis_pos : mis_neg) * inv_n;
    }
    double sum = orient == 0 ? sum_pos : sum_neg;
    if (!dsq) return sum * inv_n;
    double mean_pred = static_cast<double>(pred_total) / nk;
    double ef = orient == 0 ? mean_pred : 1.0 - mean_pred;
    double dev = ef - ctx.p;
    return sum * inv_n - static_cast<double>(k - 1) * dev * dev;
  };

  struct Cand {
    std::size_t j;
    double v_pos, v_neg;
  };
  std::vector<Cand> cands;
  cands.reserve(std::min(m, ctx.cell_of.size() + 1));

  for (std::size_t j = 0; j < m; ++j) {
    if (j > 0) {
      std::uint32_t lo = ci.offsets[j - 1], hi = ci.offsets[j];
      // an empty cell leaves the prediction vector, hence the value, unchanged
      if (lo == hi) continue;
      for (std::uint32_t idx = lo; idx < hi; ++idx) {
        std::size_t i = ctx.bag_of[ci.items[idx]];
        int lc = ctx.label_counts[i];
        int c = count[i];
        if (eprm) {
          mis_pos += (c - 1 != lc) - (c != lc);
          mis_neg += (k - c + 1 != lc) - (k - c != lc);
        } else {
          sum_pos += bag_term(c - 1, lc, false) - bag_term(c, lc, false);
          sum_neg += bag_term(c - 1, lc, true) - bag_term(c, lc, true);
          --pred_total;
        }
        count[i] = c - 1;
      }
    }
    cands.push_back({j, value_at(0), value_at(1)});
  }

  double best = cands[0].v_pos;
  for (const Cand& c : cands) best = std::min(best, std::min(c.v_pos, c.v_neg));

  MinimizationResult res;
  res.best_index = 2 * m;  // sentinel
  for (const Cand& c : cands) {
    if (c.v_pos <= best + kTieTolerance) {
      res.best_index = c.j;
      res.best_value = c.v_pos;
      break;
    }
  }
  if (res.best_index == 2 * m) {
    for (const Cand& c : cands) {
      if (c.v_neg <= best + kTieTolerance) {
        res.best_index = m + c.j;
        res.best_value = c.v_neg;
        break;
      }
    }
  }
  res.tie_set.push_back(res.best_index);
  return res;
}

}  // namespace detail

inline MinimizationResult sweep_threshold_class(const LossRule& rule,
                                                const ThresholdSample& s,
                                                std::size_t m,
                                                SweepMode mode = SweepMode::Auto) {
  detail::SweepContext ctx = detail::make_sweep_context(rule, s, m);
  if (mode == SweepMode::Auto) {
    mode = m <= 4096 ? SweepMode::Exact : SweepMode::Fast;
  }
  return mode == SweepMode::Exact ? detail::sweep_exact(rule, ctx)
                                  : detail::sweep_fast(rule, ctx);
}

}  // namespace llp
