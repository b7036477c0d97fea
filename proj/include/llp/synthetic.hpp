#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/data.hpp"
#include "llp/distribution.hpp"
#include "llp/finite_class.hpp"
#include "llp/random.hpp"

// Constructions behind the propositions, counterexamples, and lower bounds,
// plus the synthetic tasks the experiment harness runs on.

namespace llp {

// ---- two-point counterexample ------------------------------------------------
//
// X = {x1, x2}, D uniform over {(x1,1), (x1,0), (x2,1)}, class {f1, f2} with
// f1 = 1{x = x1}, f2 = 1{x = x2}.  Then L(f1) = 2/3 > L(f2) = 1/3, yet
// E f1 = p = 2/3, which makes f1 the better proportion matcher:
// E[(f1_bar - alpha)^2] = 2/(3k) < (k+2)/(9k) = E[(f2_bar - alpha)^2].

struct TwoPointInstance {
  DiscreteDistribution dist;
  FiniteClass cls;
  std::size_t f1_row = 0;
  std::size_t f2_row = 1;
};

inline TwoPointInstance prop32_instance() {
  TwoPointInstance inst;
  inst.dist.xs = {Instance{{0.0}}, Instance{{0.0}}, Instance{{1.0}}};
  inst.dist.ys = {1, 0, 1};
  inst.dist.probs = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  inst.dist.validate();
  inst.cls.instance_space = {Instance{{0.0}}, Instance{{1.0}}};
  inst.cls.table = {{1, 0}, {0, 1}};
  inst.cls.symmetric = true;
  inst.cls.vc_dim = 1;
  inst.cls.validate();
  return inst;
}

// The log-loss proportion matcher fails on the same two-point construction
// once k >> log n (it needs roughly k >= 18 log(2n/delta) for every bag's
// proportion comparison to favor f1).  At k = 1 the log rule degenerates to
// instance-level classification and correctly picks f2.
inline TwoPointInstance loglossfail_instance() { return prop32_instance(); }

// ---- estimation/learning separation -----------------------------------------
//
// X = {x0, x1}, (x0, 0) and (x1, 1) each with probability 1/2, fstar = 1{x=x1}.
// Realizable with L(fstar) = 0 and p = 1/2; the per-bag risk estimate of fstar
// still has constant variance (at k=2 it is +-1/2 with equal probability).

struct RealizablePairInstance {
  DiscreteDistribution dist;
  FiniteClass cls;  // row 0 = fstar, row 1 = its complement
  std::size_t fstar_row = 0;

  FiniteHypothesis fstar() const { return FiniteHypothesis{&cls, fstar_row}; }
};

inline RealizablePairInstance prop41_instance() {
  RealizablePairInstance inst;
  inst.dist.xs = {Instance{{0.0}}, Instance{{1.0}}};
  inst.dist.ys = {0, 1};
  inst.dist.probs = {0.5, 0.5};
  inst.dist.validate();
  inst.cls.instance_space = {Instance{{0.0}}, Instance{{1.0}}};
  inst.cls.table = {{0, 1}, {1, 0}};
  inst.cls.symmetric = true;
  inst.cls.vc_dim = 1;
  inst.cls.validate();
  return inst;
}

// ---- exponential blow-up for exact proportion matching -----------------------
//
// A single instance point labeled 1 with probability 1/2 + eps, class
// {f0 == 0, f1 == 1}.  A bag's proportion matches one of the constants only
// when the bag is pure, which happens with probability (1/2 +- eps)^k; until a
// pure bag is seen, the indicator rule cannot distinguish f0 from f1.

struct ConstantPairInstance {
  DiscreteDistribution dist;
  FiniteClass cls;  // row 0 = constant 0, row 1 = constant 1
  double eps = 0.0;
};

inline ConstantPairInstance eprm_expfail_instance(double eps) {
  if (!(eps > 0.0 && eps < 0.5)) {
    throw std::invalid_argument("eprm_expfail_instance: eps must be in (0, 1/2)");
  }
  ConstantPairInstance inst;
  inst.eps = eps;
  double p1 = 0.5 + eps;
  inst.dist.xs = {Instance{{0.0}}, Instance{{0.0}}};
  inst.dist.ys = {1, 0};
  inst.dist.probs = {p1, 1.0 - p1};
  inst.dist.validate();
  inst.cls.instance_space = {Instance{{0.0}}};
  inst.cls.table = {{0}, {1}};
  inst.cls.symmetric = true;
  inst.cls.vc_dim = 1;
  inst.cls.validate();
  return inst;
}

// ---- lower-bound family -------------------------------------------------------
//
// Instance space {0,1}^M with M = 2^d, x uniform; hypotheses f_i(x) = x[i];
// under member i the label is x[i] with probability 1/2 + gamma.  Any single
// predictor must pay excess risk gamma against at least one of two distinct
// members, which is the engine of the sample-size lower bound.

struct LowerBoundFamily {
  int d = 3;
  double gamma = 0.5;
  std::size_t member = 0;

  std::size_t index_count() const { return std::size_t{1} << d; }

  void validate() const {
    if (d < 3 || d > 16) {
      throw std::invalid_argument(
          "LowerBoundFamily: d must be in [3, 16] (instances are 2^d-bit "
          "vectors; d=" + std::to_string(d) + " is outside the memory ceiling)");
    }
    if (!(gamma >= 0.0 && gamma <= 0.5)) {
      throw std::invalid_argument("LowerBoundFamily: gamma must be in [0, 1/2]");
    }
    if (member >= index_count()) {
      throw std::invalid_argument("LowerBoundFamily: member index out of range");
    }
  }
};

inline BagDataset lower_bound_sample(const LowerBoundFamily& fam, std::size_t n,
                                     int k, std::uint64_t seed) {
  fam.validate();
  if (n == 0 || k <= 0) {
    throw std::invalid_argument("lower_bound_sample: n and k must be positive");
  }
  std::size_t dim = fam.index_count();
  Rng rng(seed);
  std::vector<Instance> xs;
  std::vector<std::uint8_t> ys;
  xs.reserve(n * static_cast<std::size_t>(k));
  ys.reserve(n * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n * static_cast<std::size_t>(k); ++i) {
    Instance x;
    x.features.resize(dim);
    // One engine draw per 64 coordinates.
    for (std::size_t base = 0; base < dim; base += 64) {
      std::uint64_t bits = rng.next_u64();
      std::size_t stop = std::min<std::size_t>(64, dim - base);
      for (std::size_t b = 0; b < stop; ++b) {
        x.features[base + b] = static_cast<double>((bits >> b) & 1u);
      }
    }
    std::uint8_t truth = static_cast<std::uint8_t>(x.features[fam.member]);
    std::uint8_t y = rng.bernoulli(0.5 + fam.gamma) ? truth : (1 - truth);
    xs.push_back(std::move(x));
    ys.push_back(y);
  }
  return make_bags_in_order(std::move(xs), std::move(ys), k);
}

// Left side of the separation condition for hypothesis f_j against members
// i and i': excess risk under member i plus excess risk under member i',
//   2 gamma ( E[1{x[j] != x[i]}] + E[1{x[j] != x[i']}] ),
// where each expectation is 1/2 exactly when the coordinates differ (uniform
// independent bits) and 0 otherwise.
inline double separation_check(const LowerBoundFamily& fam, std::size_t j,
                               std::size_t i, std::size_t i2) {
  fam.validate();
  if (j >= fam.index_count() || i >= fam.index_count() || i2 >= fam.index_count()) {
    throw std::invalid_argument("separation_check: coordinate index out of range");
  }
  if (i == i2) {
    throw std::invalid_argument("separation_check: members i and i' must differ");
  }
  double e_i = j == i ? 0.0 : 0.5;
  double e_i2 = j == i2 ? 0.0 : 0.5;
  return 2.0 * fam.gamma * (e_i + e_i2);
}

// ---- threshold class -----------------------------------------------------------
//
// Grid points x in {0, 1/m, ..., (m-1)/m} (index-encoded), one-sided
// hypotheses h_j = 1{x >= j/m} and their complements.  The one-sided family
// has VC dimension 1, which is what the fast-rate experiments need; vc_dim
// records that.

inline FiniteClass threshold_class(std::size_t m) {
  if (m < 1 || m > 4096) {
    throw std::invalid_argument(
        "threshold_class: table form supports 1 <= m <= 4096 (the sweep path "
        "handles larger grids without a table)");
  }
  FiniteClass cls;
  cls.instance_space.resize(m);
  for (std::size_t x = 0; x < m; ++x) {
    cls.instance_space[x] = Instance{{static_cast<double>(x)}};
  }
  cls.table.assign(2 * m, std::vector<std::uint8_t>(m));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t x = 0; x < m; ++x) {
      std::uint8_t v = x >= j ? 1 : 0;
      cls.table[j][x] = v;
      cls.table[m + j][x] = 1 - v;
    }
  }
  cls.symmetric = true;
  cls.vc_dim = 1;
  cls.validate();
  return cls;
}

// Labeled threshold data with a controllable noise profile.  eta(x) is the
// label flip probability at grid point x:
//   rho = 0:  eta == gamma everywhere (uniform flip; gamma = 0 is realizable)
//   rho > 0:  eta grades from 1/2 at the decision boundary down to gamma in
//             the far field, eta(x) = 1/2 - (1/2 - gamma) u^rho with
//             u = min(1, 2|x - t_star|/m).  No hypothesis has a margin over
//             its neighbors near t_star, which is what keeps the excess-risk
//             decay on the slow branch.
struct ThresholdExperiment {
  std::size_t m = 0;
  std::size_t t_star = 0;
  double gamma = 0.0;
  double rho = 0.0;

  static ThresholdExperiment make(std::size_t m, std::size_t t_star,
                                  double gamma, double rho) {
    if (m < 2) throw std::invalid_argument("ThresholdExperiment: m must be >= 2");
    if (t_star >= m) {
      throw std::invalid_argument("ThresholdExperiment: t_star outside grid");
    }
    if (!(gamma >= 0.0 && gamma < 0.5)) {
      throw std::invalid_argument("ThresholdExperiment: gamma must be in [0, 1/2)");
    }
    if (rho < 0.0) {
      throw std::invalid_argument("ThresholdExperiment: rho must be >= 0");
    }
    ThresholdExperiment e;
    e.m = m;
    e.t_star = t_star;
    e.gamma = gamma;
    e.rho = rho;
    e.build_prefix();
    return e;
  }

  double eta(std::size_t x) const {
    if (rho == 0.0) return gamma;
    double dist = x >= t_star ? static_cast<double>(x - t_star)
                              : static_cast<double>(t_star - x);
    double u = std::min(1.0, 2.0 * dist / static_cast<double>(m));
    return 0.5 - (0.5 - gamma) * std::pow(u, rho);
  }

  std::uint8_t fstar(std::size_t x) const { return x >= t_star ? 1 : 0; }

  // Population 0-1 risk of h_j = 1{x >= j/m}: mean eta plus the no-margin
  // penalty over the disagreement band [min(j, t_star), max(j, t_star)).
  double risk_one_sided(std::size_t j) const {
    std::size_t lo = std::min(j, t_star), hi = std::max(j, t_star);
    double band = static_cast<double>(hi - lo) - 2.0 * (eta_prefix[hi] - eta_prefix[lo]);
    return (eta_prefix[m] + band) / static_cast<double>(m);
  }

  // Complement 1{x < j/m}: agreement and disagreement regions swap.
  double risk_complement(std::size_t j) const {
    std::size_t lo = std::min(j, t_star), hi = std::max(j, t_star);
    double band = static_cast<double>(hi - lo) - 2.0 * (eta_prefix[hi] - eta_prefix[lo]);
    return (static_cast<double>(m) - eta_prefix[m] - band) / static_cast<double>(m);
  }

  // Risk by class row index (0..m-1 one-sided, m..2m-1 complements).
  double risk_row(std::size_t row) const {
    return row < m ? risk_one_sided(row) : risk_complement(row - m);
  }

  double l_star() const { return eta_prefix[m] / static_cast<double>(m); }

  // Exact label marginal p = E[y]: 1 - eta above t_star, eta below.
  double marginal_p() const {
    double above = static_cast<double>(m - t_star) -
                   (eta_prefix[m] - eta_prefix[t_star]);
    return (above + eta_prefix[t_star]) / static_cast<double>(m);
  }

  // Only valid for small m; the sweep path never materializes this.
  DiscreteDistribution to_distribution() const {
    if (m > 4096) {
      throw std::invalid_argument(
          "ThresholdExperiment: distribution form supports m <= 4096");
    }
    DiscreteDistribution dist;
    double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t x = 0; x < m; ++x) {
      double flip = eta(x);
      double p1 = fstar(x) ? 1.0 - flip : flip;
      dist.xs.push_back(Instance{{static_cast<double>(x)}});
      dist.ys.push_back(1);
      dist.probs.push_back(p1 * inv_m);
      dist.xs.push_back(Instance{{static_cast<double>(x)}});
      dist.ys.push_back(0);
      dist.probs.push_back((1.0 - p1) * inv_m);
    }
    dist.validate();
    return dist;
  }

  std::vector<double> eta_prefix;  // eta_prefix[j] = sum_{x < j} eta(x)

 private:
  void build_prefix() {
    eta_prefix.assign(m + 1, 0.0);
    for (std::size_t x = 0; x < m; ++x) eta_prefix[x + 1] = eta_prefix[x] + eta(x);
  }
};

// f_star threshold chosen by seed, kept in the middle half of the grid so both
// tails are populated.
inline std::size_t choose_t_star(std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  return m / 4 + static_cast<std::size_t>(rng.uniform_below(m / 2 > 0 ? m / 2 : 1));
}

// Raw sample in grid-index form: the threshold sweep consumes this directly,
// without materializing Instances.
struct ThresholdSample {
  std::size_t n = 0;
  int k = 0;
  std::vector<std::uint32_t> xs;      // n*k grid indices, bag-major
  std::vector<std::uint8_t> ys;       // aligned true labels
  std::vector<int> label_counts;      // per bag
};

inline ThresholdSample sample_threshold(const ThresholdExperiment& exp,
                                        std::size_t n, int k,
                                        std::uint64_t seed) {
  if (n == 0 || k <= 0) {
    throw std::invalid_argument("sample_threshold: n and k must be positive");
  }
  ThresholdSample s;
  s.n = n;
  s.k = k;
  s.xs.resize(n * static_cast<std::size_t>(k));
  s.ys.resize(s.xs.size());
  s.label_counts.assign(n, 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    std::uint32_t x = static_cast<std::uint32_t>(rng.uniform_below(exp.m));
    std::uint8_t y = exp.fstar(x);
    if (rng.bernoulli(exp.eta(x))) y = 1 - y;
    s.xs[i] = x;
    s.ys[i] = y;
    s.label_counts[i / static_cast<std::size_t>(k)] += y;
  }
  return s;
}

inline BagDataset to_bag_dataset(const ThresholdSample& s) {
  std::vector<Instance> xs(s.xs.size());
  std::vector<std::uint8_t> ys(s.ys.begin(), s.ys.end());
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    xs[i] = Instance{{static_cast<double>(s.xs[i])}};
  }
  return make_bags_in_order(std::move(xs), std::move(ys), s.k);
}

// ---- linearly separable task for the gradient trainer --------------------------
//
// Two-dimensional points split by a seeded direction u with a fixed margin:
// class-y points sit at signed distance in [margin/2, 1] along u, plus a
// tangential component in [-1, 1].

inline BagDataset make_linsep_dataset(std::size_t n, int k, double margin,
                                      std::uint64_t seed) {
  if (n == 0 || k <= 0) {
    throw std::invalid_argument("make_linsep_dataset: n and k must be positive");
  }
  if (!(margin > 0.0 && margin < 2.0)) {
    throw std::invalid_argument("make_linsep_dataset: margin must be in (0, 2)");
  }
  Rng rng(seed);
  double angle = rng.uniform01() * 6.283185307179586;
  double ux = std::cos(angle), uy = std::sin(angle);
  std::vector<Instance> xs;
  std::vector<std::uint8_t> ys;
  xs.reserve(n * static_cast<std::size_t>(k));
  ys.reserve(n * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n * static_cast<std::size_t>(k); ++i) {
    std::uint8_t y = rng.bernoulli(0.5) ? 1 : 0;
    double along = margin / 2.0 + (1.0 - margin / 2.0) * rng.uniform01();
    if (!y) along = -along;
    double tangent = 2.0 * rng.uniform01() - 1.0;
    Instance x;
    x.features = {along * ux - tangent * uy, along * uy + tangent * ux};
    xs.push_back(std::move(x));
    ys.push_back(y);
  }
  return make_bags_in_order(std::move(xs), std::move(ys), k);
}

}  // namespace llp
