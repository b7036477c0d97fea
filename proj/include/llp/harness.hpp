#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "llp/estimators.hpp"
#include "llp/exact.hpp"
#include "llp/io.hpp"
#include "llp/model.hpp"
#include "llp/synthetic.hpp"
#include "llp/threshold_sweep.hpp"
#include "llp/train.hpp"

// Experiment orchestration: seeded (n, trial) sweeps with an exact-risk
// oracle, log-log rate fits with bootstrap errors, the estimation-vs-learning
// report, and the self-check suite behind `verify`.
//
// Every trial derives its stream from (seed, n, trial), so results are a pure
// function of the spec: reruns and different thread counts produce identical
// rows, and the CSV they serialize to is byte-stable.

namespace llp {

// ---- sweep --------------------------------------------------------------------

struct SweepSpec {
  // prop32 | prop41 | eprm-expfail | logloss-fail | threshold
  std::string instance = "prop32";
  LossRule rule = LossRule::pm_sq();
  int k = 2;
  std::vector<std::size_t> n_grid;
  std::size_t trials = 1;
  double eps = 0.1;    // target accuracy, recorded with the run
  double delta = 0.05; // target failure probability
  std::uint64_t seed = 0;

  double instance_eps = 0.01;       // eprm-expfail bias
  std::size_t grid_m = 1u << 17;    // threshold grid size
  double gamma = 0.0;               // threshold noise floor
  double rho = 0.0;                 // threshold noise profile exponent

  void validate() const {
    if (instance != "prop32" && instance != "prop41" &&
        instance != "eprm-expfail" && instance != "logloss-fail" &&
        instance != "threshold") {
      throw std::invalid_argument("SweepSpec: unknown instance " + instance);
    }
    if (k < 1) throw std::invalid_argument("SweepSpec: k must be >= 1");
    if (n_grid.empty()) throw std::invalid_argument("SweepSpec: empty n grid");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] == 0 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
        throw std::invalid_argument(
            "SweepSpec: n grid must be positive and strictly increasing");
      }
    }
    if (trials < 1) throw std::invalid_argument("SweepSpec: trials must be >= 1");
    if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("SweepSpec: eps and delta must be in (0, 1)");
    }
  }
};

struct SweepRow {
  std::string instance;
  std::string rule;
  int k = 0;
  std::size_t n = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double excess_risk = 0.0;
  double emp_risk = 0.0;
  std::size_t chosen_index = 0;
  // Elapsed time is environment noise, not experiment output; pinned to zero
  // so reruns compare byte for byte.
  std::uint64_t wall_ms = 0;
};

inline std::string rule_label(const LossRule& rule) {
  std::string s = to_string(rule.tag);
  if ((rule.tag == LossRule::Tag::EZ || rule.tag == LossRule::Tag::DSQ) &&
      rule.p_mode != LossRule::PMode::Plugin) {
    s += rule.p_mode == LossRule::PMode::Known ? ":known" : ":split";
  }
  return s;
}

namespace detail {

// Work-stealing loop: threads pull the next undone index until the range is
// exhausted.  Results land in caller-indexed slots, so scheduling cannot
// reorder anything.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  unsigned spawn = std::min<unsigned>(threads, static_cast<unsigned>(count));
  pool.reserve(spawn);
  for (unsigned t = 0; t < spawn; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Exact 0-1 risk per class row, and the row-wise optimum.
struct RiskOracle {
  std::vector<double> row_risk;
  double best = 0.0;
};

inline RiskOracle finite_class_oracle(const FiniteClass& cls,
                                      const DiscreteDistribution& dist) {
  RiskOracle o;
  o.row_risk.resize(cls.size());
  for (std::size_t h = 0; h < cls.size(); ++h) {
    o.row_risk[h] =
        exact_risk(Predictor::from_hypothesis(FiniteHypothesis{&cls, h}), dist);
  }
  o.best = o.row_risk[0];
  for (double r : o.row_risk) o.best = std::min(o.best, r);
  return o;
}

}  // namespace detail

// Exact marginal P[y = 1] of the sampled distribution behind each instance
// name; used to fill rule.p when a known-p run does not pin it explicitly.
inline double instance_marginal(const SweepSpec& spec) {
  if (spec.instance == "prop32" || spec.instance == "logloss-fail") return 2.0 / 3.0;
  if (spec.instance == "prop41") return 0.5;
  if (spec.instance == "eprm-expfail") return 0.5 + spec.instance_eps;
  ThresholdExperiment exp = ThresholdExperiment::make(
      spec.grid_m, choose_t_star(spec.grid_m, spec.seed), spec.gamma, spec.rho);
  return exp.marginal_p();
}

inline std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                       unsigned threads = 1) {
  spec.validate();
  LossRule rule = spec.rule;
  if (rule.p_mode == LossRule::PMode::Known && !std::isfinite(rule.p)) {
    rule.p = instance_marginal(spec);
  }

  std::size_t total = spec.n_grid.size() * spec.trials;
  std::vector<SweepRow> rows(total);
  std::string label = rule_label(rule);

  auto fill_row = [&](SweepRow& row, std::size_t n, std::size_t trial,
                      const MinimizationResult& res, double excess) {
    row.instance = spec.instance;
    row.rule = label;
    row.k = spec.k;
    row.n = n;
    row.trial = trial;
    row.excess_risk = excess;
    row.emp_risk = res.best_value;
    row.chosen_index = res.best_index;
  };

  if (spec.instance == "threshold") {
    ThresholdExperiment exp = ThresholdExperiment::make(
        spec.grid_m, choose_t_star(spec.grid_m, spec.seed), spec.gamma,
        spec.rho);
    double best = exp.risk_row(0);
    for (std::size_t h = 1; h < 2 * exp.m; ++h) {
      best = std::min(best, exp.risk_row(h));
    }
    detail::parallel_for(total, threads, [&](std::size_t t) {
      std::size_t n = spec.n_grid[t / spec.trials];
      std::size_t trial = t % spec.trials;
      std::uint64_t s = derive_seed(spec.seed, {n, trial});
      ThresholdSample sample = sample_threshold(exp, n, spec.k, s);
      MinimizationResult res = sweep_threshold_class(rule, sample, exp.m);
      fill_row(rows[t], n, trial, res, exp.risk_row(res.best_index) - best);
      rows[t].seed = s;
    });
    return rows;
  }

  DiscreteDistribution dist;
  const FiniteClass* cls = nullptr;
  TwoPointInstance two_point;
  RealizablePairInstance pair;
  ConstantPairInstance constant;
  if (spec.instance == "prop32" || spec.instance == "logloss-fail") {
    two_point = prop32_instance();
    dist = two_point.dist;
    cls = &two_point.cls;
  } else if (spec.instance == "prop41") {
    pair = prop41_instance();
    dist = pair.dist;
    cls = &pair.cls;
  } else {
    constant = eprm_expfail_instance(spec.instance_eps);
    dist = constant.dist;
    cls = &constant.cls;
  }
  detail::RiskOracle oracle = detail::finite_class_oracle(*cls, dist);

  detail::parallel_for(total, threads, [&](std::size_t t) {
    std::size_t n = spec.n_grid[t / spec.trials];
    std::size_t trial = t % spec.trials;
    std::uint64_t s = derive_seed(spec.seed, {n, trial});
    BagDataset ds = sample_dataset(dist, n, spec.k, s);
    MinimizationResult res = minimize(rule, *cls, ds);
    fill_row(rows[t], n, trial, res,
             oracle.row_risk[res.best_index] - oracle.best);
    rows[t].seed = s;
  });
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            std::ostream& os) {
  os << "instance,rule,k,n,trial,seed,excess_risk,emp_risk,chosen_index,"
        "wall_ms\n";
  for (const SweepRow& r : rows) {
    os << r.instance << ',' << r.rule << ',' << r.k << ',' << r.n << ','
       << r.trial << ',' << r.seed << ',' << format_double(r.excess_risk) << ','
       << format_double(r.emp_risk) << ',' << r.chosen_index << ',' << r.wall_ms
       << '\n';
  }
}

inline std::string sweep_csv_string(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  write_sweep_csv(rows, os);
  return os.str();
}

inline void save_sweep_csv(const std::vector<SweepRow>& rows,
                           const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_sweep_csv: cannot open " + path);
  write_sweep_csv(rows, os);
}

inline std::vector<SweepRow> load_sweep_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_sweep_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_sweep_csv: " + path + " is empty");
  }
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::split_csv_row(line);
    if (cells.size() != 10) {
      throw std::runtime_error("load_sweep_csv: line " +
                               std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) +
                               " cells, expected 10");
    }
    auto bad = [&](std::size_t i) {
      return std::runtime_error("load_sweep_csv: line " +
                                std::to_string(line_no) +
                                ": cannot parse '" + cells[i] +
                                "' as a number");
    };
    auto parse = [&](std::size_t i, auto& out) {
      const std::string& c = cells[i];
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), out);
      if (ec != std::errc() || p != c.data() + c.size()) throw bad(i);
    };
    SweepRow r;
    r.instance = cells[0];
    r.rule = cells[1];
    parse(2, r.k);
    parse(3, r.n);
    parse(4, r.trial);
    parse(5, r.seed);
    parse(6, r.excess_risk);
    parse(7, r.emp_risk);
    parse(8, r.chosen_index);
    parse(9, r.wall_ms);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("load_sweep_csv: no data rows");
  return rows;
}

// ---- rate fitting ---------------------------------------------------------------

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

// OLS of log y on log x; inputs must be positive and at least two points.
inline LineFit ols_loglog(const std::vector<double>& xs,
                          const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("ols_loglog: need at least 2 points");
  }
  std::size_t n = xs.size();
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
      throw std::invalid_argument("ols_loglog: inputs must be positive");
    }
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("ols_loglog: degenerate x values");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += e * e;
    ss_tot += (ly[i] - my) * (ly[i] - my);
  }
  fit.r2 = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

struct RatePoint {
  std::size_t n = 0;
  std::size_t trials = 0;
  double mean_excess = 0.0;
  double std_error = 0.0;  // sample std / sqrt(trials)
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double bootstrap_se = 0.0;
  std::vector<RatePoint> points;       // every n in the table
  std::vector<std::size_t> fitted_n;   // the n values used (positive mean)
};

inline RateFit fit_rate(const std::vector<SweepRow>& rows,
                        std::uint64_t bootstrap_seed = 9000017ULL,
                        std::size_t resamples = 1000) {
  if (rows.empty()) throw std::invalid_argument("fit_rate: empty table");

  // rows arrive sorted by (n, trial); group on n transitions
  std::vector<std::size_t> ns;
  std::vector<std::vector<double>> excess;
  for (const SweepRow& r : rows) {
    if (ns.empty() || r.n != ns.back()) {
      if (!ns.empty() && r.n < ns.back()) {
        throw std::invalid_argument("fit_rate: rows not sorted by n");
      }
      ns.push_back(r.n);
      excess.emplace_back();
    }
    excess.back().push_back(r.excess_risk);
  }

  RateFit fit;
  std::vector<double> xs, ys;
  for (std::size_t g = 0; g < ns.size(); ++g) {
    const std::vector<double>& v = excess[g];
    double mean = pairwise_mean(v);
    double var = 0.0;
    for (double e : v) var += (e - mean) * (e - mean);
    std::size_t t = v.size();
    var = t > 1 ? var / static_cast<double>(t - 1) : 0.0;
    RatePoint pt;
    pt.n = ns[g];
    pt.trials = t;
    pt.mean_excess = mean;
    pt.std_error = std::sqrt(var / static_cast<double>(t));
    fit.points.push_back(pt);
    if (mean > 0.0) {
      xs.push_back(static_cast<double>(ns[g]));
      ys.push_back(mean);
      fit.fitted_n.push_back(ns[g]);
    }
  }
  if (xs.size() < 2) {
    throw std::invalid_argument(
        "fit_rate: need at least 2 n values with positive mean excess risk");
  }
  LineFit line = ols_loglog(xs, ys);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.r2 = line.r2;

  // Bootstrap over trials within each fitted n.
  std::vector<double> slopes;
  slopes.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    Rng rng(derive_seed(bootstrap_seed, {r}));
    std::vector<double> bxs, bys;
    for (std::size_t g = 0; g < ns.size(); ++g) {
      if (!(pairwise_mean(excess[g]) > 0.0)) continue;
      const std::vector<double>& v = excess[g];
      double acc = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        acc += v[rng.uniform_below(v.size())];
      }
      double mean = acc / static_cast<double>(v.size());
      if (mean > 0.0) {
        bxs.push_back(static_cast<double>(ns[g]));
        bys.push_back(mean);
      }
    }
    if (bxs.size() >= 2) slopes.push_back(ols_loglog(bxs, bys).slope);
  }
  if (slopes.size() > 1) {
    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= static_cast<double>(slopes.size());
    double var = 0.0;
    for (double s : slopes) var += (s - mean) * (s - mean);
    fit.bootstrap_se = std::sqrt(var / static_cast<double>(slopes.size() - 1));
  }
  return fit;
}

inline nlohmann::ordered_json rate_fit_json(const RateFit& fit) {
  nlohmann::ordered_json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  j["bootstrap_se"] = fit.bootstrap_se;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const RatePoint& p : fit.points) {
    nlohmann::ordered_json q;
    q["n"] = p.n;
    q["trials"] = p.trials;
    q["mean_excess"] = p.mean_excess;
    q["std_error"] = p.std_error;
    pts.push_back(q);
  }
  j["points"] = pts;
  j["fitted_n"] = fit.fitted_n;
  return j;
}

// ---- estimation vs learning ------------------------------------------------------

struct EstimationGapSpec {
  std::vector<std::size_t> n_grid = {2, 3, 4, 5, 6, 8};
  std::size_t trials = 4000;
  int k = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_grid.size() < 2) {
      throw std::invalid_argument("EstimationGapSpec: need at least 2 n values");
    }
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
      if (n_grid[i] == 0 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
        throw std::invalid_argument(
            "EstimationGapSpec: n grid must be positive and strictly "
            "increasing");
      }
    }
    if (trials < 2) {
      throw std::invalid_argument("EstimationGapSpec: trials must be >= 2");
    }
    if (k < 1) throw std::invalid_argument("EstimationGapSpec: k must be >= 1");
  }
};

struct EstimationGapPoint {
  std::size_t n = 0;
  double mean_lhat = 0.0;   // mean of the EZ risk estimate at fstar
  double std_lhat = 0.0;    // sample std of the same
  double mean_excess = 0.0; // tie-adversarial selection excess
};

struct EstimationGapReport {
  std::vector<EstimationGapPoint> points;
  double std_slope = 0.0;       // log std vs log n
  double learning_slope = 0.0;  // log mean excess vs log n
  bool learning_measurable = true;  // >= 2 positive mean-excess points
  bool unbiased = true;             // every |mean| <= 4 std / sqrt(trials)
  double max_bias_sigmas = 0.0;
};

// The realizable pair construction: estimating L(fstar) = 0 by the unbiased
// per-bag rule needs Theta(1/eps^2) bags (the estimate has constant per-bag
// variance), while picking fstar out of {fstar, complement} succeeds
// geometrically fast.  Ties between the two empirical risks are resolved
// adversarially (worst exact risk in the tie set), so the learning column is
// not flattered by the minimizer's lowest-index tie break.
inline EstimationGapReport estimation_vs_learning(const EstimationGapSpec& spec,
                                                  unsigned threads = 1) {
  spec.validate();
  RealizablePairInstance inst = prop41_instance();
  Predictor fstar = Predictor::from_hypothesis(inst.fstar());
  LossRule rule = LossRule::ez_known(0.5);
  detail::RiskOracle oracle = detail::finite_class_oracle(inst.cls, inst.dist);

  std::size_t total = spec.n_grid.size() * spec.trials;
  std::vector<double> lhat(total), excess(total);
  detail::parallel_for(total, threads, [&](std::size_t t) {
    std::size_t n = spec.n_grid[t / spec.trials];
    std::size_t trial = t % spec.trials;
    BagDataset ds =
        sample_dataset(inst.dist, n, spec.k, derive_seed(spec.seed, {n, trial}));
    lhat[t] = ez_empirical_risk(fstar, ds, rule);
    MinimizationResult res = minimize(rule, inst.cls, ds);
    double worst = 0.0;
    for (std::size_t h : res.tie_set) {
      worst = std::max(worst, oracle.row_risk[h] - oracle.best);
    }
    excess[t] = worst;
  });

  EstimationGapReport rep;
  std::vector<double> ns_d, stds, ex_ns, ex_means;
  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    std::vector<double> l(lhat.begin() + g * spec.trials,
                          lhat.begin() + (g + 1) * spec.trials);
    std::vector<double> e(excess.begin() + g * spec.trials,
                          excess.begin() + (g + 1) * spec.trials);
    EstimationGapPoint pt;
    pt.n = spec.n_grid[g];
    pt.mean_lhat = pairwise_mean(l);
    double var = 0.0;
    for (double v : l) var += (v - pt.mean_lhat) * (v - pt.mean_lhat);
    pt.std_lhat = std::sqrt(var / static_cast<double>(spec.trials - 1));
    pt.mean_excess = pairwise_mean(e);
    rep.points.push_back(pt);

    if (pt.std_lhat > 0.0) {
      ns_d.push_back(static_cast<double>(pt.n));
      stds.push_back(pt.std_lhat);
      double sigmas = pt.std_lhat > 0.0
                          ? std::abs(pt.mean_lhat) /
                                (pt.std_lhat /
                                 std::sqrt(static_cast<double>(spec.trials)))
                          : 0.0;
      rep.max_bias_sigmas = std::max(rep.max_bias_sigmas, sigmas);
      if (sigmas > 4.0) rep.unbiased = false;
    }
    if (pt.mean_excess > 0.0) {
      ex_ns.push_back(static_cast<double>(pt.n));
      ex_means.push_back(pt.mean_excess);
    }
  }
  if (ns_d.size() < 2) {
    throw std::invalid_argument(
        "estimation_vs_learning: degenerate estimate spread");
  }
  rep.std_slope = ols_loglog(ns_d, stds).slope;
  if (ex_ns.size() >= 2) {
    rep.learning_slope = ols_loglog(ex_ns, ex_means).slope;
  } else {
    // excess hit exact zero almost everywhere: faster than any measurable rate
    rep.learning_measurable = false;
    rep.learning_slope = -std::numeric_limits<double>::infinity();
  }
  return rep;
}

inline nlohmann::ordered_json estimation_gap_json(
    const EstimationGapReport& rep) {
  nlohmann::ordered_json j;
  j["std_slope"] = rep.std_slope;
  j["learning_slope"] = rep.learning_measurable
                            ? nlohmann::ordered_json(rep.learning_slope)
                            : nlohmann::ordered_json("-inf");
  j["learning_measurable"] = rep.learning_measurable;
  j["unbiased"] = rep.unbiased;
  j["max_bias_sigmas"] = rep.max_bias_sigmas;
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const EstimationGapPoint& p : rep.points) {
    nlohmann::ordered_json q;
    q["n"] = p.n;
    q["mean_lhat"] = p.mean_lhat;
    q["std_lhat"] = p.std_lhat;
    q["mean_excess"] = p.mean_excess;
    pts.push_back(q);
  }
  j["points"] = pts;
  return j;
}

}  // namespace llp
