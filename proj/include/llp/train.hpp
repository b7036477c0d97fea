#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/data.hpp"
#include "llp/estimators.hpp"
#include "llp/io.hpp"
#include "llp/model.hpp"
#include "llp/random.hpp"

// Minibatch SGD on bag-level surrogate losses.  Five rules: per-instance
// EasyLLP with log / square instance loss, proportion matching with log /
// square loss on the bag mean, and the debiased square loss with an
// exponential-moving-average estimate of the mean prediction.

namespace llp {

enum class GradRule { EZLog, EZSq, PMLog, PMSq, DebiasedSq };

inline const char* to_string(GradRule r) {
  switch (r) {
    case GradRule::EZLog: return "ez-log";
    case GradRule::EZSq: return "ez-sq";
    case GradRule::PMLog: return "pm-log";
    case GradRule::PMSq: return "pm-sq";
    case GradRule::DebiasedSq: return "dsq";
  }
  return "?";
}

struct TrainConfig {
  GradRule rule = GradRule::PMSq;
  double lr = 0.1;  // 0 is allowed: a no-op run that still traces
  std::size_t batch_bags = 8;
  std::size_t epochs = 100;
  double beta = 0.9;  // DebiasedSq EMA
  std::uint64_t seed = 0;
  LossRule::PMode p_mode = LossRule::PMode::Plugin;
  double p = std::numeric_limits<double>::quiet_NaN();  // used when Known
  std::uint64_t split_seed = 0;                         // used when Split
  double eps_log = 1e-7;

  void validate() const {
    if (!(lr >= 0.0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
    if (batch_bags == 0) {
      throw std::invalid_argument("TrainConfig: batch_bags must be positive");
    }
    if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be positive");
    // beta = 0 drops the EMA memory entirely; useful for identity checks.
    if (rule == GradRule::DebiasedSq && !(beta >= 0.0 && beta < 1.0)) {
      throw std::invalid_argument("TrainConfig: beta must be in [0, 1)");
    }
    if (p_mode == LossRule::PMode::Known && !std::isfinite(p)) {
      throw std::invalid_argument("TrainConfig: p_mode=known but p is not set");
    }
  }
};

// EMA value and the resolved label marginal; threaded through the batches so
// the loss is a pure function of (model, batch, cfg, state).
struct BatchState {
  double v_hat = 0.0;
  double p = 0.0;
};

struct BatchResult {
  double loss = 0.0;
  std::vector<double> grad;
  BatchState state;
};

// Loss and gradient of one minibatch.  DebiasedSq advances the EMA
// v+ = beta v + (1-beta) (batch mean prediction) and differentiates the loss
// holding v (the pre-update EMA) constant: gradient flows through the batch
// mean inside v+ and through the proportion term only.
inline BatchResult batch_loss_and_grad(const ParametricModel& model,
                                       const std::vector<const Bag*>& batch,
                                       const TrainConfig& cfg, BatchState state) {
  if (batch.empty()) {
    throw std::invalid_argument("batch_loss_and_grad: empty batch");
  }
  std::size_t ell = batch.size();
  BatchResult res;
  res.grad.assign(model.param_count(), 0.0);
  res.state = state;

  // Forward pass: per-instance predictions and bag means.
  std::vector<std::vector<double>> preds(ell);
  std::vector<double> f_bar(ell);
  for (std::size_t i = 0; i < ell; ++i) {
    const Bag& b = *batch[i];
    preds[i].resize(b.instances.size());
    double s = 0.0;
    for (std::size_t j = 0; j < b.instances.size(); ++j) {
      preds[i][j] = model.forward(b.instances[j]);
      s += preds[i][j];
    }
    f_bar[i] = s / static_cast<double>(b.instances.size());
  }

  double inv_ell = 1.0 / static_cast<double>(ell);
  double p = state.p;
  double eps = cfg.eps_log;
  double loss = 0.0;

  // coeffs[i][j] = d loss / d preds[i][j]; the backward pass below turns them
  // into parameter gradients.
  std::vector<std::vector<double>> coeffs(ell);
  for (std::size_t i = 0; i < ell; ++i) coeffs[i].assign(preds[i].size(), 0.0);

  switch (cfg.rule) {
    case GradRule::PMSq: {
      for (std::size_t i = 0; i < ell; ++i) {
        int k = static_cast<int>(batch[i]->instances.size());
        double d = f_bar[i] - batch[i]->alpha();
        loss += inv_ell * d * d;
        double g = inv_ell * 2.0 * d / static_cast<double>(k);
        for (double& c : coeffs[i]) c = g;
      }
      break;
    }
    case GradRule::PMLog: {
      for (std::size_t i = 0; i < ell; ++i) {
        int k = static_cast<int>(batch[i]->instances.size());
        double alpha = batch[i]->alpha();
        double c = std::clamp(f_bar[i], eps, 1.0 - eps);
        loss += inv_ell * (-alpha * std::log(c) - (1.0 - alpha) * std::log(1.0 - c));
        if (f_bar[i] > eps && f_bar[i] < 1.0 - eps) {
          double g = inv_ell * (-alpha / c + (1.0 - alpha) / (1.0 - c)) /
                     static_cast<double>(k);
          for (double& cf : coeffs[i]) cf = g;
        }
      }
      break;
    }
    case GradRule::EZSq: {
      for (std::size_t i = 0; i < ell; ++i) {
        int k = static_cast<int>(batch[i]->instances.size());
        double alpha = batch[i]->alpha();
        double a = static_cast<double>(k) * (alpha - p) + p;
        double cc = static_cast<double>(k) * (p - alpha) + (1.0 - p);
        double w = inv_ell / static_cast<double>(k);
        for (std::size_t j = 0; j < preds[i].size(); ++j) {
          double f = preds[i][j];
          loss += w * (a * (f - 1.0) * (f - 1.0) + cc * f * f);
          coeffs[i][j] = w * (2.0 * a * (f - 1.0) + 2.0 * cc * f);
        }
      }
      break;
    }
    case GradRule::EZLog: {
      for (std::size_t i = 0; i < ell; ++i) {
        int k = static_cast<int>(batch[i]->instances.size());
        double alpha = batch[i]->alpha();
        double a = static_cast<double>(k) * (alpha - p) + p;
        double cc = static_cast<double>(k) * (p - alpha) + (1.0 - p);
        double w = inv_ell / static_cast<double>(k);
        for (std::size_t j = 0; j < preds[i].size(); ++j) {
          double f = preds[i][j];
          double cl = std::clamp(f, eps, 1.0 - eps);
          loss += w * (-a * std::log(cl) - cc * std::log(1.0 - cl));
          if (f > eps && f < 1.0 - eps) {
            coeffs[i][j] = w * (-a / cl + cc / (1.0 - cl));
          }
        }
      }
      break;
    }
    case GradRule::DebiasedSq: {
      int k = static_cast<int>(batch[0]->instances.size());
      std::size_t total = 0;
      double mean_pred = 0.0;
      for (std::size_t i = 0; i < ell; ++i) {
        for (double f : preds[i]) mean_pred += f;
        total += preds[i].size();
      }
      mean_pred /= static_cast<double>(total);
      double v_plus = cfg.beta * state.v_hat + (1.0 - cfg.beta) * mean_pred;
      res.state.v_hat = v_plus;
      double dev = v_plus - p;
      loss = -static_cast<double>(k - 1) * dev * dev;
      double g_mean = -inv_ell * 2.0 * static_cast<double>(k - 1) * dev *
                      (1.0 - cfg.beta) / static_cast<double>(k);
      for (std::size_t i = 0; i < ell; ++i) {
        double d = f_bar[i] - batch[i]->alpha();
        loss += inv_ell * static_cast<double>(k) * d * d;
        double g = inv_ell * 2.0 * d + g_mean;
        for (double& c : coeffs[i]) c = g;
      }
      break;
    }
  }
  res.loss = loss;

  for (std::size_t i = 0; i < ell; ++i) {
    const Bag& b = *batch[i];
    for (std::size_t j = 0; j < b.instances.size(); ++j) {
      if (coeffs[i][j] != 0.0) {
        model.accumulate_gradient(b.instances[j], coeffs[i][j], res.grad);
      }
    }
  }
  return res;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_err01 = 0.0;
  double v_hat = 0.0;
  double wall_ms = 0.0;  // informational; excluded from determinism checks
};

struct TrainTrace {
  std::vector<EpochRecord> records;
  bool aborted = false;
  std::string abort_reason;
};

struct TrainResult {
  ParametricModel model;
  TrainTrace trace;
};

// Resolved training plan: which bags to iterate and which p to plug into the
// losses.  Split mode spends the even half of a shuffled order on estimating
// p and trains on the rest.
namespace detail {

struct TrainPlan {
  std::vector<std::size_t> bag_indices;
  double p = 0.0;
};

inline TrainPlan make_train_plan(const BagDataset& ds, const TrainConfig& cfg) {
  TrainPlan plan;
  if (cfg.p_mode == LossRule::PMode::Split) {
    SplitIndices s = split_indices(ds.n(), cfg.split_seed);
    double sum = 0.0;
    for (std::size_t i : s.p_half) sum += ds.bags[i].alpha();
    plan.p = sum / static_cast<double>(s.p_half.size());
    plan.bag_indices = s.risk_half;
  } else {
    LossRule probe = LossRule::ez_plugin();
    probe.p_mode = cfg.p_mode;
    probe.p = cfg.p;
    plan.p = resolve_p(probe, ds);
    plan.bag_indices.resize(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) plan.bag_indices[i] = i;
  }
  return plan;
}

}  // namespace detail

// Plain SGD: theta+ = theta - lr * grad, seeded bag shuffle each epoch,
// trace recorded per epoch.  Divergence (|loss| > 1e12) and non-finite loss
// or gradient abort early with the trace preserved.
inline TrainResult train(ParametricModel model, const BagDataset& train_ds,
                         const BagDataset& test_ds, const TrainConfig& cfg) {
  cfg.validate();
  train_ds.validate();
  test_ds.validate();
  if (!test_ds.true_labels) {
    throw std::invalid_argument("train: test set needs true labels for 0-1 error");
  }
  if (train_ds.feature_dim != model.feature_dim) {
    throw std::invalid_argument("train: model/train feature_dim mismatch");
  }

  detail::TrainPlan plan = detail::make_train_plan(train_ds, cfg);
  BatchState state{plan.p, plan.p};  // v_hat starts at the resolved marginal

  TrainResult out;
  out.trace.records.reserve(cfg.epochs);
  Rng rng(cfg.seed);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(plan.bag_indices);
    double loss_sum = 0.0;
    std::size_t bags_seen = 0;
    for (std::size_t start = 0; start < plan.bag_indices.size();
         start += cfg.batch_bags) {
      std::size_t stop =
          std::min(plan.bag_indices.size(), start + cfg.batch_bags);
      std::vector<const Bag*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&train_ds.bags[plan.bag_indices[i]]);
      }
      BatchResult res = batch_loss_and_grad(model, batch, cfg, state);
      bool finite = std::isfinite(res.loss);
      for (double g : res.grad) finite = finite && std::isfinite(g);
      if (!finite) {
        out.trace.aborted = true;
        out.trace.abort_reason = "non-finite loss or gradient in epoch " +
                                 std::to_string(epoch);
        out.model = std::move(model);
        return out;
      }
      if (std::abs(res.loss) > 1e12) {
        out.trace.aborted = true;
        out.trace.abort_reason =
            "divergence in epoch " + std::to_string(epoch) +
            ": |loss| = " + std::to_string(res.loss);
        out.model = std::move(model);
        return out;
      }
      state = res.state;
      for (std::size_t q = 0; q < model.params.size(); ++q) {
        model.params[q] -= cfg.lr * res.grad[q];
      }
      loss_sum += res.loss * static_cast<double>(batch.size());
      bags_seen += batch.size();
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(bags_seen);
    rec.test_err01 = zero_one_risk(model.as_predictor(), test_ds);
    rec.v_hat = state.v_hat;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    out.trace.records.push_back(rec);
  }
  out.model = std::move(model);
  return out;
}

// ---- finite-difference gradient checking ------------------------------------

struct GradCheck {
  std::vector<double> analytic;
  std::vector<double> fd;
  std::vector<double> rel_err;
  double max_rel_err = 0.0;
};

inline double gradcheck_rel_err(double a, double b) {
  double denom = std::max({1e-8, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

// Central differences with the EMA state held at its pre-update value, which
// is exactly what the analytic gradient differentiates.
inline GradCheck grad_check(const ParametricModel& model,
                            const std::vector<const Bag*>& batch,
                            const TrainConfig& cfg, BatchState state,
                            double step = 1e-5) {
  GradCheck gc;
  gc.analytic = batch_loss_and_grad(model, batch, cfg, state).grad;
  gc.fd.resize(gc.analytic.size());
  gc.rel_err.resize(gc.analytic.size());
  ParametricModel probe = model;
  for (std::size_t q = 0; q < probe.params.size(); ++q) {
    double keep = probe.params[q];
    probe.params[q] = keep + step;
    double up = batch_loss_and_grad(probe, batch, cfg, state).loss;
    probe.params[q] = keep - step;
    double down = batch_loss_and_grad(probe, batch, cfg, state).loss;
    probe.params[q] = keep;
    gc.fd[q] = (up - down) / (2.0 * step);
    gc.rel_err[q] = gradcheck_rel_err(gc.analytic[q], gc.fd[q]);
    gc.max_rel_err = std::max(gc.max_rel_err, gc.rel_err[q]);
  }
  return gc;
}

// Trace CSV: epoch, train_loss, test_err01, v_hat, ms.  The ms column is wall
// time and will differ between reruns; everything else is seed-determined.
inline void save_trace_csv(const TrainTrace& trace, std::ostream& out) {
  out << "epoch,train_loss,test_err01,v_hat,ms\n";
  for (const EpochRecord& r : trace.records) {
    out << r.epoch << ',' << format_double(r.train_loss) << ','
        << format_double(r.test_err01) << ',' << format_double(r.v_hat) << ','
        << format_double(r.wall_ms) << '\n';
  }
}

inline void save_trace_csv(const TrainTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_trace_csv: cannot open " + path);
  save_trace_csv(trace, out);
}

}  // namespace llp
