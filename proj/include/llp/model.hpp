#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "llp/data.hpp"
#include "llp/finite_class.hpp"
#include "llp/random.hpp"

// Parametric predictors for the gradient trainers: a linear-sigmoid model and
// a two-layer relu MLP, both with a flat parameter vector so the optimizer and
// finite-difference checks can treat them uniformly.

namespace llp {

// Overflow-safe logistic function.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

enum class Arch { Linear, MLP };

inline const char* to_string(Arch a) {
  return a == Arch::Linear ? "linear" : "mlp";
}

struct ParametricModel {
  Arch arch = Arch::Linear;
  std::size_t feature_dim = 0;
  std::size_t hidden = 0;  // MLP only
  // Linear: [w (d), b].  MLP: [W1 row-major (h*d), b1 (h), w2 (h), b2].
  std::vector<double> params;

  static ParametricModel linear(std::size_t feature_dim) {
    if (feature_dim == 0) {
      throw std::invalid_argument("ParametricModel: feature_dim must be positive");
    }
    ParametricModel m;
    m.arch = Arch::Linear;
    m.feature_dim = feature_dim;
    m.params.assign(feature_dim + 1, 0.0);
    return m;
  }

  static ParametricModel mlp(std::size_t feature_dim, std::size_t hidden) {
    if (feature_dim == 0 || hidden == 0) {
      throw std::invalid_argument(
          "ParametricModel: feature_dim and hidden must be positive");
    }
    ParametricModel m;
    m.arch = Arch::MLP;
    m.feature_dim = feature_dim;
    m.hidden = hidden;
    m.params.assign(hidden * feature_dim + 2 * hidden + 1, 0.0);
    return m;
  }

  std::size_t param_count() const { return params.size(); }

  // Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    auto u = [&](double fan_in) {
      return (2.0 * rng.uniform01() - 1.0) / std::sqrt(fan_in);
    };
    if (arch == Arch::Linear) {
      for (double& v : params) v = u(static_cast<double>(feature_dim));
      return;
    }
    std::size_t i = 0;
    for (; i < hidden * feature_dim + hidden; ++i) {
      params[i] = u(static_cast<double>(feature_dim));  // W1, b1
    }
    for (; i < params.size(); ++i) {
      params[i] = u(static_cast<double>(hidden));  // w2, b2
    }
  }

  double forward(const Instance& x) const {
    return sigmoid(logit(x));
  }

  double logit(const Instance& x) const {
    if (x.features.size() != feature_dim) {
      throw std::invalid_argument("ParametricModel: instance has feature_dim " +
                                  std::to_string(x.features.size()) +
                                  ", model expects " +
                                  std::to_string(feature_dim));
    }
    if (arch == Arch::Linear) {
      double z = params[feature_dim];  // bias
      for (std::size_t c = 0; c < feature_dim; ++c) {
        z += params[c] * x.features[c];
      }
      return z;
    }
    const double* w1 = params.data();
    const double* b1 = w1 + hidden * feature_dim;
    const double* w2 = b1 + hidden;
    double b2 = w2[hidden];
    double z = b2;
    for (std::size_t r = 0; r < hidden; ++r) {
      double a = b1[r];
      const double* row = w1 + r * feature_dim;
      for (std::size_t c = 0; c < feature_dim; ++c) a += row[c] * x.features[c];
      if (a > 0.0) z += w2[r] * a;  // relu
    }
    return z;
  }

  // Accumulates coeff * d forward(x) / d params into grad.  Recomputes the
  // forward pass; batches are small enough that this beats storing
  // activations.
  void accumulate_gradient(const Instance& x, double coeff,
                           std::vector<double>& grad) const {
    if (arch == Arch::Linear) {
      double s = forward(x);
      double g = coeff * s * (1.0 - s);
      for (std::size_t c = 0; c < feature_dim; ++c) {
        grad[c] += g * x.features[c];
      }
      grad[feature_dim] += g;
      return;
    }
    const double* w1 = params.data();
    const double* b1 = w1 + hidden * feature_dim;
    const double* w2 = b1 + hidden;
    std::size_t off_b1 = hidden * feature_dim;
    std::size_t off_w2 = off_b1 + hidden;
    std::size_t off_b2 = off_w2 + hidden;
    double z = params[off_b2];
    std::vector<double> act(hidden, 0.0);
    for (std::size_t r = 0; r < hidden; ++r) {
      double a = b1[r];
      const double* row = w1 + r * feature_dim;
      for (std::size_t c = 0; c < feature_dim; ++c) a += row[c] * x.features[c];
      if (a > 0.0) {
        act[r] = a;
        z += w2[r] * a;
      }
    }
    double s = sigmoid(z);
    double g = coeff * s * (1.0 - s);
    grad[off_b2] += g;
    for (std::size_t r = 0; r < hidden; ++r) {
      grad[off_w2 + r] += g * act[r];
      if (act[r] > 0.0) {
        double gr = g * w2[r];
        grad[off_b1 + r] += gr;
        double* grow = grad.data() + r * feature_dim;
        for (std::size_t c = 0; c < feature_dim; ++c) {
          grow[c] += gr * x.features[c];
        }
      }
    }
  }

  // Snapshot as a generic predictor (copies the parameters).
  Predictor as_predictor() const {
    return Predictor::from_function(
        [m = *this](const Instance& x) { return m.forward(x); });
  }
};

inline void save_model(const ParametricModel& m, const std::string& path) {
  nlohmann::ordered_json j;
  j["arch"] = to_string(m.arch);
  if (m.arch == Arch::MLP) j["hidden"] = m.hidden;
  j["feature_dim"] = m.feature_dim;
  j["params"] = m.params;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_model: cannot open " + path);
  out << j.dump() << '\n';
}

inline ParametricModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_model: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("load_model: " + path + ": " + e.what());
  }
  if (!j.contains("arch") || !j.contains("feature_dim") || !j.contains("params")) {
    throw std::runtime_error(
        "load_model: expected object with arch, feature_dim, params");
  }
  std::string arch = j["arch"].get<std::string>();
  std::size_t d = j["feature_dim"].get<std::size_t>();
  ParametricModel m;
  if (arch == "linear") {
    m = ParametricModel::linear(d);
  } else if (arch == "mlp") {
    if (!j.contains("hidden")) {
      throw std::runtime_error("load_model: mlp checkpoint missing hidden");
    }
    m = ParametricModel::mlp(d, j["hidden"].get<std::size_t>());
  } else {
    throw std::runtime_error("load_model: unknown arch '" + arch + "'");
  }
  auto params = j["params"].get<std::vector<double>>();
  if (params.size() != m.param_count()) {
    throw std::runtime_error("load_model: params has " +
                             std::to_string(params.size()) + " entries, arch needs " +
                             std::to_string(m.param_count()));
  }
  m.params = std::move(params);
  return m;
}

}  // namespace llp
