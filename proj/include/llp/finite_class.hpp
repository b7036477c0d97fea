#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/data.hpp"

// Finite hypothesis classes over a finite instance space.
//
// Convention: instances of a finite space are index-encoded, i.e. feature_dim
// is 1 and features[0] holds the index of the point in instance_space.  This
// keeps bag data for finite-class experiments compact and makes hypothesis
// evaluation a table lookup.

namespace llp {

struct FiniteClass {
  std::vector<Instance> instance_space;
  // Rows are hypotheses; table[h][x] is the binary prediction of hypothesis h
  // on instance-space point x.
  std::vector<std::vector<std::uint8_t>> table;
  // When set, the class is closed under complement: for every row, the
  // pointwise complement row is also present.
  bool symmetric = false;
  std::optional<int> vc_dim;

  std::size_t size() const { return table.size(); }
  double size_log2() const { return std::log2(static_cast<double>(table.size())); }

  void validate() const {
    if (instance_space.empty() || table.empty()) {
      throw std::invalid_argument("FiniteClass: empty instance space or table");
    }
    for (std::size_t h = 0; h < table.size(); ++h) {
      if (table[h].size() != instance_space.size()) {
        throw std::invalid_argument("FiniteClass: row " + std::to_string(h) +
                                    " has wrong width");
      }
      for (std::uint8_t v : table[h]) {
        if (v > 1) {
          throw std::invalid_argument("FiniteClass: non-binary entry in row " +
                                      std::to_string(h));
        }
      }
    }
    for (std::size_t a = 0; a < table.size(); ++a) {
      for (std::size_t b = a + 1; b < table.size(); ++b) {
        if (table[a] == table[b]) {
          throw std::invalid_argument("FiniteClass: duplicate rows " +
                                      std::to_string(a) + " and " +
                                      std::to_string(b));
        }
      }
    }
    if (symmetric) {
      for (std::size_t h = 0; h < table.size(); ++h) {
        std::vector<std::uint8_t> comp(table[h].size());
        for (std::size_t x = 0; x < comp.size(); ++x) comp[x] = 1 - table[h][x];
        bool found = false;
        for (const auto& row : table) {
          if (row == comp) {
            found = true;
            break;
          }
        }
        if (!found) {
          throw std::invalid_argument(
              "FiniteClass: marked symmetric but row " + std::to_string(h) +
              " has no complement row");
        }
      }
    }
  }
};

inline std::size_t instance_index(const Instance& x) {
  if (x.features.size() != 1) {
    throw std::invalid_argument(
        "instance_index: finite-class instances must be index-encoded "
        "(feature_dim 1)");
  }
  return static_cast<std::size_t>(x.features[0]);
}

// A single row of a finite class, usable as a predictor.
struct FiniteHypothesis {
  const FiniteClass* cls = nullptr;
  std::size_t row = 0;

  std::uint8_t predict_index(std::size_t x_index) const {
    return cls->table[row][x_index];
  }
  double operator()(const Instance& x) const {
    return static_cast<double>(predict_index(instance_index(x)));
  }
};

// Generic predictor: either a finite hypothesis (exact binary predictions) or
// a real-valued function into [0, 1].
struct Predictor {
  std::optional<FiniteHypothesis> finite;
  std::function<double(const Instance&)> real;

  static Predictor from_hypothesis(FiniteHypothesis h) {
    Predictor p;
    p.finite = h;
    return p;
  }
  static Predictor from_function(std::function<double(const Instance&)> f) {
    Predictor p;
    p.real = std::move(f);
    return p;
  }

  bool is_finite() const { return finite.has_value(); }

  double operator()(const Instance& x) const {
    if (finite) return (*finite)(x);
    double v = real(x);
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("Predictor: output " + std::to_string(v) +
                                  " outside [0, 1]");
    }
    return v;
  }
};

}  // namespace llp
