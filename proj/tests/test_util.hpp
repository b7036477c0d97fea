#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "llp/distribution.hpp"
#include "llp/finite_class.hpp"
#include "llp/random.hpp"

// Shared helpers for the test suites.

namespace llp::testutil {

// Random finitely supported distribution over index-encoded points, with the
// last probability computed by closure so the sum is 1 in floating point.
inline DiscreteDistribution random_dist(Rng& rng, std::size_t m) {
  DiscreteDistribution d;
  std::vector<double> w(m);
  double total = 0.0;
  for (double& v : w) {
    v = 0.05 + rng.uniform01();
    total += v;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    d.xs.push_back(Instance{{static_cast<double>(i)}});
    d.ys.push_back(rng.bernoulli(0.5) ? 1 : 0);
    if (i + 1 < m) {
      double p = w[i] / total;
      d.probs.push_back(p);
      acc += p;
    } else {
      d.probs.push_back(1.0 - acc);
    }
  }
  d.validate();
  return d;
}

// Table-backed real-valued predictor over an index-encoded space.
inline Predictor table_predictor(std::vector<double> values) {
  return Predictor::from_function(
      [values = std::move(values)](const Instance& x) {
        return values[static_cast<std::size_t>(x.features[0])];
      });
}

}  // namespace llp::testutil
