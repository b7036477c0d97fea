#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/data.hpp"
#include "llp/random.hpp"

// Finitely supported distribution over labeled instances, and i.i.d. bag
// sampling from it.

namespace llp {

struct DiscreteDistribution {
  std::vector<Instance> xs;
  std::vector<std::uint8_t> ys;
  std::vector<double> probs;

  std::size_t support_size() const { return xs.size(); }

  // Label marginal p = Pr[y = 1].
  double p() const {
    double s = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (ys[i]) s += probs[i];
    }
    return s;
  }

  void validate() const {
    if (xs.empty()) throw std::invalid_argument("DiscreteDistribution: empty support");
    if (ys.size() != xs.size() || probs.size() != xs.size()) {
      throw std::invalid_argument("DiscreteDistribution: ragged support arrays");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0)) {
        throw std::invalid_argument("DiscreteDistribution: negative probability at atom " +
                                    std::to_string(i));
      }
      if (ys[i] > 1) {
        throw std::invalid_argument("DiscreteDistribution: non-binary label at atom " +
                                    std::to_string(i));
      }
      check_finite(xs[i], "DiscreteDistribution");
      sum += probs[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw std::invalid_argument("DiscreteDistribution: probabilities sum to " +
                                  std::to_string(sum) + ", not 1");
    }
  }

  // CDF inversion.  Returns an atom index.
  std::size_t sample_index(Rng& rng) const {
    double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  }
};

// Draws n*k labeled instances i.i.d. from dist and chunks them into n bags of
// size k in draw order.  Deterministic given the seed.
inline BagDataset sample_dataset(const DiscreteDistribution& dist, std::size_t n,
                                 int k, std::uint64_t seed) {
  dist.validate();
  if (n == 0) throw std::invalid_argument("sample_dataset: n must be positive");
  if (k <= 0) throw std::invalid_argument("sample_dataset: k must be positive");
  Rng rng(seed);
  std::vector<Instance> xs;
  std::vector<std::uint8_t> ys;
  xs.reserve(n * static_cast<std::size_t>(k));
  ys.reserve(n * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n * static_cast<std::size_t>(k); ++i) {
    std::size_t a = dist.sample_index(rng);
    xs.push_back(dist.xs[a]);
    ys.push_back(dist.ys[a]);
  }
  return make_bags_in_order(std::move(xs), std::move(ys), k);
}

}  // namespace llp
