#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "llp/random.hpp"

// Core data model: instances, bags, bag datasets.
//
// Labels are binary.  A bag of size k exposes only its label count
// (an integer in [0, k]); the proportion alpha = count / k is always derived
// from the count so that proportion comparisons can be exact.

namespace llp {

struct Instance {
  std::vector<double> features;
};

inline void check_finite(const Instance& x, const char* where) {
  for (double v : x.features) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(where) +
                                  ": instance has a non-finite feature");
    }
  }
}

struct Bag {
  std::vector<Instance> instances;
  int label_count = 0;

  double alpha() const {
    return static_cast<double>(label_count) /
           static_cast<double>(instances.size());
  }
};

// n bags of uniform size k.  true_labels, when present, is aligned with bags
// and consistent with each bag's label_count; it exists so instance-level 0-1
// risk can be evaluated on synthetic data where the labels are known.
struct BagDataset {
  std::vector<Bag> bags;
  int k = 0;
  std::size_t feature_dim = 0;
  std::optional<std::vector<std::vector<std::uint8_t>>> true_labels;

  std::size_t n() const { return bags.size(); }

  // Empirical label marginal: mean alpha over bags.
  double p_hat() const {
    double s = 0.0;
    for (const Bag& b : bags) s += b.alpha();
    return s / static_cast<double>(bags.size());
  }

  void validate() const {
    if (bags.empty()) throw std::invalid_argument("BagDataset: no bags");
    if (k <= 0) throw std::invalid_argument("BagDataset: k must be positive");
    for (std::size_t i = 0; i < bags.size(); ++i) {
      const Bag& b = bags[i];
      if (b.instances.size() != static_cast<std::size_t>(k)) {
        throw std::invalid_argument("BagDataset: bag " + std::to_string(i) +
                                    " has size " +
                                    std::to_string(b.instances.size()) +
                                    ", expected k=" + std::to_string(k));
      }
      if (b.label_count < 0 || b.label_count > k) {
        throw std::invalid_argument("BagDataset: bag " + std::to_string(i) +
                                    " has label_count outside [0, k]");
      }
      for (const Instance& x : b.instances) {
        if (x.features.size() != feature_dim) {
          throw std::invalid_argument(
              "BagDataset: bag " + std::to_string(i) +
              " has an instance with wrong feature_dim");
        }
        check_finite(x, "BagDataset");
      }
    }
    if (true_labels) {
      if (true_labels->size() != bags.size()) {
        throw std::invalid_argument(
            "BagDataset: true_labels not aligned with bags");
      }
      for (std::size_t i = 0; i < bags.size(); ++i) {
        const auto& ls = (*true_labels)[i];
        if (ls.size() != static_cast<std::size_t>(k)) {
          throw std::invalid_argument("BagDataset: true_labels[" +
                                      std::to_string(i) + "] has wrong size");
        }
        int c = 0;
        for (std::uint8_t y : ls) {
          if (y > 1) {
            throw std::invalid_argument("BagDataset: non-binary label in bag " +
                                        std::to_string(i));
          }
          c += y;
        }
        if (c != bags[i].label_count) {
          throw std::invalid_argument(
              "BagDataset: true_labels[" + std::to_string(i) +
              "] sum disagrees with label_count");
        }
      }
    }
  }
};

// Chunks labeled instances into contiguous bags of size k, preserving order.
// Errors if the instance count is not divisible by k.
inline BagDataset make_bags_in_order(std::vector<Instance> instances,
                                     std::vector<std::uint8_t> labels, int k) {
  if (k <= 0) throw std::invalid_argument("make_bags: k must be positive");
  if (instances.size() != labels.size()) {
    throw std::invalid_argument("make_bags: instances/labels size mismatch");
  }
  if (instances.empty() || instances.size() % static_cast<std::size_t>(k) != 0) {
    throw std::invalid_argument(
        "make_bags: instance count " + std::to_string(instances.size()) +
        " is not a positive multiple of k=" + std::to_string(k));
  }
  BagDataset ds;
  ds.k = k;
  ds.feature_dim = instances[0].features.size();
  std::size_t n = instances.size() / static_cast<std::size_t>(k);
  ds.bags.resize(n);
  ds.true_labels.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    Bag& b = ds.bags[i];
    auto& ls = (*ds.true_labels)[i];
    b.instances.reserve(k);
    ls.reserve(k);
    for (int j = 0; j < k; ++j) {
      std::size_t idx = i * static_cast<std::size_t>(k) + j;
      b.instances.push_back(std::move(instances[idx]));
      ls.push_back(labels[idx]);
      b.label_count += labels[idx];
    }
  }
  ds.validate();
  return ds;
}

// Bags instances without replacement: one seeded global shuffle, then
// contiguous chunks of size k.  Pass no seed to keep the input order
// (identity permutation).
inline BagDataset make_bags(std::vector<Instance> instances,
                            std::vector<std::uint8_t> labels, int k,
                            std::optional<std::uint64_t> seed) {
  if (seed) {
    if (instances.size() != labels.size()) {
      throw std::invalid_argument("make_bags: instances/labels size mismatch");
    }
    std::vector<std::size_t> perm(instances.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng rng(*seed);
    rng.shuffle(perm);
    std::vector<Instance> xs(instances.size());
    std::vector<std::uint8_t> ys(labels.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      xs[i] = std::move(instances[perm[i]]);
      ys[i] = labels[perm[i]];
    }
    return make_bags_in_order(std::move(xs), std::move(ys), k);
  }
  return make_bags_in_order(std::move(instances), std::move(labels), k);
}

}  // namespace llp
