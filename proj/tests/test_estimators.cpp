#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "llp/estimators.hpp"
#include "llp/exact.hpp"
#include "llp/synthetic.hpp"
#include "test_util.hpp"

using namespace llp;
using llp::testutil::random_dist;
using llp::testutil::table_predictor;
using Catch::Matchers::WithinAbs;

namespace {

BagDataset random_dataset(Rng& rng, std::size_t m, std::size_t n, int k) {
  return sample_dataset(random_dist(rng, m), n, k, rng.next_u64());
}

Predictor random_predictor(Rng& rng, std::size_t m) {
  std::vector<double> vals(m);
  for (double& v : vals) v = rng.uniform01();
  return table_predictor(std::move(vals));
}

// Reverses bag order (and aligned labels) without touching contents.
BagDataset reversed(const BagDataset& ds) {
  BagDataset r = ds;
  std::reverse(r.bags.begin(), r.bags.end());
  if (r.true_labels) std::reverse(r.true_labels->begin(), r.true_labels->end());
  return r;
}

}  // namespace

TEST_CASE("kernel spot values", "[estimators]") {
  REQUIRE(eprm_loss_counts(3, 3) == 0.0);
  REQUIRE(eprm_loss_counts(2, 3) == 1.0);

  REQUIRE_THAT(pm_sq_loss(0.75, 0.25, 4, false), WithinAbs(0.25, 1e-15));
  REQUIRE(pm_sq_loss(0.75, 0.25, 4, true) == 4.0 * pm_sq_loss(0.75, 0.25, 4, false));

  // The clamp keeps pure-bag log losses finite: -log(eps) at full mismatch.
  // The upper clamp goes through 1 - (1 - eps), which costs ~1e-9 in rounding.
  REQUIRE_THAT(pm_log_loss(0.0, 1.0, 1e-7), WithinAbs(16.118095650958319, 1e-12));
  REQUIRE_THAT(pm_log_loss(1.0, 0.0, 1e-7), WithinAbs(16.118095650958319, 1e-8));
  REQUIRE_THAT(pm_log_loss(0.25, 0.25, 1e-7),
               WithinAbs(-0.25 * std::log(0.25) - 0.75 * std::log(0.75), 1e-15));

  // k=2, p=1/2: pure bags score -1/2, mixed bags +1/2.
  REQUIRE_THAT(ez_loss(0.0, 0.0, 0.5, 2), WithinAbs(-0.5, 1e-15));
  REQUIRE_THAT(ez_loss(1.0, 1.0, 0.5, 2), WithinAbs(-0.5, 1e-15));
  REQUIRE_THAT(ez_loss(0.5, 0.5, 0.5, 2), WithinAbs(0.5, 1e-15));
}

TEST_CASE("ez bag loss is bounded by k", "[estimators][property]") {
  Rng rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    int k = 1 + static_cast<int>(rng.uniform_below(12));
    int c = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(k) + 1));
    double alpha = static_cast<double>(c) / k;
    double f_bar = rng.uniform01();
    double p = rng.uniform01();
    REQUIRE(std::abs(ez_loss(f_bar, alpha, p, k)) <= k + 1e-12);
  }
}

TEST_CASE("ez at k=1 is the instance soft loss and ignores p", "[estimators]") {
  Rng rng(2);
  auto ds = random_dataset(rng, 3, 30, 1);
  Predictor f = random_predictor(rng, 3);
  double a = ez_empirical_risk(f, ds, LossRule::ez_known(0.1));
  double b = ez_empirical_risk(f, ds, LossRule::ez_known(0.9));
  REQUIRE_THAT(a, WithinAbs(b, 1e-14));  // p cancels, up to rounding
  std::vector<double> soft(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const Bag& bag = ds.bags[i];
    double v = f(bag.instances[0]);
    soft[i] = bag.label_count ? 1.0 - v : v;
  }
  REQUIRE_THAT(a, WithinAbs(pairwise_mean(soft), 1e-14));
}

TEST_CASE("indicator rule needs exact counts", "[estimators]") {
  Bag bag;
  bag.instances = {Instance{{0.0}}, Instance{{1.0}}};
  bag.label_count = 1;
  REQUIRE_THROWS_AS(
      eprm_bag_loss(Predictor::from_function([](const Instance&) { return 0.5; }),
                    bag),
      std::invalid_argument);

  FiniteClass cls;
  cls.instance_space = {Instance{{0.0}}, Instance{{1.0}}};
  cls.table = {{1, 0}};
  cls.validate();
  Predictor h = Predictor::from_hypothesis({&cls, 0});
  REQUIRE(predicted_count(*h.finite, bag) == 1);
  REQUIRE(eprm_bag_loss(h, bag) == 0.0);
}

TEST_CASE("eprm equals instance 0-1 risk at k=1", "[estimators]") {
  auto inst = prop32_instance();
  auto ds = sample_dataset(inst.dist, 500, 1, 4);
  for (std::size_t row : {std::size_t{0}, std::size_t{1}}) {
    Predictor f = Predictor::from_hypothesis({&inst.cls, row});
    REQUIRE(empirical_risk(LossRule::eprm(), f, ds) == zero_one_risk(f, ds));
  }
}

TEST_CASE("pairwise summation", "[estimators]") {
  Rng rng(4);
  std::vector<double> v(1000);
  for (double& x : v) x = rng.uniform01() - 0.3;
  double naive = std::accumulate(v.begin(), v.end(), 0.0);
  REQUIRE_THAT(pairwise_sum(v.data(), v.size()), WithinAbs(naive, 1e-10));
  std::vector<double> ints = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0};
  REQUIRE(pairwise_sum(ints.data(), ints.size()) == 55.0);
  REQUIRE_THROWS_AS(pairwise_mean({}), std::invalid_argument);
}

TEST_CASE("debiased square inequalities with a plugged-in marginal",
          "[estimators][property]") {
  // bias_hat <= ((k-1)/k) sq by Jensen over bag deviations, hence dsq >= 0 and
  // sq <= k dsq.  Needs the plugin marginal; a mismatched known p can break it.
  Rng rng(5);
  LossRule rule = LossRule::dsq_plugin();
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t m = 2 + trial % 4;
    int k = 2 + static_cast<int>(rng.uniform_below(8));
    std::size_t n = 2 + rng.uniform_below(30);
    auto ds = random_dataset(rng, m, n, k);
    Predictor f = random_predictor(rng, m);
    DsqRisk r = dsq_empirical_risk(f, ds, rule);
    REQUIRE(r.dsq == r.sq - r.bias_hat);
    REQUIRE(r.bias_hat <= (k - 1.0) / k * r.sq + 1e-9);
    REQUIRE(r.dsq >= -1e-12);
    REQUIRE(r.sq <= k * r.dsq + 1e-9);
  }
}

TEST_CASE("debiased square rejects split mode", "[estimators]") {
  Rng rng(6);
  auto ds = random_dataset(rng, 3, 10, 4);
  Predictor f = random_predictor(rng, 3);
  LossRule r{LossRule::Tag::DSQ};
  r.p_mode = LossRule::PMode::Split;
  REQUIRE_THROWS_AS(dsq_empirical_risk(f, ds, r), std::invalid_argument);
}

TEST_CASE("offset estimate matches the risk difference at the same p",
          "[estimators]") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t m = 2 + trial % 4;
    int k = 1 + static_cast<int>(rng.uniform_below(6));
    auto ds = random_dataset(rng, m, 20, k);
    Predictor f = random_predictor(rng, m);
    Predictor fstar = random_predictor(rng, m);
    double p = rng.uniform01();
    double diff = ez_empirical_risk(f, ds, LossRule::ez_known(p)) -
                  ez_empirical_risk(fstar, ds, LossRule::ez_known(p));
    REQUIRE_THAT(ez_offset(f, fstar, ds, p), WithinAbs(diff, 1e-10));
  }
}

TEST_CASE("zero-one risk thresholds at 1/2 with ties going to class 1",
          "[estimators]") {
  std::vector<Instance> xs = {Instance{{0.0}}, Instance{{1.0}}};
  std::vector<std::uint8_t> ys = {0, 1};
  auto ds = make_bags_in_order(std::move(xs), std::move(ys), 2);
  Predictor half = Predictor::from_function([](const Instance&) { return 0.5; });
  REQUIRE(zero_one_risk(half, ds) == 0.5);  // predicts 1 everywhere

  BagDataset unlabeled = ds;
  unlabeled.true_labels.reset();
  REQUIRE_THROWS_AS(zero_one_risk(half, unlabeled), std::invalid_argument);
}

TEST_CASE("empirical risks are invariant to bag order", "[estimators]") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t m = 2 + trial % 4;
    int k = 1 + static_cast<int>(rng.uniform_below(6));
    auto ds = random_dataset(rng, m, 25, k);
    auto rev = reversed(ds);
    Predictor f = random_predictor(rng, m);
    for (LossRule rule :
         {LossRule::pm_sq(false), LossRule::pm_sq(true), LossRule::pm_log(),
          LossRule::dsq_plugin(), LossRule::dsq_known(0.4),
          LossRule::ez_plugin(), LossRule::ez_known(0.4)}) {
      REQUIRE_THAT(empirical_risk(rule, f, ds),
                   WithinAbs(empirical_risk(rule, f, rev), 1e-12));
    }
    // Split mode is the lone exception: the partition is positional.
  }
}

TEST_CASE("split mode partitions deterministically", "[estimators]") {
  SplitIndices a = split_indices(11, 42);
  SplitIndices b = split_indices(11, 42);
  REQUIRE(a.p_half == b.p_half);
  REQUIRE(a.risk_half == b.risk_half);
  REQUIRE(a.p_half.size() == 6);
  REQUIRE(a.risk_half.size() == 5);
  std::vector<std::size_t> all = a.p_half;
  all.insert(all.end(), a.risk_half.begin(), a.risk_half.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);

  SplitIndices c = split_indices(11, 43);
  REQUIRE(a.p_half != c.p_half);

  REQUIRE_THROWS_AS(split_indices(1, 0), std::invalid_argument);
}

TEST_CASE("split risk matches a direct recomputation", "[estimators]") {
  Rng rng(9);
  auto ds = random_dataset(rng, 3, 21, 5);
  Predictor f = random_predictor(rng, 3);
  LossRule rule = LossRule::ez_split(1234);

  SplitIndices s = split_indices(ds.n(), 1234);
  double p_hat = 0.0;
  for (std::size_t i : s.p_half) p_hat += ds.bags[i].alpha();
  p_hat /= static_cast<double>(s.p_half.size());
  std::vector<double> losses(s.risk_half.size());
  for (std::size_t j = 0; j < s.risk_half.size(); ++j) {
    const Bag& b = ds.bags[s.risk_half[j]];
    losses[j] = ez_loss(predicted_mean(f, b), b.alpha(), p_hat, ds.k);
  }
  REQUIRE(ez_empirical_risk(f, ds, rule) == pairwise_mean(losses));
}

TEST_CASE("p resolution", "[estimators]") {
  Rng rng(10);
  auto ds = random_dataset(rng, 3, 12, 4);
  REQUIRE(resolve_p(LossRule::ez_known(0.3), ds) == 0.3);
  REQUIRE(resolve_p(LossRule::ez_plugin(), ds) == ds.p_hat());
  REQUIRE_THROWS_AS(resolve_p(LossRule::ez_split(0), ds), std::invalid_argument);

  LossRule unset{LossRule::Tag::EZ};
  unset.p_mode = LossRule::PMode::Known;
  REQUIRE_THROWS_AS(resolve_p(unset, ds), std::invalid_argument);
}

TEST_CASE("empirical EZ risk concentrates on the exact soft risk",
          "[estimators][statistical]") {
  // Known p: the estimator is unbiased, so a large-n average should sit within
  // a few standard errors of the enumerated expectation.  Seed fixed.
  Rng rng(2718);
  DiscreteDistribution dist = random_dist(rng, 3);
  Predictor f = random_predictor(rng, 3);
  int k = 4;
  double target = exact_expected_bag_loss(LossRule::ez_known(dist.p()), f, dist, k);
  REQUIRE_THAT(target, WithinAbs(exact_soft_risk(f, dist), 1e-12));
  std::size_t n = 200000;
  auto ds = sample_dataset(dist, n, k, 31415);
  double est = ez_empirical_risk(f, ds, LossRule::ez_known(dist.p()));
  // Bag losses are bounded by k, so sd <= k; allow 4 sigma with sd = k.
  double slack = 4.0 * k / std::sqrt(static_cast<double>(n));
  REQUIRE_THAT(est, WithinAbs(target, slack));
}
