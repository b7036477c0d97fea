#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "llp/exact.hpp"
#include "llp/synthetic.hpp"

using namespace llp;
using Catch::Matchers::WithinAbs;

TEST_CASE("two-point construction wiring", "[synthetic]") {
  auto inst = prop32_instance();
  inst.dist.validate();
  inst.cls.validate();
  REQUIRE(inst.cls.size() == 2);
  REQUIRE(inst.dist.p() == 2.0 / 3.0);
  // f1's mean prediction equals the label marginal exactly: zero bias.
  Predictor f1 = Predictor::from_hypothesis({&inst.cls, inst.f1_row});
  REQUIRE(expected_prediction(f1, inst.dist) == inst.dist.p());
}

TEST_CASE("log rule prefers the worse classifier once bags are long",
          "[synthetic][oracle]") {
  auto inst = loglossfail_instance();
  Predictor f1 = Predictor::from_hypothesis({&inst.cls, inst.f1_row});
  Predictor f2 = Predictor::from_hypothesis({&inst.cls, inst.f2_row});
  REQUIRE(exact_risk(f1, inst.dist) > exact_risk(f2, inst.dist));
  LossRule log_rule = LossRule::pm_log();
  // k=1 degenerates to instance-level log loss and ranks them correctly.
  REQUIRE(exact_expected_bag_loss(log_rule, f2, inst.dist, 1) <
          exact_expected_bag_loss(log_rule, f1, inst.dist, 1));
  // Long bags: proportions concentrate and the zero-bias f1 wins the window.
  REQUIRE(exact_expected_bag_loss(log_rule, f1, inst.dist, 40) <
          exact_expected_bag_loss(log_rule, f2, inst.dist, 40));
}

TEST_CASE("realizable pair wiring", "[synthetic]") {
  auto inst = prop41_instance();
  inst.dist.validate();
  inst.cls.validate();
  REQUIRE(inst.dist.p() == 0.5);
  Predictor fstar = Predictor::from_hypothesis(inst.fstar());
  Predictor comp = Predictor::from_hypothesis({&inst.cls, 1});
  REQUIRE(exact_risk(fstar, inst.dist) == 0.0);
  REQUIRE(exact_risk(comp, inst.dist) == 1.0);
}

TEST_CASE("constant pair: indicator rule only resolves on pure bags",
          "[synthetic][oracle]") {
  REQUIRE_THROWS_AS(eprm_expfail_instance(0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(eprm_expfail_instance(0.5), std::invalid_argument);
  auto inst = eprm_expfail_instance(0.1);
  Predictor c0 = Predictor::from_hypothesis({&inst.cls, 0});
  Predictor c1 = Predictor::from_hypothesis({&inst.cls, 1});
  // A bag matches constant 0 iff it is all-0, constant 1 iff all-1.
  for (int k = 1; k <= 12; ++k) {
    REQUIRE_THAT(exact_expected_bag_loss(LossRule::eprm(), c0, inst.dist, k),
                 WithinAbs(1.0 - std::pow(0.4, k), 1e-12));
    REQUIRE_THAT(exact_expected_bag_loss(LossRule::eprm(), c1, inst.dist, k),
                 WithinAbs(1.0 - std::pow(0.6, k), 1e-12));
  }
}

TEST_CASE("lower-bound family validation and separation values", "[synthetic]") {
  LowerBoundFamily fam;
  fam.d = 3;
  fam.gamma = 0.25;
  fam.member = 2;
  fam.validate();
  REQUIRE(fam.index_count() == 8);

  LowerBoundFamily bad = fam;
  bad.d = 2;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = fam;
  bad.d = 17;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = fam;
  bad.gamma = 0.6;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = fam;
  bad.member = 8;
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);

  // Excess against two members: gamma when the predictor sides with one of
  // them, 2 gamma when it matches neither; never resolvable to zero.
  REQUIRE(separation_check(fam, 1, 1, 5) == fam.gamma);
  REQUIRE(separation_check(fam, 5, 1, 5) == fam.gamma);
  REQUIRE(separation_check(fam, 3, 1, 5) == 2.0 * fam.gamma);
  REQUIRE_THROWS_AS(separation_check(fam, 3, 1, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(separation_check(fam, 9, 1, 5), std::invalid_argument);
}

TEST_CASE("lower-bound sampler shape, determinism, label bias",
          "[synthetic][statistical]") {
  LowerBoundFamily fam;
  fam.d = 4;
  fam.gamma = 0.3;
  fam.member = 7;
  std::size_t n = 400;
  int k = 5;
  auto ds = lower_bound_sample(fam, n, k, 99);
  ds.validate();
  REQUIRE(ds.n() == n);
  REQUIRE(ds.k == k);
  REQUIRE(ds.feature_dim == 16);
  REQUIRE(ds.true_labels.has_value());

  auto ds2 = lower_bound_sample(fam, n, k, 99);
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(ds.bags[i].label_count == ds2.bags[i].label_count);
    REQUIRE(ds.bags[i].instances[0].features ==
            ds2.bags[i].instances[0].features);
  }

  // P[y = x[member]] = 1/2 + gamma; z-test at 4 sigma over nk draws.
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      double coord = ds.bags[i].instances[j].features[fam.member];
      std::uint8_t y = (*ds.true_labels)[i][j];
      agree += (static_cast<std::uint8_t>(coord) == y);
      ++total;
      REQUIRE((coord == 0.0 || coord == 1.0));
    }
  }
  double rate = static_cast<double>(agree) / static_cast<double>(total);
  double sigma = std::sqrt(0.8 * 0.2 / static_cast<double>(total));
  REQUIRE_THAT(rate, WithinAbs(0.5 + fam.gamma, 4.0 * sigma));
}

TEST_CASE("threshold class table", "[synthetic]") {
  FiniteClass cls = threshold_class(4);
  REQUIRE(cls.size() == 8);
  REQUIRE(cls.vc_dim == 1);
  // Row 0 is constant 1; row j flips on at x = j; rows m.. are complements.
  for (std::size_t x = 0; x < 4; ++x) {
    REQUIRE(cls.table[0][x] == 1);
    REQUIRE(cls.table[2][x] == (x >= 2 ? 1 : 0));
    REQUIRE(cls.table[4 + 2][x] == (x >= 2 ? 0 : 1));
  }
  REQUIRE_THROWS_AS(threshold_class(0), std::invalid_argument);
  REQUIRE_THROWS_AS(threshold_class(4097), std::invalid_argument);
}

TEST_CASE("threshold experiment noise profile", "[synthetic]") {
  REQUIRE_THROWS_AS(ThresholdExperiment::make(1, 0, 0.1, 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ThresholdExperiment::make(8, 8, 0.1, 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ThresholdExperiment::make(8, 3, 0.5, 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ThresholdExperiment::make(8, 3, -0.1, 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ThresholdExperiment::make(8, 3, 0.1, -1.0),
                    std::invalid_argument);

  auto flat = ThresholdExperiment::make(64, 20, 0.2, 0.0);
  for (std::size_t x = 0; x < 64; ++x) REQUIRE(flat.eta(x) == 0.2);
  REQUIRE_THAT(flat.l_star(), WithinAbs(0.2, 1e-12));

  auto graded = ThresholdExperiment::make(64, 20, 0.2, 2.0);
  REQUIRE(graded.eta(20) == 0.5);  // no margin at the boundary
  REQUIRE_THAT(graded.eta(52), WithinAbs(0.2, 1e-15));  // far field, u clamps
  for (std::size_t x = 1; x < 64; ++x) {
    REQUIRE(graded.eta(x) >= 0.2 - 1e-15);
    REQUIRE(graded.eta(x) <= 0.5 + 1e-15);
  }
}

TEST_CASE("threshold risks match brute force and the distribution form",
          "[synthetic][oracle]") {
  for (double rho : {0.0, 1.5}) {
    auto exp = ThresholdExperiment::make(32, 9, 0.15, rho);
    FiniteClass cls = threshold_class(32);
    DiscreteDistribution dist = exp.to_distribution();
    REQUIRE(dist.support_size() == 64);
    for (std::size_t row = 0; row < cls.size(); ++row) {
      // Brute-force population risk over the grid.
      double brute = 0.0;
      for (std::size_t x = 0; x < 32; ++x) {
        bool agrees = cls.table[row][x] == exp.fstar(x);
        brute += (agrees ? exp.eta(x) : 1.0 - exp.eta(x)) / 32.0;
      }
      REQUIRE_THAT(exp.risk_row(row), WithinAbs(brute, 1e-12));
      Predictor h = Predictor::from_hypothesis({&cls, row});
      REQUIRE_THAT(exact_risk(h, dist), WithinAbs(brute, 1e-12));
    }
    REQUIRE_THAT(exp.risk_one_sided(exp.t_star), WithinAbs(exp.l_star(), 1e-15));
  }
}

TEST_CASE("t_star selection stays in the middle half", "[synthetic]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::size_t t = choose_t_star(1024, seed);
    REQUIRE(t >= 256);
    REQUIRE(t < 768);
  }
  REQUIRE(choose_t_star(1024, 7) == choose_t_star(1024, 7));
}

TEST_CASE("threshold sampler consistency", "[synthetic][statistical]") {
  auto exp = ThresholdExperiment::make(256, 100, 0.1, 2.0);
  std::size_t n = 2000;
  int k = 8;
  auto s = sample_threshold(exp, n, k, 2025);
  REQUIRE(s.xs.size() == n * 8);
  auto s2 = sample_threshold(exp, n, k, 2025);
  REQUIRE(s.xs == s2.xs);
  REQUIRE(s.ys == s2.ys);

  for (std::size_t i = 0; i < n; ++i) {
    int c = 0;
    for (int j = 0; j < k; ++j) c += s.ys[i * k + j];
    REQUIRE(c == s.label_counts[i]);
  }
  for (std::uint32_t x : s.xs) REQUIRE(x < 256);

  // Overall flip rate concentrates on l_star = E[eta(x)].
  std::size_t flips = 0;
  for (std::size_t i = 0; i < s.xs.size(); ++i) {
    flips += (s.ys[i] != exp.fstar(s.xs[i]));
  }
  double rate = static_cast<double>(flips) / static_cast<double>(s.xs.size());
  double l = exp.l_star();
  double sigma = std::sqrt(l * (1.0 - l) / static_cast<double>(s.xs.size()));
  REQUIRE_THAT(rate, WithinAbs(l, 4.0 * sigma));

  BagDataset ds = to_bag_dataset(s);
  ds.validate();
  REQUIRE(ds.n() == n);
  REQUIRE(ds.k == k);
  REQUIRE(ds.feature_dim == 1);
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(ds.bags[i].label_count == s.label_counts[i]);
    for (int j = 0; j < k; ++j) {
      REQUIRE(ds.bags[i].instances[j].features[0] ==
              static_cast<double>(s.xs[i * k + j]));
    }
  }
}

TEST_CASE("linearly separable task is separable with the stated margin",
          "[synthetic]") {
  REQUIRE_THROWS_AS(make_linsep_dataset(10, 2, 0.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(make_linsep_dataset(10, 2, 2.0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(make_linsep_dataset(0, 2, 0.5, 1), std::invalid_argument);

  auto ds = make_linsep_dataset(100, 4, 0.4, 11);
  ds.validate();
  REQUIRE(ds.feature_dim == 2);
  REQUIRE(ds.true_labels.has_value());

  // Perceptron through the origin: with margin 0.2 and radius sqrt(2) it must
  // converge within (R / gamma)^2 = 50 mistakes if and only if the data are
  // separable as constructed.
  double w0 = 0.0, w1 = 0.0;
  int mistakes = 0;
  bool clean = false;
  for (int pass = 0; pass < 200 && !clean; ++pass) {
    clean = true;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      for (int j = 0; j < ds.k; ++j) {
        const auto& ft = ds.bags[i].instances[j].features;
        double sgn = (*ds.true_labels)[i][j] ? 1.0 : -1.0;
        if (sgn * (w0 * ft[0] + w1 * ft[1]) <= 0.0) {
          w0 += sgn * ft[0];
          w1 += sgn * ft[1];
          ++mistakes;
          clean = false;
        }
      }
    }
  }
  REQUIRE(clean);
  REQUIRE(mistakes <= 50);

  auto other = make_linsep_dataset(100, 4, 0.4, 12);
  REQUIRE(ds.bags[0].instances[0].features !=
          other.bags[0].instances[0].features);
}
