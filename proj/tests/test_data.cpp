#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "llp/data.hpp"
#include "llp/distribution.hpp"
#include "llp/io.hpp"
#include "llp/synthetic.hpp"

using namespace llp;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<Instance> points(std::initializer_list<double> vals) {
  std::vector<Instance> out;
  for (double v : vals) out.push_back(Instance{{v}});
  return out;
}

}  // namespace

TEST_CASE("make_bags chunks in order and counts labels", "[data]") {
  auto ds = make_bags(points({0, 1, 2, 3}), {1, 1, 0, 0}, 2, std::nullopt);
  REQUIRE(ds.n() == 2);
  REQUIRE(ds.k == 2);
  REQUIRE(ds.bags[0].label_count == 2);
  REQUIRE(ds.bags[1].label_count == 0);
  REQUIRE(ds.bags[0].instances[0].features[0] == 0.0);
  REQUIRE(ds.true_labels.has_value());
}

TEST_CASE("make_bags rejects counts not divisible by k", "[data]") {
  REQUIRE_THROWS_AS(make_bags(points({0, 1, 2}), {1, 0, 1}, 2, std::nullopt),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(make_bags(points({0}), {1, 0}, 1, std::nullopt),
                    std::invalid_argument);
}

TEST_CASE("seeded make_bags is a permutation and is reproducible", "[data]") {
  std::vector<Instance> xs = points({0, 1, 2, 3, 4, 5, 6, 7});
  std::vector<std::uint8_t> ys = {1, 0, 1, 0, 1, 0, 1, 0};
  auto a = make_bags(xs, ys, 2, 11);
  auto b = make_bags(xs, ys, 2, 11);
  int total = 0;
  for (std::size_t i = 0; i < a.n(); ++i) {
    REQUIRE(a.bags[i].label_count == b.bags[i].label_count);
    for (int j = 0; j < a.k; ++j) {
      REQUIRE(a.bags[i].instances[j].features ==
              b.bags[i].instances[j].features);
    }
    total += a.bags[i].label_count;
  }
  REQUIRE(total == 4);
  // Every instance value shows up exactly once.
  std::vector<int> seen(8, 0);
  for (const Bag& bag : a.bags) {
    for (const Instance& x : bag.instances) {
      seen[static_cast<int>(x.features[0])]++;
    }
  }
  for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("sample_dataset is bit-deterministic given the seed", "[data]") {
  auto inst = prop32_instance();
  auto a = sample_dataset(inst.dist, 6, 10, 7);
  auto b = sample_dataset(inst.dist, 6, 10, 7);
  REQUIRE(a.n() == 6);
  for (std::size_t i = 0; i < a.n(); ++i) {
    REQUIRE(a.bags[i].label_count == b.bags[i].label_count);
    for (int j = 0; j < a.k; ++j) {
      REQUIRE(a.bags[i].instances[j].features ==
              b.bags[i].instances[j].features);
    }
  }
}

TEST_CASE("sample_dataset label counts recount from true labels", "[data]") {
  auto inst = prop32_instance();
  auto ds = sample_dataset(inst.dist, 6, 10, 7);
  REQUIRE(ds.true_labels.has_value());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    int c = 0;
    for (auto y : (*ds.true_labels)[i]) c += y;
    REQUIRE(c == ds.bags[i].label_count);
  }
}

TEST_CASE("empirical label marginal converges to dist.p", "[data][statistical]") {
  auto inst = prop32_instance();
  double p = inst.dist.p();
  REQUIRE_THAT(p, WithinAbs(2.0 / 3.0, 1e-15));
  auto ds = sample_dataset(inst.dist, 100000, 10, 20240506);
  double sigma = std::sqrt(p * (1.0 - p) / 1e6);
  REQUIRE(std::abs(ds.p_hat() - p) <= 3.0 * sigma);
}

TEST_CASE("half-and-half bags hit count 1 with binomial frequency", "[data][statistical]") {
  auto inst = prop41_instance();
  auto ds = sample_dataset(inst.dist, 100000, 2, 99);
  std::size_t ones = 0;
  for (const Bag& b : ds.bags) ones += (b.label_count == 1);
  double freq = static_cast<double>(ones) / 1e5;
  REQUIRE(std::abs(freq - 0.5) <= 3.0 * std::sqrt(0.25 / 1e5));
}

TEST_CASE("DiscreteDistribution validation", "[data]") {
  DiscreteDistribution d;
  d.xs = {Instance{{0.0}}};
  d.ys = {1};
  d.probs = {0.5};
  REQUIRE_THROWS_AS(d.validate(), std::invalid_argument);  // sums to 0.5
  d.probs = {1.0};
  REQUIRE_NOTHROW(d.validate());
  d.ys = {2};
  REQUIRE_THROWS_AS(d.validate(), std::invalid_argument);
}

TEST_CASE("constructed distributions sum to exactly one", "[data]") {
  REQUIRE(prop32_instance().dist.probs.size() == 3);
  double s1 = 0.0;
  for (double p : prop32_instance().dist.probs) s1 += p;
  REQUIRE(s1 == 1.0);
  double s2 = 0.0;
  for (double p : prop41_instance().dist.probs) s2 += p;
  REQUIRE(s2 == 1.0);
  double s3 = 0.0;
  for (double p : eprm_expfail_instance(0.01).dist.probs) s3 += p;
  REQUIRE(s3 == 1.0);
}

TEST_CASE("BagDataset validation catches inconsistencies", "[data]") {
  auto ds = make_bags(points({0, 1}), {1, 0}, 1, std::nullopt);
  ds.bags[0].label_count = 2;
  REQUIRE_THROWS_AS(ds.validate(), std::invalid_argument);
  ds.bags[0].label_count = 1;
  (*ds.true_labels)[1] = {1};  // disagrees with label_count 0
  REQUIRE_THROWS_AS(ds.validate(), std::invalid_argument);
}

TEST_CASE("JSONL round trip is byte identical", "[data][io]") {
  auto inst = prop32_instance();
  auto ds = sample_dataset(inst.dist, 5, 4, 3);
  std::ostringstream first;
  save_bags(ds, first);
  std::istringstream in(first.str());
  auto loaded = load_bags(in);
  std::ostringstream second;
  save_bags(loaded, second);
  REQUIRE(first.str() == second.str());
  REQUIRE(loaded.k == ds.k);
  REQUIRE(loaded.n() == ds.n());
}

TEST_CASE("JSONL loader reports the offending line", "[data][io]") {
  std::istringstream bad(
      "{\"k\": 2, \"alpha_count\": 1, \"instances\": [[0.0], [1.0]]}\n"
      "{not json}\n");
  try {
    load_bags(bad);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    REQUIRE(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream out_of_range(
      "{\"k\": 2, \"alpha_count\": 3, \"instances\": [[0.0], [1.0]]}\n");
  REQUIRE_THROWS_AS(load_bags(out_of_range), std::runtime_error);
  std::istringstream wrong_len(
      "{\"k\": 2, \"alpha_count\": 1, \"instances\": [[0.0]]}\n");
  REQUIRE_THROWS_AS(load_bags(wrong_len), std::runtime_error);
}

TEST_CASE("csv loader bags rows in file order without a seed", "[data][io]") {
  std::string path = "llp_test_two_rows.csv";
  {
    std::ofstream out(path);
    out << "x,y\n0,0\n1,1\n";
  }
  auto ds = load_csv(path, "y", 1, std::nullopt);
  REQUIRE(ds.n() == 2);
  REQUIRE(ds.bags[0].label_count == 0);
  REQUIRE(ds.bags[1].label_count == 1);
  REQUIRE(ds.feature_dim == 1);
  std::remove(path.c_str());
}

TEST_CASE("csv loader errors name the row and column", "[data][io]") {
  std::string path = "llp_test_bad.csv";
  {
    std::ofstream out(path);
    out << "a,b,label\n1.0,2.0,1\n1.0,oops,0\n";
  }
  try {
    load_csv(path, "label", 1, std::nullopt);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    REQUIRE(msg.find("row 3") != std::string::npos);
    REQUIRE(msg.find("'b'") != std::string::npos);
  }
  REQUIRE_THROWS_AS(load_csv(path, "nope", 1, std::nullopt), std::runtime_error);
  {
    std::ofstream out(path);
    out << "a,label\n1.0,0.5\n";
  }
  REQUIRE_THROWS_AS(load_csv(path, "label", 1, std::nullopt), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("csv loader shuffle keeps the label multiset", "[data][io]") {
  std::string path = "llp_test_shuffle.csv";
  {
    std::ofstream out(path);
    out << "x,y\n";
    for (int i = 0; i < 12; ++i) out << i << "," << (i % 3 == 0 ? 1 : 0) << "\n";
  }
  auto ds = load_csv(path, "y", 3, 17);
  int total = 0;
  for (const Bag& b : ds.bags) total += b.label_count;
  REQUIRE(total == 4);
  REQUIRE(ds.n() == 4);
  std::remove(path.c_str());
}
