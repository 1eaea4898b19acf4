#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "icsim/rng.hpp"
#include "icsim/sensing.hpp"

using namespace icsim;
using sensing::CountHistogram;
using sensing::Decision;
using sensing::GaussianPair;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GaussianPair reference_pair() {
  // Rates 2950 / 3500 with widths 1.42 * sqrt(rate).
  return GaussianPair{2950.0, 77.12574148752154, 3500.0, 84.00833292001454, 0.5, 0.5};
}

}  // namespace

TEST_CASE("photon counting follows the Poisson law", "[sensing]") {
  auto engine = make_engine(3, Stream::SenseTrial, 0);

  CHECK(sensing::sample_counts(0.0, 1.0, engine) == 0);
  CHECK(sensing::sample_counts(3500.0, 0.0, engine) == 0);
  CHECK_THROWS_AS(sensing::sample_counts(-1.0, 1.0, engine), ConfigError);
  CHECK_THROWS_AS(sensing::sample_counts(10.0, -1.0, engine), ConfigError);

  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(sensing::sample_counts(3500.0, 1.0, engine));
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = (sum_sq - n * mean * mean) / (n - 1);
  // 3 sigma of the sample mean is ~0.56 counts at this size.
  CHECK_THAT(mean, WithinAbs(3500.0, 3.0 * std::sqrt(3500.0 / n)));
  CHECK(var / mean > 0.97);
  CHECK(var / mean < 1.03);
}

TEST_CASE("class counts are rounded and clamped at zero", "[sensing]") {
  auto engine = make_engine(4, Stream::SenseTrial, 0);
  CHECK_THROWS_AS(sensing::sample_class_count(100.0, 0.0, engine), ConfigError);

  for (int i = 0; i < 200; ++i) CHECK(sensing::sample_class_count(-50.0, 1.0, engine) == 0);
  for (int i = 0; i < 200; ++i) CHECK(sensing::sample_class_count(100.4, 1e-9, engine) == 100);
  for (int i = 0; i < 200; ++i) CHECK(sensing::sample_class_count(99.6, 1e-9, engine) == 100);
}

TEST_CASE("histogram bins, edges, and totals", "[sensing]") {
  const std::vector<double> samples = {0.0, 19.99, 20.0, 45.0, 59.9};
  const CountHistogram hist = sensing::build_histogram(samples, 20.0);
  CHECK(hist.origin == 0.0);
  REQUIRE(hist.frequencies.size() == 3u);
  CHECK(hist.frequencies[0] == 2u);
  CHECK(hist.frequencies[1] == 1u);
  CHECK(hist.frequencies[2] == 2u);
  CHECK(hist.lower_edge(1) == 20.0);
  CHECK(hist.total() == 5u);

  const std::vector<double> negatives = {-5.0, 5.0};
  const CountHistogram shifted = sensing::build_histogram(negatives, 20.0);
  CHECK(shifted.origin == -20.0);
  REQUIRE(shifted.frequencies.size() == 2u);
  CHECK(shifted.frequencies[0] == 1u);
  CHECK(shifted.frequencies[1] == 1u);

  CHECK_THROWS_AS(sensing::build_histogram(samples, 0.0), ConfigError);
  CHECK_THROWS_AS(sensing::build_histogram(std::vector<double>{}, 20.0), ConfigError);
}

TEST_CASE("histogram CSV layout", "[sensing]") {
  const std::vector<double> samples = {0.0, 25.0, 25.0};
  const CountHistogram hist = sensing::build_histogram(samples, 20.0);
  std::stringstream buffer;
  sensing::write_histogram_csv(buffer, hist);
  std::string line;
  REQUIRE(std::getline(buffer, line));
  CHECK(line == "bin_lower_edge,frequency");
  REQUIRE(std::getline(buffer, line));
  CHECK(line == "0,1");
  REQUIRE(std::getline(buffer, line));
  CHECK(line == "20,2");
}

TEST_CASE("class fit recovers Gaussian parameters", "[sensing]") {
  auto engine = make_engine(8, Stream::SenseTrial, 0);
  std::normal_distribution<double> high(3500.0, 84.0), low(2950.0, 77.0);
  std::vector<double> present, absent;
  for (int i = 0; i < 10000; ++i) present.push_back(high(engine));
  for (int i = 0; i < 10000; ++i) absent.push_back(low(engine));

  const GaussianPair pair = sensing::fit_two_gaussians(present, absent);
  CHECK_THAT(pair.mu_high, WithinRel(3500.0, 0.01));
  CHECK_THAT(pair.mu_low, WithinRel(2950.0, 0.01));
  CHECK_THAT(pair.sigma_high, WithinRel(84.0, 0.03));
  CHECK_THAT(pair.sigma_low, WithinRel(77.0, 0.03));
  CHECK_THAT(pair.weight_low, WithinAbs(0.5, 1e-12));
  CHECK_THAT(pair.weight_high, WithinAbs(0.5, 1e-12));
}

TEST_CASE("class fit widths track shot noise for Poisson counts", "[sensing]") {
  auto engine = make_engine(9, Stream::SenseTrial, 0);
  std::poisson_distribution<long long> high(3500.0), low(2950.0);
  std::vector<double> present, absent;
  for (int i = 0; i < 5000; ++i) present.push_back(static_cast<double>(high(engine)));
  for (int i = 0; i < 5000; ++i) absent.push_back(static_cast<double>(low(engine)));

  const GaussianPair pair = sensing::fit_two_gaussians(present, absent);
  CHECK_THAT(pair.sigma_high, WithinRel(std::sqrt(3500.0), 0.10));
  CHECK_THAT(pair.sigma_low, WithinRel(std::sqrt(2950.0), 0.10));
}

TEST_CASE("class fit weights follow the sample counts", "[sensing]") {
  auto engine = make_engine(10, Stream::SenseTrial, 0);
  std::normal_distribution<double> high(200.0, 5.0), low(100.0, 5.0);
  std::vector<double> present, absent;
  for (int i = 0; i < 600; ++i) present.push_back(high(engine));
  for (int i = 0; i < 400; ++i) absent.push_back(low(engine));
  const GaussianPair pair = sensing::fit_two_gaussians(present, absent);
  CHECK_THAT(pair.weight_high, WithinAbs(0.6, 1e-12));
  CHECK_THAT(pair.weight_low, WithinAbs(0.4, 1e-12));
}

TEST_CASE("class fit rejects degenerate input", "[sensing]") {
  std::vector<double> same(100, 1234.0);
  CHECK_THROWS_AS(sensing::fit_two_gaussians(same, same), FitError);

  std::vector<double> few(10, 1.0), many(100, 2.0);
  CHECK_THROWS_AS(sensing::fit_two_gaussians(few, many), FitError);

  // Inverted labels: the present class must sit above the absent class.
  auto engine = make_engine(11, Stream::SenseTrial, 0);
  std::normal_distribution<double> high(200.0, 5.0), low(100.0, 5.0);
  std::vector<double> present, absent;
  for (int i = 0; i < 100; ++i) present.push_back(low(engine));
  for (int i = 0; i < 100; ++i) absent.push_back(high(engine));
  CHECK_THROWS_AS(sensing::fit_two_gaussians(present, absent), FitError);
}

TEST_CASE("threshold sits k_eff class widths from both means", "[sensing]") {
  const GaussianPair unit{0.0, 1.0, 10.0, 1.0, 0.5, 0.5};
  CHECK_THAT(sensing::effective_separation(unit), WithinAbs(5.0, 1e-15));
  CHECK_THAT(sensing::choose_threshold(unit, 3.0), WithinAbs(5.0, 1e-15));

  // Equal widths put the threshold at the midpoint.
  const GaussianPair equal{2950.0, 60.0, 3500.0, 60.0, 0.5, 0.5};
  CHECK_THAT(sensing::choose_threshold(equal, 3.0), WithinAbs(3225.0, 1e-12));

  // Unequal widths pull it toward the narrow class.
  const GaussianPair skew{0.0, 1.0, 8.0, 3.0, 0.5, 0.5};
  CHECK_THAT(sensing::effective_separation(skew), WithinAbs(2.0, 1e-15));
  CHECK_THAT(sensing::choose_threshold(skew, 2.0), WithinAbs(2.0, 1e-15));
  CHECK_THROWS_AS(sensing::choose_threshold(skew, 2.1), FitError);

  CHECK_THROWS_AS(sensing::choose_threshold(unit, 0.0), ConfigError);
  CHECK_THROWS_AS(sensing::choose_threshold(unit, -3.0), ConfigError);
}

TEST_CASE("reference class laws clear the 3.4 sigma bar", "[sensing]") {
  const GaussianPair pair = reference_pair();
  CHECK_THAT(sensing::effective_separation(pair), WithinAbs(3.4133066021092127, 1e-12));
  const double threshold = sensing::choose_threshold(pair, 3.4);
  CHECK_THAT(threshold, WithinAbs(3213.253802611926, 1e-9));
  CHECK_THAT(sensing::confidence(pair, threshold), WithinAbs(0.999679101535437, 1e-12));
}

TEST_CASE("confidence evaluates the weighted correct-call probability", "[sensing]") {
  // Both classes k widths away: confidence equals Phi(k).
  const GaussianPair sym{0.0, 1.0, 6.8, 1.0, 0.5, 0.5};
  CHECK_THAT(sensing::confidence(sym, 3.4), WithinAbs(0.9996630707343231, 1e-12));

  const GaussianPair wide{0.0, 1.0, 10.0, 1.0, 0.5, 0.5};
  CHECK(sensing::confidence(wide, 5.0) > 0.999999);
  // A threshold at the low mean forfeits half of the absent calls.
  CHECK_THAT(sensing::confidence(wide, 0.0), WithinAbs(0.75, 1e-12));

  const GaussianPair split{0.0, 1.0, 1000.0, 1.0, 0.5, 0.5};
  CHECK_THAT(sensing::confidence(split, 500.0), WithinAbs(1.0, 1e-15));
}

TEST_CASE("threshold and separation are affine invariant", "[sensing]") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    GaussianPair pair;
    pair.mu_low = 100.0 * uni(rng);
    pair.mu_high = pair.mu_low + 100.0 * uni(rng);
    pair.sigma_low = uni(rng);
    pair.sigma_high = uni(rng);

    const double alpha = uni(rng), beta = 50.0 * uni(rng);
    GaussianPair scaled = pair;
    scaled.mu_low = alpha * pair.mu_low + beta;
    scaled.mu_high = alpha * pair.mu_high + beta;
    scaled.sigma_low = alpha * pair.sigma_low;
    scaled.sigma_high = alpha * pair.sigma_high;

    CHECK_THAT(sensing::effective_separation(scaled),
               WithinRel(sensing::effective_separation(pair), 1e-12));
    const double k = 0.5 * sensing::effective_separation(pair);
    CHECK_THAT(sensing::choose_threshold(scaled, k),
               WithinRel(alpha * sensing::choose_threshold(pair, k) + beta, 1e-12));
  }
}

TEST_CASE("decision rule and tie break", "[sensing]") {
  const double threshold = 3213.253802611926;
  CHECK(sensing::decide(3500.0, threshold) == Decision::Present);
  CHECK(sensing::decide(2950.0, threshold) == Decision::Absent);
  CHECK(sensing::decide(threshold, threshold) == Decision::Absent);
  CHECK(std::string(sensing::decision_name(Decision::Present)) == "present");
  CHECK(std::string(sensing::decision_name(Decision::Absent)) == "absent");
}
