#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "icsim/errors.hpp"

namespace icsim::sensing {

enum class Decision { Absent, Present };

inline const char* decision_name(Decision d) {
  return d == Decision::Present ? "present" : "absent";
}

/// Shot-noise photon counting: Poisson with mean rate * integration.
inline long long sample_counts(double rate, double integration_s, std::mt19937_64& engine) {
  if (rate < 0.0 || !std::isfinite(rate)) throw ConfigError("sample_counts: rate must be >= 0");
  if (integration_s < 0.0 || !std::isfinite(integration_s))
    throw ConfigError("sample_counts: integration time must be >= 0");
  const double mean = rate * integration_s;
  if (mean == 0.0) return 0;
  std::poisson_distribution<long long> poisson(mean);
  return poisson(engine);
}

/// One detector reading from a Gaussian class law, rounded to whole counts
/// and clamped at zero. Widths broader than sqrt(mean) model excess detector
/// noise on top of the shot-noise floor.
inline long long sample_class_count(double mean, double sigma, std::mt19937_64& engine) {
  if (!(sigma > 0.0)) throw ConfigError("sample_class_count: sigma must be > 0");
  std::normal_distribution<double> normal(mean, sigma);
  const double x = normal(engine);
  return x <= 0.0 ? 0 : static_cast<long long>(std::llround(x));
}

/// Contiguous equal-width count histogram.
struct CountHistogram {
  double bin_width = 20.0;
  double origin = 0.0;  ///< lower edge of the first bin
  std::vector<std::uint64_t> frequencies;

  double lower_edge(std::size_t i) const { return origin + bin_width * static_cast<double>(i); }
  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (auto f : frequencies) sum += f;
    return sum;
  }
};

inline CountHistogram build_histogram(std::span<const double> samples, double bin_width = 20.0) {
  if (!(bin_width > 0.0)) throw ConfigError("histogram: bin width must be > 0");
  if (samples.empty()) throw ConfigError("histogram: need at least one sample");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  CountHistogram hist;
  hist.bin_width = bin_width;
  hist.origin = std::floor(*lo / bin_width) * bin_width;
  const std::size_t bins =
      static_cast<std::size_t>(std::floor((*hi - hist.origin) / bin_width)) + 1;
  hist.frequencies.assign(bins, 0);
  for (double x : samples) {
    auto idx = static_cast<std::size_t>(std::floor((x - hist.origin) / bin_width));
    if (idx >= bins) idx = bins - 1;  // guards the exact upper edge
    ++hist.frequencies[idx];
  }
  return hist;
}

inline void write_histogram_csv(std::ostream& os, const CountHistogram& hist) {
  os << "bin_lower_edge,frequency\n";
  char buf[64];
  for (std::size_t i = 0; i < hist.frequencies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%llu\n", hist.lower_edge(i),
                  static_cast<unsigned long long>(hist.frequencies[i]));
    os << buf;
  }
  if (!os) throw IoError("failed while writing histogram CSV");
}

inline void write_histogram_csv(const std::filesystem::path& path, const CountHistogram& hist) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_histogram_csv(os, hist);
}

/// Two labeled Gaussian class laws; low = object absent, high = object present.
struct GaussianPair {
  double mu_low = 0.0;
  double sigma_low = 1.0;
  double mu_high = 0.0;
  double sigma_high = 1.0;
  double weight_low = 0.5;
  double weight_high = 0.5;

  void validate() const {
    if (!(sigma_low > 0.0) || !(sigma_high > 0.0))
      throw FitError("gaussian pair: class widths must be > 0");
    if (!(mu_low < mu_high))
      throw FitError("gaussian pair: class means must satisfy mu_low < mu_high");
    if (weight_low < 0.0 || weight_high < 0.0 ||
        std::abs(weight_low + weight_high - 1.0) > 1e-9)
      throw FitError("gaussian pair: weights must be probabilities summing to 1");
  }
};

namespace detail {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

inline Moments sample_moments(std::span<const double> samples) {
  Moments m;
  for (double x : samples) m.mean += x;
  m.mean /= static_cast<double>(samples.size());
  double ss = 0.0;
  for (double x : samples) ss += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(samples.size() - 1));
  return m;
}

}  // namespace detail

/// Per-class sample mean/std of labeled acquisitions. The acquisition knows
/// ground truth, so no mixture decomposition is involved.
inline GaussianPair fit_two_gaussians(std::span<const double> present_samples,
                                      std::span<const double> absent_samples) {
  if (present_samples.size() < 30 || absent_samples.size() < 30)
    throw FitError("fit_two_gaussians: need at least 30 samples per class");
  const auto present = detail::sample_moments(present_samples);
  const auto absent = detail::sample_moments(absent_samples);
  if (!(present.stddev > 0.0) || !(absent.stddev > 0.0))
    throw FitError("fit_two_gaussians: degenerate class with zero variance");
  GaussianPair pair;
  pair.mu_low = absent.mean;
  pair.sigma_low = absent.stddev;
  pair.mu_high = present.mean;
  pair.sigma_high = present.stddev;
  const double n = static_cast<double>(present_samples.size() + absent_samples.size());
  pair.weight_low = static_cast<double>(absent_samples.size()) / n;
  pair.weight_high = static_cast<double>(present_samples.size()) / n;
  pair.validate();  // rejects identical or inverted class means
  return pair;
}

/// How many class widths separate the means: k_eff = (mu_high - mu_low) / (sigma_low + sigma_high).
inline double effective_separation(const GaussianPair& pair) {
  pair.validate();
  return (pair.mu_high - pair.mu_low) / (pair.sigma_low + pair.sigma_high);
}

/// The count level sitting the same number of class widths away from both
/// means: (x* - mu_low)/sigma_low = (mu_high - x*)/sigma_high = k_eff.
/// Rejected when the classes are closer than the requested k_sigma.
inline double choose_threshold(const GaussianPair& pair, double k_sigma) {
  if (!(k_sigma > 0.0)) throw ConfigError("choose_threshold: k_sigma must be > 0");
  const double k_eff = effective_separation(pair);
  if (k_eff < k_sigma)
    throw FitError("choose_threshold: classes are only " + std::to_string(k_eff) +
                   " widths apart, below the requested " + std::to_string(k_sigma));
  return (pair.mu_high * pair.sigma_low + pair.mu_low * pair.sigma_high) /
         (pair.sigma_low + pair.sigma_high);
}

namespace detail {
/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
}  // namespace detail

/// Weighted probability of a correct call at the given threshold:
/// absent counts below it plus present counts above it.
inline double confidence(const GaussianPair& pair, double threshold) {
  pair.validate();
  return pair.weight_low * detail::normal_cdf((threshold - pair.mu_low) / pair.sigma_low) +
         pair.weight_high * detail::normal_cdf((pair.mu_high - threshold) / pair.sigma_high);
}

/// Strictly above the threshold reads as present; a tie reads as absent.
inline Decision decide(double count, double threshold) {
  return count > threshold ? Decision::Present : Decision::Absent;
}

}  // namespace icsim::sensing
