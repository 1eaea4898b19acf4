#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icsim/core.hpp"
#include "icsim/errors.hpp"
#include "icsim/grid.hpp"
#include "icsim/optics.hpp"
#include "icsim/parallel.hpp"
#include "icsim/pgm.hpp"
#include "icsim/rng.hpp"
#include "icsim/scene.hpp"
#include "icsim/sensing.hpp"
#include "icsim/spi.hpp"

namespace icsim::experiment {

enum class RunMode { Iccd, Spi, Sense, Curves, PhaseSim, Resolution };

inline RunMode parse_mode(std::string_view name) {
  if (name == "iccd") return RunMode::Iccd;
  if (name == "spi") return RunMode::Spi;
  if (name == "sense") return RunMode::Sense;
  if (name == "curves") return RunMode::Curves;
  if (name == "phase-sim") return RunMode::PhaseSim;
  if (name == "resolution") return RunMode::Resolution;
  throw ConfigError("unknown run mode '" + std::string(name) + "'");
}

inline const char* mode_name(RunMode m) {
  switch (m) {
    case RunMode::Iccd: return "iccd";
    case RunMode::Spi: return "spi";
    case RunMode::Sense: return "sense";
    case RunMode::Curves: return "curves";
    case RunMode::PhaseSim: return "phase-sim";
    case RunMode::Resolution: return "resolution";
  }
  return "?";
}

struct SpiParams {
  int scale_k = 6;                 ///< masks are 2^k x 2^k
  int mask_count = -1;             ///< acquired prefix length; -1 = full set
  spi::MaskOrdering ordering = spi::MaskOrdering::Sequency;
};

struct SenseParams {
  double present_rate = 3500.0;  ///< counts/s at the fringe maximum, object in place
  double absent_rate = 2950.0;   ///< counts/s averaged over the signal phase, no object
  double width_factor = 1.42;    ///< class sigma = width_factor * sqrt(mean counts)
  double sigma_present = 0.0;    ///< explicit width override when > 0
  double sigma_absent = 0.0;     ///< explicit width override when > 0
  double k_sigma = 3.4;          ///< minimum class separation demanded of the threshold
  long long trials = 100000;     ///< per class
};

struct CurveParams {
  double pair_rate = 1000.0;  ///< counts/s entering each scanned curve
  int theta_points = 24;
};

struct RunConfig {
  RunMode mode = RunMode::Iccd;
  core::InterferometerModel model = core::ideal_model();
  optics::ImagingGeometry geometry{};
  scene::ObjectMap object;
  scene::EmissionMap emission;
  std::string object_desc;  ///< human-readable object spec, echoed into summaries
  double integration_time_s = 1.0;
  std::uint64_t seed = 1;
  bool noiseless = false;
  bool apply_blur = false;  ///< fold the imaging-arm blur into ICCD rate maps
  int workers = 0;          ///< 0 = hardware default
  SpiParams spi{};
  SenseParams sense{};
  CurveParams curves{};

  int worker_count() const { return workers > 0 ? workers : default_worker_count(); }
};

namespace detail {

/// Expected per-pixel signal counts for one phase setting.
inline Grid<double> setting_counts(const RunConfig& config, const core::PhaseSettings& phases) {
  const auto& model = config.model;
  const double v = model.vis_factor(core::Channel::Signal);
  Grid<double> counts(config.object.width(), config.object.height(), 0.0);
  for (int y = 0; y < counts.height(); ++y)
    for (int x = 0; x < counts.width(); ++x) {
      const core::Complex r =
          core::idler_return_amplitude(model.ifm, phases.phi, config.object.pixels(x, y));
      counts(x, y) = core::signal_rate(config.emission.rates(x, y), phases.theta, r, v,
                                       model.background_rate) *
                     config.integration_time_s;
    }
  return counts;
}

/// Per-pixel Poisson sampling with one derived RNG stream per pixel, so the
/// result is identical for any worker count. frame_tag keeps distinct frames
/// on distinct streams.
inline void sample_frame(Grid<double>& counts, std::uint64_t seed, std::uint64_t frame_tag,
                         int workers) {
  const std::size_t n = counts.size();
  parallel_for(n, workers, [&](std::size_t i) {
    const double mean = counts[i];
    if (mean <= 0.0) {
      counts[i] = 0.0;
      return;
    }
    auto engine = make_engine(seed, Stream::PixelNoise, frame_tag * n + i);
    std::poisson_distribution<long long> poisson(mean);
    counts[i] = static_cast<double>(poisson(engine));
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Array-detector (camera) imaging: two settings and their difference.
// ---------------------------------------------------------------------------

struct IccdResult {
  Grid<double> frame_bright;  ///< theta = 0,  phi = pi
  Grid<double> frame_dark;    ///< theta = pi, phi = 0
  Grid<double> difference;    ///< bright - dark
  double blur_sigma_um = 0.0;
};

/// Records the two camera settings whose difference isolates the transparent
/// regions, optionally folding in the imaging blur and shot noise.
inline IccdResult run_iccd(const RunConfig& config) {
  config.model.validate();
  config.object.validate();
  config.emission.validate();
  if (!config.object.pixels.same_shape(config.emission.rates))
    throw ConfigError("object and emission maps must share dimensions");
  if (config.integration_time_s < 0.0)
    throw ConfigError("integration time must be >= 0");

  constexpr double pi = std::numbers::pi;
  IccdResult result;
  result.frame_bright = detail::setting_counts(config, {0.0, pi});
  result.frame_dark = detail::setting_counts(config, {pi, 0.0});

  if (config.apply_blur) {
    result.blur_sigma_um = optics::edge_sigma_um(config.geometry);
    result.frame_bright =
        optics::blur(result.frame_bright, result.blur_sigma_um, config.object.pixel_pitch_um);
    result.frame_dark =
        optics::blur(result.frame_dark, result.blur_sigma_um, config.object.pixel_pitch_um);
  }

  if (!config.noiseless) {
    detail::sample_frame(result.frame_bright, config.seed, 0, config.worker_count());
    detail::sample_frame(result.frame_dark, config.seed, 1, config.worker_count());
  }

  result.difference = Grid<double>(result.frame_bright.width(), result.frame_bright.height());
  for (std::size_t i = 0; i < result.difference.size(); ++i)
    result.difference[i] = result.frame_bright[i] - result.frame_dark[i];
  return result;
}

// ---------------------------------------------------------------------------
// Single-pixel imaging: masked acquisition and reconstruction.
// ---------------------------------------------------------------------------

struct SpiResult {
  spi::MaskSet masks;
  spi::HadamardSpectrum spectrum;
  Grid<double> reconstruction;  ///< mask-resolution image
  Grid<double> ground_truth;    ///< noiseless four-setting counts at mask resolution
  int mask_count = 0;
};

/// Acquires a prefix of the mask set with the four-setting combination per
/// mask and reconstructs the weighted mask sum.
inline SpiResult run_spi(const RunConfig& config) {
  SpiResult result;
  result.masks = spi::hadamard_masks(config.spi.scale_k, config.spi.ordering);
  result.mask_count =
      config.spi.mask_count < 0 ? result.masks.count : config.spi.mask_count;

  spi::AcquireOptions options;
  options.integration_time_s = config.integration_time_s;
  options.run_seed = config.seed;
  options.noisy = !config.noiseless;
  options.workers = config.worker_count();
  result.spectrum = spi::acquire_spectrum(config.model, config.object, config.emission,
                                          result.masks, result.mask_count, options);
  result.reconstruction = spi::reconstruct(result.masks, result.spectrum);

  // Block-sum the noiseless per-pixel combination onto the mask grid.
  const Grid<double> combo =
      spi::expected_combination_map(config.model, config.object, config.emission);
  const int f = config.object.width() / result.masks.side;
  result.ground_truth = Grid<double>(result.masks.side, result.masks.side, 0.0);
  for (int y = 0; y < combo.height(); ++y)
    for (int x = 0; x < combo.width(); ++x)
      result.ground_truth(x / f, y / f) += combo(x, y) * config.integration_time_s;
  return result;
}

/// Pearson correlation between two equally shaped maps; the usual fidelity
/// score for subsampled reconstructions.
inline double pearson_correlation(const Grid<double>& a, const Grid<double>& b) {
  if (!a.same_shape(b)) throw ConfigError("pearson_correlation: shapes differ");
  const std::size_t n = a.size();
  if (n < 2) throw ConfigError("pearson_correlation: need at least two pixels");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw ConfigError("pearson_correlation: constant map has no correlation");
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Interaction-free sensing: two labeled count populations, fit, threshold.
// ---------------------------------------------------------------------------

struct SenseResult {
  std::vector<double> absent_samples;
  std::vector<double> present_samples;
  sensing::CountHistogram hist_absent;
  sensing::CountHistogram hist_present;
  sensing::GaussianPair fit;
  double threshold = 0.0;
  double confidence = 0.0;       ///< analytic, from the fitted pair
  double expected_error = 0.0;   ///< 1 - confidence
  double empirical_error = 0.0;  ///< misclassified fraction of the trials
  long long trials_per_class = 0;
};

/// Simulates labeled detector readings for both classes (present trials at
/// the fringe maximum, absent trials at the phase-averaged level), fits the
/// class laws, picks the balanced threshold, and scores it.
inline SenseResult run_sense(const RunConfig& config) {
  const SenseParams& p = config.sense;
  if (p.trials < 100) throw ConfigError("run_sense: need at least 100 trials per class");
  if (!(p.present_rate >= 0.0) || !(p.absent_rate >= 0.0))
    throw ConfigError("run_sense: class rates must be >= 0");
  if (config.integration_time_s <= 0.0)
    throw ConfigError("run_sense: integration time must be > 0");
  if (!(p.width_factor > 0.0)) throw ConfigError("run_sense: width factor must be > 0");

  const double mean_absent = p.absent_rate * config.integration_time_s;
  const double mean_present = p.present_rate * config.integration_time_s;
  const double sigma_absent =
      p.sigma_absent > 0.0 ? p.sigma_absent : p.width_factor * std::sqrt(mean_absent);
  const double sigma_present =
      p.sigma_present > 0.0 ? p.sigma_present : p.width_factor * std::sqrt(mean_present);

  SenseResult result;
  result.trials_per_class = p.trials;
  const auto n = static_cast<std::size_t>(p.trials);
  result.absent_samples.assign(n, 0.0);
  result.present_samples.assign(n, 0.0);

  const int workers = config.worker_count();
  parallel_for(2 * n, workers, [&](std::size_t i) {
    auto engine = make_engine(config.seed, Stream::SenseTrial, i);
    if (i < n)
      result.absent_samples[i] = static_cast<double>(
          sensing::sample_class_count(mean_absent, sigma_absent, engine));
    else
      result.present_samples[i - n] = static_cast<double>(
          sensing::sample_class_count(mean_present, sigma_present, engine));
  });

  result.hist_absent = sensing::build_histogram(result.absent_samples);
  result.hist_present = sensing::build_histogram(result.present_samples);
  result.fit = sensing::fit_two_gaussians(result.present_samples, result.absent_samples);
  result.threshold = sensing::choose_threshold(result.fit, p.k_sigma);
  result.confidence = sensing::confidence(result.fit, result.threshold);
  result.expected_error = 1.0 - result.confidence;

  std::size_t errors = 0;
  for (double x : result.absent_samples)
    if (sensing::decide(x, result.threshold) == sensing::Decision::Present) ++errors;
  for (double x : result.present_samples)
    if (sensing::decide(x, result.threshold) == sensing::Decision::Absent) ++errors;
  result.empirical_error = static_cast<double>(errors) / static_cast<double>(2 * n);
  return result;
}

// ---------------------------------------------------------------------------
// Interference curves: phase scans for each detection channel.
// ---------------------------------------------------------------------------

struct CurveRow {
  core::Channel channel = core::Channel::Signal;
  std::string scenario;  ///< "absent" or "present"
  double phi = 0.0;
  std::vector<double> rates;
  double visibility = 0.0;
};

struct CurveTable {
  std::vector<double> thetas;
  std::vector<CurveRow> rows;
};

/// Scans the signal phase for every channel in four scenarios: the empty
/// interferometer at phi = pi (full fringes) and phi = 0 (flat), and the
/// blocked one at both settings (residual fringe riding on the reflected arm).
inline CurveTable run_curves(const RunConfig& config, std::span<const double> thetas,
                             std::span<const core::Channel> channels) {
  config.model.validate();
  if (thetas.empty()) throw ConfigError("run_curves: empty theta grid");
  if (channels.empty()) throw ConfigError("run_curves: no channels requested");

  constexpr double pi = std::numbers::pi;
  struct Scenario {
    const char* label;
    core::PixelTransmission pixel;
    double phi;
  };
  const std::array<Scenario, 4> scenarios = {
      Scenario{"absent", core::clear_pixel, pi},
      Scenario{"absent", core::clear_pixel, 0.0},
      Scenario{"present", core::opaque_pixel, pi},
      Scenario{"present", core::opaque_pixel, 0.0},
  };

  CurveTable table;
  table.thetas.assign(thetas.begin(), thetas.end());
  for (core::Channel channel : channels)
    for (const auto& sc : scenarios) {
      CurveRow row;
      row.channel = channel;
      row.scenario = sc.label;
      row.phi = sc.phi;
      row.rates = core::interference_curve(config.model, config.curves.pair_rate, sc.phi,
                                           sc.pixel, thetas, channel);
      row.visibility = core::visibility(row.rates);
      table.rows.push_back(std::move(row));
    }
  return table;
}

inline CurveTable run_curves(const RunConfig& config) {
  const std::vector<double> thetas = core::theta_grid(config.curves.theta_points);
  const std::array<core::Channel, 3> channels = {
      core::Channel::Signal, core::Channel::Idler, core::Channel::Coincidence};
  return run_curves(config, thetas, channels);
}

// ---------------------------------------------------------------------------
// Phase imaging without the sensing module in the probe arm.
// ---------------------------------------------------------------------------

struct PhaseRegionSpec {
  scene::Glyph glyph = scene::Glyph::N;
  double amplitude = 1.0;  ///< transmission amplitude T of the region
  double phase = 0.0;      ///< phase delay delta of the region
};

struct PhaseImagingConfig {
  double mean_counts = 50.0;  ///< per-pixel counts when coherence is inhibited
  int width = 512;
  int height = 512;
  std::vector<PhaseRegionSpec> regions = {
      {scene::Glyph::N, 1.0, 0.0},
      {scene::Glyph::J, 1.0, std::numbers::pi / 8},
      {scene::Glyph::U, 1.0, std::numbers::pi / 4},
  };
  bool noiseless = true;
  std::uint64_t seed = 1;
  int workers = 0;
};

struct PhaseSimResult {
  scene::ObjectMap plate;      ///< complex transmission layout used
  Grid<double> image_theta_0;  ///< counts at theta = 0
  Grid<double> image_theta_pi;
  Grid<double> difference;  ///< per pixel 4<N> T^2 cos(2 delta) when noiseless
};

/// Transmission-phase imaging with the probe arm sent straight to the object:
/// per pixel I(theta) = 2<N> [1 + T^2 cos(theta + 2 delta)].
inline PhaseSimResult run_phase_sim(const PhaseImagingConfig& config) {
  if (config.mean_counts < 0.0) throw ConfigError("phase-sim: mean counts must be >= 0");
  if (config.regions.empty()) throw ConfigError("phase-sim: need at least one glyph region");

  std::vector<scene::GlyphRegion> regions;
  regions.reserve(config.regions.size());
  for (const auto& r : config.regions)
    regions.push_back({r.glyph, core::PixelTransmission{r.amplitude, r.phase}});

  PhaseSimResult result;
  result.plate = scene::make_text_plate(regions, config.width, config.height);

  const auto frame = [&](double theta) {
    Grid<double> img(config.width, config.height, 0.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const auto& px = result.plate.pixels[i];
      const double t2 = px.amplitude * px.amplitude;
      img[i] = 2.0 * config.mean_counts * (1.0 + t2 * std::cos(theta + 2.0 * px.phase));
    }
    return img;
  };

  result.image_theta_0 = frame(0.0);
  result.image_theta_pi = frame(std::numbers::pi);

  if (!config.noiseless) {
    const int workers = config.workers > 0 ? config.workers : default_worker_count();
    detail::sample_frame(result.image_theta_0, config.seed, 0, workers);
    detail::sample_frame(result.image_theta_pi, config.seed, 1, workers);
  }

  result.difference = Grid<double>(config.width, config.height);
  for (std::size_t i = 0; i < result.difference.size(); ++i)
    result.difference[i] = result.image_theta_0[i] - result.image_theta_pi[i];
  return result;
}

// ---------------------------------------------------------------------------
// Resolution: image a knife edge through the blur, fit the edge profile.
// ---------------------------------------------------------------------------

struct ResolutionResult {
  Grid<double> difference;  ///< blurred (optionally noisy) difference frame
  std::vector<std::pair<double, double>> profile;  ///< (x um, row-averaged counts)
  optics::EsfFit fit;
  double sigma_expected_um = 0.0;
};

/// Images a sharp vertical edge, always applying the geometry's blur, then
/// refits the edge-spread model to the row-averaged profile.
inline ResolutionResult run_resolution(const RunConfig& config) {
  RunConfig effective = config;
  effective.apply_blur = true;
  IccdResult frames = run_iccd(effective);

  ResolutionResult result;
  result.sigma_expected_um = optics::edge_sigma_um(config.geometry);
  result.difference = std::move(frames.difference);

  const int w = result.difference.width();
  const int h = result.difference.height();
  result.profile.reserve(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x) {
    double acc = 0.0;
    for (int y = 0; y < h; ++y) acc += result.difference(x, y);
    result.profile.emplace_back(x * config.object.pixel_pitch_um, acc / h);
  }
  result.fit = optics::fit_esf(result.profile);
  result.fit.sigma_um = std::abs(result.fit.sigma_um);
  return result;
}

// ---------------------------------------------------------------------------
// Artifact writers shared by the CLI and the test drivers.
// ---------------------------------------------------------------------------

/// Linear scaling used when a real-valued map is written as a 16-bit raster:
/// pixel = round((value - offset) * scale).
struct PgmScaling {
  double offset = 0.0;
  double scale = 0.0;
};

inline PgmScaling write_scaled_pgm(const Grid<double>& image, const std::filesystem::path& path) {
  double lo = image[0], hi = image[0];
  for (std::size_t i = 0; i < image.size(); ++i) {
    lo = std::min(lo, image[i]);
    hi = std::max(hi, image[i]);
  }
  PgmScaling scaling;
  scaling.offset = lo;
  scaling.scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;

  PgmImage img;
  img.width = image.width();
  img.height = image.height();
  img.maxval = 65535;
  img.pixels.resize(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    img.pixels[i] =
        static_cast<std::uint16_t>(std::lround((image[i] - scaling.offset) * scaling.scale));
  write_pgm(path, img);
  return scaling;
}

inline void write_curves_csv(std::ostream& os, const CurveTable& table) {
  os << "channel,scenario,phi,theta,rate\n";
  char buf[160];
  for (const auto& row : table.rows) {
    const std::string channel(core::channel_name(row.channel));
    for (std::size_t i = 0; i < table.thetas.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g\n", channel.c_str(),
                    row.scenario.c_str(), row.phi, table.thetas[i], row.rates[i]);
      os << buf;
    }
  }
  if (!os) throw IoError("failed while writing curves CSV");
}

inline void write_curves_csv(const std::filesystem::path& path, const CurveTable& table) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_curves_csv(os, table);
}

inline void write_profile_csv(std::ostream& os,
                              std::span<const std::pair<double, double>> profile) {
  os << "x_um,counts\n";
  char buf[80];
  for (const auto& [x, c] : profile) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, c);
    os << buf;
  }
  if (!os) throw IoError("failed while writing profile CSV");
}

inline void write_profile_csv(const std::filesystem::path& path,
                              std::span<const std::pair<double, double>> profile) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_profile_csv(os, profile);
}

}  // namespace icsim::experiment
