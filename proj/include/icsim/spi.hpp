#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "icsim/core.hpp"
#include "icsim/errors.hpp"
#include "icsim/grid.hpp"
#include "icsim/parallel.hpp"
#include "icsim/pgm.hpp"
#include "icsim/rng.hpp"
#include "icsim/scene.hpp"

namespace icsim::spi {

enum class MaskOrdering { Natural, Sequency };

inline MaskOrdering parse_ordering(std::string_view name) {
  if (name == "natural") return MaskOrdering::Natural;
  if (name == "sequency") return MaskOrdering::Sequency;
  throw ConfigError("unknown mask ordering '" + std::string(name) + "'");
}

/// Complete set of N = 4^k binary +/-1 masks of side 2^k. Flattened as rows
/// of a matrix, the set satisfies H*H^T = N*I.
struct MaskSet {
  int scale_k = 0;
  int side = 1;                               ///< 2^k
  int count = 1;                              ///< 4^k
  MaskOrdering ordering = MaskOrdering::Sequency;
  std::vector<std::vector<std::int8_t>> masks;  ///< count entries of side*side

  const std::vector<std::int8_t>& mask(int index) const {
    if (index < 0 || index >= count) throw ConfigError("mask index out of range");
    return masks[static_cast<std::size_t>(index)];
  }
};

/// Signed counts, one per acquired mask, in acquisition order.
struct HadamardSpectrum {
  std::vector<double> coefficients;
};

namespace detail {

inline int hadamard_sign(std::uint32_t i, std::uint32_t j) {
  return (std::popcount(i & j) & 1) ? -1 : 1;
}

/// Sign changes along Sylvester row u of length `side`; the sequency key.
inline int row_sign_changes(std::uint32_t u, int side) {
  int changes = 0;
  int prev = hadamard_sign(u, 0);
  for (int j = 1; j < side; ++j) {
    const int cur = hadamard_sign(u, static_cast<std::uint32_t>(j));
    if (cur != prev) ++changes;
    prev = cur;
  }
  return changes;
}

}  // namespace detail

/// Builds the full 2-D Hadamard mask set at scale k (side 2^k, 4^k masks).
/// Mask (u, v) has pixel value H[u][y] * H[v][x]. Sequency ordering sorts by
/// total sign-change count so the low-spatial-frequency masks come first.
inline MaskSet hadamard_masks(int k, MaskOrdering ordering = MaskOrdering::Sequency) {
  if (k < 0) throw ConfigError("hadamard_masks: scale k must be >= 0");
  if (k > 6) throw ConfigError("hadamard_masks: scale k exceeds the in-memory mask budget (k <= 6)");

  MaskSet set;
  set.scale_k = k;
  set.side = 1 << k;
  set.count = set.side * set.side;
  set.ordering = ordering;

  std::vector<int> changes(set.side);
  for (int u = 0; u < set.side; ++u)
    changes[u] = detail::row_sign_changes(static_cast<std::uint32_t>(u), set.side);

  std::vector<std::pair<int, int>> uv;
  uv.reserve(static_cast<std::size_t>(set.count));
  for (int u = 0; u < set.side; ++u)
    for (int v = 0; v < set.side; ++v) uv.emplace_back(u, v);

  if (ordering == MaskOrdering::Sequency) {
    std::sort(uv.begin(), uv.end(), [&](const auto& a, const auto& b) {
      const auto key = [&](const std::pair<int, int>& m) {
        return std::array<int, 5>{changes[m.first] + changes[m.second], changes[m.first],
                                  changes[m.second], m.first, m.second};
      };
      return key(a) < key(b);
    });
  }

  set.masks.resize(static_cast<std::size_t>(set.count));
  for (int i = 0; i < set.count; ++i) {
    const auto [u, v] = uv[static_cast<std::size_t>(i)];
    auto& m = set.masks[static_cast<std::size_t>(i)];
    m.resize(static_cast<std::size_t>(set.side) * set.side);
    for (int y = 0; y < set.side; ++y) {
      const int row_sign = detail::hadamard_sign(static_cast<std::uint32_t>(u),
                                                 static_cast<std::uint32_t>(y));
      for (int x = 0; x < set.side; ++x)
        m[static_cast<std::size_t>(y) * set.side + x] = static_cast<std::int8_t>(
            row_sign * detail::hadamard_sign(static_cast<std::uint32_t>(v),
                                             static_cast<std::uint32_t>(x)));
    }
  }
  return set;
}

/// One weighted phase setting of the four-setting combination
/// C(0,pi) - C(pi,pi) - C(pi,0) + C(0,0).
struct WeightedSetting {
  core::PhaseSettings phases;
  double weight = 1.0;
};

inline std::array<WeightedSetting, 4> combination_settings() {
  constexpr double pi = std::numbers::pi;
  return {WeightedSetting{{0.0, pi}, +1.0}, WeightedSetting{{pi, pi}, -1.0},
          WeightedSetting{{pi, 0.0}, -1.0}, WeightedSetting{{0.0, 0.0}, +1.0}};
}

/// Noiseless per-pixel value of the four-setting combination, counts/s.
/// Backgrounds and the setting-independent baseline cancel exactly.
inline Grid<double> expected_combination_map(const core::InterferometerModel& model,
                                             const scene::ObjectMap& object,
                                             const scene::EmissionMap& emission) {
  model.validate();
  object.validate();
  emission.validate();
  if (!object.pixels.same_shape(emission.rates))
    throw ConfigError("object and emission maps must share dimensions");

  Grid<double> out(object.width(), object.height(), 0.0);
  const auto settings = combination_settings();
  const double v = model.vis_factor(core::Channel::Signal);
  for (int y = 0; y < object.height(); ++y)
    for (int x = 0; x < object.width(); ++x) {
      double acc = 0.0;
      for (const auto& ws : settings) {
        const core::Complex r =
            core::idler_return_amplitude(model.ifm, ws.phases.phi, object.pixels(x, y));
        acc += ws.weight * core::signal_rate(emission.rates(x, y), ws.phases.theta, r, v,
                                             model.background_rate);
      }
      out(x, y) = acc;
    }
  return out;
}

/// Precomputed per-setting expected count maps at mask resolution.
/// The object grid must be square with side an integer multiple of the mask
/// side; each mask pixel then covers an f x f block of object pixels.
class AcquisitionContext {
 public:
  AcquisitionContext(const core::InterferometerModel& model, const scene::ObjectMap& object,
                     const scene::EmissionMap& emission, int mask_side,
                     double integration_time_s) {
    model.validate();
    object.validate();
    emission.validate();
    if (integration_time_s < 0.0)
      throw ConfigError("acquisition: integration time must be >= 0");
    if (!object.pixels.same_shape(emission.rates))
      throw ConfigError("object and emission maps must share dimensions");
    if (object.width() != object.height())
      throw ConfigError("mask acquisition needs a square object grid");
    if (mask_side < 1 || object.width() % mask_side != 0)
      throw ConfigError("object side must be an integer multiple of the mask side");

    side_ = mask_side;
    const int f = object.width() / mask_side;
    const auto settings = combination_settings();
    const double v = model.vis_factor(core::Channel::Signal);
    for (int s = 0; s < 4; ++s) {
      weights_[s] = settings[s].weight;
      auto& block = blocks_[s];
      block = Grid<double>(mask_side, mask_side, 0.0);
      double total = 0.0;
      for (int y = 0; y < object.height(); ++y)
        for (int x = 0; x < object.width(); ++x) {
          const core::Complex r = core::idler_return_amplitude(
              model.ifm, settings[s].phases.phi, object.pixels(x, y));
          const double counts =
              core::signal_rate(emission.rates(x, y), settings[s].phases.theta, r, v,
                                model.background_rate) *
              integration_time_s;
          block(x / f, y / f) += counts;
          total += counts;
        }
      totals_[s] = total;
    }
  }

  int mask_side() const { return side_; }

  /// <mask, counts> inner product per setting, combined with the setting weights.
  double expectation(const std::vector<std::int8_t>& mask) const {
    check(mask);
    double acc = 0.0;
    for (int s = 0; s < 4; ++s) acc += weights_[s] * dot(mask, blocks_[s]);
    return acc;
  }

  /// Draws the 8 physical detections (4 settings x complementary mask pair)
  /// as independent Poisson counts and combines them.
  double sample(const std::vector<std::int8_t>& mask, std::mt19937_64& engine) const {
    check(mask);
    std::poisson_distribution<long long> poisson;
    using param_t = std::poisson_distribution<long long>::param_type;
    double acc = 0.0;
    for (int s = 0; s < 4; ++s) {
      const double d = dot(mask, blocks_[s]);
      const double plus = std::max(0.0, 0.5 * (totals_[s] + d));
      const double minus = std::max(0.0, 0.5 * (totals_[s] - d));
      const double c_plus = plus > 0.0 ? static_cast<double>(poisson(engine, param_t(plus))) : 0.0;
      const double c_minus =
          minus > 0.0 ? static_cast<double>(poisson(engine, param_t(minus))) : 0.0;
      acc += weights_[s] * (c_plus - c_minus);
    }
    return acc;
  }

 private:
  void check(const std::vector<std::int8_t>& mask) const {
    if (static_cast<int>(mask.size()) != side_ * side_)
      throw ConfigError("mask dimensions do not match the acquisition grid");
  }

  static double dot(const std::vector<std::int8_t>& mask, const Grid<double>& block) {
    double acc = 0.0;
    const auto& data = block.data();
    for (std::size_t i = 0; i < data.size(); ++i) acc += mask[i] * data[i];
    return acc;
  }

  int side_ = 1;
  std::array<Grid<double>, 4> blocks_;
  std::array<double, 4> totals_{};
  std::array<double, 4> weights_{};
};

struct AcquireOptions {
  double integration_time_s = 1.0;
  std::uint64_t run_seed = 0;
  bool noisy = false;
  int workers = 1;  ///< 0 picks the hardware default
};

/// Signed counts for a single mask. Noiseless mode returns the exact
/// expectation; noisy mode Poisson-samples the 8 underlying detections from
/// a stream derived from (run_seed, mask_index).
inline double measure_mask(const core::InterferometerModel& model, const scene::ObjectMap& object,
                           const scene::EmissionMap& emission, const MaskSet& set, int mask_index,
                           const AcquireOptions& options = {}) {
  const auto& mask = set.mask(mask_index);
  AcquisitionContext ctx(model, object, emission, set.side, options.integration_time_s);
  if (!options.noisy) return ctx.expectation(mask);
  auto engine = make_engine(options.run_seed, Stream::MaskAcquisition,
                            static_cast<std::uint64_t>(mask_index));
  return ctx.sample(mask, engine);
}

/// Acquires the first `mask_count` masks of the set's ordering. Results are
/// byte-identical for a fixed seed regardless of worker count because every
/// mask owns an independent RNG stream.
inline HadamardSpectrum acquire_spectrum(const core::InterferometerModel& model,
                                         const scene::ObjectMap& object,
                                         const scene::EmissionMap& emission, const MaskSet& set,
                                         int mask_count, const AcquireOptions& options = {}) {
  if (mask_count < 0 || mask_count > set.count)
    throw ConfigError("acquire_spectrum: mask count exceeds the mask set");
  AcquisitionContext ctx(model, object, emission, set.side, options.integration_time_s);

  HadamardSpectrum spectrum;
  spectrum.coefficients.assign(static_cast<std::size_t>(mask_count), 0.0);
  const int workers = options.workers > 0 ? options.workers : default_worker_count();
  parallel_for(static_cast<std::size_t>(mask_count), workers, [&](std::size_t i) {
    const auto& mask = set.masks[i];
    if (!options.noisy) {
      spectrum.coefficients[i] = ctx.expectation(mask);
    } else {
      auto engine = make_engine(options.run_seed, Stream::MaskAcquisition,
                                static_cast<std::uint64_t>(i));
      spectrum.coefficients[i] = ctx.sample(mask, engine);
    }
  });
  return spectrum;
}

/// Weighted mask sum: image = (1/N) * sum_i w_i * M_i at mask resolution.
/// With a full noiseless spectrum this inverts acquisition exactly.
inline Grid<double> reconstruct(const MaskSet& set, const HadamardSpectrum& spectrum) {
  if (spectrum.coefficients.size() > static_cast<std::size_t>(set.count))
    throw ConfigError("reconstruct: spectrum longer than the mask set");
  Grid<double> image(set.side, set.side, 0.0);
  const double scale = 1.0 / set.count;
  for (std::size_t i = 0; i < spectrum.coefficients.size(); ++i) {
    const double w = spectrum.coefficients[i] * scale;
    if (w == 0.0) continue;
    const auto& mask = set.masks[i];
    for (std::size_t p = 0; p < mask.size(); ++p) image[p] += w * mask[p];
  }
  return image;
}

inline void write_spectrum_csv(std::ostream& os, const HadamardSpectrum& spectrum) {
  os << "index,coefficient\n";
  char buf[64];
  for (std::size_t i = 0; i < spectrum.coefficients.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, spectrum.coefficients[i]);
    os << buf;
  }
  if (!os) throw IoError("failed while writing spectrum CSV");
}

inline void write_spectrum_csv(const std::filesystem::path& path,
                               const HadamardSpectrum& spectrum) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_spectrum_csv(os, spectrum);
}

inline HadamardSpectrum read_spectrum_csv(std::istream& is) {
  HadamardSpectrum spectrum;
  std::string line;
  std::size_t expected_index = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("index", 0) == 0) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("spectrum CSV: missing comma in '" + line + "'");
    std::size_t index = 0;
    double value = 0.0;
    try {
      index = std::stoull(line.substr(0, comma));
      value = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError("spectrum CSV: cannot parse line '" + line + "'");
    }
    if (index != expected_index) throw IoError("spectrum CSV: indices must be consecutive from 0");
    ++expected_index;
    spectrum.coefficients.push_back(value);
  }
  return spectrum;
}

inline HadamardSpectrum read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_spectrum_csv(is);
}

/// Renders one mask for inspection: -1 maps to black, +1 to white.
inline PgmImage mask_to_pgm(const MaskSet& set, int mask_index) {
  const auto& mask = set.mask(mask_index);
  PgmImage img;
  img.width = set.side;
  img.height = set.side;
  img.maxval = 255;
  img.pixels.resize(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) img.pixels[i] = mask[i] > 0 ? 255 : 0;
  return img;
}

}  // namespace icsim::spi
