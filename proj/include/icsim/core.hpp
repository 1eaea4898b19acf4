#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icsim/errors.hpp"

namespace icsim::core {

using Complex = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Reduces an angle to [0, 2*pi).
inline double wrap_angle(double radians) {
  double r = std::fmod(radians, two_pi);
  if (r < 0) r += two_pi;
  return r;
}

/// Signal-arm phase theta and the relative phase phi of the Michelson
/// probe interferometer. Any real value is accepted; comparisons should
/// go through wrap_angle.
struct PhaseSettings {
  double theta = 0.0;
  double phi = 0.0;
};

/// Beam splitter of the probe (idler) Michelson plus the mode overlap of
/// the reference-arm return. transmissivity + reflectivity == 1 is a
/// lossless splitter; < 1 models loss in the splitter itself.
struct IfmConfig {
  double transmissivity = 0.5;
  double reflectivity = 0.5;
  double mode_overlap = 1.0;

  void validate() const {
    if (transmissivity < 0.0 || transmissivity > 1.0)
      throw ConfigError("ifm: transmissivity must be in [0,1]");
    if (reflectivity < 0.0 || reflectivity > 1.0)
      throw ConfigError("ifm: reflectivity must be in [0,1]");
    if (transmissivity + reflectivity > 1.0 + 1e-12)
      throw ConfigError("ifm: transmissivity + reflectivity must not exceed 1");
    if (mode_overlap < 0.0 || mode_overlap > 1.0)
      throw ConfigError("ifm: mode_overlap must be in [0,1]");
  }
};

/// Single-pass field transmission of one object pixel: amplitude t in [0,1]
/// and phase delta. The object sits in the folded arm, so one round trip
/// applies t^2 exp(2 i delta).
struct PixelTransmission {
  double amplitude = 1.0;
  double phase = 0.0;

  void validate() const {
    if (amplitude < 0.0 || amplitude > 1.0)
      throw ConfigError("pixel transmission amplitude must be in [0,1]");
  }
};

inline constexpr PixelTransmission opaque_pixel{0.0, 0.0};
inline constexpr PixelTransmission clear_pixel{1.0, 0.0};

enum class Channel { Signal, Idler, Coincidence };

inline Channel parse_channel(std::string_view name) {
  if (name == "signal") return Channel::Signal;
  if (name == "idler") return Channel::Idler;
  if (name == "coincidence") return Channel::Coincidence;
  throw ConfigError("unknown channel '" + std::string(name) + "'");
}

inline std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Signal: return "signal";
    case Channel::Idler: return "idler";
    case Channel::Coincidence: return "coincidence";
  }
  return "?";
}

/// Full parameter set of the doubled-pass down-conversion interferometer
/// with the embedded probe Michelson. The per-channel visibility factors
/// and the additive background degrade the ideal fringes to measured ones.
struct InterferometerModel {
  IfmConfig ifm;
  double signal_vis_factor = 1.0;
  double idler_vis_factor = 1.0;
  double coinc_vis_factor = 1.0;
  double background_rate = 0.0;  // counts/s, additive per pixel

  void validate() const {
    ifm.validate();
    for (double v : {signal_vis_factor, idler_vis_factor, coinc_vis_factor})
      if (v < 0.0 || v > 1.0) throw ConfigError("visibility factors must be in [0,1]");
    if (background_rate < 0.0) throw ConfigError("background rate must be >= 0");
  }

  double vis_factor(Channel c) const {
    switch (c) {
      case Channel::Signal: return signal_vis_factor;
      case Channel::Idler: return idler_vis_factor;
      case Channel::Coincidence: return coinc_vis_factor;
    }
    return signal_vis_factor;
  }
};

inline InterferometerModel ideal_model() { return InterferometerModel{}; }

/// Amplitude with which a probe photon re-enters the source mode after the
/// Michelson round trip: T t^2 e^{2 i delta} - gamma R e^{i phi}. The first
/// term transits the object arm twice, the second reflects off the
/// reference arm with mode overlap gamma.
inline Complex idler_return_amplitude(const IfmConfig& ifm, double phi,
                                      const PixelTransmission& px) {
  const Complex object_pass =
      px.amplitude * px.amplitude * std::polar(1.0, 2.0 * px.phase);
  const Complex reference = ifm.mode_overlap * std::polar(1.0, phi);
  return ifm.transmissivity * object_pass - ifm.reflectivity * reference;
}

/// Amplitude leaking out of the normally-dark Michelson port:
/// i sqrt(T R) (t^2 e^{2 i delta} + gamma e^{i phi}).
inline Complex vac_leak_amplitude(const IfmConfig& ifm, double phi,
                                  const PixelTransmission& px) {
  const Complex object_pass =
      px.amplitude * px.amplitude * std::polar(1.0, 2.0 * px.phase);
  const Complex reference = ifm.mode_overlap * std::polar(1.0, phi);
  const double cross = std::sqrt(ifm.transmissivity * ifm.reflectivity);
  return Complex(0.0, cross) * (object_pass + reference);
}

/// Probability weight that neither returns to the source nor exits the dark
/// port (object absorption plus reference-arm mode mismatch).
inline double absorbed_weight(const IfmConfig& ifm, double phi, const PixelTransmission& px) {
  const Complex r = idler_return_amplitude(ifm, phi, px);
  const Complex leak = vac_leak_amplitude(ifm, phi, px);
  const double total = ifm.transmissivity + ifm.reflectivity;
  return std::max(0.0, total - std::norm(r) - std::norm(leak));
}

/// Detected count rate of one channel for one pixel:
/// C = P [1 + v Re(e^{i theta} r)] + b.
inline double signal_rate(double emission_rate, double theta, Complex idler_return,
                          double vis_factor, double background_rate) {
  if (emission_rate < 0.0) throw ConfigError("emission rate must be >= 0");
  if (background_rate < 0.0) throw ConfigError("background rate must be >= 0");
  if (vis_factor < 0.0 || vis_factor > 1.0)
    throw ConfigError("visibility factor must be in [0,1]");
  if (std::abs(idler_return) > 1.0 + 1e-9)
    throw ConfigError("idler return amplitude magnitude exceeds 1");
  const Complex fringe = std::polar(1.0, theta) * idler_return;
  return emission_rate * (1.0 + vis_factor * fringe.real()) + background_rate;
}

/// Normalized intensity at the dark-port monitor, |vac_leak|^2.
/// Over phi it swings with visibility 2*gamma/(1+gamma^2) for a clear pixel.
inline double ifm_detector_rate(const IfmConfig& ifm, double phi, const PixelTransmission& px) {
  return std::norm(vac_leak_amplitude(ifm, phi, px));
}

/// One pair-emission event written to first order in the pair amplitude.
/// vacuum_amplitude is fixed so the state stays normalized: the pair branch
/// is a product state whose idler factor carries weight
/// |idler_return|^2 + |vac_leak|^2 + absorbed_weight.
struct JointState {
  Complex vacuum_amplitude;
  Complex pair_amplitude;
  Complex idler_return;
  Complex vac_leak;
  double absorbed_weight = 0.0;
};

inline JointState make_joint_state(const IfmConfig& ifm, double phi, const PixelTransmission& px,
                                   Complex pair_amplitude) {
  JointState s;
  s.pair_amplitude = pair_amplitude;
  s.idler_return = idler_return_amplitude(ifm, phi, px);
  s.vac_leak = vac_leak_amplitude(ifm, phi, px);
  s.absorbed_weight = absorbed_weight(ifm, phi, px);
  const double pair_weight =
      std::norm(s.idler_return) + std::norm(s.vac_leak) + s.absorbed_weight;
  const double vac2 = 1.0 - std::norm(pair_amplitude) * pair_weight;
  if (vac2 < 0.0) throw ConfigError("pair amplitude too large for the low-gain state");
  s.vacuum_amplitude = std::sqrt(vac2);
  return s;
}

/// Samples one channel's fringe over the given theta values at fixed phi
/// and a fixed object pixel.
inline std::vector<double> interference_curve(const InterferometerModel& model,
                                              double emission_rate, double phi,
                                              const PixelTransmission& px,
                                              std::span<const double> thetas, Channel channel) {
  model.validate();
  px.validate();
  if (thetas.empty()) throw ConfigError("interference_curve: empty theta list");
  const Complex r = idler_return_amplitude(model.ifm, phi, px);
  const double v = model.vis_factor(channel);
  std::vector<double> curve;
  curve.reserve(thetas.size());
  for (double theta : thetas)
    curve.push_back(signal_rate(emission_rate, theta, r, v, model.background_rate));
  return curve;
}

/// Fringe contrast (max-min)/(max+min) of a nonnegative curve.
inline double visibility(std::span<const double> curve) {
  if (curve.empty()) throw ConfigError("visibility: empty curve");
  double lo = curve[0], hi = curve[0];
  for (double c : curve) {
    if (c < 0.0) throw ConfigError("visibility: negative count rate");
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  if (lo + hi <= 0.0) throw ConfigError("visibility: undefined for an all-zero curve");
  return (hi - lo) / (hi + lo);
}

/// Evenly spaced theta grid over [0, 2*pi) that lands exactly on 0 and pi.
inline std::vector<double> theta_grid(int points) {
  if (points < 2 || points % 2 != 0)
    throw ConfigError("theta grid needs an even point count >= 2");
  std::vector<double> t(points);
  for (int i = 0; i < points; ++i) t[i] = two_pi * i / points;
  return t;
}

/// Measured signal visibilities used for calibration: the coupled fringe at
/// phi = pi with a clear arm, the residual fringe at phi = 0 with a clear
/// arm, and the fringe recovered by inserting an opaque object.
struct VisibilityTargets {
  double fringe_phi_pi = 1.0;
  double residual_phi_zero = 0.0;
  double object_present = 0.5;

  void validate() const {
    for (double t : {fringe_phi_pi, residual_phi_zero, object_present})
      if (t < 0.0 || t > 1.0) throw ConfigError("calibration targets must be in [0,1]");
  }
};

struct CalibrationResult {
  InterferometerModel model;
  double transmitted_weight = 0.0;  // A = v_s * T
  double reflected_weight = 0.0;    // B = v_s * gamma * R
  std::array<double, 3> residuals{};  // fitted minus target, per target
  bool infeasible = false;
};

namespace detail {

// Sum of squared residuals of (A,B) against the three visibility targets.
inline double calib_cost(double a, double b, const VisibilityTargets& t) {
  const double r1 = (a + b) - t.fringe_phi_pi;
  const double r2 = std::abs(a - b) - t.residual_phi_zero;
  const double r3 = b - t.object_present;
  return r1 * r1 + r2 * r2 + r3 * r3;
}

}  // namespace detail

/// Least-squares fit of the two fringe weights (A = v_s T, B = v_s gamma R)
/// to the three target visibilities {A+B, |A-B|, B}, constrained to
/// A, B >= 0 and A + B <= 1. The cost is piecewise quadratic, so the
/// optimum is one of a short list of closed-form candidates: the
/// stationary point of each sign branch of |A-B| plus the stationary
/// points restricted to each constraint edge. Targets with
/// residual_phi_zero greater than fringe_phi_pi violate |A-B| <= A+B,
/// cannot be met exactly by any admissible pair, and set the infeasible
/// flag; the best-effort fit is still returned.
///
/// The returned model realizes (A, B) as a balanced splitter with reduced
/// mode overlap when possible, otherwise as an unbalanced lossless
/// splitter with full overlap; both reproduce the fitted visibilities
/// exactly.
inline CalibrationResult calibrate_model(const VisibilityTargets& targets) {
  targets.validate();
  const double t1 = targets.fringe_phi_pi;
  const double t2 = targets.residual_phi_zero;
  const double t3 = targets.object_present;

  struct Candidate {
    double a, b;
  };
  const std::array<Candidate, 11> candidates{{
      {(t1 + t2) / 2.0, (t1 - t2 + t3) / 3.0},   // branch A >= B, interior
      {(t1 - t2) / 2.0, (t1 + t2 + t3) / 3.0},   // branch B >= A, interior
      {(2.0 * t1 + t3) / 5.0, (2.0 * t1 + t3) / 5.0},  // edge A = B
      {(t1 + t2) / 2.0, 0.0},                    // edge B = 0
      {0.0, (t1 + t2 + t3) / 3.0},               // edge A = 0
      {1.0 - (2.0 - 2.0 * t2 + t3) / 5.0, (2.0 - 2.0 * t2 + t3) / 5.0},  // edge A+B=1, A>=B
      {1.0 - (2.0 + 2.0 * t2 + t3) / 5.0, (2.0 + 2.0 * t2 + t3) / 5.0},  // edge A+B=1, B>=A
      {0.0, 0.0},
      {1.0, 0.0},
      {0.0, 1.0},
      {0.5, 0.5},
  }};

  CalibrationResult out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : candidates) {
    if (c.a < -1e-15 || c.b < -1e-15 || c.a + c.b > 1.0 + 1e-15) continue;
    const double a = std::clamp(c.a, 0.0, 1.0);
    const double b = std::clamp(c.b, 0.0, 1.0);
    const double cost = detail::calib_cost(a, b, targets);
    if (cost < best) {
      best = cost;
      out.transmitted_weight = a;
      out.reflected_weight = b;
    }
  }

  const double a = out.transmitted_weight;
  const double b = out.reflected_weight;
  out.residuals = {(a + b) - t1, std::abs(a - b) - t2, b - t3};
  out.infeasible = t2 > t1 + 1e-12;

  InterferometerModel m;
  if (a + b <= 0.0) {
    m.signal_vis_factor = 0.0;
  } else if (a > 0.0 && b <= a && 2.0 * a <= 1.0) {
    m.ifm = IfmConfig{0.5, 0.5, b / a};
    m.signal_vis_factor = 2.0 * a;
  } else {
    m.ifm = IfmConfig{a / (a + b), b / (a + b), 1.0};
    m.signal_vis_factor = a + b;
  }
  out.model = m;
  return out;
}

}  // namespace icsim::core
