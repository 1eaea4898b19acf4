// icsim: simulate interaction-free imaging runs and write their artifacts.
//
// Subcommands cover the sensing, camera-imaging, single-pixel imaging,
// interference-curve, resolution, mask-export, phase-imaging, and model
// calibration workflows. Every run writes a summary.json echoing the fully
// resolved configuration next to its data artifacts.
//
// Exit codes: 0 success, 2 usage error, 3 configuration error, 4 runtime error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "icsim/core.hpp"
#include "icsim/errors.hpp"
#include "icsim/experiment.hpp"
#include "icsim/optics.hpp"
#include "icsim/pgm.hpp"
#include "icsim/scene.hpp"
#include "icsim/sensing.hpp"
#include "icsim/spi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icsim;

namespace {

struct CommonOpts {
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  int threads = 0;
  bool noiseless = false;
  double integration_s = 1.0;

  // interferometer model
  double transmissivity = 0.5;
  double reflectivity = 0.5;
  double mode_overlap = 1.0;
  double vis_signal = 1.0;
  double vis_idler = 1.0;
  double vis_coincidence = 1.0;
  double background = 0.0;

  // imaging geometry
  double f_s_mm = 100.0;
  double f_i_mm = 100.0;
  double lambda_p_nm = 532.0;
  double lambda_s_nm = 810.0;
  double lambda_i_nm = 1550.0;
  double magnification = 0.4;
  double pump_waist_um = 171.0;
  double pitch_um = 13.0;

  // object / emission
  std::string object_spec = "glyph:U";
  std::string phase_object;
  int threshold = 128;
  int size_w = 64;
  int size_h = 0;  // 0 = square
  double rate = 1000.0;
  bool dump_object = false;
};

void add_run_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--out", o.out_dir, "Output directory (joined to $ICSIM_OUT_ROOT if relative)")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "64-bit RNG seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = hardware default)")
      ->capture_default_str();
  cmd->add_flag("--noiseless", o.noiseless, "Skip photon-counting noise");
  cmd->add_option("--integration", o.integration_s, "Integration time per setting, seconds")
      ->capture_default_str();
}

void add_model_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--transmissivity", o.transmissivity, "Beam-splitter transmissivity T")
      ->capture_default_str();
  cmd->add_option("--reflectivity", o.reflectivity, "Beam-splitter reflectivity R")
      ->capture_default_str();
  cmd->add_option("--mode-overlap", o.mode_overlap, "Returned-mode overlap gamma")
      ->capture_default_str();
  cmd->add_option("--vis-signal", o.vis_signal, "Signal-channel visibility factor")
      ->capture_default_str();
  cmd->add_option("--vis-idler", o.vis_idler, "Probe-channel visibility factor")
      ->capture_default_str();
  cmd->add_option("--vis-coincidence", o.vis_coincidence, "Coincidence visibility factor")
      ->capture_default_str();
  cmd->add_option("--background", o.background, "Additive background rate, counts/s")
      ->capture_default_str();
}

void add_geometry_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--f-s", o.f_s_mm, "Detection-arm lens focal length, mm")->capture_default_str();
  cmd->add_option("--f-i", o.f_i_mm, "Probe-arm lens focal length, mm")->capture_default_str();
  cmd->add_option("--lambda-p", o.lambda_p_nm, "Pump wavelength, nm")->capture_default_str();
  cmd->add_option("--lambda-s", o.lambda_s_nm, "Detected wavelength, nm")->capture_default_str();
  cmd->add_option("--lambda-i", o.lambda_i_nm, "Probe wavelength, nm")->capture_default_str();
  cmd->add_option("--magnification", o.magnification, "Imaging magnification ratio")
      ->capture_default_str();
  cmd->add_option("--pump-waist", o.pump_waist_um, "Pump beam waist, um")->capture_default_str();
  cmd->add_option("--pitch", o.pitch_um, "Object/camera pixel pitch, um")->capture_default_str();
}

void add_object_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--object", o.object_spec,
                  "Object: PGM path, glyph:N|J|U|NJU, knife:COL|knife:mid, clear, opaque")
      ->capture_default_str();
  cmd->add_option("--phase-object", o.phase_object,
                  "Optional PGM whose gray levels map linearly onto [0, 2pi) phase");
  cmd->add_option("--threshold", o.threshold, "Binarization threshold for PGM objects")
      ->capture_default_str();
  cmd->add_option("--size", o.size_w, "Object canvas width in pixels")->capture_default_str();
  cmd->add_option("--height", o.size_h, "Object canvas height (default: square)")
      ->capture_default_str();
  cmd->add_option("--rate", o.rate, "Uniform pair-emission rate per pixel, counts/s")
      ->capture_default_str();
  cmd->add_flag("--dump-object", o.dump_object, "Also write the built object as object.pgm");
}

fs::path resolve_out_dir(const std::string& out) {
  fs::path p(out);
  if (p.is_absolute()) return p;
  const char* root = std::getenv("ICSIM_OUT_ROOT");
  return root && *root ? fs::path(root) / p : p;
}

core::InterferometerModel build_model(const CommonOpts& o) {
  core::InterferometerModel m;
  m.ifm.transmissivity = o.transmissivity;
  m.ifm.reflectivity = o.reflectivity;
  m.ifm.mode_overlap = o.mode_overlap;
  m.signal_vis_factor = o.vis_signal;
  m.idler_vis_factor = o.vis_idler;
  m.coinc_vis_factor = o.vis_coincidence;
  m.background_rate = o.background;
  m.validate();
  return m;
}

optics::ImagingGeometry build_geometry(const CommonOpts& o) {
  optics::ImagingGeometry g;
  g.f_s_mm = o.f_s_mm;
  g.f_i_mm = o.f_i_mm;
  g.lambda_p_nm = o.lambda_p_nm;
  g.lambda_s_nm = o.lambda_s_nm;
  g.lambda_i_nm = o.lambda_i_nm;
  g.magnification = o.magnification;
  g.pump_waist_um = o.pump_waist_um;
  g.validate();
  return g;
}

scene::ObjectMap build_object(const CommonOpts& o) {
  const int w = o.size_w;
  const int h = o.size_h > 0 ? o.size_h : o.size_w;
  const std::string& spec = o.object_spec;

  if (spec == "clear" || spec == "opaque") {
    scene::ObjectMap map;
    map.pixel_pitch_um = o.pitch_um;
    map.pixels = Grid<core::PixelTransmission>(
        w, h, spec == "clear" ? core::clear_pixel : core::opaque_pixel);
    return map;
  }
  if (spec.rfind("knife:", 0) == 0) {
    const std::string col = spec.substr(6);
    int edge = w / 2;
    if (!col.empty() && col != "mid") {
      try {
        edge = std::stoi(col);
      } catch (const std::exception&) {
        throw ConfigError("object spec '" + spec + "': knife column must be an integer or 'mid'");
      }
    }
    return scene::make_knife_edge(w, h, edge, o.pitch_um);
  }
  if (spec.rfind("glyph:", 0) == 0) {
    const std::string letters = spec.substr(6);
    if (letters.empty()) throw ConfigError("object spec '" + spec + "': no glyphs given");
    if (letters.size() == 1)
      return scene::make_glyph_plate(scene::parse_glyph(letters[0]), w, o.pitch_um);
    std::vector<scene::GlyphRegion> regions;
    for (char c : letters) regions.push_back({scene::parse_glyph(c), core::clear_pixel});
    return scene::make_text_plate(regions, w, h, o.pitch_um);
  }
  std::optional<fs::path> phase;
  if (!o.phase_object.empty()) phase = fs::path(o.phase_object);
  return scene::load_object_file(spec, o.threshold, phase, o.pitch_um);
}

experiment::RunConfig build_run_config(const CommonOpts& o, experiment::RunMode mode) {
  experiment::RunConfig cfg;
  cfg.mode = mode;
  cfg.model = build_model(o);
  cfg.geometry = build_geometry(o);
  cfg.object = build_object(o);
  cfg.emission = scene::uniform_emission(cfg.object.width(), cfg.object.height(), o.rate);
  cfg.object_desc = o.object_spec;
  cfg.integration_time_s = o.integration_s;
  cfg.seed = o.seed;
  cfg.noiseless = o.noiseless;
  cfg.workers = o.threads;
  return cfg;
}

json echo_common(const CommonOpts& o, const std::string& mode) {
  json j;
  j["mode"] = mode;
  j["seed"] = o.seed;
  j["threads"] = o.threads;
  j["noiseless"] = o.noiseless;
  j["integration_s"] = o.integration_s;
  j["model"] = {{"transmissivity", o.transmissivity},
                {"reflectivity", o.reflectivity},
                {"mode_overlap", o.mode_overlap},
                {"vis_signal", o.vis_signal},
                {"vis_idler", o.vis_idler},
                {"vis_coincidence", o.vis_coincidence},
                {"background", o.background}};
  j["geometry"] = {{"f_s_mm", o.f_s_mm},
                   {"f_i_mm", o.f_i_mm},
                   {"lambda_p_nm", o.lambda_p_nm},
                   {"lambda_s_nm", o.lambda_s_nm},
                   {"lambda_i_nm", o.lambda_i_nm},
                   {"magnification", o.magnification},
                   {"pump_waist_um", o.pump_waist_um},
                   {"pitch_um", o.pitch_um}};
  j["object"] = {{"spec", o.object_spec},
                 {"phase_object", o.phase_object},
                 {"threshold", o.threshold},
                 {"width", o.size_w},
                 {"height", o.size_h > 0 ? o.size_h : o.size_w},
                 {"rate", o.rate}};
  return j;
}

json scaling_json(const experiment::PgmScaling& s) {
  return json{{"offset", s.offset}, {"scale", s.scale}};
}

/// Writes summary.json (with wall-clock) as the final artifact of a run.
void finish_run(const fs::path& out, json& summary,
                const std::chrono::steady_clock::time_point& started) {
  const auto elapsed = std::chrono::steady_clock::now() - started;
  summary["wall_clock_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  std::ofstream os(out / "summary.json");
  if (!os) throw IoError("cannot open '" + (out / "summary.json").string() + "' for writing");
  os << summary.dump(2) << '\n';
  if (!os) throw IoError("failed while writing summary.json");
  std::cout << (out / "summary.json").string() << '\n';
}

void maybe_dump_object(const CommonOpts& o, const scene::ObjectMap& object, const fs::path& out) {
  if (o.dump_object) write_pgm(out / "object.pgm", scene::object_to_pgm(object));
}

// --- subcommand drivers ----------------------------------------------------

struct ImageOpts {
  CommonOpts common;
  std::string mode = "iccd";
  int scale_k = -1;  // -1: derive from --size
  int mask_count = -1;
  std::string ordering = "sequency";
  bool blur = false;
};

int run_image(const ImageOpts& io) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(io.common.out_dir);
  fs::create_directories(out);

  json summary = echo_common(io.common, "image");
  summary["image_mode"] = io.mode;
  summary["blur"] = io.blur;

  if (io.mode == "iccd") {
    auto cfg = build_run_config(io.common, experiment::RunMode::Iccd);
    cfg.apply_blur = io.blur;
    maybe_dump_object(io.common, cfg.object, out);
    const auto result = experiment::run_iccd(cfg);
    summary["blur_sigma_um"] = result.blur_sigma_um;
    summary["artifacts"]["frame_bright.pgm"] =
        scaling_json(experiment::write_scaled_pgm(result.frame_bright, out / "frame_bright.pgm"));
    summary["artifacts"]["frame_dark.pgm"] =
        scaling_json(experiment::write_scaled_pgm(result.frame_dark, out / "frame_dark.pgm"));
    summary["artifacts"]["difference.pgm"] =
        scaling_json(experiment::write_scaled_pgm(result.difference, out / "difference.pgm"));
  } else if (io.mode == "spi") {
    auto cfg = build_run_config(io.common, experiment::RunMode::Spi);
    int k = io.scale_k;
    if (k < 0) {
      k = 0;
      while ((1 << k) < cfg.object.width() && k < 16) ++k;
      if ((1 << k) != cfg.object.width())
        throw ConfigError("spi: object width must be a power of two or --scale-k given");
    }
    cfg.spi.scale_k = k;
    cfg.spi.mask_count = io.mask_count;
    cfg.spi.ordering = spi::parse_ordering(io.ordering);
    maybe_dump_object(io.common, cfg.object, out);
    const auto result = experiment::run_spi(cfg);
    spi::write_spectrum_csv(out / "spectrum.csv", result.spectrum);
    summary["artifacts"]["recon.pgm"] =
        scaling_json(experiment::write_scaled_pgm(result.reconstruction, out / "recon.pgm"));
    summary["artifacts"]["ground_truth.pgm"] =
        scaling_json(experiment::write_scaled_pgm(result.ground_truth, out / "ground_truth.pgm"));
    summary["spi"] = {{"scale_k", cfg.spi.scale_k},
                      {"mask_side", result.masks.side},
                      {"mask_count", result.mask_count},
                      {"ordering", io.ordering}};
    summary["pearson_vs_ground_truth"] =
        experiment::pearson_correlation(result.reconstruction, result.ground_truth);
  } else {
    throw ConfigError("image: --mode must be iccd or spi");
  }

  finish_run(out, summary, started);
  return 0;
}

struct SenseOpts {
  CommonOpts common;
  experiment::SenseParams params;
};

int run_sense_cmd(const SenseOpts& so) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(so.common.out_dir);
  fs::create_directories(out);

  experiment::RunConfig cfg;
  cfg.mode = experiment::RunMode::Sense;
  cfg.integration_time_s = so.common.integration_s;
  cfg.seed = so.common.seed;
  cfg.workers = so.common.threads;
  cfg.sense = so.params;

  const auto result = experiment::run_sense(cfg);
  sensing::write_histogram_csv(out / "hist_absent.csv", result.hist_absent);
  sensing::write_histogram_csv(out / "hist_present.csv", result.hist_present);

  json summary = echo_common(so.common, "sense");
  summary.erase("model");
  summary.erase("geometry");
  summary.erase("object");
  summary["sense"] = {{"present_rate", so.params.present_rate},
                      {"absent_rate", so.params.absent_rate},
                      {"width_factor", so.params.width_factor},
                      {"sigma_present", so.params.sigma_present},
                      {"sigma_absent", so.params.sigma_absent},
                      {"k_sigma", so.params.k_sigma},
                      {"trials", so.params.trials}};
  summary["fit"] = {{"mu_low", result.fit.mu_low},       {"sigma_low", result.fit.sigma_low},
                    {"mu_high", result.fit.mu_high},     {"sigma_high", result.fit.sigma_high},
                    {"weight_low", result.fit.weight_low}, {"weight_high", result.fit.weight_high}};
  summary["threshold"] = result.threshold;
  summary["effective_separation"] = sensing::effective_separation(result.fit);
  summary["confidence"] = result.confidence;
  summary["expected_error"] = result.expected_error;
  summary["empirical_error"] = result.empirical_error;

  finish_run(out, summary, started);
  return 0;
}

struct CurvesOpts {
  CommonOpts common;
  double pair_rate = 1000.0;
  int theta_points = 24;
};

int run_curves_cmd(const CurvesOpts& co) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(co.common.out_dir);
  fs::create_directories(out);

  experiment::RunConfig cfg;
  cfg.mode = experiment::RunMode::Curves;
  cfg.model = build_model(co.common);
  cfg.curves.pair_rate = co.pair_rate;
  cfg.curves.theta_points = co.theta_points;

  const auto table = experiment::run_curves(cfg);
  experiment::write_curves_csv(out / "curves.csv", table);

  json summary = echo_common(co.common, "curves");
  summary.erase("geometry");
  summary.erase("object");
  summary["curves"] = {{"pair_rate", co.pair_rate}, {"theta_points", co.theta_points}};
  json vis = json::array();
  for (const auto& row : table.rows)
    vis.push_back({{"channel", std::string(core::channel_name(row.channel))},
                   {"scenario", row.scenario},
                   {"phi", row.phi},
                   {"visibility", row.visibility}});
  summary["visibilities"] = vis;

  finish_run(out, summary, started);
  return 0;
}

struct ResolutionOpts {
  CommonOpts common;
};

int run_resolution_cmd(const ResolutionOpts& ro) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(ro.common.out_dir);
  fs::create_directories(out);

  auto cfg = build_run_config(ro.common, experiment::RunMode::Resolution);
  maybe_dump_object(ro.common, cfg.object, out);
  const auto result = experiment::run_resolution(cfg);
  experiment::write_profile_csv(out / "profile.csv", result.profile);

  json summary = echo_common(ro.common, "resolution");
  summary["artifacts"]["difference.pgm"] =
      scaling_json(experiment::write_scaled_pgm(result.difference, out / "difference.pgm"));
  summary["sigma_um"] = result.fit.sigma_um;
  summary["sigma_expected_um"] = result.sigma_expected_um;
  summary["sigma_relative_error"] =
      std::abs(result.fit.sigma_um - result.sigma_expected_um) / result.sigma_expected_um;
  summary["fit"] = {{"a", result.fit.a},
                    {"b", result.fit.b},
                    {"x_c_um", result.fit.x_c_um},
                    {"sigma_um", result.fit.sigma_um}};

  finish_run(out, summary, started);
  return 0;
}

struct MasksOpts {
  CommonOpts common;
  int scale_k = 3;
  std::string ordering = "sequency";
  int count = 16;  // how many masks to export; -1 = all
};

int run_masks_cmd(const MasksOpts& mo) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(mo.common.out_dir);
  fs::create_directories(out);

  const auto set = spi::hadamard_masks(mo.scale_k, spi::parse_ordering(mo.ordering));
  const int count = mo.count < 0 ? set.count : std::min(mo.count, set.count);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "mask_%04d.pgm", i);
    write_pgm(out / name, spi::mask_to_pgm(set, i));
  }

  json summary = echo_common(mo.common, "masks");
  summary.erase("model");
  summary.erase("geometry");
  summary.erase("object");
  summary["masks"] = {{"scale_k", mo.scale_k},
                      {"side", set.side},
                      {"count", set.count},
                      {"exported", count},
                      {"ordering", mo.ordering}};

  finish_run(out, summary, started);
  return 0;
}

struct PhaseSimOpts {
  CommonOpts common;
  double mean_counts = 50.0;
  std::vector<double> phases = {0.0, std::numbers::pi / 8, std::numbers::pi / 4};
  std::vector<double> amplitudes = {1.0, 1.0, 1.0};
  std::string glyphs = "NJU";
};

int run_phase_sim_cmd(const PhaseSimOpts& po) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(po.common.out_dir);
  fs::create_directories(out);

  if (po.phases.size() != po.glyphs.size() || po.amplitudes.size() != po.glyphs.size())
    throw ConfigError("phase-sim: --phases and --amplitudes must match the glyph count");

  experiment::PhaseImagingConfig pc;
  pc.mean_counts = po.mean_counts;
  pc.width = po.common.size_w;
  pc.height = po.common.size_h > 0 ? po.common.size_h : po.common.size_w;
  pc.noiseless = po.common.noiseless;
  pc.seed = po.common.seed;
  pc.workers = po.common.threads;
  pc.regions.clear();
  for (std::size_t i = 0; i < po.glyphs.size(); ++i)
    pc.regions.push_back(
        {scene::parse_glyph(po.glyphs[i]), po.amplitudes[i], po.phases[i]});

  const auto result = experiment::run_phase_sim(pc);

  json summary = echo_common(po.common, "phase-sim");
  summary.erase("model");
  summary.erase("geometry");
  summary["object"] = {{"glyphs", po.glyphs},
                       {"width", pc.width},
                       {"height", pc.height}};
  summary["phase_sim"] = {{"mean_counts", pc.mean_counts},
                          {"noiseless", pc.noiseless}};
  summary["artifacts"]["theta_0.pgm"] =
      scaling_json(experiment::write_scaled_pgm(result.image_theta_0, out / "theta_0.pgm"));
  summary["artifacts"]["theta_pi.pgm"] =
      scaling_json(experiment::write_scaled_pgm(result.image_theta_pi, out / "theta_pi.pgm"));
  summary["artifacts"]["difference.pgm"] =
      scaling_json(experiment::write_scaled_pgm(result.difference, out / "difference.pgm"));

  // Per-region mean of the difference image over that region's stroke pixels.
  json regions = json::array();
  for (std::size_t i = 0; i < pc.regions.size(); ++i) {
    std::vector<scene::GlyphRegion> only(pc.regions.size());
    for (std::size_t r = 0; r < pc.regions.size(); ++r)
      only[r] = {pc.regions[r].glyph,
                 r == i ? core::clear_pixel : core::opaque_pixel};
    const auto mask = scene::make_text_plate(only, pc.width, pc.height);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < mask.pixels.size(); ++p)
      if (mask.pixels[p].amplitude > 0.5) {
        acc += result.difference[p];
        ++n;
      }
    const double expected = 4.0 * pc.mean_counts * pc.regions[i].amplitude *
                            pc.regions[i].amplitude * std::cos(2.0 * pc.regions[i].phase);
    regions.push_back({{"glyph", std::string(1, po.glyphs[i])},
                       {"amplitude", pc.regions[i].amplitude},
                       {"phase", pc.regions[i].phase},
                       {"expected_difference", expected},
                       {"mean_difference", n ? acc / static_cast<double>(n) : 0.0},
                       {"pixels", n}});
  }
  summary["regions"] = regions;

  finish_run(out, summary, started);
  return 0;
}

struct CalibrateOpts {
  CommonOpts common;
  double fringe_vis = 0.693;
  double residual_vis = 0.121;
  double present_vis = 0.223;
};

int run_calibrate_cmd(const CalibrateOpts& co) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out = resolve_out_dir(co.common.out_dir);
  fs::create_directories(out);

  core::VisibilityTargets targets;
  targets.fringe_phi_pi = co.fringe_vis;
  targets.residual_phi_zero = co.residual_vis;
  targets.object_present = co.present_vis;
  const auto result = core::calibrate_model(targets);

  json summary = echo_common(co.common, "calibrate");
  summary.erase("geometry");
  summary.erase("object");
  summary["targets"] = {{"fringe_phi_pi", co.fringe_vis},
                        {"residual_phi_zero", co.residual_vis},
                        {"object_present", co.present_vis}};
  summary["calibration"] = {
      {"transmitted_weight", result.transmitted_weight},
      {"reflected_weight", result.reflected_weight},
      {"residuals", result.residuals},
      {"infeasible", result.infeasible},
      {"model",
       {{"transmissivity", result.model.ifm.transmissivity},
        {"reflectivity", result.model.ifm.reflectivity},
        {"mode_overlap", result.model.ifm.mode_overlap},
        {"vis_signal", result.model.signal_vis_factor}}},
      {"predicted",
       {{"fringe_phi_pi", result.transmitted_weight + result.reflected_weight},
        {"residual_phi_zero", std::abs(result.transmitted_weight - result.reflected_weight)},
        {"object_present", result.reflected_weight}}}};

  finish_run(out, summary, started);
  return 0;
}

void print_error(const char* kind, const std::string& message) {
  json err = {{"error", {{"type", kind}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interaction-free imaging simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key-value config file (sections per subcommand)");

  ImageOpts image_opts;
  auto* image = app.add_subcommand("image", "Camera or single-pixel imaging run");
  add_run_flags(image, image_opts.common);
  add_model_flags(image, image_opts.common);
  add_geometry_flags(image, image_opts.common);
  add_object_flags(image, image_opts.common);
  image->add_option("--mode", image_opts.mode, "iccd | spi")->capture_default_str();
  image->add_option("--scale-k", image_opts.scale_k, "Mask scale k (side 2^k); -1 derives from --size")
      ->capture_default_str();
  image->add_option("--masks", image_opts.mask_count, "Masks to acquire; -1 = full set")
      ->capture_default_str();
  image->add_option("--ordering", image_opts.ordering, "sequency | natural")
      ->capture_default_str();
  image->add_flag("--blur", image_opts.blur, "Fold the imaging-arm blur into camera frames");

  SenseOpts sense_opts;
  auto* sense = app.add_subcommand("sense", "Interaction-free object sensing run");
  add_run_flags(sense, sense_opts.common);
  sense->add_option("--trials", sense_opts.params.trials, "Trials per class")
      ->capture_default_str();
  sense->add_option("--present-rate", sense_opts.params.present_rate,
                    "Object-present rate at the fringe maximum, counts/s")
      ->capture_default_str();
  sense->add_option("--absent-rate", sense_opts.params.absent_rate,
                    "Object-absent phase-averaged rate, counts/s")
      ->capture_default_str();
  sense->add_option("--width-factor", sense_opts.params.width_factor,
                    "Class sigma = width-factor * sqrt(mean counts)")
      ->capture_default_str();
  sense->add_option("--sigma-present", sense_opts.params.sigma_present,
                    "Explicit present-class width (overrides width-factor)")
      ->capture_default_str();
  sense->add_option("--sigma-absent", sense_opts.params.sigma_absent,
                    "Explicit absent-class width (overrides width-factor)")
      ->capture_default_str();
  sense->add_option("--k-sigma", sense_opts.params.k_sigma,
                    "Minimum class separation demanded of the threshold")
      ->capture_default_str();

  CurvesOpts curves_opts;
  auto* curves = app.add_subcommand("curves", "Interference curves for all channels");
  add_run_flags(curves, curves_opts.common);
  add_model_flags(curves, curves_opts.common);
  curves->add_option("--pair-rate", curves_opts.pair_rate, "Pair rate entering the scan, counts/s")
      ->capture_default_str();
  curves->add_option("--theta-points", curves_opts.theta_points, "Samples per phase scan")
      ->capture_default_str();

  ResolutionOpts resolution_opts;
  resolution_opts.common.object_spec = "knife:mid";
  resolution_opts.common.size_w = 256;
  resolution_opts.common.size_h = 64;
  resolution_opts.common.rate = 10000.0;
  auto* resolution = app.add_subcommand("resolution", "Knife-edge resolution measurement");
  add_run_flags(resolution, resolution_opts.common);
  add_model_flags(resolution, resolution_opts.common);
  add_geometry_flags(resolution, resolution_opts.common);
  add_object_flags(resolution, resolution_opts.common);

  MasksOpts masks_opts;
  auto* masks = app.add_subcommand("masks", "Export Hadamard masks as PGM");
  add_run_flags(masks, masks_opts.common);
  masks->add_option("--scale-k", masks_opts.scale_k, "Mask scale k (side 2^k)")
      ->capture_default_str();
  masks->add_option("--ordering", masks_opts.ordering, "sequency | natural")
      ->capture_default_str();
  masks->add_option("--count", masks_opts.count, "Masks to export; -1 = all")
      ->capture_default_str();

  PhaseSimOpts phase_opts;
  phase_opts.common.size_w = 512;
  auto* phase = app.add_subcommand("phase-sim", "Transmission-phase imaging simulation");
  add_run_flags(phase, phase_opts.common);
  phase->add_option("--mean-counts", phase_opts.mean_counts,
                    "Per-pixel mean counts of the incoherent baseline")
      ->capture_default_str();
  phase->add_option("--size", phase_opts.common.size_w, "Canvas width in pixels")
      ->capture_default_str();
  phase->add_option("--height", phase_opts.common.size_h, "Canvas height (default: square)")
      ->capture_default_str();
  phase->add_option("--glyphs", phase_opts.glyphs, "Glyph letters, one region each")
      ->capture_default_str();
  phase->add_option("--phases", phase_opts.phases, "Per-region phase delays, radians")
      ->delimiter(',');
  phase->add_option("--amplitudes", phase_opts.amplitudes, "Per-region transmission amplitudes")
      ->delimiter(',');

  CalibrateOpts calibrate_opts;
  auto* calibrate = app.add_subcommand("calibrate", "Fit model weights to visibility targets");
  add_run_flags(calibrate, calibrate_opts.common);
  calibrate->add_option("--fringe-vis", calibrate_opts.fringe_vis,
                        "Target fringe visibility, empty interferometer at phi = pi")
      ->capture_default_str();
  calibrate->add_option("--residual-vis", calibrate_opts.residual_vis,
                        "Target residual visibility, empty interferometer at phi = 0")
      ->capture_default_str();
  calibrate->add_option("--present-vis", calibrate_opts.present_vis,
                        "Target visibility with the object in place")
      ->capture_default_str();

  // --config may follow the subcommand name; unmatched flags climb to the
  // top-level app where the config option lives.
  for (CLI::App* sub : {image, sense, curves, resolution, masks, phase, calibrate})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ConfigError& e) {
    print_error("config", e.what());
    return 3;
  } catch (const CLI::FileError& e) {
    print_error("config", e.what());
    return 3;
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (image->parsed()) return run_image(image_opts);
    if (sense->parsed()) return run_sense_cmd(sense_opts);
    if (curves->parsed()) return run_curves_cmd(curves_opts);
    if (resolution->parsed()) return run_resolution_cmd(resolution_opts);
    if (masks->parsed()) return run_masks_cmd(masks_opts);
    if (phase->parsed()) return run_phase_sim_cmd(phase_opts);
    if (calibrate->parsed()) return run_calibrate_cmd(calibrate_opts);
    print_error("usage", "no subcommand selected");
    return 2;
  } catch (const ConfigError& e) {
    print_error("config", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 4;
  }
}
