#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "icsim/pgm.hpp"
#include "test_helpers.hpp"

using nlohmann::json;
using test_helpers::make_scratch_dir;
using test_helpers::run_cli;
using test_helpers::slurp;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

json load_summary(const fs::path& dir) { return json::parse(slurp(dir / "summary.json")); }

}  // namespace

TEST_CASE("no subcommand is a usage error", "[cli]") {
  const auto scratch = make_scratch_dir("usage");
  const auto result = run_cli("", scratch);
  CHECK(result.exit_code == 2);
  const json err = json::parse(result.err);
  CHECK(err["error"]["type"] == "usage");
  CHECK_FALSE(err["error"]["message"].get<std::string>().empty());
}

TEST_CASE("unknown flags are usage errors", "[cli]") {
  const auto scratch = make_scratch_dir("badflag");
  const auto result = run_cli("image --definitely-not-a-flag", scratch);
  CHECK(result.exit_code == 2);
  CHECK(json::parse(result.err)["error"]["type"] == "usage");
}

TEST_CASE("invalid configuration values exit with code 3", "[cli]") {
  const auto scratch = make_scratch_dir("badcfg");

  auto result = run_cli("image --object glyph: --out \"" + scratch.string() + "\"", scratch);
  CHECK(result.exit_code == 3);
  CHECK(json::parse(result.err)["error"]["type"] == "config");

  result = run_cli("image --mode telescope --out \"" + scratch.string() + "\"", scratch);
  CHECK(result.exit_code == 3);

  result = run_cli("image --transmissivity 1.7 --out \"" + scratch.string() + "\"", scratch);
  CHECK(result.exit_code == 3);
}

TEST_CASE("missing input files exit with a runtime error", "[cli]") {
  const auto scratch = make_scratch_dir("badio");
  const auto result = run_cli(
      "image --object /nonexistent/object.pgm --out \"" + scratch.string() + "\"", scratch);
  CHECK(result.exit_code == 4);
  CHECK_FALSE(json::parse(result.err)["error"]["message"].get<std::string>().empty());
}

TEST_CASE("calibrate writes the fitted weights", "[cli]") {
  const auto scratch = make_scratch_dir("calibrate");
  const auto result = run_cli("calibrate --out \"" + scratch.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);

  const json summary = load_summary(scratch);
  CHECK_THAT(summary["calibration"]["transmitted_weight"].get<double>(),
             WithinAbs(0.407, 1e-9));
  CHECK_THAT(summary["calibration"]["reflected_weight"].get<double>(),
             WithinAbs(0.265, 1e-9));
  CHECK(summary["calibration"]["infeasible"].get<bool>() == false);
  CHECK(summary["calibration"]["model"]["mode_overlap"].get<double>() > 0.0);
  // The run prints the summary path as its last line.
  CHECK(result.out.find("summary.json") != std::string::npos);
}

TEST_CASE("single-pixel imaging run writes its artifacts", "[cli]") {
  const auto scratch = make_scratch_dir("spi");
  const auto result = run_cli(
      "image --mode spi --object glyph:U --size 8 --noiseless --out \"" + scratch.string() +
          "\"",
      scratch);
  REQUIRE(result.exit_code == 0);
  CHECK(fs::exists(scratch / "spectrum.csv"));
  CHECK(fs::exists(scratch / "recon.pgm"));
  CHECK(fs::exists(scratch / "ground_truth.pgm"));
  REQUIRE(fs::exists(scratch / "summary.json"));

  const json summary = load_summary(scratch);
  CHECK(summary["spi"]["scale_k"].get<int>() == 3);
  CHECK(summary["spi"]["mask_count"].get<int>() == 64);
  CHECK_THAT(summary["pearson_vs_ground_truth"].get<double>(), WithinAbs(1.0, 1e-9));

  const icsim::PgmImage recon = icsim::read_pgm(scratch / "recon.pgm");
  CHECK(recon.width == 8);
  CHECK(recon.height == 8);
}

TEST_CASE("sensing run writes histograms and the decision summary", "[cli]") {
  const auto scratch = make_scratch_dir("sense");
  const auto result = run_cli(
      "sense --trials 2000 --k-sigma 2.5 --out \"" + scratch.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);
  CHECK(fs::exists(scratch / "hist_absent.csv"));
  CHECK(fs::exists(scratch / "hist_present.csv"));

  const json summary = load_summary(scratch);
  CHECK(summary["confidence"].get<double>() > 0.99);
  CHECK(summary["threshold"].get<double>() > summary["fit"]["mu_low"].get<double>());
  CHECK(summary["threshold"].get<double>() < summary["fit"]["mu_high"].get<double>());
  CHECK(summary["empirical_error"].get<double>() < 0.01);

  const std::string hist = slurp(scratch / "hist_absent.csv");
  CHECK(hist.rfind("bin_lower_edge,frequency\n", 0) == 0);
}

TEST_CASE("resolution run recovers the configured blur width", "[cli]") {
  const auto scratch = make_scratch_dir("resolution");
  const auto result =
      run_cli("resolution --noiseless --out \"" + scratch.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);
  CHECK(fs::exists(scratch / "profile.csv"));
  CHECK(fs::exists(scratch / "difference.pgm"));

  const json summary = load_summary(scratch);
  CHECK_THAT(summary["sigma_um"].get<double>(), WithinAbs(42.64656234428397, 0.5));
  CHECK(summary["sigma_relative_error"].get<double>() < 0.02);
}

TEST_CASE("curves run reports per-channel fringe visibilities", "[cli]") {
  const auto scratch = make_scratch_dir("curves");
  const auto result = run_cli("curves --out \"" + scratch.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);

  const std::string csv = slurp(scratch / "curves.csv");
  CHECK(csv.rfind("channel,scenario,phi,theta,rate\n", 0) == 0);

  const json summary = load_summary(scratch);
  REQUIRE(summary["visibilities"].size() == 12u);
  bool checked = false;
  for (const auto& row : summary["visibilities"])
    if (row["channel"] == "signal" && row["scenario"] == "absent" &&
        row["phi"].get<double>() > 3.0) {
      CHECK_THAT(row["visibility"].get<double>(), WithinAbs(1.0, 1e-12));
      checked = true;
    }
  CHECK(checked);
}

TEST_CASE("mask export writes one raster per mask", "[cli]") {
  const auto scratch = make_scratch_dir("masks");
  const auto result =
      run_cli("masks --scale-k 1 --count -1 --out \"" + scratch.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);
  for (const char* name : {"mask_0000.pgm", "mask_0001.pgm", "mask_0002.pgm", "mask_0003.pgm"})
    CHECK(fs::exists(scratch / name));
  CHECK_FALSE(fs::exists(scratch / "mask_0004.pgm"));

  const icsim::PgmImage mask = icsim::read_pgm(scratch / "mask_0000.pgm");
  CHECK(mask.width == 2);
  CHECK(mask.height == 2);
}

TEST_CASE("phase imaging run separates the region phases", "[cli]") {
  const auto scratch = make_scratch_dir("phasesim");
  const auto result = run_cli(
      "phase-sim --size 96 --noiseless --out \"" + scratch.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);
  CHECK(fs::exists(scratch / "theta_0.pgm"));
  CHECK(fs::exists(scratch / "theta_pi.pgm"));
  CHECK(fs::exists(scratch / "difference.pgm"));

  const json summary = load_summary(scratch);
  REQUIRE(summary["regions"].size() == 3u);
  CHECK_THAT(summary["regions"][0]["mean_difference"].get<double>(), WithinAbs(200.0, 1e-9));
  CHECK_THAT(summary["regions"][1]["mean_difference"].get<double>(),
             WithinAbs(141.42135623730951, 1e-9));
  CHECK_THAT(summary["regions"][2]["mean_difference"].get<double>(), WithinAbs(0.0, 1e-9));
}

TEST_CASE("config files feed defaults and flags override them", "[cli]") {
  const auto scratch = make_scratch_dir("config");
  const fs::path cfg = scratch / "run.ini";
  {
    std::ofstream os(cfg);
    os << "[image]\n"
       << "mode=iccd\n"
       << "noiseless=true\n"
       << "size=8\n"
       << "rate=500\n";
  }

  const fs::path out_a = scratch / "a";
  auto result = run_cli(
      "image --config \"" + cfg.string() + "\" --out \"" + out_a.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);
  json summary = load_summary(out_a);
  CHECK(summary["object"]["width"].get<int>() == 8);
  CHECK(summary["object"]["rate"].get<double>() == 500.0);
  CHECK(summary["noiseless"].get<bool>() == true);

  // A flag on the command line beats the same key in the config file.
  const fs::path out_b = scratch / "b";
  result = run_cli("image --config \"" + cfg.string() + "\" --size 16 --out \"" +
                       out_b.string() + "\"",
                   scratch);
  REQUIRE(result.exit_code == 0);
  summary = load_summary(out_b);
  CHECK(summary["object"]["width"].get<int>() == 16);

  // A missing config file is a configuration error.
  result = run_cli(
      "image --config \"" + (scratch / "absent.ini").string() + "\"", scratch);
  CHECK(result.exit_code == 3);
}

TEST_CASE("relative output paths honor ICSIM_OUT_ROOT", "[cli]") {
  const auto scratch = make_scratch_dir("outroot");
  setenv("ICSIM_OUT_ROOT", scratch.string().c_str(), 1);
  const auto result = run_cli("calibrate --out nested/run", scratch);
  unsetenv("ICSIM_OUT_ROOT");
  REQUIRE(result.exit_code == 0);
  CHECK(fs::exists(scratch / "nested" / "run" / "summary.json"));
}

TEST_CASE("noisy camera artifacts are identical across worker counts", "[cli]") {
  const auto scratch = make_scratch_dir("det");
  const fs::path out_a = scratch / "a";
  const fs::path out_b = scratch / "b";
  const std::string base = "image --mode iccd --object glyph:N --size 16 --seed 9 ";

  auto result = run_cli(base + "--threads 1 --out \"" + out_a.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);
  result = run_cli(base + "--threads 3 --out \"" + out_b.string() + "\"", scratch);
  REQUIRE(result.exit_code == 0);

  for (const char* name : {"frame_bright.pgm", "frame_dark.pgm", "difference.pgm"}) {
    const std::string a = slurp(out_a / name);
    const std::string b = slurp(out_b / name);
    REQUIRE_FALSE(a.empty());
    CHECK(a == b);
  }
}
