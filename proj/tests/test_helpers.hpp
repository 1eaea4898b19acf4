#pragma once

// Shared helpers for the test drivers: locating the CLI binary, running it
// with captured output, and scratch directories for artifact checks.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace test_helpers {

namespace fs = std::filesystem;

/// Path of the icsim CLI binary: $ICSIM_CLI, or the in-tree build fallback.
inline std::string cli_path() {
  if (const char* env = std::getenv("ICSIM_CLI"); env && *env) return env;
  for (const char* candidate : {"../tools/icsim", "tools/icsim", "./icsim"})
    if (fs::exists(candidate)) return candidate;
  return "icsim";
}

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

/// Fresh scratch directory under the system temp root; removed by the caller.
inline fs::path make_scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  fs::path dir = fs::temp_directory_path() /
                 ("icsim_" + tag + "_" + std::to_string(rng()));
  fs::create_directories(dir);
  return dir;
}

/// Runs the CLI with the given argument string, capturing exit code and both
/// output streams.
inline CmdResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "stdout.txt";
  const fs::path err_file = scratch / "stderr.txt";
  const std::string command = "\"" + cli_path() + "\" " + args + " >\"" + out_file.string() +
                              "\" 2>\"" + err_file.string() + "\"";
  const int status = std::system(command.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

}  // namespace test_helpers
