#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ozlab/run_config.hpp"

namespace oz {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct RunResult {
  int exit_code = kExitOk;
  std::string message;  // one-line outcome for the terminal
  std::string run_dir;
  std::vector<std::string> outputs;  // data files relative to run_dir
};

std::vector<std::string> known_subcommands();

// Runs one module job end to end: validates the whole config up front,
// writes manifest.txt, produces the data files, then finalizes the manifest
// with per-file checksums and the wall clock. Data files carry no
// timestamps, so a rerun with the same config and master seed is byte
// identical. Run directories are append-only: an existing manifest is
// refused rather than overwritten. On a runtime failure the partial data
// files are removed and the manifest is marked failed.
RunResult run_experiment(const std::string& subcommand, const std::string& config_path,
                         std::optional<uint64_t> seed_override = std::nullopt,
                         std::optional<std::string> out_override = std::nullopt);

// One-page summary of a finished run directory: parameters, headline
// numbers, and checksum-verified file list. Writes report.txt into the run
// directory and returns the text. Throws ConfigError when the manifest is
// missing, unfinished, or disagrees with the files on disk.
std::string emit_report(const std::string& run_dir);

// Manifest contents used by emit_report and the tests.
struct ManifestInfo {
  std::string version;
  std::string subcommand;
  std::string rng;
  std::string status;
  uint64_t master_seed = 0;
  double wall_clock_seconds = 0;
  std::string error;
  std::vector<std::pair<std::string, std::string>> config;   // key, value
  std::vector<std::pair<std::string, uint64_t>> checksums;   // file, fnv64
  std::vector<std::pair<std::string, uint64_t>> cell_seeds;  // label, seed
};

ManifestInfo read_manifest(const std::string& run_dir);

// FNV-1a over the raw file bytes.
uint64_t fnv64_file(const std::string& path);
uint64_t fnv64_bytes(const std::string& bytes);

}  // namespace oz
