#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ibf/config.hpp"

namespace ibf::cli {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct RunOptions {
  Experiment experiment = Experiment::suite;
  std::filesystem::path out_dir = ".";
  unsigned threads = 1;
  bool strict = false;
};

struct RunOutcome {
  bool reliable = true;
  std::vector<std::string> files;  // written, in order
};

/// Runs the experiment and writes manifest.json followed by its CSV tables.
/// Progress goes to `log`.
RunOutcome run(const RunConfig& cfg, const RunOptions& opts, std::ostream& log);

/// Exit status for an outcome: 0, or 4 when strict and unreliable.
int exit_status(const RunOutcome& outcome, bool strict);

/// Decimal with 17 significant digits; "nan", "inf" and "-inf" otherwise.
std::string format_real(double x);

}  // namespace ibf::cli
