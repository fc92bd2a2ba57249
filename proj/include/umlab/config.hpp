#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "umlab/experiments.hpp"

// Flat key=value config files ('#' comments, dotted keys such as params.n),
// plus round-tripping through the manifest a run leaves behind: a manifest
// passed as --config reproduces the original run.

namespace umlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LabConfig {
  ExperimentConfig experiment;
  std::string out;         // output directory ("" = not set)
  bool seed_given = false; // a seed was supplied explicitly
  bool workers_given = false;
};

// Applies one key=value pair. Unknown keys and malformed values throw
// ConfigError.
void apply_key(LabConfig& cfg, const std::string& key,
               const std::string& value);

// key=value lines; a leading '{' switches to manifest mode and reads the
// "config" object instead.
LabConfig parse_config_text(const std::string& text);
LabConfig parse_config_file(const std::string& path);

// Every config key in canonical order, serialized so that applying the pairs
// to a default LabConfig reproduces cfg exactly (shortest round-trip decimal
// for reals).
std::vector<std::pair<std::string, std::string>> config_items(
    const LabConfig& cfg);

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
  // slack of the exponent budget: (1-eps)(3(1+delta)-1) - (3(1+l_loc)-1) - w
  // with delta = c/6; the localization window argument needs this positive
  double two_mu = 0.0;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const LabConfig& cfg);

}  // namespace umlab
