// ============================================================================
// chc/config.hpp - flat key = value configuration and run manifests
// ============================================================================
#pragma once

#include "chc/experiments.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace chc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses "key = value" lines; '#' starts a comment. Unknown keys, malformed
/// values and missing required keys (domain, T, study) throw ConfigError.
StudyConfig parse_config(std::istream& is);
StudyConfig parse_config_file(const std::string& path);

/// Applies one assignment on top of an existing config (used for flags).
void apply_setting(StudyConfig& cfg, const std::string& key, const std::string& value);

/// Range checks shared by the parser and the CLI.
void validate(const StudyConfig& cfg);

/// Seed resolution: explicit flag, then CHC_SEED, then 42.
std::uint64_t resolve_seed(const std::string& flag_value);

struct RunManifest {
  StudyConfig config;
  std::string version;
  std::string timestamp;
  std::vector<std::string> outputs;
};

/// Every config key with its resolved value, in a fixed order, so the
/// manifest reparses to the same config.
void write_config(std::ostream& os, const StudyConfig& cfg);
void write_manifest(std::ostream& os, const RunManifest& manifest);

inline constexpr const char* kArtifactVersion = "1.0.0";

}  // namespace chc
