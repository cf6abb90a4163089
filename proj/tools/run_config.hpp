#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rcm/net.hpp"
#include "rcm/retinex.hpp"
#include "rcm/sampling.hpp"
#include "rcm/schedule.hpp"
#include "rcm/train.hpp"

namespace rcm::cli {

/// Invalid configuration files, unknown keys and unparsable values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScheduleParams {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double sigma_data = 0.5;
  int n_levels = 10;
  double rho = 7.0;

  NoiseSchedule make() const { return NoiseSchedule(sigma_min, sigma_max, sigma_data, n_levels, rho); }
};

struct ToyDataParams {
  int count = 64;
  int size = 32;
  ToyDegradation degradation;
  double delta = kDefaultRetinexDelta;
};

struct EnhanceParams {
  bool ema = true;
  std::string suffix = "_enhanced";
};

struct InspectParams {
  std::int64_t draws = 100000;
  int bins = 50;
};

struct PathParams {
  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path checkpoints;
  std::filesystem::path input;
  std::filesystem::path enhanced;
  std::filesystem::path reference;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ScheduleParams schedule;
  SamplerConfig sampler;
  DenoiserConfig reflectance = DenoiserConfig::reflectance();
  DenoiserConfig illumination = DenoiserConfig::illumination();
  TrainConfig train;
  ToyDataParams data;
  EnhanceParams enhance;
  InspectParams inspect;
  PathParams paths;

  /// Runs every module-level validator.
  void validate() const;
};

/// Every key as "section.key", in manifest order.
std::vector<std::string> config_keys();

/// Sets one key from its text form. Throws ConfigError for unknown keys or bad values.
void set_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& config, const std::string& key);

/// Applies an INI file on top of `config`.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// INI text holding every resolved key except paths.out, which is the manifest's own directory.
/// Loadable again with apply_config_file.
void write_manifest(std::ostream& os, const RunConfig& config, const std::string& command);
void write_manifest(const std::filesystem::path& path, const RunConfig& config, const std::string& command);

}  // namespace rcm::cli
