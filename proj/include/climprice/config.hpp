#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "climprice/calendar.hpp"
#include "climprice/climatology.hpp"
#include "climprice/factors.hpp"
#include "climprice/fira.hpp"
#include "climprice/grid.hpp"
#include "climprice/ingest.hpp"
#include "climprice/local_projections.hpp"

namespace climprice::config {

struct VariableInput {
  std::string name;
  std::filesystem::path path;
};

struct RegionSpec {
  enum class Kind { All, Bbox, MaskFile };
  std::string name;
  Kind kind = Kind::All;
  GridBounds bbox;
  std::filesystem::path mask_file;  // CSV `lat,lon`, one member cell per row
};

struct PanelInput {
  std::filesystem::path path;
  PanelOptions options;
};

struct ShockConfig {
  std::string variable;
  std::string region;
  std::optional<double> threshold;  // empty = "auto"
  std::vector<std::string> variants{"all"};
  double extreme_multiplier = kDefaultExtremeMultiplier;
};

struct LpConfig {
  lp::LpSpec spec;
  std::vector<std::string> endogenous;  // control-panel columns lagged as common endogenous variables
  std::vector<std::string> controls;    // control-panel columns entering as exogenous controls
  std::optional<PanelInput> sector_endogenous;  // e.g. PPI keyed by sector id
};

struct FactorsConfig {
  std::string variable;
  factors::FactorConfig factor;
};

struct FiraShockConfig {
  std::string name;
  double magnitude = 1.5;
  double center_lat = 0.0;
  double center_lon = 0.0;
  double radius_km = 150.0;
  fira::ShockProfile profile = fira::ShockProfile::CosineTaper;
};

struct FiraConfig {
  std::string variable;
  int h_max = 12;
  fira::DesignOptions design;
  std::vector<std::string> z_controls;  // control-panel columns forming Z
  factors::FactorConfig factor;
  std::vector<FiraShockConfig> shocks;
};

struct SynthConfig {
  int first_year = 1950;
  int last_year = 2021;
  GridBounds bounds{47.0, 55.25, 5.75, 15.25};
  GridStep step{0.25, 0.25};
  int sectors = 4;
  int planted_lag = 3;
  double planted_effect = 0.8;
  GridFormat format = GridFormat::FramedBinary;
};

struct RunConfig {
  std::filesystem::path source;  // config file, empty when built in memory
  std::optional<std::filesystem::path> output_dir;
  std::uint64_t seed = 42;
  int threads = 1;
  Quadrature quadrature = Quadrature::CosLatitude;  // applied to every gridded variable
  YearWindow reference_window = kDefaultReferenceWindow;
  YearWindow threshold_window = kDefaultThresholdWindow;
  std::vector<VariableInput> variables;
  std::vector<RegionSpec> regions;
  std::optional<PanelInput> sectors;
  std::optional<PanelInput> controls;
  std::optional<ShockConfig> shocks;
  std::optional<LpConfig> lp;
  std::optional<FactorsConfig> factors;
  std::optional<FiraConfig> fira;
  SynthConfig synth;

  const VariableInput& variable(const std::string& name, const char* key) const;
  const RegionSpec& region(const std::string& name, const char* key) const;
};

// Validates the whole document before anything runs. Unknown keys, wrong
// types and missing input files raise InvalidConfig with the key path.
// Relative paths resolve against `base_dir`.
RunConfig parse(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load(const std::filesystem::path& path);

// Region membership over a domain's raster. Mask-file cells that fall outside
// the grid raise ParseError.
std::vector<std::uint8_t> region_mask(const RegionSpec& region, const GridDomain& domain);

}  // namespace climprice::config
