#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "climprice/config.hpp"
#include "climprice/grid.hpp"

// Synthetic fixtures: gridded variables whose 1950-1980 regional monthly means
// are prescribed, plus a sector panel with one planted responsive sector.
namespace climprice::synth {

struct VariableClimatology {
  std::string name;
  std::array<double, 12> monthly_mean;  // Jan..Dec regional means over 1950-1980
  double noise_sd;
  double pattern_amplitude;
};

// Euro-area historical means, 1950-1980.
const std::vector<VariableClimatology>& reference_climatology();

inline constexpr double kThresholdTarget = 1.30;  // 2001-2021 mean temperature anomaly

// Ellipse roughly covering Germany within `bounds`.
DomainPtr germany_like_domain(const GridBounds& bounds, const GridStep& step);

struct Fixture {
  std::vector<SurfaceSeries> variables;  // reference_climatology() order
  Panel sectors;                         // price levels, one planted sector
  Panel controls;                        // rates
  std::string planted_sector;
};

// Deterministic in `seed`. The first variable gets a post-2000 shift so its
// 2001-2021 regional anomaly mean equals kThresholdTarget.
Fixture make_fixture(const config::SynthConfig& cfg, std::uint64_t seed);

// Writes the grids, panels and a config.json referencing them into `dir`.
void write_fixture(const std::filesystem::path& dir, const config::SynthConfig& cfg, std::uint64_t seed);

}  // namespace climprice::synth
