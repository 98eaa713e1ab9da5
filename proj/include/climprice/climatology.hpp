#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "climprice/calendar.hpp"
#include "climprice/grid.hpp"

namespace climprice {

inline constexpr YearWindow kDefaultReferenceWindow{1950, 1980};
inline constexpr YearWindow kDefaultThresholdWindow{2001, 2021};
inline constexpr double kDefaultExtremeMultiplier = 1.5;

struct ScalarSeries {
  std::vector<YearMonth> times;
  Eigen::VectorXd values;

  std::size_t size() const { return times.size(); }
};

// Calendar-month means over a reference window. Row m of `means` is month m+1,
// columns follow the domain's valid cells.
struct MonthlyBaseline {
  DomainPtr domain;
  YearWindow reference_window = kDefaultReferenceWindow;
  Eigen::MatrixXd means;  // 12 x valid_count

  Surface month(int month) const;
};

// Throws InsufficientHistory unless every calendar month has a frame in the window.
MonthlyBaseline compute_baseline(const SurfaceSeries& series, const YearWindow& window = kDefaultReferenceWindow);

// frame_t - baseline[month(t)], cellwise.
SurfaceSeries anomaly(const SurfaceSeries& series, const MonthlyBaseline& baseline);

// Weight-renormalized mean over (region ∧ domain mask) per period.
// `region_mask` has one entry per raster cell. Throws EmptyRegion.
ScalarSeries regional_mean(const SurfaceSeries& series, const std::vector<std::uint8_t>& region_mask);
// Same, for a single surface.
double regional_mean(const Surface& surface, const std::vector<std::uint8_t>& region_mask);

// Region helpers.
std::vector<std::uint8_t> full_region(const GridDomain& domain);
std::vector<std::uint8_t> bbox_region(const GridDomain& domain, const GridBounds& box);

enum class SignFilter { Positive, Negative, Both };
std::string_view to_string(SignFilter s);
SignFilter parse_sign(std::string_view text);

struct Conditioning {
  SignFilter sign = SignFilter::Both;
  Season season = Season::All;
  double extreme_multiplier = 1.0;  // >= 1; 1 disables the magnitude filter
};

struct ShockSeries {
  std::vector<YearMonth> times;
  Eigen::VectorXd values;  // exact 0 where the period fails the filters
  double threshold = 0.0;
  Conditioning conditioning;

  std::size_t count() const;  // nonzero periods
};

struct Threshold {
  double value = 0.0;
  std::size_t periods = 0;
  // make_shocks requires a strictly positive threshold.
  bool degenerate() const { return !(value > 0.0); }
};

// Mean of the anomaly series over the years of `window`. Throws InsufficientHistory.
Threshold default_threshold(const ScalarSeries& anomaly_series, const YearWindow& window = kDefaultThresholdWindow);

// A period passes iff the sign filter (strictly beyond +/- threshold), the
// season filter and |dev| >= threshold*extreme_multiplier all hold; the shock
// value is the deviation itself. Throws InvalidArgument for threshold <= 0.
ShockSeries make_shocks(const ScalarSeries& anomaly_series, double threshold, const Conditioning& conditioning = {});

// Named conditioning variants used by the battery: all, spring, summer,
// autumn, winter, positive, negative, extreme.
Conditioning variant_conditioning(std::string_view variant, double extreme_multiplier = kDefaultExtremeMultiplier);
const std::vector<std::string>& standard_variants();

void write_scalar_csv(const std::filesystem::path& path, const std::vector<YearMonth>& times,
                      const Eigen::VectorXd& values);

}  // namespace climprice
