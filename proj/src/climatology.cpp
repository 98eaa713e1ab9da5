#include "climprice/climatology.hpp"

#include <array>
#include <cmath>

#include "climprice/csv.hpp"
#include "climprice/error.hpp"

namespace climprice {

Surface MonthlyBaseline::month(int m) const {
  if (m < 1 || m > 12) fail(ErrorCode::InvalidArgument, "month out of range");
  return unembed(domain, means.row(m - 1).transpose().cwiseProduct(domain->sqrt_valid_weights()));
}

MonthlyBaseline compute_baseline(const SurfaceSeries& series, const YearWindow& window) {
  series.validate();
  const auto n = static_cast<Eigen::Index>(series.domain->valid_count());
  MonthlyBaseline out;
  out.domain = series.domain;
  out.reference_window = window;
  out.means = Eigen::MatrixXd::Zero(12, n);
  std::array<int, 12> counts{};
  for (std::size_t t = 0; t < series.size(); ++t) {
    const YearMonth m = series.times[t];
    if (!window.contains(m.year())) continue;
    out.means.row(m.month() - 1) += series.values.row(static_cast<Eigen::Index>(t));
    ++counts[static_cast<std::size_t>(m.month() - 1)];
  }
  for (int m = 0; m < 12; ++m) {
    if (counts[static_cast<std::size_t>(m)] == 0) {
      fail(ErrorCode::InsufficientHistory, "no frame for calendar month " + std::to_string(m + 1) + " in " +
                                               std::to_string(window.first) + "-" + std::to_string(window.last));
    }
    out.means.row(m) /= counts[static_cast<std::size_t>(m)];
  }
  return out;
}

SurfaceSeries anomaly(const SurfaceSeries& series, const MonthlyBaseline& baseline) {
  require_conformable(series.domain, baseline.domain, "anomaly");
  SurfaceSeries out{series.domain, series.times, series.values};
  for (std::size_t t = 0; t < series.size(); ++t) {
    out.values.row(static_cast<Eigen::Index>(t)) -= baseline.means.row(series.times[t].month() - 1);
  }
  return out;
}

namespace {

// Renormalized weights over the region, in valid_cells() order.
Eigen::VectorXd region_weights(const GridDomain& d, const std::vector<std::uint8_t>& region_mask) {
  if (region_mask.size() != d.cell_count()) {
    fail(ErrorCode::NonConformableMask, "region mask has " + std::to_string(region_mask.size()) + " cells, grid has " +
                                            std::to_string(d.cell_count()));
  }
  const auto cells = d.valid_cells();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (region_mask[cells[k]]) w[static_cast<Eigen::Index>(k)] = d.weights()[static_cast<Eigen::Index>(cells[k])];
  }
  const double total = w.sum();
  if (!(total > 0.0)) fail(ErrorCode::EmptyRegion, "region contains no valid cell");
  return w / total;
}

}  // namespace

ScalarSeries regional_mean(const SurfaceSeries& series, const std::vector<std::uint8_t>& region_mask) {
  const Eigen::VectorXd w = region_weights(*series.domain, region_mask);
  return ScalarSeries{series.times, series.values * w};
}

double regional_mean(const Surface& surface, const std::vector<std::uint8_t>& region_mask) {
  const Eigen::VectorXd w = region_weights(*surface.domain, region_mask);
  return surface.valid_values().dot(w);
}

std::vector<std::uint8_t> full_region(const GridDomain& domain) {
  return std::vector<std::uint8_t>(domain.cell_count(), 1);
}

std::vector<std::uint8_t> bbox_region(const GridDomain& domain, const GridBounds& box) {
  std::vector<std::uint8_t> mask(domain.cell_count(), 0);
  for (std::size_t c = 0; c < domain.cell_count(); ++c) {
    const double lat = domain.cell_lat(c);
    const double lon = domain.cell_lon(c);
    mask[c] = lat >= box.lat_min && lat <= box.lat_max && lon >= box.lon_min && lon <= box.lon_max;
  }
  return mask;
}

std::string_view to_string(SignFilter s) {
  switch (s) {
    case SignFilter::Positive: return "positive";
    case SignFilter::Negative: return "negative";
    case SignFilter::Both: return "both";
  }
  return "both";
}

SignFilter parse_sign(std::string_view text) {
  if (text == "positive") return SignFilter::Positive;
  if (text == "negative") return SignFilter::Negative;
  if (text == "both") return SignFilter::Both;
  fail(ErrorCode::InvalidArgument, "unknown sign filter '" + std::string(text) + "'");
}

std::size_t ShockSeries::count() const {
  return static_cast<std::size_t>((values.array() != 0.0).count());
}

Threshold default_threshold(const ScalarSeries& anomaly_series, const YearWindow& window) {
  Threshold out;
  double sum = 0.0;
  for (std::size_t t = 0; t < anomaly_series.size(); ++t) {
    if (window.contains(anomaly_series.times[t].year())) {
      sum += anomaly_series.values[static_cast<Eigen::Index>(t)];
      ++out.periods;
    }
  }
  if (out.periods == 0) {
    fail(ErrorCode::InsufficientHistory, "no anomaly observation in " + std::to_string(window.first) + "-" +
                                             std::to_string(window.last));
  }
  out.value = sum / static_cast<double>(out.periods);
  return out;
}

ShockSeries make_shocks(const ScalarSeries& anomaly_series, double threshold, const Conditioning& conditioning) {
  if (!(threshold > 0.0)) fail(ErrorCode::InvalidArgument, "shock threshold must be > 0, got " + csv::format_number(threshold));
  if (!(conditioning.extreme_multiplier >= 1.0)) fail(ErrorCode::InvalidArgument, "extreme multiplier must be >= 1");
  ShockSeries out;
  out.times = anomaly_series.times;
  out.threshold = threshold;
  out.conditioning = conditioning;
  out.values = Eigen::VectorXd::Zero(anomaly_series.values.size());
  const double magnitude_floor = threshold * conditioning.extreme_multiplier;
  for (std::size_t t = 0; t < anomaly_series.size(); ++t) {
    const double dev = anomaly_series.values[static_cast<Eigen::Index>(t)];
    bool pass = false;
    switch (conditioning.sign) {
      case SignFilter::Positive: pass = dev > threshold; break;
      case SignFilter::Negative: pass = dev < -threshold; break;
      case SignFilter::Both: pass = std::abs(dev) > threshold; break;
    }
    if (conditioning.season != Season::All) pass = pass && season_of(anomaly_series.times[t].month()) == conditioning.season;
    pass = pass && std::abs(dev) >= magnitude_floor;
    if (pass) out.values[static_cast<Eigen::Index>(t)] = dev;
  }
  return out;
}

const std::vector<std::string>& standard_variants() {
  static const std::vector<std::string> v = {"all", "spring", "summer", "autumn", "winter", "positive", "negative", "extreme"};
  return v;
}

Conditioning variant_conditioning(std::string_view variant, double extreme_multiplier) {
  Conditioning c;
  if (variant == "all") return c;
  if (variant == "positive") { c.sign = SignFilter::Positive; return c; }
  if (variant == "negative") { c.sign = SignFilter::Negative; return c; }
  if (variant == "extreme") { c.extreme_multiplier = extreme_multiplier; return c; }
  c.season = parse_season(variant);
  return c;
}

void write_scalar_csv(const std::filesystem::path& path, const std::vector<YearMonth>& times, const Eigen::VectorXd& values) {
  std::string out = "time,value\n";
  for (std::size_t t = 0; t < times.size(); ++t) {
    out += times[t].str() + "," + csv::format_number(values[static_cast<Eigen::Index>(t)]) + "\n";
  }
  csv::write_file(path, out);
}

}  // namespace climprice
