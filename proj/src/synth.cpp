#include "climprice/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

#include "climprice/climatology.hpp"
#include "climprice/csv.hpp"
#include "climprice/error.hpp"
#include "climprice/ingest.hpp"

namespace climprice::synth {

const std::vector<VariableClimatology>& reference_climatology() {
  static const std::vector<VariableClimatology> rows = {
      {"temperature", {-0.6, 0.2, 3.2, 7.0, 11.7, 15.9, 18.1, 17.5, 14.0, 9.3, 4.4, 1.0}, 1.2, 2.0},
      {"precipitation", {1.9, 1.9, 1.7, 1.7, 1.8, 2.0, 1.8, 1.9, 2.0, 2.1, 2.4, 2.2}, 0.3, 0.4},
      {"solar_radiation", {49, 78, 127, 180, 230, 246, 246, 214, 156, 99, 57, 42}, 12.0, 20.0},
      {"wind_speed", {0.08, 0.08, 0.1, 0.09, 0.09, 0.09, 0.08, 0.08, 0.07, 0.09, 0.1, 0.1}, 0.01, 0.01},
  };
  return rows;
}

DomainPtr germany_like_domain(const GridBounds& bounds, const GridStep& step) {
  const auto full = GridDomain::build(bounds, step);
  const double lat0 = 0.5 * (bounds.lat_min + bounds.lat_max);
  const double lon0 = 0.5 * (bounds.lon_min + bounds.lon_max);
  const double a = 0.5 * (bounds.lat_max - bounds.lat_min);
  const double b = 0.5 * (bounds.lon_max - bounds.lon_min);
  std::vector<std::uint8_t> mask(full->cell_count());
  for (std::size_t c = 0; c < mask.size(); ++c) {
    const double u = (full->cell_lat(c) - lat0) / a;
    const double v = (full->cell_lon(c) - lon0) / b;
    // slightly lopsided so the shape is not symmetric
    mask[c] = u * u + v * v * (1.0 + 0.25 * u) <= 1.0;
  }
  return GridDomain::build(bounds, step, std::move(mask));
}

Fixture make_fixture(const config::SynthConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const DomainPtr dom = germany_like_domain(cfg.bounds, cfg.step);
  const auto nv = static_cast<Eigen::Index>(dom->valid_count());
  const YearMonth first(cfg.first_year, 1);
  const auto T = static_cast<Eigen::Index>(YearMonth(cfg.last_year, 12) - first + 1);
  std::vector<YearMonth> times;
  for (Eigen::Index t = 0; t < T; ++t) times.push_back(first + t);

  // Valid-cell weights (sum to one) and two smooth spatial shapes.
  Eigen::VectorXd w(nv), grad(nv), bump(nv);
  {
    const auto cells = dom->valid_cells();
    const GridBounds& b = cfg.bounds;
    for (Eigen::Index i = 0; i < nv; ++i) {
      const std::size_t c = cells[static_cast<std::size_t>(i)];
      w[i] = dom->weights()[static_cast<Eigen::Index>(c)];
      const double u = (dom->cell_lat(c) - b.lat_min) / (b.lat_max - b.lat_min) - 0.5;
      const double v = (dom->cell_lon(c) - b.lon_min) / (b.lon_max - b.lon_min) - 0.5;
      grad[i] = -u + 0.3 * v;
      bump[i] = std::exp(-8.0 * (u * u + v * v));
    }
  }
  grad.array() -= w.dot(grad);  // weighted mean zero
  grad /= grad.cwiseAbs().maxCoeff();

  const YearWindow ref = kDefaultReferenceWindow;
  Fixture fx;
  fx.variables.reserve(reference_climatology().size());
  Eigen::VectorXd driver;  // regional anomaly of the first variable
  for (std::size_t v = 0; v < reference_climatology().size(); ++v) {
    const auto& spec = reference_climatology()[v];
    // Common AR(1) factor with a spatially varying loading plus local noise.
    Eigen::MatrixXd noise(T, nv);
    double f = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      f = 0.5 * f + std::sqrt(0.75) * gauss(rng);
      for (Eigen::Index i = 0; i < nv; ++i) noise(t, i) = f * (1.0 + 0.5 * bump[i]) + 0.5 * gauss(rng);
    }
    noise *= spec.noise_sd;
    // Center each cell-month over the reference years so the baseline is exact.
    for (int m = 1; m <= 12; ++m) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(nv);
      int n = 0;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (times[static_cast<std::size_t>(t)].month() == m && ref.contains(times[static_cast<std::size_t>(t)].year())) {
          mean += noise.row(t);
          ++n;
        }
      }
      if (n == 0) fail(ErrorCode::InvalidArgument, "synthetic years do not cover the reference window");
      mean /= n;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (times[static_cast<std::size_t>(t)].month() == m) noise.row(t) -= mean;
      }
    }
    if (v == 0) {
      const YearWindow tw = kDefaultThresholdWindow;
      double acc = 0.0;
      int n = 0;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (tw.contains(times[static_cast<std::size_t>(t)].year())) {
          acc += noise.row(t).dot(w);
          ++n;
        }
      }
      const double shift = kThresholdTarget - acc / n;
      for (Eigen::Index t = 0; t < T; ++t) {
        if (tw.contains(times[static_cast<std::size_t>(t)].year())) noise.row(t).array() += shift;
      }
      driver = noise * w;
    }
    SurfaceSeries s;
    s.domain = dom;
    s.times = times;
    s.values.resize(T, nv);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double base = spec.monthly_mean[static_cast<std::size_t>(times[static_cast<std::size_t>(t)].month() - 1)];
      s.values.row(t) = (base + spec.pattern_amplitude * grad.array()).matrix().transpose() + noise.row(t);
    }
    fx.variables.push_back(std::move(s));
  }

  // Sector and control panels from 1999 on. Inflation rates follow AR(1)s;
  // sector 1 also loads on the regional temperature anomaly at the planted lag.
  const YearMonth p0(std::max(cfg.first_year, 1999), 1);
  const Eigen::Index off = p0 - first;
  const Eigen::Index Tp = T - off;
  const auto ns = static_cast<Eigen::Index>(cfg.sectors);
  Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(Tp, ns);
  Eigen::MatrixXd ctrl = Eigen::MatrixXd::Zero(Tp, 2);
  for (Eigen::Index t = 0; t < Tp; ++t) {
    const Eigen::Index prev = t > 0 ? t - 1 : 0;
    ctrl(t, 0) = 0.7 * ctrl(prev, 0) + 0.8 * gauss(rng);
    ctrl(t, 1) = 0.8 * ctrl(prev, 1) + 1.5 * gauss(rng);
    for (Eigen::Index j = 0; j < ns; ++j) {
      double x = 0.5 * rates(prev, j) + 0.05 * ctrl(prev, 1) + 0.4 * gauss(rng);
      if (j == 0) x += cfg.planted_effect * driver[off + t - cfg.planted_lag];
      rates(t, j) = x;
    }
  }
  // Price levels such that the year-on-year transform returns `rates` after the first year.
  fx.sectors.times.assign(times.begin() + off, times.end());
  for (Eigen::Index j = 0; j < ns; ++j) {
    char id[16];
    std::snprintf(id, sizeof id, "S%02d", static_cast<int>(j + 1));
    fx.sectors.ids.emplace_back(id);
  }
  fx.sectors.values.resize(Tp, ns);
  for (Eigen::Index t = 0; t < Tp; ++t) {
    for (Eigen::Index j = 0; j < ns; ++j) {
      fx.sectors.values(t, j) = t < 12 ? 100.0 : fx.sectors.values(t - 12, j) * (1.0 + rates(t, j) / 100.0);
    }
  }
  fx.planted_sector = fx.sectors.ids.front();
  fx.controls.times = fx.sectors.times;
  fx.controls.ids = {"ip", "commodity"};
  fx.controls.values = ctrl;
  return fx;
}

void write_fixture(const std::filesystem::path& dir, const config::SynthConfig& cfg, std::uint64_t seed) {
  const Fixture fx = make_fixture(cfg, seed);
  const bool binary = cfg.format == GridFormat::FramedBinary;
  const std::string ext = binary ? ".sgf" : ".csv";
  nlohmann::ordered_json doc;
  doc["output_dir"] = "out";
  doc["seed"] = seed;
  doc["variables"] = nlohmann::ordered_json::array();
  for (std::size_t v = 0; v < fx.variables.size(); ++v) {
    const std::string& name = reference_climatology()[v].name;
    write_gridded(dir / (name + ext), fx.variables[v], cfg.format, name);
    doc["variables"].push_back({{"name", name}, {"path", name + ext}});
  }
  write_panel_csv(dir / "sectors.csv", fx.sectors);
  write_panel_csv(dir / "controls.csv", fx.controls);

  const GridBounds& b = cfg.bounds;
  const double lat_c = 0.5 * (b.lat_min + b.lat_max);
  const double lon_c = 0.5 * (b.lon_min + b.lon_max);
  doc["regions"] = {{{"name", "EA"}, {"all", true}},
                    {{"name", "DE"}, {"bbox", {lat_c - 2.0, lat_c + 2.0, lon_c - 2.5, lon_c + 2.5}}}};
  doc["sectors"] = {{"path", "sectors.csv"}, {"transform", "yoy"}, {"window", {"2001-01", "2021-12"}}};
  doc["controls"] = {{"path", "controls.csv"}, {"window", {"2001-01", "2021-12"}}};
  doc["shocks"] = {{"variable", "temperature"}, {"region", "EA"}, {"threshold", "auto"}, {"variants", {"all", "summer"}}};
  doc["lp"] = {{"h_max", 12}, {"p_max", 4}, {"l_max", 2}, {"endogenous", {"ip", "commodity"}}};
  doc["factors"] = {{"variable", "temperature"}, {"permutation", true}};
  // The shock center is snapped to a cell center so the footprint is symmetric.
  const auto dom = fx.variables.front().domain;
  const std::size_t cc = *dom->locate(lat_c, lon_c);
  doc["fira"] = {{"variable", "temperature"},
                 {"h_max", 6},
                 {"permutation", true},
                 {"shocks",
                  {{{"name", "center"},
                    {"magnitude", 1.5},
                    {"center", {dom->cell_lat(cc), dom->cell_lon(cc)}},
                    {"radius_km", 150},
                    {"profile", "cosine"}}}}};
  csv::write_file(dir / "config.json", doc.dump(2) + "\n");
}

}  // namespace climprice::synth
