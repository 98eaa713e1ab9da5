#include "climprice/fira.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "climprice/csv.hpp"
#include "climprice/error.hpp"

namespace climprice::fira {

const DesignBlock& LaggedDesign::block(BlockSource source, int lag) const {
  for (const auto& b : blocks) {
    if (b.source == source && b.lag == lag) return b;
  }
  fail(ErrorCode::InvalidArgument, "design has no such block");
}

LaggedDesign build_design(const SurfaceSeries& X, const SectorPanel& Y, const ControlPanel* controls,
                          const SurfaceSeries* z_field, const DesignOptions& options) {
  const DesignLags& lags = options.lags;
  if (lags.q < 0 || lags.s < 0 || lags.l < 0) fail(ErrorCode::InvalidArgument, "negative design lag");
  X.validate();
  if (Y.times != X.times) fail(ErrorCode::NonConformable, "X and Y are not aligned");
  if (controls && controls->times != X.times) fail(ErrorCode::NonConformable, "controls are not aligned");
  if (z_field) {
    z_field->validate();
    if (z_field->times != X.times) fail(ErrorCode::NonConformable, "Z field is not aligned");
  }
  const Eigen::Index T = static_cast<Eigen::Index>(X.size());
  const bool has_z = lags.l > 0 && (controls || z_field);
  const Eigen::Index t0 = std::max({lags.q, lags.s, has_z ? lags.l : 0});
  const Eigen::Index n = T - t0;
  if (n < kMinDesignPeriods) {
    fail(ErrorCode::InsufficientSample, std::to_string(std::max<Eigen::Index>(n, 0)) + " design periods after trimming, need " +
                                            std::to_string(kMinDesignPeriods));
  }

  LaggedDesign d;
  d.x_domain = X.domain;
  d.times.assign(X.times.begin() + t0, X.times.end());
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index offset = 0;
  auto add = [&](BlockSource src, int lag, Eigen::MatrixXd m, std::string label) {
    DesignBlock b{src, lag, offset, m.cols(), 1.0, std::move(label)};
    if (options.standardize_blocks) {
      const Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
      const double total = c.squaredNorm() / static_cast<double>(m.rows() - 1);
      if (total > 0.0) b.scale = 1.0 / std::sqrt(total);
      m *= b.scale;
    }
    offset += m.cols();
    d.blocks.push_back(std::move(b));
    parts.push_back(std::move(m));
  };

  const Eigen::MatrixXd xc = embed(X);
  for (int lag = 0; lag <= lags.q; ++lag) add(BlockSource::X, lag, xc.middleRows(t0 - lag, n), "X_lag" + std::to_string(lag));
  for (int lag = 1; lag <= lags.s; ++lag) add(BlockSource::Y, lag, Y.values.middleRows(t0 - lag, n), "Y_lag" + std::to_string(lag));
  if (has_z) {
    for (int lag = 1; lag <= lags.l; ++lag) {
      Eigen::MatrixXd zc(n, 0);
      if (controls) zc = controls->values.middleRows(t0 - lag, n);
      if (z_field) {
        const Eigen::MatrixXd zf = embed(*z_field).middleRows(t0 - lag, n);
        Eigen::MatrixXd both(n, zc.cols() + zf.cols());
        both << zc, zf;
        zc = std::move(both);
      }
      add(BlockSource::Z, lag, std::move(zc), "Z_lag" + std::to_string(lag));
    }
  }
  d.coords.resize(n, offset);
  for (std::size_t i = 0; i < parts.size(); ++i) d.coords.middleCols(d.blocks[i].offset, d.blocks[i].length) = parts[i];
  return d;
}

FiraResult fit_fira(const LaggedDesign& design, const SectorPanel& Y, int h_max, const factors::FactorConfig& config) {
  if (h_max < 0) fail(ErrorCode::InvalidArgument, "negative h_max");
  if (design.times.empty()) fail(ErrorCode::InsufficientSample, "empty design");
  auto first = std::find(Y.times.begin(), Y.times.end(), design.times.front());
  if (first == Y.times.end()) fail(ErrorCode::NonConformable, "design and sector panel do not overlap");
  const Eigen::Index y0 = first - Y.times.begin();

  FiraResult out;
  out.x_domain = design.x_domain;
  out.x_block = design.block(BlockSource::X, 0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < Y.values.cols(); ++j) {
    const auto col = Y.values.col(j);
    if (col.maxCoeff() == col.minCoeff()) {
      out.dropped_sectors.push_back(Y.ids[static_cast<std::size_t>(j)]);
    } else {
      keep.push_back(j);
      out.sectors.push_back(Y.ids[static_cast<std::size_t>(j)]);
    }
  }
  if (keep.empty()) fail(ErrorCode::NoSectorsRemain, "every sector has zero variance");
  const auto p = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd Ys(Y.values.rows(), p);
  out.sector_mean.resize(p);
  out.sector_sd.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::VectorXd col = Y.values.col(keep[static_cast<std::size_t>(k)]);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(col.size() - 1));
    out.sector_mean[k] = mean;
    out.sector_sd[k] = sd;
    Ys.col(k) = (col.array() - mean) / sd;
  }

  for (int h = 0; h <= h_max; ++h) {
    HorizonFactors hf;
    hf.h = h;
    const Eigen::Index n = std::min<Eigen::Index>(design.size(), Ys.rows() - y0 - h);
    hf.n_obs = std::max<Eigen::Index>(n, 0);
    try {
      if (n < kMinDesignPeriods) fail(ErrorCode::InsufficientSample, "too few periods at this horizon");
      factors::FactorConfig cfg = config;
      cfg.seed = config.seed + static_cast<std::uint64_t>(h);
      const auto res = factors::fit(Ys.middleRows(y0 + h, n), design.coords.topRows(n), cfg);
      hf.rho = res.factors.rho;
      hf.a = res.factors.a;
      hf.b = res.factors.b;
    } catch (const Error& e) {
      hf.error = e.what();
    }
    out.horizons.push_back(std::move(hf));
  }
  return out;
}

std::string_view to_string(ShockProfile p) { return p == ShockProfile::Disk ? "disk" : "cosine"; }

ShockProfile parse_profile(std::string_view text) {
  if (text == "disk") return ShockProfile::Disk;
  if (text == "cosine" || text == "cosine-taper") return ShockProfile::CosineTaper;
  fail(ErrorCode::InvalidArgument, "unknown shock profile '" + std::string(text) + "'");
}

ShockSurface make_shock_surface(double magnitude, double center_lat, double center_lon, double radius_km,
                                ShockProfile profile, const DomainPtr& domain) {
  if (!domain) fail(ErrorCode::InvalidArgument, "shock without domain");
  if (!(radius_km > 0.0)) fail(ErrorCode::InvalidArgument, "shock radius must be > 0");
  if (!domain->contains(center_lat, center_lon)) {
    fail(ErrorCode::CenterOutsideDomain, "shock center (" + csv::format_number(center_lat) + ", " +
                                             csv::format_number(center_lon) + ") lies outside the grid");
  }
  ShockSurface s;
  s.magnitude = magnitude;
  s.center_lat = center_lat;
  s.center_lon = center_lon;
  s.radius_km = radius_km;
  s.profile = profile;
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(domain->cell_count()));
  for (std::size_t c : domain->valid_cells()) {
    const double dist = haversine_km(center_lat, center_lon, domain->cell_lat(c), domain->cell_lon(c));
    if (dist > radius_km) continue;
    ++s.footprint_cells;
    s.footprint_area_km2 += domain->cell_area_km2(c);
    const double shape = profile == ShockProfile::Disk ? 1.0 : 0.5 * (1.0 + std::cos(std::numbers::pi * dist / radius_km));
    values[static_cast<Eigen::Index>(c)] = magnitude * shape;
  }
  if (s.footprint_cells == 0) fail(ErrorCode::EmptyFootprint, "no valid cell within " + csv::format_number(radius_km) + " km");
  s.surface = Surface::make(domain, std::move(values));
  return s;
}

ResponsePaths respond(const FiraResult& fira, const ShockSurface& shock) {
  require_conformable(shock.surface.domain, fira.x_domain, "respond");
  const Eigen::VectorXd delta = embed(shock.surface) * fira.x_block.scale;
  const auto p = static_cast<Eigen::Index>(fira.sectors.size());
  const auto H = static_cast<Eigen::Index>(fira.horizons.size());
  ResponsePaths out;
  out.sectors = fira.sectors;
  out.canonical = Eigen::MatrixXd::Zero(H, p);
  for (Eigen::Index h = 0; h < H; ++h) {
    const auto& hf = fira.horizons[static_cast<std::size_t>(h)];
    for (Eigen::Index k = 0; k < hf.K(); ++k) {
      const double proj = hf.b.col(k).segment(fira.x_block.offset, fira.x_block.length).dot(delta);
      out.canonical.row(h) += (hf.rho[k] * proj) * hf.a.col(k).transpose();
    }
  }
  out.raw = out.canonical * fira.sector_sd.asDiagonal();
  return out;
}

std::string format_response_csv(const ResponsePaths& paths, bool raw) {
  const Eigen::MatrixXd& m = raw ? paths.raw : paths.canonical;
  std::string out = "sector,h,response\n";
  for (std::size_t j = 0; j < paths.sectors.size(); ++j) {
    for (Eigen::Index h = 0; h < m.rows(); ++h) {
      out += csv::escape(paths.sectors[j]) + "," + std::to_string(h) + "," +
             csv::format_number(m(h, static_cast<Eigen::Index>(j))) + "\n";
    }
  }
  return out;
}

}  // namespace climprice::fira
