#include "climprice/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "climprice/error.hpp"

namespace climprice {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::size_t count_steps(double extent, double step, const char* axis) {
  if (!(step > 0.0) || !(extent > 0.0)) {
    fail(ErrorCode::InvalidArgument, std::string("non-positive ") + axis + " extent or step");
  }
  const double ratio = extent / step;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) * step > 1e-9) {
    fail(ErrorCode::InvalidArgument, std::string(axis) + " step does not divide the extent");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace

DomainPtr GridDomain::build(const GridBounds& bounds, const GridStep& step, std::vector<std::uint8_t> mask,
                            Quadrature quadrature) {
  auto d = std::shared_ptr<GridDomain>(new GridDomain());
  d->bounds_ = bounds;
  d->step_ = step;
  d->quadrature_ = quadrature;
  d->rows_ = count_steps(bounds.lat_max - bounds.lat_min, step.lat, "latitude");
  d->cols_ = count_steps(bounds.lon_max - bounds.lon_min, step.lon, "longitude");
  if (mask.size() != d->rows_ * d->cols_) {
    fail(ErrorCode::NonConformableMask, "mask has " + std::to_string(mask.size()) + " cells, grid has " +
                                            std::to_string(d->rows_ * d->cols_));
  }
  d->mask_ = std::move(mask);
  for (std::size_t c = 0; c < d->mask_.size(); ++c) {
    if (d->mask_[c]) d->valid_cells_.push_back(c);
  }
  if (d->valid_cells_.empty()) fail(ErrorCode::EmptyDomain, "no valid cell in mask");

  d->weights_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d->cell_count()));
  double total = 0.0;
  for (std::size_t c : d->valid_cells_) {
    const double w = quadrature == Quadrature::CosLatitude ? std::cos(d->cell_lat(c) * kDegToRad) : 1.0;
    if (!(w > 0.0)) fail(ErrorCode::InvalidArgument, "valid cell at a pole has zero area weight");
    d->weights_[static_cast<Eigen::Index>(c)] = w;
    total += w;
  }
  d->weights_ /= total;
  d->sqrt_valid_weights_.resize(static_cast<Eigen::Index>(d->valid_cells_.size()));
  for (std::size_t k = 0; k < d->valid_cells_.size(); ++k) {
    d->sqrt_valid_weights_[static_cast<Eigen::Index>(k)] =
        std::sqrt(d->weights_[static_cast<Eigen::Index>(d->valid_cells_[k])]);
  }
  return d;
}

DomainPtr GridDomain::build(const GridBounds& bounds, const GridStep& step, Quadrature quadrature) {
  const std::size_t rows = count_steps(bounds.lat_max - bounds.lat_min, step.lat, "latitude");
  const std::size_t cols = count_steps(bounds.lon_max - bounds.lon_min, step.lon, "longitude");
  return build(bounds, step, std::vector<std::uint8_t>(rows * cols, 1), quadrature);
}

double GridDomain::row_lat(std::size_t row) const {
  return bounds_.lat_min + (static_cast<double>(row) + 0.5) * step_.lat;
}

double GridDomain::col_lon(std::size_t col) const {
  return bounds_.lon_min + (static_cast<double>(col) + 0.5) * step_.lon;
}

bool GridDomain::contains(double lat, double lon) const {
  return lat >= bounds_.lat_min && lat <= bounds_.lat_max && lon >= bounds_.lon_min && lon <= bounds_.lon_max;
}

std::optional<std::size_t> GridDomain::locate(double lat, double lon) const {
  if (!contains(lat, lon)) return std::nullopt;
  auto row = static_cast<std::size_t>(std::floor((lat - bounds_.lat_min) / step_.lat));
  auto col = static_cast<std::size_t>(std::floor((lon - bounds_.lon_min) / step_.lon));
  row = std::min(row, rows_ - 1);
  col = std::min(col, cols_ - 1);
  return cell_index(row, col);
}

double GridDomain::cell_area_km2(std::size_t cell) const {
  const double lat0 = cell_lat(cell) - 0.5 * step_.lat;
  const double lat1 = lat0 + step_.lat;
  return kEarthRadiusKm * kEarthRadiusKm * step_.lon * kDegToRad *
         (std::sin(lat1 * kDegToRad) - std::sin(lat0 * kDegToRad));
}

Surface Surface::make(DomainPtr domain, Eigen::VectorXd values) {
  if (!domain) fail(ErrorCode::InvalidArgument, "surface without domain");
  if (static_cast<std::size_t>(values.size()) != domain->cell_count()) {
    fail(ErrorCode::NonConformable, "surface has " + std::to_string(values.size()) + " cells, domain has " +
                                        std::to_string(domain->cell_count()));
  }
  for (std::size_t c = 0; c < domain->cell_count(); ++c) {
    auto i = static_cast<Eigen::Index>(c);
    if (!domain->valid(c)) {
      values[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (!std::isfinite(values[i])) {
      fail(ErrorCode::InvalidArgument, "non-finite value on valid cell " + std::to_string(c));
    }
  }
  return Surface{std::move(domain), std::move(values)};
}

Surface Surface::constant(DomainPtr domain, double value) {
  const auto n = static_cast<Eigen::Index>(domain->cell_count());
  return make(std::move(domain), Eigen::VectorXd::Constant(n, value));
}

Eigen::VectorXd Surface::valid_values() const {
  const auto cells = domain->valid_cells();
  Eigen::VectorXd out(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t k = 0; k < cells.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = values[static_cast<Eigen::Index>(cells[k])];
  }
  return out;
}

Surface SurfaceSeries::frame(std::size_t t) const {
  Eigen::VectorXd full =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(domain->cell_count()),
                                std::numeric_limits<double>::quiet_NaN());
  const auto cells = domain->valid_cells();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    full[static_cast<Eigen::Index>(cells[k])] = values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
  }
  return Surface{domain, std::move(full)};
}

void SurfaceSeries::validate() const {
  if (!domain) fail(ErrorCode::InvalidArgument, "surface series without domain");
  if (static_cast<std::size_t>(values.rows()) != times.size() ||
      static_cast<std::size_t>(values.cols()) != domain->valid_count()) {
    fail(ErrorCode::NonConformable, "surface series shape does not match its domain/time axis");
  }
  require_monthly(times, "surface series");
}

bool conformable(const DomainPtr& a, const DomainPtr& b) { return a && a == b; }

void require_conformable(const DomainPtr& a, const DomainPtr& b, const char* what) {
  if (!conformable(a, b)) fail(ErrorCode::NonConformable, std::string(what) + ": surfaces live on different domains");
}

double inner_product(const Surface& f, const Surface& g) {
  require_conformable(f.domain, g.domain, "inner_product");
  const auto& w = f.domain->weights();
  double acc = 0.0;
  for (std::size_t c : f.domain->valid_cells()) {
    const auto i = static_cast<Eigen::Index>(c);
    acc += w[i] * f.values[i] * g.values[i];
  }
  return acc;
}

double norm(const Surface& f) { return std::sqrt(std::max(0.0, inner_product(f, f))); }

Eigen::VectorXd embed(const Surface& f) {
  return f.valid_values().cwiseProduct(f.domain->sqrt_valid_weights());
}

Eigen::MatrixXd embed(const SurfaceSeries& series) {
  return series.values * series.domain->sqrt_valid_weights().asDiagonal();
}

Surface unembed(const DomainPtr& domain, const Eigen::Ref<const Eigen::VectorXd>& coords) {
  if (static_cast<std::size_t>(coords.size()) != domain->valid_count()) {
    fail(ErrorCode::NonConformable, "coordinate vector does not match the domain");
  }
  Eigen::VectorXd full = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(domain->cell_count()),
                                                   std::numeric_limits<double>::quiet_NaN());
  const auto cells = domain->valid_cells();
  const auto& sw = domain->sqrt_valid_weights();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    full[static_cast<Eigen::Index>(cells[k])] = coords[i] / sw[i];
  }
  return Surface{domain, std::move(full)};
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double p1 = lat1 * kDegToRad;
  const double p2 = lat2 * kDegToRad;
  const double dp = p2 - p1;
  const double dl = (lon2 - lon1) * kDegToRad;
  const double a = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

}  // namespace climprice
