#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "climprice/calendar.hpp"

namespace climprice {

inline constexpr double kEarthRadiusKm = 6371.0;

enum class Quadrature { CosLatitude, Uniform };

struct GridBounds {
  double lat_min = 0.0;
  double lat_max = 0.0;
  double lon_min = 0.0;
  double lon_max = 0.0;
};

struct GridStep {
  double lat = 0.25;
  double lon = 0.25;
};

class GridDomain;
using DomainPtr = std::shared_ptr<const GridDomain>;

// Regular lat/lon raster. Cells are stored row-major, row 0 at lat_min and
// column 0 at lon_min. Weights are zero on masked cells and sum to one over
// the valid cells, so inner products approximate a normalized area integral.
class GridDomain {
 public:
  // Throws NonConformableMask if mask.size() != rows*cols, EmptyDomain if no
  // cell is valid, InvalidArgument if the steps do not divide the extents.
  static DomainPtr build(const GridBounds& bounds, const GridStep& step, std::vector<std::uint8_t> mask,
                         Quadrature quadrature = Quadrature::CosLatitude);

  // All cells valid.
  static DomainPtr build(const GridBounds& bounds, const GridStep& step,
                         Quadrature quadrature = Quadrature::CosLatitude);

  const GridBounds& bounds() const { return bounds_; }
  const GridStep& step() const { return step_; }
  Quadrature quadrature() const { return quadrature_; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t cell_count() const { return rows_ * cols_; }
  std::size_t valid_count() const { return valid_cells_.size(); }

  std::size_t cell_index(std::size_t row, std::size_t col) const { return row * cols_ + col; }
  double row_lat(std::size_t row) const;
  double col_lon(std::size_t col) const;
  double cell_lat(std::size_t cell) const { return row_lat(cell / cols_); }
  double cell_lon(std::size_t cell) const { return col_lon(cell % cols_); }

  // Cell containing (lat, lon), if inside the bounds.
  std::optional<std::size_t> locate(double lat, double lon) const;
  bool contains(double lat, double lon) const;

  bool valid(std::size_t cell) const { return mask_[cell] != 0; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::span<const std::size_t> valid_cells() const { return valid_cells_; }

  // Full-raster weights (zero on masked cells).
  const Eigen::VectorXd& weights() const { return weights_; }
  // sqrt(weight) per valid cell, in valid_cells() order.
  const Eigen::VectorXd& sqrt_valid_weights() const { return sqrt_valid_weights_; }

  // Spherical area of a cell in km^2.
  double cell_area_km2(std::size_t cell) const;

 private:
  GridDomain() = default;

  GridBounds bounds_;
  GridStep step_;
  Quadrature quadrature_ = Quadrature::CosLatitude;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> mask_;
  std::vector<std::size_t> valid_cells_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd sqrt_valid_weights_;
};

// One field over a domain. Masked cells hold NaN.
struct Surface {
  DomainPtr domain;
  Eigen::VectorXd values;

  // Copies `values`, replaces masked cells with NaN and checks the valid
  // cells are finite.
  static Surface make(DomainPtr domain, Eigen::VectorXd values);
  static Surface constant(DomainPtr domain, double value);
  static Surface zeros(DomainPtr domain) { return constant(std::move(domain), 0.0); }

  // Valid-cell values in valid_cells() order.
  Eigen::VectorXd valid_values() const;
};

// Time-indexed stack of surfaces. `values` is T x valid_count, columns in
// valid_cells() order; masked cells are not stored.
struct SurfaceSeries {
  DomainPtr domain;
  std::vector<YearMonth> times;
  Eigen::MatrixXd values;

  std::size_t size() const { return times.size(); }
  Surface frame(std::size_t t) const;

  // Checks monthly spacing and shape consistency.
  void validate() const;
};

// Conformability is identity of the domain object.
bool conformable(const DomainPtr& a, const DomainPtr& b);
void require_conformable(const DomainPtr& a, const DomainPtr& b, const char* what);

double inner_product(const Surface& f, const Surface& g);
double norm(const Surface& f);

// Surface values scaled by sqrt(weight) on valid cells: an isometry from the
// discretized H onto R^valid_count with the Euclidean inner product.
Eigen::VectorXd embed(const Surface& f);
Eigen::MatrixXd embed(const SurfaceSeries& series);
Surface unembed(const DomainPtr& domain, const Eigen::Ref<const Eigen::VectorXd>& coords);

// Great-circle distance in km (haversine, Earth radius 6371 km).
double haversine_km(double lat1, double lon1, double lat2, double lon2);

}  // namespace climprice
