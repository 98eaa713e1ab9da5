#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "climprice/factors.hpp"
#include "climprice/grid.hpp"
#include "climprice/ingest.hpp"

namespace climprice::fira {

enum class BlockSource { X, Y, Z };

struct DesignBlock {
  BlockSource source = BlockSource::X;
  int lag = 0;
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
  double scale = 1.0;  // block multiplier applied in the coordinates
  std::string label;
};

struct DesignLags {
  int q = 0;  // X lags 0..q
  int s = 0;  // Y lags 1..s
  int l = 0;  // Z lags 1..l
};

struct DesignOptions {
  DesignLags lags;
  // Rescale each block to unit total sample variance.
  bool standardize_blocks = false;
};

// V_t = [X_t..X_{t-q}, Y_{t-1}..Y_{t-s}, Z_{t-1}..Z_{t-l}] stored as one row
// of isometric coordinates per period. The composite inner product is the sum
// of the block inner products (H for surface blocks, Euclidean for vectors),
// which is the dot product of the rows.
struct LaggedDesign {
  std::vector<DesignBlock> blocks;
  std::vector<YearMonth> times;
  Eigen::MatrixXd coords;
  DomainPtr x_domain;

  Eigen::Index dim() const { return coords.cols(); }
  Eigen::Index size() const { return coords.rows(); }
  const DesignBlock& block(BlockSource source, int lag) const;
  double inner_product(Eigen::Index i, Eigen::Index j) const { return coords.row(i).dot(coords.row(j)); }
};

inline constexpr Eigen::Index kMinDesignPeriods = 24;

// Inputs must share one time axis. Throws InsufficientSample when fewer than
// 24 periods remain after trimming to the largest lag.
LaggedDesign build_design(const SurfaceSeries& X, const SectorPanel& Y, const ControlPanel* controls,
                          const SurfaceSeries* z_field, const DesignOptions& options);

struct HorizonFactors {
  int h = 0;
  Eigen::Index n_obs = 0;
  Eigen::VectorXd rho;  // diagonal of Pi_h; empty when K_h = 0
  Eigen::MatrixXd a;    // p x K_h, standardized-sector coordinates
  Eigen::MatrixXd b;    // dim x K_h, design coordinates
  std::string error;    // reason when K_h = 0

  Eigen::Index K() const { return rho.size(); }
};

struct FiraResult {
  std::vector<std::string> sectors;
  std::vector<std::string> dropped_sectors;
  Eigen::VectorXd sector_mean;
  Eigen::VectorXd sector_sd;
  std::vector<HorizonFactors> horizons;  // h = 0..h_max
  DesignBlock x_block;                   // contemporaneous X block of the design
  DomainPtr x_domain;

  int h_max() const { return static_cast<int>(horizons.size()) - 1; }
};

// For each h, associated factors between standardized Y_t and V_{t-h}.
// Per-horizon failures are recorded in HorizonFactors::error.
FiraResult fit_fira(const LaggedDesign& design, const SectorPanel& Y, int h_max,
                    const factors::FactorConfig& config = {});

enum class ShockProfile { Disk, CosineTaper };
std::string_view to_string(ShockProfile p);
ShockProfile parse_profile(std::string_view text);

struct ShockSurface {
  double magnitude = 0.0;
  double center_lat = 0.0;
  double center_lon = 0.0;
  double radius_km = 0.0;
  ShockProfile profile = ShockProfile::CosineTaper;
  Surface surface;
  std::size_t footprint_cells = 0;
  double footprint_area_km2 = 0.0;  // spherical area of valid cells within the radius
};

// Great-circle membership d <= radius. Throws CenterOutsideDomain,
// EmptyFootprint, InvalidArgument (radius <= 0).
ShockSurface make_shock_surface(double magnitude, double center_lat, double center_lon, double radius_km,
                                ShockProfile profile, const DomainPtr& domain);

struct ResponsePaths {
  std::vector<std::string> sectors;
  Eigen::MatrixXd canonical;  // (h_max+1) x p, unit-variance scale
  Eigen::MatrixXd raw;        // (h_max+1) x p, back-scaled by sector sd
};

// response_h = sum_k rho_k <b_k|X, shock>_H a_k. Throws NonConformable.
ResponsePaths respond(const FiraResult& fira, const ShockSurface& shock);

// CSV `sector,h,response`.
std::string format_response_csv(const ResponsePaths& paths, bool raw);

}  // namespace climprice::fira
