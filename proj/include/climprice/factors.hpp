#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "climprice/grid.hpp"
#include "climprice/ingest.hpp"

// Associated factors between a finite price vector Y_t in R^p and a field
// X_t in H. Fields enter through isometric coordinates (see `embed`), so every
// H inner product below is a Euclidean dot product and the same code serves
// the mixed-block designs used by FIRA. When the field has more coordinates
// than periods, C_X is never formed and its spectrum comes from the T x T Gram
// matrix of the centered observations.
namespace climprice::factors {

struct FactorConfig {
  double tol = 0.1;  // keep r_k > tol * r_1
  bool permutation = false;
  int n_permutations = 199;
  double alpha = 0.05;  // keep r_k above the (1 - alpha) null quantile
  std::uint64_t seed = 42;
  std::optional<Eigen::Index> max_k;
  double max_condition = 1e10;
};

struct CovarianceOperators {
  Eigen::Index n_obs = 0;
  Eigen::RowVectorXd y_mean;
  Eigen::RowVectorXd x_mean;
  Eigen::MatrixXd y_centered;  // T x p
  Eigen::MatrixXd x_centered;  // T x n
  Eigen::MatrixXd cy;          // p x p, Var[Y]
  Eigen::MatrixXd cross;       // p x n, row j = C_YX(e_j)

  Eigen::Index p() const { return cy.rows(); }
  Eigen::Index dim() const { return cross.cols(); }

  Eigen::VectorXd apply_cyx(const Eigen::VectorXd& y) const { return cross.transpose() * y; }
  Eigen::VectorXd apply_cxy(const Eigen::VectorXd& f) const { return cross * f; }
  Eigen::VectorXd apply_cx(const Eigen::VectorXd& f) const;
  // Centered frame inner products divided by T-1.
  Eigen::MatrixXd gram() const;
};

// Sample covariances with 1/(T-1). Throws InsufficientSample unless T >= p + 2.
CovarianceOperators estimate_covariances(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X);

struct CrossDecomposition {
  Eigen::VectorXd singular_values;  // all p, descending
  Eigen::VectorXd r;                // retained, length K
  Eigen::MatrixXd alpha;            // p x K, orthonormal
  Eigen::MatrixXd beta;             // n x K, orthonormal
  Eigen::Index k_cutoff = 0;        // count passing the relative cutoff
  std::optional<Eigen::VectorXd> null_quantiles;
  Eigen::Index K() const { return r.size(); }
};

// Eigen-decomposition of M[i,j] = <C_YX e_i, C_YX e_j>, r_k = sqrt(mu_k),
// beta_k = C_YX(alpha_k) / r_k. Throws ZeroCrossCovariance when K = 0.
CrossDecomposition svd_cross(const CovarianceOperators& ops, const FactorConfig& config = {});

struct FactorCoordinates {
  Eigen::MatrixXd y;  // T x K, <alpha_k, Y_t>
  Eigen::MatrixXd x;  // T x K, <beta_k, X_t>
};

// Projects the data as given (no centering).
FactorCoordinates extract_factors(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, const CrossDecomposition& dec,
                                  Eigen::Index K);

struct AssociatedFactorSet {
  Eigen::VectorXd rho;      // K, descending
  Eigen::MatrixXd a;        // p x K
  Eigen::MatrixXd b;        // n x K (isometric coordinates)
  Eigen::MatrixXd y_scores;  // T x K canonical coordinates <a_k, Y_t - mean>
  Eigen::MatrixXd x_scores;  // T x K canonical coordinates <b_k, X_t - mean>
  Eigen::MatrixXd y_rotation;  // K x K, a = alpha * y_rotation
  Eigen::MatrixXd x_rotation;  // K x K, b = beta * x_rotation

  Eigen::Index K() const { return rho.size(); }
};

// Finite-dimensional CCA of the two K-dimensional factor series, mapped back
// through alpha/beta. Throws SingularFactorCovariance when either factor
// covariance has condition number >= max_condition.
AssociatedFactorSet cca_on_factors(const FactorCoordinates& coords, const Eigen::MatrixXd& alpha,
                                   const Eigen::MatrixXd& beta, double max_condition = 1e10);

// Whole pipeline on centered data: covariances, svd_cross, projection, CCA.
struct PipelineResult {
  CovarianceOperators ops;
  CrossDecomposition cross;
  AssociatedFactorSet factors;
};
PipelineResult fit(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, const FactorConfig& config = {});

// Permutation null for the cross singular values: per-component (1 - alpha)
// quantiles over shuffles of the time index of Y.
Eigen::VectorXd permutation_null(const CovarianceOperators& ops, int n_permutations, double alpha, std::uint64_t seed);

// C_X spectrum, through the Gram matrix when dim > T. Components with lambda below
// rel_floor * lambda_1 are discarded.
struct FieldSpectrum {
  Eigen::VectorXd lambda;  // descending
  Eigen::MatrixXd phi;     // n x N, orthonormal eigen-elements
  Eigen::MatrixXd scores;  // T x N, <X_t - mean, phi_i>
};
FieldSpectrum field_spectrum(const CovarianceOperators& ops, double rel_floor = 1e-12);

struct PriceSpectrum {
  Eigen::VectorXd gamma;  // descending
  Eigen::MatrixXd psi;    // p x p
};
PriceSpectrum price_spectrum(const CovarianceOperators& ops);

// Partial sums S_n(j) = sum_{i<=n} lambda_i^{-1} c_ij^2 (and the absolute
// first-power variant), c_ij the sample cross moment of <X,phi_i> and <Y,psi_j>.
// A column is flagged when the second half of the components carries more
// than `tail_threshold` of its total. Diagnostic only.
struct RegularityReport {
  Eigen::VectorXd lambda;
  Eigen::VectorXd gamma;
  Eigen::MatrixXd squared_sums;  // N x p
  Eigen::MatrixXd plain_sums;    // N x p
  Eigen::VectorXd squared_tail_share;
  Eigen::VectorXd plain_tail_share;
  std::vector<bool> squared_flag;
  std::vector<bool> plain_flag;
  double tail_threshold = 0.1;

  bool warning() const;
};
RegularityReport regularity_diagnostic(const CovarianceOperators& ops, double tail_threshold = 0.1);

// Surface-level front end: drops zero-variance sectors (reported), aligns on
// identical time axes and maps directions back to surfaces.
struct SurfaceFactorResult {
  PipelineResult pipeline;
  std::vector<std::string> sectors;          // retained, column order of a
  std::vector<std::string> dropped_sectors;  // zero variance
  std::vector<Surface> b_surfaces;
  std::vector<Surface> beta_surfaces;
};
SurfaceFactorResult fit_surface(const SectorPanel& Y, const SurfaceSeries& X, const FactorConfig& config = {});

}  // namespace climprice::factors
