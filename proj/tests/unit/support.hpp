#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "climprice/calendar.hpp"
#include "climprice/grid.hpp"
#include "climprice/ingest.hpp"

namespace testing {

inline Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

inline climprice::Surface random_surface(std::mt19937_64& rng, const climprice::DomainPtr& d) {
  return climprice::Surface::make(d, gaussian(rng, static_cast<Eigen::Index>(d->cell_count()), 1).col(0));
}

inline std::vector<climprice::YearMonth> months(climprice::YearMonth first, std::size_t n) {
  std::vector<climprice::YearMonth> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(first + static_cast<std::int64_t>(i));
  return out;
}

inline climprice::SurfaceSeries random_series(std::mt19937_64& rng, const climprice::DomainPtr& d,
                                              climprice::YearMonth first, std::size_t n) {
  return {d, months(first, n), gaussian(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d->valid_count()))};
}

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("climprice_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Largest principal angle between the column spans of A and B (equal column
// counts), from the sines so that tiny angles are resolved.
inline double max_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
  const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(B).householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
  const Eigen::MatrixXd resid = qb - qa * (qa.transpose() * qb);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
  return std::asin(std::min(1.0, svd.singularValues().maxCoeff()));
}

// Bivariate VAR(1) y_t = Phi y_{t-1} + b x_t + u_t with iid N(0, sx^2) shocks x_t
// and N(0, Su) innovations. The first component is the LP target.
struct Var1 {
  Eigen::Matrix2d phi;
  Eigen::Vector2d b;
  Eigen::Matrix2d su;
  double sx = 1.0;

  struct Draw {
    Eigen::VectorXd target, other, shock;
  };

  Draw simulate(std::mt19937_64& rng, Eigen::Index T, Eigen::Index burn = 200) const {
    std::normal_distribution<double> g(0.0, 1.0);
    const Eigen::Matrix2d L = su.llt().matrixL();
    Draw d{Eigen::VectorXd(T), Eigen::VectorXd(T), Eigen::VectorXd(T)};
    Eigen::Vector2d y = Eigen::Vector2d::Zero();
    for (Eigen::Index t = -burn; t < T; ++t) {
      const double x = sx * g(rng);
      const Eigen::Vector2d u = L * Eigen::Vector2d(g(rng), g(rng));
      y = phi * y + b * x + u;
      if (t >= 0) {
        d.target[t] = y[0];
        d.other[t] = y[1];
        d.shock[t] = x;
      }
    }
    return d;
  }

  // (Phi^h b)_1
  double irf(int h) const {
    Eigen::Vector2d v = b;
    for (int j = 0; j < h; ++j) v = phi * v;
    return v[0];
  }

  // Large-sample sd of the shock coefficient in the p = 1 projection of
  // y_{1,t+h} on [1, x_t, y_{t-1}] with n observations.
  double analytic_se(int h, Eigen::Index n) const {
    double s2 = 0.0;
    Eigen::Matrix2d pj = Eigen::Matrix2d::Identity();
    for (int j = 0; j <= h; ++j) {
      if (j < h) s2 += std::pow((pj * b)[0], 2) * sx * sx;
      s2 += (pj * su * pj.transpose())(0, 0);
      pj = phi * pj;
    }
    return std::sqrt(s2 / (static_cast<double>(n) * sx * sx));
  }
};

inline Var1 reference_var() {
  Var1 v;
  v.phi << 0.6, 0.2, -0.1, 0.5;
  v.b << 1.0, 0.5;
  v.su << 1.0, 0.3, 0.3, 0.8;
  v.sx = 1.0;
  return v;
}

inline Eigen::MatrixXd centered(const Eigen::MatrixXd& m) { return m.rowwise() - m.colwise().mean(); }

// Random orthogonal n x n matrix.
inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  return Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(rng, n, n)).householderQ() * Eigen::MatrixXd::Identity(n, n);
}

// Removes from the columns of `m` their sample projection on span(basis), both centered.
inline Eigen::MatrixXd orthogonalize(const Eigen::MatrixXd& m, const Eigen::MatrixXd& basis) {
  const Eigen::MatrixXd b = centered(basis);
  const Eigen::MatrixXd c = centered(m);
  if (b.cols() == 0) return c;
  return c - b * b.colPivHouseholderQr().solve(c);
}

// Y = sY A_Y' + eY N_Y', X = sX A_X' + eX N_X' (X in isometric coordinates) with
// N'A = 0 on both sides and the nuisance series sample-orthogonalized against the
// signals, so the sample cross-covariance has rank K and both canonical
// direction sets lie in the spans found by the cross-covariance decomposition.
struct FactorProblem {
  Eigen::MatrixXd Y;
  Eigen::MatrixXd X;
  Eigen::Index K = 0;
};

inline FactorProblem model_consistent_problem(std::mt19937_64& rng, Eigen::Index p, Eigen::Index n, Eigen::Index K,
                                              Eigen::Index T) {
  std::uniform_real_distribution<double> scale(0.5, 2.0);
  const Eigen::MatrixXd qy = random_orthogonal(rng, p);
  const Eigen::MatrixXd qx = random_orthogonal(rng, n);
  Eigen::MatrixXd sx = gaussian(rng, T, K);
  Eigen::MatrixXd sy = sx * gaussian(rng, K, K) + gaussian(rng, T, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    sx.col(k) *= scale(rng);
    sy.col(k) *= scale(rng);
  }
  Eigen::MatrixXd signals(T, 2 * K);
  signals << sy, sx;
  const Eigen::MatrixXd ey = orthogonalize(gaussian(rng, T, p - K), signals);
  Eigen::MatrixXd all(T, 2 * K + (p - K));
  all << signals, ey;
  const Eigen::MatrixXd ex = orthogonalize(gaussian(rng, T, n - K), all);
  FactorProblem out;
  out.K = K;
  out.Y = sy * qy.leftCols(K).transpose() + ey * qy.rightCols(p - K).transpose();
  out.X = sx * qx.leftCols(K).transpose() + ex * qx.rightCols(n - K).transpose();
  out.Y.rowwise() += gaussian(rng, 1, p).row(0);
  out.X.rowwise() += gaussian(rng, 1, n).row(0);
  return out;
}

inline Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

// Direct CCA between Y and a gridded field given as raw valid-cell values with
// quadrature weights w: maximize corr(<a,Y>, sum_c w_c b_c X_c). Works with the
// raw covariances and explicit inverse square roots; the b directions are
// returned in isometric coordinates (sqrt(w) * b).
struct DirectCca {
  Eigen::VectorXd rho;
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
};

inline DirectCca direct_cca(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& w) {
  const double d = static_cast<double>(Y.rows() - 1);
  const Eigen::MatrixXd yc = centered(Y), xc = centered(X_raw);
  const Eigen::MatrixXd syy = yc.transpose() * yc / d, sxx = xc.transpose() * xc / d, syx = yc.transpose() * xc / d;
  const Eigen::MatrixXd wy = inv_sqrt_spd(syy), wx = inv_sqrt_spd(sxx);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wy * syx * wx, Eigen::ComputeThinU | Eigen::ComputeThinV);
  DirectCca out;
  out.rho = svd.singularValues();
  out.a = wy * svd.matrixU();
  // c = W b is the raw-coordinate direction; sqrt(w) * b = c / sqrt(w)
  out.b = w.cwiseSqrt().cwiseInverse().asDiagonal() * (wx * svd.matrixV());
  return out;
}

// X_t = Y_{t,1} g + white noise with H-norm SNR `snr` (weights sum to one, so
// E||noise||^2 equals the per-cell variance). Returns isometric coordinates.
struct PlantedField {
  Eigen::MatrixXd Y;
  Eigen::MatrixXd X;
  Eigen::VectorXd g;  // unit H-norm, isometric coordinates
};

inline PlantedField planted_rank1(std::mt19937_64& rng, const climprice::DomainPtr& d, Eigen::Index p, Eigen::Index T,
                                  double snr) {
  const auto cells = d->valid_cells();
  const auto n = static_cast<Eigen::Index>(cells.size());
  Eigen::VectorXd raw(n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double c0 = u(rng), c1 = u(rng), c2 = u(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lat = d->cell_lat(cells[static_cast<std::size_t>(i)]);
    const double lon = d->cell_lon(cells[static_cast<std::size_t>(i)]);
    raw[i] = std::sin(c0 * 3.0 * lat + 1.0) + c1 * std::cos(2.0 * lon) + c2;
  }
  Eigen::VectorXd sw(n);
  for (Eigen::Index i = 0; i < n; ++i) sw[i] = std::sqrt(d->weights()[static_cast<Eigen::Index>(cells[static_cast<std::size_t>(i)])]);
  PlantedField out;
  out.g = sw.cwiseProduct(raw);
  out.g /= out.g.norm();
  out.Y = gaussian(rng, T, p);
  const double sigma = std::sqrt(out.Y.col(0).squaredNorm() / static_cast<double>(T) / snr);
  const Eigen::MatrixXd noise_raw = sigma * gaussian(rng, T, n);
  out.X = out.Y.col(0) * out.g.transpose() + noise_raw * sw.asDiagonal();
  return out;
}

}  // namespace testing
