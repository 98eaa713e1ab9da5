#include "climprice/factors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "climprice/error.hpp"

namespace climprice::factors {

namespace {

// Eigen-decomposition of a symmetric matrix with eigenvalues sorted descending.
void sym_eigen_desc(const Eigen::MatrixXd& S, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  if (es.info() != Eigen::Success) fail(ErrorCode::SingularFactorCovariance, "eigen-decomposition did not converge");
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

// Flip columns so the largest-magnitude entry is positive.
void fix_signs(Eigen::MatrixXd& v, Eigen::MatrixXd* partner = nullptr) {
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    Eigen::Index idx = 0;
    v.col(k).cwiseAbs().maxCoeff(&idx);
    if (v(idx, k) < 0.0) {
      v.col(k) *= -1.0;
      if (partner) partner->col(k) *= -1.0;
    }
  }
}

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& S, double max_condition, const char* which) {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  sym_eigen_desc(S, values, vectors);
  const double top = values[0];
  const double bottom = values[values.size() - 1];
  if (!(top > 0.0) || !(bottom > 0.0) || top / bottom >= max_condition) {
    fail(ErrorCode::SingularFactorCovariance,
         std::string(which) + " factor covariance is singular or ill-conditioned (condition " +
             std::to_string(bottom > 0.0 ? top / bottom : INFINITY) + "); lower K");
  }
  return vectors * values.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
}

Eigen::VectorXd singular_values_of(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  Eigen::VectorXd mu = es.eigenvalues().reverse();
  return mu.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

Eigen::VectorXd CovarianceOperators::apply_cx(const Eigen::VectorXd& f) const {
  return x_centered.transpose() * (x_centered * f) / static_cast<double>(n_obs - 1);
}

Eigen::MatrixXd CovarianceOperators::gram() const {
  return x_centered * x_centered.transpose() / static_cast<double>(n_obs - 1);
}

CovarianceOperators estimate_covariances(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X) {
  if (Y.rows() != X.rows()) fail(ErrorCode::NonConformable, "Y and X have different numbers of periods");
  const Eigen::Index T = Y.rows();
  if (T < Y.cols() + 2) {
    fail(ErrorCode::InsufficientSample, std::to_string(T) + " periods for " + std::to_string(Y.cols()) + " sectors");
  }
  if (!Y.allFinite() || !X.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite observations");
  CovarianceOperators ops;
  ops.n_obs = T;
  ops.y_mean = Y.colwise().mean();
  ops.x_mean = X.colwise().mean();
  ops.y_centered = Y.rowwise() - ops.y_mean;
  ops.x_centered = X.rowwise() - ops.x_mean;
  const double denom = static_cast<double>(T - 1);
  ops.cy = ops.y_centered.transpose() * ops.y_centered / denom;
  ops.cross = ops.y_centered.transpose() * ops.x_centered / denom;
  return ops;
}

Eigen::VectorXd permutation_null(const CovarianceOperators& ops, int n_permutations, double alpha, std::uint64_t seed) {
  if (n_permutations < 1) fail(ErrorCode::InvalidArgument, "need at least one permutation");
  const Eigen::Index T = ops.n_obs;
  const Eigen::Index p = ops.p();
  const double denom = static_cast<double>(T - 1);
  const bool use_gram = ops.dim() > T;
  const Eigen::MatrixXd G = use_gram ? ops.gram() : Eigen::MatrixXd();

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(T));
  Eigen::MatrixXd draws(n_permutations, p);
  Eigen::MatrixXd Yp(T, p);
  for (int b = 0; b < n_permutations; ++b) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
    for (Eigen::Index t = 0; t < T; ++t) Yp.row(t) = ops.y_centered.row(order[static_cast<std::size_t>(t)]);
    Eigen::MatrixXd M;
    if (use_gram) {
      M = Yp.transpose() * G * Yp / denom;
    } else {
      const Eigen::MatrixXd cross = Yp.transpose() * ops.x_centered / denom;
      M = cross * cross.transpose();
    }
    draws.row(b) = singular_values_of(M).transpose();
  }
  Eigen::VectorXd q(p);
  const auto rank = static_cast<Eigen::Index>(std::ceil((1.0 - alpha) * (n_permutations + 1))) - 1;
  const Eigen::Index idx = std::clamp<Eigen::Index>(rank, 0, n_permutations - 1);
  for (Eigen::Index k = 0; k < p; ++k) {
    std::vector<double> col(draws.col(k).data(), draws.col(k).data() + n_permutations);
    std::nth_element(col.begin(), col.begin() + idx, col.end());
    q[k] = col[static_cast<std::size_t>(idx)];
  }
  return q;
}

CrossDecomposition svd_cross(const CovarianceOperators& ops, const FactorConfig& config) {
  const Eigen::MatrixXd M = ops.cross * ops.cross.transpose();
  Eigen::VectorXd mu;
  Eigen::MatrixXd vecs;
  sym_eigen_desc(M, mu, vecs);
  CrossDecomposition dec;
  dec.singular_values = mu.cwiseMax(0.0).cwiseSqrt();
  const double r1 = dec.singular_values[0];
  Eigen::Index K = 0;
  if (r1 > 0.0 && std::isfinite(r1)) {
    while (K < dec.singular_values.size() && dec.singular_values[K] > config.tol * r1) ++K;
  }
  dec.k_cutoff = K;
  if (config.permutation && K > 0) {
    dec.null_quantiles = permutation_null(ops, config.n_permutations, config.alpha, config.seed);
    Eigen::Index kp = 0;
    while (kp < K && dec.singular_values[kp] > (*dec.null_quantiles)[kp]) ++kp;
    K = kp;
  }
  if (config.max_k) K = std::min(K, *config.max_k);
  if (K == 0) {
    fail(ErrorCode::ZeroCrossCovariance, "no cross-covariance component survives selection (r_1 = " + std::to_string(r1) + ")");
  }
  dec.r = dec.singular_values.head(K);
  dec.alpha = vecs.leftCols(K);
  fix_signs(dec.alpha);
  dec.beta = ops.cross.transpose() * dec.alpha * dec.r.cwiseInverse().asDiagonal();
  return dec;
}

FactorCoordinates extract_factors(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, const CrossDecomposition& dec,
                                  Eigen::Index K) {
  if (K < 1 || K > dec.K()) fail(ErrorCode::InvalidArgument, "K out of range");
  if (Y.cols() != dec.alpha.rows() || X.cols() != dec.beta.rows()) {
    fail(ErrorCode::NonConformable, "data dimensions differ from the decomposition");
  }
  return FactorCoordinates{Y * dec.alpha.leftCols(K), X * dec.beta.leftCols(K)};
}

AssociatedFactorSet cca_on_factors(const FactorCoordinates& coords, const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& beta,
                                   double max_condition) {
  const Eigen::Index T = coords.y.rows();
  const Eigen::Index K = coords.y.cols();
  if (K < 1 || coords.x.cols() != K || coords.x.rows() != T) fail(ErrorCode::InvalidArgument, "factor coordinates malformed");
  if (alpha.cols() != K || beta.cols() != K) fail(ErrorCode::NonConformable, "direction count differs from K");
  if (T < K + 2) fail(ErrorCode::InsufficientSample, "too few periods for the factor CCA");
  const Eigen::MatrixXd yc = coords.y.rowwise() - coords.y.colwise().mean();
  const Eigen::MatrixXd xc = coords.x.rowwise() - coords.x.colwise().mean();
  const double denom = static_cast<double>(T - 1);
  const Eigen::MatrixXd syy = yc.transpose() * yc / denom;
  const Eigen::MatrixXd sxx = xc.transpose() * xc / denom;
  const Eigen::MatrixXd syx = yc.transpose() * xc / denom;
  const Eigen::MatrixXd wy = inverse_sqrt(syy, max_condition, "price-side");
  const Eigen::MatrixXd wx = inverse_sqrt(sxx, max_condition, "field-side");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wy * syx * wx, Eigen::ComputeFullU | Eigen::ComputeFullV);

  AssociatedFactorSet out;
  out.rho = svd.singularValues();
  out.y_rotation = wy * svd.matrixU();
  out.x_rotation = wx * svd.matrixV();
  out.a = alpha * out.y_rotation;
  out.b = beta * out.x_rotation;
  fix_signs(out.a, &out.b);
  // keep the rotations consistent with the sign-fixed directions
  for (Eigen::Index k = 0; k < K; ++k) {
    const Eigen::VectorXd a_again = alpha * out.y_rotation.col(k);
    if (a_again.dot(out.a.col(k)) < 0.0) {
      out.y_rotation.col(k) *= -1.0;
      out.x_rotation.col(k) *= -1.0;
    }
  }
  out.y_scores = yc * out.y_rotation;
  out.x_scores = xc * out.x_rotation;
  return out;
}

PipelineResult fit(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, const FactorConfig& config) {
  PipelineResult res;
  res.ops = estimate_covariances(Y, X);
  res.cross = svd_cross(res.ops, config);
  const FactorCoordinates coords = extract_factors(res.ops.y_centered, res.ops.x_centered, res.cross, res.cross.K());
  res.factors = cca_on_factors(coords, res.cross.alpha, res.cross.beta, config.max_condition);
  return res;
}

FieldSpectrum field_spectrum(const CovarianceOperators& ops, double rel_floor) {
  const double denom = static_cast<double>(ops.n_obs - 1);
  const bool use_gram = ops.dim() > ops.n_obs;
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  if (use_gram) {
    sym_eigen_desc(ops.gram(), values, vectors);
  } else {
    sym_eigen_desc(ops.x_centered.transpose() * ops.x_centered / denom, values, vectors);
  }
  Eigen::Index N = 0;
  if (values.size() > 0 && values[0] > 0.0) {
    while (N < values.size() && values[N] > rel_floor * values[0]) ++N;
  }
  FieldSpectrum out;
  out.lambda = values.head(N);
  if (use_gram) {
    out.scores = vectors.leftCols(N) * (out.lambda * denom).cwiseSqrt().asDiagonal();
    out.phi = ops.x_centered.transpose() * vectors.leftCols(N) * (out.lambda * denom).cwiseSqrt().cwiseInverse().asDiagonal();
  } else {
    out.phi = vectors.leftCols(N);
    out.scores = ops.x_centered * out.phi;
  }
  return out;
}

PriceSpectrum price_spectrum(const CovarianceOperators& ops) {
  PriceSpectrum out;
  sym_eigen_desc(ops.cy, out.gamma, out.psi);
  out.gamma = out.gamma.cwiseMax(0.0);
  fix_signs(out.psi);
  return out;
}

bool RegularityReport::warning() const {
  return std::any_of(squared_flag.begin(), squared_flag.end(), [](bool b) { return b; });
}

RegularityReport regularity_diagnostic(const CovarianceOperators& ops, double tail_threshold) {
  const FieldSpectrum fs = field_spectrum(ops);
  const PriceSpectrum ps = price_spectrum(ops);
  RegularityReport rep;
  rep.tail_threshold = tail_threshold;
  rep.lambda = fs.lambda;
  rep.gamma = ps.gamma;
  const Eigen::Index N = fs.lambda.size();
  const Eigen::Index p = ops.p();
  const double denom = static_cast<double>(ops.n_obs - 1);
  // cross moments c_ij, N x p
  const Eigen::MatrixXd c = fs.scores.transpose() * (ops.y_centered * ps.psi) / denom;
  rep.squared_sums = Eigen::MatrixXd::Zero(N, p);
  rep.plain_sums = Eigen::MatrixXd::Zero(N, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sq = 0.0, pl = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      sq += c(i, j) * c(i, j) / fs.lambda[i];
      pl += std::abs(c(i, j)) / fs.lambda[i];
      rep.squared_sums(i, j) = sq;
      rep.plain_sums(i, j) = pl;
    }
  }
  auto tail_share = [&](const Eigen::MatrixXd& sums, Eigen::Index j) {
    if (N < 2) return 0.0;
    const double total = sums(N - 1, j);
    if (!(total > 0.0)) return 0.0;
    return (total - sums(N / 2 - 1, j)) / total;
  };
  rep.squared_tail_share.resize(p);
  rep.plain_tail_share.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    rep.squared_tail_share[j] = tail_share(rep.squared_sums, j);
    rep.plain_tail_share[j] = tail_share(rep.plain_sums, j);
    rep.squared_flag.push_back(rep.squared_tail_share[j] > tail_threshold);
    rep.plain_flag.push_back(rep.plain_tail_share[j] > tail_threshold);
  }
  return rep;
}

SurfaceFactorResult fit_surface(const SectorPanel& Y, const SurfaceSeries& X, const FactorConfig& config) {
  X.validate();
  if (Y.times != X.times) fail(ErrorCode::NonConformable, "sector panel and surface series are not aligned");
  SurfaceFactorResult out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < Y.values.cols(); ++j) {
    if (Y.values.col(j).maxCoeff() == Y.values.col(j).minCoeff()) {
      out.dropped_sectors.push_back(Y.ids[static_cast<std::size_t>(j)]);
    } else {
      keep.push_back(j);
      out.sectors.push_back(Y.ids[static_cast<std::size_t>(j)]);
    }
  }
  if (keep.empty()) fail(ErrorCode::NoSectorsRemain, "every sector has zero variance");
  Eigen::MatrixXd Yk(Y.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) Yk.col(static_cast<Eigen::Index>(k)) = Y.values.col(keep[k]);
  out.pipeline = fit(Yk, embed(X), config);
  for (Eigen::Index k = 0; k < out.pipeline.factors.K(); ++k) {
    out.b_surfaces.push_back(unembed(X.domain, out.pipeline.factors.b.col(k)));
    out.beta_surfaces.push_back(unembed(X.domain, out.pipeline.cross.beta.col(k)));
  }
  return out;
}

}  // namespace climprice::factors
