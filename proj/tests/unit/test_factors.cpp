#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "climprice/error.hpp"
#include "climprice/factors.hpp"
#include "support.hpp"

using namespace climprice;
using namespace climprice::factors;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

double rel_max(const Eigen::MatrixXd& a, double scale) { return a.cwiseAbs().maxCoeff() / std::max(scale, 1e-300); }

FactorConfig with_permutation(std::uint64_t seed) {
  FactorConfig c;
  c.permutation = true;
  c.n_permutations = 99;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("associated_factors") {
  TEST_CASE("constant Y has zero covariances and no cross component") {
    std::mt19937_64 rng(41);
    const Eigen::MatrixXd Y = Eigen::MatrixXd::Constant(50, 3, 2.0);
    const Eigen::MatrixXd X = testing::gaussian(rng, 50, 6);
    const CovarianceOperators ops = estimate_covariances(Y, X);
    CHECK(ops.cy.isZero(0.0));
    CHECK(ops.cross.isZero(0.0));
    CHECK(code_of([&] { svd_cross(ops); }) == ErrorCode::ZeroCrossCovariance);
  }

  TEST_CASE("X = g * Y_1 gives C_YX(e_1) = Var(Y_1) g") {
    std::mt19937_64 rng(42);
    const Eigen::MatrixXd Y = testing::gaussian(rng, 80, 2);
    Eigen::VectorXd g = testing::gaussian(rng, 7, 1).col(0);
    g /= g.norm();
    const Eigen::MatrixXd X = Y.col(0) * g.transpose();
    const CovarianceOperators ops = estimate_covariances(Y, X);
    const Eigen::VectorXd lhs = ops.apply_cyx(Eigen::Vector2d(1.0, 0.0));
    CHECK((lhs - ops.cy(0, 0) * g).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("covariances match a double-loop oracle") {
    std::mt19937_64 rng(43);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::MatrixXd Y = testing::gaussian(rng, 30, 3);
      const Eigen::MatrixXd X = 5.0 + testing::gaussian(rng, 30, 4).array();
      const CovarianceOperators ops = estimate_covariances(Y, X);
      for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) {
          double my = 0.0, mx = 0.0;
          for (Eigen::Index t = 0; t < 30; ++t) {
            my += Y(t, i) / 30.0;
            mx += X(t, j) / 30.0;
          }
          double c = 0.0;
          for (Eigen::Index t = 0; t < 30; ++t) c += (Y(t, i) - my) * (X(t, j) - mx);
          CHECK(ops.cross(i, j) == doctest::Approx(c / 29.0).epsilon(1e-12));
        }
      }
      CHECK((ops.apply_cx(Eigen::VectorXd::Unit(4, 1)) - ops.x_centered.transpose() * ops.x_centered.col(1) / 29.0)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
    CHECK(code_of([] { estimate_covariances(Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(4, 2)); }) ==
          ErrorCode::InsufficientSample);
  }

  TEST_CASE("independent Y and X: permutation selection gives K = 0 in most runs") {
    std::mt19937_64 rng(44);
    int zero = 0;
    const int runs = 40;
    for (int rep = 0; rep < runs; ++rep) {
      const CovarianceOperators ops = estimate_covariances(testing::gaussian(rng, 200, 3), testing::gaussian(rng, 200, 40));
      zero += code_of([&] { svd_cross(ops, with_permutation(static_cast<std::uint64_t>(rep))); }) ==
              ErrorCode::ZeroCrossCovariance;
    }
    CHECK(zero >= 0.8 * runs);
  }

  TEST_CASE("rank-1 planted link: K = 1 and beta_1 aligned with g") {
    std::mt19937_64 rng(45);
    auto d = GridDomain::build({48.0, 50.0, 8.0, 11.0}, {0.25, 0.25});
    for (int rep = 0; rep < 10; ++rep) {
      const auto pf = testing::planted_rank1(rng, d, 3, 500, 10.0);
      const PipelineResult res = fit(pf.Y, pf.X, with_permutation(7));
      CHECK(res.cross.K() == 1);
      CHECK(std::abs(res.cross.beta.col(0).dot(pf.g)) > 0.95);
    }
  }

  TEST_CASE("alpha and beta are orthonormal and beta_k = C_YX(alpha_k) / r_k") {
    std::mt19937_64 rng(46);
    const CovarianceOperators ops = estimate_covariances(testing::gaussian(rng, 60, 4), testing::gaussian(rng, 60, 25));
    FactorConfig c;
    c.tol = 1e-6;
    const CrossDecomposition dec = svd_cross(ops, c);
    CHECK(dec.K() == 4);
    const Eigen::MatrixXd ga = dec.alpha.transpose() * dec.alpha;
    const Eigen::MatrixXd gb = dec.beta.transpose() * dec.beta;
    CHECK((ga - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((gb - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
    // singular triplets: C_XY beta_k = r_k alpha_k
    for (Eigen::Index k = 0; k < 4; ++k)
      CHECK((ops.apply_cxy(dec.beta.col(k)) - dec.r[k] * dec.alpha.col(k)).norm() < 1e-10 * dec.r[0]);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(ops.cross).singularValues();
    CHECK((sv - dec.singular_values).cwiseAbs().maxCoeff() < 1e-10 * sv[0]);
  }

  TEST_CASE("relative cutoff and max_k") {
    std::mt19937_64 rng(47);
    const CovarianceOperators ops = estimate_covariances(testing::gaussian(rng, 60, 4), testing::gaussian(rng, 60, 10));
    FactorConfig c;
    c.tol = 0.999999;
    CHECK(svd_cross(ops, c).K() == 1);
    c.tol = 1e-9;
    c.max_k = 2;
    CHECK(svd_cross(ops, c).K() == 2);
  }

  TEST_CASE("extract_factors projections") {
    std::mt19937_64 rng(48);
    const Eigen::MatrixXd Y = testing::gaussian(rng, 40, 3);
    const Eigen::MatrixXd X = testing::gaussian(rng, 40, 5);
    CrossDecomposition dec;
    dec.r = Eigen::Vector3d(3.0, 2.0, 1.0);
    dec.alpha = Eigen::MatrixXd::Identity(3, 3);
    dec.beta = testing::random_orthogonal(rng, 5).leftCols(3);
    CHECK(extract_factors(Y, X, dec, 3).y == Y);

    // a field orthogonal to every beta has zero factor coordinates
    const Eigen::MatrixXd q = testing::random_orthogonal(rng, 5);
    dec.beta = q.leftCols(3);
    const Eigen::MatrixXd Xperp = testing::gaussian(rng, 40, 2) * q.rightCols(2).transpose();
    CHECK(extract_factors(Y, Xperp, dec, 3).x.cwiseAbs().maxCoeff() < 1e-13);
    CHECK_THROWS_AS(extract_factors(Y, X, dec, 4), Error);
  }

  TEST_CASE("planted rank-2 model: the beta span captures at least 90% of the signal") {
    std::mt19937_64 rng(49);
    const Eigen::Index T = 400, n = 60;
    const Eigen::MatrixXd Y = testing::gaussian(rng, T, 4);
    const Eigen::MatrixXd G = testing::random_orthogonal(rng, n).leftCols(2);
    const Eigen::MatrixXd S = Y.leftCols(2) * G.transpose();
    const Eigen::MatrixXd X = S + 0.3 * testing::gaussian(rng, T, n);
    FactorConfig c;
    c.max_k = 2;
    const PipelineResult res = fit(Y, X, c);
    REQUIRE(res.cross.K() == 2);
    const Eigen::MatrixXd Sc = testing::centered(S);
    const Eigen::MatrixXd proj = Sc * res.cross.beta * res.cross.beta.transpose();
    CHECK(proj.squaredNorm() / Sc.squaredNorm() >= 0.9);
  }

  TEST_CASE("perfect linear link gives rho = 1") {
    std::mt19937_64 rng(50);
    FactorCoordinates fc;
    fc.y = testing::gaussian(rng, 100, 1);
    fc.x = 2.0 * fc.y;
    const Eigen::MatrixXd alpha = Eigen::Vector2d(0.6, 0.8);
    const Eigen::MatrixXd beta = Eigen::Vector3d(0.0, 1.0, 0.0);
    const AssociatedFactorSet s = cca_on_factors(fc, alpha, beta);
    CHECK(s.rho[0] == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::VectorXd u = s.y_scores.col(0), v = s.x_scores.col(0);
    CHECK(u.dot(v) / (u.norm() * v.norm()) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("unrelated factors: rho_1 under the 95% permutation quantile in most runs") {
    std::mt19937_64 rng(51);
    const Eigen::MatrixXd alpha = Eigen::MatrixXd::Identity(2, 2), beta = Eigen::MatrixXd::Identity(2, 2);
    int below = 0;
    const int runs = 20;
    for (int rep = 0; rep < runs; ++rep) {
      FactorCoordinates fc{testing::gaussian(rng, 2000, 2), testing::gaussian(rng, 2000, 2)};
      const double rho1 = cca_on_factors(fc, alpha, beta).rho[0];
      std::vector<double> null;
      std::vector<Eigen::Index> order(2000);
      for (int b = 0; b < 99; ++b) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        FactorCoordinates pc{Eigen::MatrixXd(2000, 2), fc.x};
        for (Eigen::Index t = 0; t < 2000; ++t) pc.y.row(t) = fc.y.row(order[static_cast<std::size_t>(t)]);
        null.push_back(cca_on_factors(pc, alpha, beta).rho[0]);
      }
      std::sort(null.begin(), null.end());
      below += rho1 < null[94];
    }
    CHECK(below >= 0.8 * runs);
  }

  TEST_CASE("ill-conditioned factor covariance is reported") {
    std::mt19937_64 rng(52);
    FactorCoordinates fc;
    fc.y = testing::gaussian(rng, 50, 2);
    fc.y.col(1) = fc.y.col(0);
    fc.x = testing::gaussian(rng, 50, 2);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
    CHECK(code_of([&] { cca_on_factors(fc, I, I); }) == ErrorCode::SingularFactorCovariance);
  }

  TEST_CASE("two-stage pipeline equals direct CCA on a 4-cell grid") {
    std::mt19937_64 rng(53);
    auto d = GridDomain::build({40.0, 60.0, 0.0, 20.0}, {10.0, 10.0});
    REQUIRE(d->valid_count() == 4);
    const Eigen::VectorXd w = d->weights();
    for (Eigen::Index p : {2, 3}) {
      const testing::FactorProblem prob = testing::model_consistent_problem(rng, p, 4, p - 1, 500);
      FactorConfig c;
      c.tol = 1e-4;
      const PipelineResult res = fit(prob.Y, prob.X, c);
      REQUIRE(res.cross.K() == prob.K);
      const Eigen::MatrixXd X_raw = prob.X * w.cwiseSqrt().cwiseInverse().asDiagonal();
      const testing::DirectCca ref = testing::direct_cca(prob.Y, X_raw, w);
      const Eigen::Index K = prob.K;
      CHECK((res.factors.rho - ref.rho.head(K)).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(testing::max_principal_angle(res.factors.a, ref.a.leftCols(K)) < 1e-8);
      CHECK(testing::max_principal_angle(res.factors.b, ref.b.leftCols(K)) < 1e-8);
    }
  }

  TEST_CASE("decomposition contracts over 1000 random problems") {
    std::mt19937_64 rng(54);
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::Index p = 2 + static_cast<Eigen::Index>(rng() % 4);
      const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng() % 20);
      const Eigen::Index T = 30 + static_cast<Eigen::Index>(rng() % 50);
      Eigen::MatrixXd Y = testing::gaussian(rng, T, p);
      Eigen::MatrixXd X = testing::gaussian(rng, T, n);
      X.leftCols(1) += 0.7 * Y.col(0);
      FactorConfig c;
      c.tol = 0.05;
      PipelineResult res;
      try {
        res = fit(Y, X, c);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingularFactorCovariance);
        continue;
      }
      const Eigen::Index K = res.cross.K();
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(K, K);
      CHECK((res.cross.alpha.transpose() * res.cross.alpha - I).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((res.cross.beta.transpose() * res.cross.beta - I).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(res.factors.rho.minCoeff() >= 0.0);
      CHECK(res.factors.rho.maxCoeff() <= 1.0 + 1e-10);

      // residual of Y off span(alpha) is uncorrelated with every field factor
      const Eigen::MatrixXd yc = res.ops.y_centered;
      const Eigen::MatrixXd resid = yc - yc * res.cross.alpha * res.cross.alpha.transpose();
      const Eigen::MatrixXd xf = res.ops.x_centered * res.cross.beta;
      const double scale = yc.norm() * xf.norm();
      CHECK(rel_max(resid.transpose() * xf, 1.0) < 1e-10 * scale);

      // canonical regression: slope rho_k and residuals uncorrelated with the partners
      const Eigen::MatrixXd& u = res.factors.y_scores;
      const Eigen::MatrixXd& v = res.factors.x_scores;
      const double dn = static_cast<double>(T - 1);
      CHECK(((v.transpose() * v) / dn - I).cwiseAbs().maxCoeff() < 1e-8);
      for (Eigen::Index k = 0; k < K; ++k) {
        const double slope = u.col(k).dot(v.col(k)) / v.col(k).squaredNorm();
        CHECK(slope == doctest::Approx(res.factors.rho[k]).epsilon(1e-9));
        const Eigen::VectorXd e = u.col(k) - slope * v.col(k);
        CHECK((v.transpose() * e).cwiseAbs().maxCoeff() < 1e-10 * e.norm() * v.norm());
      }
    }
  }

  TEST_CASE("permutation null is deterministic for a seed") {
    std::mt19937_64 rng(55);
    const CovarianceOperators ops = estimate_covariances(testing::gaussian(rng, 50, 3), testing::gaussian(rng, 50, 80));
    const Eigen::VectorXd a = permutation_null(ops, 49, 0.05, 9);
    const Eigen::VectorXd b = permutation_null(ops, 49, 0.05, 9);
    CHECK(a == b);
    CHECK(a[0] >= a[1]);
    CHECK(permutation_null(ops, 49, 0.05, 10) != a);
  }

  TEST_CASE("field spectrum through the Gram matrix matches C_X") {
    std::mt19937_64 rng(56);
    const CovarianceOperators ops = estimate_covariances(testing::gaussian(rng, 12, 2), testing::gaussian(rng, 12, 30));
    const FieldSpectrum fs = field_spectrum(ops);
    CHECK(fs.lambda.size() == 11);  // centered rank
    const Eigen::MatrixXd cx = ops.x_centered.transpose() * ops.x_centered / 11.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cx);
    const Eigen::VectorXd ref = es.eigenvalues().reverse().head(11);
    CHECK((fs.lambda - ref).cwiseAbs().maxCoeff() < 1e-12 * ref[0]);
    CHECK((fs.phi.transpose() * fs.phi - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < 11; ++i) CHECK((cx * fs.phi.col(i) - fs.lambda[i] * fs.phi.col(i)).norm() < 1e-10 * ref[0]);
  }

  TEST_CASE("regularity: single-direction dependence plateaus after the first term") {
    std::mt19937_64 rng(57);
    const Eigen::MatrixXd X = testing::gaussian(rng, 200, 15) * Eigen::VectorXd::LinSpaced(15, 3.0, 0.5).asDiagonal();
    const CovarianceOperators ox = estimate_covariances(Eigen::MatrixXd(testing::gaussian(rng, 200, 1)), X);
    const FieldSpectrum fs = field_spectrum(ox);
    const Eigen::MatrixXd Y = fs.scores.col(0) * Eigen::RowVector2d(1.0, -0.5);
    const RegularityReport rep = regularity_diagnostic(estimate_covariances(Y, X));
    for (Eigen::Index i = 1; i < rep.squared_sums.rows(); ++i)
      CHECK(rep.squared_sums(i, 0) == doctest::Approx(rep.squared_sums(0, 0)).epsilon(1e-9));
    CHECK_FALSE(rep.warning());
  }

  TEST_CASE("regularity: i^-2 loadings plateau, lambda^1/2 loadings are flagged") {
    std::mt19937_64 rng(58);
    const Eigen::Index T = 300, N = 20, n = 40;
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(testing::centered(testing::gaussian(rng, T, N)))
                                  .householderQ() * Eigen::MatrixXd::Identity(T, N);
    Eigen::VectorXd lambda(N);
    for (Eigen::Index i = 0; i < N; ++i) lambda[i] = std::pow(static_cast<double>(i + 1), -2.0);
    // sample-orthogonal scores with variances lambda
    const Eigen::MatrixXd Z = Q * (lambda * static_cast<double>(T - 1)).cwiseSqrt().asDiagonal();
    const Eigen::MatrixXd X = Z * testing::random_orthogonal(rng, n).leftCols(N).transpose();
    for (const bool borderline : {false, true}) {
      Eigen::VectorXd c(N);
      for (Eigen::Index i = 0; i < N; ++i) c[i] = borderline ? std::sqrt(lambda[i]) : lambda[i];
      const Eigen::MatrixXd Y = Z * lambda.cwiseInverse().cwiseProduct(c);
      const RegularityReport rep = regularity_diagnostic(estimate_covariances(Y, X));
      CHECK(rep.lambda.size() == N);
      CHECK(rep.warning() == borderline);
      CHECK(rep.plain_flag[0] == true);  // first-power sums diverge in both cases
    }
  }

  TEST_CASE("regularity: independent Y terms shrink with sample size") {
    std::mt19937_64 rng(59);
    auto mean_first = [&](Eigen::Index T) {
      double acc = 0.0;
      for (int rep = 0; rep < 20; ++rep)
        acc += regularity_diagnostic(estimate_covariances(testing::gaussian(rng, T, 2), testing::gaussian(rng, T, 10)))
                   .squared_sums(0, 0);
      return acc / 20.0;
    };
    CHECK(mean_first(200) > 3.0 * mean_first(2000));
  }

  TEST_CASE("surface front end drops zero-variance sectors") {
    std::mt19937_64 rng(60);
    auto d = GridDomain::build({48.0, 50.0, 8.0, 11.0}, {0.5, 0.5});
    const auto pf = testing::planted_rank1(rng, d, 2, 300, 10.0);
    SectorPanel panel;
    panel.times = testing::months(YearMonth(2000, 1), 300);
    panel.ids = {"a", "flat", "b"};
    panel.values.resize(300, 3);
    panel.values.col(0) = pf.Y.col(0);
    panel.values.col(1).setConstant(4.0);
    panel.values.col(2) = pf.Y.col(1);
    SurfaceSeries X{d, panel.times, pf.X * d->sqrt_valid_weights().cwiseInverse().asDiagonal()};
    const SurfaceFactorResult r = fit_surface(panel, X, with_permutation(3));
    CHECK(r.sectors == std::vector<std::string>{"a", "b"});
    CHECK(r.dropped_sectors == std::vector<std::string>{"flat"});
    REQUIRE(r.b_surfaces.size() == 1);
    CHECK(std::abs(inner_product(r.beta_surfaces[0], unembed(d, pf.g))) > 0.95);
  }
}
