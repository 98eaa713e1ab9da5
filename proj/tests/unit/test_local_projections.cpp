#include <doctest.h>

#include <cmath>

#include "climprice/error.hpp"
#include "climprice/local_projections.hpp"
#include "support.hpp"

using namespace climprice;
using namespace climprice::lp;

namespace {

LpSpec fixed(int p, int h_max) {
  LpSpec s;
  s.h_max = h_max;
  s.p_max = p;
  s.l_max = 1;
  s.lag_selection = LagSelection::Fixed;
  return s;
}

LpInputs from_draw(const testing::Var1::Draw& d) {
  LpInputs in;
  in.target = d.target;
  in.shock = d.shock;
  in.endogenous = d.other;
  in.endogenous_names = {"other"};
  return in;
}

Eigen::VectorXd ar1(std::mt19937_64& rng, Eigen::Index T, double phi) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd y(T);
  double v = 0.0;
  for (Eigen::Index t = -50; t < T; ++t) {
    v = phi * v + g(rng);
    if (t >= 0) y[t] = v;
  }
  return y;
}

}  // namespace

TEST_SUITE("local_projections") {
  TEST_CASE("white-noise target: estimate within 2 SE of zero in at least 90% of 500 runs") {
    std::mt19937_64 rng(31);
    int inside = 0;
    for (int rep = 0; rep < 500; ++rep) {
      LpInputs in;
      in.target = testing::gaussian(rng, 300, 1).col(0);
      in.shock = ar1(rng, 300, 0.3);
      const HorizonEstimate e = fit_horizon(in, 2, 1, 0, fixed(1, 2));
      inside += std::abs(e.estimate) <= 2.0 * e.se;
    }
    CHECK(inside >= 450);
  }

  TEST_CASE("known contemporaneous coefficient is recovered within 3 SE") {
    std::mt19937_64 rng(32);
    LpInputs in;
    in.shock = testing::gaussian(rng, 400, 1).col(0);
    in.target = 0.5 * in.shock + 0.5 * testing::gaussian(rng, 400, 1).col(0);
    const HorizonEstimate e = fit_horizon(in, 0, 1, 0, fixed(1, 1));
    CHECK(std::abs(e.estimate - 0.5) < 3.0 * e.se);
    CHECK(e.lo < e.estimate);
    CHECK(e.hi > e.estimate);
    CHECK(e.hi - e.estimate == doctest::Approx(normal_quantile(0.95) * e.se).epsilon(1e-12));
  }

  TEST_CASE("VAR(1) data: IRF within 3 analytic SE of Phi^h b at every h in most runs") {
    std::mt19937_64 rng(33);
    const testing::Var1 var = testing::reference_var();
    const int runs = 40;
    std::vector<int> inside(13, 0);
    for (int rep = 0; rep < runs; ++rep) {
      const IrfResult res = irf(from_draw(var.simulate(rng, 2000)), fixed(1, 12));
      REQUIRE(res.horizons.size() == 13);
      for (const auto& e : res.horizons) {
        const double se = var.analytic_se(e.h, e.n_obs);
        inside[static_cast<std::size_t>(e.h)] += std::abs(e.estimate - var.irf(e.h)) < 3.0 * se;
        // HAC and analytic values agree in large samples
        CHECK(e.se == doctest::Approx(se).epsilon(0.25));
      }
    }
    for (int h = 0; h <= 12; ++h) CHECK(inside[static_cast<std::size_t>(h)] >= runs - 2);
  }

  TEST_CASE("flipping the shock sign negates the IRF exactly") {
    std::mt19937_64 rng(34);
    const auto draw = testing::reference_var().simulate(rng, 500);
    LpInputs in = from_draw(draw);
    const IrfResult a = irf(in, fixed(2, 6));
    in.shock = -in.shock;
    const IrfResult b = irf(in, fixed(2, 6));
    for (std::size_t h = 0; h < a.horizons.size(); ++h) {
      CHECK(b.horizons[h].estimate == doctest::Approx(-a.horizons[h].estimate).epsilon(1e-12));
      CHECK(b.horizons[h].se == doctest::Approx(a.horizons[h].se).epsilon(1e-10));
    }
  }

  TEST_CASE("constant shock column is rank deficient") {
    LpInputs in;
    in.target = Eigen::VectorXd::LinSpaced(100, 0.0, 1.0).array().sin();
    in.shock = Eigen::VectorXd::Constant(100, 2.0);
    try {
      fit_horizon(in, 0, 1, 0, fixed(1, 1));
      FAIL("expected RankDeficientDesign");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RankDeficientDesign);
      CHECK(std::string(e.what()).find("shock_lag0") != std::string::npos);
    }
  }

  TEST_CASE("too few observations") {
    LpInputs in;
    std::mt19937_64 rng(35);
    in.target = testing::gaussian(rng, 15, 1).col(0);
    in.shock = testing::gaussian(rng, 15, 1).col(0);
    CHECK_THROWS_AS(fit_horizon(in, 3, 2, 0, fixed(2, 3)), Error);
  }

  TEST_CASE("HAC with bandwidth 0 equals the HC1 sandwich") {
    std::mt19937_64 rng(36);
    const Eigen::MatrixXd X = [&] {
      Eigen::MatrixXd m = testing::gaussian(rng, 80, 3);
      m.col(0).setOnes();
      return m;
    }();
    const Eigen::VectorXd y = X * Eigen::Vector3d(1.0, -2.0, 0.5) + testing::gaussian(rng, 80, 1).col(0);
    const OlsFit fit = ols(X, y, {"c", "a", "b"});
    const Eigen::MatrixXd inv = (X.transpose() * X).inverse();
    CHECK((fit.xtx_inv - inv).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
    for (Eigen::Index t = 0; t < 80; ++t) meat += fit.residuals[t] * fit.residuals[t] * X.row(t).transpose() * X.row(t);
    const Eigen::MatrixXd V = inv * meat * inv * (80.0 / 77.0);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(hac_variance(X, fit, j, 0) == doctest::Approx(V(j, j)).epsilon(1e-10));
  }

  TEST_CASE("OLS names every collinear column") {
    Eigen::MatrixXd X(20, 4);
    X.col(0).setOnes();
    X.col(1) = Eigen::VectorXd::LinSpaced(20, 0.0, 19.0);
    X.col(2) = 3.0 * X.col(1) - X.col(0);
    X.col(3) = X.col(1).array().square();
    try {
      ols(X, X.col(3), {"one", "t", "dup", "t2"});
      FAIL("expected RankDeficientDesign");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::RankDeficientDesign);
      CHECK(std::string(e.what()).find("dup") != std::string::npos);
    }
  }

  TEST_CASE("AIC selects p = 1 for AR(1) and white-noise targets in most of 200 runs") {
    std::mt19937_64 rng(37);
    LpSpec spec;
    spec.p_max = 4;
    spec.l_max = 1;
    int ar_hits = 0, wn_hits = 0;
    for (int rep = 0; rep < 200; ++rep) {
      LpInputs in;
      in.target = ar1(rng, 300, 0.7);
      in.shock = testing::gaussian(rng, 300, 1).col(0);
      ar_hits += select_lags(in, spec).p == 1;
      in.target = testing::gaussian(rng, 300, 1).col(0);
      wn_hits += select_lags(in, spec).p == 1;
    }
    CHECK(ar_hits > 100);
    CHECK(wn_hits > 100);
  }

  TEST_CASE("AIC value is n ln(SSR/n) + 2k on the common window") {
    std::mt19937_64 rng(38);
    LpInputs in;
    in.target = ar1(rng, 200, 0.5);
    in.shock = testing::gaussian(rng, 200, 1).col(0);
    LpSpec spec;
    spec.p_max = 3;
    const LagChoice c = select_lags(in, spec);
    const HorizonEstimate e = fit_horizon(in, 0, c.p, 0, spec, Eigen::Index{3});
    const double n = static_cast<double>(e.n_obs);
    CHECK(e.n_obs == 197);
    CHECK(c.aic == doctest::Approx(n * std::log(e.ssr / n) + 2.0 * static_cast<double>(e.n_regressors)).epsilon(1e-12));
  }

  TEST_CASE("battery cardinality and isolation of failing cells") {
    std::mt19937_64 rng(39);
    SectorPanel panel;
    panel.times = testing::months(YearMonth(2001, 1), 150);
    panel.ids = {"A", "B", "C"};
    panel.values = testing::gaussian(rng, 150, 3);
    panel.values.col(2).setConstant(1.0);
    BatteryInputs in;
    in.sectors = &panel;
    std::vector<NamedShock> shocks{{"all", testing::gaussian(rng, 150, 1).col(0)},
                                   {"summer", testing::gaussian(rng, 150, 1).col(0)}};
    LpSpec spec = fixed(1, 3);
    const BatteryTable t = run_battery(in, shocks, spec);
    CHECK(t.size() == 6);
    for (const auto& [key, cell] : t) {
      if (key.first == "C") {
        CHECK_FALSE(cell.result.has_value());
        CHECK_FALSE(cell.error.empty());
      } else {
        CHECK(cell.result.has_value());
      }
    }
    // threading does not change results
    const BatteryTable t2 = run_battery(in, shocks, spec, 3);
    for (const auto& [key, cell] : t) {
      if (!cell.result) continue;
      for (std::size_t h = 0; h < cell.result->horizons.size(); ++h)
        CHECK(t2.at(key).result->horizons[h].estimate == cell.result->horizons[h].estimate);
    }
  }

  TEST_CASE("planted sector is the only one whose CI excludes zero at the planted horizon") {
    std::mt19937_64 rng(40);
    std::normal_distribution<double> g(0.0, 1.0);
    const int lag = 3;
    int good = 0;
    const int runs = 50;
    for (int rep = 0; rep < runs; ++rep) {
      const Eigen::Index T = 300;
      SectorPanel panel;
      panel.times = testing::months(YearMonth(2001, 1), static_cast<std::size_t>(T));
      panel.ids = {"planted", "null"};
      panel.values.resize(T, 2);
      const Eigen::VectorXd x = testing::gaussian(rng, T, 1).col(0);
      double a = 0.0, b = 0.0;
      for (Eigen::Index t = 0; t < T; ++t) {
        a = 0.5 * a + (t >= lag ? 0.8 * x[t - lag] : 0.0) + g(rng);
        b = 0.5 * b + g(rng);
        panel.values(t, 0) = a;
        panel.values(t, 1) = b;
      }
      BatteryInputs in;
      in.sectors = &panel;
      LpSpec spec = fixed(2, lag);
      spec.ci_level = 0.95;
      const BatteryTable t = run_battery(in, {{"all", x}}, spec);
      const auto& ep = t.at({"planted", "all"}).result->horizons[lag];
      const auto& en = t.at({"null", "all"}).result->horizons[lag];
      good += (ep.lo > 0.0 || ep.hi < 0.0) && (en.lo <= 0.0 && en.hi >= 0.0);
    }
    CHECK(good >= 0.8 * runs);
  }

  TEST_CASE("irf CSV layout") {
    IrfResult r;
    r.lags = {2, 1, 0.0};
    r.horizons.push_back(HorizonEstimate{0, 0.5, 0.1, 0.1, 0.3, 0.7});
    CHECK(format_irf_csv("CP01", "all", r) == "sector,variant,h,estimate,se,lo,hi,p,l\nCP01,all,0,0.5,0.1,0.3,0.7,2,1\n");
  }

  TEST_CASE("LpSpec validation") {
    LpSpec s;
    s.h_max = 0;
    CHECK_THROWS_AS(s.validate(), Error);
    s = LpSpec{};
    s.ci_level = 1.0;
    CHECK_THROWS_AS(s.validate(), Error);
  }
}
