#include "climprice/local_projections.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "climprice/csv.hpp"
#include "climprice/error.hpp"

namespace climprice::lp {

void LpSpec::validate() const {
  if (h_max < 1) fail(ErrorCode::InvalidArgument, "h_max must be >= 1");
  if (p_max < 1) fail(ErrorCode::InvalidArgument, "p_max must be >= 1");
  if (l_max < 1) fail(ErrorCode::InvalidArgument, "l_max must be >= 1");
  if (r < 0) fail(ErrorCode::InvalidArgument, "r must be >= 0");
  if (!(ci_level > 0.0 && ci_level < 1.0)) fail(ErrorCode::InvalidArgument, "ci_level must be in (0,1)");
}

void LpInputs::validate() const {
  const Eigen::Index T = target.size();
  if (shock.size() != T) fail(ErrorCode::NonConformable, "shock length differs from target");
  if (endogenous.cols() > 0 && endogenous.rows() != T) fail(ErrorCode::NonConformable, "endogenous block length differs");
  if (controls.cols() > 0 && controls.rows() != T) fail(ErrorCode::NonConformable, "control block length differs");
  if (!target.allFinite() || !shock.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite target or shock");
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

namespace {

// Indices of columns that are (numerically) in the span of earlier columns.
std::vector<std::string> offending_columns(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  std::vector<std::string> bad;
  Eigen::MatrixXd basis(X.rows(), 0);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    Eigen::VectorXd v = X.col(j);
    const double scale = v.norm();
    if (scale == 0.0) {
      bad.push_back(names[static_cast<std::size_t>(j)]);
      continue;
    }
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
    }
    if (v.norm() <= 1e-9 * scale) {
      bad.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = v / v.norm();
    }
  }
  return bad;
}

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  Eigen::Index shock_col = 1;
};

Eigen::Index max_lag(int p, int l, int r) { return std::max({p, l, r}); }

Design build_design(const LpInputs& in, int h, int p, int l, const LpSpec& spec, Eigen::Index start) {
  const Eigen::Index T = in.size();
  const Eigen::Index last = T - 1 - h;
  const Eigen::Index n = last - start + 1;
  const Eigen::Index m_endo = 1 + in.endogenous.cols();
  const Eigen::Index m_ctrl = in.controls.cols();
  const int ctrl_first = spec.contemporaneous_controls ? 0 : 1;
  const Eigen::Index n_ctrl_lags = m_ctrl > 0 ? (l - ctrl_first + 1) : 0;
  const Eigen::Index k = 1 + (spec.r + 1) + m_endo * p + m_ctrl * n_ctrl_lags;
  if (n < 10 + k) {
    fail(ErrorCode::InsufficientSample, "horizon " + std::to_string(h) + ": " + std::to_string(std::max<Eigen::Index>(n, 0)) +
                                            " observations for " + std::to_string(k) + " regressors");
  }
  Design d;
  d.X.resize(n, k);
  d.y.resize(n);
  d.names.reserve(static_cast<std::size_t>(k));
  Eigen::Index col = 0;
  d.X.col(col++).setOnes();
  d.names.push_back("intercept");
  for (int i = 0; i <= spec.r; ++i) {
    d.X.col(col++) = in.shock.segment(start - i, n);
    d.names.push_back("shock_lag" + std::to_string(i));
  }
  for (Eigen::Index j = 0; j < m_endo; ++j) {
    const Eigen::VectorXd series = j == 0 ? in.target : Eigen::VectorXd(in.endogenous.col(j - 1));
    const std::string name = j == 0 ? std::string("target")
                                    : (static_cast<std::size_t>(j - 1) < in.endogenous_names.size()
                                           ? in.endogenous_names[static_cast<std::size_t>(j - 1)]
                                           : "endogenous" + std::to_string(j));
    for (int lag = 1; lag <= p; ++lag) {
      d.X.col(col++) = series.segment(start - lag, n);
      d.names.push_back(name + "_lag" + std::to_string(lag));
    }
  }
  for (Eigen::Index j = 0; j < m_ctrl; ++j) {
    const std::string name = static_cast<std::size_t>(j) < in.control_names.size()
                                 ? in.control_names[static_cast<std::size_t>(j)]
                                 : "control" + std::to_string(j + 1);
    for (int lag = ctrl_first; lag <= l; ++lag) {
      d.X.col(col++) = in.controls.col(j).segment(start - lag, n);
      d.names.push_back(name + "_lag" + std::to_string(lag));
    }
  }
  d.y = in.target.segment(start + h, n);
  return d;
}

}  // namespace

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names) {
  // Rank decisions on unit-norm columns so that scale differences do not matter.
  Eigen::VectorXd scale = X.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (scale[j] == 0.0) {
      fail(ErrorCode::RankDeficientDesign, "collinear columns: " + names[static_cast<std::size_t>(j)]);
    }
  }
  const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    std::string list;
    for (const auto& nm : offending_columns(X, names)) list += (list.empty() ? "" : ", ") + nm;
    fail(ErrorCode::RankDeficientDesign, "collinear columns: " + (list.empty() ? std::string("(numerical)") : list));
  }
  OlsFit fit;
  const Eigen::VectorXd bs = qr.solve(y);
  fit.beta = bs.cwiseQuotient(scale);
  fit.residuals = y - X * fit.beta;
  fit.ssr = fit.residuals.squaredNorm();
  // (Xs'Xs)^{-1} = P R^{-1} R^{-T} P'
  const Eigen::Index k = X.cols();
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  Eigen::MatrixXd inv_perm = Rinv * Rinv.transpose();
  Eigen::MatrixXd inv_s = qr.colsPermutation() * inv_perm * qr.colsPermutation().transpose();
  fit.xtx_inv = scale.cwiseInverse().asDiagonal() * inv_s * scale.cwiseInverse().asDiagonal();
  return fit;
}

double hac_variance(const Eigen::MatrixXd& X, const OlsFit& fit, Eigen::Index index, int bandwidth) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  // z_t = c' x_t e_t with c the index-th row of (X'X)^{-1}
  const Eigen::VectorXd c = fit.xtx_inv.row(index).transpose();
  const Eigen::VectorXd z = (X * c).cwiseProduct(fit.residuals);
  double s = z.squaredNorm();
  for (int j = 1; j <= bandwidth && j < n; ++j) {
    const double w = 1.0 - static_cast<double>(j) / (bandwidth + 1.0);
    s += 2.0 * w * z.head(n - j).dot(z.tail(n - j));
  }
  return std::max(0.0, s) * static_cast<double>(n) / static_cast<double>(n - k);
}

HorizonEstimate fit_horizon(const LpInputs& in, int h, int p, int l, const LpSpec& spec, std::optional<Eigen::Index> start) {
  if (h < 0) fail(ErrorCode::InvalidArgument, "negative horizon");
  const Eigen::Index s = start.value_or(max_lag(p, in.controls.cols() > 0 ? l : 0, spec.r));
  const Design d = build_design(in, h, p, in.controls.cols() > 0 ? l : 0, spec, s);
  const OlsFit fit = ols(d.X, d.y, d.names);
  const Eigen::Index n = d.X.rows();
  const Eigen::Index k = d.X.cols();
  HorizonEstimate est;
  est.h = h;
  est.estimate = fit.beta[d.shock_col];
  est.n_obs = n;
  est.n_regressors = k;
  est.ssr = fit.ssr;
  const int bw = spec.hac_bandwidth >= 0 ? spec.hac_bandwidth : h + 1;
  est.se = std::sqrt(hac_variance(d.X, fit, d.shock_col, bw));
  est.se_ols = std::sqrt(fit.ssr / static_cast<double>(n - k) * fit.xtx_inv(d.shock_col, d.shock_col));
  const double z = normal_quantile(0.5 + 0.5 * spec.ci_level);
  est.lo = est.estimate - z * est.se;
  est.hi = est.estimate + z * est.se;
  est.residual_sd = std::sqrt(fit.ssr / static_cast<double>(n - k));
  const double denom = fit.residuals.squaredNorm();
  est.residual_ac1 = denom > 0.0 ? fit.residuals.head(n - 1).dot(fit.residuals.tail(n - 1)) / denom : 0.0;
  return est;
}

LagChoice select_lags(const LpInputs& in, const LpSpec& spec) {
  const bool has_controls = in.controls.cols() > 0;
  if (spec.lag_selection == LagSelection::Fixed) {
    return LagChoice{spec.p_max, has_controls ? spec.l_max : 0, 0.0};
  }
  const int l_hi = has_controls ? spec.l_max : 0;
  const Eigen::Index start = max_lag(spec.p_max, l_hi, spec.r);
  std::optional<LagChoice> best;
  Eigen::Index best_k = 0;
  for (int p = 1; p <= spec.p_max; ++p) {
    for (int l = has_controls ? 1 : 0; l <= l_hi; ++l) {
      const Design d = build_design(in, 0, p, l, spec, start);
      const OlsFit fit = ols(d.X, d.y, d.names);
      const auto n = static_cast<double>(d.X.rows());
      const Eigen::Index k = d.X.cols();
      const double aic = n * std::log(fit.ssr / n) + 2.0 * static_cast<double>(k);
      if (!best || aic < best->aic || (aic == best->aic && k < best_k)) {
        best = LagChoice{p, l, aic};
        best_k = k;
      }
    }
  }
  return *best;
}

IrfResult irf(const LpInputs& in, const LpSpec& spec) {
  spec.validate();
  in.validate();
  IrfResult out;
  out.ci_level = spec.ci_level;
  out.lags = select_lags(in, spec);
  for (int h = 0; h <= spec.h_max; ++h) {
    out.horizons.push_back(fit_horizon(in, h, out.lags.p, out.lags.l, spec));
  }
  return out;
}

BatteryTable run_battery(const BatteryInputs& inputs, const std::vector<NamedShock>& shocks, const LpSpec& spec, int threads) {
  if (!inputs.sectors) fail(ErrorCode::InvalidArgument, "battery without sector panel");
  const SectorPanel& panel = *inputs.sectors;
  struct Job {
    std::size_t sector;
    std::size_t shock;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < panel.width(); ++s) {
    for (std::size_t v = 0; v < shocks.size(); ++v) jobs.push_back({s, v});
  }
  std::vector<BatteryCell> cells(jobs.size());

  auto run_job = [&](const Job& job) {
    BatteryCell cell;
    try {
      LpInputs in;
      const std::string& sector = panel.ids[job.sector];
      in.target = panel.values.col(static_cast<Eigen::Index>(job.sector));
      in.shock = shocks[job.shock].values;
      auto own = inputs.sector_endogenous.find(sector);
      const Eigen::Index extra = own != inputs.sector_endogenous.end() ? 1 : 0;
      in.endogenous.resize(in.target.size(), extra + inputs.common_endogenous.cols());
      if (extra) {
        in.endogenous.col(0) = own->second;
        in.endogenous_names.push_back(sector + "_ppi");
      }
      if (inputs.common_endogenous.cols() > 0) in.endogenous.rightCols(inputs.common_endogenous.cols()) = inputs.common_endogenous;
      in.endogenous_names.insert(in.endogenous_names.end(), inputs.common_endogenous_names.begin(),
                                 inputs.common_endogenous_names.end());
      in.controls = inputs.controls;
      in.control_names = inputs.control_names;
      cell.result = irf(in, spec);
    } catch (const Error& e) {
      cell.error = e.what();
    }
    return cell;
  };

  const int n_threads = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) cells[i] = run_job(jobs[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) cells[i] = run_job(jobs[i]);
      });
    }
    for (auto& th : pool) th.join();
  }

  BatteryTable table;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    table.emplace(BatteryKey{panel.ids[jobs[i].sector], shocks[jobs[i].shock].name}, std::move(cells[i]));
  }
  return table;
}

std::string format_irf_csv(const std::string& sector, const std::string& variant, const IrfResult& result) {
  std::string out = "sector,variant,h,estimate,se,lo,hi,p,l\n";
  for (const auto& e : result.horizons) {
    out += csv::escape(sector) + "," + csv::escape(variant) + "," + std::to_string(e.h) + "," +
           csv::format_number(e.estimate) + "," + csv::format_number(e.se) + "," + csv::format_number(e.lo) + "," +
           csv::format_number(e.hi) + "," + std::to_string(result.lags.p) + "," + std::to_string(result.lags.l) + "\n";
  }
  return out;
}

}  // namespace climprice::lp
