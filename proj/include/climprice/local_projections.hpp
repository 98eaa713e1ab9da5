#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "climprice/calendar.hpp"
#include "climprice/ingest.hpp"

namespace climprice::lp {

enum class LagSelection { Aic, Fixed };

struct LpSpec {
  int h_max = 24;
  int p_max = 12;  // endogenous lags (the chosen p when lag_selection = Fixed)
  int r = 0;       // shock terms x_{t-0..t-r}
  int l_max = 12;  // control lags (the chosen l when lag_selection = Fixed)
  LagSelection lag_selection = LagSelection::Aic;
  double ci_level = 0.90;
  // Controls enter at lags 0..l instead of 1..l (contemporaneous z_t).
  bool contemporaneous_controls = false;
  // Newey-West bandwidth; negative means h+1.
  int hac_bandwidth = -1;

  void validate() const;
};

// One target with its regressors on a common time axis. The endogenous block
// lagged in the regression is [target, endogenous...]; none of it enters
// contemporaneously.
struct LpInputs {
  Eigen::VectorXd target;
  Eigen::VectorXd shock;
  Eigen::MatrixXd endogenous;  // T x m_e extra endogenous series (may be empty)
  Eigen::MatrixXd controls;    // T x m_c (may be empty)
  std::vector<std::string> endogenous_names;
  std::vector<std::string> control_names;

  Eigen::Index size() const { return target.size(); }
  void validate() const;
};

struct HorizonEstimate {
  int h = 0;
  double estimate = 0.0;  // B_0^h
  double se = 0.0;        // HAC
  double se_ols = 0.0;    // classical
  double lo = 0.0;
  double hi = 0.0;
  Eigen::Index n_obs = 0;
  Eigen::Index n_regressors = 0;
  double ssr = 0.0;
  double residual_sd = 0.0;
  double residual_ac1 = 0.0;
};

struct LagChoice {
  int p = 1;
  int l = 0;
  double aic = 0.0;
};

struct IrfResult {
  std::vector<HorizonEstimate> horizons;
  LagChoice lags;
  double ci_level = 0.90;
};

// Least squares on a named design. Throws RankDeficientDesign listing the
// columns that are linear combinations of earlier ones.
struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
  double ssr = 0.0;
};
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names);

// Newey-West (Bartlett) variance of coefficient `index` with n/(n-k) scaling.
// Bandwidth 0 gives the Eicker-White estimator.
double hac_variance(const Eigen::MatrixXd& X, const OlsFit& fit, Eigen::Index index, int bandwidth);

// OLS of y_{t+h} on intercept, x_{t-0..r}, p lags of the endogenous block and
// l lags of the controls. `start` is the first usable t (defaults to the
// largest lag). Throws InsufficientSample when n < 10 + k.
HorizonEstimate fit_horizon(const LpInputs& in, int h, int p, int l, const LpSpec& spec,
                            std::optional<Eigen::Index> start = std::nullopt);

// AIC = n ln(SSR/n) + 2k on the h = 0 regression over a window common to all
// candidates; ties go to the smaller k.
LagChoice select_lags(const LpInputs& in, const LpSpec& spec);

IrfResult irf(const LpInputs& in, const LpSpec& spec);

// Battery over sectors x shock variants. Failures are recorded per cell.
struct NamedShock {
  std::string name;
  Eigen::VectorXd values;
};

struct BatteryInputs {
  const SectorPanel* sectors = nullptr;
  Eigen::MatrixXd common_endogenous;  // e.g. industrial production, commodity prices
  std::vector<std::string> common_endogenous_names;
  std::map<std::string, Eigen::VectorXd> sector_endogenous;  // e.g. matching PPI; absent for services
  Eigen::MatrixXd controls;
  std::vector<std::string> control_names;
};

struct BatteryCell {
  std::optional<IrfResult> result;
  std::string error;
};

using BatteryKey = std::pair<std::string, std::string>;  // (sector, variant)
using BatteryTable = std::map<BatteryKey, BatteryCell>;

BatteryTable run_battery(const BatteryInputs& inputs, const std::vector<NamedShock>& shocks, const LpSpec& spec,
                         int threads = 1);

// CSV `sector,variant,h,estimate,se,lo,hi,p,l`.
std::string format_irf_csv(const std::string& sector, const std::string& variant, const IrfResult& result);

double normal_quantile(double p);

}  // namespace climprice::lp
