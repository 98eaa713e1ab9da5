#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "climprice/cli.hpp"
#include "climprice/climatology.hpp"
#include "climprice/error.hpp"
#include "climprice/factors.hpp"
#include "climprice/grid.hpp"
#include "climprice/local_projections.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace climprice;

namespace {

std::vector<YearMonth> parse_times(const std::vector<std::string>& times) {
  std::vector<YearMonth> out;
  out.reserve(times.size());
  for (const auto& t : times) out.push_back(YearMonth::parse(t));
  return out;
}

ScalarSeries scalar_series(const std::vector<std::string>& times, const Eigen::VectorXd& values) {
  if (static_cast<Eigen::Index>(times.size()) != values.size())
    fail(ErrorCode::InvalidArgument, "times and values differ in length");
  return {parse_times(times), values};
}

Surface surface(const DomainPtr& d, const Eigen::VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(d->cell_count()))
    fail(ErrorCode::InvalidArgument, "expected one value per raster cell");
  return Surface::make(d, values);
}

py::dict fit_factors(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& X, double tol, bool permutation,
                     int n_permutations, double alpha, std::uint64_t seed, std::optional<Eigen::Index> max_k) {
  factors::FactorConfig cfg;
  cfg.tol = tol;
  cfg.permutation = permutation;
  cfg.n_permutations = n_permutations;
  cfg.alpha = alpha;
  cfg.seed = seed;
  cfg.max_k = max_k;
  py::gil_scoped_release release;
  const factors::PipelineResult r = factors::fit(Y, X, cfg);
  py::gil_scoped_acquire acquire;
  return py::dict("K"_a = r.cross.K(), "r"_a = r.cross.r, "alpha"_a = r.cross.alpha, "beta"_a = r.cross.beta,
                  "rho"_a = r.factors.rho, "a"_a = r.factors.a, "b"_a = r.factors.b, "y_scores"_a = r.factors.y_scores,
                  "x_scores"_a = r.factors.x_scores);
}

py::dict lp_irf(const Eigen::VectorXd& target, const Eigen::VectorXd& shock, std::optional<Eigen::MatrixXd> endogenous,
                std::optional<Eigen::MatrixXd> controls, int h_max, int p_max, int l_max, bool aic, double ci_level) {
  lp::LpInputs in;
  in.target = target;
  in.shock = shock;
  if (endogenous) {
    in.endogenous = *endogenous;
    for (Eigen::Index j = 0; j < in.endogenous.cols(); ++j) in.endogenous_names.push_back("endo" + std::to_string(j + 1));
  }
  if (controls) {
    in.controls = *controls;
    for (Eigen::Index j = 0; j < in.controls.cols(); ++j) in.control_names.push_back("control" + std::to_string(j + 1));
  }
  lp::LpSpec spec;
  spec.h_max = h_max;
  spec.p_max = p_max;
  spec.l_max = l_max;
  spec.lag_selection = aic ? lp::LagSelection::Aic : lp::LagSelection::Fixed;
  spec.ci_level = ci_level;
  const lp::IrfResult r = lp::irf(in, spec);
  const auto n = static_cast<Eigen::Index>(r.horizons.size());
  Eigen::VectorXd est(n), se(n), lo(n), hi(n);
  Eigen::VectorXi nobs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& e = r.horizons[static_cast<std::size_t>(i)];
    est[i] = e.estimate;
    se[i] = e.se;
    lo[i] = e.lo;
    hi[i] = e.hi;
    nobs[i] = static_cast<int>(e.n_obs);
  }
  return py::dict("estimate"_a = est, "se"_a = se, "lo"_a = lo, "hi"_a = hi, "n_obs"_a = nobs, "p"_a = r.lags.p,
                  "l"_a = r.lags.l);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Climate-shock pricing toolkit: surface grids, shocks, local projections and associated factors.";

  static py::exception<Error> error_type(m, "ClimpriceError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<GridDomain, std::shared_ptr<GridDomain>>(m, "GridDomain")
      .def_static(
          "build",
          [](std::array<double, 4> b, std::array<double, 2> step, std::optional<std::vector<std::uint8_t>> mask,
             bool uniform) {
            const GridBounds bounds{b[0], b[1], b[2], b[3]};
            const auto q = uniform ? Quadrature::Uniform : Quadrature::CosLatitude;
            DomainPtr d = mask ? GridDomain::build(bounds, {step[0], step[1]}, *mask, q)
                               : GridDomain::build(bounds, {step[0], step[1]}, q);
            return std::const_pointer_cast<GridDomain>(d);
          },
          "bounds"_a, "step"_a, "mask"_a = py::none(), "uniform"_a = false,
          "bounds = (lat_min, lat_max, lon_min, lon_max), step = (lat, lon)")
      .def_property_readonly("shape", [](const GridDomain& d) { return py::make_tuple(d.rows(), d.cols()); })
      .def_property_readonly("valid_count", &GridDomain::valid_count)
      .def_property_readonly("weights", &GridDomain::weights)
      .def_property_readonly("mask", &GridDomain::mask)
      .def("cell_lat", &GridDomain::cell_lat, "cell"_a)
      .def("cell_lon", &GridDomain::cell_lon, "cell"_a)
      .def("cell_area_km2", &GridDomain::cell_area_km2, "cell"_a)
      .def("locate", &GridDomain::locate, "lat"_a, "lon"_a);

  m.def(
      "inner_product",
      [](const std::shared_ptr<GridDomain>& d, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
        return inner_product(surface(d, f), surface(d, g));
      },
      "domain"_a, "f"_a, "g"_a, "Weighted inner product of two full-raster surfaces; masked cells are ignored.");
  m.def(
      "embed", [](const std::shared_ptr<GridDomain>& d, const Eigen::VectorXd& f) { return embed(surface(d, f)); },
      "domain"_a, "values"_a, "Valid-cell values scaled by sqrt(weight).");

  m.def(
      "default_threshold",
      [](const std::vector<std::string>& times, const Eigen::VectorXd& values, int first, int last) {
        return default_threshold(scalar_series(times, values), {first, last}).value;
      },
      "times"_a, "values"_a, "first_year"_a = kDefaultThresholdWindow.first,
      "last_year"_a = kDefaultThresholdWindow.last);
  m.def(
      "make_shocks",
      [](const std::vector<std::string>& times, const Eigen::VectorXd& values, double threshold,
         const std::string& variant, double extreme_multiplier) {
        return make_shocks(scalar_series(times, values), threshold,
                           variant_conditioning(variant, extreme_multiplier))
            .values;
      },
      "times"_a, "values"_a, "threshold"_a, "variant"_a = "all", "extreme_multiplier"_a = kDefaultExtremeMultiplier);

  m.def("lp_irf", &lp_irf, "target"_a, "shock"_a, "endogenous"_a = py::none(), "controls"_a = py::none(),
        "h_max"_a = 24, "p_max"_a = 12, "l_max"_a = 12, "aic"_a = true, "ci_level"_a = 0.90);

  m.def("fit_factors", &fit_factors, "Y"_a, "X"_a, "tol"_a = 0.1, "permutation"_a = false, "n_permutations"_a = 199,
        "alpha"_a = 0.05, "seed"_a = 42, "max_k"_a = py::none(),
        "Associated factors between a T x p panel and a T x n field in isometric coordinates.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream log, err;
        const int code = cli::run(args, log, err);
        return py::make_tuple(code, log.str(), err.str());
      },
      "args"_a, "Runs one command-line invocation; returns (exit_code, log, errors).");
}
