#include "climprice/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <optional>

#include "climprice/climatology.hpp"
#include "climprice/config.hpp"
#include "climprice/csv.hpp"
#include "climprice/error.hpp"
#include "climprice/factors.hpp"
#include "climprice/fira.hpp"
#include "climprice/ingest.hpp"
#include "climprice/local_projections.hpp"
#include "climprice/svg.hpp"
#include "climprice/synth.hpp"

namespace climprice::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kMonthNames[12] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                         "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

struct Context {
  config::RunConfig cfg;
  fs::path out;
  int threads = 1;
  bool quiet = false;
  std::ostream* log = nullptr;
  std::ostream* err = nullptr;

  void info(const std::string& msg) const {
    if (!quiet) *log << msg << "\n";
  }
};

// File-name-safe rendering of an identifier.
std::string safe(const std::string& id) {
  std::string s = id;
  for (char& ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '.' || ch == '_';
    if (!ok) ch = '_';
  }
  return s;
}

ojson window_json(const MonthWindow& w) { return ojson::array({w.first.str(), w.last.str()}); }

ojson vector_json(const Eigen::VectorXd& v) {
  ojson a = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void write_json(const fs::path& path, const ojson& doc) { csv::write_file(path, doc.dump(2) + "\n"); }

template <class T>
const T& require_section(const std::optional<T>& section, const char* key, const char* command) {
  if (!section) fail(ErrorCode::InvalidConfig, std::string(key) + ": section required by '" + command + "'");
  return *section;
}

SurfaceSeries load_variable(const Context& c, const std::string& name) {
  const auto& v = c.cfg.variable(name, "variables");
  c.info("reading " + name + " from " + v.path.string());
  SurfaceSeries s = load_gridded(v.path, name);
  if (c.cfg.quadrature != s.domain->quadrature())
    s.domain = GridDomain::build(s.domain->bounds(), s.domain->step(), s.domain->mask(), c.cfg.quadrature);
  return s;
}

SurfaceSeries anomaly_field(const Context& c, const std::string& name) {
  const SurfaceSeries raw = load_variable(c, name);
  return anomaly(raw, compute_baseline(raw, c.cfg.reference_window));
}

ScalarSeries regional_anomaly(const Context& c, const SurfaceSeries& field, const std::string& region) {
  const auto& spec = c.cfg.region(region, "regions");
  return regional_mean(field, config::region_mask(spec, *field.domain));
}

ScalarSeries slice(const ScalarSeries& s, const MonthWindow& w) {
  if (s.times.empty() || w.first < s.times.front() || w.last > s.times.back()) {
    fail(ErrorCode::EmptyIntersection, "window " + w.first.str() + ".." + w.last.str() + " not covered by series");
  }
  const auto start = w.first - s.times.front();
  return {month_range(w.first, w.size()), s.values.segment(start, w.size())};
}

MonthWindow window_of(const ScalarSeries& s) { return {s.times.front(), s.times.back()}; }
MonthWindow window_of(const SurfaceSeries& s) { return {s.times.front(), s.times.back()}; }

struct ResolvedThreshold {
  double value = 0.0;
  std::size_t periods = 0;
  bool automatic = true;
};

ResolvedThreshold resolve_threshold(const Context& c, const ScalarSeries& anom) {
  const auto& sc = *c.cfg.shocks;
  if (sc.threshold) return {*sc.threshold, 0, false};
  const Threshold th = default_threshold(anom, c.cfg.threshold_window);
  if (th.degenerate()) {
    fail(ErrorCode::DegenerateThreshold, "automatic threshold " + csv::format_number(th.value) +
                                             " is not positive; set shocks.threshold explicitly");
  }
  return {th.value, th.periods, true};
}

ojson threshold_json(const Context& c, const ResolvedThreshold& th) {
  const auto& sc = *c.cfg.shocks;
  ojson j;
  j["variable"] = sc.variable;
  j["region"] = sc.region;
  j["threshold"] = th.value;
  j["source"] = th.automatic ? "auto" : "explicit";
  if (th.automatic) {
    j["window"] = {c.cfg.threshold_window.first, c.cfg.threshold_window.last};
    j["periods"] = th.periods;
  }
  j["extreme_multiplier"] = sc.extreme_multiplier;
  return j;
}

Panel select_columns(const Panel& p, const std::vector<std::string>& ids, const char* key) {
  try {
    return p.select(ids);
  } catch (const Error& e) {
    fail(ErrorCode::InvalidConfig, std::string(key) + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

int cmd_baseline(const Context& c) {
  if (c.cfg.variables.empty()) fail(ErrorCode::InvalidConfig, "variables: at least one variable required by 'baseline'");
  std::string summary = "variable,region";
  for (const char* m : kMonthNames) summary += std::string(",") + m;
  summary += "\n";
  for (const auto& var : c.cfg.variables) {
    const SurfaceSeries s = load_variable(c, var.name);
    const MonthlyBaseline b = compute_baseline(s, c.cfg.reference_window);
    std::vector<Surface> months;
    for (int m = 1; m <= 12; ++m) {
      months.push_back(b.month(m));
      char name[8];
      std::snprintf(name, sizeof name, "_%02d.csv", m);
      write_surface_csv(c.out / "baseline" / (safe(var.name) + name), months.back(), YearMonth(c.cfg.reference_window.first, m),
                        var.name);
    }
    for (const auto& region : c.cfg.regions) {
      const auto mask = config::region_mask(region, *s.domain);
      summary += csv::escape(var.name) + "," + csv::escape(region.name);
      for (const auto& m : months) summary += "," + csv::format_number(regional_mean(m, mask));
      summary += "\n";
    }
  }
  csv::write_file(c.out / "baseline" / "summary.csv", summary);
  c.info("wrote " + (c.out / "baseline").string());
  return kOk;
}

int cmd_anomaly(const Context& c) {
  if (c.cfg.variables.empty()) fail(ErrorCode::InvalidConfig, "variables: at least one variable required by 'anomaly'");
  for (const auto& var : c.cfg.variables) {
    const SurfaceSeries a = anomaly_field(c, var.name);
    write_gridded(c.out / "anomaly" / (safe(var.name) + ".sgf"), a, GridFormat::FramedBinary, var.name);
    for (const auto& region : c.cfg.regions) {
      const ScalarSeries r = regional_anomaly(c, a, region.name);
      write_scalar_csv(c.out / "anomaly" / (safe(var.name) + "_" + safe(region.name) + ".csv"), r.times, r.values);
    }
  }
  c.info("wrote " + (c.out / "anomaly").string());
  return kOk;
}

int cmd_shocks(const Context& c) {
  const auto& sc = require_section(c.cfg.shocks, "shocks", "shocks");
  const SurfaceSeries field = anomaly_field(c, sc.variable);
  const ScalarSeries anom = regional_anomaly(c, field, sc.region);
  const ResolvedThreshold th = resolve_threshold(c, anom);
  const fs::path dir = c.out / "shocks";
  write_scalar_csv(dir / "anomaly.csv", anom.times, anom.values);
  ojson report = threshold_json(c, th);
  report["variants"] = ojson::array();
  for (const auto& v : sc.variants) {
    const ShockSeries s = make_shocks(anom, th.value, variant_conditioning(v, sc.extreme_multiplier));
    write_scalar_csv(dir / ("shocks_" + safe(v) + ".csv"), s.times, s.values);
    report["variants"].push_back({{"name", v}, {"shocks", s.count()}});
  }
  write_json(dir / "report.json", report);
  c.info("threshold " + csv::format_number(th.value) + "; wrote " + dir.string());
  return kOk;
}

int cmd_lp(const Context& c) {
  const auto& lpc = require_section(c.cfg.lp, "lp", "lp");
  const auto& sc = require_section(c.cfg.shocks, "shocks", "lp");
  const auto& sin = require_section(c.cfg.sectors, "sectors", "lp");

  const ScalarSeries anom = regional_anomaly(c, anomaly_field(c, sc.variable), sc.region);
  const ResolvedThreshold th = resolve_threshold(c, anom);
  const PanelLoadResult sectors = load_panel(sin.path, sin.options);
  std::optional<PanelLoadResult> controls;
  if (c.cfg.controls) controls = load_panel(c.cfg.controls->path, c.cfg.controls->options);
  std::optional<PanelLoadResult> sector_endo;
  if (lpc.sector_endogenous) sector_endo = load_panel(lpc.sector_endogenous->path, lpc.sector_endogenous->options);

  std::vector<MonthWindow> windows{sectors.panel.window(), window_of(anom)};
  if (controls) windows.push_back(controls->panel.window());
  if (sector_endo) windows.push_back(sector_endo->panel.window());
  const MonthWindow win = align(windows);
  const Panel Y = slice(sectors.panel, win);
  const ScalarSeries a = slice(anom, win);

  lp::BatteryInputs in;
  in.sectors = &Y;
  if (controls) {
    const Panel C = slice(controls->panel, win);
    if (!lpc.endogenous.empty()) {
      const Panel e = select_columns(C, lpc.endogenous, "lp.endogenous");
      in.common_endogenous = e.values;
      in.common_endogenous_names = e.ids;
    }
    if (!lpc.controls.empty()) {
      const Panel z = select_columns(C, lpc.controls, "lp.controls");
      in.controls = z.values;
      in.control_names = z.ids;
    }
  }
  if (sector_endo) {
    const Panel E = slice(sector_endo->panel, win);
    for (const auto& id : Y.ids) {
      if (E.column(id)) in.sector_endogenous[id] = E.series(id);
    }
  }

  std::vector<lp::NamedShock> shocks;
  ojson variants = ojson::array();
  for (const auto& v : sc.variants) {
    const ShockSeries s = make_shocks(a, th.value, variant_conditioning(v, sc.extreme_multiplier));
    shocks.push_back({v, s.values});
    variants.push_back({{"name", v}, {"shocks", s.count()}});
  }
  c.info("running " + std::to_string(Y.width() * shocks.size()) + " local projections on " + win.first.str() + ".." +
         win.last.str());
  const lp::BatteryTable table = lp::run_battery(in, shocks, lpc.spec, c.threads);

  const fs::path dir = c.out / "lp";
  std::string failures = "sector,variant,error\n";
  ojson cells = ojson::array();
  std::size_t ok = 0;
  for (const auto& [key, cell] : table) {
    const auto& [sector, variant] = key;
    if (cell.result) {
      ++ok;
      const std::string stem = "lp_" + safe(sector) + "_" + safe(variant);
      csv::write_file(dir / (stem + ".csv"), lp::format_irf_csv(sector, variant, *cell.result));
      csv::write_file(dir / (stem + ".svg"), svg::fan_chart(sector + " / " + variant, *cell.result));
      cells.push_back({{"sector", sector}, {"variant", variant}, {"p", cell.result->lags.p}, {"l", cell.result->lags.l}});
    } else {
      failures += csv::escape(sector) + "," + csv::escape(variant) + "," + csv::escape(cell.error) + "\n";
      cells.push_back({{"sector", sector}, {"variant", variant}, {"error", cell.error}});
    }
  }
  csv::write_file(dir / "failures.csv", failures);
  ojson report;
  report["seed"] = c.cfg.seed;
  report["window"] = window_json(win);
  report["threshold"] = threshold_json(c, th);
  report["variants"] = variants;
  report["dropped_sectors"] = sectors.dropped;
  report["ci_level"] = lpc.spec.ci_level;
  report["cells"] = cells;
  write_json(dir / "report.json", report);
  c.info(std::to_string(ok) + " of " + std::to_string(table.size()) + " cells estimated; wrote " + dir.string());
  if (ok == 0) {
    *c.err << "error: no local projection succeeded; see " << (dir / "failures.csv").string() << "\n";
    return kNumericalError;
  }
  return kOk;
}

int cmd_factors(const Context& c) {
  const auto& fc = require_section(c.cfg.factors, "factors", "factors");
  const auto& sin = *c.cfg.sectors;
  const SurfaceSeries field = anomaly_field(c, fc.variable);
  const PanelLoadResult sectors = load_panel(sin.path, sin.options);
  const std::vector<MonthWindow> windows{sectors.panel.window(), window_of(field)};
  const MonthWindow win = align(windows);
  const SurfaceSeries X = slice(field, win);
  const Panel Y = slice(sectors.panel, win);
  c.info("associated factors on " + std::to_string(X.size()) + " months, " + std::to_string(Y.width()) + " sectors, " +
         std::to_string(X.domain->valid_count()) + " cells");

  const fs::path dir = c.out / "factors";
  ojson report;
  report["seed"] = fc.factor.seed;
  report["variable"] = fc.variable;
  report["window"] = window_json(win);
  report["n_obs"] = X.size();
  report["tol"] = fc.factor.tol;
  report["permutation"] = fc.factor.permutation;
  if (fc.factor.permutation) {
    report["n_permutations"] = fc.factor.n_permutations;
    report["alpha"] = fc.factor.alpha;
  }
  report["dropped_sectors"] = sectors.dropped;
  try {
    const auto res = factors::fit_surface(Y, X, fc.factor);
    const auto& f = res.pipeline.factors;
    report["sectors"] = res.sectors;
    for (const auto& d : res.dropped_sectors) report["dropped_sectors"].push_back(d);
    report["K"] = f.K();
    report["rho"] = vector_json(f.rho);
    report["singular_values"] = vector_json(res.pipeline.cross.singular_values);
    report["k_cutoff"] = res.pipeline.cross.k_cutoff;
    if (res.pipeline.cross.null_quantiles) report["null_quantiles"] = vector_json(*res.pipeline.cross.null_quantiles);
    for (Eigen::Index k = 0; k < f.K(); ++k) {
      const std::string n = std::to_string(k + 1);
      std::string a = "sector,loading\n";
      for (std::size_t j = 0; j < res.sectors.size(); ++j) {
        a += csv::escape(res.sectors[j]) + "," + csv::format_number(f.a(static_cast<Eigen::Index>(j), k)) + "\n";
      }
      csv::write_file(dir / ("a_" + n + ".csv"), a);
      write_surface_csv(dir / ("b_" + n + ".csv"), res.b_surfaces[static_cast<std::size_t>(k)], win.last, "b_" + n);
    }
    const auto reg = factors::regularity_diagnostic(res.pipeline.ops);
    report["regularity"] = {{"warning", reg.warning()},
                            {"tail_threshold", reg.tail_threshold},
                            {"squared_tail_share", vector_json(reg.squared_tail_share)},
                            {"plain_tail_share", vector_json(reg.plain_tail_share)}};
    if (reg.warning()) c.info("warning: the regularity diagnostic does not level off for some sectors");
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroCrossCovariance) throw;
    report["K"] = 0;
    report["note"] = e.what();
  }
  write_json(dir / "report.json", report);
  c.info("K = " + report["K"].dump() + "; wrote " + dir.string());
  return kOk;
}

int cmd_fira(const Context& c) {
  const auto& fc = require_section(c.cfg.fira, "fira", "fira");
  const auto& sin = *c.cfg.sectors;
  const SurfaceSeries field = anomaly_field(c, fc.variable);

  // Shock geometry first: a misplaced center should fail before any fitting.
  std::vector<fira::ShockSurface> shocks;
  for (const auto& s : fc.shocks) {
    shocks.push_back(fira::make_shock_surface(s.magnitude, s.center_lat, s.center_lon, s.radius_km, s.profile, field.domain));
  }

  const PanelLoadResult sectors = load_panel(sin.path, sin.options);
  const bool use_z = !fc.z_controls.empty() && fc.design.lags.l > 0;
  std::optional<PanelLoadResult> controls;
  if (use_z) controls = load_panel(c.cfg.controls->path, c.cfg.controls->options);
  std::vector<MonthWindow> windows{sectors.panel.window(), window_of(field)};
  if (controls) windows.push_back(controls->panel.window());
  const MonthWindow win = align(windows);
  const SurfaceSeries X = slice(field, win);
  const Panel Y = slice(sectors.panel, win);
  std::optional<Panel> Z;
  if (controls) Z = select_columns(slice(controls->panel, win), fc.z_controls, "fira.z_controls");

  const auto design = fira::build_design(X, Y, Z ? &*Z : nullptr, nullptr, fc.design);
  c.info("FIRA design: " + std::to_string(design.size()) + " periods, dimension " + std::to_string(design.dim()));
  const auto res = fira::fit_fira(design, Y, fc.h_max, fc.factor);

  const fs::path dir = c.out / "fira";
  ojson report;
  report["seed"] = fc.factor.seed;
  report["variable"] = fc.variable;
  report["window"] = window_json(win);
  report["design"] = {{"q", fc.design.lags.q},
                      {"s", fc.design.lags.s},
                      {"l", fc.design.lags.l},
                      {"standardize_blocks", fc.design.standardize_blocks},
                      {"periods", design.size()},
                      {"dimension", design.dim()}};
  report["tol"] = fc.factor.tol;
  report["permutation"] = fc.factor.permutation;
  report["sectors"] = res.sectors;
  report["dropped_sectors"] = sectors.dropped;
  for (const auto& d : res.dropped_sectors) report["dropped_sectors"].push_back(d);
  report["sector_sd"] = vector_json(res.sector_sd);
  ojson hs = ojson::array();
  for (const auto& h : res.horizons) {
    ojson j = {{"h", h.h}, {"n_obs", h.n_obs}, {"K", h.K()}, {"rho", vector_json(h.rho)}};
    if (!h.error.empty()) j["error"] = h.error;
    hs.push_back(std::move(j));
  }
  report["horizons"] = hs;

  ojson shock_reports = ojson::array();
  for (std::size_t i = 0; i < shocks.size(); ++i) {
    const auto& cfg = fc.shocks[i];
    const auto& s = shocks[i];
    const auto paths = fira::respond(res, s);
    const std::string stem = safe(cfg.name);
    csv::write_file(dir / (stem + ".csv"), fira::format_response_csv(paths, true));
    csv::write_file(dir / (stem + "_canonical.csv"), fira::format_response_csv(paths, false));
    csv::write_file(dir / (stem + ".svg"),
                    svg::fira_figure("FIRA response to " + csv::format_number(s.magnitude) + " shock '" + cfg.name + "'", s,
                                     paths, true));
    shock_reports.push_back({{"name", cfg.name},
                             {"magnitude", s.magnitude},
                             {"center", {s.center_lat, s.center_lon}},
                             {"radius_km", s.radius_km},
                             {"profile", std::string(fira::to_string(s.profile))},
                             {"footprint_cells", s.footprint_cells},
                             {"footprint_area_km2", s.footprint_area_km2},
                             {"responses", stem + ".csv"},
                             {"responses_canonical", stem + "_canonical.csv"}});
  }
  report["shocks"] = shock_reports;
  write_json(dir / "report.json", report);
  c.info("wrote " + dir.string());
  return kOk;
}

int cmd_synth(const Context& c) {
  c.info("writing synthetic fixture to " + c.out.string());
  synth::write_fixture(c.out, c.cfg.synth, c.cfg.seed);
  return kOk;
}

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case ErrorCategory::Config: return kConfigError;
    case ErrorCategory::Data: return kDataError;
    case ErrorCategory::Numerical: return kNumericalError;
  }
  return kDataError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& log, std::ostream& err) {
  CLI::App app{"Weather shocks and sectoral prices: baselines, shocks, local projections, associated factors, FIRA"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "random seed (overrides seed)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "suppress progress messages");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"baseline", "monthly climatology grids and regional summary"},
      {"anomaly", "anomaly fields and regional anomaly series"},
      {"shocks", "threshold and conditioned shock series"},
      {"lp", "local-projection battery over sectors and shock variants"},
      {"factors", "associated factors between sector panel and field"},
      {"fira", "functional impulse responses to spatial shocks"},
      {"synth", "write a synthetic fixture directory"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    Context c;
    c.quiet = quiet;
    c.log = &log;
    c.err = &err;
    if (!config_path.empty()) {
      c.cfg = config::load(config_path);
    } else if (command != "synth") {
      fail(ErrorCode::InvalidConfig, "--config: required by '" + command + "'");
    }
    if (seed) {
      c.cfg.seed = *seed;
      if (c.cfg.factors) c.cfg.factors->factor.seed = *seed;
      if (c.cfg.fira) c.cfg.fira->factor.seed = *seed;
    }
    c.threads = threads.value_or(c.cfg.threads);
    if (!out_dir.empty()) c.out = out_dir;
    else if (c.cfg.output_dir) c.out = *c.cfg.output_dir;
    else fail(ErrorCode::InvalidConfig, "--out: no output directory (set --out or output_dir)");

    if (command == "baseline") return cmd_baseline(c);
    if (command == "anomaly") return cmd_anomaly(c);
    if (command == "shocks") return cmd_shocks(c);
    if (command == "lp") return cmd_lp(c);
    if (command == "factors") return cmd_factors(c);
    if (command == "fira") return cmd_fira(c);
    return cmd_synth(c);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace climprice::cli
