#include "climprice/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <initializer_list>

#include "climprice/climatology.hpp"
#include "climprice/csv.hpp"
#include "climprice/error.hpp"

namespace climprice::config {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& key, const std::string& msg) { fail(ErrorCode::InvalidConfig, key + ": " + msg); }

// A JSON object whose keys are checked against a closed list on entry.
class Obj {
 public:
  Obj(const json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) bad(path_.empty() ? "<root>" : path_, "expected an object");
    for (const auto& item : j.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; });
      if (!known) bad(key(item.key()), "unknown key");
    }
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json& at(const std::string& k) const {
    if (!has(k)) bad(key(k), "required key missing");
    return j_.at(k);
  }

  std::string str(const std::string& k) const {
    const json& v = at(k);
    if (!v.is_string()) bad(key(k), "expected a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& k, const std::string& fallback) const { return has(k) ? str(k) : fallback; }

  double num(const std::string& k, double fallback) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    if (!v.is_number()) bad(key(k), "expected a number");
    return v.get<double>();
  }
  double num(const std::string& k) const {
    at(k);
    return num(k, 0.0);
  }

  int integer(const std::string& k, int fallback, int min = std::numeric_limits<int>::min()) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) bad(key(k), "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < min || x > std::numeric_limits<int>::max()) bad(key(k), "out of range (minimum " + std::to_string(min) + ")");
    return static_cast<int>(x);
  }

  bool boolean(const std::string& k, bool fallback) const {
    if (!has(k)) return fallback;
    const json& v = j_.at(k);
    if (!v.is_boolean()) bad(key(k), "expected true or false");
    return v.get<bool>();
  }

  std::vector<std::string> strings(const std::string& k) const {
    std::vector<std::string> out;
    if (!has(k)) return out;
    const json& v = j_.at(k);
    if (!v.is_array()) bad(key(k), "expected an array of strings");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) bad(key(k) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  std::vector<double> numbers(const std::string& k, std::size_t n) const {
    const json& v = at(k);
    if (!v.is_array() || v.size() != n) bad(key(k), "expected an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) bad(key(k), "expected an array of " + std::to_string(n) + " numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

 private:
  const json& j_;
  std::string path_;
};

fs::path input_path(const Obj& o, const std::string& k, const fs::path& base) {
  fs::path p = o.str(k);
  if (p.is_relative() && !base.empty()) p = base / p;
  if (!fs::exists(p)) bad(o.key(k), "file not found: " + p.string());
  return p;
}

YearWindow year_window(const Obj& o, const std::string& k, YearWindow fallback) {
  if (!o.has(k)) return fallback;
  const json& v = o.at(k);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    bad(o.key(k), "expected [first_year, last_year]");
  }
  YearWindow w{v[0].get<int>(), v[1].get<int>()};
  if (w.first > w.last) bad(o.key(k), "first year after last year");
  return w;
}

std::optional<MonthWindow> month_window(const Obj& o, const std::string& k) {
  if (!o.has(k)) return std::nullopt;
  const json& v = o.at(k);
  if (!v.is_array() || v.size() != 2 || !v[0].is_string() || !v[1].is_string()) {
    bad(o.key(k), "expected [\"YYYY-MM\", \"YYYY-MM\"]");
  }
  try {
    MonthWindow w{YearMonth::parse(v[0].get<std::string>()), YearMonth::parse(v[1].get<std::string>())};
    if (w.first > w.last) bad(o.key(k), "window start after end");
    return w;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    bad(o.key(k), e.what());
  }
}

template <class F>
auto guarded(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    bad(key, e.what());
  }
}

PanelInput panel_input(const json& j, const std::string& path, const fs::path& base) {
  Obj o(j, path, {"path", "transform", "window"});
  PanelInput in;
  in.path = input_path(o, "path", base);
  in.options.transform = guarded(o.key("transform"), [&] { return parse_transform(o.str("transform", "none")); });
  in.options.window = month_window(o, "window");
  return in;
}

factors::FactorConfig factor_config(const Obj& o, std::uint64_t seed) {
  factors::FactorConfig c;
  c.tol = o.num("tol", c.tol);
  if (!(c.tol >= 0.0 && c.tol < 1.0)) bad(o.key("tol"), "must lie in [0, 1)");
  c.permutation = o.boolean("permutation", c.permutation);
  c.n_permutations = o.integer("n_permutations", c.n_permutations, 1);
  c.alpha = o.num("alpha", c.alpha);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) bad(o.key("alpha"), "must lie in (0, 1)");
  if (o.has("max_k")) c.max_k = o.integer("max_k", 1, 1);
  c.seed = seed;
  return c;
}

GridBounds bounds_from(const Obj& o, const std::string& k) {
  const auto v = o.numbers(k, 4);
  GridBounds b{v[0], v[1], v[2], v[3]};
  if (!(b.lat_min < b.lat_max && b.lon_min < b.lon_max)) bad(o.key(k), "expected [lat_min, lat_max, lon_min, lon_max]");
  return b;
}

}  // namespace

const VariableInput& RunConfig::variable(const std::string& name, const char* key) const {
  for (const auto& v : variables) {
    if (v.name == name) return v;
  }
  bad(key, "unknown variable '" + name + "'");
}

const RegionSpec& RunConfig::region(const std::string& name, const char* key) const {
  for (const auto& r : regions) {
    if (r.name == name) return r;
  }
  bad(key, "unknown region '" + name + "'");
}

RunConfig parse(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidConfig, std::string("malformed JSON: ") + e.what());
  }
  Obj root(doc, "", {"output_dir", "seed", "threads", "quadrature", "reference_window", "threshold_window", "variables", "regions",
                     "sectors", "controls", "shocks", "lp", "factors", "fira", "synth"});
  RunConfig cfg;
  if (root.has("output_dir")) {
    fs::path out = root.str("output_dir");
    cfg.output_dir = out.is_relative() && !base_dir.empty() ? base_dir / out : out;
  }
  if (root.has("seed")) {
    if (!root.at("seed").is_number_unsigned()) bad("seed", "expected a non-negative integer");
    cfg.seed = root.at("seed").get<std::uint64_t>();
  }
  cfg.threads = root.integer("threads", 1, 1);
  {
    const std::string q = root.str("quadrature", "cos_latitude");
    if (q == "uniform") {
      cfg.quadrature = Quadrature::Uniform;
    } else if (q != "cos_latitude") {
      bad("quadrature", "expected cos_latitude or uniform");
    }
  }
  cfg.reference_window = year_window(root, "reference_window", kDefaultReferenceWindow);
  cfg.threshold_window = year_window(root, "threshold_window", kDefaultThresholdWindow);

  if (root.has("variables")) {
    const json& vars = root.at("variables");
    if (!vars.is_array()) bad("variables", "expected an array");
    for (std::size_t i = 0; i < vars.size(); ++i) {
      Obj v(vars[i], "variables[" + std::to_string(i) + "]", {"name", "path"});
      VariableInput in{v.str("name"), input_path(v, "path", base_dir)};
      for (const auto& prev : cfg.variables) {
        if (prev.name == in.name) bad(v.key("name"), "duplicate variable '" + in.name + "'");
      }
      cfg.variables.push_back(std::move(in));
    }
  }

  if (root.has("regions")) {
    const json& regs = root.at("regions");
    if (!regs.is_array()) bad("regions", "expected an array");
    for (std::size_t i = 0; i < regs.size(); ++i) {
      Obj r(regs[i], "regions[" + std::to_string(i) + "]", {"name", "all", "bbox", "mask_file"});
      RegionSpec spec;
      spec.name = r.str("name");
      const int forms = (r.has("all") ? 1 : 0) + (r.has("bbox") ? 1 : 0) + (r.has("mask_file") ? 1 : 0);
      if (forms != 1) bad(r.key("name"), "region needs exactly one of all, bbox, mask_file");
      if (r.has("all")) {
        if (!r.boolean("all", false)) bad(r.key("all"), "must be true when given");
        spec.kind = RegionSpec::Kind::All;
      } else if (r.has("bbox")) {
        spec.kind = RegionSpec::Kind::Bbox;
        spec.bbox = bounds_from(r, "bbox");
      } else {
        spec.kind = RegionSpec::Kind::MaskFile;
        spec.mask_file = input_path(r, "mask_file", base_dir);
      }
      cfg.regions.push_back(std::move(spec));
    }
  }
  if (cfg.regions.empty()) cfg.regions.push_back({"all", RegionSpec::Kind::All, {}, {}});

  if (root.has("sectors")) cfg.sectors = panel_input(root.at("sectors"), "sectors", base_dir);
  if (root.has("controls")) cfg.controls = panel_input(root.at("controls"), "controls", base_dir);

  if (root.has("shocks")) {
    Obj s(root.at("shocks"), "shocks", {"variable", "region", "threshold", "variants", "extreme_multiplier"});
    ShockConfig sc;
    sc.variable = s.str("variable");
    cfg.variable(sc.variable, "shocks.variable");
    sc.region = s.str("region", cfg.regions.front().name);
    cfg.region(sc.region, "shocks.region");
    if (s.has("threshold")) {
      const json& t = s.at("threshold");
      if (t.is_string()) {
        if (t.get<std::string>() != "auto") bad("shocks.threshold", "expected \"auto\" or a positive number");
      } else if (t.is_number() && t.get<double>() > 0.0) {
        sc.threshold = t.get<double>();
      } else {
        bad("shocks.threshold", "expected \"auto\" or a positive number");
      }
    }
    if (s.has("variants")) sc.variants = s.strings("variants");
    if (sc.variants.empty()) bad("shocks.variants", "at least one variant required");
    sc.extreme_multiplier = s.num("extreme_multiplier", sc.extreme_multiplier);
    if (!(sc.extreme_multiplier >= 1.0)) bad("shocks.extreme_multiplier", "must be >= 1");
    for (const auto& v : sc.variants) guarded("shocks.variants", [&] { return variant_conditioning(v, sc.extreme_multiplier); });
    cfg.shocks = std::move(sc);
  }

  if (root.has("lp")) {
    Obj o(root.at("lp"), "lp", {"h_max", "p_max", "r", "l_max", "lag_selection", "ci_level", "contemporaneous_controls",
                                "hac_bandwidth", "endogenous", "controls", "sector_endogenous"});
    LpConfig lc;
    auto& sp = lc.spec;
    sp.h_max = o.integer("h_max", sp.h_max, 0);
    sp.p_max = o.integer("p_max", sp.p_max, 1);
    sp.r = o.integer("r", sp.r, 0);
    sp.l_max = o.integer("l_max", sp.l_max, 0);
    const std::string sel = o.str("lag_selection", "aic");
    if (sel == "aic") sp.lag_selection = lp::LagSelection::Aic;
    else if (sel == "fixed") sp.lag_selection = lp::LagSelection::Fixed;
    else bad("lp.lag_selection", "expected \"aic\" or \"fixed\"");
    sp.ci_level = o.num("ci_level", sp.ci_level);
    sp.contemporaneous_controls = o.boolean("contemporaneous_controls", sp.contemporaneous_controls);
    sp.hac_bandwidth = o.integer("hac_bandwidth", sp.hac_bandwidth, -1);
    guarded("lp", [&] { sp.validate(); return 0; });
    lc.endogenous = o.strings("endogenous");
    lc.controls = o.strings("controls");
    if ((!lc.endogenous.empty() || !lc.controls.empty()) && !cfg.controls) bad("lp", "endogenous/controls need a controls panel");
    if (o.has("sector_endogenous")) lc.sector_endogenous = panel_input(o.at("sector_endogenous"), "lp.sector_endogenous", base_dir);
    if (!cfg.sectors) bad("sectors", "required by lp");
    if (!cfg.shocks) bad("shocks", "required by lp");
    cfg.lp = std::move(lc);
  }

  if (root.has("factors")) {
    Obj o(root.at("factors"), "factors", {"variable", "tol", "permutation", "n_permutations", "alpha", "max_k"});
    FactorsConfig fc;
    fc.variable = o.str("variable");
    cfg.variable(fc.variable, "factors.variable");
    fc.factor = factor_config(o, cfg.seed);
    if (!cfg.sectors) bad("sectors", "required by factors");
    cfg.factors = std::move(fc);
  }

  if (root.has("fira")) {
    Obj o(root.at("fira"), "fira", {"variable", "h_max", "q", "s", "l", "standardize_blocks", "z_controls", "tol",
                                    "permutation", "n_permutations", "alpha", "max_k", "shocks"});
    FiraConfig fc;
    fc.variable = o.str("variable");
    cfg.variable(fc.variable, "fira.variable");
    fc.h_max = o.integer("h_max", fc.h_max, 0);
    fc.design.lags.q = o.integer("q", 0, 0);
    fc.design.lags.s = o.integer("s", 0, 0);
    fc.design.lags.l = o.integer("l", 0, 0);
    fc.design.standardize_blocks = o.boolean("standardize_blocks", false);
    fc.z_controls = o.strings("z_controls");
    if (!fc.z_controls.empty() && !cfg.controls) bad("fira.z_controls", "needs a controls panel");
    fc.factor = factor_config(o, cfg.seed);
    if (o.has("shocks")) {
      const json& arr = o.at("shocks");
      if (!arr.is_array()) bad("fira.shocks", "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Obj s(arr[i], "fira.shocks[" + std::to_string(i) + "]", {"name", "magnitude", "center", "radius_km", "profile"});
        FiraShockConfig sh;
        sh.name = s.str("name");
        for (const auto& prev : fc.shocks) {
          if (prev.name == sh.name) bad(s.key("name"), "duplicate shock name '" + sh.name + "'");
        }
        sh.magnitude = s.num("magnitude");
        const auto c = s.numbers("center", 2);
        sh.center_lat = c[0];
        sh.center_lon = c[1];
        sh.radius_km = s.num("radius_km", sh.radius_km);
        if (!(sh.radius_km > 0.0)) bad(s.key("radius_km"), "must be > 0");
        sh.profile = guarded(s.key("profile"), [&] { return fira::parse_profile(s.str("profile", "cosine")); });
        fc.shocks.push_back(std::move(sh));
      }
    }
    if (!cfg.sectors) bad("sectors", "required by fira");
    cfg.fira = std::move(fc);
  }

  if (root.has("synth")) {
    Obj o(root.at("synth"), "synth", {"first_year", "last_year", "bounds", "step", "sectors", "planted_lag",
                                      "planted_effect", "format"});
    SynthConfig& s = cfg.synth;
    s.first_year = o.integer("first_year", s.first_year);
    s.last_year = o.integer("last_year", s.last_year);
    if (s.first_year > 1950 || s.last_year < 2021) bad("synth", "years must cover 1950-2021");
    if (o.has("bounds")) s.bounds = bounds_from(o, "bounds");
    if (o.has("step")) {
      const double st = o.num("step");
      if (!(st > 0.0)) bad("synth.step", "must be > 0");
      s.step = {st, st};
    }
    s.sectors = o.integer("sectors", s.sectors, 2);
    s.planted_lag = o.integer("planted_lag", s.planted_lag, 0);
    s.planted_effect = o.num("planted_effect", s.planted_effect);
    const std::string fmt = o.str("format", "binary");
    if (fmt == "binary") s.format = GridFormat::FramedBinary;
    else if (fmt == "csv") s.format = GridFormat::LongCsv;
    else bad("synth.format", "expected \"binary\" or \"csv\"");
  }
  return cfg;
}

RunConfig load(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::InvalidConfig, "--config: file not found: " + path.string());
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const Error& e) {
    fail(ErrorCode::InvalidConfig, std::string("--config: ") + e.what());
  }
  RunConfig cfg = parse(text, path.parent_path());
  cfg.source = path;
  return cfg;
}

std::vector<std::uint8_t> region_mask(const RegionSpec& region, const GridDomain& domain) {
  switch (region.kind) {
    case RegionSpec::Kind::All:
      return full_region(domain);
    case RegionSpec::Kind::Bbox:
      return bbox_region(domain, region.bbox);
    case RegionSpec::Kind::MaskFile:
      break;
  }
  const auto table = csv::read(region.mask_file);
  const std::string src = region.mask_file.string();
  if (table.header.size() != 2 || table.header[0] != "lat" || table.header[1] != "lon") {
    fail(ErrorCode::ParseError, src + ":1: expected header lat,lon");
  }
  std::vector<std::uint8_t> mask(domain.cell_count(), 0);
  for (const auto& row : table.rows) {
    if (row.fields.size() != 2) fail(ErrorCode::ParseError, src + ":" + std::to_string(row.line) + ": expected 2 fields");
    const double lat = csv::parse_number(row.fields[0], src, row.line);
    const double lon = csv::parse_number(row.fields[1], src, row.line);
    const auto cell = domain.locate(lat, lon);
    if (!cell) fail(ErrorCode::ParseError, src + ":" + std::to_string(row.line) + ": cell outside the grid");
    mask[*cell] = 1;
  }
  return mask;
}

}  // namespace climprice::config
