#include "climprice/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <set>

#include "climprice/csv.hpp"
#include "climprice/error.hpp"

namespace climprice {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr char kMagic[4] = {'S', 'G', 'F', '1'};
constexpr std::size_t kHeaderBytes = 4 + 6 * 8 + 4;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T read_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof v);
  }
  return v;
}

template <typename T>
void append_le(std::string& out, T v) {
  char b[sizeof v];
  std::memcpy(b, &v, sizeof v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof v);
  out.append(b, sizeof v);
}

// Lattice step from sorted unique coordinates; 0 when only one coordinate.
double infer_step(const std::vector<double>& coords) {
  double step = 0.0;
  for (std::size_t i = 1; i < coords.size(); ++i) {
    const double d = coords[i] - coords[i - 1];
    if (step == 0.0 || d < step) step = d;
  }
  return step;
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || std::abs(x - out.back()) > 1e-9) out.push_back(x);
  }
  return out;
}

std::size_t lattice_index(double coord, double origin, double step, std::string_view source, std::size_t line) {
  const double k = (coord - origin) / step;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6) {
    fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(line) +
                                    ": coordinate " + csv::format_number(coord) + " is off the regular grid");
  }
  return static_cast<std::size_t>(r);
}

// Shared tail of both readers: mask inference and compression.
SurfaceSeries finish_series(const GridBounds& bounds, const GridStep& step, std::vector<YearMonth> times,
                            const Eigen::MatrixXd& full, std::string_view source) {
  const auto cells = static_cast<std::size_t>(full.cols());
  std::vector<std::uint8_t> mask(cells, 1);
  for (std::size_t c = 0; c < cells; ++c) {
    for (Eigen::Index t = 0; t < full.rows(); ++t) {
      if (!std::isfinite(full(t, static_cast<Eigen::Index>(c)))) {
        mask[c] = 0;
        break;
      }
    }
  }
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    fail(ErrorCode::AllMasked, std::string(source) + ": no cell is observed in every frame");
  }
  SurfaceSeries series;
  series.domain = GridDomain::build(bounds, step, std::move(mask));
  series.times = std::move(times);
  const auto valid = series.domain->valid_cells();
  series.values.resize(full.rows(), static_cast<Eigen::Index>(valid.size()));
  for (std::size_t k = 0; k < valid.size(); ++k) {
    series.values.col(static_cast<Eigen::Index>(k)) = full.col(static_cast<Eigen::Index>(valid[k]));
  }
  require_monthly(series.times, source);
  return series;
}

SurfaceSeries parse_long_csv(std::string_view text, std::string_view source, const std::string& variable) {
  const csv::Table table = csv::parse(text, source);
  const auto& h = table.header;
  if (h.size() != 4 || h[0] != "time" || h[1] != "lat" || h[2] != "lon" || (h[3] != "value" && h[3] != variable)) {
    fail(ErrorCode::ParseError, std::string(source) + ":1: expected header time,lat,lon,value");
  }
  if (table.rows.empty()) fail(ErrorCode::ParseError, std::string(source) + ": no data rows");

  struct Entry {
    YearMonth time;
    double lat, lon, value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  entries.reserve(table.rows.size());
  std::vector<double> lats, lons;
  std::set<YearMonth> months;
  for (const auto& row : table.rows) {
    Entry e;
    e.line = row.line;
    try {
      e.time = YearMonth::parse(row.fields[0]);
    } catch (const Error&) {
      fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(row.line) + ": bad time '" +
                                      row.fields[0] + "'");
    }
    e.lat = csv::parse_number(row.fields[1], source, row.line);
    e.lon = csv::parse_number(row.fields[2], source, row.line);
    e.value = csv::parse_number(row.fields[3], source, row.line);
    if (!std::isfinite(e.lat) || !std::isfinite(e.lon)) {
      fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(row.line) + ": missing coordinate");
    }
    lats.push_back(e.lat);
    lons.push_back(e.lon);
    months.insert(e.time);
    entries.push_back(e);
  }
  lats = unique_sorted(std::move(lats));
  lons = unique_sorted(std::move(lons));
  double step_lat = infer_step(lats);
  double step_lon = infer_step(lons);
  if (step_lat == 0.0) step_lat = step_lon;
  if (step_lon == 0.0) step_lon = step_lat;
  if (step_lat == 0.0) step_lat = step_lon = GridStep{}.lat;

  std::vector<std::size_t> row_of(entries.size()), col_of(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    row_of[i] = lattice_index(entries[i].lat, lats.front(), step_lat, source, entries[i].line);
    col_of[i] = lattice_index(entries[i].lon, lons.front(), step_lon, source, entries[i].line);
  }
  const std::size_t rows = row_of.empty() ? 0 : *std::max_element(row_of.begin(), row_of.end()) + 1;
  const std::size_t cols = col_of.empty() ? 0 : *std::max_element(col_of.begin(), col_of.end()) + 1;
  GridBounds bounds{lats.front() - 0.5 * step_lat, lats.front() + (static_cast<double>(rows) - 0.5) * step_lat,
                    lons.front() - 0.5 * step_lon, lons.front() + (static_cast<double>(cols) - 0.5) * step_lon};

  const YearMonth first = *months.begin();
  const YearMonth last = *months.rbegin();
  const std::int64_t count = last - first + 1;
  if (static_cast<std::size_t>(count) != months.size()) {
    for (YearMonth m = first; m <= last; m = m + 1) {
      if (!months.count(m)) fail(ErrorCode::IrregularCalendar, std::string(source) + ": month " + m.str() + " is missing");
    }
  }
  Eigen::MatrixXd full = Eigen::MatrixXd::Constant(count, static_cast<Eigen::Index>(rows * cols), kNaN);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(count) * rows * cols, 0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto t = static_cast<std::size_t>(entries[i].time - first);
    const std::size_t c = row_of[i] * cols + col_of[i];
    auto& flag = seen[t * rows * cols + c];
    if (flag) {
      fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(entries[i].line) +
                                      ": duplicate cell for " + entries[i].time.str());
    }
    flag = 1;
    full(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c)) = entries[i].value;
  }
  return finish_series(bounds, GridStep{step_lat, step_lon}, month_range(first, count), full, source);
}

SurfaceSeries parse_framed_binary(std::string_view bytes, std::string_view source) {
  auto at = [&](std::size_t offset, const std::string& msg) -> Error {
    return Error(ErrorCode::ParseError, std::string(source) + " @offset " + std::to_string(offset) + ": " + msg);
  };
  if (bytes.size() < kHeaderBytes) throw at(bytes.size(), "truncated header");
  const char* p = bytes.data() + 4;
  GridBounds bounds;
  GridStep step;
  bounds.lat_min = read_le<double>(p);
  bounds.lat_max = read_le<double>(p + 8);
  bounds.lon_min = read_le<double>(p + 16);
  bounds.lon_max = read_le<double>(p + 24);
  step.lat = read_le<double>(p + 32);
  step.lon = read_le<double>(p + 40);
  const auto frames = read_le<std::uint32_t>(p + 48);
  if (frames == 0) throw at(52, "zero frames");

  std::size_t rows = 0, cols = 0;
  try {
    auto probe = GridDomain::build(bounds, step);
    rows = probe->rows();
    cols = probe->cols();
  } catch (const Error& e) {
    throw at(4, std::string("invalid grid header: ") + e.what());
  }
  const std::size_t cells = rows * cols;
  const std::size_t frame_bytes = 4 + 8 * cells;
  const std::size_t expected = kHeaderBytes + frame_bytes * frames;
  if (bytes.size() != expected) {
    throw at(std::min(bytes.size(), expected),
             "expected " + std::to_string(expected) + " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<YearMonth> times;
  Eigen::MatrixXd full(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(cells));
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t offset = kHeaderBytes + f * frame_bytes;
    const char* fp = bytes.data() + offset;
    const YearMonth month = YearMonth::from_epoch_days(read_le<std::int32_t>(fp));
    if (!times.empty() && month - times.back() != 1) {
      throw Error(ErrorCode::IrregularCalendar, std::string(source) + " @offset " + std::to_string(offset) +
                                                    ": frame " + month.str() + " follows " + times.back().str());
    }
    times.push_back(month);
    for (std::size_t c = 0; c < cells; ++c) {
      full(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = read_le<double>(fp + 4 + 8 * c);
    }
  }
  return finish_series(bounds, step, std::move(times), full, source);
}

}  // namespace

std::optional<std::size_t> Panel::column(const std::string& id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

Panel Panel::select(std::span<const std::string> wanted) const {
  Panel out;
  out.times = times;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(wanted.size()));
  for (std::size_t j = 0; j < wanted.size(); ++j) {
    auto c = column(wanted[j]);
    if (!c) fail(ErrorCode::InvalidArgument, "unknown series id '" + wanted[j] + "'");
    out.ids.push_back(wanted[j]);
    out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(*c));
  }
  return out;
}

Eigen::VectorXd Panel::series(const std::string& id) const {
  auto c = column(id);
  if (!c) fail(ErrorCode::InvalidArgument, "unknown series id '" + id + "'");
  return values.col(static_cast<Eigen::Index>(*c));
}

Transform parse_transform(std::string_view text) {
  if (text == "none") return Transform::None;
  if (text == "yoy") return Transform::Yoy;
  fail(ErrorCode::InvalidArgument, "unknown transform '" + std::string(text) + "' (expected none|yoy)");
}

Panel parse_panel_csv(std::string_view text, std::string_view source) {
  const csv::Table table = csv::parse(text, source);
  if (table.header.size() < 2) fail(ErrorCode::ParseError, std::string(source) + ":1: need a time column and at least one series");
  Panel panel;
  panel.ids.assign(table.header.begin() + 1, table.header.end());
  {
    std::set<std::string> unique(panel.ids.begin(), panel.ids.end());
    if (unique.size() != panel.ids.size()) fail(ErrorCode::ParseError, std::string(source) + ":1: duplicate series id");
  }
  panel.values.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(panel.ids.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    YearMonth t;
    try {
      t = YearMonth::parse(row.fields[0]);
    } catch (const Error&) {
      fail(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(row.line) + ": bad time '" + row.fields[0] + "'");
    }
    panel.times.push_back(t);
    for (std::size_t j = 0; j < panel.ids.size(); ++j) {
      panel.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          csv::parse_number(row.fields[j + 1], source, row.line);
    }
  }
  if (panel.times.empty()) fail(ErrorCode::ParseError, std::string(source) + ": no data rows");
  require_monthly(panel.times, source);
  return panel;
}

PanelLoadResult preprocess_panel(const Panel& raw, const PanelOptions& options) {
  require_monthly(raw.times, "panel");
  Panel work;
  work.ids = raw.ids;
  if (options.transform == Transform::Yoy) {
    const Eigen::Index T = static_cast<Eigen::Index>(raw.size());
    if (T <= 12) fail(ErrorCode::NoSectorsRemain, "yoy transform needs more than 12 months");
    work.times.assign(raw.times.begin() + 12, raw.times.end());
    work.values.resize(T - 12, raw.values.cols());
    for (Eigen::Index t = 12; t < T; ++t) {
      for (Eigen::Index j = 0; j < raw.values.cols(); ++j) {
        const double now = raw.values(t, j);
        const double before = raw.values(t - 12, j);
        const double g = 100.0 * (now / before - 1.0);
        work.values(t - 12, j) = std::isfinite(g) ? g : kNaN;
      }
    }
  } else {
    work.times = raw.times;
    work.values = raw.values;
  }

  Panel windowed;
  windowed.ids = work.ids;
  const MonthWindow window = options.window.value_or(MonthWindow{work.times.front(), work.times.back()});
  if (window.size() <= 0) fail(ErrorCode::InvalidArgument, "empty analysis window");
  windowed.times = month_range(window.first, window.size());
  windowed.values = Eigen::MatrixXd::Constant(window.size(), work.values.cols(), kNaN);
  for (std::size_t t = 0; t < work.times.size(); ++t) {
    if (window.contains(work.times[t])) {
      windowed.values.row(work.times[t] - window.first) = work.values.row(static_cast<Eigen::Index>(t));
    }
  }

  PanelLoadResult result;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < windowed.values.cols(); ++j) {
    if (windowed.values.col(j).allFinite()) {
      keep.push_back(j);
    } else {
      result.dropped.push_back(windowed.ids[static_cast<std::size_t>(j)]);
    }
  }
  if (keep.empty()) fail(ErrorCode::NoSectorsRemain, "every series has gaps in " + window.first.str() + ".." + window.last.str());
  result.panel.times = windowed.times;
  result.panel.values.resize(windowed.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    result.panel.ids.push_back(windowed.ids[static_cast<std::size_t>(keep[k])]);
    result.panel.values.col(static_cast<Eigen::Index>(k)) = windowed.values.col(keep[k]);
  }
  return result;
}

PanelLoadResult load_panel(const std::filesystem::path& path, const PanelOptions& options) {
  return preprocess_panel(parse_panel_csv(csv::read_file(path), path.string()), options);
}

void write_panel_csv(const std::filesystem::path& path, const Panel& panel) {
  std::string out = "time";
  for (const auto& id : panel.ids) out += "," + csv::escape(id);
  out += "\n";
  for (std::size_t t = 0; t < panel.times.size(); ++t) {
    out += panel.times[t].str();
    for (Eigen::Index j = 0; j < panel.values.cols(); ++j) {
      out += "," + csv::format_number(panel.values(static_cast<Eigen::Index>(t), j));
    }
    out += "\n";
  }
  csv::write_file(path, out);
}

SurfaceSeries parse_gridded(std::string_view bytes, std::string_view source, const std::string& variable) {
  if (bytes.empty()) fail(ErrorCode::ParseError, std::string(source) + ": empty file");
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return parse_framed_binary(bytes, source);
  return parse_long_csv(bytes, source, variable);
}

SurfaceSeries load_gridded(const std::filesystem::path& path, const std::string& variable) {
  return parse_gridded(csv::read_file(path), path.string(), variable);
}

std::string format_gridded(const SurfaceSeries& series, GridFormat format, const std::string& variable) {
  series.validate();
  const auto& d = *series.domain;
  const auto valid = d.valid_cells();
  std::string out;
  if (format == GridFormat::LongCsv) {
    out = "time,lat,lon," + csv::escape(variable) + "\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
      const std::string stamp = series.times[t].str() + ",";
      for (std::size_t k = 0; k < valid.size(); ++k) {
        out += stamp;
        out += csv::format_number(d.cell_lat(valid[k]));
        out += ",";
        out += csv::format_number(d.cell_lon(valid[k]));
        out += ",";
        out += csv::format_number(series.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)));
        out += "\n";
      }
    }
    return out;
  }
  out.append(kMagic, 4);
  for (double v : {d.bounds().lat_min, d.bounds().lat_max, d.bounds().lon_min, d.bounds().lon_max, d.step().lat, d.step().lon}) {
    append_le(out, v);
  }
  append_le(out, static_cast<std::uint32_t>(series.size()));
  for (std::size_t t = 0; t < series.size(); ++t) {
    append_le(out, series.times[t].epoch_days());
    const Surface frame = series.frame(t);
    for (Eigen::Index c = 0; c < frame.values.size(); ++c) append_le(out, frame.values[c]);
  }
  return out;
}

void write_gridded(const std::filesystem::path& path, const SurfaceSeries& series, GridFormat format,
                   const std::string& variable) {
  csv::write_file(path, format_gridded(series, format, variable));
}

void write_surface_csv(const std::filesystem::path& path, const Surface& surface, YearMonth time,
                       const std::string& variable) {
  SurfaceSeries one{surface.domain, {time}, surface.valid_values().transpose()};
  write_gridded(path, one, GridFormat::LongCsv, variable);
}

MonthWindow align(std::span<const MonthWindow> inputs) {
  if (inputs.size() < 2) fail(ErrorCode::InvalidArgument, "align needs at least two inputs");
  MonthWindow w = inputs.front();
  for (const auto& in : inputs.subspan(1)) {
    w.first = std::max(w.first, in.first);
    w.last = std::min(w.last, in.last);
  }
  if (w.first > w.last) fail(ErrorCode::EmptyIntersection, "inputs share no common month");
  return w;
}

Panel slice(const Panel& panel, const MonthWindow& window) {
  if (panel.times.empty() || window.first < panel.times.front() || window.last > panel.times.back()) {
    fail(ErrorCode::EmptyIntersection, "window " + window.first.str() + ".." + window.last.str() + " not covered by panel");
  }
  const auto start = window.first - panel.times.front();
  Panel out;
  out.ids = panel.ids;
  out.times = month_range(window.first, window.size());
  out.values = panel.values.middleRows(start, window.size());
  return out;
}

SurfaceSeries slice(const SurfaceSeries& series, const MonthWindow& window) {
  if (series.times.empty() || window.first < series.times.front() || window.last > series.times.back()) {
    fail(ErrorCode::EmptyIntersection, "window " + window.first.str() + ".." + window.last.str() + " not covered by series");
  }
  const auto start = window.first - series.times.front();
  return SurfaceSeries{series.domain, month_range(window.first, window.size()), series.values.middleRows(start, window.size())};
}

}  // namespace climprice
