#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "climprice/calendar.hpp"
#include "climprice/grid.hpp"

namespace climprice {

// T x m matrix of monthly observations with column identifiers.
// After preprocessing no column contains a missing value.
struct Panel {
  std::vector<YearMonth> times;
  std::vector<std::string> ids;
  Eigen::MatrixXd values;

  std::size_t size() const { return times.size(); }
  std::size_t width() const { return ids.size(); }
  std::optional<std::size_t> column(const std::string& id) const;
  // Throws InvalidArgument naming the first unknown id.
  Panel select(std::span<const std::string> wanted) const;
  Eigen::VectorXd series(const std::string& id) const;
  MonthWindow window() const { return {times.front(), times.back()}; }
};

using SectorPanel = Panel;
using ControlPanel = Panel;

enum class Transform { None, Yoy };
Transform parse_transform(std::string_view text);

struct PanelOptions {
  Transform transform = Transform::None;
  // Analysis window; the panel is restricted to it before the completeness rule.
  std::optional<MonthWindow> window;
};

struct PanelLoadResult {
  Panel panel;
  std::vector<std::string> dropped;  // columns removed for gaps in the window
};

// Parses a sector/control CSV: first column ISO month, header row of ids,
// empty field = missing.
Panel parse_panel_csv(std::string_view text, std::string_view source);

// yoy: 100*(level_t/level_{t-12} - 1), first 12 months dropped. Columns with
// any missing value inside the window are dropped and reported.
// Throws NoSectorsRemain when nothing survives.
PanelLoadResult preprocess_panel(const Panel& raw, const PanelOptions& options);
PanelLoadResult load_panel(const std::filesystem::path& path, const PanelOptions& options);

void write_panel_csv(const std::filesystem::path& path, const Panel& panel);

enum class GridFormat { LongCsv, FramedBinary };

// Reads grid format A (long CSV `time,lat,lon,value`) or format B (`SGF1`
// framed binary), detected from the first bytes. A cell missing in any frame
// is masked in every frame.
SurfaceSeries load_gridded(const std::filesystem::path& path, const std::string& variable = "value");
SurfaceSeries parse_gridded(std::string_view bytes, std::string_view source, const std::string& variable = "value");

std::string format_gridded(const SurfaceSeries& series, GridFormat format, const std::string& variable = "value");
void write_gridded(const std::filesystem::path& path, const SurfaceSeries& series, GridFormat format,
                   const std::string& variable = "value");

// Single surface in format A, stamped with `time`.
void write_surface_csv(const std::filesystem::path& path, const Surface& surface, YearMonth time,
                       const std::string& variable = "value");

// Maximal common window of monthly inputs (latest start .. earliest end).
// Throws InvalidArgument for fewer than two inputs, EmptyIntersection if disjoint.
MonthWindow align(std::span<const MonthWindow> inputs);

Panel slice(const Panel& panel, const MonthWindow& window);
SurfaceSeries slice(const SurfaceSeries& series, const MonthWindow& window);

}  // namespace climprice
