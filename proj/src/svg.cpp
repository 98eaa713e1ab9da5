#include "climprice/svg.hpp"

#include <algorithm>
#include <cmath>

#include "climprice/csv.hpp"

namespace climprice::svg {

namespace {

std::string f2(double v) { return csv::format_fixed(v, 2); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(double w, double h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(w) + "\" height=\"" + f2(h) + "\" viewBox=\"0 0 " +
         f2(w) + " " + f2(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start") {
  return "<text x=\"" + f2(x) + "\" y=\"" + f2(y) + "\" text-anchor=\"" + anchor + "\">" + xml_escape(s) + "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, const char* stroke, const char* extra = "") {
  return "<line x1=\"" + f2(x1) + "\" y1=\"" + f2(y1) + "\" x2=\"" + f2(x2) + "\" y2=\"" + f2(y2) + "\" stroke=\"" +
         stroke + "\"" + extra + "/>\n";
}

std::string rect(double x, double y, double w, double h, const std::string& fill) {
  return "<rect x=\"" + f2(x) + "\" y=\"" + f2(y) + "\" width=\"" + f2(w) + "\" height=\"" + f2(h) + "\" fill=\"" +
         fill + "\"/>\n";
}

// Blue-white-red, t in [-1, 1].
std::string diverging(double t) {
  t = std::clamp(t, -1.0, 1.0);
  int r = 255, g = 255, b = 255;
  if (t > 0) {
    g = b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  } else if (t < 0) {
    r = g = static_cast<int>(std::lround(255.0 * (1.0 + t)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string fan_chart(const std::string& title, const lp::IrfResult& irf) {
  const double W = 480, H = 300, left = 50, right = 15, top = 30, bottom = 35;
  const double pw = W - left - right, ph = H - top - bottom;
  const auto& hs = irf.horizons;
  double lo = 0.0, hi = 0.0;
  for (const auto& e : hs) {
    lo = std::min(lo, e.lo);
    hi = std::max(hi, e.hi);
  }
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const int hmax = hs.empty() ? 1 : std::max(1, hs.back().h);
  auto X = [&](double h) { return left + pw * h / hmax; };
  auto Y = [&](double v) { return top + ph * (hi - v) / (hi - lo); };

  std::string s = header(W, H);
  s += rect(0, 0, W, H, "#ffffff");
  s += text(W / 2, 18, title, "middle");
  if (!hs.empty()) {
    std::string band = "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" points=\"";
    for (const auto& e : hs) band += f2(X(e.h)) + "," + f2(Y(e.hi)) + " ";
    for (auto it = hs.rbegin(); it != hs.rend(); ++it) band += f2(X(it->h)) + "," + f2(Y(it->lo)) + " ";
    band.pop_back();
    s += band + "\"/>\n";
    std::string path = "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
    for (const auto& e : hs) path += f2(X(e.h)) + "," + f2(Y(e.estimate)) + " ";
    path.pop_back();
    s += path + "\"/>\n";
  }
  s += line(left, Y(0), left + pw, Y(0), "#444444", " stroke-dasharray=\"3,3\"");
  s += line(left, top, left, top + ph, "#000000");
  s += line(left, top + ph, left + pw, top + ph, "#000000");
  for (int h = 0; h <= hmax; h += std::max(1, hmax / 6)) s += text(X(h), top + ph + 14, std::to_string(h), "middle");
  s += text(left + pw / 2, H - 6, "horizon (months)", "middle");
  s += text(left - 4, Y(hi) + 4, csv::format_fixed(hi, 3), "end");
  s += text(left - 4, Y(lo), csv::format_fixed(lo, 3), "end");
  s += text(left + pw, top - 4,
            csv::format_fixed(100.0 * irf.ci_level, 0) + "% CI, p=" + std::to_string(irf.lags.p) +
                ", l=" + std::to_string(irf.lags.l),
            "end");
  s += "</svg>\n";
  return s;
}

std::string fira_figure(const std::string& title, const fira::ShockSurface& shock, const fira::ResponsePaths& paths,
                        bool raw) {
  const Eigen::MatrixXd& m = raw ? paths.raw : paths.canonical;
  const auto& dom = *shock.surface.domain;
  const double map_w = 260, cell_h_max = 14;
  const double cw = map_w / static_cast<double>(dom.cols());
  const double chh = std::min(cell_h_max, cw * static_cast<double>(dom.cols()) / static_cast<double>(dom.rows()));
  const double map_h = chh * static_cast<double>(dom.rows());
  const double top = 40, gap = 120;
  const auto nh = m.rows();
  const auto ns = m.cols();
  const double hm_cell_w = std::max(8.0, 300.0 / std::max<double>(1.0, static_cast<double>(nh)));
  const double hm_cell_h = 12;
  const double hm_x = 20 + map_w + gap;
  const double W = hm_x + hm_cell_w * static_cast<double>(nh) + 20;
  const double H = top + std::max(map_h, hm_cell_h * static_cast<double>(ns)) + 50;

  std::string s = header(W, H);
  s += rect(0, 0, W, H, "#ffffff");
  s += text(W / 2, 18, title, "middle");
  s += text(20, top - 8, "shock " + csv::format_fixed(shock.magnitude, 2) + ", radius " +
                             csv::format_fixed(shock.radius_km, 0) + " km");

  const double peak = std::max(std::abs(shock.magnitude), 1e-300);
  for (std::size_t r = 0; r < dom.rows(); ++r) {
    for (std::size_t c = 0; c < dom.cols(); ++c) {
      const std::size_t cell = dom.cell_index(r, c);
      const double y = top + map_h - chh * static_cast<double>(r + 1);  // north up
      const std::string fill = dom.valid(cell) ? diverging(shock.surface.values[static_cast<Eigen::Index>(cell)] / peak)
                                               : std::string("#d9d9d9");
      s += rect(20 + cw * static_cast<double>(c), y, cw, chh, fill);
    }
  }

  const double amax = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index j = 0; j < ns; ++j) {
    const double y = top + hm_cell_h * static_cast<double>(j);
    s += text(hm_x - 4, y + hm_cell_h - 2, paths.sectors[static_cast<std::size_t>(j)], "end");
    for (Eigen::Index h = 0; h < nh; ++h) {
      s += rect(hm_x + hm_cell_w * static_cast<double>(h), y, hm_cell_w, hm_cell_h, diverging(m(h, j) / amax));
    }
  }
  const double axis_y = top + hm_cell_h * static_cast<double>(ns) + 14;
  for (Eigen::Index h = 0; h < nh; h += std::max<Eigen::Index>(1, nh / 8)) {
    s += text(hm_x + hm_cell_w * (static_cast<double>(h) + 0.5), axis_y, std::to_string(h), "middle");
  }
  s += text(hm_x, axis_y + 16, std::string("horizon (months); max |response| ") + csv::format_fixed(amax, 4) +
                                   (raw ? " pp" : " sd"));
  s += "</svg>\n";
  return s;
}

}  // namespace climprice::svg
