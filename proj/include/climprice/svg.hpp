#pragma once

#include <string>

#include "climprice/fira.hpp"
#include "climprice/local_projections.hpp"

// Plain SVG text. Coordinates are printed with fixed precision so identical
// inputs give identical bytes.
namespace climprice::svg {

// Point estimates with the confidence band, horizon on the x axis.
std::string fan_chart(const std::string& title, const lp::IrfResult& irf);

// Shock map beside a sector-by-horizon response heatmap.
std::string fira_figure(const std::string& title, const fira::ShockSurface& shock, const fira::ResponsePaths& paths,
                        bool raw);

}  // namespace climprice::svg
