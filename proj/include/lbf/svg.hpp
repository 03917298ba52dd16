#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lbf/hybrid.hpp"
#include "lbf/sim.hpp"

namespace lbf {

void write_arc_csv(const std::string& path, const HybridArc& arc);

struct PlotOptions {
    int dim_x = 0, dim_y = 1; // projection dims (state indices)
    int grid = 161;           // level-set sampling resolution
    int size = 640;           // pixels
};

// Phase-plane SVG: S/I/O boxes, V level sets (A at 0, B at beta) sampled on
// the projection plane with the remaining coordinates fixed at the center
// of O, and trajectory polylines.
void write_phase_svg(const std::string& path, const SpecSets& sets,
                     const StatePartition& part, const std::optional<Expr>& V,
                     std::optional<double> beta,
                     const std::vector<HybridArc>& arcs,
                     const PlotOptions& opts = {});

} // namespace lbf
