#pragma once

#include <span>
#include <string>
#include <vector>

#include "pedcal/simulate.hpp"
#include "pedcal/trajectory.hpp"
#include "pedcal/vec2.hpp"

namespace pedcal {

// convex region owned by one generator point, clipped to the analysis window
struct VoronoiCell {
    int owner = -1;                // index into the generator list
    std::vector<Vec2> polygon;     // counterclockwise; empty if fully clipped
    double area = 0.0;
};

// cells of all generators clipped to the rectangle; a generator outside the
// rectangle may end up with an empty cell.
// Throws NumericalError for fewer than 3 points, duplicate points, or an
// all-collinear configuration.
std::vector<VoronoiCell> bounded_voronoi(std::span<const Vec2> points,
                                         const Rect& region);

// 1/area of the cell containing the query point; 0 outside every cell.
// Boundary queries resolve to the lowest owner index among the touching
// cells, so repeated lookups are consistent.
double density_at(std::span<const VoronoiCell> cells, const Vec2& query);

struct FDSample {
    double t = 0.0;
    int agent = -1;
    double density = 0.0;  // 1/m^2
    double speed = 0.0;    // m/s
};

struct FDResult {
    std::vector<FDSample> samples;
    std::vector<std::string> warnings;  // skipped sample times and the reason
};

// per-agent (density, speed) samples at each requested time: the frame's
// Voronoi diagram (all agents as generators) is clipped to the region, and
// every agent inside the region contributes one sample. Times snap to the
// nearest grid point. Frames with fewer than 3 agents are skipped with a
// warning record.
FDResult fundamental_diagram(const Trajectory& traj, const Rect& region,
                             std::span<const double> sample_times);

// sample Pearson correlation coefficient; NaN if either variance vanishes
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace pedcal
