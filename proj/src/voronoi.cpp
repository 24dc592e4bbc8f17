#include "pedcal/voronoi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pedcal/errors.hpp"

namespace pedcal {

namespace {

constexpr double kDuplicateTol = 1e-12;

// clip a convex ccw polygon against the half-plane n.q <= c
std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& poly, const Vec2& n,
                                  double c) {
    std::vector<Vec2> out;
    const std::size_t m = poly.size();
    if (m == 0) return out;
    out.reserve(m + 1);
    for (std::size_t k = 0; k < m; ++k) {
        const Vec2& cur = poly[k];
        const Vec2& nxt = poly[(k + 1) % m];
        const double fc = dot(n, cur) - c;
        const double fn = dot(n, nxt) - c;
        if (fc <= 0.0) {
            out.push_back(cur);
            if (fn > 0.0) {
                const double t = fc / (fc - fn);
                out.push_back(cur + (nxt - cur) * t);
            }
        } else if (fn <= 0.0) {
            const double t = fc / (fc - fn);
            out.push_back(cur + (nxt - cur) * t);
        }
    }
    return out;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double twice = 0.0;
    const std::size_t m = poly.size();
    for (std::size_t k = 0; k < m; ++k) {
        const Vec2& p = poly[k];
        const Vec2& q = poly[(k + 1) % m];
        twice += cross(p, q);
    }
    return 0.5 * twice;
}

void check_generators(std::span<const Vec2> points) {
    if (points.size() < 3)
        throw NumericalError("voronoi: need at least 3 generator points");
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if ((points[i] - points[j]).norm() < kDuplicateTol) {
                std::ostringstream msg;
                msg << "voronoi: duplicate generators " << i << " and " << j;
                throw NumericalError(msg.str());
            }
    // collinearity: measure perpendicular spread about the longest baseline
    std::size_t far = 1;
    double best = 0.0;
    for (std::size_t j = 1; j < points.size(); ++j) {
        const double l = (points[j] - points[0]).norm();
        if (l > best) {
            best = l;
            far = j;
        }
    }
    const Vec2 dir = (points[far] - points[0]) / best;
    double spread = 0.0;
    for (const Vec2& p : points)
        spread = std::max(spread, std::abs(cross(dir, p - points[0])));
    if (spread < 1e-9 * std::max(1.0, best))
        throw NumericalError("voronoi: all generator points are collinear");
}

}  // namespace

std::vector<VoronoiCell> bounded_voronoi(std::span<const Vec2> points,
                                         const Rect& region) {
    check_generators(points);
    if (!(region.width() > 0.0) || !(region.height() > 0.0))
        throw NumericalError("voronoi: clip region must have positive area");

    const std::vector<Vec2> box = {{region.xmin, region.ymin},
                                   {region.xmax, region.ymin},
                                   {region.xmax, region.ymax},
                                   {region.xmin, region.ymax}};
    std::vector<VoronoiCell> cells;
    cells.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<Vec2> poly = box;
        for (std::size_t j = 0; j < points.size() && !poly.empty(); ++j) {
            if (j == i) continue;
            // half-plane of points no farther from p_i than from p_j:
            // (p_j - p_i) . q <= (p_j - p_i) . (p_i + p_j)/2
            const Vec2 n = points[j] - points[i];
            const double c = dot(n, (points[i] + points[j]) * 0.5);
            poly = clip_half_plane(poly, n, c);
        }
        VoronoiCell cell;
        cell.owner = static_cast<int>(i);
        cell.polygon = std::move(poly);
        cell.area = polygon_area(cell.polygon);
        cells.push_back(std::move(cell));
    }
    return cells;
}

double density_at(std::span<const VoronoiCell> cells, const Vec2& query) {
    for (const VoronoiCell& cell : cells) {
        const std::size_t m = cell.polygon.size();
        if (m < 3 || cell.area <= 0.0) continue;
        bool inside = true;
        for (std::size_t k = 0; k < m; ++k) {
            const Vec2& p = cell.polygon[k];
            const Vec2& q = cell.polygon[(k + 1) % m];
            if (cross(q - p, query - p) < -1e-12) {
                inside = false;
                break;
            }
        }
        if (inside) return 1.0 / cell.area;
    }
    return 0.0;
}

FDResult fundamental_diagram(const Trajectory& traj, const Rect& region,
                             std::span<const double> sample_times) {
    FDResult out;
    if (traj.frames() == 0 || !(traj.dt > 0.0)) {
        out.warnings.push_back("empty trajectory");
        return out;
    }
    const std::size_t K = traj.steps();
    for (double t : sample_times) {
        const long long snapped = std::llround(t / traj.dt);
        const std::size_t k = static_cast<std::size_t>(
            std::clamp<long long>(snapped, 0, static_cast<long long>(K)));
        const std::vector<Vec2>& x = traj.positions[k];
        if (x.size() < 3) {
            std::ostringstream w;
            w << "t=" << t << ": fewer than 3 agents in frame, skipped";
            out.warnings.push_back(w.str());
            continue;
        }
        const std::vector<VoronoiCell> cells = bounded_voronoi(x, region);
        bool any = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!region.contains(x[i])) continue;
            if (!(cells[i].area > 0.0)) continue;
            FDSample s;
            s.t = static_cast<double>(k) * traj.dt;
            s.agent = static_cast<int>(i);
            s.density = 1.0 / cells[i].area;
            s.speed = traj.velocities[k][i].norm();
            out.samples.push_back(s);
            any = true;
        }
        if (!any) {
            std::ostringstream w;
            w << "t=" << t << ": no agents inside the region";
            out.warnings.push_back(w.str());
        }
    }
    return out;
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    if (n != ys.size() || n < 2) return std::nan("");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nan("");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace pedcal
