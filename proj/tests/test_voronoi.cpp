#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "pedcal/errors.hpp"
#include "pedcal/rng.hpp"
#include "pedcal/voronoi.hpp"

using namespace pedcal;

namespace {

std::vector<Vec2> random_points(Rng& rng, const Rect& r, std::size_t n) {
    std::vector<Vec2> pts;
    while (pts.size() < n) {
        const Vec2 c = rng.in_rect(r.xmin, r.xmax, r.ymin, r.ymax);
        bool clear = true;
        for (const Vec2& q : pts)
            if ((c - q).norm() < 1e-6) clear = false;  // keep generators distinct
        if (clear) pts.push_back(c);
    }
    return pts;
}

int nearest_generator(std::span<const Vec2> pts, const Vec2& q) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d = (q - pts[i]).norm2();
        if (d < bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

bool polygon_contains(const std::vector<Vec2>& poly, const Vec2& q, double tol) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        if (cross(b - a, q - a) < -tol) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("cell areas partition the analysis rectangle") {
    Rng rng(31);
    const Rect region{0.0, 17.0, 0.0, 4.0};
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng.below(18);
        const std::vector<Vec2> pts = random_points(rng, region, n);
        const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);
        REQUIRE(cells.size() == n);
        double total = 0.0;
        for (const VoronoiCell& c : cells) {
            CHECK(c.area >= 0.0);
            total += c.area;
        }
        CHECK(std::abs(total - region.area()) < 1e-9 * region.area());
    }
}

TEST_CASE("two mirrored generators split the rectangle in equal halves") {
    const Rect region{0.0, 4.0, 0.0, 2.0};
    const std::vector<Vec2> pts{{1.0, 1.0}, {3.0, 1.0}, {2.0, 5.0}};
    // the third generator sits far above; inside the rectangle the first two
    // halve the area along x = 2 up to the sliver claimed from above
    const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);
    CHECK(std::abs(cells[0].area - cells[1].area) < 1e-12);
}

TEST_CASE("a uniform generator grid yields uniform cells") {
    const Rect region{0.0, 5.0, 0.0, 5.0};
    std::vector<Vec2> pts;
    for (int gx = 0; gx < 5; ++gx)
        for (int gy = 0; gy < 5; ++gy)
            pts.push_back(Vec2{0.5 + gx, 0.5 + gy});
    const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);
    for (const VoronoiCell& c : cells) CHECK(std::abs(c.area - 1.0) < 1e-10);
}

TEST_CASE("cells stay inside the region and contain their generator") {
    Rng rng(32);
    const Rect region{-2.0, 3.0, -1.0, 1.5};
    const std::vector<Vec2> pts = random_points(rng, region, 12);
    const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);
    for (const VoronoiCell& c : cells) {
        REQUIRE(c.owner >= 0);
        for (const Vec2& v : c.polygon) {
            CHECK(v.x >= region.xmin - 1e-9);
            CHECK(v.x <= region.xmax + 1e-9);
            CHECK(v.y >= region.ymin - 1e-9);
            CHECK(v.y <= region.ymax + 1e-9);
        }
        CHECK(polygon_contains(c.polygon, pts[static_cast<std::size_t>(c.owner)], 1e-9));
    }
}

TEST_CASE("density lookups agree with the nearest-generator rule") {
    Rng rng(33);
    const Rect region{0.0, 10.0, 0.0, 10.0};
    const std::vector<Vec2> pts = random_points(rng, region, 15);
    const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);

    int agree = 0;
    const int total = 10000;
    for (int k = 0; k < total; ++k) {
        const Vec2 q = rng.in_rect(region.xmin, region.xmax, region.ymin, region.ymax);
        const int g = nearest_generator(pts, q);
        const double expect = 1.0 / cells[static_cast<std::size_t>(g)].area;
        const double got = density_at(cells, q);
        if (got > 0.0 && std::abs(got - expect) < 1e-9 * expect) ++agree;
    }
    // boundary-equidistant queries may resolve to either side
    CHECK(agree >= 99 * total / 100);
}

TEST_CASE("density is zero outside the analysis region") {
    const Rect region{0.0, 2.0, 0.0, 2.0};
    const std::vector<Vec2> pts{{0.5, 0.5}, {1.5, 0.5}, {1.0, 1.5}};
    const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);
    CHECK(density_at(cells, Vec2{5.0, 5.0}) == 0.0);
    CHECK(density_at(cells, Vec2{-0.1, 1.0}) == 0.0);
}

TEST_CASE("degenerate generator sets are rejected") {
    const Rect region{0.0, 1.0, 0.0, 1.0};
    CHECK_THROWS_AS(bounded_voronoi(std::vector<Vec2>{{0.1, 0.1}, {0.9, 0.9}}, region),
                    NumericalError);
    CHECK_THROWS_AS(
        bounded_voronoi(std::vector<Vec2>{{0.1, 0.1}, {0.9, 0.9}, {0.1, 0.1}}, region),
        NumericalError);
    CHECK_THROWS_AS(bounded_voronoi(
                        std::vector<Vec2>{{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.9}}, region),
                    NumericalError);
}

TEST_CASE("generators outside the rectangle may own empty cells") {
    const Rect region{0.0, 1.0, 0.0, 1.0};
    const std::vector<Vec2> pts{{0.2, 0.5}, {0.8, 0.5}, {0.5, 50.0}};
    const std::vector<VoronoiCell> cells = bounded_voronoi(pts, region);
    CHECK(cells[2].area == 0.0);
    CHECK(cells[0].area + cells[1].area ==
          doctest::Approx(region.area()).epsilon(1e-12));
}

TEST_CASE("diagram samples carry the walking speed of a free group") {
    // five agents drifting right at 0.7 m/s on distinct lanes
    Trajectory traj;
    traj.dt = 0.1;
    for (int k = 0; k <= 10; ++k) {
        std::vector<Vec2> xs, vs;
        for (int i = 0; i < 5; ++i) {
            xs.push_back(Vec2{0.5 + 0.07 * k + 0.3 * (i % 2), 0.5 + 0.8 * i});
            vs.push_back(Vec2{0.7, 0.0});
        }
        traj.positions.push_back(xs);
        traj.velocities.push_back(vs);
    }
    const Rect region{0.0, 5.0, 0.0, 5.0};
    const std::vector<double> times{0.0, 0.5, 1.0};
    const FDResult fd = fundamental_diagram(traj, region, times);

    CHECK(fd.warnings.empty());
    CHECK(fd.samples.size() == 15);  // five agents, three frames
    for (const FDSample& s : fd.samples) {
        CHECK(s.speed == doctest::Approx(0.7).epsilon(1e-12));
        CHECK(s.density > 0.0);
    }
    // requested times snap onto the stored grid
    for (const FDSample& s : fd.samples)
        CHECK((s.t == 0.0 || s.t == 0.5 || s.t == 1.0));
}

TEST_CASE("diagram frames with too few agents are skipped with a warning") {
    Trajectory traj;
    traj.dt = 0.1;
    for (int k = 0; k <= 3; ++k) {
        traj.positions.push_back({Vec2{0.1 * k, 0.0}, Vec2{0.1 * k, 1.0}});
        traj.velocities.push_back({Vec2{1.0, 0.0}, Vec2{1.0, 0.0}});
    }
    const Rect region{-1.0, 2.0, -1.0, 2.0};
    const FDResult fd = fundamental_diagram(traj, region, std::vector<double>{0.0, 0.2});
    CHECK(fd.samples.empty());
    CHECK(fd.warnings.size() == 2);
}

TEST_CASE("sample times beyond the trajectory clamp to the last frame") {
    Trajectory traj;
    traj.dt = 0.5;
    for (int k = 0; k <= 2; ++k) {
        traj.positions.push_back({Vec2{0.0, 0.0}, Vec2{1.0, 0.0}, Vec2{0.5, 1.0}});
        traj.velocities.push_back({Vec2{0.3, 0.0}, Vec2{0.3, 0.0}, Vec2{0.3, 0.0}});
    }
    const Rect region{-1.0, 2.0, -1.0, 2.0};
    const FDResult fd = fundamental_diagram(traj, region, std::vector<double>{99.0});
    REQUIRE(fd.samples.size() == 3);
    CHECK(fd.samples[0].t == doctest::Approx(1.0));  // last grid point
}

TEST_CASE("correlation is exact on aligned and anti-aligned data") {
    const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> up{2.0, 4.0, 6.0, 8.0};
    const std::vector<double> down{9.0, 7.0, 5.0, 3.0};
    CHECK(pearson_correlation(xs, up) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson_correlation(xs, down) == doctest::Approx(-1.0).epsilon(1e-12));

    const std::vector<double> flat{5.0, 5.0, 5.0, 5.0};
    CHECK(std::isnan(pearson_correlation(xs, flat)));
}
