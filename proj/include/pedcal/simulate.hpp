#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pedcal/model.hpp"
#include "pedcal/trajectory.hpp"
#include "pedcal/vec2.hpp"

namespace pedcal {

struct Rect {
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
    bool contains(const Vec2& p) const {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
};

enum class EdgeRule { Reflective, Periodic };

// per-group treatment of the four domain edges; periodic edges pair with the
// opposite edge of the same axis, so they must be periodic together
struct GroupBoundaries {
    EdgeRule left = EdgeRule::Reflective;
    EdgeRule right = EdgeRule::Reflective;
    EdgeRule bottom = EdgeRule::Reflective;
    EdgeRule top = EdgeRule::Reflective;
};

struct GroupSpec {
    int count = 0;
    Vec2 desired;            // desired velocity shared by the group
    std::string tag;         // label used in exports ("blue", "red", ...)
    Rect spawn;              // initial-position region
    GroupBoundaries bounds;  // edge rules for this group
};

struct Scenario {
    Rect domain;
    std::vector<GroupSpec> groups;
    double d = 0.0;  // body diameter, also the initial min-separation
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
    int total_agents() const;
    // group index per agent, in spawn order (group 0 agents first)
    std::vector<int> agent_groups() const;
    std::vector<Vec2> desired_velocities() const;
};

// rejection-samples initial positions (pairwise separation > d, per-group
// spawn rectangles) and sets every agent's velocity to its desired velocity
void init_scenario(const Scenario& sc, std::vector<Vec2>& positions,
                   std::vector<Vec2>& velocities);

// one step of the splitting scheme:
//   half position drift, implicit velocity relaxation, explicit interaction
//   kick, half position drift.
// kick_sign = -1 applies the interaction with the sign of the model equation
// (repulsive at short range); +1 is exposed for sign-sensitivity checks.
void leapfrog_step(std::vector<Vec2>& positions, std::vector<Vec2>& velocities,
                   std::span<const Vec2> desired, const ModelParams& p, double dt,
                   double kick_sign = -1.0);

// applies the edge rules in place: reflective checks first, then periodic
// wraps; guarantees no position lies outside the closed domain afterwards
void enforce_boundaries(std::vector<Vec2>& positions, std::vector<Vec2>& velocities,
                        const Scenario& sc, std::span<const int> agent_groups);

// full run from the scenario's own initial state; records every frame
Trajectory simulate(const Scenario& sc, const ModelParams& p, double T, double dt);

// boundary-free run from an explicit initial state; used by the calibration
// pipeline where walls are not part of the tracked dynamics
Trajectory simulate_free(std::span<const Vec2> x0, std::span<const Vec2> v0,
                         std::span<const Vec2> desired, const ModelParams& p, double T,
                         double dt, double kick_sign = -1.0);

// 1-D cluster count of sorted y-coordinates with the given gap threshold;
// used as the lane-count estimate of a group's cross-corridor profile
int lane_count(std::vector<double> ys, double gap_threshold);

}  // namespace pedcal
