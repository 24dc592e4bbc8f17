#include "pedcal/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pedcal/errors.hpp"
#include "pedcal/rng.hpp"

namespace pedcal {

void Scenario::validate() const {
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
        throw ConfigError("scenario domain must have positive area");
    if (groups.empty()) throw ConfigError("scenario needs at least one group");
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const GroupSpec& gs = groups[g];
        if (gs.count <= 0) {
            std::ostringstream msg;
            msg << "group " << g << " has non-positive count " << gs.count;
            throw ConfigError(msg.str());
        }
        if (!(gs.spawn.width() >= 0.0) || !(gs.spawn.height() >= 0.0) ||
            gs.spawn.xmin < domain.xmin || gs.spawn.xmax > domain.xmax ||
            gs.spawn.ymin < domain.ymin || gs.spawn.ymax > domain.ymax) {
            std::ostringstream msg;
            msg << "group " << g << " spawn region not contained in the domain";
            throw ConfigError(msg.str());
        }
        // periodic edges pair with the opposite edge of the same axis
        const bool lp = gs.bounds.left == EdgeRule::Periodic;
        const bool rp = gs.bounds.right == EdgeRule::Periodic;
        const bool bp = gs.bounds.bottom == EdgeRule::Periodic;
        const bool tp = gs.bounds.top == EdgeRule::Periodic;
        if (lp != rp || bp != tp) {
            std::ostringstream msg;
            msg << "group " << g
                << ": periodic edges must come in opposite pairs (left/right, bottom/top)";
            throw ConfigError(msg.str());
        }
    }
    if (!(d >= 0.0)) throw ConfigError("body diameter d must be >= 0");
}

int Scenario::total_agents() const {
    int n = 0;
    for (const GroupSpec& g : groups) n += g.count;
    return n;
}

std::vector<int> Scenario::agent_groups() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(total_agents()));
    for (std::size_t g = 0; g < groups.size(); ++g)
        out.insert(out.end(), static_cast<std::size_t>(groups[g].count),
                   static_cast<int>(g));
    return out;
}

std::vector<Vec2> Scenario::desired_velocities() const {
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(total_agents()));
    for (const GroupSpec& g : groups)
        out.insert(out.end(), static_cast<std::size_t>(g.count), g.desired);
    return out;
}

void init_scenario(const Scenario& sc, std::vector<Vec2>& positions,
                   std::vector<Vec2>& velocities) {
    sc.validate();
    positions.clear();
    velocities.clear();
    Rng rng(derive_subseed(sc.seed, 0));
    constexpr int kMaxTriesPerAgent = 10000;
    for (std::size_t g = 0; g < sc.groups.size(); ++g) {
        const GroupSpec& gs = sc.groups[g];
        for (int k = 0; k < gs.count; ++k) {
            bool placed = false;
            for (int attempt = 0; attempt < kMaxTriesPerAgent; ++attempt) {
                const Vec2 c = rng.in_rect(gs.spawn.xmin, gs.spawn.xmax, gs.spawn.ymin,
                                           gs.spawn.ymax);
                bool clear = true;
                for (const Vec2& q : positions) {
                    if ((c - q).norm() <= sc.d) {
                        clear = false;
                        break;
                    }
                }
                if (clear) {
                    positions.push_back(c);
                    velocities.push_back(gs.desired);
                    placed = true;
                    break;
                }
            }
            if (!placed) {
                std::ostringstream msg;
                msg << "could not place agent " << positions.size() << " of group " << g
                    << " at separation > " << sc.d << " after " << kMaxTriesPerAgent
                    << " tries: spawn region too crowded";
                throw ConfigError(msg.str());
            }
        }
    }
}

void leapfrog_step(std::vector<Vec2>& positions, std::vector<Vec2>& velocities,
                   std::span<const Vec2> desired, const ModelParams& p, double dt,
                   double kick_sign) {
    const std::size_t N = positions.size();
    // half drift
    for (std::size_t i = 0; i < N; ++i) positions[i] += velocities[i] * (0.5 * dt);
    // implicit relaxation toward the desired velocity
    const double denom = 1.0 + dt * p.tau;
    for (std::size_t i = 0; i < N; ++i)
        velocities[i] = (velocities[i] + desired[i] * (dt * p.tau)) / denom;
    // explicit interaction kick, evaluated at the drifted positions and
    // relaxed velocities
    std::vector<Vec2> kick(N);
    for (std::size_t i = 0; i < N; ++i)
        kick[i] = interaction_sum(i, positions, velocities, p);
    for (std::size_t i = 0; i < N; ++i) velocities[i] += kick[i] * (kick_sign * dt);
    // half drift with the updated velocity
    for (std::size_t i = 0; i < N; ++i) positions[i] += velocities[i] * (0.5 * dt);
}

namespace {

// reflect about a wall: mirror the position inside and point the normal
// velocity component inwards
void reflect_low(double wall, double& pos, double& vel) {
    if (pos < wall) {
        pos = 2.0 * wall - pos;
        vel = std::abs(vel);
    }
}

void reflect_high(double wall, double& pos, double& vel) {
    if (pos > wall) {
        pos = 2.0 * wall - pos;
        vel = -std::abs(vel);
    }
}

// translate to the paired edge, preserving the overshoot distance
void wrap(double lo, double hi, double& pos) {
    const double w = hi - lo;
    while (pos > hi) pos -= w;
    while (pos < lo) pos += w;
}

}  // namespace

void enforce_boundaries(std::vector<Vec2>& positions, std::vector<Vec2>& velocities,
                        const Scenario& sc, std::span<const int> agent_groups) {
    const Rect& dom = sc.domain;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const GroupBoundaries& b = sc.groups[static_cast<std::size_t>(agent_groups[i])].bounds;
        Vec2& x = positions[i];
        Vec2& v = velocities[i];
        // reflective checks first
        if (b.left == EdgeRule::Reflective) reflect_low(dom.xmin, x.x, v.x);
        if (b.right == EdgeRule::Reflective) reflect_high(dom.xmax, x.x, v.x);
        if (b.bottom == EdgeRule::Reflective) reflect_low(dom.ymin, x.y, v.y);
        if (b.top == EdgeRule::Reflective) reflect_high(dom.ymax, x.y, v.y);
        // then periodic wraps
        if (b.left == EdgeRule::Periodic) wrap(dom.xmin, dom.xmax, x.x);
        if (b.bottom == EdgeRule::Periodic) wrap(dom.ymin, dom.ymax, x.y);
        // a reflected position can still be outside if the overshoot exceeded
        // the domain size; clamp as a last resort
        x.x = std::clamp(x.x, dom.xmin, dom.xmax);
        x.y = std::clamp(x.y, dom.ymin, dom.ymax);
    }
}

namespace {

std::size_t step_count(double T, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (T < 0.0) throw ConfigError("T must be >= 0");
    return static_cast<std::size_t>(std::llround(T / dt));
}

void check_finite(const std::vector<Vec2>& xs, std::size_t step) {
    for (const Vec2& p : xs) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            std::ostringstream msg;
            msg << "non-finite state at step " << step;
            throw NumericalError(msg.str());
        }
    }
}

}  // namespace

Trajectory simulate(const Scenario& sc, const ModelParams& p, double T, double dt) {
    p.validate();
    const std::size_t K = step_count(T, dt);
    std::vector<Vec2> x, v;
    init_scenario(sc, x, v);
    const std::vector<int> groups = sc.agent_groups();
    const std::vector<Vec2> desired = sc.desired_velocities();

    Trajectory traj;
    traj.dt = dt;
    traj.positions.reserve(K + 1);
    traj.velocities.reserve(K + 1);
    traj.positions.push_back(x);
    traj.velocities.push_back(v);
    for (std::size_t k = 0; k < K; ++k) {
        leapfrog_step(x, v, desired, p, dt);
        enforce_boundaries(x, v, sc, groups);
        check_finite(x, k + 1);
        traj.positions.push_back(x);
        traj.velocities.push_back(v);
    }
    return traj;
}

Trajectory simulate_free(std::span<const Vec2> x0, std::span<const Vec2> v0,
                         std::span<const Vec2> desired, const ModelParams& p, double T,
                         double dt, double kick_sign) {
    const std::size_t K = step_count(T, dt);
    std::vector<Vec2> x(x0.begin(), x0.end());
    std::vector<Vec2> v(v0.begin(), v0.end());
    Trajectory traj;
    traj.dt = dt;
    traj.positions.reserve(K + 1);
    traj.velocities.reserve(K + 1);
    traj.positions.push_back(x);
    traj.velocities.push_back(v);
    for (std::size_t k = 0; k < K; ++k) {
        leapfrog_step(x, v, desired, p, dt, kick_sign);
        check_finite(x, k + 1);
        traj.positions.push_back(x);
        traj.velocities.push_back(v);
    }
    return traj;
}

int lane_count(std::vector<double> ys, double gap_threshold) {
    if (ys.empty()) return 0;
    std::sort(ys.begin(), ys.end());
    int lanes = 1;
    for (std::size_t i = 1; i < ys.size(); ++i)
        if (ys[i] - ys[i - 1] > gap_threshold) ++lanes;
    return lanes;
}

}  // namespace pedcal
