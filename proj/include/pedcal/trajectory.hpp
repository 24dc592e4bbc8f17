#pragma once

#include <cstddef>
#include <vector>

#include "pedcal/vec2.hpp"

namespace pedcal {

// States of N agents on the uniform grid t_k = k*dt, k = 0..K.
// Frame-major storage: positions[k][i] is agent i at time t_k.
struct Trajectory {
    double dt = 0.0;
    std::vector<std::vector<Vec2>> positions;
    std::vector<std::vector<Vec2>> velocities;

    std::size_t frames() const { return positions.size(); }
    std::size_t steps() const { return positions.empty() ? 0 : positions.size() - 1; }
    std::size_t agents() const { return positions.empty() ? 0 : positions.front().size(); }
    double duration() const { return dt * static_cast<double>(steps()); }

    bool same_grid(const Trajectory& o) const {
        return dt == o.dt && frames() == o.frames() && agents() == o.agents();
    }
};

}  // namespace pedcal
