#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pedcal/trajectory.hpp"
#include "pedcal/vec2.hpp"

namespace pedcal {

// raw per-agent tracks as recorded by a tracking setup: integer frames at a
// fixed rate, positions scaled to meters on load
struct ArchiveTrajectory {
    struct Track {
        long long id = 0;
        std::vector<std::pair<long long, Vec2>> frames;  // sorted by frame
    };
    std::vector<Track> tracks;
    double frame_rate = 0.0;  // Hz

    const Track* find(long long id) const;
};

// which whitespace-separated column holds what; z is optional and ignored
struct ColumnMap {
    int id = 0;
    int frame = 1;
    int x = 2;
    int y = 3;
    int z = -1;  // < 0 means absent
};

// whitespace-separated numeric rows -> grouped, frame-sorted, unit-scaled
// tracks. Throws ConfigError naming the line on malformed rows and on
// duplicate (id, frame) pairs.
ArchiveTrajectory parse_archive(const std::filesystem::path& path, const ColumnMap& map,
                                double frame_rate, double unit_scale);

struct ResampleResult {
    Trajectory trajectory;
    std::vector<long long> kept_ids;  // agent order of the trajectory columns
    int dropped = 0;                  // agents not covering the window
};

// linear interpolation of the covered agents' positions onto the uniform
// grid t0 + k*dt, k = 0..round(T/dt); velocities are the interpolant's
// segment slopes (right-continuous, last segment extended to the end).
// select: restrict to these ids (empty = all). Throws ConfigError if no
// agent covers the window.
ResampleResult resample(const ArchiveTrajectory& data, double t0, double T, double dt,
                        const std::vector<long long>& select = {});

struct GroupVelocity {
    Vec2 mean;
    int agents_used = 0;
    int agents_skipped = 0;  // fewer than 2 frames inside the window
};

// per-agent displacement/duration inside [t0, t0+T], averaged over each
// group of agent ids
std::vector<GroupVelocity> estimate_mean_velocity(
    const ArchiveTrajectory& data, double t0, double T,
    const std::vector<std::vector<long long>>& groups);

// CSV with header "t,agent,x,y,vx,vy"; 17 significant digits so a read-back
// reproduces the doubles exactly
void export_trajectory(const Trajectory& traj, const std::filesystem::path& path);

Trajectory read_trajectory_csv(const std::filesystem::path& path);

// generic numeric CSV: one header line, then one row per record
void export_csv(const std::string& header, const std::vector<std::vector<double>>& rows,
                const std::filesystem::path& path);

}  // namespace pedcal
