#include "pedcal/data_io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pedcal/errors.hpp"

namespace pedcal {

const ArchiveTrajectory::Track* ArchiveTrajectory::find(long long id) const {
    for (const Track& t : tracks)
        if (t.id == id) return &t;
    return nullptr;
}

namespace {

bool parse_double(const std::string& tok, double& out) {
    errno = 0;
    char* end = nullptr;
    out = std::strtod(tok.c_str(), &end);
    return end == tok.c_str() + tok.size() && errno == 0;
}

bool parse_ll(const std::string& tok, long long& out) {
    double v;
    if (!parse_double(tok, v)) return false;
    if (std::nearbyint(v) != v) return false;
    out = static_cast<long long>(v);
    return true;
}

[[noreturn]] void row_error(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
    std::ostringstream msg;
    msg << path.string() << ":" << line << ": " << what;
    throw ConfigError(msg.str());
}

}  // namespace

ArchiveTrajectory parse_archive(const std::filesystem::path& path, const ColumnMap& map,
                                double frame_rate, double unit_scale) {
    if (!(frame_rate > 0.0)) throw ConfigError("archive frame rate must be > 0");
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open archive file: " + path.string());

    int need = std::max({map.id, map.frame, map.x, map.y});
    if (map.z >= 0) need = std::max(need, map.z);
    if (std::min({map.id, map.frame, map.x, map.y}) < 0)
        throw ConfigError("column map indices must be >= 0");

    std::map<long long, ArchiveTrajectory::Track> by_id;
    std::set<std::pair<long long, long long>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string t;
        while (ls >> t) toks.push_back(t);
        if (toks.empty() || toks[0].front() == '#') continue;
        if (static_cast<int>(toks.size()) <= need)
            row_error(path, lineno, "too few columns for the configured column map");
        long long id, frame;
        double x, y;
        if (!parse_ll(toks[static_cast<std::size_t>(map.id)], id))
            row_error(path, lineno, "non-integer agent id '" +
                                        toks[static_cast<std::size_t>(map.id)] + "'");
        if (!parse_ll(toks[static_cast<std::size_t>(map.frame)], frame))
            row_error(path, lineno, "non-integer frame index '" +
                                        toks[static_cast<std::size_t>(map.frame)] + "'");
        if (!parse_double(toks[static_cast<std::size_t>(map.x)], x))
            row_error(path, lineno,
                      "non-numeric x '" + toks[static_cast<std::size_t>(map.x)] + "'");
        if (!parse_double(toks[static_cast<std::size_t>(map.y)], y))
            row_error(path, lineno,
                      "non-numeric y '" + toks[static_cast<std::size_t>(map.y)] + "'");
        const Vec2 pos{x * unit_scale, y * unit_scale};
        if (!std::isfinite(pos.x) || !std::isfinite(pos.y))
            row_error(path, lineno, "non-finite position after unit scaling");
        if (!seen.insert({id, frame}).second) {
            std::ostringstream what;
            what << "duplicate (id, frame) pair (" << id << ", " << frame << ")";
            row_error(path, lineno, what.str());
        }
        by_id[id].frames.emplace_back(frame, pos);
    }

    ArchiveTrajectory out;
    out.frame_rate = frame_rate;
    out.tracks.reserve(by_id.size());
    for (auto& [id, track] : by_id) {
        track.id = id;
        std::sort(track.frames.begin(), track.frames.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        out.tracks.push_back(std::move(track));
    }
    return out;
}

ResampleResult resample(const ArchiveTrajectory& data, double t0, double T, double dt,
                        const std::vector<long long>& select) {
    if (!(dt > 0.0)) throw ConfigError("resample: dt must be > 0");
    if (!(T > 0.0)) throw ConfigError("resample: window length must be > 0");
    if (!(data.frame_rate > 0.0)) throw ConfigError("resample: frame rate must be > 0");
    const std::size_t K = static_cast<std::size_t>(std::llround(T / dt));

    ResampleResult res;
    res.trajectory.dt = dt;
    res.trajectory.positions.assign(K + 1, {});
    res.trajectory.velocities.assign(K + 1, {});

    for (const ArchiveTrajectory::Track& track : data.tracks) {
        if (!select.empty() &&
            std::find(select.begin(), select.end(), track.id) == select.end())
            continue;
        if (track.frames.size() < 2) {
            ++res.dropped;
            continue;
        }
        const double t_first = static_cast<double>(track.frames.front().first) / data.frame_rate;
        const double t_last = static_cast<double>(track.frames.back().first) / data.frame_rate;
        // the agent must cover the whole window (grid snapping keeps a
        // half-step slack at the edges harmless)
        if (t_first > t0 + 1e-12 || t_last < t0 + T - 1e-12) {
            ++res.dropped;
            continue;
        }
        res.kept_ids.push_back(track.id);
        std::size_t seg = 0;
        for (std::size_t k = 0; k <= K; ++k) {
            const double t = t0 + static_cast<double>(k) * dt;
            while (seg + 2 < track.frames.size() &&
                   static_cast<double>(track.frames[seg + 1].first) / data.frame_rate <= t)
                ++seg;
            const double ta = static_cast<double>(track.frames[seg].first) / data.frame_rate;
            const double tb = static_cast<double>(track.frames[seg + 1].first) / data.frame_rate;
            const Vec2& pa = track.frames[seg].second;
            const Vec2& pb = track.frames[seg + 1].second;
            const Vec2 slope = (pb - pa) / (tb - ta);
            const double theta = (t - ta);
            res.trajectory.positions[k].push_back(pa + slope * theta);
            res.trajectory.velocities[k].push_back(slope);
        }
    }
    if (res.kept_ids.empty())
        throw ConfigError("resample: no agent covers the requested window");
    return res;
}

std::vector<GroupVelocity> estimate_mean_velocity(
    const ArchiveTrajectory& data, double t0, double T,
    const std::vector<std::vector<long long>>& groups) {
    std::vector<GroupVelocity> out;
    out.reserve(groups.size());
    for (const std::vector<long long>& ids : groups) {
        GroupVelocity gv;
        Vec2 sum;
        for (long long id : ids) {
            const ArchiveTrajectory::Track* track = data.find(id);
            if (!track) {
                ++gv.agents_skipped;
                continue;
            }
            // first and last sample inside the window
            const Vec2* first = nullptr;
            const Vec2* last = nullptr;
            long long f_first = 0, f_last = 0;
            for (const auto& [frame, pos] : track->frames) {
                const double t = static_cast<double>(frame) / data.frame_rate;
                if (t < t0 - 1e-12 || t > t0 + T + 1e-12) continue;
                if (!first) {
                    first = &pos;
                    f_first = frame;
                }
                last = &pos;
                f_last = frame;
            }
            if (!first || f_last == f_first) {
                ++gv.agents_skipped;
                continue;
            }
            const double dur = static_cast<double>(f_last - f_first) / data.frame_rate;
            sum += (*last - *first) / dur;
            ++gv.agents_used;
        }
        if (gv.agents_used > 0) gv.mean = sum / static_cast<double>(gv.agents_used);
        out.push_back(gv);
    }
    return out;
}

namespace {

void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

void export_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream outf(path);
    if (!outf) throw ConfigError("cannot open for writing: " + path.string());
    std::string buf = "t,agent,x,y,vx,vy\n";
    for (std::size_t k = 0; k < traj.frames(); ++k) {
        const double t = static_cast<double>(k) * traj.dt;
        for (std::size_t i = 0; i < traj.positions[k].size(); ++i) {
            append_g17(buf, t);
            buf += ',';
            buf += std::to_string(i);
            buf += ',';
            append_g17(buf, traj.positions[k][i].x);
            buf += ',';
            append_g17(buf, traj.positions[k][i].y);
            buf += ',';
            append_g17(buf, traj.velocities[k][i].x);
            buf += ',';
            append_g17(buf, traj.velocities[k][i].y);
            buf += '\n';
        }
    }
    outf << buf;
    if (!outf) throw ConfigError("write failed: " + path.string());
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trajectory CSV: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,agent,x,y,vx,vy", 0) != 0)
        throw ConfigError("unexpected trajectory CSV header in " + path.string());

    struct Row {
        double t;
        long long agent;
        Vec2 x, v;
    };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Row r;
        double vals[6];
        std::size_t pos = 0;
        for (int c = 0; c < 6; ++c) {
            const std::size_t next = line.find(',', pos);
            const std::string tok = line.substr(pos, next == std::string::npos
                                                         ? std::string::npos
                                                         : next - pos);
            if (!parse_double(tok, vals[c])) {
                std::ostringstream msg;
                msg << path.string() << ":" << lineno << ": bad field '" << tok << "'";
                throw ConfigError(msg.str());
            }
            if (next == std::string::npos && c < 5) {
                std::ostringstream msg;
                msg << path.string() << ":" << lineno << ": expected 6 fields";
                throw ConfigError(msg.str());
            }
            pos = next + 1;
        }
        r.t = vals[0];
        r.agent = static_cast<long long>(vals[1]);
        r.x = {vals[2], vals[3]};
        r.v = {vals[4], vals[5]};
        rows.push_back(r);
    }
    Trajectory traj;
    if (rows.empty()) return traj;
    std::size_t N = 0;
    while (N < rows.size() && rows[N].t == rows[0].t) ++N;
    if (rows.size() % N != 0)
        throw ConfigError("trajectory CSV is not frame-rectangular: " + path.string());
    const std::size_t frames = rows.size() / N;
    traj.dt = frames > 1 ? rows[N].t - rows[0].t : 0.0;
    traj.positions.assign(frames, std::vector<Vec2>(N));
    traj.velocities.assign(frames, std::vector<Vec2>(N));
    for (std::size_t k = 0; k < frames; ++k)
        for (std::size_t i = 0; i < N; ++i) {
            const Row& r = rows[k * N + i];
            traj.positions[k][i] = r.x;
            traj.velocities[k][i] = r.v;
        }
    return traj;
}

void export_csv(const std::string& header, const std::vector<std::vector<double>>& rows,
                const std::filesystem::path& path) {
    std::ofstream outf(path);
    if (!outf) throw ConfigError("cannot open for writing: " + path.string());
    std::string buf = header;
    buf += '\n';
    for (const std::vector<double>& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) buf += ',';
            append_g17(buf, row[c]);
        }
        buf += '\n';
    }
    outf << buf;
    if (!outf) throw ConfigError("write failed: " + path.string());
}

}  // namespace pedcal
