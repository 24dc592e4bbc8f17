#include "pedcal/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "pedcal/adjoint.hpp"
#include "pedcal/data_io.hpp"
#include "pedcal/errors.hpp"
#include "pedcal/model.hpp"
#include "pedcal/rng.hpp"
#include "pedcal/simulate.hpp"
#include "pedcal/voronoi.hpp"

namespace pedcal {

using nlohmann::json;

namespace {

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    try {
        return json::parse(in, nullptr, true, true);  // allow comments
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

double require_number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError("config key '" + key + "' missing or not a number");
    return j[key].get<double>();
}

Rect parse_rect(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 4)
        throw ConfigError("'" + key + "' must be [xmin, xmax, ymin, ymax]");
    Rect r;
    r.xmin = j[0].get<double>();
    r.xmax = j[1].get<double>();
    r.ymin = j[2].get<double>();
    r.ymax = j[3].get<double>();
    return r;
}

Vec2 parse_vec2(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("'" + key + "' must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

EdgeRule parse_edge_rule(const json& j, const std::string& key) {
    const std::string s = j.get<std::string>();
    if (s == "reflective") return EdgeRule::Reflective;
    if (s == "periodic") return EdgeRule::Periodic;
    throw ConfigError("'" + key + "' must be 'reflective' or 'periodic', got '" + s + "'");
}

ModelParams parse_model_params(const json& j) {
    ModelParams p;
    p.lambda = require_number(j, "lambda");
    p.tau = require_number(j, "tau");
    p.A = require_number(j, "A");
    p.R = require_number(j, "R");
    p.a = require_number(j, "a");
    p.r = require_number(j, "r");
    if (j.contains("d")) p.d = j["d"].get<double>();
    p.validate();
    return p;
}

struct SimulateConfig {
    Scenario scenario;
    ModelParams params;
    double T = 0.0;
    double dt = 0.0;
    double lane_gap_factor = 0.5;
};

SimulateConfig parse_simulate_config(const json& j) {
    SimulateConfig cfg;
    if (!j.contains("domain")) throw ConfigError("scenario config needs 'domain'");
    cfg.scenario.domain = parse_rect(j["domain"], "domain");
    cfg.scenario.d = require_number(j, "d");
    cfg.scenario.seed = j.value("seed", 0ULL);
    cfg.T = require_number(j, "T");
    cfg.dt = require_number(j, "dt");
    if (!j.contains("params")) throw ConfigError("scenario config needs 'params'");
    cfg.params = parse_model_params(j["params"]);
    cfg.params.d = cfg.scenario.d;
    cfg.lane_gap_factor = j.value("lane_gap_factor", 0.5);
    if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].empty())
        throw ConfigError("scenario config needs a non-empty 'groups' array");
    for (const json& gj : j["groups"]) {
        GroupSpec g;
        g.count = gj.value("count", 0);
        g.desired = parse_vec2(gj.at("desired"), "desired");
        g.tag = gj.value("tag", "group" + std::to_string(cfg.scenario.groups.size()));
        g.spawn = gj.contains("spawn") ? parse_rect(gj["spawn"], "spawn")
                                       : cfg.scenario.domain;
        if (gj.contains("boundaries")) {
            const json& bj = gj["boundaries"];
            g.bounds.left = parse_edge_rule(bj.at("left"), "left");
            g.bounds.right = parse_edge_rule(bj.at("right"), "right");
            g.bounds.bottom = parse_edge_rule(bj.at("bottom"), "bottom");
            g.bounds.top = parse_edge_rule(bj.at("top"), "top");
        }
        cfg.scenario.groups.push_back(std::move(g));
    }
    cfg.scenario.validate();
    return cfg;
}

std::string timestamp_utc() {
    const std::time_t now = std::chrono::system_clock::to_time_t(
        std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// the manifest goes to disk before any other output so a run can always be
// traced back to its exact inputs
void write_manifest(const std::filesystem::path& out_dir, const std::string& command,
                    const json& resolved_config,
                    const std::filesystem::path& config_path,
                    const std::filesystem::path& data_path = {}) {
    std::filesystem::create_directories(out_dir);
    json m;
    m["command"] = command;
    m["config_path"] = config_path.string();
    if (!data_path.empty()) m["data_path"] = data_path.string();
    m["out_dir"] = out_dir.string();
    m["config"] = resolved_config;
    if (resolved_config.contains("seed")) m["seed"] = resolved_config["seed"];
    m["timestamp"] = timestamp_utc();
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest in " + out_dir.string());
    out << m.dump(2) << '\n';
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

int run_guarded(const char* name, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << name << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << name << ": unexpected failure: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace

int cmd_simulate(const std::filesystem::path& config_path,
                 const std::filesystem::path& out_dir,
                 std::optional<std::uint64_t> seed_override) {
    return run_guarded("simulate", [&]() {
        json j = load_json(config_path);
        if (seed_override) j["seed"] = *seed_override;
        const SimulateConfig cfg = parse_simulate_config(j);
        write_manifest(out_dir, "simulate", j, config_path);

        const Trajectory traj = simulate(cfg.scenario, cfg.params, cfg.T, cfg.dt);
        export_trajectory(traj, out_dir / "trajectory.csv");

        // per-group lane estimate from the final frame
        json lanes = json::object();
        const std::vector<int> groups = cfg.scenario.agent_groups();
        const double gap = cfg.lane_gap_factor * cfg.scenario.d;
        for (std::size_t g = 0; g < cfg.scenario.groups.size(); ++g) {
            std::vector<double> ys;
            for (std::size_t i = 0; i < groups.size(); ++i)
                if (groups[i] == static_cast<int>(g))
                    ys.push_back(traj.positions.back()[i].y);
            lanes[cfg.scenario.groups[g].tag] = lane_count(std::move(ys), gap);
        }
        json summary;
        summary["final_time"] = traj.duration();
        summary["agents"] = traj.agents();
        summary["frames"] = traj.frames();
        summary["lane_gap"] = gap;
        summary["lane_counts"] = lanes;
        write_json_file(summary, out_dir / "summary.json");
        std::cout << "simulate: " << traj.frames() << " frames, " << traj.agents()
                  << " agents, lane counts " << lanes.dump() << '\n';
        return 0;
    });
}

namespace {

struct CalibrateSetup {
    CalibrationConfig cal;
    ModelParams base;
    ControlVector u0;
    Trajectory data;
    std::vector<Vec2> desired;
    double t0 = 0.0;
    double window = 0.0;
    int dropped = 0;
};

CalibrateSetup parse_calibrate_config(json& j, const DataOverrides& ov) {
    CalibrateSetup s;
    if (!j.contains("data") || !j["data"].is_object())
        throw ConfigError("calibration config needs a 'data' object");
    json& dj = j["data"];
    if (ov.data_path) dj["path"] = ov.data_path->string();
    if (ov.unit_scale) dj["unit_scale"] = *ov.unit_scale;
    if (ov.frame_rate) dj["frame_rate"] = *ov.frame_rate;
    if (ov.t0) dj["t0"] = *ov.t0;
    if (ov.window) dj["T"] = *ov.window;
    if (ov.column_map) {
        json arr = json::array();
        std::istringstream iss(*ov.column_map);
        std::string tok;
        while (std::getline(iss, tok, ',')) arr.push_back(std::stoi(tok));
        dj["column_map"] = arr;
    }
    if (!dj.contains("path")) throw ConfigError("data block needs 'path'");
    const std::filesystem::path data_path = dj["path"].get<std::string>();

    ColumnMap cmap;
    if (dj.contains("column_map")) {
        const json& cm = dj["column_map"];
        if (!cm.is_array() || cm.size() < 4)
            throw ConfigError("'column_map' must list at least [id, frame, x, y]");
        cmap.id = cm[0].get<int>();
        cmap.frame = cm[1].get<int>();
        cmap.x = cm[2].get<int>();
        cmap.y = cm[3].get<int>();
        cmap.z = cm.size() > 4 ? cm[4].get<int>() : -1;
    }
    const double frame_rate = require_number(dj, "frame_rate");
    const double unit_scale = dj.value("unit_scale", 1.0);
    s.t0 = dj.value("t0", 0.0);
    s.window = require_number(dj, "T");
    const double dt = require_number(j, "dt");

    const ArchiveTrajectory archive =
        parse_archive(data_path, cmap, frame_rate, unit_scale);
    std::vector<long long> select;
    if (dj.contains("agents"))
        for (const json& a : dj["agents"]) select.push_back(a.get<long long>());
    ResampleResult rs = resample(archive, s.t0, s.window, dt, select);
    s.data = std::move(rs.trajectory);
    s.dropped = rs.dropped;

    if (!j.contains("params")) throw ConfigError("calibration config needs 'params'");
    // lambda/A/R in 'params' are ignored here; the control carries them
    json pj = j["params"];
    if (!pj.contains("lambda")) pj["lambda"] = 0.0;
    if (!pj.contains("A")) pj["A"] = 0.0;
    if (!pj.contains("R")) pj["R"] = 0.0;
    s.base = parse_model_params(pj);

    if (j.contains("u0")) {
        const json& u0j = j["u0"];
        if (!u0j.is_array() || u0j.size() != 3)
            throw ConfigError("'u0' must be [lambda, A, R]");
        s.u0 = {u0j[0].get<double>(), u0j[1].get<double>(), u0j[2].get<double>()};
    } else {
        s.u0 = {0.0, 0.0, 40.0};
    }

    CalibrationConfig& c = s.cal;
    c.sigma1 = j.value("sigma1", 1.0);
    c.sigma2 = j.value("sigma2", 0.0);
    if (j.contains("u_ref")) {
        const json& ur = j["u_ref"];
        c.u_ref = {ur[0].get<double>(), ur[1].get<double>(), ur[2].get<double>()};
    }
    if (j.contains("beta")) {
        const json& b = j["beta"];
        if (!b.is_array() || b.size() != 3)
            throw ConfigError("'beta' must be [beta_lambda, beta_A, beta_R]");
        for (int i = 0; i < 3; ++i) c.beta[i] = b[i].get<double>();
    }
    c.epsilon_rel = j.value("epsilon_rel", 1e-2);
    c.m = j.value("m", std::size_t{50});
    c.batch_length = j.value("batch_length", dt);
    c.max_iters = j.value("max_iters", std::size_t{100});
    c.seed = j.value("seed", 0ULL);
    if (j.contains("box")) {
        const json& bj = j["box"];
        c.box.eps = bj.value("eps", 1e-3);
        c.box.A_max = bj.value("A_max", 100.0);
        c.box.R_max = bj.value("R_max", 100.0);
    }
    c.validate();

    // desired velocities per agent, via id groups
    if (!j.contains("desired") || !j["desired"].is_array())
        throw ConfigError("calibration config needs a 'desired' group array");
    std::vector<std::vector<long long>> group_ids;
    std::vector<Vec2> group_vel;
    std::vector<bool> group_est;
    for (const json& gj : j["desired"]) {
        std::vector<long long> ids;
        for (const json& a : gj.at("ids")) ids.push_back(a.get<long long>());
        group_ids.push_back(ids);
        group_est.push_back(gj.value("estimate", false));
        group_vel.push_back(gj.contains("velocity")
                                ? parse_vec2(gj["velocity"], "velocity")
                                : Vec2{});
    }
    const std::vector<GroupVelocity> est =
        estimate_mean_velocity(archive, s.t0, s.window, group_ids);
    for (std::size_t g = 0; g < group_ids.size(); ++g)
        if (group_est[g]) group_vel[g] = est[g].mean;

    s.desired.reserve(rs.kept_ids.size());
    for (long long id : rs.kept_ids) {
        bool found = false;
        for (std::size_t g = 0; g < group_ids.size() && !found; ++g)
            if (std::find(group_ids[g].begin(), group_ids[g].end(), id) !=
                group_ids[g].end()) {
                s.desired.push_back(group_vel[g]);
                found = true;
            }
        if (!found) {
            std::ostringstream msg;
            msg << "agent id " << id << " is in no 'desired' group";
            throw ConfigError(msg.str());
        }
    }
    // record what the run actually used
    j["resolved"] = {{"agents_kept", rs.kept_ids},
                     {"agents_dropped", s.dropped},
                     {"grid_points", s.data.frames()}};
    return s;
}

}  // namespace

int cmd_calibrate(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_dir,
                  std::optional<std::uint64_t> seed_override, const DataOverrides& ov) {
    return run_guarded("calibrate", [&]() {
        json j = load_json(config_path);
        if (seed_override) j["seed"] = *seed_override;
        CalibrateSetup s = parse_calibrate_config(j, ov);
        write_manifest(out_dir, "calibrate", j, config_path,
                       j["data"]["path"].get<std::string>());

        const CalibrationResult res =
            calibrate(s.data, s.desired, s.base, s.u0, s.cal);

        std::vector<std::vector<double>> rows;
        for (std::size_t it = 0; it < res.u_history.size(); ++it)
            rows.push_back({static_cast<double>(it), res.u_history[it].lambda,
                            res.u_history[it].A, res.u_history[it].R,
                            res.cost_history[it]});
        export_csv("iteration,lambda,A,R,cost", rows, out_dir / "history.csv");

        json fin;
        fin["lambda"] = res.u_final.lambda;
        fin["A"] = res.u_final.A;
        fin["R"] = res.u_final.R;
        fin["cost_initial"] = res.cost_history.front();
        fin["cost_final"] = res.cost_history.back();
        fin["iterations"] = res.iterations;
        fin["converged"] = res.converged;
        fin["agents"] = s.data.agents();
        fin["agents_dropped"] = s.dropped;
        write_json_file(fin, out_dir / "final_params.json");
        std::cout << "calibrate: cost " << res.cost_history.front() << " -> "
                  << res.cost_history.back() << " in " << res.iterations
                  << " iterations; u = (" << res.u_final.lambda << ", " << res.u_final.A
                  << ", " << res.u_final.R << ")\n";
        return 0;
    });
}

int cmd_fd(const std::filesystem::path& config_path,
           const std::filesystem::path& out_dir) {
    return run_guarded("fd", [&]() {
        json j = load_json(config_path);
        if (!j.contains("region")) throw ConfigError("fd config needs 'region'");
        const Rect region = parse_rect(j["region"], "region");

        Trajectory traj;
        if (j.contains("trajectory")) {
            write_manifest(out_dir, "fd", j, config_path,
                           j["trajectory"].get<std::string>());
            traj = read_trajectory_csv(j["trajectory"].get<std::string>());
        } else if (j.contains("scenario")) {
            const SimulateConfig sim = parse_simulate_config(j["scenario"]);
            const Rect& dom = sim.scenario.domain;
            if (region.xmin < dom.xmin || region.xmax > dom.xmax ||
                region.ymin < dom.ymin || region.ymax > dom.ymax)
                throw ConfigError("fd region is not contained in the scenario domain");
            write_manifest(out_dir, "fd", j, config_path);
            traj = simulate(sim.scenario, sim.params, sim.T, sim.dt);
        } else {
            throw ConfigError("fd config needs 'trajectory' (CSV path) or 'scenario'");
        }

        std::vector<double> times;
        if (j.contains("sample_times") && j["sample_times"].is_array()) {
            for (const json& t : j["sample_times"]) times.push_back(t.get<double>());
        } else if (j.contains("sample_times") && j["sample_times"].is_object()) {
            const json& st = j["sample_times"];
            const double start = require_number(st, "start");
            const double stop = require_number(st, "stop");
            const double step = require_number(st, "step");
            if (!(step > 0.0)) throw ConfigError("sample_times.step must be > 0");
            for (double t = start; t <= stop + 1e-12; t += step) times.push_back(t);
        } else {
            throw ConfigError("fd config needs 'sample_times' (array or start/stop/step)");
        }

        const FDResult fd = fundamental_diagram(traj, region, times);
        std::vector<std::vector<double>> rows;
        std::vector<double> dens, spd;
        for (const FDSample& smp : fd.samples) {
            rows.push_back({smp.t, static_cast<double>(smp.agent), smp.density, smp.speed});
            dens.push_back(smp.density);
            spd.push_back(smp.speed);
        }
        export_csv("t,agent,density,speed", rows, out_dir / "fd_samples.csv");

        if (j.value("export_polygons", false)) {
            json frames = json::array();
            for (double t : times) {
                const std::size_t k = static_cast<std::size_t>(std::clamp<long long>(
                    std::llround(t / traj.dt), 0, static_cast<long long>(traj.steps())));
                if (traj.positions[k].size() < 3) continue;
                json fr;
                fr["t"] = static_cast<double>(k) * traj.dt;
                json cells = json::array();
                for (const VoronoiCell& cell :
                     bounded_voronoi(traj.positions[k], region)) {
                    json cj;
                    cj["owner"] = cell.owner;
                    cj["area"] = cell.area;
                    json poly = json::array();
                    for (const Vec2& v : cell.polygon) poly.push_back({v.x, v.y});
                    cj["polygon"] = poly;
                    cells.push_back(cj);
                }
                fr["cells"] = cells;
                frames.push_back(fr);
            }
            write_json_file(frames, out_dir / "voronoi_cells.json");
        }

        const double corr = pearson_correlation(dens, spd);
        json summary;
        summary["samples"] = fd.samples.size();
        summary["warnings"] = fd.warnings;
        summary["pearson_density_speed"] = corr;
        write_json_file(summary, out_dir / "summary.json");
        for (const std::string& w : fd.warnings) std::cout << "fd: warning: " << w << '\n';
        std::cout << "fd: " << fd.samples.size()
                  << " samples, pearson(density, speed) = " << corr << '\n';
        return 0;
    });
}

int cmd_gradcheck(const std::optional<std::filesystem::path>& config_path,
                  bool corrupt_sign, std::optional<double> dt_override,
                  std::optional<std::uint64_t> seed_override) {
    return run_guarded("gradcheck", [&]() {
        json j = json::object();
        if (config_path) j = load_json(*config_path);
        const std::size_t instances = j.value("instances", std::size_t{20});
        const std::size_t N = j.value("N", std::size_t{5});
        const double T = j.value("T", 0.5);
        double dt = j.value("dt", 1e-3);
        const double tol = j.value("tolerance", 1e-4);
        std::uint64_t seed = j.value("seed", 20260822ULL);
        if (dt_override) dt = *dt_override;
        if (seed_override) seed = *seed_override;
        if (j.value("corrupt_sign", false)) corrupt_sign = true;
        if (N > 5) throw ConfigError("gradcheck instances are capped at N = 5");

        const double coupling = corrupt_sign ? -1.0 : 1.0;
        std::printf("%-9s %-6s %14s %14s %12s\n", "instance", "comp", "adjoint", "fd",
                    "rel_err");
        double worst = 0.0;
        for (std::size_t k = 0; k < instances; ++k) {
            const GradCheckInstance inst =
                make_gradcheck_instance(derive_subseed(seed, 100 + k), N, T, dt);
            const GradCheckRow row = gradient_check(inst, coupling);
            const char* names[3] = {"lambda", "A", "R"};
            const double ga[3] = {row.adjoint_gradient.lambda, row.adjoint_gradient.A,
                                  row.adjoint_gradient.R};
            const double gf[3] = {row.fd_gradient.lambda, row.fd_gradient.A,
                                  row.fd_gradient.R};
            for (int c = 0; c < 3; ++c)
                std::printf("%-9zu %-6s %14.6e %14.6e %12.3e\n", k, names[c], ga[c],
                            gf[c], row.rel_err[c]);
            worst = std::max(worst, row.max_rel_err);
        }
        std::printf("max_rel_err=%.6e tolerance=%.1e dt=%g corrupt_sign=%d\n", worst,
                    tol, dt, corrupt_sign ? 1 : 0);
        if (worst < tol) {
            std::printf("gradcheck: PASS\n");
            return 0;
        }
        std::printf("gradcheck: FAIL\n");
        return 1;
    });
}

}  // namespace pedcal
