// command-line front end: simulate | calibrate | fd | gradcheck

#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pedcal/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"anisotropic pedestrian-interaction model: simulation, "
                 "adjoint-based calibration, and density analysis"};
    app.require_subcommand(1);

    std::string config, data, out = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config, "JSON config file")->required();
        if (with_out) sub->add_option("--out", out, "output directory");
        sub->add_option("--seed", seed, "override the config seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* sim = app.add_subcommand("simulate", "run a scenario and export the trajectory");
    add_common(sim, true);

    CLI::App* cal = app.add_subcommand("calibrate", "fit (lambda, A, R) to trajectory data");
    add_common(cal, true);
    pedcal::DataOverrides ov;
    std::string column_map;
    double unit_scale = 0.0, frame_rate = 0.0, t0 = 0.0, window = 0.0;
    cal->add_option("--data", data, "archive trajectory file (overrides config)");
    cal->add_option("--column-map", column_map, "column indices id,frame,x,y[,z]");
    cal->add_option("--unit-scale", unit_scale, "multiplier to meters");
    cal->add_option("--frame-rate", frame_rate, "archive frame rate in Hz");
    cal->add_option("--t0", t0, "window start in seconds");
    cal->add_option("--window", window, "window length in seconds");

    CLI::App* fd = app.add_subcommand("fd", "Voronoi densities and fundamental diagram");
    add_common(fd, true);

    CLI::App* gc = app.add_subcommand("gradcheck", "adjoint gradient vs finite differences");
    std::string gc_config;
    double gc_dt = 0.0;
    bool corrupt = false;
    gc->add_option("--config", gc_config, "JSON config file (optional)");
    gc->add_option("--dt", gc_dt, "override the time step");
    gc->add_option("--seed", seed, "override the instance seed")
        ->each([&](const std::string&) { seed_set = true; });
    // negative control for the velocity-coupling sign; intentionally hidden
    gc->add_flag("--corrupt-coupling-sign", corrupt)->group("");

    CLI11_PARSE(app, argc, argv);

    const std::optional<std::uint64_t> seed_opt =
        seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt;

    if (sim->parsed()) return pedcal::cmd_simulate(config, out, seed_opt);
    if (cal->parsed()) {
        if (!column_map.empty()) ov.column_map = column_map;
        if (cal->count("--unit-scale")) ov.unit_scale = unit_scale;
        if (cal->count("--frame-rate")) ov.frame_rate = frame_rate;
        if (cal->count("--t0")) ov.t0 = t0;
        if (cal->count("--window")) ov.window = window;
        if (!data.empty()) ov.data_path = data;
        return pedcal::cmd_calibrate(config, out, seed_opt, ov);
    }
    if (fd->parsed()) return pedcal::cmd_fd(config, out);
    if (gc->parsed()) {
        const std::optional<std::filesystem::path> cfg =
            gc_config.empty() ? std::nullopt
                              : std::optional<std::filesystem::path>(gc_config);
        const std::optional<double> dt_opt =
            gc->count("--dt") ? std::optional<double>(gc_dt) : std::nullopt;
        return pedcal::cmd_gradcheck(cfg, corrupt, dt_opt, seed_opt);
    }
    return 1;
}
