#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace pedcal {

// flag-level overrides of the data block in a calibration config
struct DataOverrides {
    std::optional<std::string> column_map;  // "id,frame,x,y[,z]" column indices
    std::optional<double> unit_scale;
    std::optional<double> frame_rate;
    std::optional<double> t0;
    std::optional<double> window;  // seconds of data to use
    std::optional<std::filesystem::path> data_path;
};

// every command writes <out>/manifest.json before any other output and
// returns a process exit code: 0 success, 1 usage/config error, 2 numerical
// or runtime failure

int cmd_simulate(const std::filesystem::path& config_path,
                 const std::filesystem::path& out_dir,
                 std::optional<std::uint64_t> seed_override);

int cmd_calibrate(const std::filesystem::path& config_path,
                  const std::filesystem::path& out_dir,
                  std::optional<std::uint64_t> seed_override, const DataOverrides& ov);

int cmd_fd(const std::filesystem::path& config_path, const std::filesystem::path& out_dir);

// prints an adjoint-vs-finite-difference table and exits 0 iff the worst
// relative error is below the configured tolerance. corrupt_sign flips the
// velocity-coupling sign of the backward system (negative control).
int cmd_gradcheck(const std::optional<std::filesystem::path>& config_path,
                  bool corrupt_sign, std::optional<double> dt_override,
                  std::optional<std::uint64_t> seed_override);

}  // namespace pedcal
