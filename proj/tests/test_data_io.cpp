#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "pedcal/data_io.hpp"
#include "pedcal/errors.hpp"
#include "pedcal/rng.hpp"

using namespace pedcal;
namespace fs = std::filesystem;

namespace {

fs::path fixture_dir() {
    const fs::path dir = fs::temp_directory_path() / "pedcal_test_io";
    fs::create_directories(dir);
    return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
    const fs::path p = fixture_dir() / name;
    std::ofstream out(p);
    out << content;
    return p;
}

std::string thrown_message(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

// straight-line track at the archive's native rate: pos(t) = start + vel * t
std::string line_track(long long id, long long f0, long long f1, double rate,
                       Vec2 start, Vec2 vel) {
    std::string out;
    for (long long f = f0; f <= f1; ++f) {
        const double t = static_cast<double>(f) / rate;
        out += std::to_string(id) + " " + std::to_string(f) + " " +
               std::to_string(start.x + vel.x * t) + " " +
               std::to_string(start.y + vel.y * t) + " 170.0\n";
    }
    return out;
}

}  // namespace

TEST_CASE("archive rows parse with unit scaling and frame rate") {
    const fs::path p = write_file("single.txt", "12 345 123.4 210.0 170.0\n");
    ColumnMap map;
    map.z = 4;
    const ArchiveTrajectory data = parse_archive(p, map, 16.0, 0.01);

    REQUIRE(data.tracks.size() == 1);
    CHECK(data.frame_rate == 16.0);
    const ArchiveTrajectory::Track& tr = data.tracks[0];
    CHECK(tr.id == 12);
    REQUIRE(tr.frames.size() == 1);
    CHECK(tr.frames[0].first == 345);
    CHECK(tr.frames[0].second.x == 123.4 * 0.01);
    CHECK(tr.frames[0].second.y == 210.0 * 0.01);
}

TEST_CASE("rows group by id, sort by frame, and skip comments") {
    const fs::path p = write_file("grouped.txt",
                                  "# tracking dump\n"
                                  "7 2 0.2 0.0\n"
                                  "3 0 9.0 9.0\n"
                                  "\n"
                                  "7 0 0.0 0.0\n"
                                  "7 1 0.1 0.0\n");
    const ArchiveTrajectory data = parse_archive(p, ColumnMap{}, 10.0, 1.0);

    REQUIRE(data.tracks.size() == 2);
    const ArchiveTrajectory::Track* t7 = data.find(7);
    REQUIRE(t7 != nullptr);
    REQUIRE(t7->frames.size() == 3);
    CHECK(t7->frames[0].first == 0);
    CHECK(t7->frames[1].first == 1);
    CHECK(t7->frames[2].first == 2);
    CHECK(t7->frames[1].second.x == 0.1);
    CHECK(data.find(3) != nullptr);
    CHECK(data.find(99) == nullptr);
}

TEST_CASE("malformed archive rows name the offending line") {
    ColumnMap map;

    const fs::path bad_x = write_file("bad_x.txt",
                                      "1 0 0.0 0.0\n"
                                      "1 1 oops 0.0\n");
    const std::string msg =
        thrown_message([&] { parse_archive(bad_x, map, 10.0, 1.0); });
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);

    const fs::path short_row = write_file("short_row.txt", "1 0 0.0\n");
    CHECK_THROWS_AS(parse_archive(short_row, map, 10.0, 1.0), ConfigError);

    const fs::path frac_id = write_file("frac_id.txt", "1.5 0 0.0 0.0\n");
    CHECK_THROWS_AS(parse_archive(frac_id, map, 10.0, 1.0), ConfigError);

    const fs::path dup = write_file("dup.txt",
                                    "1 0 0.0 0.0\n"
                                    "1 0 0.5 0.5\n");
    const std::string dup_msg =
        thrown_message([&] { parse_archive(dup, map, 10.0, 1.0); });
    CHECK(dup_msg.find("duplicate") != std::string::npos);
    CHECK(dup_msg.find(":2:") != std::string::npos);

    CHECK_THROWS_AS(parse_archive(bad_x, map, 0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(parse_archive(fixture_dir() / "missing.txt", map, 10.0, 1.0),
                    ConfigError);
}

TEST_CASE("unit scale multiplies every coordinate") {
    const fs::path p = write_file("scale.txt",
                                  "1 0 2.0 4.0\n"
                                  "1 1 6.0 8.0\n");
    const ArchiveTrajectory full = parse_archive(p, ColumnMap{}, 10.0, 1.0);
    const ArchiveTrajectory half = parse_archive(p, ColumnMap{}, 10.0, 0.5);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(half.tracks[0].frames[k].second.x ==
              0.5 * full.tracks[0].frames[k].second.x);
        CHECK(half.tracks[0].frames[k].second.y ==
              0.5 * full.tracks[0].frames[k].second.y);
    }
}

TEST_CASE("resampling a straight walk reproduces it on the fine grid") {
    // 8 s of data at 16 Hz, walker at 0.7 m/s plus a stationary agent
    const double rate = 16.0;
    std::string content = line_track(1, 0, 128, rate, {0.0, 1.0}, {0.7, 0.0});
    content += line_track(2, 0, 128, rate, {3.0, 2.0}, {0.0, 0.0});
    const fs::path p = write_file("straight.txt", content);
    const ArchiveTrajectory data = parse_archive(p, ColumnMap{}, rate, 1.0);

    const double dt = 0.00625;
    const ResampleResult res = resample(data, 0.0, 8.0, dt);
    CHECK(res.dropped == 0);
    REQUIRE(res.kept_ids == std::vector<long long>{1, 2});
    REQUIRE(res.trajectory.frames() == 1281);
    CHECK(res.trajectory.dt == dt);

    for (std::size_t k = 0; k < res.trajectory.frames(); ++k) {
        const double t = static_cast<double>(k) * dt;
        CHECK(std::abs(res.trajectory.positions[k][0].x - 0.7 * t) < 1e-6);
        CHECK(std::abs(res.trajectory.positions[k][0].y - 1.0) < 1e-12);
        CHECK(std::abs(res.trajectory.velocities[k][0].x - 0.7) < 1e-4);
        CHECK(res.trajectory.positions[k][1].x == 3.0);
        CHECK(res.trajectory.velocities[k][1].x == 0.0);
        CHECK(res.trajectory.velocities[k][1].y == 0.0);
    }
}

TEST_CASE("resampled velocities are the interpolant's segment slopes") {
    // knots at t = 0, 1, 2: right 1 m, then up 1 m
    const fs::path p = write_file("knots.txt",
                                  "5 0 0.0 0.0\n"
                                  "5 16 1.0 0.0\n"
                                  "5 32 1.0 1.0\n");
    const ArchiveTrajectory data = parse_archive(p, ColumnMap{}, 16.0, 1.0);
    const ResampleResult res = resample(data, 0.0, 2.0, 0.5);
    const Trajectory& tr = res.trajectory;
    REQUIRE(tr.frames() == 5);

    CHECK(tr.positions[1][0].x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tr.positions[3][0].y == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(tr.velocities[0][0].x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tr.velocities[1][0].x == doctest::Approx(1.0).epsilon(1e-12));
    // at an interior knot the slope switches to the segment on the right
    CHECK(tr.velocities[2][0].x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tr.velocities[2][0].y == doctest::Approx(1.0).epsilon(1e-12));
    // past the last knot the final segment extends
    CHECK(tr.velocities[4][0].y == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tr.positions[4][0].y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("agents not covering the window are dropped or selected away") {
    const double rate = 16.0;
    std::string content = line_track(1, 0, 64, rate, {0.0, 0.0}, {0.7, 0.0});
    content += line_track(2, 0, 10, rate, {0.0, 1.0}, {0.7, 0.0});  // ends at 0.625 s
    content += "3 0 5.0 5.0\n";                                     // single frame
    const fs::path p = write_file("partial.txt", content);
    const ArchiveTrajectory data = parse_archive(p, ColumnMap{}, rate, 1.0);

    const ResampleResult res = resample(data, 0.0, 4.0, 0.125);
    CHECK(res.kept_ids == std::vector<long long>{1});
    CHECK(res.dropped == 2);

    const ResampleResult picked = resample(data, 0.0, 0.5, 0.125, {2});
    CHECK(picked.kept_ids == std::vector<long long>{2});
    CHECK(picked.dropped == 0);

    CHECK_THROWS_AS(resample(data, 100.0, 4.0, 0.125), ConfigError);
    CHECK_THROWS_AS(resample(data, 0.0, 4.0, 0.0), ConfigError);
}

TEST_CASE("trajectory export and read-back reproduce the doubles exactly") {
    Rng rng(77);
    Trajectory traj;
    traj.dt = 0.00625;
    for (int k = 0; k < 4; ++k) {
        std::vector<Vec2> xs, vs;
        for (int i = 0; i < 3; ++i) {
            xs.push_back(rng.in_rect(-10.0, 10.0, -10.0, 10.0));
            vs.push_back(rng.in_rect(-2.0, 2.0, -2.0, 2.0));
        }
        traj.positions.push_back(xs);
        traj.velocities.push_back(vs);
    }

    const fs::path p = fixture_dir() / "roundtrip.csv";
    export_trajectory(traj, p);
    const Trajectory back = read_trajectory_csv(p);

    REQUIRE(back.frames() == traj.frames());
    REQUIRE(back.agents() == traj.agents());
    CHECK(back.dt == traj.dt);
    for (std::size_t k = 0; k < traj.frames(); ++k)
        for (std::size_t i = 0; i < traj.agents(); ++i) {
            CHECK(back.positions[k][i].x == traj.positions[k][i].x);
            CHECK(back.positions[k][i].y == traj.positions[k][i].y);
            CHECK(back.velocities[k][i].x == traj.velocities[k][i].x);
            CHECK(back.velocities[k][i].y == traj.velocities[k][i].y);
        }
}

TEST_CASE("trajectory CSV reader rejects bad headers and ragged frames") {
    const fs::path bad_header = write_file("bad_header.csv", "time,id,x,y\n");
    CHECK_THROWS_AS(read_trajectory_csv(bad_header), ConfigError);

    const fs::path ragged = write_file("ragged.csv",
                                       "t,agent,x,y,vx,vy\n"
                                       "0,0,0,0,0,0\n"
                                       "0,1,1,0,0,0\n"
                                       "0.1,0,0,0,0,0\n");
    CHECK_THROWS_AS(read_trajectory_csv(ragged), ConfigError);

    const fs::path short_fields = write_file("short_fields.csv",
                                             "t,agent,x,y,vx,vy\n"
                                             "0,0,0,0\n");
    CHECK_THROWS_AS(read_trajectory_csv(short_fields), ConfigError);
}

TEST_CASE("group mean velocity averages displacement over duration") {
    const double rate = 16.0;
    std::string content = line_track(1, 0, 32, rate, {0.0, 0.0}, {0.7, 0.0});
    content += line_track(2, 0, 32, rate, {0.0, 1.0}, {0.5, 0.1});
    content += "3 0 5.0 5.0\n";  // one frame only
    const fs::path p = write_file("groups.txt", content);
    const ArchiveTrajectory data = parse_archive(p, ColumnMap{}, rate, 1.0);

    const std::vector<GroupVelocity> est =
        estimate_mean_velocity(data, 0.0, 2.0, {{1, 2}, {3, 99}});
    REQUIRE(est.size() == 2);
    CHECK(est[0].agents_used == 2);
    CHECK(est[0].agents_skipped == 0);
    CHECK(est[0].mean.x == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(est[0].mean.y == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(est[1].agents_used == 0);
    CHECK(est[1].agents_skipped == 2);
    CHECK(est[1].mean.x == 0.0);
    CHECK(est[1].mean.y == 0.0);
}

TEST_CASE("generic CSV export writes one row per record") {
    const fs::path p = fixture_dir() / "generic.csv";
    export_csv("a,b", {{1.0, 0.1}, {2.0, 0.2}}, p);
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    CHECK(line == "a,b");
    std::getline(in, line);
    CHECK(line.rfind("1,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("2,", 0) == 0);
    CHECK(!std::getline(in, line));
}
