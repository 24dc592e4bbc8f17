#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pedcal/model.hpp"
#include "pedcal/trajectory.hpp"

namespace pedcal {

// backward multipliers on the state grid; terminal frame is exactly zero
struct AdjointTrajectory {
    double dt = 0.0;
    std::vector<std::vector<Vec2>> xi1;  // position multipliers
    std::vector<std::vector<Vec2>> xi2;  // velocity multipliers

    std::size_t frames() const { return xi1.size(); }
    std::size_t agents() const { return xi1.empty() ? 0 : xi1.front().size(); }
};

// half-open window of step indices [k1, k2); the tracking source term is
// active on it (a real-valued index test so half-step stage evaluations at
// k - 1/2 partition exactly across adjacent windows)
struct MiniBatch {
    std::size_t k1 = 0;
    std::size_t k2 = 0;

    bool active(double k) const {
        return k >= static_cast<double>(k1) && k < static_cast<double>(k2);
    }
};

struct CalibrationConfig {
    double sigma1 = 1.0;        // tracking weight
    double sigma2 = 0.0;        // control regularization weight
    ControlVector u_ref;        // regularization anchor
    double beta[3] = {20.0, 4000.0, 4000.0};  // per-component step sizes
    double epsilon_rel = 1e-2;  // relative cost-change stopping threshold
    std::size_t m = 50;         // mini-batches per iteration
    double batch_length = 0.0;  // seconds; 0 means a single step per batch
    std::size_t max_iters = 100;
    ControlBox box;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct CalibrationResult {
    std::vector<ControlVector> u_history;  // iterates, including u0
    std::vector<double> cost_history;      // cost at each iterate
    ControlVector u_final;
    Trajectory final_trajectory;
    std::size_t iterations = 0;
    bool converged = false;  // stopped by the relative-change rule
};

// tracking cost plus control regularization:
//   integral of (sigma1 / 2N) sum_i |x_i - x_i^data|^2 (trapezoidal rule)
//   + (sigma2 / 2) |u - u_ref|^2
double cost_functional(const Trajectory& traj, const Trajectory& data,
                       const ControlVector& u, const CalibrationConfig& cfg);

// one evaluation of the backward system's right-hand side at the given frame
// values; source_active scales the tracking term (the batch mask);
// coupling_sign = +1 is the correct linearization, -1 is the deliberately
// corrupted variant used as a negative control in gradient checks
void adjoint_rhs(std::span<const Vec2> x, std::span<const Vec2> v,
                 std::span<const Vec2> x_data, std::span<const Vec2> xi1,
                 std::span<const Vec2> xi2, const ModelParams& p, double sigma1,
                 double source_active, double coupling_sign, std::span<Vec2> out1,
                 std::span<Vec2> out2);

// integrates the backward system from zero terminal values with the explicit
// midpoint rule on the state grid; state and data values at half steps are
// linear interpolations (frame averages) of the stored frames
AdjointTrajectory solve_adjoint(const Trajectory& state, const Trajectory& data,
                                const ControlVector& u, const ModelParams& base,
                                const CalibrationConfig& cfg, const MiniBatch& batch,
                                double coupling_sign = 1.0);

// gradient of the reduced cost w.r.t. (lambda, A, R):
//   sigma2 (u - u_ref) - integral of sum_i (dF_i/du)^T xi2_i (trapezoid)
ControlVector reduced_gradient(const Trajectory& state, const AdjointTrajectory& adj,
                               const ControlVector& u, const ModelParams& base,
                               const CalibrationConfig& cfg);

// mean of per-batch reduced gradients, one backward solve per batch
ControlVector minibatch_gradient(const Trajectory& state, const Trajectory& data,
                                 const ControlVector& u, const ModelParams& base,
                                 const CalibrationConfig& cfg,
                                 std::span<const MiniBatch> batches);

// u - beta (.) gradient, then clamped to the admissible box
ControlVector descent_step(const ControlVector& u, const ControlVector& gradient,
                           const double beta[3], const ControlBox& box);

// partitions the grid-index range [0, steps + 1) into contiguous blocks of
// batch_length/dt indices (minimum 1, last block may be shorter) and samples
// cfg.m of them without replacement
std::vector<MiniBatch> sample_batches(const CalibrationConfig& cfg, std::size_t steps,
                                      double dt, std::uint64_t iteration);

// projected steepest descent: initial state = data's first frame, model
// solved without walls on the data grid, mini-batch averaged gradients
CalibrationResult calibrate(const Trajectory& data, std::span<const Vec2> desired,
                            const ModelParams& base, const ControlVector& u0,
                            const CalibrationConfig& cfg);

// adjoint gradient vs central finite differences on one small random
// instance; used by the gradient-check command and the test suite
struct GradCheckRow {
    ControlVector adjoint_gradient;
    ControlVector fd_gradient;
    double rel_err[3] = {0.0, 0.0, 0.0};
    double max_rel_err = 0.0;
};

struct GradCheckInstance {
    ModelParams params;  // lambda, A, R carry the evaluation control
    ControlVector u;
    std::vector<Vec2> x0, v0, desired;
    Trajectory data;
    double T = 0.5;
    double dt = 1e-3;
};

// deterministic small-instance generator for gradient checks; draws from a
// family with non-degenerate velocities and balanced gradient components
// (instances whose finite-difference gradient has a component below 25% of
// the largest are rejected, since per-component relative error is ill-posed
// near a sign change of a component)
GradCheckInstance make_gradcheck_instance(std::uint64_t seed, std::size_t N, double T,
                                          double dt);

GradCheckRow gradient_check(const GradCheckInstance& inst, double coupling_sign = 1.0);

}  // namespace pedcal
