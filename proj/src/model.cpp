#include "pedcal/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pedcal/errors.hpp"

namespace pedcal {

void ModelParams::validate() const {
    std::ostringstream bad;
    if (!(a > 0.0)) bad << " a=" << a << " (must be > 0)";
    if (!(r > 0.0)) bad << " r=" << r << " (must be > 0)";
    if (!(A >= 0.0)) bad << " A=" << A << " (must be >= 0)";
    if (!(R >= 0.0)) bad << " R=" << R << " (must be >= 0)";
    if (!(d >= 0.0)) bad << " d=" << d << " (must be >= 0)";
    if (!(std::abs(lambda) <= 1.0)) bad << " lambda=" << lambda << " (must be in [-1,1])";
    if (!(tau >= 0.0)) bad << " tau=" << tau << " (must be >= 0)";
    const std::string s = bad.str();
    if (!s.empty()) throw ConfigError("invalid model parameters:" + s);
}

ControlVector clamp_to_box(const ControlVector& u, const ControlBox& box) {
    ControlVector out;
    out.lambda = std::clamp(u.lambda, -1.0 + box.eps, 1.0 - box.eps);
    out.A = std::clamp(u.A, 0.0, box.A_max);
    out.R = std::clamp(u.R, 0.0, box.R_max);
    return out;
}

double rotation_angle(const Vec2& v_i, const Vec2& v_j, double lambda) {
    const double ni = v_i.norm();
    const double nj = v_j.norm();
    if (ni < kVelocityZeroTol || nj < kVelocityZeroTol) return 0.0;
    const double c = std::clamp(dot(v_i, v_j) / (ni * nj), -1.0, 1.0);
    return lambda * std::acos(c);
}

Mat2 rotation_matrix_from_angle(double alpha) {
    const double c = std::cos(alpha);
    const double s = std::sin(alpha);
    return {c, -s, s, c};
}

Mat2 rotation_matrix(const Vec2& v_i, const Vec2& v_j, double lambda) {
    return rotation_matrix_from_angle(rotation_angle(v_i, v_j, lambda));
}

Mat2 rotation_matrix_angle_derivative(double alpha) {
    const double c = std::cos(alpha);
    const double s = std::sin(alpha);
    return {-s, -c, c, -s};
}

double radial_coefficient(double s, const ModelParams& p) {
    return (p.A / p.a) * std::exp((p.d - s) / p.a) -
           (p.R / p.r) * std::exp((p.d - s) / p.r);
}

double radial_coefficient_derivative(double s, const ModelParams& p) {
    return -(p.A / (p.a * p.a)) * std::exp((p.d - s) / p.a) +
           (p.R / (p.r * p.r)) * std::exp((p.d - s) / p.r);
}

double equilibrium_separation(const ModelParams& p) {
    if (!(p.A > 0.0) || !(p.R > 0.0))
        throw NumericalError("equilibrium separation needs positive amplitudes");
    if (p.a == p.r)
        throw NumericalError("equilibrium separation undefined for equal ranges");
    // k(s) = 0  <=>  (A/a) e^{(d-s)/a} = (R/r) e^{(d-s)/r}
    return p.d + std::log((p.R * p.a) / (p.A * p.r)) / (1.0 / p.r - 1.0 / p.a);
}

namespace {

double checked_separation(const Vec2& x_i, const Vec2& x_j) {
    const double s = (x_i - x_j).norm();
    if (s < kSeparationTol) {
        std::ostringstream msg;
        msg << "coincident agent positions (separation " << s << " at ("
            << x_i.x << ", " << x_i.y << ")): pair force is singular";
        throw SingularSeparation(msg.str());
    }
    return s;
}

}  // namespace

Vec2 interaction_force(const Vec2& x_i, const Vec2& x_j, const ModelParams& p) {
    const Vec2 diff = x_i - x_j;
    const double s = checked_separation(x_i, x_j);
    return diff * (radial_coefficient(s, p) / s);
}

Mat2 force_position_jacobian(const Vec2& x_i, const Vec2& x_j, const ModelParams& p) {
    const Vec2 diff = x_i - x_j;
    const double s = checked_separation(x_i, x_j);
    const Vec2 e = diff / s;
    const double k = radial_coefficient(s, p);
    const double kp = radial_coefficient_derivative(s, p);
    // d/dx_i [k(s) e] = k'(s) e e^T + (k(s)/s)(I - e e^T)
    const Mat2 ee = outer(e, e);
    return ee * kp + (Mat2::identity() - ee) * (k / s);
}

std::pair<Vec2, Vec2> alpha_velocity_gradient(const Vec2& v_i, const Vec2& v_j,
                                              double lambda) {
    const double ni = v_i.norm();
    const double nj = v_j.norm();
    if (ni < kVelocityZeroTol || nj < kVelocityZeroTol) return {Vec2{}, Vec2{}};
    const double vv = dot(v_i, v_j);
    const double prod = ni * nj;
    const double disc = prod * prod - vv * vv;
    // (anti)parallel velocities: arccos' argument sits at +-1 and the gradient
    // is unbounded; zero is the symmetric subgradient choice
    if (disc < (kParallelTol * prod) * (kParallelTol * prod)) return {Vec2{}, Vec2{}};
    const double inv = -lambda / std::sqrt(disc);
    const Vec2 gi = (v_j - v_i * (vv / (ni * ni))) * inv;
    const Vec2 gj = (v_i - v_j * (vv / (nj * nj))) * inv;
    return {gi, gj};
}

VelocityGradientTensor rotation_velocity_gradient(const Vec2& v_i, const Vec2& v_j,
                                                  double lambda) {
    VelocityGradientTensor t;
    t.alpha = rotation_angle(v_i, v_j, lambda);
    t.g = alpha_velocity_gradient(v_i, v_j, lambda).first;
    const Mat2 D = rotation_matrix_angle_derivative(t.alpha);
    t.primal[0][0] = t.g * D.a00;
    t.primal[0][1] = t.g * D.a01;
    t.primal[1][0] = t.g * D.a10;
    t.primal[1][1] = t.g * D.a11;
    // axis swap: dual[p][q]_r = primal[q][r]_p
    t.dual[0][0] = {t.primal[0][0].x, t.primal[0][1].x};
    t.dual[0][1] = {t.primal[1][0].x, t.primal[1][1].x};
    t.dual[1][0] = {t.primal[0][0].y, t.primal[0][1].y};
    t.dual[1][1] = {t.primal[1][0].y, t.primal[1][1].y};
    return t;
}

Mat2 tensor_force_jacobian(const VelocityGradientTensor& t, const Vec2& K) {
    // J_pr = sum_q primal[p][q]_r K_q
    Mat2 J;
    J.a00 = t.primal[0][0].x * K.x + t.primal[0][1].x * K.y;
    J.a01 = t.primal[0][0].y * K.x + t.primal[0][1].y * K.y;
    J.a10 = t.primal[1][0].x * K.x + t.primal[1][1].x * K.y;
    J.a11 = t.primal[1][0].y * K.x + t.primal[1][1].y * K.y;
    return J;
}

Mat2 tensor_force_jacobian_transposed(const VelocityGradientTensor& t, const Vec2& K) {
    // entry (p, q) is dual[p][q] . K; the axis swap makes this exactly the
    // transpose of the primal contraction
    Mat2 Jt;
    Jt.a00 = dot(t.dual[0][0], K);
    Jt.a01 = dot(t.dual[0][1], K);
    Jt.a10 = dot(t.dual[1][0], K);
    Jt.a11 = dot(t.dual[1][1], K);
    return Jt;
}

Vec2 interaction_sum(std::size_t i, std::span<const Vec2> positions,
                     std::span<const Vec2> velocities, const ModelParams& p) {
    const std::size_t N = positions.size();
    Vec2 G;
    for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        const Mat2 M = rotation_matrix(velocities[i], velocities[j], p.lambda);
        G += M * interaction_force(positions[i], positions[j], p);
    }
    return G / static_cast<double>(N);
}

Vec2 acceleration(std::size_t i, std::span<const Vec2> positions,
                  std::span<const Vec2> velocities, std::span<const Vec2> desired,
                  const ModelParams& p) {
    const Vec2 relax = (desired[i] - velocities[i]) * p.tau;
    return relax - interaction_sum(i, positions, velocities, p);
}

ControlDerivatives force_control_derivatives(std::size_t i,
                                             std::span<const Vec2> positions,
                                             std::span<const Vec2> velocities,
                                             const ModelParams& p) {
    const std::size_t N = positions.size();
    const double invN = 1.0 / static_cast<double>(N);
    ControlDerivatives out;
    for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        const Vec2 diff = positions[i] - positions[j];
        const double s = checked_separation(positions[i], positions[j]);
        const Vec2 e = diff / s;
        const double alpha = rotation_angle(velocities[i], velocities[j], p.lambda);
        const Mat2 M = rotation_matrix_from_angle(alpha);

        const double ni = velocities[i].norm();
        const double nj = velocities[j].norm();
        if (ni >= kVelocityZeroTol && nj >= kVelocityZeroTol) {
            // d alpha / d lambda = arccos(...), the unscaled angle
            const double c =
                std::clamp(dot(velocities[i], velocities[j]) / (ni * nj), -1.0, 1.0);
            const double theta = std::acos(c);
            const Vec2 K = interaction_force(positions[i], positions[j], p);
            out.dlambda += (rotation_matrix_angle_derivative(alpha) * K) * (-invN * theta);
        }
        out.dA += (M * e) * (-invN / p.a * std::exp((p.d - s) / p.a));
        out.dR += (M * e) * (invN / p.r * std::exp((p.d - s) / p.r));
    }
    return out;
}

}  // namespace pedcal
