#pragma once

#include <span>
#include <utility>

#include "pedcal/vec2.hpp"

namespace pedcal {

// ‖v‖ below this counts as "standing still": the heading angle is undefined
// and every angle-related quantity takes its zero branch.
inline constexpr double kVelocityZeroTol = 1e-12;

// pair separations below this are treated as coincident (singular force)
inline constexpr double kSeparationTol = 1e-12;

// relative tolerance for parallel/antiparallel velocity pairs, where the
// angle gradient is unbounded; we return the symmetric subgradient choice 0
inline constexpr double kParallelTol = 1e-9;

struct ModelParams {
    double lambda = 0.0;  // anisotropy scaling, |lambda| <= 1
    double tau = 1.0;     // relaxation rate toward the desired velocity, 1/s
    double A = 0.0;       // attraction amplitude >= 0
    double R = 0.0;       // repulsion amplitude >= 0
    double a = 1.0;       // attraction range > 0, m
    double r = 0.5;       // repulsion range > 0, m
    double d = 0.0;       // body diameter >= 0, m

    void validate() const;  // throws ConfigError on violated bounds
};

struct ControlVector {
    double lambda = 0.0;
    double A = 0.0;
    double R = 0.0;
};

// admissible box [-1+eps, 1-eps] x [0, A_max] x [0, R_max]
struct ControlBox {
    double eps = 1e-3;
    double A_max = 100.0;
    double R_max = 100.0;
};

ControlVector clamp_to_box(const ControlVector& u, const ControlBox& box);

inline ModelParams with_control(ModelParams p, const ControlVector& u) {
    p.lambda = u.lambda;
    p.A = u.A;
    p.R = u.R;
    return p;
}

// angle by which agent i's view of the force from agent j is rotated:
// lambda * arccos(v_i.v_j / (|v_i||v_j|)), or 0 if either speed vanishes.
// The arccos argument is clamped to [-1, 1] against roundoff drift.
double rotation_angle(const Vec2& v_i, const Vec2& v_j, double lambda);

Mat2 rotation_matrix_from_angle(double alpha);
Mat2 rotation_matrix(const Vec2& v_i, const Vec2& v_j, double lambda);

// derivative of the rotation matrix w.r.t. its angle
Mat2 rotation_matrix_angle_derivative(double alpha);

// scalar radial profile of the pair force:
//   k(s) = (A/a) e^{(d-s)/a} - (R/r) e^{(d-s)/r}
double radial_coefficient(double s, const ModelParams& p);
double radial_coefficient_derivative(double s, const ModelParams& p);

// separation at which the radial coefficient changes sign (closed form);
// requires A, R, a, r > 0 and a != r
double equilibrium_separation(const ModelParams& p);

// pair force K = k(s) (x_i - x_j)/s with s = |x_i - x_j|.
// Throws SingularSeparation for coincident positions.
Vec2 interaction_force(const Vec2& x_i, const Vec2& x_j, const ModelParams& p);

// d K / d x_i (2x2). Depends on the pair only through x_i - x_j, so the
// derivative w.r.t. x_j is its negative, and swapping the arguments leaves
// the matrix unchanged.
Mat2 force_position_jacobian(const Vec2& x_i, const Vec2& x_j, const ModelParams& p);

// gradients of the rotation angle w.r.t. v_i and v_j; zero vectors whenever
// either speed vanishes or the velocities are (anti)parallel within tolerance
std::pair<Vec2, Vec2> alpha_velocity_gradient(const Vec2& v_i, const Vec2& v_j,
                                              double lambda);

// d M / d v_i as a 2x2x2 tensor: primal[p][q] is the gradient of entry M_pq,
// i.e. primal[p][q] = D_pq * g where D = dM/dalpha and g = dalpha/dv_i.
// dual[] holds the axis-swapped layout used to apply the transposed tensor:
// (dual contracted with K)^T = primal contracted with K.
struct VelocityGradientTensor {
    Vec2 primal[2][2];
    Vec2 dual[2][2];
    double alpha = 0.0;
    Vec2 g;  // dalpha/dv_i behind the entries (zero in degenerate branches)
};

VelocityGradientTensor rotation_velocity_gradient(const Vec2& v_i, const Vec2& v_j,
                                                  double lambda);

// contraction of a 2x2-of-Vec2 tensor slot with a force vector:
// result(p, q) = sum_c t[p][c]-layout semantics, see the two helpers below.

// J = d(M(v_i, v_j) K)/d v_i built from the primal entries: J_pr = sum_q primal[p][q]_r K_q
Mat2 tensor_force_jacobian(const VelocityGradientTensor& t, const Vec2& K);

// same matrix transposed, built from the dual entries: used by the backward
// solver which needs J^T xi products
Mat2 tensor_force_jacobian_transposed(const VelocityGradientTensor& t, const Vec2& K);

// total acceleration of agent i:
//   tau (w_i - v_i) - (1/N) sum_{j != i} M(v_i, v_j) K(x_i, x_j)
// The sum is divided by N, the total agent count, not by N-1.
Vec2 acceleration(std::size_t i, std::span<const Vec2> positions,
                  std::span<const Vec2> velocities, std::span<const Vec2> desired,
                  const ModelParams& p);

// interaction part only: G_i = (1/N) sum_{j != i} M(v_i, v_j) K(x_i, x_j)
Vec2 interaction_sum(std::size_t i, std::span<const Vec2> positions,
                     std::span<const Vec2> velocities, const ModelParams& p);

// partial derivatives of agent i's right-hand side w.r.t. (lambda, A, R)
struct ControlDerivatives {
    Vec2 dlambda;
    Vec2 dA;
    Vec2 dR;
};

ControlDerivatives force_control_derivatives(std::size_t i,
                                             std::span<const Vec2> positions,
                                             std::span<const Vec2> velocities,
                                             const ModelParams& p);

}  // namespace pedcal
