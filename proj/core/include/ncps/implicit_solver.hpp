#pragma once

#include "ncps/types.hpp"

#include <string_view>
#include <vector>

namespace ncps {

/// The per-step system  xi_i = a_i + sum_{j != i} c_ij / (xi_i - xi_j).
///
/// For c symmetric, non-negative, zero on the diagonal and positive on the
/// first off-diagonal there is exactly one solution with xi_1 < ... < xi_d.
struct ImplicitProblem {
    Vector a;
    Matrix c;

    int dim() const noexcept { return static_cast<int>(a.size()); }

    /// Throws ValidationError when the structural hypotheses fail.
    void validate() const;

    static ImplicitProblem uniform(Vector a, double c);
    static ImplicitProblem tridiagonal(Vector a, const Vector& band);
};

enum class SolverMethod { newton, homotopy, fixed_point_nn, alternating_d3, automatic };

std::string_view to_string(SolverMethod m);
SolverMethod parse_solver_method(std::string_view name);

struct SolverOptions {
    SolverMethod method = SolverMethod::automatic;
    double tol = 1e-12;  // max-norm residual (Newton) or successive change (fixed point)
    int max_iter = 1000;
    int homotopy_steps = 64;

    void validate() const;
};

/// Consecutive gaps x_i = xi_{i+1} - xi_i plus the anchor xi_1.
struct GapVector {
    Vector x;
    double anchor = 0.0;

    Vector to_positions() const;
    static GapVector from_positions(const Vector& xi);
};

struct SolverDiagnostics {
    SolverMethod method_used = SolverMethod::newton;
    int iterations = 0;
    double residual = 0.0;  // max-norm of residual(problem, xi)
};

struct SolveResult {
    Vector xi;
    SolverDiagnostics diagnostics;
};

/// r_i = xi_i - a_i - sum_{j != i} c_ij / (xi_i - xi_j).
Vector residual(const ImplicitProblem& problem, const Vector& xi);

/// M = I - dg/dx; symmetric with <My, y> = |y|^2 + 1/2 sum c_ij (y_i - y_j)^2 / (x_i - x_j)^2.
Matrix jacobian(const ImplicitProblem& problem, const Vector& xi);

/// Starting point with mean(a) and decoupled-pair gaps.
Vector newton_initial_guess(const ImplicitProblem& problem);

/// Damped Newton. Step length is halved until all gaps stay positive and the
/// Euclidean residual norm decreases.
SolveResult solve_newton(const ImplicitProblem& problem, const SolverOptions& opts);

/// Trajectory of the homotopy path x(t), t in [0, 1], at accepted steps.
struct HomotopyTrace {
    std::vector<double> t;
    std::vector<Vector> x;
    std::vector<double> speed;  // |dx/dt| at the accepted point
    double speed_bound = 0.0;   // |g(J)|
};

/// Continuation from J = (1, ..., d): integrates dx/dt = (I - dg/dx)^{-1} g(J)
/// with classical RK4 to t = 1, then polishes with Newton.
SolveResult solve_homotopy(const ImplicitProblem& problem, const SolverOptions& opts,
                           HomotopyTrace* trace = nullptr);

struct FixedPointTrace {
    std::vector<Vector> iterates;
};

/// Monotone nearest-neighbour iteration on the gap system. Requires c to be
/// tridiagonal. Every iterate is checked to be coordinate-wise no larger than
/// its predecessor.
GapVector solve_fixed_point_nn(const ImplicitProblem& problem, const SolverOptions& opts,
                               int* iterations = nullptr, FixedPointTrace* trace = nullptr);

struct AlternatingTrace {
    // Normalised (unit-coefficient) sequences x_1, x_2, ... and y_1, y_2, ...
    std::vector<double> x;
    std::vector<double> y;
};

/// Two-gap iteration for d = 3 with a single coefficient c, solved in the
/// normalised variables xi = sqrt(c) * zeta. The interleaving of odd and even
/// subsequences is checked on every step.
GapVector solve_alternating_d3(const ImplicitProblem& problem, const SolverOptions& opts,
                               int* iterations = nullptr, AlternatingTrace* trace = nullptr);

/// Dispatch. `automatic` tries Newton, then homotopy, then whichever
/// structural iteration applies. Throws NonConvergence only if every applicable
/// method fails.
SolveResult solve(const ImplicitProblem& problem, const SolverOptions& opts = {});

/// Positive root of x^2 - s*x - 2c = 0, i.e. (s + sqrt(s^2 + 8c)) / 2, in a
/// cancellation-free form.
double pair_gap(double s, double c);

bool is_tridiagonal(const Matrix& c);

}  // namespace ncps
