#pragma once

#include "ncps/brownian.hpp"
#include "ncps/implicit_solver.hpp"
#include "ncps/model.hpp"

#include <string_view>
#include <vector>

namespace ncps {

enum class Scheme { semi_implicit, explicit_em };

std::string_view to_string(Scheme s);
Scheme parse_scheme(std::string_view name);

struct StepResult {
    Vector state;
    SolverDiagnostics diagnostics;
};

/// One semi-implicit step: the singular repulsion is taken at the new time,
/// b and sigma at the old one. Solves
///   xi_i = x_i + b_i(x) h + sum_j sigma_ij(x) dW_j + sum_{j != i} gamma_ij h / (xi_i - xi_j).
StepResult step_semi_implicit(const ParticleSystem& system, const Vector& state, double h, const Vector& dW,
                              const SolverOptions& opts = {});

struct ExplicitStep {
    Vector state;
    bool ordered = true;
};

/// One explicit Euler-Maruyama step. Leaving the chamber is reported, not raised.
ExplicitStep step_explicit(const ParticleSystem& system, const Vector& state, double h, const Vector& dW);

struct PathResult {
    RowMatrix states;               // (steps_taken + 1) x d, row k = X(t_k)
    double min_gap = 0.0;           // over all stored rows
    std::vector<int> solver_iters;  // per step; empty for the explicit scheme
    bool exited_chamber = false;    // explicit scheme only

    int steps_taken() const noexcept { return static_cast<int>(states.rows()) - 1; }
};

/// Runs the chosen stepper over the grid using path increments at the grid's
/// resolution. The explicit scheme stops at the first state outside the
/// chamber (that state is kept as the last row).
PathResult simulate(const ParticleSystem& system, const TimeGrid& grid, const BrownianPath& path,
                    Scheme scheme = Scheme::semi_implicit, const SolverOptions& opts = {});

}  // namespace ncps
