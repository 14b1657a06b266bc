#include "ncps/scheme.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ncps {

std::string_view to_string(Scheme s) {
    return s == Scheme::semi_implicit ? "semi_implicit" : "explicit";
}

Scheme parse_scheme(std::string_view name) {
    if (name == "semi_implicit") return Scheme::semi_implicit;
    if (name == "explicit") return Scheme::explicit_em;
    throw ValidationError("unknown scheme '" + std::string(name) + "'", "scheme");
}

namespace {

Vector explicit_part(const ParticleSystem& system, const Vector& state, double h, const Vector& dW) {
    return state + h * drift_eval(system.drift(), state) + diffusion_eval(system.diffusion(), state) * dW;
}

}  // namespace

StepResult step_semi_implicit(const ParticleSystem& system, const Vector& state, double h, const Vector& dW,
                              const SolverOptions& opts) {
    if (!in_chamber(state)) throw ValidationError("state is not strictly increasing", "state");
    if (!(h > 0.0)) throw ValidationError("must be > 0", "h");

    ImplicitProblem problem{explicit_part(system, state, h, dW), system.gamma() * h};
    SolveResult r = solve(problem, opts);
    return {std::move(r.xi), r.diagnostics};
}

ExplicitStep step_explicit(const ParticleSystem& system, const Vector& state, double h, const Vector& dW) {
    if (!in_chamber(state)) throw ValidationError("state is not strictly increasing", "state");
    Vector next = explicit_part(system, state, h, dW) + h * system.interaction(state);
    const bool ordered = in_chamber(next);
    return {std::move(next), ordered};
}

PathResult simulate(const ParticleSystem& system, const TimeGrid& grid, const BrownianPath& path, Scheme scheme,
                    const SolverOptions& opts) {
    const int d = system.dim();
    if (path.d != d) throw ValidationError("path dimension does not match the system", "path.d");
    if (path.steps != grid.n) throw ValidationError("path level does not match the grid", "path.steps");
    if (path.T != grid.T) throw ValidationError("path horizon does not match the grid", "path.T");

    PathResult result;
    result.states.resize(grid.n + 1, d);
    result.states.row(0) = system.x0().transpose();
    if (scheme == Scheme::semi_implicit) result.solver_iters.reserve(grid.n);

    Vector state = system.x0();
    double gap = min_gap(state);
    const double h = grid.h();
    int k = 0;
    for (; k < grid.n; ++k) {
        const Vector dW = path.increments.row(k).transpose();
        if (scheme == Scheme::semi_implicit) {
            StepResult step = step_semi_implicit(system, state, h, dW, opts);
            state = std::move(step.state);
            result.solver_iters.push_back(step.diagnostics.iterations);
        } else {
            ExplicitStep step = step_explicit(system, state, h, dW);
            state = std::move(step.state);
            if (!step.ordered) {
                result.exited_chamber = true;
                result.states.row(k + 1) = state.transpose();
                gap = std::min(gap, min_gap(state));
                ++k;
                break;
            }
        }
        result.states.row(k + 1) = state.transpose();
        gap = std::min(gap, min_gap(state));
    }
    if (k < grid.n) result.states.conservativeResize(k + 1, d);
    result.min_gap = gap;
    return result;
}

}  // namespace ncps
