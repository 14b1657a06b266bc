#include "ncps/implicit_solver.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ncps {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double max_norm(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

void require_chamber(const Vector& xi) {
    if (!in_chamber(xi)) throw ValidationError("point is not strictly increasing", "xi");
}

/// Damped Newton from an arbitrary chamber point.
/// Rounding-error scale of residual(problem, xi): each term c/(xi_i - xi_j)
/// inherits the relative error of the difference of two rounded positions.
double residual_noise(const ImplicitProblem& problem, const Vector& xi) {
    const auto d = xi.size();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        double e = std::abs(xi[i]) + std::abs(problem.a[i]);
        for (Eigen::Index j = 0; j < d; ++j) {
            if (j == i || problem.c(i, j) == 0.0) continue;
            const double gap = std::abs(xi[i] - xi[j]);
            e += problem.c(i, j) / gap * (1.0 + (std::abs(xi[i]) + std::abs(xi[j])) / gap);
        }
        worst = std::max(worst, e);
    }
    return kEps * worst;
}

SolveResult newton_from(const ImplicitProblem& problem, Vector xi, const SolverOptions& opts) {
    Vector r = residual(problem, xi);
    double rnorm = r.norm();
    for (int iter = 0; iter <= opts.max_iter; ++iter) {
        if (max_norm(r) <= opts.tol) {
            return {std::move(xi), {SolverMethod::newton, iter, max_norm(r)}};
        }
        if (iter == opts.max_iter) break;

        Eigen::LLT<Matrix> llt(jacobian(problem, xi));
        if (llt.info() != Eigen::Success) throw NonConvergence("Newton: Jacobian factorisation failed");
        const Vector step = -llt.solve(r);
        // A correction below the spacing of doubles around xi cannot reduce
        // the residual further; the iterate is as accurate as it can be.
        if (max_norm(step) <= 4.0 * kEps * std::max(1.0, max_norm(xi))) {
            return {std::move(xi), {SolverMethod::newton, iter, max_norm(r)}};
        }

        double lambda = 1.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 60; ++halvings, lambda *= 0.5) {
            Vector trial = xi + lambda * step;
            if (!in_chamber(trial)) continue;
            Vector rt = residual(problem, trial);
            const double tn = rt.norm();
            if (tn < rnorm) {
                xi = std::move(trial);
                r = std::move(rt);
                rnorm = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (max_norm(r) <= 8.0 * residual_noise(problem, xi)) {
                return {std::move(xi), {SolverMethod::newton, iter, max_norm(r)}};
            }
            throw NonConvergence("Newton: line search stalled at residual " + std::to_string(max_norm(r)));
        }
    }
    throw NonConvergence("Newton: no convergence after " + std::to_string(opts.max_iter) +
                         " iterations (residual " + std::to_string(max_norm(r)) + ")");
}

/// Problem data reduced to the gap system of the nearest-neighbour case.
struct GapSystem {
    Vector offsets;  // a_{i+1} - a_i
    Vector coeffs;   // c_{i,i+1}
};

GapSystem gap_system(const ImplicitProblem& problem) {
    const int k = problem.dim() - 1;
    GapSystem g{Vector(k), Vector(k)};
    for (int i = 0; i < k; ++i) {
        g.offsets[i] = problem.a[i + 1] - problem.a[i];
        g.coeffs[i] = problem.c(i, i + 1);
    }
    return g;
}

/// Anchor xi_1 so that mean(xi) = mean(a); the interaction terms cancel in
/// the sum of the equations.
double anchor_for(const ImplicitProblem& problem, const Vector& gaps) {
    double pos = 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < gaps.size(); ++i) {
        pos += gaps[i];
        sum += pos;
    }
    return problem.a.mean() - sum / problem.dim();
}

double uniform_coefficient(const Matrix& c) {
    const double v = c(0, 1);
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 1; j < c.cols(); ++j)
            if (c(i, j) != v) return std::numeric_limits<double>::quiet_NaN();
    return v;
}

bool wrong_direction(double earlier, double later, bool should_decrease) {
    const double slack = 64.0 * kEps * std::max(1.0, std::abs(earlier));
    return should_decrease ? later > earlier + slack : later < earlier - slack;
}

}  // namespace

// --- problem ---------------------------------------------------------------

void ImplicitProblem::validate() const {
    const auto d = a.size();
    if (d < 2) throw ValidationError("need at least 2 unknowns", "a");
    if (!a.allFinite()) throw ValidationError("non-finite entry", "a");
    if (c.rows() != d || c.cols() != d) throw ValidationError("expected a d x d matrix", "c");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (c(i, i) != 0.0) throw ValidationError("diagonal must be zero", "c");
        for (Eigen::Index j = 0; j < d; ++j) {
            if (!std::isfinite(c(i, j)) || c(i, j) < 0.0)
                throw ValidationError("entries must be finite and non-negative", "c");
            if (c(i, j) != c(j, i)) throw ValidationError("must be symmetric", "c");
        }
        if (i + 1 < d && !(c(i, i + 1) > 0.0))
            throw ValidationError("first off-diagonal must be positive", "c");
    }
}

ImplicitProblem ImplicitProblem::uniform(Vector a, double c) {
    const auto d = a.size();
    Matrix m = Matrix::Constant(d, d, c);
    m.diagonal().setZero();
    return {std::move(a), std::move(m)};
}

ImplicitProblem ImplicitProblem::tridiagonal(Vector a, const Vector& band) {
    const auto d = a.size();
    if (band.size() != d - 1) throw ValidationError("expected d-1 band entries", "c");
    Matrix m = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i + 1 < d; ++i) m(i, i + 1) = m(i + 1, i) = band[i];
    return {std::move(a), std::move(m)};
}

std::string_view to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::newton: return "newton";
        case SolverMethod::homotopy: return "homotopy";
        case SolverMethod::fixed_point_nn: return "fixed_point_nn";
        case SolverMethod::alternating_d3: return "alternating_d3";
        case SolverMethod::automatic: return "auto";
    }
    return "?";
}

SolverMethod parse_solver_method(std::string_view name) {
    for (auto m : {SolverMethod::newton, SolverMethod::homotopy, SolverMethod::fixed_point_nn,
                   SolverMethod::alternating_d3, SolverMethod::automatic}) {
        if (name == to_string(m)) return m;
    }
    throw ValidationError("unknown solver method '" + std::string(name) + "'", "method");
}

void SolverOptions::validate() const {
    if (!(tol > 0.0)) throw ValidationError("must be > 0", "tol");
    if (max_iter < 1) throw ValidationError("must be >= 1", "max_iter");
    if (homotopy_steps < 1) throw ValidationError("must be >= 1", "homotopy_steps");
}

Vector GapVector::to_positions() const {
    Vector xi(x.size() + 1);
    xi[0] = anchor;
    for (Eigen::Index i = 0; i < x.size(); ++i) xi[i + 1] = xi[i] + x[i];
    return xi;
}

GapVector GapVector::from_positions(const Vector& xi) {
    GapVector g{Vector(xi.size() - 1), xi[0]};
    for (Eigen::Index i = 0; i + 1 < xi.size(); ++i) g.x[i] = xi[i + 1] - xi[i];
    return g;
}

double pair_gap(double s, double c) {
    const double root = std::sqrt(s * s + 8.0 * c);
    return s >= 0.0 ? 0.5 * (s + root) : 4.0 * c / (root - s);
}

bool is_tridiagonal(const Matrix& c) {
    for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = i + 2; j < c.cols(); ++j)
            if (c(i, j) != 0.0 || c(j, i) != 0.0) return false;
    return true;
}

// --- residual / jacobian ---------------------------------------------------

Vector residual(const ImplicitProblem& problem, const Vector& xi) {
    require_chamber(xi);
    const auto d = xi.size();
    Vector r = xi - problem.a;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double cij = problem.c(i, j);
            if (cij == 0.0) continue;
            const double t = cij / (xi[i] - xi[j]);
            r[i] -= t;
            r[j] += t;
        }
    }
    return r;
}

Matrix jacobian(const ImplicitProblem& problem, const Vector& xi) {
    require_chamber(xi);
    const auto d = xi.size();
    Matrix m = Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double cij = problem.c(i, j);
            if (cij == 0.0) continue;
            const double diff = xi[i] - xi[j];
            const double t = cij / (diff * diff);
            m(i, i) += t;
            m(j, j) += t;
            m(i, j) -= t;
            m(j, i) -= t;
        }
    }
    return m;
}

// --- Newton ----------------------------------------------------------------

Vector newton_initial_guess(const ImplicitProblem& problem) {
    const GapSystem g = gap_system(problem);
    Vector gaps(g.offsets.size());
    for (Eigen::Index i = 0; i < gaps.size(); ++i) gaps[i] = pair_gap(g.offsets[i], g.coeffs[i]);
    return GapVector{gaps, anchor_for(problem, gaps)}.to_positions();
}

SolveResult solve_newton(const ImplicitProblem& problem, const SolverOptions& opts) {
    problem.validate();
    opts.validate();
    return newton_from(problem, newton_initial_guess(problem), opts);
}

// --- homotopy --------------------------------------------------------------

SolveResult solve_homotopy(const ImplicitProblem& problem, const SolverOptions& opts, HomotopyTrace* trace) {
    problem.validate();
    opts.validate();
    const int d = problem.dim();

    // g_i(x) = a_i - i + f_i(x) with the 1-based index i; J = (1, ..., d).
    Vector J(d);
    for (int i = 0; i < d; ++i) J[i] = i + 1;
    const Vector gJ = J - residual(problem, J);  // = a + f(J), i.e. g(J) + J
    const Vector drive = gJ - J;
    const double bound = drive.norm();

    auto velocity = [&](const Vector& x) -> Vector {
        Eigen::LLT<Matrix> llt(jacobian(problem, x));
        if (llt.info() != Eigen::Success) throw NonConvergence("homotopy: Jacobian factorisation failed");
        return llt.solve(drive);
    };
    auto check_speed = [&](double speed) {
        if (speed > bound * (1.0 + 1e-9) + 1e-300)
            throw NonConvergence("homotopy: |dx/dt| exceeded |g(J)|");
    };

    Vector x = J;
    double t = 0.0;
    Vector v = velocity(x);
    check_speed(v.norm());
    if (trace) {
        trace->speed_bound = bound;
        trace->t.assign(1, 0.0);
        trace->x.assign(1, x);
        trace->speed.assign(1, v.norm());
    }

    const double nominal = 1.0 / opts.homotopy_steps;
    int accepted_steps = 0;
    while (t < 1.0) {
        double h = std::min(nominal, 1.0 - t);
        bool accepted = false;
        for (int halvings = 0; halvings < 60 && !accepted; ++halvings, h *= 0.5) {
            const Vector k1 = v;
            const Vector p2 = x + 0.5 * h * k1;
            if (!in_chamber(p2)) continue;
            const Vector k2 = velocity(p2);
            const Vector p3 = x + 0.5 * h * k2;
            if (!in_chamber(p3)) continue;
            const Vector k3 = velocity(p3);
            const Vector p4 = x + h * k3;
            if (!in_chamber(p4)) continue;
            const Vector k4 = velocity(p4);
            Vector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!in_chamber(next)) continue;

            x = std::move(next);
            t = (h == 1.0 - t) ? 1.0 : t + h;
            v = velocity(x);
            check_speed(v.norm());
            accepted = true;
            ++accepted_steps;
            if (trace) {
                trace->t.push_back(t);
                trace->x.push_back(x);
                trace->speed.push_back(v.norm());
            }
        }
        if (!accepted) throw NonConvergence("homotopy: step size underflow near the chamber boundary");
    }

    SolveResult polished = newton_from(problem, x, opts);
    polished.diagnostics.method_used = SolverMethod::homotopy;
    polished.diagnostics.iterations += accepted_steps;
    return polished;
}

// --- nearest-neighbour fixed point ----------------------------------------

GapVector solve_fixed_point_nn(const ImplicitProblem& problem, const SolverOptions& opts, int* iterations,
                               FixedPointTrace* trace) {
    problem.validate();
    opts.validate();
    if (!is_tridiagonal(problem.c)) throw UnsupportedStructure("fixed_point_nn requires tridiagonal c");

    const GapSystem g = gap_system(problem);
    const auto k = g.offsets.size();
    Vector x(k);
    for (Eigen::Index i = 0; i < k; ++i) x[i] = pair_gap(g.offsets[i], g.coeffs[i]);
    if (trace) trace->iterates.assign(1, x);

    Vector next(k);
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        for (Eigen::Index i = 0; i < k; ++i) {
            double s = g.offsets[i];
            if (i > 0) s -= g.coeffs[i - 1] / x[i - 1];
            if (i + 1 < k) s -= g.coeffs[i + 1] / x[i + 1];
            next[i] = pair_gap(s, g.coeffs[i]);
            if (wrong_direction(x[i], next[i], true))
                throw NonConvergence("fixed_point_nn: iterate increased (monotonicity lost)");
        }
        const double change = (next - x).cwiseAbs().maxCoeff();
        x = next;
        if (trace) trace->iterates.push_back(x);
        if (change <= opts.tol) {
            if (iterations) *iterations = iter;
            return {x, anchor_for(problem, x)};
        }
    }
    throw NonConvergence("fixed_point_nn: no convergence after " + std::to_string(opts.max_iter) + " iterations");
}

// --- d = 3 alternating iteration ------------------------------------------

GapVector solve_alternating_d3(const ImplicitProblem& problem, const SolverOptions& opts, int* iterations,
                               AlternatingTrace* trace) {
    problem.validate();
    opts.validate();
    if (problem.dim() != 3) throw UnsupportedStructure("alternating_d3 requires d = 3");
    const double c = uniform_coefficient(problem.c);
    if (std::isnan(c)) throw UnsupportedStructure("alternating_d3 requires a single coefficient c");

    const double scale = std::sqrt(c);
    const double a = (problem.a[1] - problem.a[0]) / scale;
    const double b = (problem.a[2] - problem.a[1]) / scale;

    // Gap equations in normalised form:
    //   x - 2/x = a - 1/y + 1/(x+y),   y - 2/y = b - 1/x + 1/(x+y).
    std::vector<double> xs{pair_gap(a, 1.0)};
    // y_1 solves y - 3/(2y) = b - (|a| + sqrt 2)/2.
    std::vector<double> ys{pair_gap(b - 0.5 * (std::abs(a) + std::sqrt(2.0)), 0.75)};

    auto check_interleaving = [&](std::size_t n) {
        // n is 0-based; n even <=> odd-indexed term in 1-based numbering.
        if (n < 2) return;
        const bool odd = (n % 2 == 0);
        if (wrong_direction(xs[n - 2], xs[n], odd) || wrong_direction(ys[n - 2], ys[n], !odd))
            throw NonConvergence("alternating_d3: interleaving order violated");
    };

    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        const double xn = xs.back();
        const double yn = ys.back();
        const double cross = 1.0 / (xn + yn);
        xs.push_back(pair_gap(a - 1.0 / yn + cross, 1.0));
        ys.push_back(pair_gap(b - 1.0 / xn + cross, 1.0));
        check_interleaving(xs.size() - 1);
        if (std::abs(xs.back() - xn) + std::abs(ys.back() - yn) <= opts.tol) {
            if (iterations) *iterations = iter;
            if (trace) *trace = {xs, ys};
            Vector gaps(2);
            gaps << scale * xs.back(), scale * ys.back();
            return {gaps, anchor_for(problem, gaps)};
        }
    }
    throw NonConvergence("alternating_d3: no convergence after " + std::to_string(opts.max_iter) + " iterations");
}

// --- dispatch --------------------------------------------------------------

SolveResult solve(const ImplicitProblem& problem, const SolverOptions& opts) {
    problem.validate();
    opts.validate();

    auto structural = [&](SolverMethod m) -> SolveResult {
        int iters = 0;
        GapVector g = (m == SolverMethod::fixed_point_nn) ? solve_fixed_point_nn(problem, opts, &iters)
                                                           : solve_alternating_d3(problem, opts, &iters);
        Vector xi = g.to_positions();
        if (!in_chamber(xi)) throw NonConvergence(std::string(to_string(m)) + ": result left the chamber");
        const double res = max_norm(residual(problem, xi));
        return {std::move(xi), {m, iters, res}};
    };

    switch (opts.method) {
        case SolverMethod::newton: return solve_newton(problem, opts);
        case SolverMethod::homotopy: return solve_homotopy(problem, opts);
        case SolverMethod::fixed_point_nn: return structural(SolverMethod::fixed_point_nn);
        case SolverMethod::alternating_d3: return structural(SolverMethod::alternating_d3);
        case SolverMethod::automatic: break;
    }

    std::string failures;
    try {
        return solve_newton(problem, opts);
    } catch (const NonConvergence& e) {
        failures += e.what();
    }
    try {
        return solve_homotopy(problem, opts);
    } catch (const NonConvergence& e) {
        failures += std::string("; ") + e.what();
    }
    std::vector<SolverMethod> fallbacks;
    if (is_tridiagonal(problem.c)) fallbacks.push_back(SolverMethod::fixed_point_nn);
    if (problem.dim() == 3 && !std::isnan(uniform_coefficient(problem.c)))
        fallbacks.push_back(SolverMethod::alternating_d3);
    for (SolverMethod m : fallbacks) {
        try {
            SolveResult r = structural(m);
            if (r.diagnostics.residual <= opts.tol) return r;
            SolveResult polished = newton_from(problem, r.xi, opts);
            polished.diagnostics.method_used = m;
            polished.diagnostics.iterations += r.diagnostics.iterations;
            return polished;
        } catch (const NonConvergence& e) {
            failures += std::string("; ") + e.what();
        }
    }
    throw NonConvergence("all solver methods failed: " + failures);
}

}  // namespace ncps
