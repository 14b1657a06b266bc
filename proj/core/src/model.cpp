#include "ncps/model.hpp"

#include <cmath>
#include <limits>

namespace ncps {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool all_finite(const Vector& v) { return v.allFinite(); }

bool non_decreasing(const Vector& v) {
    for (Eigen::Index i = 0; i + 1 < v.size(); ++i) {
        if (v[i] > v[i + 1]) return false;
    }
    return true;
}

}  // namespace

bool in_chamber(const Vector& x) {
    if (!x.allFinite()) return false;
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        if (!(x[i] < x[i + 1])) return false;
    }
    return true;
}

double min_gap(const Vector& x) {
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) g = std::min(g, x[i + 1] - x[i]);
    return g;
}

// --- drift -----------------------------------------------------------------

Vector drift_eval(const DriftSpec& spec, const Vector& x) {
    return std::visit(
        Overloaded{
            [&](const ZeroDrift&) -> Vector { return Vector::Zero(x.size()); },
            [&](const ConstantDrift& s) -> Vector { return s.c; },
            [&](const OrnsteinUhlenbeckDrift& s) -> Vector { return s.theta * (s.mu - x); },
            [&](const BoundedSmoothDrift& s) -> Vector {
                return s.beta * x.array().tanh().matrix();
            },
            [&](const CustomDrift& s) -> Vector { return s.eval(x); },
        },
        spec);
}

double drift_component(const DriftSpec& spec, int i, double x) {
    return std::visit(
        Overloaded{
            [&](const ZeroDrift&) { return 0.0; },
            [&](const ConstantDrift& s) { return s.c[i]; },
            [&](const OrnsteinUhlenbeckDrift& s) { return s.theta * (s.mu[i] - x); },
            [&](const BoundedSmoothDrift& s) { return s.beta * std::tanh(x); },
            [&](const CustomDrift&) -> double {
                throw UnsupportedStructure("custom drift is not coordinate-wise");
            },
        },
        spec);
}

double lipschitz_constant(const DriftSpec& spec) {
    return std::visit(Overloaded{
                          [](const ZeroDrift&) { return 0.0; },
                          [](const ConstantDrift&) { return 0.0; },
                          [](const OrnsteinUhlenbeckDrift& s) { return s.theta; },
                          [](const BoundedSmoothDrift& s) { return std::abs(s.beta); },
                          [](const CustomDrift& s) { return s.lipschitz; },
                      },
                      spec);
}

bool is_coordinatewise(const DriftSpec& spec) { return !std::holds_alternative<CustomDrift>(spec); }

void validate_drift(const DriftSpec& spec, int d) {
    std::visit(Overloaded{
                   [](const ZeroDrift&) {},
                   [&](const ConstantDrift& s) {
                       if (s.c.size() != d) throw ValidationError("expected length d", "drift.c");
                       if (!all_finite(s.c)) throw ValidationError("non-finite entry", "drift.c");
                       if (!non_decreasing(s.c))
                           throw ValidationError("must be non-decreasing", "drift.c");
                   },
                   [&](const OrnsteinUhlenbeckDrift& s) {
                       if (!(s.theta >= 0.0) || !std::isfinite(s.theta))
                           throw ValidationError("must be finite and >= 0", "drift.theta");
                       if (s.mu.size() != d) throw ValidationError("expected length d", "drift.mu");
                       if (!all_finite(s.mu)) throw ValidationError("non-finite entry", "drift.mu");
                       if (!non_decreasing(s.mu))
                           throw ValidationError("must be non-decreasing", "drift.mu");
                   },
                   [](const BoundedSmoothDrift& s) {
                       if (!std::isfinite(s.beta)) throw ValidationError("must be finite", "drift.beta");
                   },
                   [](const CustomDrift& s) {
                       if (!s.eval) throw ValidationError("missing evaluator", "drift");
                       if (!(s.lipschitz >= 0.0))
                           throw ValidationError("declared constant must be >= 0", "drift.lipschitz");
                   },
               },
               spec);
}

// --- diffusion -------------------------------------------------------------

Matrix diffusion_eval(const DiffusionSpec& spec, const Vector& x) {
    return std::visit(Overloaded{
                          [&](const ConstantMatrixDiffusion& s) -> Matrix { return s.sigma; },
                          [&](const DiagonalBoundedDiffusion& s) -> Matrix {
                              Vector diag = (s.s0 + s.s1 * x.array().tanh()).matrix();
                              return diag.asDiagonal();
                          },
                          [&](const CustomDiffusion& s) -> Matrix { return s.eval(x); },
                      },
                      spec);
}

double sigma_sup_sq(const DiffusionSpec& spec) {
    return std::visit(Overloaded{
                          [](const ConstantMatrixDiffusion& s) {
                              return s.sigma.rowwise().squaredNorm().maxCoeff();
                          },
                          [](const DiagonalBoundedDiffusion& s) { return (s.s0 + s.s1) * (s.s0 + s.s1); },
                          [](const CustomDiffusion& s) { return s.sup_row_sq; },
                      },
                      spec);
}

double lipschitz_constant(const DiffusionSpec& spec) {
    return std::visit(Overloaded{
                          [](const ConstantMatrixDiffusion&) { return 0.0; },
                          [](const DiagonalBoundedDiffusion& s) { return s.s1; },
                          [](const CustomDiffusion& s) { return s.lipschitz; },
                      },
                      spec);
}

void validate_diffusion(const DiffusionSpec& spec, int d) {
    std::visit(Overloaded{
                   [&](const ConstantMatrixDiffusion& s) {
                       if (s.sigma.rows() != d || s.sigma.cols() != d)
                           throw ValidationError("expected a d x d matrix", "diffusion.sigma");
                       if (!s.sigma.allFinite())
                           throw ValidationError("non-finite entry", "diffusion.sigma");
                   },
                   [](const DiagonalBoundedDiffusion& s) {
                       if (!(s.s0 > 0.0) || !std::isfinite(s.s0))
                           throw ValidationError("must be finite and > 0", "diffusion.s0");
                       if (!(s.s1 >= 0.0) || !std::isfinite(s.s1))
                           throw ValidationError("must be finite and >= 0", "diffusion.s1");
                   },
                   [](const CustomDiffusion& s) {
                       if (!s.eval) throw ValidationError("missing evaluator", "diffusion");
                   },
               },
               spec);
}

// --- particle system -------------------------------------------------------

ParticleSystem::ParticleSystem(Matrix gamma, DriftSpec drift, DiffusionSpec diffusion, Vector x0)
    : gamma_(std::move(gamma)),
      drift_(std::move(drift)),
      diffusion_(std::move(diffusion)),
      x0_(std::move(x0)) {
    const auto d = x0_.size();
    if (d < 2) throw ValidationError("need at least 2 particles", "d");
    if (gamma_.rows() != d || gamma_.cols() != d)
        throw ValidationError("expected a d x d matrix", "gamma");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (gamma_(i, i) != 0.0) throw ValidationError("diagonal must be zero", "gamma");
        for (Eigen::Index j = 0; j < d; ++j) {
            const double g = gamma_(i, j);
            if (!std::isfinite(g) || g < 0.0)
                throw ValidationError("entries must be finite and non-negative", "gamma");
            if (g != gamma_(j, i)) throw ValidationError("must be symmetric", "gamma");
        }
        if (i + 1 < d && !(gamma_(i, i + 1) > 0.0))
            throw ValidationError("first off-diagonal must be positive", "gamma");
    }
    if (!in_chamber(x0_)) throw ValidationError("must be strictly increasing", "x0");
    validate_drift(drift_, static_cast<int>(d));
    validate_diffusion(diffusion_, static_cast<int>(d));
}

Vector ParticleSystem::interaction(const Vector& x) const {
    const auto d = x.size();
    Vector f = Vector::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const double g = gamma_(i, j);
            if (g == 0.0) continue;
            const double t = g / (x[i] - x[j]);
            f[i] += t;
            f[j] -= t;
        }
    }
    return f;
}

Matrix uniform_gamma(int d, double g) {
    Matrix m = Matrix::Constant(d, d, g);
    m.diagonal().setZero();
    return m;
}

Matrix tridiagonal_gamma(int d, double g) {
    Matrix m = Matrix::Zero(d, d);
    for (int i = 0; i + 1 < d; ++i) m(i, i + 1) = m(i + 1, i) = g;
    return m;
}

Vector linspace(int d, double lo, double hi) {
    if (d < 2) throw ValidationError("need at least 2 points", "linspace");
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = lo + (hi - lo) * i / (d - 1);
    return v;
}

ParticleSystem dyson_system(int d, double g, Vector x0) {
    return ParticleSystem(uniform_gamma(d, g), ZeroDrift{}, ConstantMatrixDiffusion{Matrix::Identity(d, d)},
                          std::move(x0));
}

// --- conditions ------------------------------------------------------------

namespace {

/// Returns the common off-diagonal value, or NaN when entries differ.
double common_value(const Matrix& gamma, bool tridiagonal_only) {
    const auto d = gamma.rows();
    double value = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const bool on_band = (j == i + 1);
            if (tridiagonal_only && !on_band) {
                if (gamma(i, j) != 0.0) return std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            if (std::isnan(value)) {
                value = gamma(i, j);
            } else if (gamma(i, j) != value) {
                return std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    return value;
}

InequalityCheck make_check(std::string name, double lhs, std::string relation, double rhs) {
    bool holds = false;
    if (relation == ">=") holds = lhs >= rhs;
    else if (relation == "<=") holds = lhs <= rhs;
    return {std::move(name), lhs, std::move(relation), rhs, holds};
}

void require_coordinatewise(const ParticleSystem& system) {
    if (!is_coordinatewise(system.drift()))
        throw UnsupportedStructure("condition checks require a coordinate-wise drift family");
}

}  // namespace

ConditionReport check_full_interaction_condition(const ParticleSystem& system, double p) {
    if (!(p >= 1.0)) throw ValidationError("must be >= 1", "p");
    require_coordinatewise(system);
    const double g = common_value(system.gamma(), false);
    if (std::isnan(g)) throw UnsupportedStructure("condition is only stated for uniform gamma");

    const int d = system.dim();
    const double s2 = sigma_sup_sq(system.diffusion());
    const double ratio = 3.0 * g / (d * s2);

    ConditionReport report;
    report.checks.push_back(make_check("3*gamma/(d*sigma_d^2) >= 2", ratio, ">=", 2.0));
    report.checks.push_back(make_check("p <= 3*gamma/(d*sigma_d^2) - 1", p, "<=", ratio - 1.0));
    report.satisfied = report.checks[0].holds && report.checks[1].holds;
    return report;
}

ConditionReport check_nn_condition(const ParticleSystem& system, double p, double chi) {
    if (!(p >= 1.0)) throw ValidationError("must be >= 1", "p");
    if (!(chi < 2.0)) throw ValidationError("must be < 2", "chi");
    require_coordinatewise(system);
    const double g = common_value(system.gamma(), true);
    if (std::isnan(g))
        throw UnsupportedStructure("condition is only stated for a single nearest-neighbour gamma");

    const double s2 = sigma_sup_sq(system.diffusion());
    ConditionReport report;
    report.checks.push_back(
        make_check("gamma/(2*sigma_d^2) >= (p+1)/(2-chi)", g / (2.0 * s2), ">=", (p + 1.0) / (2.0 - chi)));
    report.satisfied = report.checks[0].holds;
    return report;
}

}  // namespace ncps
