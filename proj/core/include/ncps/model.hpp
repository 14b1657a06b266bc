#pragma once

#include "ncps/types.hpp"

#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace ncps {

// ---------------------------------------------------------------------------
// Drift families b(x)
// ---------------------------------------------------------------------------

struct ZeroDrift {};

/// b_i(x) = c_i with c_1 <= ... <= c_d.
struct ConstantDrift {
    Vector c;
};

/// b_i(x) = theta * (mu_i - x_i), theta >= 0, mu non-decreasing.
struct OrnsteinUhlenbeckDrift {
    double theta = 0.0;
    Vector mu;
};

/// b_i(x) = beta * tanh(x_i).
struct BoundedSmoothDrift {
    double beta = 0.0;
};

/// User-supplied drift. The Lipschitz constant is taken on trust. Custom
/// drifts are full-vector maps and are never used by the condition checkers.
struct CustomDrift {
    std::function<Vector(const Vector&)> eval;
    double lipschitz = 0.0;
};

using DriftSpec =
    std::variant<ZeroDrift, ConstantDrift, OrnsteinUhlenbeckDrift, BoundedSmoothDrift, CustomDrift>;

// ---------------------------------------------------------------------------
// Diffusion families sigma(x)
// ---------------------------------------------------------------------------

/// sigma(x) = S for a fixed d x d matrix. A zero matrix is permitted and gives
/// a deterministic system.
struct ConstantMatrixDiffusion {
    Matrix sigma;
};

/// sigma_ii(x) = s0 + s1 * tanh(x_i), off-diagonal zero. s0 > 0, s1 >= 0.
struct DiagonalBoundedDiffusion {
    double s0 = 1.0;
    double s1 = 0.0;
};

/// User-supplied diffusion with declared constants (trusted).
struct CustomDiffusion {
    std::function<Matrix(const Vector&)> eval;
    double lipschitz = 0.0;
    double sup_row_sq = 0.0;
};

using DiffusionSpec = std::variant<ConstantMatrixDiffusion, DiagonalBoundedDiffusion, CustomDiffusion>;

Vector drift_eval(const DriftSpec& spec, const Vector& x);

/// b_i evaluated at a scalar argument, for the coordinate-wise families.
/// Throws UnsupportedStructure for CustomDrift.
double drift_component(const DriftSpec& spec, int i, double x);

/// Exact ||b||_Lip of the family (declared value for CustomDrift).
double lipschitz_constant(const DriftSpec& spec);

bool is_coordinatewise(const DriftSpec& spec);

/// Validates family parameters against dimension d, including the ordering
/// constraint b_i <= b_{i+1}. Throws ValidationError naming the field.
void validate_drift(const DriftSpec& spec, int d);

Matrix diffusion_eval(const DiffusionSpec& spec, const Vector& x);

/// sigma_d^2 = sup_i sup_x sum_k sigma_ik(x)^2.
double sigma_sup_sq(const DiffusionSpec& spec);

/// Exact ||sigma||_Lip of the family.
double lipschitz_constant(const DiffusionSpec& spec);

void validate_diffusion(const DiffusionSpec& spec, int d);

// ---------------------------------------------------------------------------
// Particle systems
// ---------------------------------------------------------------------------

/// dX_i = { sum_{j != i} gamma_ij / (X_i - X_j) + b_i(X) } dt + sum_j sigma_ij(X) dW_j,
/// started from x0 in the Weyl chamber. Immutable after construction.
class ParticleSystem {
public:
    /// Throws ValidationError if gamma is not symmetric non-negative with zero
    /// diagonal and positive first off-diagonal, or x0 is not strictly increasing.
    ParticleSystem(Matrix gamma, DriftSpec drift, DiffusionSpec diffusion, Vector x0);

    int dim() const noexcept { return static_cast<int>(x0_.size()); }
    const Matrix& gamma() const noexcept { return gamma_; }
    const DriftSpec& drift() const noexcept { return drift_; }
    const DiffusionSpec& diffusion() const noexcept { return diffusion_; }
    const Vector& x0() const noexcept { return x0_; }

    /// Interaction term f_i(x) = sum_{j != i} gamma_ij / (x_i - x_j).
    Vector interaction(const Vector& x) const;

private:
    Matrix gamma_;
    DriftSpec drift_;
    DiffusionSpec diffusion_;
    Vector x0_;
};

Matrix uniform_gamma(int d, double g);
Matrix tridiagonal_gamma(int d, double g);
Vector linspace(int d, double lo, double hi);

/// Dyson Brownian motion: uniform gamma, zero drift, identity diffusion.
ParticleSystem dyson_system(int d, double g, Vector x0);

// ---------------------------------------------------------------------------
// Parameter conditions
// ---------------------------------------------------------------------------

/// One inequality `lhs <relation> rhs` and whether it holds.
struct InequalityCheck {
    std::string name;
    double lhs = 0.0;
    std::string relation;
    double rhs = 0.0;
    bool holds = false;
};

struct ConditionReport {
    bool satisfied = false;
    std::vector<InequalityCheck> checks;
};

/// Non-collision / moment condition for uniform full interaction:
/// 3*gamma/(d*sigma_d^2) >= 2 and 1 <= p <= 3*gamma/(d*sigma_d^2) - 1.
/// Throws UnsupportedStructure for non-uniform gamma or a custom drift,
/// ValidationError for p < 1.
ConditionReport check_full_interaction_condition(const ParticleSystem& system, double p);

/// Nearest-neighbour condition gamma/(2*sigma_d^2) >= (p+1)/(2-chi) with
/// chi = chi_bar(d, p). Throws UnsupportedStructure unless gamma is
/// tridiagonal with a single value, ValidationError for chi >= 2 or p < 1.
ConditionReport check_nn_condition(const ParticleSystem& system, double p, double chi);

}  // namespace ncps
