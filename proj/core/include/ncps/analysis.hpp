#pragma once

#include "ncps/scheme.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace ncps {

// ---------------------------------------------------------------------------
// Strong convergence
// ---------------------------------------------------------------------------

enum class ErrorKind {
    grid_sup_lp,  // E[ sup_k |e(t_k)|^p ]^{1/p}
    terminal_l2,  // sup_k E[ |e(t_k)|^2 ]^{1/2}
    grid_sup_l2,  // E[ sup_k |e(t_k)|^2 ]^{1/2}
};

std::string_view to_string(ErrorKind k);
ErrorKind parse_error_kind(std::string_view name);

struct ErrorMode {
    ErrorKind kind = ErrorKind::grid_sup_lp;
    double p = 1.0;  // used by grid_sup_lp only

    double exponent() const noexcept { return kind == ErrorKind::grid_sup_lp ? p : 2.0; }
};

/// Strong-error experiment on common Brownian paths. The reference solution is
/// the semi-implicit scheme at `ref_level` driven by the finest path; coarser
/// levels use block sums of the same increments.
struct ConvergenceStudy {
    ParticleSystem system;
    double T = 1.0;
    std::vector<int> levels;
    int ref_level = 0;
    int replications = 0;
    ErrorMode mode;
    std::uint64_t base_seed = 0;
    SolverOptions solver;
    int threads = 0;  // 0: all hardware threads

    /// Levels and ref_level powers of two, ref_level >= 4 * max(levels).
    void validate() const;
};

struct ErrorEstimate {
    double error = 0.0;
    double std_err = 0.0;
};

struct LevelEstimate {
    int n = 0;
    double error = 0.0;
    double std_err = 0.0;
    /// Mean over paths of sup_k |e(t_k)| * sqrt(n / log n); reported only.
    double pathwise_stat = 0.0;
};

struct RateEstimate {
    std::vector<LevelEstimate> levels;
    double slope = 0.0;  // alpha in error ~ C n^{-alpha}
    double intercept = 0.0;  // log2 C
    double r_squared = 0.0;
};

/// Error at a single level n (a power of two dividing ref_level; n ==
/// ref_level gives exactly 0). NonConvergence messages name the replication.
ErrorEstimate strong_error(const ConvergenceStudy& study, int n);

/// All levels of the study from one set of reference simulations.
std::vector<LevelEstimate> strong_errors(const ConvergenceStudy& study);

/// Least-squares fit of log2(error) against log2(n). Needs >= 3 points with
/// positive errors.
RateEstimate fit_rate(const std::vector<LevelEstimate>& estimates);
RateEstimate fit_rate(const std::vector<int>& n, const std::vector<double>& errors);

RateEstimate run_convergence(const ConvergenceStudy& study);

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

struct Estimate {
    double value = 0.0;
    double std_err = 0.0;
};

struct MomentReport {
    double t = 0.0;
    double p = 0.0;
    Estimate abs_moment;                   // E|X(t)|^p
    std::vector<Estimate> inv_gap_moments; // E[(X_{i+1} - X_i)^{-p}]
    Estimate inv_gap_sum;                  // E[sum_i (X_{i+1} - X_i)^{-p}]
    double bound = 0.0;                    // sum_i gap_i(0)^{-p} * exp(p T ||b||_Lip)
};

struct MomentStudy {
    double T = 1.0;
    int n = 1;  // power of two
    double p = 0.0;
    int replications = 1;
    std::uint64_t seed = 0;
    SolverOptions solver;
    int threads = 0;
};

/// Reports at every grid time t_0, ..., t_n from one set of simulated paths.
std::vector<MomentReport> moment_trace(const ParticleSystem& system, const MomentStudy& study);

/// Report at the grid time nearest t.
MomentReport estimate_moments(const ParticleSystem& system, const MomentStudy& study, double t);

// ---------------------------------------------------------------------------
// Chamber exits
// ---------------------------------------------------------------------------

/// Fraction of M paths (seeded per replication from `seed`) on which the
/// chosen scheme leaves the chamber. The semi-implicit scheme never does.
double exit_fraction(const ParticleSystem& system, double T, int n, int replications, std::uint64_t seed,
                     Scheme scheme, const SolverOptions& solver = {}, int threads = 0);

double collision_rate_explicit(const ParticleSystem& system, double T, int n, int replications,
                               std::uint64_t seed, int threads = 0);

// ---------------------------------------------------------------------------
// Gap inequalities
// ---------------------------------------------------------------------------

struct InequalitySides {
    double lhs = 0.0;
    double rhs = 0.0;
};

/// lhs = sum_{i<d} sum_{k != i,i+1} 1 / ((x_{i+1}-x_i)^p (x_{i+1}-x_k)(x_i-x_k)),
/// rhs = (2 - 3/d) sum_i (x_{i+1}-x_i)^{-(p+2)}. Holds strictly.
InequalitySides verify_gap_inequality_full(const Vector& x, double p);

/// lhs = sum_{i<=d-2} [ g_{i+1}^{-1} g_i^{-(p+1)} + g_{i+1}^{-(p+1)} g_i^{-1} ] with g_i the gaps,
/// rhs = chi * sum_i g_i^{-(p+2)}.
InequalitySides verify_gap_inequality_nn(const Vector& x, double p, double chi);

/// Objective maximised over the positive (p+2)-sphere.
///   homogeneous: sum_i (xi_{i+1} xi_i^{p+1} + xi_{i+1}^{p+1} xi_i), degree p+2,
///                the normalised cross terms of the nearest-neighbour inequality.
///   literal:     sum_i (xi_{i+1} xi_i^p + xi_{i+1}^p xi_i), degree p+1. Kept
///                for comparison only; it is not bounded by 2 for d >= 4.
enum class ChiForm { homogeneous, literal };

double chi_functional(const Vector& xi, double p, ChiForm form = ChiForm::homogeneous);

/// Best value on a grid of the positive (p+2)-sphere in dimension d-1 with
/// `resolution` subdivisions per simplex edge.
double chi_bar_grid(int d, double p, int resolution, ChiForm form = ChiForm::homogeneous);

/// Maximum of chi_functional over the positive (p+2)-sphere in dimension d-1:
/// grid pre-scan, then projected ascent from the best grid point, the
/// symmetric point and 16 random starts. For the homogeneous form this is the
/// sharp nearest-neighbour constant and the result is checked to be below 2.
double chi_bar(int d, double p, int resolution = 16, ChiForm form = ChiForm::homogeneous);

/// Chamber point with gaps log-uniform on [1e-3, 1e3], keyed by (seed, index).
Vector sample_chamber_point(std::uint64_t seed, std::uint64_t index, int d);

struct SweepResult {
    long long points = 0;
    long long violations = 0;
    double max_ratio = 0.0;  // max lhs/rhs
};

SweepResult sweep_gap_inequality_full(int d, double p, long long count, std::uint64_t seed);
SweepResult sweep_gap_inequality_nn(int d, double p, double chi, long long count, std::uint64_t seed);

}  // namespace ncps
