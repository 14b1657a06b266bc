#pragma once

#include "ncps/analysis.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ncps::cli {

using Rows = std::vector<std::vector<double>>;

struct GammaConfig {
    std::string type = "uniform";  // uniform | tridiagonal | matrix
    double value = 1.0;
    Rows matrix;

    bool operator==(const GammaConfig&) const = default;
};

struct DriftConfig {
    std::string type = "zero";  // zero | constant | ou | bounded_smooth
    std::vector<double> c;
    double theta = 0.0;
    std::vector<double> mu;
    double beta = 0.0;

    bool operator==(const DriftConfig&) const = default;
};

struct DiffusionConfig {
    std::string type = "identity";  // identity | zero | constant | diagonal_bounded
    double scale = 1.0;             // identity only
    Rows sigma;
    double s0 = 1.0;
    double s1 = 0.0;

    bool operator==(const DiffusionConfig&) const = default;
};

struct SystemConfig {
    int d = 3;
    GammaConfig gamma;
    DriftConfig drift;
    DiffusionConfig diffusion;
    std::vector<double> x0;  // empty: unit gaps centred at 0

    bool operator==(const SystemConfig&) const = default;
};

struct RunConfig {
    std::uint64_t seed = 0;
    double T = 1.0;
    int n = 64;
    int paths = 1;
    std::string scheme = "semi_implicit";
    std::vector<int> levels{16, 32, 64, 128};
    int ref_level = 1024;
    int replications = 100;
    std::string error_mode = "grid_sup_Lp";
    double error_p = 1.0;
    double p = 2.0;                // moments, check, inequalities
    std::optional<double> t;       // moments: single time instead of the full trace
    std::optional<double> chi;     // check on nearest-neighbour systems

    bool operator==(const RunConfig&) const = default;
};

struct SolveConfig {
    std::vector<double> a;
    double c = 1.0;  // uniform coefficient
    Rows c_matrix;   // overrides c when given

    bool operator==(const SolveConfig&) const = default;
};

struct SweepConfig {
    std::vector<int> d{3, 4, 5, 6};
    std::vector<double> p{0.0, 1.0, 2.0};
    long long count = 100000;
    int resolution = 16;

    bool operator==(const SweepConfig&) const = default;
};

struct SolverConfig {
    std::string method = "auto";  // auto | newton | homotopy | fixed_point_nn | alternating_d3
    double tol = 1e-12;
    int max_iter = 1000;
    int homotopy_steps = 64;

    bool operator==(const SolverConfig&) const = default;
};

struct OutputConfig {
    std::string path;  // empty: stdout
    std::string format = "csv";
    int precision = 17;

    bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
    SystemConfig system;
    RunConfig run;
    SolverConfig solver;
    SolveConfig solve;
    SweepConfig sweep;
    OutputConfig output;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates a YAML document. Syntax and type errors report the
/// line; semantic errors name the key path (e.g. "run.levels"). A seed
/// override satisfies the mandatory run.seed.
ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = {});

std::string serialize_config(const ExperimentConfig& config);

/// Semantic checks shared by the parser and programmatic callers.
void validate_config(const ExperimentConfig& config);

ParticleSystem build_system(const SystemConfig& config);
SolverOptions build_solver(const SolverConfig& config);

}  // namespace ncps::cli
