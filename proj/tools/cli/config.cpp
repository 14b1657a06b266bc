#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace ncps::cli {

namespace {

std::string at_line(const YAML::Mark& mark) {
    return mark.is_null() ? std::string() : "line " + std::to_string(mark.line + 1) + ": ";
}

void reject_unknown(const YAML::Node& node, const std::string& path, std::set<std::string> allowed) {
    if (!node) return;
    if (!node.IsMap()) throw ValidationError(at_line(node.Mark()) + "expected a mapping", path);
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            throw ValidationError(at_line(kv.first.Mark()) + "unknown key", path.empty() ? key : path + "." + key);
    }
}

template <class T>
void read(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
    if (!parent) return;
    const YAML::Node node = parent[key];
    if (!node) return;
    try {
        out = node.as<T>();
    } catch (const YAML::Exception&) {
        throw ValidationError(at_line(node.Mark()) + "wrong type", path + "." + key);
    }
}

template <class T>
void read_optional(const YAML::Node& parent, const std::string& path, const char* key, std::optional<T>& out) {
    if (!parent || !parent[key]) return;
    T value{};
    read(parent, path, key, value);
    out = value;
}

bool is_square(const Rows& m, int d) {
    if (static_cast<int>(m.size()) != d) return false;
    return std::all_of(m.begin(), m.end(), [d](const auto& r) { return static_cast<int>(r.size()) == d; });
}

Matrix to_matrix(const Rows& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ValidationError(at_line(e.mark) + e.msg, "config");
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    reject_unknown(root, "", {"system", "run", "solver", "solve", "sweep", "output"});

    ExperimentConfig c;

    const YAML::Node sys = root["system"];
    reject_unknown(sys, "system", {"d", "gamma", "drift", "diffusion", "x0"});
    read(sys, "system", "d", c.system.d);
    read(sys, "system", "x0", c.system.x0);
    if (sys) {
        const YAML::Node g = sys["gamma"];
        reject_unknown(g, "system.gamma", {"type", "value", "matrix"});
        read(g, "system.gamma", "type", c.system.gamma.type);
        read(g, "system.gamma", "value", c.system.gamma.value);
        read(g, "system.gamma", "matrix", c.system.gamma.matrix);

        const YAML::Node b = sys["drift"];
        reject_unknown(b, "system.drift", {"type", "c", "theta", "mu", "beta"});
        read(b, "system.drift", "type", c.system.drift.type);
        read(b, "system.drift", "c", c.system.drift.c);
        read(b, "system.drift", "theta", c.system.drift.theta);
        read(b, "system.drift", "mu", c.system.drift.mu);
        read(b, "system.drift", "beta", c.system.drift.beta);

        const YAML::Node s = sys["diffusion"];
        reject_unknown(s, "system.diffusion", {"type", "scale", "sigma", "s0", "s1"});
        read(s, "system.diffusion", "type", c.system.diffusion.type);
        read(s, "system.diffusion", "scale", c.system.diffusion.scale);
        read(s, "system.diffusion", "sigma", c.system.diffusion.sigma);
        read(s, "system.diffusion", "s0", c.system.diffusion.s0);
        read(s, "system.diffusion", "s1", c.system.diffusion.s1);
    }

    const YAML::Node run = root["run"];
    reject_unknown(run, "run", {"seed", "T", "n", "paths", "scheme", "levels", "ref_level", "replications",
                                "error_mode", "error_p", "p", "t", "chi"});
    const bool has_seed = run && run["seed"];
    read(run, "run", "seed", c.run.seed);
    read(run, "run", "T", c.run.T);
    read(run, "run", "n", c.run.n);
    read(run, "run", "paths", c.run.paths);
    read(run, "run", "scheme", c.run.scheme);
    read(run, "run", "levels", c.run.levels);
    read(run, "run", "ref_level", c.run.ref_level);
    read(run, "run", "replications", c.run.replications);
    read(run, "run", "error_mode", c.run.error_mode);
    read(run, "run", "error_p", c.run.error_p);
    read(run, "run", "p", c.run.p);
    read_optional(run, "run", "t", c.run.t);
    read_optional(run, "run", "chi", c.run.chi);
    if (seed_override) {
        c.run.seed = *seed_override;
    } else if (!has_seed) {
        throw ValidationError("missing; every experiment needs an explicit seed", "run.seed");
    }

    const YAML::Node solver = root["solver"];
    reject_unknown(solver, "solver", {"method", "tol", "max_iter", "homotopy_steps"});
    read(solver, "solver", "method", c.solver.method);
    read(solver, "solver", "tol", c.solver.tol);
    read(solver, "solver", "max_iter", c.solver.max_iter);
    read(solver, "solver", "homotopy_steps", c.solver.homotopy_steps);

    const YAML::Node solve = root["solve"];
    reject_unknown(solve, "solve", {"a", "c", "c_matrix"});
    read(solve, "solve", "a", c.solve.a);
    read(solve, "solve", "c", c.solve.c);
    read(solve, "solve", "c_matrix", c.solve.c_matrix);

    const YAML::Node sweep = root["sweep"];
    reject_unknown(sweep, "sweep", {"d", "p", "count", "resolution"});
    read(sweep, "sweep", "d", c.sweep.d);
    read(sweep, "sweep", "p", c.sweep.p);
    read(sweep, "sweep", "count", c.sweep.count);
    read(sweep, "sweep", "resolution", c.sweep.resolution);

    const YAML::Node output = root["output"];
    reject_unknown(output, "output", {"path", "format", "precision"});
    read(output, "output", "path", c.output.path);
    read(output, "output", "format", c.output.format);
    read(output, "output", "precision", c.output.precision);

    validate_config(c);
    return c;
}

void validate_config(const ExperimentConfig& c) {
    const auto& s = c.system;
    if (s.d < 2) throw ValidationError("must be >= 2", "system.d");
    if (!s.x0.empty() && static_cast<int>(s.x0.size()) != s.d) throw ValidationError("must have d entries", "system.x0");

    if (s.gamma.type == "matrix") {
        if (!is_square(s.gamma.matrix, s.d)) throw ValidationError("must be a d x d matrix", "system.gamma.matrix");
    } else if (s.gamma.type == "uniform" || s.gamma.type == "tridiagonal") {
        if (!(s.gamma.value > 0.0) || !std::isfinite(s.gamma.value))
            throw ValidationError("must be finite and > 0", "system.gamma.value");
    } else {
        throw ValidationError("must be uniform, tridiagonal or matrix", "system.gamma.type");
    }

    static const std::set<std::string> drifts{"zero", "constant", "ou", "bounded_smooth"};
    if (!drifts.count(s.drift.type)) throw ValidationError("must be zero, constant, ou or bounded_smooth", "system.drift.type");
    static const std::set<std::string> diffusions{"identity", "zero", "constant", "diagonal_bounded"};
    if (!diffusions.count(s.diffusion.type))
        throw ValidationError("must be identity, zero, constant or diagonal_bounded", "system.diffusion.type");
    if (s.diffusion.type == "constant" && !is_square(s.diffusion.sigma, s.d))
        throw ValidationError("must be a d x d matrix", "system.diffusion.sigma");

    const auto& r = c.run;
    if (!(r.T > 0.0) || !std::isfinite(r.T)) throw ValidationError("must be finite and > 0", "run.T");
    if (r.n < 1) throw ValidationError("must be >= 1", "run.n");
    if (r.paths < 1) throw ValidationError("must be >= 1", "run.paths");
    if (r.replications < 1) throw ValidationError("must be >= 1", "run.replications");
    if (r.scheme != "semi_implicit" && r.scheme != "explicit")
        throw ValidationError("must be semi_implicit or explicit", "run.scheme");
    if (r.levels.empty()) throw ValidationError("must not be empty", "run.levels");
    for (int n : r.levels)
        if (!is_power_of_two(n)) throw ValidationError("levels must be powers of 2", "run.levels");
    if (!is_power_of_two(r.ref_level)) throw ValidationError("ref_level must be a power of 2", "run.ref_level");
    if (static_cast<long long>(r.ref_level) < 4LL * *std::max_element(r.levels.begin(), r.levels.end()))
        throw ValidationError("must be >= 4 * max(levels)", "run.ref_level");
    try {
        parse_error_kind(r.error_mode);
    } catch (const ValidationError& e) {
        throw ValidationError(e.message(), "run.error_mode");
    }
    if (!(r.error_p >= 1.0)) throw ValidationError("must be >= 1", "run.error_p");
    if (!(r.p >= 0.0) || !std::isfinite(r.p)) throw ValidationError("must be >= 0", "run.p");
    if (r.t && !(*r.t >= 0.0 && *r.t <= r.T)) throw ValidationError("must lie in [0, T]", "run.t");
    if (r.chi && !(*r.chi > 0.0 && *r.chi < 2.0)) throw ValidationError("must lie in (0, 2)", "run.chi");

    try {
        build_solver(c.solver);
    } catch (const ValidationError& e) {
        throw ValidationError(e.message(), "solver." + e.key());
    }

    if (!c.solve.c_matrix.empty() && !is_square(c.solve.c_matrix, static_cast<int>(c.solve.a.size())))
        throw ValidationError("must be a square matrix matching solve.a", "solve.c_matrix");

    for (int d : c.sweep.d)
        if (d < 2) throw ValidationError("must be >= 2", "sweep.d");
    for (double p : c.sweep.p)
        if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("must be >= 0", "sweep.p");
    if (c.sweep.count < 0) throw ValidationError("must be >= 0", "sweep.count");
    if (c.sweep.resolution < 1) throw ValidationError("must be >= 1", "sweep.resolution");

    if (c.output.format != "csv") throw ValidationError("only csv is supported", "output.format");
    if (c.output.precision < 1 || c.output.precision > 17) throw ValidationError("must lie in [1, 17]", "output.precision");

    build_system(c.system);
}

namespace {

void emit_rows(YAML::Emitter& out, const Rows& rows) {
    out << YAML::BeginSeq;
    for (const auto& r : rows) out << YAML::Flow << r;
    out << YAML::EndSeq;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;

    out << YAML::Key << "system" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "d" << YAML::Value << c.system.d;
    out << YAML::Key << "gamma" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << c.system.gamma.type;
    out << YAML::Key << "value" << YAML::Value << c.system.gamma.value;
    if (!c.system.gamma.matrix.empty()) {
        out << YAML::Key << "matrix" << YAML::Value;
        emit_rows(out, c.system.gamma.matrix);
    }
    out << YAML::EndMap;
    out << YAML::Key << "drift" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << c.system.drift.type;
    if (!c.system.drift.c.empty()) out << YAML::Key << "c" << YAML::Value << YAML::Flow << c.system.drift.c;
    out << YAML::Key << "theta" << YAML::Value << c.system.drift.theta;
    if (!c.system.drift.mu.empty()) out << YAML::Key << "mu" << YAML::Value << YAML::Flow << c.system.drift.mu;
    out << YAML::Key << "beta" << YAML::Value << c.system.drift.beta;
    out << YAML::EndMap;
    out << YAML::Key << "diffusion" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "type" << YAML::Value << c.system.diffusion.type;
    out << YAML::Key << "scale" << YAML::Value << c.system.diffusion.scale;
    if (!c.system.diffusion.sigma.empty()) {
        out << YAML::Key << "sigma" << YAML::Value;
        emit_rows(out, c.system.diffusion.sigma);
    }
    out << YAML::Key << "s0" << YAML::Value << c.system.diffusion.s0;
    out << YAML::Key << "s1" << YAML::Value << c.system.diffusion.s1;
    out << YAML::EndMap;
    if (!c.system.x0.empty()) out << YAML::Key << "x0" << YAML::Value << YAML::Flow << c.system.x0;
    out << YAML::EndMap;

    out << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << c.run.seed;
    out << YAML::Key << "T" << YAML::Value << c.run.T;
    out << YAML::Key << "n" << YAML::Value << c.run.n;
    out << YAML::Key << "paths" << YAML::Value << c.run.paths;
    out << YAML::Key << "scheme" << YAML::Value << c.run.scheme;
    out << YAML::Key << "levels" << YAML::Value << YAML::Flow << c.run.levels;
    out << YAML::Key << "ref_level" << YAML::Value << c.run.ref_level;
    out << YAML::Key << "replications" << YAML::Value << c.run.replications;
    out << YAML::Key << "error_mode" << YAML::Value << c.run.error_mode;
    out << YAML::Key << "error_p" << YAML::Value << c.run.error_p;
    out << YAML::Key << "p" << YAML::Value << c.run.p;
    if (c.run.t) out << YAML::Key << "t" << YAML::Value << *c.run.t;
    if (c.run.chi) out << YAML::Key << "chi" << YAML::Value << *c.run.chi;
    out << YAML::EndMap;

    out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "method" << YAML::Value << c.solver.method;
    out << YAML::Key << "tol" << YAML::Value << c.solver.tol;
    out << YAML::Key << "max_iter" << YAML::Value << c.solver.max_iter;
    out << YAML::Key << "homotopy_steps" << YAML::Value << c.solver.homotopy_steps;
    out << YAML::EndMap;

    out << YAML::Key << "solve" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "a" << YAML::Value << YAML::Flow << c.solve.a;
    out << YAML::Key << "c" << YAML::Value << c.solve.c;
    if (!c.solve.c_matrix.empty()) {
        out << YAML::Key << "c_matrix" << YAML::Value;
        emit_rows(out, c.solve.c_matrix);
    }
    out << YAML::EndMap;

    out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "d" << YAML::Value << YAML::Flow << c.sweep.d;
    out << YAML::Key << "p" << YAML::Value << YAML::Flow << c.sweep.p;
    out << YAML::Key << "count" << YAML::Value << c.sweep.count;
    out << YAML::Key << "resolution" << YAML::Value << c.sweep.resolution;
    out << YAML::EndMap;

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "path" << YAML::Value << c.output.path;
    out << YAML::Key << "format" << YAML::Value << c.output.format;
    out << YAML::Key << "precision" << YAML::Value << c.output.precision;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

ParticleSystem build_system(const SystemConfig& s) {
    const int d = s.d;
    Matrix gamma;
    if (s.gamma.type == "uniform") gamma = uniform_gamma(d, s.gamma.value);
    else if (s.gamma.type == "tridiagonal") gamma = tridiagonal_gamma(d, s.gamma.value);
    else gamma = to_matrix(s.gamma.matrix);

    DriftSpec drift = ZeroDrift{};
    if (s.drift.type == "constant") drift = ConstantDrift{to_vector(s.drift.c)};
    else if (s.drift.type == "ou") drift = OrnsteinUhlenbeckDrift{s.drift.theta, to_vector(s.drift.mu)};
    else if (s.drift.type == "bounded_smooth") drift = BoundedSmoothDrift{s.drift.beta};

    DiffusionSpec diffusion = ConstantMatrixDiffusion{s.diffusion.scale * Matrix::Identity(d, d)};
    if (s.diffusion.type == "zero") diffusion = ConstantMatrixDiffusion{Matrix::Zero(d, d)};
    else if (s.diffusion.type == "constant") diffusion = ConstantMatrixDiffusion{to_matrix(s.diffusion.sigma)};
    else if (s.diffusion.type == "diagonal_bounded") diffusion = DiagonalBoundedDiffusion{s.diffusion.s0, s.diffusion.s1};

    Vector x0(d);
    if (s.x0.empty()) {
        for (int i = 0; i < d; ++i) x0(i) = i - 0.5 * (d - 1);
    } else {
        x0 = to_vector(s.x0);
    }

    try {
        return ParticleSystem(std::move(gamma), std::move(drift), std::move(diffusion), std::move(x0));
    } catch (const ValidationError& e) {
        throw ValidationError(e.message(), e.key().empty() ? "system" : "system." + e.key());
    }
}

SolverOptions build_solver(const SolverConfig& config) {
    SolverOptions o;
    o.method = parse_solver_method(config.method);
    o.tol = config.tol;
    o.max_iter = config.max_iter;
    o.homotopy_steps = config.homotopy_steps;
    o.validate();
    return o;
}

}  // namespace ncps::cli
