#include "app.hpp"

#include "config.hpp"

#include "ncps/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace ncps::cli {

namespace {

struct IoError : Error {
    using Error::Error;
};

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string out_path;
};

class Csv {
public:
    Csv(std::ostream& os, int precision) : os_(os) { os_ << std::setprecision(precision); }

    template <class... Ts>
    void row(const Ts&... fields) {
        bool first = true;
        ((os_ << (first ? "" : ",") << fields, first = false), ...);
        os_ << '\n';
    }

    std::ostream& stream() { return os_; }

private:
    std::ostream& os_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config '" + path + "'");
    return ss.str();
}

std::string numbered(const std::string& prefix, int count, const std::string& suffix = "") {
    std::string s;
    for (int i = 1; i <= count; ++i) s += (i > 1 ? "," : "") + prefix + std::to_string(i) + suffix;
    return s;
}

// ---------------------------------------------------------------------------

int cmd_solve(const ExperimentConfig& c, Csv& csv) {
    if (c.solve.a.size() < 2) throw ValidationError("needs at least 2 entries", "solve.a");
    const Vector a = Eigen::Map<const Vector>(c.solve.a.data(), static_cast<Eigen::Index>(c.solve.a.size()));
    ImplicitProblem problem = ImplicitProblem::uniform(a, c.solve.c);
    if (!c.solve.c_matrix.empty()) {
        Matrix m(a.size(), a.size());
        for (Eigen::Index i = 0; i < a.size(); ++i)
            for (Eigen::Index j = 0; j < a.size(); ++j)
                m(i, j) = c.solve.c_matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        problem = ImplicitProblem{a, m};
    }
    const SolveResult r = solve(problem, build_solver(c.solver));
    const int d = static_cast<int>(a.size());
    csv.stream() << "method,iterations,residual," << numbered("xi_", d) << '\n';
    csv.stream() << to_string(r.diagnostics.method_used) << ',' << r.diagnostics.iterations << ','
                 << r.diagnostics.residual;
    for (int i = 0; i < d; ++i) csv.stream() << ',' << r.xi(i);
    csv.stream() << '\n';
    return exit_ok;
}

int cmd_simulate(const ExperimentConfig& c, const Flags& f, Csv& csv) {
    const ParticleSystem system = build_system(c.system);
    const SolverOptions solver = build_solver(c.solver);
    const Scheme scheme = parse_scheme(c.run.scheme);
    const TimeGrid grid(c.run.T, c.run.n);
    const int d = system.dim();

    std::vector<PathResult> paths(static_cast<std::size_t>(c.run.paths));
    parallel_for(paths.size(), f.threads, [&](std::size_t m) {
        try {
            const BrownianPath w = sample_brownian(derive_seed(c.run.seed, m), d, c.run.T, c.run.n);
            paths[m] = simulate(system, grid, w, scheme, solver);
        } catch (const NonConvergence& e) {
            throw NonConvergence("path " + std::to_string(m) + ": " + e.what());
        }
    });

    csv.stream() << "path_id,k,t," << numbered("x_", d) << ",min_gap\n";
    for (std::size_t m = 0; m < paths.size(); ++m) {
        const auto& states = paths[m].states;
        for (Eigen::Index k = 0; k < states.rows(); ++k) {
            csv.stream() << m << ',' << k << ',' << grid.t(static_cast<int>(k));
            for (int i = 0; i < d; ++i) csv.stream() << ',' << states(k, i);
            csv.stream() << ',' << min_gap(states.row(k).transpose()) << '\n';
        }
    }
    return exit_ok;
}

int cmd_converge(const ExperimentConfig& c, const Flags& f, Csv& csv) {
    ConvergenceStudy study{build_system(c.system), c.run.T, c.run.levels, c.run.ref_level, c.run.replications,
                           ErrorMode{parse_error_kind(c.run.error_mode), c.run.error_p}, c.run.seed,
                           build_solver(c.solver), f.threads};
    const auto levels = strong_errors(study);
    csv.row("n", "error", "std_err", "pathwise_stat");
    for (const auto& l : levels) csv.row(l.n, l.error, l.std_err, l.pathwise_stat);

    bool fit_ok = levels.size() >= 3;
    for (const auto& l : levels) fit_ok = fit_ok && l.error > 0.0;
    if (fit_ok) {
        const RateEstimate r = fit_rate(levels);
        csv.stream() << "# slope=" << r.slope << ",intercept=" << r.intercept << ",r_squared=" << r.r_squared << '\n';
    } else {
        csv.stream() << "# slope=nan,intercept=nan,r_squared=nan\n";
    }
    return exit_ok;
}

int cmd_moments(const ExperimentConfig& c, const Flags& f, Csv& csv) {
    const ParticleSystem system = build_system(c.system);
    const MomentStudy study{c.run.T, c.run.n, c.run.p, c.run.replications, c.run.seed, build_solver(c.solver),
                            f.threads};
    std::vector<MomentReport> reports;
    if (c.run.t) reports.push_back(estimate_moments(system, study, *c.run.t));
    else reports = moment_trace(system, study);

    const int gaps = system.dim() - 1;
    csv.stream() << "t,p,abs_moment,abs_moment_se," << numbered("inv_gap_", gaps) << ','
                 << numbered("inv_gap_", gaps, "_se") << ",inv_gap_sum,inv_gap_sum_se,bound\n";
    for (const auto& r : reports) {
        csv.stream() << r.t << ',' << r.p << ',' << r.abs_moment.value << ',' << r.abs_moment.std_err;
        for (const auto& g : r.inv_gap_moments) csv.stream() << ',' << g.value;
        for (const auto& g : r.inv_gap_moments) csv.stream() << ',' << g.std_err;
        csv.stream() << ',' << r.inv_gap_sum.value << ',' << r.inv_gap_sum.std_err << ',' << r.bound << '\n';
    }
    return exit_ok;
}

int cmd_collide(const ExperimentConfig& c, const Flags& f, Csv& csv) {
    const ParticleSystem system = build_system(c.system);
    const SolverOptions solver = build_solver(c.solver);
    csv.row("scheme", "n", "replications", "exits", "fraction");
    for (Scheme s : {Scheme::explicit_em, Scheme::semi_implicit}) {
        const double frac =
            exit_fraction(system, c.run.T, c.run.n, c.run.replications, c.run.seed, s, solver, f.threads);
        const auto exits = static_cast<long long>(std::llround(frac * c.run.replications));
        csv.row(to_string(s), c.run.n, c.run.replications, exits, frac);
    }
    return exit_ok;
}

int cmd_inequalities(const ExperimentConfig& c, Csv& csv) {
    csv.row("inequality", "d", "p", "chi", "points", "violations", "max_ratio");
    long long violations = 0;
    std::uint64_t stream = 0;
    for (int d : c.sweep.d) {
        for (double p : c.sweep.p) {
            const auto full = sweep_gap_inequality_full(d, p, c.sweep.count, derive_seed(c.run.seed, stream++));
            csv.row("full", d, p, 2.0 - 3.0 / d, full.points, full.violations, full.max_ratio);
            violations += full.violations;
            if (d < 3) continue;
            const double chi = chi_bar(d, p, c.sweep.resolution);
            const auto nn = sweep_gap_inequality_nn(d, p, chi, c.sweep.count, derive_seed(c.run.seed, stream++));
            csv.row("nearest_neighbour", d, p, chi, nn.points, nn.violations, nn.max_ratio);
            violations += nn.violations;
        }
    }
    return violations == 0 ? exit_ok : exit_condition_failed;
}

int cmd_chi_bar(const ExperimentConfig& c, Csv& csv) {
    csv.row("d", "p", "resolution", "chi_bar", "grid_value");
    for (int d : c.sweep.d) {
        if (d < 3) throw ValidationError("must be >= 3 for chi-bar", "sweep.d");
        for (double p : c.sweep.p)
            csv.row(d, p, c.sweep.resolution, chi_bar(d, p, c.sweep.resolution),
                    chi_bar_grid(d, p, c.sweep.resolution));
    }
    return exit_ok;
}

int cmd_check(const ExperimentConfig& c, Csv& csv) {
    const ParticleSystem system = build_system(c.system);
    ConditionReport report;
    if (c.system.gamma.type == "tridiagonal") {
        const double chi = c.run.chi ? *c.run.chi : chi_bar(system.dim(), c.run.p, c.sweep.resolution);
        report = check_nn_condition(system, c.run.p, chi);
    } else {
        report = check_full_interaction_condition(system, c.run.p);
    }
    csv.row("check", "lhs", "relation", "rhs", "holds");
    for (const auto& chk : report.checks) csv.row(chk.name, chk.lhs, chk.relation, chk.rhs, chk.holds ? "true" : "false");
    csv.stream() << "# satisfied=" << (report.satisfied ? "true" : "false") << '\n';
    return report.satisfied ? exit_ok : exit_condition_failed;
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& message,
         const std::string& key = {}) {
    nlohmann::json record{{"error", kind}, {"exit_code", code}, {"message", message}};
    if (!key.empty()) record["key"] = key;
    err << record.dump() << std::endl;
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulation and analysis of non-colliding particle systems"};
    app.require_subcommand(1);
    Flags flags;
    app.add_option("--config", flags.config_path, "YAML experiment file");
    app.add_option("--seed", flags.seed, "Base seed (overrides run.seed)");
    app.add_option("--threads", flags.threads, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--out", flags.out_path, "CSV output path (default: output.path, else stdout)");

    const std::vector<std::pair<const char*, const char*>> commands{
        {"solve", "Solve one implicit step problem (solve.a, solve.c)"},
        {"simulate", "Simulate paths and print every grid state"},
        {"converge", "Strong error per level and fitted rate"},
        {"moments", "Moment and inverse gap moment estimates"},
        {"collide", "Chamber exit fractions, explicit vs semi-implicit"},
        {"inequalities", "Random sweeps of the two gap inequalities"},
        {"chi-bar", "Nearest-neighbour constant on the sweep grid"},
        {"check", "Evaluate the non-collision parameter condition"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        return fail(err, exit_validation, "usage", e.what());
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        const std::string text = flags.config_path.empty() ? std::string() : read_file(flags.config_path);
        const ExperimentConfig config = parse_config(text, flags.seed);
        const std::string out_path = flags.out_path.empty() ? config.output.path : flags.out_path;

        std::ostringstream buffer;
        Csv csv(buffer, config.output.precision);
        int code = exit_ok;
        if (command == "solve") code = cmd_solve(config, csv);
        else if (command == "simulate") code = cmd_simulate(config, flags, csv);
        else if (command == "converge") code = cmd_converge(config, flags, csv);
        else if (command == "moments") code = cmd_moments(config, flags, csv);
        else if (command == "collide") code = cmd_collide(config, flags, csv);
        else if (command == "inequalities") code = cmd_inequalities(config, csv);
        else if (command == "chi-bar") code = cmd_chi_bar(config, csv);
        else code = cmd_check(config, csv);

        if (out_path.empty()) {
            out << buffer.str();
        } else {
            std::ofstream file(out_path, std::ios::binary);
            if (!file) throw IoError("cannot open output '" + out_path + "'");
            file << buffer.str();
            if (!file.flush()) throw IoError("cannot write output '" + out_path + "'");
        }
        return code;
    } catch (const ValidationError& e) {
        return fail(err, exit_validation, "validation", e.message(), e.key());
    } catch (const UnsupportedStructure& e) {
        return fail(err, exit_validation, "unsupported", e.what());
    } catch (const NonConvergence& e) {
        return fail(err, exit_non_convergence, "non_convergence", e.what());
    } catch (const IoError& e) {
        return fail(err, exit_io, "io", e.what());
    } catch (const std::exception& e) {
        return fail(err, exit_internal, "internal", e.what());
    }
}

}  // namespace ncps::cli
