#include "ncps/analysis.hpp"

#include "ncps/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ncps {

std::string_view to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::grid_sup_lp: return "grid_sup_Lp";
        case ErrorKind::terminal_l2: return "terminal_L2";
        case ErrorKind::grid_sup_l2: return "grid_sup_L2";
    }
    return "grid_sup_Lp";
}

ErrorKind parse_error_kind(std::string_view name) {
    if (name == "grid_sup_Lp") return ErrorKind::grid_sup_lp;
    if (name == "terminal_L2") return ErrorKind::terminal_l2;
    if (name == "grid_sup_L2") return ErrorKind::grid_sup_l2;
    throw ValidationError("unknown error mode '" + std::string(name) + "'", "error_mode");
}

namespace {

struct MeanVar {
    double mean = 0.0;
    double std_err = 0.0;
};

// Two-pass mean and standard error of the mean, summed in index order.
MeanVar mean_and_se(const std::vector<double>& v) {
    MeanVar r;
    if (v.empty()) return r;
    for (double x : v) r.mean += x;
    r.mean /= static_cast<double>(v.size());
    if (v.size() < 2) return r;
    double ss = 0.0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.std_err = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    return r;
}

// ||.||_p from the mean of p-th powers, std err by the delta method.
ErrorEstimate lp_norm(const MeanVar& m, double p) {
    if (m.mean <= 0.0) return {0.0, 0.0};
    const double err = std::pow(m.mean, 1.0 / p);
    return {err, err / (p * m.mean) * m.std_err};
}

std::vector<int> levels_for(const ConvergenceStudy& study, const std::vector<int>& requested) {
    for (int n : requested) {
        if (!is_power_of_two(n)) throw ValidationError("levels must be powers of 2", "levels");
        if (study.ref_level % n != 0) throw ValidationError("levels must divide ref_level", "levels");
    }
    return requested;
}

// Per replication and level: sup_k |e|^p (sup modes) or |e(t_k)|^2 per k.
struct ReplicationErrors {
    std::vector<double> sup_pow;
    std::vector<double> sup_abs;
    std::vector<std::vector<double>> sq_by_time;
};

ReplicationErrors replicate(const ConvergenceStudy& study, const std::vector<int>& levels, std::size_t m) {
    const int d = study.system.dim();
    const double p = study.mode.exponent();
    ReplicationErrors out;
    out.sup_pow.resize(levels.size());
    out.sup_abs.resize(levels.size());
    if (study.mode.kind == ErrorKind::terminal_l2) out.sq_by_time.resize(levels.size());

    try {
        const BrownianPath fine = generate_brownian(derive_seed(study.base_seed, m), d, study.T, study.ref_level);
        const PathResult ref = simulate(study.system, TimeGrid(study.T, study.ref_level), fine,
                                        Scheme::semi_implicit, study.solver);
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const int n = levels[l];
            const int factor = study.ref_level / n;
            double sup = 0.0;
            if (factor == 1) {
                out.sup_pow[l] = 0.0;
                out.sup_abs[l] = 0.0;
                if (!out.sq_by_time.empty()) out.sq_by_time[l].assign(n, 0.0);
                continue;
            }
            const PathResult coarse = simulate(study.system, TimeGrid(study.T, n), coarsen(fine, factor),
                                               Scheme::semi_implicit, study.solver);
            if (!out.sq_by_time.empty()) out.sq_by_time[l].resize(n);
            for (int k = 1; k <= n; ++k) {
                const double e = (ref.states.row(k * factor) - coarse.states.row(k)).norm();
                sup = std::max(sup, e);
                if (!out.sq_by_time.empty()) out.sq_by_time[l][k - 1] = e * e;
            }
            out.sup_abs[l] = sup;
            out.sup_pow[l] = std::pow(sup, p);
        }
    } catch (const NonConvergence& e) {
        throw NonConvergence("replication " + std::to_string(m) + ": " + e.what());
    }
    return out;
}

std::vector<LevelEstimate> estimate_levels(const ConvergenceStudy& study, const std::vector<int>& levels) {
    const auto M = static_cast<std::size_t>(study.replications);
    std::vector<ReplicationErrors> reps(M);
    parallel_for(M, study.threads, [&](std::size_t m) { reps[m] = replicate(study, levels, m); });

    const double p = study.mode.exponent();
    std::vector<LevelEstimate> result;
    std::vector<double> column(M);
    for (std::size_t l = 0; l < levels.size(); ++l) {
        const int n = levels[l];
        LevelEstimate est;
        est.n = n;

        if (study.mode.kind == ErrorKind::terminal_l2) {
            // sup over grid times of the L2 norm at that time
            for (int k = 0; k < n; ++k) {
                for (std::size_t m = 0; m < M; ++m) column[m] = reps[m].sq_by_time[l][k];
                const ErrorEstimate e = lp_norm(mean_and_se(column), 2.0);
                if (k == 0 || e.error > est.error) {
                    est.error = e.error;
                    est.std_err = e.std_err;
                }
            }
        } else {
            for (std::size_t m = 0; m < M; ++m) column[m] = reps[m].sup_pow[l];
            const ErrorEstimate e = lp_norm(mean_and_se(column), p);
            est.error = e.error;
            est.std_err = e.std_err;
        }

        if (n > 1) {
            const double scale = std::sqrt(n / std::log(static_cast<double>(n)));
            for (std::size_t m = 0; m < M; ++m) column[m] = reps[m].sup_abs[l] * scale;
            est.pathwise_stat = mean_and_se(column).mean;
        } else {
            est.pathwise_stat = std::numeric_limits<double>::quiet_NaN();
        }
        result.push_back(est);
    }
    return result;
}

}  // namespace

void ConvergenceStudy::validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw ValidationError("must be finite and > 0", "T");
    if (levels.empty()) throw ValidationError("must not be empty", "levels");
    if (!is_power_of_two(ref_level)) throw ValidationError("ref_level must be a power of 2", "ref_level");
    for (int n : levels)
        if (!is_power_of_two(n)) throw ValidationError("levels must be powers of 2", "levels");
    const int max_level = *std::max_element(levels.begin(), levels.end());
    if (static_cast<long long>(ref_level) < 4LL * max_level)
        throw ValidationError("must be >= 4 * max(levels)", "ref_level");
    if (replications < 1) throw ValidationError("must be >= 1", "replications");
    if (mode.kind == ErrorKind::grid_sup_lp && !(mode.p >= 1.0))
        throw ValidationError("must be >= 1", "error_mode.p");
    solver.validate();
}

ErrorEstimate strong_error(const ConvergenceStudy& study, int n) {
    if (!(study.T > 0.0)) throw ValidationError("must be > 0", "T");
    if (!is_power_of_two(study.ref_level)) throw ValidationError("ref_level must be a power of 2", "ref_level");
    if (study.replications < 1) throw ValidationError("must be >= 1", "replications");
    const auto est = estimate_levels(study, levels_for(study, {n}));
    return {est.front().error, est.front().std_err};
}

std::vector<LevelEstimate> strong_errors(const ConvergenceStudy& study) {
    study.validate();
    return estimate_levels(study, study.levels);
}

RateEstimate fit_rate(const std::vector<int>& n, const std::vector<double>& errors) {
    if (n.size() != errors.size()) throw ValidationError("levels and errors differ in length", "errors");
    std::vector<LevelEstimate> est(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) est[i] = {n[i], errors[i], 0.0, 0.0};
    return fit_rate(est);
}

RateEstimate fit_rate(const std::vector<LevelEstimate>& estimates) {
    if (estimates.size() < 3) throw ValidationError("need at least 3 levels", "levels");
    const auto k = static_cast<double>(estimates.size());
    double mx = 0.0, my = 0.0;
    for (const auto& e : estimates) {
        if (!(e.n > 0)) throw ValidationError("levels must be positive", "levels");
        if (!(e.error > 0.0) || !std::isfinite(e.error))
            throw ValidationError("errors must be positive and finite", "errors");
        mx += std::log2(static_cast<double>(e.n));
        my += std::log2(e.error);
    }
    mx /= k;
    my /= k;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& e : estimates) {
        const double dx = std::log2(static_cast<double>(e.n)) - mx;
        const double dy = std::log2(e.error) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw ValidationError("levels must not all be equal", "levels");

    RateEstimate r;
    r.levels = estimates;
    const double b = sxy / sxx;
    r.slope = -b;
    r.intercept = my - b * mx;
    double ss_res = 0.0;
    for (const auto& e : estimates) {
        const double resid = std::log2(e.error) - (r.intercept + b * std::log2(static_cast<double>(e.n)));
        ss_res += resid * resid;
    }
    r.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return r;
}

RateEstimate run_convergence(const ConvergenceStudy& study) { return fit_rate(strong_errors(study)); }

// ---------------------------------------------------------------------------

namespace {

void validate_moment_study(const MomentStudy& s) {
    if (!(s.T > 0.0) || !std::isfinite(s.T)) throw ValidationError("must be finite and > 0", "T");
    if (!is_power_of_two(s.n)) throw ValidationError("must be a power of 2", "n");
    if (!(s.p >= 0.0) || !std::isfinite(s.p)) throw ValidationError("must be >= 0", "p");
    if (s.replications < 1) throw ValidationError("must be >= 1", "replications");
    s.solver.validate();
}

std::vector<PathResult> simulate_paths(const ParticleSystem& system, const MomentStudy& s) {
    std::vector<PathResult> paths(static_cast<std::size_t>(s.replications));
    const TimeGrid grid(s.T, s.n);
    parallel_for(paths.size(), s.threads, [&](std::size_t m) {
        try {
            const BrownianPath w = generate_brownian(derive_seed(s.seed, m), system.dim(), s.T, s.n);
            paths[m] = simulate(system, grid, w, Scheme::semi_implicit, s.solver);
        } catch (const NonConvergence& e) {
            throw NonConvergence("replication " + std::to_string(m) + ": " + e.what());
        }
    });
    return paths;
}

MomentReport report_at(const ParticleSystem& system, const MomentStudy& s, const std::vector<PathResult>& paths,
                       int k) {
    const int d = system.dim();
    MomentReport r;
    r.t = TimeGrid(s.T, s.n).t(k);
    r.p = s.p;

    double bound = 0.0;
    for (int i = 0; i + 1 < d; ++i) bound += std::pow(system.x0()(i + 1) - system.x0()(i), -s.p);
    r.bound = bound * std::exp(s.p * s.T * lipschitz_constant(system.drift()));

    const std::size_t M = paths.size();
    std::vector<double> v(M);
    for (std::size_t m = 0; m < M; ++m) v[m] = std::pow(paths[m].states.row(k).squaredNorm(), 0.5 * s.p);
    const MeanVar abs = mean_and_se(v);
    r.abs_moment = {abs.mean, abs.std_err};

    for (int i = 0; i + 1 < d; ++i) {
        for (std::size_t m = 0; m < M; ++m)
            v[m] = std::pow(paths[m].states(k, i + 1) - paths[m].states(k, i), -s.p);
        const MeanVar g = mean_and_se(v);
        r.inv_gap_moments.push_back({g.mean, g.std_err});
    }
    for (std::size_t m = 0; m < M; ++m) {
        double sum = 0.0;
        for (int i = 0; i + 1 < d; ++i) sum += std::pow(paths[m].states(k, i + 1) - paths[m].states(k, i), -s.p);
        v[m] = sum;
    }
    const MeanVar total = mean_and_se(v);
    r.inv_gap_sum = {total.mean, total.std_err};
    return r;
}

}  // namespace

std::vector<MomentReport> moment_trace(const ParticleSystem& system, const MomentStudy& study) {
    validate_moment_study(study);
    const auto paths = simulate_paths(system, study);
    std::vector<MomentReport> out;
    out.reserve(study.n + 1);
    for (int k = 0; k <= study.n; ++k) out.push_back(report_at(system, study, paths, k));
    return out;
}

MomentReport estimate_moments(const ParticleSystem& system, const MomentStudy& study, double t) {
    validate_moment_study(study);
    if (!(t >= 0.0 && t <= study.T)) throw ValidationError("must lie in [0, T]", "t");
    const int k = static_cast<int>(std::lround(t / study.T * study.n));
    const auto paths = simulate_paths(system, study);
    return report_at(system, study, paths, k);
}

// ---------------------------------------------------------------------------

double exit_fraction(const ParticleSystem& system, double T, int n, int replications, std::uint64_t seed,
                     Scheme scheme, const SolverOptions& solver, int threads) {
    if (replications < 1) throw ValidationError("must be >= 1", "replications");
    const TimeGrid grid(T, n);
    std::vector<char> exited(static_cast<std::size_t>(replications), 0);
    parallel_for(exited.size(), threads, [&](std::size_t m) {
        try {
            const BrownianPath w = generate_brownian(derive_seed(seed, m), system.dim(), T, n);
            const PathResult r = simulate(system, grid, w, scheme, solver);
            exited[m] = r.exited_chamber || !(r.min_gap > 0.0);
        } catch (const NonConvergence& e) {
            throw NonConvergence("replication " + std::to_string(m) + ": " + e.what());
        }
    });
    long long count = 0;
    for (char e : exited) count += e;
    return static_cast<double>(count) / replications;
}

double collision_rate_explicit(const ParticleSystem& system, double T, int n, int replications,
                               std::uint64_t seed, int threads) {
    return exit_fraction(system, T, n, replications, seed, Scheme::explicit_em, {}, threads);
}

// ---------------------------------------------------------------------------

namespace {

void require_ordered(const Vector& x, int min_d) {
    if (x.size() < min_d) throw ValidationError("needs at least " + std::to_string(min_d) + " points", "x");
    if (!in_chamber(x)) throw ValidationError("must be strictly increasing", "x");
}

}  // namespace

InequalitySides verify_gap_inequality_full(const Vector& x, double p) {
    require_ordered(x, 2);
    if (!(p >= 0.0)) throw ValidationError("must be >= 0", "p");
    const auto d = x.size();
    InequalitySides s;
    for (Eigen::Index i = 0; i + 1 < d; ++i) {
        const double gap = x(i + 1) - x(i);
        const double gp = std::pow(gap, p);
        for (Eigen::Index k = 0; k < d; ++k) {
            if (k == i || k == i + 1) continue;
            s.lhs += 1.0 / (gp * (x(i + 1) - x(k)) * (x(i) - x(k)));
        }
        s.rhs += std::pow(gap, -(p + 2.0));
    }
    s.rhs *= 2.0 - 3.0 / static_cast<double>(d);
    return s;
}

InequalitySides verify_gap_inequality_nn(const Vector& x, double p, double chi) {
    require_ordered(x, 3);
    if (!(p >= 0.0)) throw ValidationError("must be >= 0", "p");
    const auto d = x.size();
    InequalitySides s;
    for (Eigen::Index i = 0; i + 2 < d; ++i) {
        const double g0 = x(i + 1) - x(i);
        const double g1 = x(i + 2) - x(i + 1);
        s.lhs += 1.0 / (g1 * std::pow(g0, p + 1.0)) + 1.0 / (std::pow(g1, p + 1.0) * g0);
    }
    for (Eigen::Index i = 0; i + 1 < d; ++i) s.rhs += std::pow(x(i + 1) - x(i), -(p + 2.0));
    s.rhs *= chi;
    return s;
}

namespace {

double exponent_of(double p, ChiForm form) { return form == ChiForm::homogeneous ? p + 1.0 : p; }

double pw(double x, double e) { return e == 0.0 ? 1.0 : std::pow(x, e); }

double dpw(double x, double e) {
    if (e == 0.0) return 0.0;
    if (x > 0.0) return e * std::pow(x, e - 1.0);
    return e > 1.0 ? 0.0 : (e == 1.0 ? 1.0 : 1e300);
}

// Scales a non-negative vector onto sum xi^q = 1.
bool normalise(Vector& xi, double q) {
    double n = 0.0;
    for (Eigen::Index i = 0; i < xi.size(); ++i) n += std::pow(xi(i), q);
    if (!(n > 0.0) || !std::isfinite(n)) return false;
    xi /= std::pow(n, 1.0 / q);
    return true;
}

Vector chi_gradient(const Vector& xi, double e) {
    Vector g = Vector::Zero(xi.size());
    for (Eigen::Index i = 0; i + 1 < xi.size(); ++i) {
        const double a = xi(i), b = xi(i + 1);
        g(i) += b * dpw(a, e) + pw(b, e);
        g(i + 1) += pw(a, e) + dpw(b, e) * a;
    }
    return g;
}

double ascend(Vector xi, double p, ChiForm form) {
    const double q = p + 2.0;
    const double e = exponent_of(p, form);
    double f = chi_functional(xi, p, form);
    double step = 0.1;
    for (int iter = 0; iter < 200000 && step > 1e-18; ++iter) {
        const Vector g = chi_gradient(xi, e);
        Vector normal(xi.size());
        for (Eigen::Index i = 0; i < xi.size(); ++i) normal(i) = q * std::pow(xi(i), q - 1.0);
        Vector tangent = g;
        const double nn = normal.squaredNorm();
        if (nn > 0.0) tangent -= (g.dot(normal) / nn) * normal;
        if (tangent.norm() < 1e-15) break;

        Vector trial = (xi + step * tangent).cwiseMax(0.0);
        if (!normalise(trial, q)) {
            step *= 0.5;
            continue;
        }
        const double ft = chi_functional(trial, p, form);
        if (ft > f) {
            xi = std::move(trial);
            f = ft;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    return f;
}

template <class Fn>
void for_each_composition(int parts, int total, Fn&& fn) {
    std::vector<int> k(static_cast<std::size_t>(parts), 0);
    auto rec = [&](auto&& self, int idx, int left) -> void {
        if (idx == parts - 1) {
            k[static_cast<std::size_t>(idx)] = left;
            fn(k);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            k[static_cast<std::size_t>(idx)] = v;
            self(self, idx + 1, left - v);
        }
    };
    rec(rec, 0, total);
}

Vector best_grid_point(int d, double p, int resolution, ChiForm form, double& best) {
    if (d < 3) throw ValidationError("must be >= 3", "d");
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("must be >= 0", "p");
    if (resolution < 1) throw ValidationError("must be >= 1", "resolution");
    const int m = d - 1;
    const double q = p + 2.0;
    Vector xi(m), arg = Vector::Constant(m, std::pow(1.0 / m, 1.0 / q));
    best = -std::numeric_limits<double>::infinity();
    for_each_composition(m, resolution, [&](const std::vector<int>& k) {
        for (int i = 0; i < m; ++i) xi(i) = std::pow(static_cast<double>(k[static_cast<std::size_t>(i)]) / resolution, 1.0 / q);
        const double f = chi_functional(xi, p, form);
        if (f > best) {
            best = f;
            arg = xi;
        }
    });
    return arg;
}

}  // namespace

double chi_functional(const Vector& xi, double p, ChiForm form) {
    const double e = exponent_of(p, form);
    double f = 0.0;
    for (Eigen::Index i = 0; i + 1 < xi.size(); ++i)
        f += xi(i + 1) * pw(xi(i), e) + pw(xi(i + 1), e) * xi(i);
    return f;
}

double chi_bar_grid(int d, double p, int resolution, ChiForm form) {
    double best = 0.0;
    best_grid_point(d, p, resolution, form, best);
    return best;
}

double chi_bar(int d, double p, int resolution, ChiForm form) {
    double best = 0.0;
    const Vector grid_start = best_grid_point(d, p, resolution, form, best);
    const int m = d - 1;
    const double q = p + 2.0;

    std::vector<Vector> starts;
    starts.push_back(grid_start);
    starts.push_back(Vector::Constant(m, std::pow(1.0 / m, 1.0 / q)));
    const Philox4x32 gen(0x63686962u);
    for (std::uint64_t s = 0; s < 16; ++s) {
        Vector xi(m);
        for (int i = 0; i < m; i += 2) {
            const auto u = uniform_pair(gen, s, static_cast<std::uint64_t>(i / 2));
            xi(i) = u[0];
            if (i + 1 < m) xi(i + 1) = u[1];
        }
        normalise(xi, q);
        starts.push_back(std::move(xi));
    }

    for (const Vector& s : starts) best = std::max(best, ascend(s, p, form));
    if (form == ChiForm::homogeneous && !(best < 2.0))
        throw Error("nearest-neighbour constant reached 2 (d=" + std::to_string(d) + ")");
    return best;
}

Vector sample_chamber_point(std::uint64_t seed, std::uint64_t index, int d) {
    if (d < 2) throw ValidationError("must be >= 2", "d");
    const Philox4x32 gen(seed);
    Vector x(d);
    const auto first = uniform_pair(gen, index, 0);
    x(0) = 2.0 * first[0] - 1.0;
    int drawn = 1;
    double spare = first[1];
    for (int i = 1; i < d; ++i) {
        double u;
        if (drawn % 2 == 1) {
            u = spare;
        } else {
            const auto pair = uniform_pair(gen, index, static_cast<std::uint64_t>(drawn / 2));
            u = pair[0];
            spare = pair[1];
        }
        ++drawn;
        x(i) = x(i - 1) + std::pow(10.0, -3.0 + 6.0 * u);
    }
    return x;
}

namespace {

template <class Eval>
SweepResult sweep(int d, long long count, std::uint64_t seed, Eval&& eval) {
    if (count < 0) throw ValidationError("must be >= 0", "count");
    SweepResult r;
    for (long long j = 0; j < count; ++j) {
        Vector x = sample_chamber_point(seed, static_cast<std::uint64_t>(j), d);
        if (!in_chamber(x)) continue;  // gaps below rounding at large offsets
        const InequalitySides s = eval(x);
        ++r.points;
        r.max_ratio = std::max(r.max_ratio, s.lhs / s.rhs);
        if (!(s.lhs < s.rhs) && !(eval.allow_equal && s.lhs <= s.rhs)) ++r.violations;
    }
    return r;
}

}  // namespace

SweepResult sweep_gap_inequality_full(int d, double p, long long count, std::uint64_t seed) {
    struct {
        double p;
        bool allow_equal = false;
        InequalitySides operator()(const Vector& x) const { return verify_gap_inequality_full(x, p); }
    } eval{p};
    return sweep(d, count, seed, eval);
}

SweepResult sweep_gap_inequality_nn(int d, double p, double chi, long long count, std::uint64_t seed) {
    struct {
        double p, chi;
        bool allow_equal = true;
        InequalitySides operator()(const Vector& x) const { return verify_gap_inequality_nn(x, p, chi); }
    } eval{p, chi};
    return sweep(d, count, seed, eval);
}

}  // namespace ncps
