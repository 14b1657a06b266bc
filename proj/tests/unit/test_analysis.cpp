#include "ncps/analysis.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace ncps;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double e : v) x(i++) = e;
    return x;
}

ConvergenceStudy dyson_study(int replications, std::vector<int> levels, int ref_level) {
    return ConvergenceStudy{dyson_system(3, 4.0, linspace(3, -1, 1)), 1.0, std::move(levels), ref_level,
                            replications, ErrorMode{}, 2024, SolverOptions{}, 0};
}

// Direct 1-D scan of the d=3 objective on the (p+2)-circle.
double scan_d3(double p, ChiForm form) {
    const double q = p + 2.0;
    double best = 0.0;
    const int N = 200000;
    for (int k = 0; k <= N; ++k) {
        const double t = static_cast<double>(k) / N;
        best = std::max(best, chi_functional(vec({std::pow(t, 1.0 / q), std::pow(1.0 - t, 1.0 / q)}), p, form));
    }
    return best;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("rate fit recovers exact power laws") {
    const std::vector<int> n{16, 32, 64, 128, 256};
    for (double alpha : {0.5, 1.0, 0.73}) {
        std::vector<double> err;
        for (int k : n) err.push_back(3.0 * std::pow(k, -alpha));
        const RateEstimate r = fit_rate(n, err);
        CHECK(r.slope == doctest::Approx(alpha).epsilon(1e-12));
        CHECK(r.intercept == doctest::Approx(std::log2(3.0)).epsilon(1e-12));
        CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(fit_rate({16, 32}, {0.1, 0.05}), ValidationError);
    CHECK_THROWS_AS(fit_rate({16, 32, 64}, {0.1, 0.0, 0.02}), ValidationError);
    CHECK_THROWS_AS(fit_rate({16, 32, 64}, {0.1, 0.05}), ValidationError);
}

TEST_CASE("study validation") {
    auto s = dyson_study(4, {3}, 64);
    CHECK_THROWS_WITH_AS(s.validate(), "levels: levels must be powers of 2", ValidationError);
    s = dyson_study(4, {16, 32}, 64);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = dyson_study(4, {16, 32}, 96);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s = dyson_study(0, {16}, 64);
    CHECK_THROWS_AS(s.validate(), ValidationError);
    CHECK(parse_error_kind("terminal_L2") == ErrorKind::terminal_l2);
    CHECK_THROWS_AS(parse_error_kind("sup"), ValidationError);
}

TEST_CASE("error at the reference level is exactly zero") {
    const auto s = dyson_study(8, {16}, 64);
    const ErrorEstimate e = strong_error(s, 64);
    CHECK(e.error == 0.0);
    CHECK(e.std_err == 0.0);
}

TEST_CASE("error shrinks with n on common paths") {
    const auto s = dyson_study(100, {32, 256}, 1024);
    const auto levels = strong_errors(s);
    CHECK(levels[0].error > levels[1].error);
    CHECK(levels[0].std_err > 0.0);
    CHECK(levels[0].pathwise_stat > 0.0);
}

TEST_CASE("results do not depend on the thread count") {
    auto s = dyson_study(12, {8, 16}, 64);
    s.threads = 1;
    const auto one = strong_errors(s);
    s.threads = 4;
    const auto four = strong_errors(s);
    for (std::size_t l = 0; l < one.size(); ++l) {
        CHECK(one[l].error == four[l].error);
        CHECK(one[l].std_err == four[l].std_err);
    }
}

TEST_CASE("error modes") {
    auto s = dyson_study(50, {8, 16, 32}, 128);
    s.mode = {ErrorKind::grid_sup_l2, 2.0};
    const auto sup_l2 = strong_errors(s);
    s.mode = {ErrorKind::terminal_l2, 2.0};
    const auto term_l2 = strong_errors(s);
    s.mode = {ErrorKind::grid_sup_lp, 1.0};
    const auto sup_l1 = strong_errors(s);
    // sup_k E|e_k|^2 <= E sup_k |e_k|^2 and the L1 norm is below the L2 norm.
    for (std::size_t l = 0; l < 3; ++l) {
        CHECK(term_l2[l].error <= sup_l2[l].error * (1 + 1e-14));
        CHECK(sup_l1[l].error <= sup_l2[l].error * (1 + 1e-14));
    }
}

TEST_CASE("zero diffusion gives the deterministic discretisation error") {
    ParticleSystem sys(uniform_gamma(3, 1.0), ZeroDrift{}, ConstantMatrixDiffusion{Matrix::Zero(3, 3)},
                       vec({-1.0, 0.2, 1.0}));
    ConvergenceStudy s{sys, 1.0, {8}, 64, 5, ErrorMode{}, 1, SolverOptions{}, 0};
    const ErrorEstimate a = strong_error(s, 8);
    const ErrorEstimate b = strong_error(s, 8);
    CHECK(a.error == b.error);
    CHECK(a.std_err == 0.0);

    const auto fine = simulate(sys, TimeGrid(1.0, 64), generate_brownian(0, 3, 1.0, 64));
    const auto coarse = simulate(sys, TimeGrid(1.0, 8), generate_brownian(0, 3, 1.0, 8));
    double sup = 0.0;
    for (int k = 1; k <= 8; ++k) sup = std::max(sup, (fine.states.row(8 * k) - coarse.states.row(k)).norm());
    CHECK(a.error == doctest::Approx(sup).epsilon(1e-13));
}

TEST_CASE("solver failures name the replication") {
    auto s = dyson_study(3, {16}, 64);
    s.solver.method = SolverMethod::newton;
    s.solver.max_iter = 1;
    s.solver.tol = 1e-300;
    try {
        strong_errors(s);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(std::string(e.what()).rfind("replication 0:", 0) == 0);
    }
}

TEST_CASE("moment estimates") {
    const auto sys = dyson_system(3, 4.0, vec({-1.0, 0.0, 2.0}));
    MomentStudy st{1.0, 16, 2.0, 200, 9, SolverOptions{}, 0};

    SUBCASE("t = 0 is exact") {
        const MomentReport r = estimate_moments(sys, st, 0.0);
        CHECK(r.inv_gap_moments[0].value == 1.0);
        CHECK(r.inv_gap_moments[1].value == 0.25);
        CHECK(r.inv_gap_moments[0].std_err == 0.0);
        CHECK(r.abs_moment.value == doctest::Approx(5.0));
        CHECK(r.bound == doctest::Approx(1.25));
    }
    SUBCASE("p = 0 gives ones") {
        st.p = 0.0;
        const MomentReport r = estimate_moments(sys, st, 0.5);
        CHECK(r.abs_moment.value == 1.0);
        for (const auto& g : r.inv_gap_moments) CHECK(g.value == 1.0);
    }
    SUBCASE("trace covers the grid and stays under the bound") {
        const auto trace = moment_trace(sys, st);
        REQUIRE(trace.size() == 17);
        CHECK(trace.back().t == 1.0);
        for (const auto& r : trace) CHECK(r.inv_gap_sum.value <= r.bound + 3.0 * r.inv_gap_sum.std_err);
    }
    SUBCASE("drift enters the bound") {
        ParticleSystem ou(uniform_gamma(3, 4.0), OrnsteinUhlenbeckDrift{0.5, vec({0, 0, 0})},
                          ConstantMatrixDiffusion{Matrix::Identity(3, 3)}, vec({-1.0, 0.0, 2.0}));
        CHECK(estimate_moments(ou, st, 0.0).bound == doctest::Approx(1.25 * std::exp(2.0 * 1.0 * 0.5)));
    }
    SUBCASE("validation") {
        st.n = 12;
        CHECK_THROWS_AS(moment_trace(sys, st), ValidationError);
        st.n = 16;
        CHECK_THROWS_AS(estimate_moments(sys, st, 2.0), ValidationError);
    }
}

TEST_CASE("chamber exits") {
    const auto sys = dyson_system(3, 1.0, linspace(3, -1, 1));
    CHECK(collision_rate_explicit(sys, 1.0, 4, 2000, 5) > 0.0);
    CHECK(exit_fraction(sys, 1.0, 4, 2000, 5, Scheme::semi_implicit) == 0.0);

    ParticleSystem quiet(uniform_gamma(3, 1.0), ZeroDrift{}, ConstantMatrixDiffusion{Matrix::Zero(3, 3)},
                         linspace(3, -1, 1));
    CHECK(collision_rate_explicit(quiet, 1.0, 4, 10, 5) == 0.0);
}

TEST_CASE("full gap inequality: direct values") {
    const auto two = verify_gap_inequality_full(vec({0.0, 0.5}), 1.0);
    CHECK(two.lhs == 0.0);
    CHECK(two.rhs > 0.0);

    const auto r = verify_gap_inequality_full(vec({0, 1, 2}), 0.0);
    CHECK(r.lhs == doctest::Approx(1.0));
    CHECK(r.rhs == doctest::Approx(2.0));
    CHECK_THROWS_AS(verify_gap_inequality_full(vec({0, 2, 1}), 0.0), ValidationError);
}

TEST_CASE("nearest-neighbour inequality: direct values and homogeneity") {
    const auto r = verify_gap_inequality_nn(vec({0, 1, 2}), 0.0, std::sqrt(2.0));
    CHECK(r.lhs == doctest::Approx(2.0));
    CHECK(r.rhs == doctest::Approx(2.0 * std::sqrt(2.0)));

    const Vector x = vec({-0.3, 0.1, 1.7, 1.9});
    for (double p : {0.0, 1.0, 2.5}) {
        const auto a = verify_gap_inequality_nn(x, p, 1.5);
        const auto b = verify_gap_inequality_nn(3.0 * x, p, 1.5);
        CHECK(b.lhs == doctest::Approx(a.lhs * std::pow(3.0, -(p + 2))));
        CHECK(b.rhs == doctest::Approx(a.rhs * std::pow(3.0, -(p + 2))));
    }
    CHECK_THROWS_AS(verify_gap_inequality_nn(vec({0, 1}), 0.0, 1.0), ValidationError);
}

TEST_CASE("chi_bar against independent oracles") {
    SUBCASE("d = 3: the cross terms never exceed the normalisation") {
        // (a-b)(a^{p+1}-b^{p+1}) >= 0 gives F <= 1, with equality at equal entries.
        for (double p : {0.0, 1.0, 2.0, 0.5}) CHECK(chi_bar(3, p) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("p = 0: Perron root of the path graph") {
        for (int d = 3; d <= 8; ++d)
            CHECK(chi_bar(d, 0.0) == doctest::Approx(2.0 * std::cos(std::numbers::pi / d)).epsilon(1e-10));
    }
    SUBCASE("d = 3 brute-force scan") {
        for (double p : {0.0, 1.0, 2.0}) {
            CHECK(chi_bar(3, p) == doctest::Approx(scan_d3(p, ChiForm::homogeneous)).epsilon(1e-9));
            CHECK(chi_bar(3, p, 16, ChiForm::literal) == doctest::Approx(scan_d3(p, ChiForm::literal)).epsilon(1e-9));
        }
        CHECK(chi_bar(3, 0.0, 16, ChiForm::literal) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
        CHECK(chi_bar(3, 1.0, 16, ChiForm::literal) == doctest::Approx(std::cbrt(2.0)).epsilon(1e-10));
    }
    SUBCASE("refinement is monotone and stays below 2") {
        for (int d = 3; d <= 6; ++d) {
            for (double p : {0.0, 1.0, 2.0}) {
                const double coarse = chi_bar_grid(d, p, 6);
                const double fine = chi_bar_grid(d, p, 12);
                const double best = chi_bar(d, p, 12);
                CHECK(coarse <= fine);
                CHECK(fine <= best + 1e-15);
                CHECK(best < 2.0);
            }
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(chi_bar(2, 1.0), ValidationError);
        CHECK_THROWS_AS(chi_bar(4, -1.0), ValidationError);
    }
}

TEST_CASE("random chamber points and sweeps") {
    for (std::uint64_t j = 0; j < 200; ++j) {
        const Vector x = sample_chamber_point(77, j, 6);
        REQUIRE(in_chamber(x));
        for (int i = 0; i < 5; ++i) {
            CHECK(x(i + 1) - x(i) >= 1e-3 * (1 - 1e-9));
            CHECK(x(i + 1) - x(i) <= 1e3 * (1 + 1e-9));
        }
    }
    CHECK(sample_chamber_point(77, 5, 4) == sample_chamber_point(77, 5, 4));

    const SweepResult full = sweep_gap_inequality_full(5, 1.0, 2000, 3);
    CHECK(full.points == 2000);
    CHECK(full.violations == 0);
    CHECK(full.max_ratio < 1.0);
    const SweepResult nn = sweep_gap_inequality_nn(5, 1.0, chi_bar(5, 1.0), 2000, 3);
    CHECK(nn.violations == 0);
    CHECK(nn.max_ratio <= 1.0);
}

}  // TEST_SUITE
