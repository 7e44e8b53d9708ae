#include <doctest.h>

#include <cmath>
#include <sstream>

#include "itin/theory.hpp"

using namespace itin;

namespace {

ForwardMap sin_perturbed_scalar() {
    return make_scalar_map("4x+sin(x)", [](double x) { return 4.0 * x + std::sin(x); });
}

}  // namespace

TEST_CASE("estimate_slopes on a linear map") {
    const auto map = make_scalar_map("3x", [](double x) { return 3.0 * x; });
    const SlopeStats st = estimate_slopes(map, 0.0, 1.0, 11);
    CHECK(st.s_min == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(st.s_max == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(st.slope_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.epsilon == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.epsilon_defined);
    CHECK(st.monotone_increasing);
}

TEST_CASE("estimate_slopes on 4x+sin(x) gives epsilon >= 1/3") {
    // Derivative range is [3, 5]; secants lie inside it by the mean value
    // theorem, so the sampled ratio cannot exceed 5/3.
    const SlopeStats st = estimate_slopes(sin_perturbed_scalar(), -10.0, 10.0, 2001);
    CHECK(st.monotone_increasing);
    CHECK(st.s_min >= 3.0 - 1e-9);
    CHECK(st.s_max <= 5.0 + 1e-9);
    CHECK(st.slope_ratio <= 5.0 / 3.0 + 1e-9);
    CHECK(st.epsilon >= 1.0 / 3.0 - 1e-9);
    CHECK(st.epsilon <= 1.0 / 3.0 + 1e-3);  // dense grid: close to the analytic value
}

TEST_CASE("estimate_slopes flags x^3 as monotone with undefined epsilon") {
    const auto map = make_scalar_map("x^3", [](double x) { return x * x * x; });
    const SlopeStats st = estimate_slopes(map, -1.0, 1.0, 2001);
    CHECK(st.monotone_increasing);
    CHECK(st.slope_ratio > 2.0);
    CHECK(!st.epsilon_defined);
}

TEST_CASE("estimate_slopes raises NotMonotone on a sign change") {
    const auto map = make_scalar_map("x^2", [](double x) { return x * x; });
    CHECK_THROWS_AS(estimate_slopes(map, -1.0, 1.0, 101), NotMonotone);
    CHECK_THROWS_AS(estimate_slopes(sin_perturbed_scalar(), 1.0, 1.0, 11), InvalidInput);
    CHECK_THROWS_AS(estimate_slopes(sin_perturbed_scalar(), 0.0, 1.0, 2), InvalidInput);
}

TEST_CASE("certify_linear_oneshot passes across dimensions") {
    for (int dim : {1, 5}) {
        RngStream rng(900 + dim);
        const Certificate cert = certify_linear_oneshot(dim, 20, rng);
        CHECK(cert.holds);
        CHECK(cert.worst_observed <= cert.bound + 1e-9);
        CHECK(cert.theorem_id == TheoremId::T1);
    }
}

TEST_CASE("two-point contraction certificate for 4x+sin(x)") {
    const ForwardMap map = sin_perturbed_scalar();
    const SlopeStats st = estimate_slopes(map, -10.0, 10.0, 2001);
    RngStream rng(77);
    for (int i = 0; i < 10; ++i) {
        const double y0 = rng.uniform_in(-10.0, 10.0);
        const double y1 = y0 + rng.uniform_in(0.5, 5.0);
        const double x0 = rng.uniform_in(-2.0, 2.0);
        const double x1 = x0 + rng.uniform_in(0.1, 2.0);
        const Certificate cert =
            certify_two_point_contraction(map, st, {y0, y1}, {x0, x1}, 40);
        CHECK(cert.holds);
        CHECK(cert.bound == doctest::Approx(1.0 - st.epsilon));
    }
}

TEST_CASE("two-point contraction is immediate for linear maps") {
    const auto map = make_scalar_map("2x+1", [](double x) { return 2.0 * x + 1.0; });
    const SlopeStats st = estimate_slopes(map, -5.0, 5.0, 101);
    CHECK(st.epsilon == doctest::Approx(1.0).epsilon(1e-9));
    const Certificate cert = certify_two_point_contraction(map, st, {3.0, 7.0}, {0.0, 1.0}, 10);
    CHECK(cert.holds);
    // epsilon = 1: contraction factor bound is 0 and iteration 1 is exact.
    CHECK(cert.worst_observed <= 1e-9);
}

TEST_CASE("two-point certificate is a fixed point when starting at the answer") {
    const ForwardMap map = sin_perturbed_scalar();
    const SlopeStats st = estimate_slopes(map, -10.0, 10.0, 2001);
    const double x0 = monotone_inverse(map, 5.0);
    const double x1 = monotone_inverse(map, 9.0);
    const Certificate cert = certify_two_point_contraction(
        map, st, {map.eval_scalar(x0), map.eval_scalar(x1)}, {x0, x1}, 10);
    CHECK(cert.holds);
    REQUIRE(cert.trace_ref.has_value());
    for (const InversionState& s : cert.trace_ref->states)
        CHECK(s.per_point_residuals.maxCoeff() <= 1e-9);
}

TEST_CASE("monotone_inverse locates roots to 1e-12") {
    const ForwardMap map = sin_perturbed_scalar();
    for (double y : {-7.0, 0.0, 3.25, 40.0}) {
        const double x = monotone_inverse(map, y);
        CHECK(std::abs(map.eval_scalar(x) - y) <= 5e-11);
    }
    const auto dec = make_scalar_map("-2x", [](double x) { return -2.0 * x; });
    CHECK(monotone_inverse(dec, 6.0) == doctest::Approx(-3.0).epsilon(1e-10));
}

TEST_CASE("mean contraction certificate for one-sided starts") {
    const ForwardMap map = sin_perturbed_scalar();
    const SlopeStats st = estimate_slopes(map, -10.0, 10.0, 2001);
    Vector x0(3), y(3);
    x0 << -5.0, -4.0, -3.0;
    y << -2.0, 0.0, 2.0;  // mean 0; F^{-1}(0) = 0 by oddness, all x0 below it
    const Certificate cert = certify_mean_contraction(map, st, y, x0, 30);
    CHECK(cert.holds);
    CHECK(cert.worst_observed <= 2.0 / 3.0 + 1e-9);
}

TEST_CASE("mean contraction with M = 2 matches the two-point view") {
    const ForwardMap map = sin_perturbed_scalar();
    const SlopeStats st = estimate_slopes(map, -10.0, 10.0, 2001);
    Vector x0(2), y(2);
    x0 << -4.0, -3.0;
    y << 1.0, 3.0;
    const Certificate cert = certify_mean_contraction(map, st, y, x0, 30);
    CHECK(cert.holds);
}

TEST_CASE("mean contraction rejects straddling starts") {
    const ForwardMap map = sin_perturbed_scalar();
    const SlopeStats st = estimate_slopes(map, -10.0, 10.0, 2001);
    Vector x0(3), y(3);
    x0 << -5.0, 1.0, 2.0;  // straddles F^{-1}(0) = 0
    y << -2.0, 0.0, 2.0;
    CHECK_THROWS_AS(certify_mean_contraction(map, st, y, x0, 10), PreconditionFailed);
}

TEST_CASE("theta bounds certificate on linear, sin-perturbed and decreasing maps") {
    const auto linear = make_scalar_map("3x", [](double x) { return 3.0 * x; });
    const SlopeStats st_lin = estimate_slopes(linear, -5.0, 5.0, 101);
    const InversionTrace tr_lin = run_two_point(linear, {6.0, 9.0}, {0.0, 1.0}, 5);
    const Certificate c_lin = certify_theta_bounds(tr_lin, st_lin);
    CHECK(c_lin.holds);
    for (const InversionState& s : tr_lin.states)
        if (s.fit) CHECK(s.fit->theta(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));

    const ForwardMap map = sin_perturbed_scalar();
    const SlopeStats st = estimate_slopes(map, -10.0, 10.0, 2001);
    const InversionTrace tr = run_two_point(map, {10.0, 20.0}, {0.0, 1.0}, 40);
    const Certificate cert = certify_theta_bounds(tr, st);
    CHECK(cert.holds);
    for (const InversionState& s : tr.states) {
        if (!s.fit) continue;
        CHECK(s.fit->theta(0, 0) >= 0.2 - 1e-9);
        CHECK(s.fit->theta(0, 0) <= 1.0 / 3.0 + 1e-9);
    }

    const auto dec = make_scalar_map("-2x", [](double x) { return -2.0 * x; });
    const SlopeStats st_dec = estimate_slopes(dec, -5.0, 5.0, 101);
    CHECK(!st_dec.monotone_increasing);
    const InversionTrace tr_dec = run_two_point(dec, {4.0, 8.0}, {0.0, 1.0}, 5);
    const Certificate c_dec = certify_theta_bounds(tr_dec, st_dec);
    CHECK(c_dec.holds);
    for (const InversionState& s : tr_dec.states)
        if (s.fit) CHECK(s.fit->theta(0, 0) == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("estimate_assumption_bounds on a linear map") {
    Matrix a(2, 2);
    a << 3.0, 0.5, -0.25, 2.0;
    const ForwardMap map = make_linear_map(a, Vector::Zero(2));
    Vector lo(2), hi(2);
    lo << -2.0, -2.0;
    hi << 2.0, 2.0;
    const AssumptionBounds b = estimate_assumption_bounds(map, lo, hi, 9);
    CHECK(b.gamma <= 1e-8);
    CHECK(b.lambda <= 1e-8);
    CHECK(b.zeta == doctest::Approx(spectral_norm(a)).epsilon(1e-6));
    CHECK(b.beta == doctest::Approx(1.0 / min_singular_value(a)).epsilon(1e-6));
    CHECK(b.delta <= 1e-6);
    CHECK(b.rho <= 1e-6);
    CHECK(b.contraction_precondition());
}

TEST_CASE("estimate_assumption_bounds on the 1-D sin-perturbed map") {
    const ForwardMap map = sin_perturbed_scalar();
    Vector lo(1), hi(1);
    lo << -10.0;
    hi << 10.0;
    const AssumptionBounds b = estimate_assumption_bounds(map, lo, hi, 501);
    CHECK(b.zeta <= 5.0 + 1e-6);
    CHECK(b.zeta >= 4.9);  // grid passes near the maximum-derivative points
    CHECK(b.beta <= 1.0 / 3.0 + 1e-6);
    CHECK(b.gamma <= 2.0 + 1e-6);
    CHECK(b.gamma >= 1.9);
}

TEST_CASE("estimate_assumption_bounds with grid 1 warns") {
    Matrix a = Matrix::Identity(2, 2) * 2.0;
    const ForwardMap map = make_linear_map(a, Vector::Zero(2));
    Vector lo(2), hi(2);
    lo << -1.0, -1.0;
    hi << 1.0, 1.0;
    const AssumptionBounds b = estimate_assumption_bounds(map, lo, hi, 1);
    CHECK(b.single_sample_warning);
    CHECK(b.gamma == doctest::Approx(0.0));
}

TEST_CASE("multidim ball certificate on a sin-perturbed linear 2-D map") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 3.0;
    a(1, 1) = 4.0;
    ForwardMap map;
    map.in_dim = 2;
    map.out_dim = 2;
    map.name = "sin-linear-2d";
    map.eval = [a](const Vector& x) -> Vector {
        return a.transpose() * x + 0.01 * x.array().sin().matrix();
    };

    InversionProblem problem;
    problem.map = map;
    const int m = 6;
    RngStream rng(5);
    problem.initial_inputs = Matrix(m, 2);
    problem.desired_outputs = Matrix(m, 2);
    for (int i = 0; i < m; ++i) {
        problem.initial_inputs.row(i) = gaussian_vector(rng, 2, 1.0).transpose();
        problem.desired_outputs.row(i) =
            (gaussian_vector(rng, 2, 1.0) + Vector::Constant(2, 3.0)).transpose();
    }
    problem.max_iterations = 200;
    problem.residual_target = 1e-12;

    // Constants measured along the run's own iterate clouds.
    const InversionTrace pre = run_inversion(problem);
    std::vector<Matrix> clouds;
    for (const InversionState& s : pre.states) clouds.push_back(s.inputs);
    Vector lo(2), hi(2);
    lo << -6.0, -6.0;
    hi << 6.0, 6.0;
    const AssumptionBounds bounds = estimate_assumption_bounds(map, lo, hi, 41, clouds);
    REQUIRE(bounds.contraction_precondition());

    const Certificate cert = certify_multidim_ball(map, bounds, problem);
    CHECK(cert.holds);
    CHECK(cert.worst_observed <= bounds.rho + 1e-6);

    // Linear special case: rho = 0 and the residual reaches (near) zero.
    const ForwardMap lin = make_linear_map(a, Vector::Zero(2), "linear-2d");
    InversionProblem lp = problem;
    lp.map = lin;
    const AssumptionBounds lb = estimate_assumption_bounds(lin, lo, hi, 11);
    CHECK(lb.rho <= 1e-8);
    const Certificate lcert = certify_multidim_ball(lin, lb, lp);
    CHECK(lcert.holds);

    AssumptionBounds bad = bounds;
    bad.gamma = 10.0;
    bad.derive();
    CHECK_THROWS_AS(certify_multidim_ball(map, bad, problem), PreconditionFailed);
}

TEST_CASE("counterexample probe: slope ratio above 2 is observed, not asserted") {
    // x^3 + x on [-2, 2] has derivative range [1, 13]: monotone but far from
    // the <2 ratio condition. The suite records factors without asserting the
    // contraction bound (the theorems are sufficient, not necessary).
    const auto map = make_scalar_map("x^3+x", [](double x) { return x * x * x + x; });
    const SlopeStats st = estimate_slopes(map, -2.0, 2.0, 2001);
    CHECK(st.monotone_increasing);
    CHECK(st.slope_ratio > 2.0);
    CHECK(!st.epsilon_defined);
    CHECK_THROWS_AS(
        certify_two_point_contraction(map, st, {1.0, 2.0}, {-1.0, 1.5}, 20),
        PreconditionFailed);

    const InversionTrace trace = run_two_point(map, {1.0, 2.0}, {-1.0, 1.5}, 20);
    const std::vector<double> factors = detail::contraction_factors(trace);
    CHECK(!factors.empty());  // observed, recorded, no bound claimed
}

TEST_CASE("certificate CSV layout") {
    RngStream rng(1);
    std::vector<Certificate> certs{certify_linear_oneshot(1, 3, rng)};
    std::ostringstream os;
    write_certificates_csv(certs, os);
    CHECK(os.str().find("theorem_id,holds,bound,worst_observed,iterations,map_name,seed") == 0);
    CHECK(os.str().find("T1,1,") != std::string::npos);
}
