#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "itin/inversion.hpp"

namespace itin {

/// Secant-slope statistics of a 1-D map over a sampled interval.
/// On a grid, every pairwise secant is a convex combination of adjacent
/// secants, so the extremes over adjacent pairs are the extremes over all
/// pairs. epsilon = 2 - slope_ratio is only meaningful while slope_ratio <= 2;
/// epsilon_defined flags that.
struct SlopeStats {
    double s_min = 0.0;  // min |secant|
    double s_max = 0.0;  // max |secant|
    double slope_ratio = 0.0;
    double epsilon = 0.0;
    bool epsilon_defined = false;
    bool monotone_increasing = true;
};

/// Constants bounding a map and the regression's approximation quality:
/// gamma  - Jacobian Lipschitz bound      ||J(x1) - J(x2)|| <= gamma
/// zeta   - Jacobian norm bound           ||J(x)|| <= zeta
/// beta   - inverse Jacobian norm bound   ||J^{-1}(x)|| <= beta
/// lambda - mean-vs-center gap            ||mean F(X) - F(mean X)|| <= lambda
/// delta  - inverse-Jacobian estimate error, J_est^{-1} = J^{-1}(I + Delta)
/// mu, rho are derived; rho is the radius of the residual ball the iteration
/// is guaranteed to enter.
struct AssumptionBounds {
    double gamma = 0.0;
    double zeta = 0.0;
    double beta = 0.0;
    double lambda = 0.0;
    double delta = 0.0;
    double mu = std::numeric_limits<double>::quiet_NaN();
    double rho = std::numeric_limits<double>::quiet_NaN();
    bool single_sample_warning = false;

    /// mu = zeta^2 beta delta / (1 - zeta beta delta)   (requires zeta beta delta < 1)
    /// rho = 2 lambda beta (1+delta)(mu+zeta) / (1 - beta (1+delta)(mu+gamma))
    void derive() {
        const double zbd = zeta * beta * delta;
        mu = zbd < 1.0 ? zeta * zeta * beta * delta / (1.0 - zbd)
                       : std::numeric_limits<double>::infinity();
        const double denom = 1.0 - beta * (1.0 + delta) * (mu + gamma);
        rho = (std::isfinite(mu) && denom > 0.0)
                  ? 2.0 * lambda * beta * (1.0 + delta) * (mu + zeta) / denom
                  : std::numeric_limits<double>::infinity();
    }

    bool contraction_precondition() const {
        return std::isfinite(mu) && beta * (1.0 + delta) * (gamma + mu) < 1.0 &&
               delta * zeta * beta < 1.0;
    }
};

enum class TheoremId { T1, T2, T3, T4, L1 };

inline const char* theorem_name(TheoremId id) {
    switch (id) {
        case TheoremId::T1: return "T1";
        case TheoremId::T2: return "T2";
        case TheoremId::T3: return "T3";
        case TheoremId::T4: return "T4";
        case TheoremId::L1: return "L1";
    }
    return "?";
}

inline constexpr double kCertAbsTol = 1e-9;
inline constexpr double kCertRelTol = 1e-7;

/// Outcome of checking one bound against observed iterate behaviour.
/// holds <=> worst_observed <= bound + tolerance. Bounds always come from the
/// formulas, never from tuning.
struct Certificate {
    TheoremId theorem_id = TheoremId::T1;
    bool holds = false;
    double worst_observed = std::numeric_limits<double>::quiet_NaN();
    double bound = std::numeric_limits<double>::quiet_NaN();
    long iterations = 0;
    std::string map_name;
    std::uint64_t seed = 0;
    std::optional<InversionTrace> trace_ref;

    // T2 diagnostics: largest observed step ratio while outside the ball, and
    // the contraction factor the proof implies for it.
    double worst_step_ratio = std::numeric_limits<double>::quiet_NaN();
    double alpha_implied = std::numeric_limits<double>::quiet_NaN();
};

inline bool certificate_within(double observed, double bound) {
    return observed <= bound + kCertAbsTol + kCertRelTol * std::abs(bound);
}

/// Secant statistics of a 1-D map over [domain_lo, domain_hi] sampled at
/// `grid` uniform points. Throws NotMonotone when adjacent secants change
/// sign or vanish.
inline SlopeStats estimate_slopes(const ForwardMap& map, double domain_lo, double domain_hi,
                                  int grid = 2001) {
    if (map.in_dim != 1 || map.out_dim != 1)
        throw InvalidInput("estimate_slopes: map must be 1-D");
    if (grid < 3) throw InvalidInput("estimate_slopes: grid must be >= 3");
    if (!(domain_lo < domain_hi))
        throw InvalidInput("estimate_slopes: domain_lo must be < domain_hi");

    std::vector<double> f(grid);
    const double dx = (domain_hi - domain_lo) / (grid - 1);
    for (int i = 0; i < grid; ++i) f[i] = map.eval_scalar(domain_lo + i * dx);

    SlopeStats st;
    double smin = std::numeric_limits<double>::infinity();
    double smax = 0.0;
    int sign = 0;
    for (int i = 0; i + 1 < grid; ++i) {
        const double s = (f[i + 1] - f[i]) / dx;
        const int ssign = s > 0.0 ? 1 : (s < 0.0 ? -1 : 0);
        if (ssign == 0)
            throw NotMonotone("estimate_slopes: zero secant slope (not strictly monotone)");
        if (sign == 0) sign = ssign;
        if (ssign != sign)
            throw NotMonotone("estimate_slopes: secant slopes change sign");
        smin = std::min(smin, std::abs(s));
        smax = std::max(smax, std::abs(s));
    }
    st.s_min = smin;
    st.s_max = smax;
    st.monotone_increasing = sign > 0;
    st.slope_ratio = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    st.epsilon_defined = st.slope_ratio <= 2.0;
    st.epsilon = st.epsilon_defined ? 2.0 - st.slope_ratio : 0.0;
    return st;
}

/// One-iteration convergence on random full-rank linear maps. Initial inputs
/// whose centered output matrix is ill-conditioned (> 1e6) are redrawn, which
/// enforces the rank precondition.
inline Certificate certify_linear_oneshot(int dim, int trials, RngStream& rng) {
    if (dim < 1) throw InvalidInput("certify_linear_oneshot: dim must be >= 1");
    if (trials < 1) throw InvalidInput("certify_linear_oneshot: trials must be >= 1");

    Certificate cert;
    cert.theorem_id = TheoremId::T1;
    cert.bound = 1e-8;  // relative residual after one iteration
    cert.map_name = "linear-" + std::to_string(dim) + "d";
    cert.seed = rng.seed();
    cert.worst_observed = 0.0;

    const Eigen::Index m = dim + 2;
    for (int trial = 0; trial < trials; ++trial) {
        // Full-rank linear map; redraw badly conditioned coefficient draws.
        Matrix coeffs(dim, dim);
        do {
            for (Eigen::Index i = 0; i < dim; ++i)
                coeffs.row(i) = gaussian_vector(rng, dim, 1.0).transpose();
        } while (condition_number(coeffs) > 1e3);
        const Vector offset = gaussian_vector(rng, dim, 1.0);
        const ForwardMap map = make_linear_map(coeffs, offset, cert.map_name);

        Matrix y(m, dim);
        for (Eigen::Index i = 0; i < m; ++i)
            y.row(i) = gaussian_vector(rng, dim, 2.0).transpose();

        InversionProblem problem;
        problem.map = map;
        problem.desired_outputs = y;
        problem.max_iterations = 1;
        problem.residual_target = 1e-300;

        // Redraw X^0 until the centered outputs are well conditioned.
        double initial_residual = 0.0;
        InversionState s0;
        for (int attempt = 0; attempt < 100; ++attempt) {
            Matrix x0(m, dim);
            for (Eigen::Index i = 0; i < m; ++i)
                x0.row(i) = gaussian_vector(rng, dim, 2.0).transpose();
            problem.initial_inputs = x0;
            s0 = make_initial_state(problem);
            const Matrix oc = s0.outputs.rowwise() - s0.outputs.colwise().mean();
            if (condition_number(oc) <= 1e6 && s0.mean_residual > 1e-8) break;
        }
        initial_residual = s0.mean_residual;

        const InversionState s1 = iterate_once(s0, problem);
        const double rel = s1.mean_residual / initial_residual;
        if (rel > cert.worst_observed || !cert.trace_ref) {
            cert.worst_observed = std::max(cert.worst_observed, rel);
            InversionTrace tr;
            tr.states = {s0, s1};
            tr.converged = true;
            tr.total_map_evaluations = 2 * m;
            cert.trace_ref = std::move(tr);
        }
        cert.iterations += 1;
    }
    cert.holds = certificate_within(cert.worst_observed, cert.bound);
    return cert;
}

namespace detail {

/// Per-iteration, per-point contraction factors |F(x_i^{n+1}) - y_i| /
/// |F(x_i^n) - y_i| along a trace. Factors whose previous residual is below
/// the floor are skipped (the division is numerical noise there).
inline std::vector<double> contraction_factors(const InversionTrace& trace,
                                               double residual_floor = 1e-13) {
    std::vector<double> factors;
    for (std::size_t n = 0; n + 1 < trace.states.size(); ++n) {
        const Vector& prev = trace.states[n].per_point_residuals;
        const Vector& next = trace.states[n + 1].per_point_residuals;
        for (Eigen::Index i = 0; i < prev.size(); ++i)
            if (prev(i) > residual_floor) factors.push_back(next(i) / prev(i));
    }
    return factors;
}

}  // namespace detail

/// Two-point (M = 2) contraction run; no bound asserted, caller inspects.
inline InversionTrace run_two_point(const ForwardMap& map, const std::array<double, 2>& y,
                                    const std::array<double, 2>& x0, int iterations,
                                    double residual_target = 1e-12) {
    InversionProblem problem;
    problem.map = map;
    problem.desired_outputs = Matrix(2, 1);
    problem.desired_outputs << y[0], y[1];
    problem.initial_inputs = Matrix(2, 1);
    problem.initial_inputs << x0[0], x0[1];
    problem.max_iterations = iterations;
    problem.residual_target = residual_target;
    return run_inversion(problem);
}

/// Two desired outputs: every per-iteration, per-point contraction factor must
/// be <= 1 - epsilon.
inline Certificate certify_two_point_contraction(const ForwardMap& map, const SlopeStats& stats,
                                                 const std::array<double, 2>& y,
                                                 const std::array<double, 2>& x0,
                                                 int iterations) {
    if (!stats.epsilon_defined || !(stats.epsilon > 0.0))
        throw PreconditionFailed("certify_two_point_contraction: epsilon undefined or <= 0");
    if (x0[0] == x0[1])
        throw InvalidInput("certify_two_point_contraction: x0 points must be distinct");

    Certificate cert;
    cert.theorem_id = TheoremId::T3;
    cert.bound = 1.0 - stats.epsilon;
    cert.map_name = map.name;

    InversionTrace trace = run_two_point(map, y, x0, iterations);
    const std::vector<double> factors = detail::contraction_factors(trace);
    cert.worst_observed = factors.empty() ? 0.0 : *std::max_element(factors.begin(), factors.end());
    cert.iterations = static_cast<long>(trace.states.size()) - 1;
    cert.holds = certificate_within(cert.worst_observed, cert.bound);
    cert.trace_ref = std::move(trace);
    return cert;
}

/// Root of F(x) = y for a strictly monotone 1-D map, located by bracket
/// expansion and bisection to 1e-12.
inline double monotone_inverse(const ForwardMap& map, double y, double x_hint = 0.0) {
    if (map.in_dim != 1 || map.out_dim != 1)
        throw InvalidInput("monotone_inverse: map must be 1-D");
    double lo = x_hint - 1.0, hi = x_hint + 1.0;
    double flo = map.eval_scalar(lo) - y, fhi = map.eval_scalar(hi) - y;
    int expansions = 0;
    while (flo * fhi > 0.0) {
        const double width = hi - lo;
        lo -= width;
        hi += width;
        flo = map.eval_scalar(lo) - y;
        fhi = map.eval_scalar(hi) - y;
        if (++expansions > 200)
            throw PreconditionFailed("monotone_inverse: could not bracket the root");
    }
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = map.eval_scalar(mid) - y;
        if (fmid == 0.0) return mid;
        if ((fmid > 0.0) == (fhi > 0.0)) {
            hi = mid;
            fhi = fmid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Mean-distance contraction toward F^{-1}(mean Y) while all inputs stay
/// strictly on one side of it. Checking stops (but iteration continues) after
/// the inputs first straddle the root.
inline Certificate certify_mean_contraction(const ForwardMap& map, const SlopeStats& stats,
                                            const Vector& y, const Vector& x0, int iterations) {
    if (!stats.epsilon_defined || !(stats.epsilon > 0.0))
        throw PreconditionFailed("certify_mean_contraction: epsilon undefined or <= 0");
    if (x0.size() < 2) throw InvalidInput("certify_mean_contraction: need M >= 2");
    if (y.size() != x0.size())
        throw InvalidInput("certify_mean_contraction: y/x0 size mismatch");

    const double x_star = monotone_inverse(map, y.mean(), x0.mean());
    const bool all_below = (x0.array() < x_star).all();
    const bool all_above = (x0.array() > x_star).all();
    if (!all_below && !all_above)
        throw PreconditionFailed(
            "certify_mean_contraction: initial inputs must lie strictly on one side of "
            "F^{-1}(mean Y)");

    InversionProblem problem;
    problem.map = map;
    problem.desired_outputs = y;
    problem.initial_inputs = x0;
    problem.max_iterations = iterations;
    problem.residual_target = 1e-12;
    InversionTrace trace = run_inversion(problem);

    Certificate cert;
    cert.theorem_id = TheoremId::T4;
    cert.bound = 1.0 - stats.epsilon;
    cert.map_name = map.name;
    cert.worst_observed = 0.0;
    cert.iterations = static_cast<long>(trace.states.size()) - 1;

    bool checking = true;
    for (std::size_t n = 0; n + 1 < trace.states.size() && checking; ++n) {
        const auto& xs = trace.states[n].inputs;
        const bool one_sided =
            (xs.array() < x_star).all() || (xs.array() > x_star).all();
        if (!one_sided) {
            checking = false;  // straddled: the one-sided hypothesis no longer holds
            break;
        }
        const double prev = std::abs(trace.states[n].inputs.mean() - x_star);
        const double next = std::abs(trace.states[n + 1].inputs.mean() - x_star);
        if (prev > 1e-12 * std::max(1.0, std::abs(x_star)))
            cert.worst_observed = std::max(cert.worst_observed, next / prev);
    }
    cert.holds = certificate_within(cert.worst_observed, cert.bound);
    cert.trace_ref = std::move(trace);
    return cert;
}

/// Every fitted slope of a 1-D trace must lie in [1/s_max, 1/s_min]
/// (interval reversed and negated for strictly decreasing maps).
/// worst_observed is the largest distance outside the interval, bound 0.
inline Certificate certify_theta_bounds(const InversionTrace& trace, const SlopeStats& stats) {
    Certificate cert;
    cert.theorem_id = TheoremId::L1;
    cert.bound = 0.0;
    cert.worst_observed = 0.0;
    cert.iterations = static_cast<long>(trace.states.size());

    double lo, hi;
    if (stats.monotone_increasing) {
        lo = 1.0 / stats.s_max;
        hi = 1.0 / stats.s_min;
    } else {
        lo = -1.0 / stats.s_min;
        hi = -1.0 / stats.s_max;
    }
    for (const InversionState& s : trace.states) {
        if (!s.fit) continue;
        if (s.fit->theta.rows() != 1 || s.fit->theta.cols() != 1)
            throw InvalidInput("certify_theta_bounds: trace is not 1-D");
        const double theta = s.fit->theta(0, 0);
        cert.worst_observed =
            std::max({cert.worst_observed, lo - theta, theta - hi});
    }
    cert.holds = certificate_within(cert.worst_observed, cert.bound);
    return cert;
}

/// Central-difference Jacobian in row convention (entry (i, j) = dF_j / dx_i).
inline Matrix fd_jacobian(const ForwardMap& map, const Vector& x, double h = 1e-6) {
    Matrix jac(map.in_dim, map.out_dim);
    for (Eigen::Index i = 0; i < map.in_dim; ++i) {
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        jac.row(i) = ((map.eval(xp) - map.eval(xm)) / (2.0 * h)).transpose();
    }
    return jac;
}

/// Estimates the assumption constants on a box via finite-difference
/// Jacobians over a per-axis grid. gamma is bounded through the entrywise
/// Jacobian ranges (exact in 1-D). lambda and delta are measured along the
/// supplied iterate clouds; with none supplied, a deterministic lattice of
/// small clouds inside the box is used.
inline AssumptionBounds estimate_assumption_bounds(
    const ForwardMap& map, const Vector& region_lo, const Vector& region_hi, int grid,
    const std::vector<Matrix>& iterate_clouds = {}) {
    const Eigen::Index k = map.in_dim;
    if (map.out_dim != k)
        throw InvalidInput("estimate_assumption_bounds: map must be square (in_dim == out_dim)");
    if (region_lo.size() != k || region_hi.size() != k)
        throw InvalidInput("estimate_assumption_bounds: region dimension mismatch");
    if (grid < 1) throw InvalidInput("estimate_assumption_bounds: grid must be >= 1");
    for (Eigen::Index i = 0; i < k; ++i)
        if (!(region_lo(i) <= region_hi(i)))
            throw InvalidInput("estimate_assumption_bounds: empty box");

    AssumptionBounds b;
    b.single_sample_warning = grid == 1;

    // Grid sweep for zeta, beta and per-entry Jacobian ranges.
    long total = 1;
    for (Eigen::Index i = 0; i < k; ++i) total *= grid;
    if (total > 2'000'000)
        throw InvalidInput("estimate_assumption_bounds: grid too dense for dimension");

    Matrix entry_min = Matrix::Constant(k, k, std::numeric_limits<double>::infinity());
    Matrix entry_max = Matrix::Constant(k, k, -std::numeric_limits<double>::infinity());
    for (long idx = 0; idx < total; ++idx) {
        Vector x(k);
        long rem = idx;
        for (Eigen::Index i = 0; i < k; ++i) {
            const int gi = static_cast<int>(rem % grid);
            rem /= grid;
            x(i) = grid == 1 ? 0.5 * (region_lo(i) + region_hi(i))
                             : region_lo(i) + gi * (region_hi(i) - region_lo(i)) / (grid - 1);
        }
        const Matrix jac = fd_jacobian(map, x);
        b.zeta = std::max(b.zeta, spectral_norm(jac));
        const double smin = min_singular_value(jac);
        if (smin <= 1e-14)
            throw SingularJacobian("estimate_assumption_bounds: singular Jacobian on grid");
        b.beta = std::max(b.beta, 1.0 / smin);
        entry_min = entry_min.cwiseMin(jac);
        entry_max = entry_max.cwiseMax(jac);
    }
    // ||J(x1) - J(x2)|| <= || range matrix || for entrywise-bounded differences.
    b.gamma = spectral_norm(entry_max - entry_min);

    // lambda and delta along iterate clouds.
    std::vector<Matrix> clouds = iterate_clouds;
    if (clouds.empty()) {
        const int n_clouds = 8;
        const Eigen::Index m = k + 2;
        for (int c = 0; c < n_clouds; ++c) {
            const double frac = (c + 0.5) / n_clouds;
            Vector center = region_lo + frac * (region_hi - region_lo);
            Matrix cloud(m, k);
            for (Eigen::Index r = 0; r < m; ++r) {
                Vector p = center;
                for (Eigen::Index i = 0; i < k; ++i) {
                    const double off = 0.05 * (region_hi(i) - region_lo(i));
                    p(i) += off * (((r + i) % 3) - 1);
                }
                cloud.row(r) = p.transpose();
            }
            clouds.push_back(std::move(cloud));
        }
    }
    for (const Matrix& cloud : clouds) {
        const Matrix outs = map.eval_rows(cloud);
        const Vector x_bar = cloud.colwise().mean().transpose();
        const Vector f_of_mean = map.eval(x_bar);
        const Vector mean_of_f = outs.colwise().mean().transpose();
        b.lambda = std::max(b.lambda, (mean_of_f - f_of_mean).norm());
        if (detail::outputs_degenerate(outs)) continue;
        const Matrix j_est_inv = estimate_inverse_jacobian(cloud, outs);
        const Matrix jac = fd_jacobian(map, x_bar);
        const Matrix delta_mat = jac * j_est_inv - Matrix::Identity(k, k);
        b.delta = std::max(b.delta, spectral_norm(delta_mat));
    }
    b.derive();
    return b;
}

/// Residual-ball certificate (T2): with the estimated constants satisfying
/// the contraction precondition, some iterate's mean residual must enter the
/// ball of radius rho (+ tolerance). Also records the largest step-size ratio
/// observed while outside the ball against the implied contraction factor.
inline Certificate certify_multidim_ball(const ForwardMap& map, const AssumptionBounds& bounds,
                                         const InversionProblem& problem,
                                         double ball_tolerance = 1e-6) {
    if (!bounds.contraction_precondition())
        throw PreconditionFailed(
            "certify_multidim_ball: beta (1+delta)(gamma+mu) < 1 and delta < 1/(zeta beta) "
            "must hold");

    Certificate cert;
    cert.theorem_id = TheoremId::T2;
    cert.map_name = map.name;
    cert.bound = bounds.rho + ball_tolerance;

    InversionTrace trace = run_inversion(problem);
    double best = std::numeric_limits<double>::infinity();
    for (const InversionState& s : trace.states) best = std::min(best, s.mean_residual);
    cert.worst_observed = best;
    cert.iterations = static_cast<long>(trace.states.size()) - 1;
    cert.holds = certificate_within(best, cert.bound);

    // g(rho + eps) from the proof; step ratios outside the ball should stay
    // below it.
    const double g_arg = bounds.rho + ball_tolerance;
    cert.alpha_implied =
        bounds.beta * (1.0 + bounds.delta) *
        (2.0 * bounds.lambda * (bounds.mu + bounds.zeta) / std::max(g_arg, 1e-300) +
         bounds.gamma + bounds.mu);
    double worst_ratio = 0.0;
    for (std::size_t n = 0; n + 2 < trace.states.size(); ++n) {
        if (trace.states[n].mean_residual < g_arg) continue;
        const double step0 = (trace.states[n + 1].inputs.colwise().mean() -
                              trace.states[n].inputs.colwise().mean())
                                 .norm();
        const double step1 = (trace.states[n + 2].inputs.colwise().mean() -
                              trace.states[n + 1].inputs.colwise().mean())
                                 .norm();
        if (step0 > 1e-13) worst_ratio = std::max(worst_ratio, step1 / step0);
    }
    cert.worst_step_ratio = worst_ratio;
    cert.trace_ref = std::move(trace);
    return cert;
}

/// Certificate report rows: theorem_id, holds, bound, worst_observed,
/// iterations, map_name, seed.
inline void write_certificates_csv(const std::vector<Certificate>& certs, std::ostream& os) {
    os << "theorem_id,holds,bound,worst_observed,iterations,map_name,seed\n";
    for (const Certificate& c : certs) {
        os << theorem_name(c.theorem_id) << ',' << (c.holds ? 1 : 0) << ','
           << csv::num(c.bound) << ',' << csv::num(c.worst_observed) << ',' << c.iterations
           << ',' << csv::field(c.map_name) << ',' << c.seed << '\n';
    }
}

}  // namespace itin
