#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "itin/csv.hpp"
#include "itin/numkit.hpp"

namespace itin {

/// Black-box forward map F: R^in -> R^out, queried only pointwise.
/// eval must be deterministic and return finite values for finite inputs.
struct ForwardMap {
    Eigen::Index in_dim = 0;
    Eigen::Index out_dim = 0;
    std::function<Vector(const Vector&)> eval;
    std::string name = "map";

    /// Evaluate every row of a sample matrix.
    Matrix eval_rows(const Matrix& xs) const {
        Matrix out(xs.rows(), out_dim);
        for (Eigen::Index r = 0; r < xs.rows(); ++r) {
            Vector y = eval(xs.row(r).transpose());
            if (y.size() != out_dim)
                throw InvalidInput("ForwardMap: eval returned wrong dimension");
            out.row(r) = y.transpose();
        }
        if (!out.allFinite())
            throw InvalidInput("ForwardMap: eval returned non-finite values");
        return out;
    }

    double eval_scalar(double x) const {
        Vector v(1);
        v(0) = x;
        return eval(v)(0);
    }
};

inline ForwardMap make_scalar_map(std::string name, std::function<double(double)> f) {
    ForwardMap m;
    m.in_dim = 1;
    m.out_dim = 1;
    m.name = std::move(name);
    m.eval = [fn = std::move(f)](const Vector& x) {
        Vector y(1);
        y(0) = fn(x(0));
        return y;
    };
    return m;
}

/// Linear map in row convention: F(x) = x * coeffs + offset,
/// coeffs is in_dim x out_dim.
inline ForwardMap make_linear_map(Matrix coeffs, Vector offset, std::string name = "linear") {
    ForwardMap m;
    m.in_dim = coeffs.rows();
    m.out_dim = coeffs.cols();
    m.name = std::move(name);
    m.eval = [A = std::move(coeffs), h = std::move(offset)](const Vector& x) -> Vector {
        return A.transpose() * x + h;
    };
    return m;
}

struct InversionProblem {
    ForwardMap map;
    Matrix desired_outputs;  // M x out_dim  (Y)
    Matrix initial_inputs;   // M x in_dim   (X^0)
    int max_iterations = 100;
    double residual_target = 1e-10;
    double ridge = 0.0;  // exact least squares by default; control callers pass their own

    Eigen::Index sample_count() const { return desired_outputs.rows(); }

    void validate() const {
        if (!map.eval) throw InvalidInput("InversionProblem: map.eval not set");
        if (desired_outputs.rows() < 2)
            throw InvalidInput("InversionProblem: need M >= 2 desired outputs "
                               "(the regression needs variance)");
        if (initial_inputs.rows() != desired_outputs.rows())
            throw InvalidInput("InversionProblem: X^0 / Y row mismatch");
        if (initial_inputs.cols() != map.in_dim || desired_outputs.cols() != map.out_dim)
            throw InvalidInput("InversionProblem: dimension mismatch with map");
        if (!initial_inputs.allFinite() || !desired_outputs.allFinite())
            throw InvalidInput("InversionProblem: non-finite entries");
        if (!(residual_target > 0.0))
            throw InvalidInput("InversionProblem: residual_target must be > 0");
        if (max_iterations < 0)
            throw InvalidInput("InversionProblem: max_iterations must be >= 0");
        if (!(ridge >= 0.0))
            throw InvalidInput("InversionProblem: ridge must be >= 0");
    }
};

/// One snapshot of the iteration: inputs X^n, their images F(X^n), the
/// regression fitted on them (empty when the outputs have no variance), and
/// the residuals against the desired outputs.
struct InversionState {
    int iteration = 0;
    Matrix inputs;
    Matrix outputs;
    std::optional<AffineFit> fit;  // regression F(X^n) -> X^n
    double mean_residual = 0.0;    // || mean(F(X^n)) - mean(Y) ||_2
    Vector per_point_residuals;    // ||F(x_i^n) - y_i||_2
};

struct InversionTrace {
    std::vector<InversionState> states;
    bool converged = false;
    long total_map_evaluations = 0;
};

/// Raised when an iteration cannot proceed because the regression is
/// undefined (all current outputs identical). Carries the offending state and,
/// from run_inversion, the partial trace accumulated so far.
struct DegenerateIteration : std::runtime_error {
    DegenerateIteration(const std::string& what, InversionState offending,
                        InversionTrace partial = {})
        : std::runtime_error(what),
          state(std::move(offending)),
          partial_trace(std::move(partial)) {}

    InversionState state;
    InversionTrace partial_trace;
};

namespace detail {

inline bool outputs_degenerate(const Matrix& outputs) {
    const Eigen::RowVectorXd mean = outputs.colwise().mean();
    const double centered = (outputs.rowwise() - mean).norm();
    return centered <= 1e-12 * std::max(1.0, outputs.norm());
}

}  // namespace detail

/// Builds the state for given inputs: evaluates the map, computes residuals,
/// and fits the outputs->inputs regression (left empty when degenerate).
inline InversionState make_state(int iteration, Matrix inputs, const InversionProblem& problem) {
    InversionState s;
    s.iteration = iteration;
    s.inputs = std::move(inputs);
    s.outputs = problem.map.eval_rows(s.inputs);

    const Eigen::RowVectorXd out_mean = s.outputs.colwise().mean();
    const Eigen::RowVectorXd y_mean = problem.desired_outputs.colwise().mean();
    s.mean_residual = (out_mean - y_mean).norm();
    s.per_point_residuals = (s.outputs - problem.desired_outputs).rowwise().norm();

    if (!detail::outputs_degenerate(s.outputs))
        s.fit = affine_least_squares(s.outputs, s.inputs, problem.ridge);
    return s;
}

inline InversionState make_initial_state(const InversionProblem& problem) {
    problem.validate();
    return make_state(0, problem.initial_inputs, problem);
}

/// One step of iterative inversion: apply the state's regression to the
/// desired outputs to get X^{n+1}, then evaluate the map there.
inline InversionState iterate_once(const InversionState& state, const InversionProblem& problem) {
    if (!state.fit)
        throw DegenerateIteration(
            "iterate_once: current outputs have zero variance, regression undefined", state);
    Matrix next_inputs = state.fit->apply_rows(problem.desired_outputs);
    return make_state(state.iteration + 1, std::move(next_inputs), problem);
}

/// Runs iterative inversion until mean_residual <= residual_target or
/// max_iterations is reached; the trace records every state including X^0.
inline InversionTrace run_inversion(const InversionProblem& problem) {
    InversionTrace trace;
    trace.states.push_back(make_initial_state(problem));
    while (trace.states.back().mean_residual > problem.residual_target &&
           trace.states.back().iteration < problem.max_iterations) {
        try {
            trace.states.push_back(iterate_once(trace.states.back(), problem));
        } catch (DegenerateIteration& e) {
            trace.total_map_evaluations =
                problem.sample_count() * static_cast<long>(trace.states.size());
            throw DegenerateIteration(e.what(), e.state, std::move(trace));
        }
    }
    trace.converged = trace.states.back().mean_residual <= problem.residual_target;
    trace.total_map_evaluations =
        problem.sample_count() * static_cast<long>(trace.states.size());
    return trace;
}

/// Empirical inverse Jacobian (outputs - mean)^+ (inputs - mean): the slope of
/// the regression plane from outputs back to inputs.
inline Matrix estimate_inverse_jacobian(const Matrix& inputs, const Matrix& outputs) {
    if (inputs.rows() < 2 || outputs.rows() != inputs.rows())
        throw InvalidInput("estimate_inverse_jacobian: need >= 2 consistent rows");
    if (detail::outputs_degenerate(outputs)) {
        InversionState s;
        s.inputs = inputs;
        s.outputs = outputs;
        throw DegenerateIteration("estimate_inverse_jacobian: zero output variance", s);
    }
    const Matrix oc = outputs.rowwise() - outputs.colwise().mean();
    const Matrix ic = inputs.rowwise() - inputs.colwise().mean();
    return pseudo_inverse(oc) * ic;
}

/// Classical Newton update x + (y - F(x)) J^{-1} in row convention, for
/// comparison against the mean behaviour of iterate_once.
inline Vector newton_step(const ForwardMap& map, const Vector& x, const Vector& y_target,
                          const Matrix& jacobian,
                          double rank_tolerance = kDefaultRankTolerance) {
    if (jacobian.rows() != jacobian.cols())
        throw InvalidInput("newton_step: jacobian must be square");
    Eigen::JacobiSVD<Matrix> svd(jacobian, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    if (sv.size() == 0 || sv(sv.size() - 1) <= rank_tolerance * sv(0))
        throw SingularJacobian("newton_step: jacobian singular at rank tolerance");
    const Matrix inv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
    const Vector residual = y_target - map.eval(x);
    return x + inv.transpose() * residual;
}

/// Trace export: iteration, mean residual, per-point residual extremes, and
/// the Frobenius norm of the fitted slope.
inline void write_trace_csv(const InversionTrace& trace, std::ostream& os) {
    os << "iteration,mean_residual,per_point_residual_max,per_point_residual_mean,"
          "theta_frobenius_norm\n";
    for (const InversionState& s : trace.states) {
        const double theta_norm =
            s.fit ? s.fit->theta.norm() : std::numeric_limits<double>::quiet_NaN();
        os << s.iteration << ',' << csv::num(s.mean_residual) << ','
           << csv::num(s.per_point_residuals.size() ? s.per_point_residuals.maxCoeff() : 0.0)
           << ','
           << csv::num(s.per_point_residuals.size() ? s.per_point_residuals.mean() : 0.0)
           << ',' << csv::num(theta_norm) << '\n';
    }
}

}  // namespace itin
