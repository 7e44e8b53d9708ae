#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "itin/csv.hpp"
#include "itin/errors.hpp"
#include "itin/rng.hpp"

namespace itin {

struct ParticleState {
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;

    bool operator==(const ParticleState&) const = default;
};

struct Action {
    double fx = 0.0;
    double fy = 0.0;

    bool operator==(const Action&) const = default;
};

/// Unit-mass point on a finite frictionless plane [0, c_max]^2. Trajectories
/// all start at position (0, 0) with zero velocity.
struct EnvConfig {
    int horizon = 32;      // T
    double dt = 0.1;
    double c_max = 6.4;    // plane bound; default scales as horizon * dt * 2
    double f_clip = 16.0;  // per-component force magnitude limit

    static EnvConfig make(int horizon, double dt = 0.1) {
        EnvConfig cfg;
        cfg.horizon = horizon;
        cfg.dt = dt;
        cfg.c_max = horizon * dt * 2.0;
        return cfg;
    }

    void validate() const {
        if (horizon < 1) throw InvalidInput("EnvConfig: horizon must be >= 1");
        if (!(dt > 0.0)) throw InvalidInput("EnvConfig: dt must be > 0");
        if (!(c_max > 0.0)) throw InvalidInput("EnvConfig: c_max must be > 0");
        if (!(f_clip > 0.0)) throw InvalidInput("EnvConfig: f_clip must be > 0");
    }
};

/// T+1 states and the T actions that produced them. Replaying the actions from
/// states[0] through step() reproduces the states bit-for-bit.
struct Trajectory {
    std::vector<ParticleState> states;  // length T+1
    std::vector<Action> actions;        // length T

    int horizon() const { return static_cast<int>(actions.size()); }
};

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

/// Semi-implicit Euler with unit mass: clamp the force, update velocity, then
/// position; positions are clamped to the plane with the velocity component
/// zeroed on any clamped axis.
inline ParticleState step(const ParticleState& s, const Action& a, const EnvConfig& cfg) {
    const double fx = clamp(a.fx, -cfg.f_clip, cfg.f_clip);
    const double fy = clamp(a.fy, -cfg.f_clip, cfg.f_clip);
    ParticleState n;
    n.vx = s.vx + fx * cfg.dt;
    n.vy = s.vy + fy * cfg.dt;
    n.x = s.x + n.vx * cfg.dt;
    n.y = s.y + n.vy * cfg.dt;
    const double cx = clamp(n.x, 0.0, cfg.c_max);
    const double cy = clamp(n.y, 0.0, cfg.c_max);
    if (cx != n.x) {
        n.x = cx;
        n.vx = 0.0;
    }
    if (cy != n.y) {
        n.y = cy;
        n.vy = 0.0;
    }
    return n;
}

inline ParticleState initial_state() { return ParticleState{}; }

/// Executes a recorded action sequence from the fixed initial state.
inline Trajectory replay_actions(const std::vector<Action>& actions, const EnvConfig& cfg) {
    Trajectory tr;
    tr.states.reserve(actions.size() + 1);
    tr.states.push_back(initial_state());
    for (const Action& a : actions) {
        tr.states.push_back(step(tr.states.back(), a, cfg));
    }
    tr.actions = actions;
    return tr;
}

/// Sum over time of Euclidean position distance between two trajectories.
inline double trajectory_mse(const Trajectory& a, const Trajectory& b) {
    if (a.states.size() != b.states.size())
        throw InvalidInput("trajectory_mse: horizon mismatch");
    double total = 0.0;
    for (std::size_t t = 0; t < a.states.size(); ++t) {
        const double dx = a.states[t].x - b.states[t].x;
        const double dy = a.states[t].y - b.states[t].y;
        total += std::sqrt(dx * dx + dy * dy);
    }
    return total;
}

/// Clamped uniform-knot B-spline point by de Boor's algorithm, u in [0, 1].
/// The curve interpolates the first and last control points.
inline Eigen::Vector2d bspline_point(const std::vector<Eigen::Vector2d>& ctrl, int degree,
                                     double u) {
    const int n = static_cast<int>(ctrl.size());
    if (n < degree + 1) throw InvalidInput("bspline_point: need at least degree+1 control points");
    const int segments = n - degree;  // interior spans of the clamped knot vector
    auto knot = [&](int i) -> double {
        return static_cast<double>(std::clamp(i - degree, 0, segments)) / segments;
    };
    u = clamp(u, 0.0, 1.0);
    // Span index s with knot(s) <= u < knot(s+1); the last span is closed.
    int s = degree;
    while (s < degree + segments - 1 && u >= knot(s + 1)) ++s;

    std::vector<Eigen::Vector2d> d(ctrl.begin() + (s - degree), ctrl.begin() + (s + 1));
    for (int r = 1; r <= degree; ++r) {
        for (int j = degree; j >= r; --j) {
            const int i = s - degree + j;
            const double denom = knot(i + degree + 1 - r) - knot(i);
            const double alpha = denom > 0.0 ? (u - knot(i)) / denom : 0.0;
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
        }
    }
    return d[degree];
}

/// Generation counters; rejected trajectories are resampled.
struct GenStats {
    long attempts = 0;
    long rejected_force = 0;
    long rejected_bounds = 0;
};

namespace detail {

/// Builds the trajectory whose positions track the planned sequence: the
/// velocity entering position t+1 is the forward difference at t, the initial
/// velocity is zero, and actions invert the integrator. States are then
/// regenerated by stepping the actions so replay is exact by construction.
/// Returns false when a reconstructed action exceeds f_clip or a planned
/// position leaves the plane (the boundary clamp would corrupt the shape).
inline bool trajectory_from_positions(const std::vector<Eigen::Vector2d>& positions,
                                      const EnvConfig& cfg, Trajectory& out, GenStats* stats) {
    const int t_count = static_cast<int>(positions.size()) - 1;  // T
    std::vector<Eigen::Vector2d> vel(t_count + 1);
    vel[0] = Eigen::Vector2d::Zero();
    for (int t = 0; t < t_count; ++t) vel[t + 1] = (positions[t + 1] - positions[t]) / cfg.dt;

    std::vector<Action> actions(t_count);
    for (int t = 0; t < t_count; ++t) {
        const Eigen::Vector2d a = (vel[t + 1] - vel[t]) / cfg.dt;
        if (std::abs(a.x()) > cfg.f_clip || std::abs(a.y()) > cfg.f_clip) {
            if (stats) ++stats->rejected_force;
            return false;
        }
        actions[t] = Action{a.x(), a.y()};
    }
    const double margin = 1e-9;
    for (int t = 0; t <= t_count; ++t) {
        const Eigen::Vector2d& p = positions[t];
        const bool at_origin = t == 0;
        if ((!at_origin && (p.x() < margin || p.y() < margin)) || p.x() < 0.0 || p.y() < 0.0 ||
            p.x() > cfg.c_max - margin || p.y() > cfg.c_max - margin) {
            if (stats) ++stats->rejected_bounds;
            return false;
        }
    }
    out = replay_actions(actions, cfg);
    return true;
}

}  // namespace detail

/// Degree-2 B-spline trajectories: 5 control points uniform in [0, c_max]^2,
/// shifted so the curve starts at the fixed initial position (0, 0), sampled
/// at T+1 uniform parameters. Trajectories whose reconstructed forces exceed
/// f_clip or whose path leaves the plane are rejected and resampled.
inline std::vector<Trajectory> gen_spline_dataset(int count, const EnvConfig& cfg, RngStream& rng,
                                                  GenStats* stats = nullptr) {
    if (count < 1) throw InvalidInput("gen_spline_dataset: count must be >= 1");
    cfg.validate();
    constexpr int kDegree = 2;
    constexpr int kControlPoints = 5;

    std::vector<Trajectory> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        RngStream traj_rng = rng.substream(static_cast<std::uint64_t>(i));
        Trajectory tr;
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 100000)
                throw InvalidInput("gen_spline_dataset: rejection sampling not converging; "
                                   "relax f_clip or c_max");
            if (stats) ++stats->attempts;
            std::vector<Eigen::Vector2d> ctrl(kControlPoints);
            for (auto& p : ctrl)
                p = {traj_rng.uniform_in(0.0, cfg.c_max), traj_rng.uniform_in(0.0, cfg.c_max)};
            const Eigen::Vector2d shift = ctrl.front();
            for (auto& p : ctrl) p -= shift;

            std::vector<Eigen::Vector2d> positions(cfg.horizon + 1);
            for (int t = 0; t <= cfg.horizon; ++t)
                positions[t] = bspline_point(ctrl, kDegree, static_cast<double>(t) / cfg.horizon);
            if (detail::trajectory_from_positions(positions, cfg, tr, stats)) break;
        }
        out.push_back(std::move(tr));
    }
    return out;
}

/// Random forces for the first t_acc steps, then deceleration: each later
/// force is -v/(2 dt), which exactly halves the velocity per step under the
/// semi-implicit integrator (up to force clamping and wall contact).
inline std::vector<Trajectory> gen_deceleration_dataset(int count, const EnvConfig& cfg,
                                                        int t_acc, RngStream& rng,
                                                        double f_acc = -1.0,
                                                        GenStats* stats = nullptr) {
    if (count < 1) throw InvalidInput("gen_deceleration_dataset: count must be >= 1");
    cfg.validate();
    if (t_acc < 1 || t_acc >= cfg.horizon)
        throw InvalidInput("gen_deceleration_dataset: need 1 <= t_acc < horizon");
    if (f_acc < 0.0) f_acc = cfg.f_clip / 4.0;

    std::vector<Trajectory> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        RngStream traj_rng = rng.substream(static_cast<std::uint64_t>(i));
        if (stats) ++stats->attempts;
        Trajectory tr;
        tr.states.push_back(initial_state());
        for (int t = 0; t < cfg.horizon; ++t) {
            Action a;
            if (t < t_acc) {
                a.fx = traj_rng.uniform_in(-f_acc, f_acc);
                a.fy = traj_rng.uniform_in(-f_acc, f_acc);
            } else {
                const ParticleState& s = tr.states.back();
                a.fx = -0.5 * s.vx / cfg.dt;
                a.fy = -0.5 * s.vy / cfg.dt;
            }
            a.fx = clamp(a.fx, -cfg.f_clip, cfg.f_clip);
            a.fy = clamp(a.fy, -cfg.f_clip, cfg.f_clip);
            tr.states.push_back(step(tr.states.back(), a, cfg));
            tr.actions.push_back(a);
        }
        out.push_back(std::move(tr));
    }
    return out;
}

enum class DatasetKind { splines, deceleration };

inline const char* dataset_kind_name(DatasetKind kind) {
    return kind == DatasetKind::splines ? "splines" : "deceleration";
}

/// Dispatcher used by the training/sweep drivers; t_acc defaults to T/2.
inline std::vector<Trajectory> gen_dataset(DatasetKind kind, int count, const EnvConfig& cfg,
                                           RngStream& rng, int t_acc = -1,
                                           GenStats* stats = nullptr) {
    if (kind == DatasetKind::splines) return gen_spline_dataset(count, cfg, rng, stats);
    if (t_acc < 0) t_acc = std::max(1, cfg.horizon / 2);
    return gen_deceleration_dataset(count, cfg, t_acc, rng, -1.0, stats);
}

/// File format: header t,x,y,vx,vy,fx,fy; one row per t in [0, T]; the action
/// columns are empty on the last row.
inline std::string trajectory_to_csv(const Trajectory& tr) {
    std::ostringstream os;
    os << "t,x,y,vx,vy,fx,fy\n";
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
        const ParticleState& s = tr.states[t];
        os << t << ',' << csv::num(s.x) << ',' << csv::num(s.y) << ',' << csv::num(s.vx) << ','
           << csv::num(s.vy) << ',';
        if (t < tr.actions.size())
            os << csv::num(tr.actions[t].fx) << ',' << csv::num(tr.actions[t].fy);
        else
            os << ',';
        os << '\n';
    }
    return os.str();
}

inline Trajectory trajectory_from_csv(const std::string& content) {
    std::istringstream is(content);
    std::string line;
    if (!std::getline(is, line)) throw InvalidInput("trajectory_from_csv: empty file");
    Trajectory tr;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = csv::split_line(line);
        if (fields.size() != 7) throw InvalidInput("trajectory_from_csv: bad row");
        ParticleState s;
        s.x = csv::parse_num(fields[1]);
        s.y = csv::parse_num(fields[2]);
        s.vx = csv::parse_num(fields[3]);
        s.vy = csv::parse_num(fields[4]);
        tr.states.push_back(s);
        if (!fields[5].empty())
            tr.actions.push_back(Action{csv::parse_num(fields[5]), csv::parse_num(fields[6])});
    }
    if (tr.states.size() != tr.actions.size() + 1)
        throw InvalidInput("trajectory_from_csv: inconsistent lengths");
    return tr;
}

}  // namespace itin
