#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "itin/intent.hpp"
#include "itin/numkit.hpp"
#include "itin/particle.hpp"

namespace itin {

enum class TimeEncoding { normalized_scalar, one_hot };

inline const char* time_encoding_name(TimeEncoding e) {
    return e == TimeEncoding::one_hot ? "one_hot" : "normalized_scalar";
}

/// Layout of the policy's input features. Without interaction the feature
/// vector is the plain concatenation [intent | state? | time]. With
/// time_intent_interaction (one_hot only) the per-step block [intent | state?
/// | 1] occupies the slice for the current step and every other slice is
/// zero, which gives each time step its own affine map of intent and state —
/// the feature map under which the particle's exact inverse is affine.
struct FeatureSpec {
    Eigen::Index intent_dim = 16;
    int horizon = 32;
    bool use_state = true;
    TimeEncoding time_encoding = TimeEncoding::one_hot;
    bool time_intent_interaction = false;

    Eigen::Index state_dim() const { return use_state ? 4 : 0; }

    Eigen::Index block_dim() const { return intent_dim + state_dim() + 1; }

    Eigen::Index feature_dim() const {
        if (time_intent_interaction) return static_cast<Eigen::Index>(horizon) * block_dim();
        const Eigen::Index time_dim = time_encoding == TimeEncoding::one_hot ? horizon : 1;
        return intent_dim + state_dim() + time_dim;
    }

    void validate() const {
        if (intent_dim < 1) throw InvalidInput("FeatureSpec: intent_dim must be >= 1");
        if (horizon < 1) throw InvalidInput("FeatureSpec: horizon must be >= 1");
        if (time_intent_interaction && time_encoding != TimeEncoding::one_hot)
            throw InvalidInput("FeatureSpec: interaction requires one_hot time encoding");
    }
};

inline Vector featurize(const Intent& intent, const ParticleState& state, int t,
                        const FeatureSpec& spec) {
    spec.validate();
    if (t < 0 || t >= spec.horizon) throw InvalidInput("featurize: t out of range");
    if (intent.values.size() != spec.intent_dim)
        throw InvalidInput("featurize: intent dimension mismatch");

    Vector phi = Vector::Zero(spec.feature_dim());
    if (spec.time_intent_interaction) {
        Eigen::Index off = static_cast<Eigen::Index>(t) * spec.block_dim();
        phi.segment(off, spec.intent_dim) = intent.values;
        off += spec.intent_dim;
        if (spec.use_state) {
            phi(off + 0) = state.x;
            phi(off + 1) = state.y;
            phi(off + 2) = state.vx;
            phi(off + 3) = state.vy;
            off += 4;
        }
        phi(off) = 1.0;
        return phi;
    }

    Eigen::Index off = 0;
    phi.segment(off, spec.intent_dim) = intent.values;
    off += spec.intent_dim;
    if (spec.use_state) {
        phi(off + 0) = state.x;
        phi(off + 1) = state.y;
        phi(off + 2) = state.vx;
        phi(off + 3) = state.vy;
        off += 4;
    }
    if (spec.time_encoding == TimeEncoding::one_hot)
        phi(off + t) = 1.0;
    else
        phi(off) = static_cast<double>(t) / spec.horizon;
    return phi;
}

/// Affine policy: action = weights^T features + bias.
struct PolicyHandle {
    Matrix weights;  // feature_dim x 2
    Vector bias;     // 2
    FeatureSpec spec;
};

inline PolicyHandle zero_policy(const FeatureSpec& spec) {
    spec.validate();
    return PolicyHandle{Matrix::Zero(spec.feature_dim(), 2), Vector::Zero(2), spec};
}

/// Policy output before exploration noise and clamping.
inline Action act(const PolicyHandle& policy, const Intent& intent, const ParticleState& state,
                  int t) {
    const FeatureSpec& spec = policy.spec;
    if (t < 0 || t >= spec.horizon) throw InvalidInput("act: t out of range");
    if (intent.values.size() != spec.intent_dim)
        throw InvalidInput("act: intent dimension mismatch");

    Eigen::Vector2d out = policy.bias;
    if (spec.time_intent_interaction) {
        // Only the block for step t is active; skip the zero slices.
        const Eigen::Index off = static_cast<Eigen::Index>(t) * spec.block_dim();
        const auto w = policy.weights.middleRows(off, spec.block_dim());
        out += w.topRows(spec.intent_dim).transpose() * intent.values;
        Eigen::Index r = spec.intent_dim;
        if (spec.use_state) {
            out += w.row(r + 0).transpose() * state.x;
            out += w.row(r + 1).transpose() * state.y;
            out += w.row(r + 2).transpose() * state.vx;
            out += w.row(r + 3).transpose() * state.vy;
            r += 4;
        }
        out += w.row(r).transpose();
    } else {
        const Vector phi = featurize(intent, state, t, spec);
        out += policy.weights.transpose() * phi;
    }
    return Action{out(0), out(1)};
}

/// One training pair: the intent of the executed trajectory, its recorded
/// state at t (teacher forcing), and the executed action as regression target.
struct TrainSample {
    Intent intent;
    ParticleState state;
    int t = 0;
    Action action;
};

/// Ridge-regularized affine least squares from features to actions over all
/// samples. For the interacted layout the flat regression decomposes exactly
/// into independent per-step fits (blocks never co-activate), which is how it
/// is solved; each block keeps its own unregularized bias row.
inline PolicyHandle fit_policy(const std::vector<TrainSample>& samples, const FeatureSpec& spec,
                               double ridge) {
    spec.validate();
    if (samples.empty()) throw EmptyData("fit_policy: no samples");
    for (const TrainSample& s : samples) {
        if (s.t < 0 || s.t >= spec.horizon) throw InvalidInput("fit_policy: sample t out of range");
        if (s.intent.values.size() != spec.intent_dim)
            throw InvalidInput("fit_policy: intent dimension mismatch");
    }

    PolicyHandle policy = zero_policy(spec);
    if (spec.time_intent_interaction) {
        const Eigen::Index in_dim = spec.intent_dim + spec.state_dim();
        std::vector<std::vector<const TrainSample*>> by_t(spec.horizon);
        for (const TrainSample& s : samples) by_t[s.t].push_back(&s);
        for (int t = 0; t < spec.horizon; ++t) {
            const auto& group = by_t[t];
            if (group.empty()) continue;
            Matrix x(group.size(), in_dim);
            Matrix a(group.size(), 2);
            for (std::size_t r = 0; r < group.size(); ++r) {
                x.row(r).head(spec.intent_dim) = group[r]->intent.values.transpose();
                if (spec.use_state)
                    x.row(r).tail(4) << group[r]->state.x, group[r]->state.y,
                        group[r]->state.vx, group[r]->state.vy;
                a.row(r) << group[r]->action.fx, group[r]->action.fy;
            }
            const AffineFit fit = affine_least_squares(x, a, ridge);
            const Eigen::Index off = static_cast<Eigen::Index>(t) * spec.block_dim();
            policy.weights.middleRows(off, in_dim) = fit.theta;
            policy.weights.row(off + in_dim) = fit.bias.transpose();
        }
        return policy;
    }

    Matrix x(samples.size(), spec.feature_dim());
    Matrix a(samples.size(), 2);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        x.row(r) = featurize(samples[r].intent, samples[r].state, samples[r].t, spec).transpose();
        a.row(r) << samples[r].action.fx, samples[r].action.fy;
    }
    const AffineFit fit = affine_least_squares(x, a, ridge);
    policy.weights = fit.theta;
    policy.bias = fit.bias;
    return policy;
}

/// Mean squared action error per component over a sample set.
inline double policy_action_mse(const PolicyHandle& policy, const std::vector<TrainSample>& samples) {
    if (samples.empty()) return 0.0;
    double sse = 0.0;
    for (const TrainSample& s : samples) {
        const Action a = act(policy, s.intent, s.state, s.t);
        const double dx = a.fx - s.action.fx;
        const double dy = a.fy - s.action.fy;
        sse += dx * dx + dy * dy;
    }
    return sse / (2.0 * static_cast<double>(samples.size()));
}

/// Rollout from the fixed initial state: query the policy, add Gaussian
/// exploration noise, clamp, step. The recorded actions are the executed
/// (noisy, clamped) ones, so the trajectory replays exactly.
inline Trajectory rollout(const PolicyHandle& policy, const Intent& intent, const EnvConfig& cfg,
                          double noise_scale, RngStream& rng) {
    if (policy.spec.horizon != cfg.horizon)
        throw InvalidInput("rollout: policy and environment horizon mismatch");
    Trajectory tr;
    tr.states.reserve(cfg.horizon + 1);
    tr.actions.reserve(cfg.horizon);
    tr.states.push_back(initial_state());
    for (int t = 0; t < cfg.horizon; ++t) {
        Action a = act(policy, intent, tr.states.back(), t);
        const Vector noise = gaussian_vector(rng, 2, noise_scale);
        a.fx = clamp(a.fx + noise(0), -cfg.f_clip, cfg.f_clip);
        a.fy = clamp(a.fy + noise(1), -cfg.f_clip, cfg.f_clip);
        tr.states.push_back(step(tr.states.back(), a, cfg));
        tr.actions.push_back(a);
    }
    return tr;
}

/// Checkpoint: text dump of the feature spec, the embedding settings needed
/// to reuse the policy, weights (row-major) and bias, plus provenance.
inline std::string policy_to_text(const PolicyHandle& policy, const EmbedConfig& embed,
                                  std::uint64_t seed, int iteration) {
    std::ostringstream os;
    os << "itin_policy_v1\n";
    os << "seed," << seed << '\n';
    os << "iteration," << iteration << '\n';
    os << "intent_dim," << policy.spec.intent_dim << '\n';
    os << "horizon," << policy.spec.horizon << '\n';
    os << "use_state," << (policy.spec.use_state ? 1 : 0) << '\n';
    os << "time_encoding," << time_encoding_name(policy.spec.time_encoding) << '\n';
    os << "time_intent_interaction," << (policy.spec.time_intent_interaction ? 1 : 0) << '\n';
    os << "keyframes," << embed.keyframes << '\n';
    os << "normalize," << (embed.normalize ? 1 : 0) << '\n';
    os << "c_max," << csv::num(embed.c_max) << '\n';
    os << "weights," << policy.weights.rows() << ',' << policy.weights.cols() << '\n';
    for (Eigen::Index r = 0; r < policy.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < policy.weights.cols(); ++c) {
            if (c) os << ',';
            os << csv::num(policy.weights(r, c));
        }
        os << '\n';
    }
    os << "bias," << csv::num(policy.bias(0)) << ',' << csv::num(policy.bias(1)) << '\n';
    return os.str();
}

struct PolicyCheckpoint {
    PolicyHandle policy;
    EmbedConfig embed;
    std::uint64_t seed = 0;
    int iteration = 0;
};

inline PolicyCheckpoint policy_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "itin_policy_v1")
        throw InvalidInput("policy_from_text: bad header");

    PolicyCheckpoint ck;
    auto next_kv = [&](const std::string& key) -> std::vector<std::string> {
        if (!std::getline(is, line)) throw InvalidInput("policy_from_text: truncated");
        auto fields = csv::split_line(line);
        if (fields.empty() || fields[0] != key)
            throw InvalidInput("policy_from_text: expected key " + key);
        return fields;
    };
    ck.seed = static_cast<std::uint64_t>(std::stoull(next_kv("seed")[1]));
    ck.iteration = static_cast<int>(csv::parse_num(next_kv("iteration")[1]));
    FeatureSpec spec;
    spec.intent_dim = static_cast<Eigen::Index>(csv::parse_num(next_kv("intent_dim")[1]));
    spec.horizon = static_cast<int>(csv::parse_num(next_kv("horizon")[1]));
    spec.use_state = csv::parse_num(next_kv("use_state")[1]) != 0.0;
    const std::string enc = next_kv("time_encoding")[1];
    spec.time_encoding =
        enc == "one_hot" ? TimeEncoding::one_hot : TimeEncoding::normalized_scalar;
    spec.time_intent_interaction = csv::parse_num(next_kv("time_intent_interaction")[1]) != 0.0;
    ck.embed.keyframes = static_cast<int>(csv::parse_num(next_kv("keyframes")[1]));
    ck.embed.normalize = csv::parse_num(next_kv("normalize")[1]) != 0.0;
    ck.embed.c_max = csv::parse_num(next_kv("c_max")[1]);

    const auto wdims = next_kv("weights");
    const Eigen::Index rows = static_cast<Eigen::Index>(csv::parse_num(wdims[1]));
    const Eigen::Index cols = static_cast<Eigen::Index>(csv::parse_num(wdims[2]));
    Matrix w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::getline(is, line)) throw InvalidInput("policy_from_text: truncated weights");
        const auto fields = csv::split_line(line);
        if (static_cast<Eigen::Index>(fields.size()) != cols)
            throw InvalidInput("policy_from_text: bad weight row");
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = csv::parse_num(fields[c]);
    }
    const auto bias_fields = next_kv("bias");
    Vector b(2);
    b << csv::parse_num(bias_fields[1]), csv::parse_num(bias_fields[2]);

    spec.validate();
    if (rows != spec.feature_dim())
        throw InvalidInput("policy_from_text: weight rows do not match the feature spec");
    ck.policy = PolicyHandle{std::move(w), std::move(b), spec};
    return ck;
}

}  // namespace itin
