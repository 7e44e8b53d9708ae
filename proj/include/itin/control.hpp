#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "itin/intent.hpp"
#include "itin/particle.hpp"
#include "itin/policy.hpp"

namespace itin {

/// Immutable set of desired intents. May be empty only for the no-steering
/// ablation.
struct SteeringSet {
    std::vector<Intent> intents;
    std::string source_name = "steer";
};

/// FIFO store of relabeled rollouts, capacity K * N trajectories.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Intent intent, Trajectory trajectory) {
        entries_.push_back({std::move(intent), std::move(trajectory)});
        while (entries_.size() > capacity_) entries_.pop_front();
    }

    struct Entry {
        Intent intent;
        Trajectory trajectory;
    };

    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<Entry>& entries() const { return entries_; }

private:
    std::size_t capacity_;
    std::deque<Entry> entries_;
};

struct ItinConfig {
    int batch_size = 64;          // N
    double steering_ratio = 0.3;  // alpha in [0, 1]
    double noise_scale = 4.0;     // eta; 0.25 * default f_clip
    int buffer_multiplier = 40;   // K
    int iterations = 40;
    double ridge = 1e-8;
    std::uint64_t seed = 0;
    EmbedConfig embed{};
    bool use_state = true;
    bool time_intent_interaction = true;  // per-step affine heads (see README)
    std::optional<TimeEncoding> time_encoding;  // default: one_hot up to T = 64

    void validate() const {
        if (batch_size < 1) throw InvalidInput("ItinConfig: batch_size must be >= 1");
        if (!(steering_ratio >= 0.0 && steering_ratio <= 1.0))
            throw InvalidInput("ItinConfig: steering_ratio must be in [0, 1]");
        if (!(noise_scale >= 0.0)) throw InvalidInput("ItinConfig: noise_scale must be >= 0");
        if (buffer_multiplier < 1)
            throw InvalidInput("ItinConfig: buffer_multiplier must be >= 1");
        if (iterations < 0) throw InvalidInput("ItinConfig: iterations must be >= 0");
        if (!(ridge >= 0.0)) throw InvalidInput("ItinConfig: ridge must be >= 0");
        embed.validate();
    }

    FeatureSpec feature_spec(const EnvConfig& env) const {
        FeatureSpec spec;
        spec.intent_dim = 2 * embed.keyframes;
        spec.horizon = env.horizon;
        spec.use_state = use_state;
        spec.time_encoding = time_encoding.value_or(
            env.horizon <= 64 ? TimeEncoding::one_hot : TimeEncoding::normalized_scalar);
        spec.time_intent_interaction = time_intent_interaction;
        return spec;
    }
};

struct IterationMetrics {
    int iteration = 0;
    double train_action_mse = 0.0;
    double probe_test_mse = 0.0;
    std::size_t buffer_size = 0;
};

struct ItinReport {
    std::vector<IterationMetrics> per_iteration;
    PolicyHandle final_policy;
    double zero_policy_probe_mse = 0.0;
};

/// Held-out evaluation pair; never enters training.
struct ProbePair {
    Intent intent;
    Trajectory reference;
};

namespace detail {

// Substream salts: every random draw in the loop is keyed off the root seed
// and a purpose-disjoint stream id, so results do not depend on scheduling.
constexpr std::uint64_t kSaltBatch = 0x100000000ull;
constexpr std::uint64_t kSaltRollout = 0x200000000ull;
constexpr std::uint64_t kSaltInitRollout = 0x300000000ull;

}  // namespace detail

/// Batch composition: floor(alpha N) intents from the steering set, the rest
/// from the previous iteration's relabeled intents; an empty source is
/// backfilled from the other. Sampling is uniform with replacement.
inline std::vector<Intent> sample_batch(const SteeringSet& steer, const std::vector<Intent>& prev,
                                        const ItinConfig& cfg, RngStream& rng) {
    cfg.validate();
    if (steer.intents.empty() && prev.empty())
        throw EmptyData("sample_batch: both steering set and previous intents are empty");

    const int n = cfg.batch_size;
    int n_steer = static_cast<int>(cfg.steering_ratio * n);
    if (steer.intents.empty()) n_steer = 0;
    if (prev.empty()) n_steer = n;

    std::vector<Intent> batch;
    batch.reserve(n);
    for (int i = 0; i < n_steer; ++i) {
        const std::size_t j =
            static_cast<std::size_t>(rng.next_u64() % steer.intents.size());
        batch.push_back(steer.intents[j]);
    }
    for (int i = n_steer; i < n; ++i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_u64() % prev.size());
        batch.push_back(prev[j]);
    }
    return batch;
}

struct ItinState {
    PolicyHandle policy;
    ReplayBuffer buffer;
    std::vector<Intent> prev_intents;
};

namespace detail {

inline std::vector<TrainSample> buffer_samples(const ReplayBuffer& buffer) {
    std::vector<TrainSample> samples;
    for (const ReplayBuffer::Entry& e : buffer.entries()) {
        samples.reserve(samples.size() + e.trajectory.actions.size());
        for (std::size_t t = 0; t < e.trajectory.actions.size(); ++t)
            samples.push_back(TrainSample{e.intent, e.trajectory.states[t],
                                          static_cast<int>(t), e.trajectory.actions[t]});
    }
    return samples;
}

}  // namespace detail

/// One loop iteration: sample a batch of intents, roll out with exploration
/// noise, relabel each rollout with its own intent, push into the buffer,
/// refit the policy on the whole buffer, and replace the previous-intent set
/// with this iteration's relabeled intents.
inline IterationMetrics itin_iteration(ItinState& state, const SteeringSet& steer,
                                       const ItinConfig& cfg, const EnvConfig& env,
                                       int iteration) {
    const RngStream root(cfg.seed);
    RngStream batch_rng = root.substream(detail::kSaltBatch + static_cast<std::uint64_t>(iteration));
    const std::vector<Intent> batch = sample_batch(steer, state.prev_intents, cfg, batch_rng);

    std::vector<Intent> relabeled;
    relabeled.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        RngStream roll_rng = root.substream(
            detail::kSaltRollout +
            static_cast<std::uint64_t>(iteration) * static_cast<std::uint64_t>(cfg.batch_size) +
            static_cast<std::uint64_t>(i));
        Trajectory tr = rollout(state.policy, batch[i], env, cfg.noise_scale, roll_rng);
        Intent z_hat = embed(tr.states, cfg.embed);
        relabeled.push_back(z_hat);
        state.buffer.push(std::move(z_hat), std::move(tr));
    }

    const std::vector<TrainSample> samples = detail::buffer_samples(state.buffer);
    state.policy = fit_policy(samples, state.policy.spec, cfg.ridge);
    state.prev_intents = std::move(relabeled);

    IterationMetrics metrics;
    metrics.iteration = iteration;
    metrics.train_action_mse = policy_action_mse(state.policy, samples);
    metrics.buffer_size = state.buffer.size();
    return metrics;
}

/// Mean probe MSE under noise-free rollouts; the probe set never trains.
inline double eval_probe_mse(const PolicyHandle& policy, const std::vector<ProbePair>& probes,
                             const EnvConfig& env) {
    if (probes.empty()) return 0.0;
    double total = 0.0;
    RngStream dummy(0);
    for (const ProbePair& p : probes) {
        const Trajectory tr = rollout(policy, p.intent, env, 0.0, dummy);
        total += trajectory_mse(tr, p.reference);
    }
    return total / static_cast<double>(probes.size());
}

/// The full loop. The previous-intent set starts as the steering set; with an
/// empty steering set (ablation) it starts from the intents of exploratory
/// rollouts of the initial zero policy.
inline ItinReport run_itin(const SteeringSet& steer, const ItinConfig& cfg, const EnvConfig& env,
                           const std::vector<ProbePair>& probe_set) {
    cfg.validate();
    env.validate();
    const RngStream root(cfg.seed);

    ItinState state{
        zero_policy(cfg.feature_spec(env)),
        ReplayBuffer(static_cast<std::size_t>(cfg.buffer_multiplier) *
                     static_cast<std::size_t>(cfg.batch_size)),
        steer.intents};

    if (steer.intents.empty()) {
        state.prev_intents.clear();
        for (int i = 0; i < cfg.batch_size; ++i) {
            RngStream rng =
                root.substream(detail::kSaltInitRollout + static_cast<std::uint64_t>(i));
            Intent free_intent;
            free_intent.keyframes = cfg.embed.keyframes;
            free_intent.horizon = env.horizon;
            free_intent.values = Vector::Zero(2 * cfg.embed.keyframes);
            const Trajectory tr = rollout(state.policy, free_intent, env, cfg.noise_scale, rng);
            state.prev_intents.push_back(embed(tr.states, cfg.embed));
        }
    }

    ItinReport report;
    report.zero_policy_probe_mse = eval_probe_mse(state.policy, probe_set, env);
    report.per_iteration.reserve(cfg.iterations);
    for (int n = 0; n < cfg.iterations; ++n) {
        IterationMetrics metrics = itin_iteration(state, steer, cfg, env, n);
        metrics.probe_test_mse = eval_probe_mse(state.policy, probe_set, env);
        report.per_iteration.push_back(metrics);
    }
    report.final_policy = std::move(state.policy);
    return report;
}

/// Cross-evaluation table: rows are test sets (a, b), columns are policies
/// (pa, pb); entries are mean probe MSE under noise-free rollouts.
inline Eigen::Matrix2d cross_evaluate(const PolicyHandle& policy_a, const PolicyHandle& policy_b,
                                      const std::vector<ProbePair>& test_a,
                                      const std::vector<ProbePair>& test_b,
                                      const EnvConfig& env) {
    Eigen::Matrix2d table;
    table(0, 0) = eval_probe_mse(policy_a, test_a, env);
    table(0, 1) = eval_probe_mse(policy_b, test_a, env);
    table(1, 0) = eval_probe_mse(policy_a, test_b, env);
    table(1, 1) = eval_probe_mse(policy_b, test_b, env);
    return table;
}

inline std::vector<ProbePair> make_probe_pairs(const std::vector<Trajectory>& trajectories,
                                               const EmbedConfig& embed_cfg) {
    std::vector<ProbePair> probes;
    probes.reserve(trajectories.size());
    for (const Trajectory& tr : trajectories)
        probes.push_back(ProbePair{embed(tr.states, embed_cfg), tr});
    return probes;
}

inline SteeringSet make_steering_set(const std::vector<Trajectory>& trajectories,
                                     const EmbedConfig& embed_cfg, std::string name) {
    SteeringSet steer;
    steer.source_name = std::move(name);
    steer.intents.reserve(trajectories.size());
    for (const Trajectory& tr : trajectories) steer.intents.push_back(embed(tr.states, embed_cfg));
    return steer;
}

struct SweepRow {
    int size = 0;
    std::vector<double> per_seed_mse;
    double mean_probe_mse = 0.0;
};

/// Trains from scratch per steering size (0 = no-steering ablation) on
/// disjoint steering/probe splits drawn from the named generator, averaged
/// over the given seeds. Dataset draws are keyed off cfg.seed so every size
/// sees the same pool.
inline std::vector<SweepRow> steering_size_sweep(const std::vector<int>& sizes, DatasetKind kind,
                                                 const ItinConfig& cfg, const EnvConfig& env,
                                                 const std::vector<std::uint64_t>& seeds,
                                                 int probe_count = 48) {
    if (sizes.empty()) throw InvalidInput("steering_size_sweep: sizes must be nonempty");
    cfg.validate();
    env.validate();

    int max_size = 0;
    for (int s : sizes) {
        if (s < 0) throw InvalidInput("steering_size_sweep: sizes must be >= 0");
        max_size = std::max(max_size, s);
    }

    RngStream data_root(cfg.seed);
    RngStream pool_rng = data_root.substream(0x51u);
    RngStream probe_rng = data_root.substream(0x52u);
    const std::vector<Trajectory> pool =
        max_size > 0 ? gen_dataset(kind, max_size, env, pool_rng) : std::vector<Trajectory>{};
    const std::vector<Trajectory> probe_trajs = gen_dataset(kind, probe_count, env, probe_rng);
    const std::vector<ProbePair> probes = make_probe_pairs(probe_trajs, cfg.embed);

    std::vector<SweepRow> rows;
    rows.reserve(sizes.size());
    for (int size : sizes) {
        SweepRow row;
        row.size = size;
        for (std::uint64_t seed : seeds) {
            ItinConfig run_cfg = cfg;
            run_cfg.seed = seed;
            SteeringSet steer;
            steer.source_name = dataset_kind_name(kind);
            for (int i = 0; i < size; ++i) steer.intents.push_back(embed(pool[i].states, cfg.embed));
            const ItinReport report = run_itin(steer, run_cfg, env, probes);
            row.per_seed_mse.push_back(report.per_iteration.empty()
                                           ? report.zero_policy_probe_mse
                                           : report.per_iteration.back().probe_test_mse);
        }
        double total = 0.0;
        for (double v : row.per_seed_mse) total += v;
        row.mean_probe_mse = total / static_cast<double>(row.per_seed_mse.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_report_csv(const ItinReport& report, std::ostream& os) {
    os << "iteration,train_action_mse,probe_test_mse,buffer_size\n";
    for (const IterationMetrics& m : report.per_iteration) {
        os << m.iteration << ',' << csv::num(m.train_action_mse) << ','
           << csv::num(m.probe_test_mse) << ',' << m.buffer_size << '\n';
    }
}

}  // namespace itin
