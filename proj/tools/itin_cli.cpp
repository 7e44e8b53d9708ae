// Command-line driver: inversion runs, theorem certification, dataset
// generation, control training and evaluation. Every run writes its outputs
// plus a manifest.json into --out; all randomness flows from --seed.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "itin/itin.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace itin;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitCertificateFailed = 4;

struct RunContext {
    fs::path out_dir;
    json config_snapshot;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write_output(const std::string& name, const std::string& content) {
        fs::create_directories(out_dir);
        csv::write_file_atomic(out_dir / name, content);
        outputs.push_back(name);
    }

    void finalize(const std::string& command, std::uint64_t seed) {
        const double runtime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json manifest;
        manifest["command"] = command;
        manifest["version"] = std::string("itin ") + kVersion;
        manifest["seed"] = seed;
        manifest["config"] = config_snapshot;
        manifest["runtime_seconds"] = runtime;
        manifest["outputs"] = outputs;
        fs::create_directories(out_dir);
        csv::write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    }
};

json snapshot_config(const CLI::App* cmd) {
    json snap;
    for (const CLI::Option* opt : cmd->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "config" || name == "help" || name.empty()) continue;
        if (opt->count() > 0) {
            const auto& results = opt->results();
            std::string joined;
            for (const std::string& r : results) {
                if (!joined.empty()) joined += ',';
                joined += r;
            }
            snap[name] = joined;
        } else {
            const std::string d = opt->get_default_str();
            if (!d.empty()) snap[name] = d;
        }
    }
    return snap;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(csv::parse_num(item));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

// ---------------------------------------------------------------------------
// invert

struct MapOptions {
    std::string family = "linear";
    int dim = 3;
    double amplitude = 0.01;
    std::string coeffs;  // custom: row-major, dim x dim
    std::string offset;  // custom
};

ForwardMap build_map(const MapOptions& opts, RngStream& rng) {
    if (opts.family == "custom") {
        const std::vector<double> c = parse_double_list(opts.coeffs);
        const int dim = opts.dim;
        if (static_cast<int>(c.size()) != dim * dim)
            throw InvalidInput("custom map: coeffs must have dim*dim entries");
        Matrix a(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) a(i, j) = c[i * dim + j];
        Vector h = Vector::Zero(dim);
        if (!opts.offset.empty()) {
            const std::vector<double> o = parse_double_list(opts.offset);
            if (static_cast<int>(o.size()) != dim)
                throw InvalidInput("custom map: offset must have dim entries");
            for (int i = 0; i < dim; ++i) h(i) = o[i];
        }
        if (opts.amplitude == 0.0) return make_linear_map(a, h, "custom");
        ForwardMap m;
        m.in_dim = dim;
        m.out_dim = dim;
        m.name = "custom-sin";
        m.eval = [a, h, amp = opts.amplitude](const Vector& x) -> Vector {
            return a.transpose() * x + h + amp * x.array().sin().matrix();
        };
        return m;
    }

    const int dim = opts.dim;
    Matrix a(dim, dim);
    do {
        for (int i = 0; i < dim; ++i) a.row(i) = gaussian_vector(rng, dim, 1.0).transpose();
    } while (condition_number(a) > 1e3);
    const Vector h = gaussian_vector(rng, dim, 1.0);
    if (opts.family == "linear") return make_linear_map(a, h, "linear");
    if (opts.family == "sin-linear") {
        ForwardMap m;
        m.in_dim = dim;
        m.out_dim = dim;
        m.name = "sin-linear";
        m.eval = [a, h, amp = opts.amplitude](const Vector& x) -> Vector {
            return a.transpose() * x + h + amp * x.array().sin().matrix();
        };
        return m;
    }
    throw InvalidInput("unknown map family: " + opts.family);
}

int cmd_invert(const MapOptions& map_opts, int points, int max_iterations,
               double residual_target, double ridge, std::uint64_t seed, RunContext& ctx) {
    RngStream root(seed);
    RngStream map_rng = root.substream(1);
    const ForwardMap map = build_map(map_opts, map_rng);

    const int m = points > 0 ? points : map_opts.dim + 2;
    InversionProblem problem;
    problem.map = map;
    problem.max_iterations = max_iterations;
    problem.residual_target = residual_target;
    problem.ridge = ridge;
    RngStream data_rng = root.substream(2);
    problem.initial_inputs = Matrix(m, map.in_dim);
    problem.desired_outputs = Matrix(m, map.out_dim);
    for (int i = 0; i < m; ++i) {
        problem.initial_inputs.row(i) = gaussian_vector(data_rng, map.in_dim, 2.0).transpose();
        problem.desired_outputs.row(i) = gaussian_vector(data_rng, map.out_dim, 2.0).transpose();
    }

    try {
        const InversionTrace trace = run_inversion(problem);
        std::ostringstream os;
        write_trace_csv(trace, os);
        ctx.write_output("trace.csv", os.str());
        ctx.finalize("invert", seed);
        std::cout << "invert: " << (trace.converged ? "converged" : "max-iterations") << " after "
                  << trace.states.size() - 1 << " iterations, final residual "
                  << trace.states.back().mean_residual << "\n";
        return trace.converged ? kExitOk : kExitNotConverged;
    } catch (const DegenerateIteration& e) {
        std::ostringstream os;
        write_trace_csv(e.partial_trace, os);
        ctx.write_output("trace.csv", os.str());
        ctx.finalize("invert", seed);
        std::cerr << "invert: degenerate iteration: " << e.what() << "\n";
        return kExitDegenerate;
    }
}

// ---------------------------------------------------------------------------
// verify

struct VerifyOptions {
    std::string suite = "t1,t2,t3,t4,l1";
    std::string t1_dims = "1,2,3,5";
    int t1_trials = 100;
    int t3_instances = 50;
    int t3_iterations = 40;
    int t4_points = 5;
    int t4_iterations = 30;
    double slopes_lo = -10.0;
    double slopes_hi = 10.0;
    int slopes_grid = 2001;
    double epsilon_override = -1.0;  // > 0: replace the estimated epsilon
    int t2_max_iterations = 200;
};

int cmd_verify(const VerifyOptions& opts, std::uint64_t seed, RunContext& ctx) {
    RngStream root(seed);
    std::vector<Certificate> certs;
    std::set<std::string> suite;
    {
        std::stringstream ss(opts.suite);
        std::string item;
        while (std::getline(ss, item, ',')) suite.insert(item);
    }

    const ForwardMap sin_map =
        make_scalar_map("4x+sin(x)", [](double x) { return 4.0 * x + std::sin(x); });
    SlopeStats stats = estimate_slopes(sin_map, opts.slopes_lo, opts.slopes_hi, opts.slopes_grid);
    if (opts.epsilon_override > 0.0) {
        stats.epsilon = opts.epsilon_override;
        stats.epsilon_defined = true;
    }

    if (suite.count("t1")) {
        for (int dim : parse_int_list(opts.t1_dims)) {
            RngStream rng = root.substream(100 + dim);
            Certificate c = certify_linear_oneshot(dim, opts.t1_trials, rng);
            c.seed = seed;
            certs.push_back(std::move(c));
        }
    }

    std::vector<InversionTrace> t3_traces;
    if (suite.count("t3") || suite.count("l1")) {
        RngStream rng = root.substream(300);
        Certificate worst;
        worst.theorem_id = TheoremId::T3;
        worst.bound = 1.0 - stats.epsilon;
        worst.map_name = sin_map.name;
        worst.seed = seed;
        worst.worst_observed = 0.0;
        for (int i = 0; i < opts.t3_instances; ++i) {
            const double y0 = rng.uniform_in(-10.0, 10.0);
            const double y1 = y0 + rng.uniform_in(0.5, 5.0);
            const double x0 = rng.uniform_in(-2.0, 2.0);
            const double x1 = x0 + rng.uniform_in(0.1, 2.0);
            Certificate c = certify_two_point_contraction(sin_map, stats, {y0, y1}, {x0, x1},
                                                          opts.t3_iterations);
            worst.worst_observed = std::max(worst.worst_observed, c.worst_observed);
            worst.iterations += c.iterations;
            if (c.trace_ref) t3_traces.push_back(std::move(*c.trace_ref));
        }
        worst.holds = certificate_within(worst.worst_observed, worst.bound);
        if (suite.count("t3")) certs.push_back(worst);
    }

    if (suite.count("l1")) {
        Certificate l1;
        l1.theorem_id = TheoremId::L1;
        l1.bound = 0.0;
        l1.worst_observed = 0.0;
        l1.map_name = sin_map.name;
        l1.seed = seed;
        for (const InversionTrace& tr : t3_traces) {
            const Certificate c = certify_theta_bounds(tr, stats);
            l1.worst_observed = std::max(l1.worst_observed, c.worst_observed);
            l1.iterations += c.iterations;
        }
        l1.holds = certificate_within(l1.worst_observed, l1.bound);
        certs.push_back(std::move(l1));
    }

    if (suite.count("t4")) {
        RngStream rng = root.substream(400);
        Vector x0(opts.t4_points), y(opts.t4_points);
        for (int i = 0; i < opts.t4_points; ++i) {
            x0(i) = rng.uniform_in(-6.0, -2.0);
            y(i) = rng.uniform_in(-3.0, 3.0);
        }
        y.array() -= y.mean();  // mean 0 so F^{-1}(mean Y) = 0 for the odd map
        Certificate c = certify_mean_contraction(sin_map, stats, y, x0, opts.t4_iterations);
        c.seed = seed;
        certs.push_back(std::move(c));
    }

    if (suite.count("t2")) {
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
        RngStream rng = root.substream(200);
        const int m = 6;
        problem.initial_inputs = Matrix(m, 2);
        problem.desired_outputs = Matrix(m, 2);
        for (int i = 0; i < m; ++i) {
            problem.initial_inputs.row(i) = gaussian_vector(rng, 2, 1.0).transpose();
            problem.desired_outputs.row(i) =
                (gaussian_vector(rng, 2, 1.0) + Vector::Constant(2, 3.0)).transpose();
        }
        problem.max_iterations = opts.t2_max_iterations;
        problem.residual_target = 1e-12;

        const InversionTrace pre = run_inversion(problem);
        std::vector<Matrix> clouds;
        for (const InversionState& s : pre.states) clouds.push_back(s.inputs);
        Vector lo = Vector::Constant(2, -6.0), hi = Vector::Constant(2, 6.0);
        const AssumptionBounds bounds = estimate_assumption_bounds(map, lo, hi, 41, clouds);
        Certificate c = certify_multidim_ball(map, bounds, problem);
        c.seed = seed;
        certs.push_back(std::move(c));
    }

    std::ostringstream os;
    write_certificates_csv(certs, os);
    ctx.write_output("certificates.csv", os.str());
    ctx.finalize("verify", seed);

    bool all_hold = true;
    for (const Certificate& c : certs) {
        std::cout << theorem_name(c.theorem_id) << " [" << c.map_name << "] "
                  << (c.holds ? "holds" : "FAILS") << " (worst " << c.worst_observed << " vs bound "
                  << c.bound << ")\n";
        all_hold = all_hold && c.holds;
    }
    return all_hold ? kExitOk : kExitCertificateFailed;
}

// ---------------------------------------------------------------------------
// gen-data

struct EnvOptions {
    int horizon = 32;
    double dt = 0.1;
    double c_max = -1.0;   // default: horizon * dt * 2
    double f_clip = 16.0;

    EnvConfig to_env() const {
        EnvConfig env = EnvConfig::make(horizon, dt);
        if (c_max > 0.0) env.c_max = c_max;
        env.f_clip = f_clip;
        env.validate();
        return env;
    }
};

json env_to_json(const EnvConfig& env) {
    return json{{"horizon", env.horizon},
                {"dt", env.dt},
                {"c_max", env.c_max},
                {"f_clip", env.f_clip}};
}

EnvConfig env_from_json(const json& j) {
    EnvConfig env;
    env.horizon = j.at("horizon").get<int>();
    env.dt = j.at("dt").get<double>();
    env.c_max = j.at("c_max").get<double>();
    env.f_clip = j.at("f_clip").get<double>();
    return env;
}

int cmd_gen_data(const std::string& generator, int count, const EnvOptions& env_opts, int t_acc,
                 double f_acc, std::uint64_t seed, RunContext& ctx) {
    const EnvConfig env = env_opts.to_env();
    DatasetKind kind;
    if (generator == "splines") kind = DatasetKind::splines;
    else if (generator == "deceleration") kind = DatasetKind::deceleration;
    else throw InvalidInput("unknown generator: " + generator);

    if (t_acc < 0) t_acc = std::max(1, env.horizon / 2);
    if (f_acc < 0.0) f_acc = env.f_clip / 4.0;

    RngStream rng(seed);
    GenStats stats;
    std::vector<Trajectory> dataset;
    if (kind == DatasetKind::splines) dataset = gen_spline_dataset(count, env, rng, &stats);
    else dataset = gen_deceleration_dataset(count, env, t_acc, rng, f_acc, &stats);

    std::vector<std::string> files;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%05d.csv", i);
        ctx.write_output(name, trajectory_to_csv(dataset[i]));
        files.emplace_back(name);
    }

    json manifest;
    manifest["generator"] = generator;
    manifest["seed"] = seed;
    manifest["count"] = count;
    manifest["env"] = env_to_json(env);
    if (kind == DatasetKind::deceleration) {
        manifest["t_acc"] = t_acc;
        manifest["f_acc"] = f_acc;
    }
    manifest["stats"] = json{{"attempts", stats.attempts},
                             {"rejected_force", stats.rejected_force},
                             {"rejected_bounds", stats.rejected_bounds}};
    manifest["files"] = files;
    ctx.write_output("dataset.json", manifest.dump(2) + "\n");
    ctx.finalize("gen-data", seed);
    std::cout << "gen-data: wrote " << count << " trajectories to " << ctx.out_dir << "\n";
    return kExitOk;
}

struct Dataset {
    EnvConfig env;
    std::vector<Trajectory> trajectories;
    std::string generator;
};

Dataset load_dataset(const fs::path& dir) {
    const fs::path manifest_path = dir / "dataset.json";
    if (!fs::exists(manifest_path))
        throw InvalidInput("dataset manifest not found: " + manifest_path.string());
    const json manifest = json::parse(csv::read_file(manifest_path));
    Dataset data;
    data.env = env_from_json(manifest.at("env"));
    data.generator = manifest.at("generator").get<std::string>();
    for (const auto& name : manifest.at("files")) {
        data.trajectories.push_back(
            trajectory_from_csv(csv::read_file(dir / name.get<std::string>())));
    }
    return data;
}

// ---------------------------------------------------------------------------
// train / eval / cross-eval / sweep

struct TrainOptions {
    std::string data_dir;
    int steer_size = 100;
    int probe_size = 48;
    int batch_size = 64;
    double alpha = 0.3;
    double eta = -1.0;  // default 0.25 * f_clip
    int buffer_multiplier = 40;
    int iterations = 40;
    double ridge = 1e-8;
    int keyframes = 8;
    bool normalize = false;
    bool use_state = true;
    bool interaction = true;
    std::string time_encoding = "auto";
};

ItinConfig build_itin_config(const TrainOptions& opts, const EnvConfig& env, std::uint64_t seed) {
    ItinConfig cfg;
    cfg.batch_size = opts.batch_size;
    cfg.steering_ratio = opts.alpha;
    cfg.noise_scale = opts.eta >= 0.0 ? opts.eta : 0.25 * env.f_clip;
    cfg.buffer_multiplier = opts.buffer_multiplier;
    cfg.iterations = opts.iterations;
    cfg.ridge = opts.ridge;
    cfg.seed = seed;
    cfg.embed.keyframes = opts.keyframes;
    cfg.embed.normalize = opts.normalize;
    cfg.embed.c_max = env.c_max;
    cfg.use_state = opts.use_state;
    cfg.time_intent_interaction = opts.interaction;
    if (opts.time_encoding == "one_hot") cfg.time_encoding = TimeEncoding::one_hot;
    else if (opts.time_encoding == "normalized_scalar")
        cfg.time_encoding = TimeEncoding::normalized_scalar;
    else if (opts.time_encoding != "auto")
        throw InvalidInput("unknown time encoding: " + opts.time_encoding);
    return cfg;
}

int cmd_train(const TrainOptions& opts, std::uint64_t seed, RunContext& ctx) {
    const Dataset data = load_dataset(opts.data_dir);
    if (opts.steer_size + opts.probe_size > static_cast<int>(data.trajectories.size()))
        throw InvalidInput("dataset too small for the requested steer/probe split");

    const ItinConfig cfg = build_itin_config(opts, data.env, seed);
    std::vector<Trajectory> steer_trajs(data.trajectories.begin(),
                                        data.trajectories.begin() + opts.steer_size);
    std::vector<Trajectory> probe_trajs(
        data.trajectories.begin() + opts.steer_size,
        data.trajectories.begin() + opts.steer_size + opts.probe_size);

    const SteeringSet steer = make_steering_set(steer_trajs, cfg.embed, data.generator);
    const std::vector<ProbePair> probes = make_probe_pairs(probe_trajs, cfg.embed);

    const ItinReport report = run_itin(steer, cfg, data.env, probes);

    std::ostringstream os;
    write_report_csv(report, os);
    ctx.write_output("report.csv", os.str());
    ctx.write_output("policy.txt",
                     policy_to_text(report.final_policy, cfg.embed, seed, cfg.iterations));
    json extra;
    extra["zero_policy_probe_mse"] = report.zero_policy_probe_mse;
    extra["final_probe_mse"] = report.per_iteration.empty()
                                   ? report.zero_policy_probe_mse
                                   : report.per_iteration.back().probe_test_mse;
    ctx.write_output("summary.json", extra.dump(2) + "\n");
    ctx.finalize("train", seed);
    std::cout << "train: final probe MSE " << extra["final_probe_mse"] << " (zero policy "
              << report.zero_policy_probe_mse << ")\n";
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir, int start, int count,
             std::uint64_t seed, RunContext& ctx) {
    const PolicyCheckpoint ck = policy_from_text(csv::read_file(checkpoint_path));
    const Dataset data = load_dataset(data_dir);
    if (ck.policy.spec.horizon != data.env.horizon)
        throw InvalidInput("checkpoint horizon does not match the dataset horizon");
    if (start < 0 || start + count > static_cast<int>(data.trajectories.size()))
        throw InvalidInput("eval range outside the dataset");

    std::vector<Trajectory> probe_trajs(data.trajectories.begin() + start,
                                        data.trajectories.begin() + start + count);
    const std::vector<ProbePair> probes = make_probe_pairs(probe_trajs, ck.embed);
    const double mse = eval_probe_mse(ck.policy, probes, data.env);

    std::ostringstream os;
    os << "probe_count,probe_mse\n" << count << ',' << csv::num(mse) << '\n';
    ctx.write_output("eval.csv", os.str());
    ctx.finalize("eval", seed);
    std::cout << "eval: probe MSE " << mse << " over " << count << " trajectories\n";
    return kExitOk;
}

int cmd_cross_eval(const std::string& ck_a, const std::string& ck_b, const std::string& data_a,
                   const std::string& data_b, int start, int count, std::uint64_t seed,
                   RunContext& ctx) {
    const PolicyCheckpoint a = policy_from_text(csv::read_file(ck_a));
    const PolicyCheckpoint b = policy_from_text(csv::read_file(ck_b));
    const Dataset da = load_dataset(data_a);
    const Dataset db = load_dataset(data_b);
    if (a.policy.spec.horizon != da.env.horizon || b.policy.spec.horizon != da.env.horizon ||
        da.env.horizon != db.env.horizon)
        throw InvalidInput("cross-eval horizon mismatch");
    if (start + count > static_cast<int>(da.trajectories.size()) ||
        start + count > static_cast<int>(db.trajectories.size()))
        throw InvalidInput("cross-eval range outside a dataset");

    std::vector<Trajectory> ta(da.trajectories.begin() + start,
                               da.trajectories.begin() + start + count);
    std::vector<Trajectory> tb(db.trajectories.begin() + start,
                               db.trajectories.begin() + start + count);
    const auto probes_a = make_probe_pairs(ta, a.embed);
    const auto probes_b = make_probe_pairs(tb, a.embed);
    const Eigen::Matrix2d table =
        cross_evaluate(a.policy, b.policy, probes_a, probes_b, da.env);

    std::ostringstream os;
    os << "test_dataset,policy_a,policy_b\n";
    os << "dataset_a," << csv::num(table(0, 0)) << ',' << csv::num(table(0, 1)) << '\n';
    os << "dataset_b," << csv::num(table(1, 0)) << ',' << csv::num(table(1, 1)) << '\n';
    ctx.write_output("cross_eval.csv", os.str());
    ctx.finalize("cross-eval", seed);
    std::cout << "cross-eval:\n  A on A " << table(0, 0) << ", B on A " << table(0, 1)
              << "\n  A on B " << table(1, 0) << ", B on B " << table(1, 1) << "\n";
    return kExitOk;
}

int cmd_sweep(const std::string& generator, const std::string& sizes_text,
              const std::string& seeds_text, int probe_count, const TrainOptions& train_opts,
              const EnvOptions& env_opts, std::uint64_t seed, RunContext& ctx) {
    const EnvConfig env = env_opts.to_env();
    DatasetKind kind;
    if (generator == "splines") kind = DatasetKind::splines;
    else if (generator == "deceleration") kind = DatasetKind::deceleration;
    else throw InvalidInput("unknown generator: " + generator);

    const std::vector<int> sizes = parse_int_list(sizes_text);
    std::vector<std::uint64_t> seeds;
    for (int s : parse_int_list(seeds_text)) seeds.push_back(static_cast<std::uint64_t>(s));
    if (sizes.empty() || seeds.empty())
        throw InvalidInput("sweep needs nonempty sizes and seeds");

    ItinConfig cfg = build_itin_config(train_opts, env, seed);
    const auto rows = steering_size_sweep(sizes, kind, cfg, env, seeds, probe_count);

    std::ostringstream os;
    os << "size,mean_probe_mse";
    for (std::uint64_t s : seeds) os << ",seed_" << s;
    os << '\n';
    for (const SweepRow& row : rows) {
        os << row.size << ',' << csv::num(row.mean_probe_mse);
        for (double v : row.per_seed_mse) os << ',' << csv::num(v);
        os << '\n';
    }
    ctx.write_output("sweep.csv", os.str());
    ctx.finalize("sweep", seed);
    for (const SweepRow& row : rows)
        std::cout << "sweep: size " << row.size << " mean probe MSE " << row.mean_probe_mse << "\n";
    return kExitOk;
}

// Config files are INI-style with one section per subcommand:
//   [train]
//   batch-size = 64
// Command-line values override the file; unknown keys are rejected.
void add_common(CLI::App* cmd, std::uint64_t& seed, std::string& out_dir, int& threads) {
    cmd->fallthrough();
    cmd->add_option("--seed", seed, "root random seed")->capture_default_str();
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    cmd->add_option("--threads", threads, "worker thread cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iterative inversion experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; sections named per subcommand");
    app.allow_config_extras(CLI::config_extras_mode::error);

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;

    // invert
    MapOptions map_opts;
    int points = -1, max_iterations = 100;
    double residual_target = 1e-9, ridge = 0.0;
    CLI::App* invert = app.add_subcommand("invert", "run iterative inversion on a built-in map");
    add_common(invert, seed, out_dir, threads);
    invert->add_option("--map-family", map_opts.family, "linear | sin-linear | custom")
        ->check(CLI::IsMember({"linear", "sin-linear", "custom"}))
        ->capture_default_str();
    invert->add_option("--map-dim", map_opts.dim)->check(CLI::PositiveNumber)->capture_default_str();
    invert->add_option("--map-amplitude", map_opts.amplitude)->capture_default_str();
    invert->add_option("--map-coeffs", map_opts.coeffs, "row-major dim*dim doubles (custom)");
    invert->add_option("--map-offset", map_opts.offset, "dim doubles (custom)");
    invert->add_option("--points", points, "sample count M (default dim+2)");
    invert->add_option("--max-iterations", max_iterations)->capture_default_str();
    invert->add_option("--residual-target", residual_target)->capture_default_str();
    invert->add_option("--ridge", ridge)->capture_default_str();

    // verify
    VerifyOptions verify_opts;
    CLI::App* verify = app.add_subcommand("verify", "run the theorem certificate suite");
    add_common(verify, seed, out_dir, threads);
    verify->add_option("--suite", verify_opts.suite, "comma list from t1,t2,t3,t4,l1")
        ->capture_default_str();
    verify->add_option("--t1-dims", verify_opts.t1_dims)->capture_default_str();
    verify->add_option("--t1-trials", verify_opts.t1_trials)->capture_default_str();
    verify->add_option("--t3-instances", verify_opts.t3_instances)->capture_default_str();
    verify->add_option("--t3-iterations", verify_opts.t3_iterations)->capture_default_str();
    verify->add_option("--t4-points", verify_opts.t4_points)->capture_default_str();
    verify->add_option("--t4-iterations", verify_opts.t4_iterations)->capture_default_str();
    verify->add_option("--slopes-lo", verify_opts.slopes_lo)->capture_default_str();
    verify->add_option("--slopes-hi", verify_opts.slopes_hi)->capture_default_str();
    verify->add_option("--slopes-grid", verify_opts.slopes_grid)->capture_default_str();
    verify->add_option("--epsilon-override", verify_opts.epsilon_override,
                       "force epsilon (negative control)");
    verify->add_option("--t2-max-iterations", verify_opts.t2_max_iterations)->capture_default_str();

    // gen-data
    std::string generator = "splines";
    int count = 0;
    EnvOptions env_opts;
    int t_acc = -1;
    double f_acc = -1.0;
    CLI::App* gen = app.add_subcommand("gen-data", "generate a trajectory dataset");
    add_common(gen, seed, out_dir, threads);
    gen->add_option("--generator", generator)
        ->check(CLI::IsMember({"splines", "deceleration"}))
        ->capture_default_str();
    gen->add_option("--count", count)->required()->check(CLI::PositiveNumber);
    gen->add_option("--t-acc", t_acc, "acceleration steps (deceleration; default T/2)");
    gen->add_option("--f-acc", f_acc, "acceleration force bound (default f_clip/4)");
    gen->add_option("--horizon", env_opts.horizon)->capture_default_str();
    gen->add_option("--dt", env_opts.dt)->capture_default_str();
    gen->add_option("--c-max", env_opts.c_max, "plane bound (default horizon*dt*2)");
    gen->add_option("--f-clip", env_opts.f_clip)->capture_default_str();

    // train
    TrainOptions train_opts;
    CLI::App* train = app.add_subcommand("train", "run the control-learning loop");
    add_common(train, seed, out_dir, threads);
    train->add_option("--data-dir", train_opts.data_dir)->required();
    train->add_option("--steer-size", train_opts.steer_size)->capture_default_str();
    train->add_option("--probe-size", train_opts.probe_size)->capture_default_str();
    train->add_option("--batch-size", train_opts.batch_size)->capture_default_str();
    train->add_option("--alpha", train_opts.alpha)
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    train->add_option("--eta", train_opts.eta, "exploration noise (default 0.25*f_clip)");
    train->add_option("--buffer-multiplier", train_opts.buffer_multiplier)
        ->capture_default_str();
    train->add_option("--iterations", train_opts.iterations)->capture_default_str();
    train->add_option("--ridge", train_opts.ridge)->capture_default_str();
    train->add_option("--keyframes", train_opts.keyframes)->capture_default_str();
    train->add_flag("--normalize", train_opts.normalize);
    train->add_flag("--no-state{false}", train_opts.use_state, "drop state features");
    train->add_option("--time-encoding", train_opts.time_encoding)
        ->check(CLI::IsMember({"auto", "one_hot", "normalized_scalar"}))
        ->capture_default_str();
    train->add_flag("--no-interaction{false}", train_opts.interaction,
                    "use the flat concatenated feature layout");

    // eval
    std::string checkpoint_path, data_dir;
    int eval_start = 0, eval_count = 48;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    add_common(eval_cmd, seed, out_dir, threads);
    eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
    eval_cmd->add_option("--data-dir", data_dir)->required();
    eval_cmd->add_option("--start", eval_start)->capture_default_str();
    eval_cmd->add_option("--count", eval_count)->capture_default_str();

    // cross-eval
    std::string ck_a, ck_b, data_a, data_b;
    int cross_start = 0, cross_count = 48;
    CLI::App* cross = app.add_subcommand("cross-eval", "2x2 policy/test-set MSE table");
    add_common(cross, seed, out_dir, threads);
    cross->add_option("--checkpoint-a", ck_a)->required();
    cross->add_option("--checkpoint-b", ck_b)->required();
    cross->add_option("--data-a", data_a)->required();
    cross->add_option("--data-b", data_b)->required();
    cross->add_option("--start", cross_start)->capture_default_str();
    cross->add_option("--count", cross_count)->capture_default_str();

    // sweep
    std::string sweep_generator = "splines", sizes_text = "0,10,100", seeds_text = "1,2,3";
    int probe_count = 48;
    TrainOptions sweep_train_opts;
    EnvOptions sweep_env_opts;
    CLI::App* sweep = app.add_subcommand("sweep", "steering-size sweep");
    add_common(sweep, seed, out_dir, threads);
    sweep->add_option("--generator", sweep_generator)
        ->check(CLI::IsMember({"splines", "deceleration"}))
        ->capture_default_str();
    sweep->add_option("--sizes", sizes_text)->capture_default_str();
    sweep->add_option("--seeds", seeds_text)->capture_default_str();
    sweep->add_option("--probe-count", probe_count)->capture_default_str();
    sweep->add_option("--batch-size", sweep_train_opts.batch_size)->capture_default_str();
    sweep->add_option("--alpha", sweep_train_opts.alpha)->capture_default_str();
    sweep->add_option("--eta", sweep_train_opts.eta);
    sweep->add_option("--buffer-multiplier", sweep_train_opts.buffer_multiplier)
        ->capture_default_str();
    sweep->add_option("--iterations", sweep_train_opts.iterations)->capture_default_str();
    sweep->add_option("--ridge", sweep_train_opts.ridge)->capture_default_str();
    sweep->add_option("--keyframes", sweep_train_opts.keyframes)->capture_default_str();
    sweep->add_option("--horizon", sweep_env_opts.horizon)->capture_default_str();
    sweep->add_option("--dt", sweep_env_opts.dt)->capture_default_str();
    sweep->add_option("--c-max", sweep_env_opts.c_max);
    sweep->add_option("--f-clip", sweep_env_opts.f_clip)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        RunContext ctx;
        ctx.out_dir = out_dir;
        ctx.config_snapshot = snapshot_config(cmd);

        if (cmd == invert)
            return cmd_invert(map_opts, points, max_iterations, residual_target, ridge, seed, ctx);
        if (cmd == verify) return cmd_verify(verify_opts, seed, ctx);
        if (cmd == gen)
            return cmd_gen_data(generator, count, env_opts, t_acc, f_acc, seed, ctx);
        if (cmd == train) return cmd_train(train_opts, seed, ctx);
        if (cmd == eval_cmd)
            return cmd_eval(checkpoint_path, data_dir, eval_start, eval_count, seed, ctx);
        if (cmd == cross)
            return cmd_cross_eval(ck_a, ck_b, data_a, data_b, cross_start, cross_count, seed, ctx);
        if (cmd == sweep)
            return cmd_sweep(sweep_generator, sizes_text, seeds_text, probe_count,
                             sweep_train_opts, sweep_env_opts, seed, ctx);
        std::cerr << "no subcommand\n";
        return kExitConfig;
    } catch (const PreconditionFailed& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCertificateFailed;
    } catch (const DegenerateIteration& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDegenerate;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
