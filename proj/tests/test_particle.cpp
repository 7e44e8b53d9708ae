#include <doctest.h>

#include <cmath>

#include "itin/particle.hpp"

using namespace itin;

TEST_CASE("step integrates semi-implicitly") {
    EnvConfig cfg;
    cfg.c_max = 100.0;
    const ParticleState s{0.0, 0.0, 1.0, 0.0};
    const ParticleState n = step(s, Action{0.0, 10.0}, cfg);
    CHECK(n.x == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(n.y == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(n.vx == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(n.vy == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("step keeps an equilibrium state unchanged") {
    EnvConfig cfg;
    const ParticleState s{1.0, 2.0, 0.0, 0.0};
    CHECK(step(s, Action{}, cfg) == s);
}

TEST_CASE("the deceleration force law halves velocity in one step") {
    EnvConfig cfg;
    cfg.c_max = 100.0;
    const ParticleState s{1.0, 1.0, 2.0, 0.0};
    // F = -v/(2 dt) = -10 at v = 2.
    const ParticleState n = step(s, Action{-10.0, 0.0}, cfg);
    CHECK(n.vx == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("step clamps force and position") {
    EnvConfig cfg;
    cfg.f_clip = 4.0;
    cfg.c_max = 1.0;
    const ParticleState s{0.5, 0.5, 0.0, 0.0};
    const ParticleState n = step(s, Action{100.0, 0.0}, cfg);
    CHECK(n.vx == doctest::Approx(0.4).epsilon(1e-15));  // force clamped to 4

    const ParticleState wall = step(ParticleState{0.98, 0.5, 5.0, 0.0}, Action{}, cfg);
    CHECK(wall.x == 1.0);   // clamped to the plane
    CHECK(wall.vx == 0.0);  // velocity zeroed on the clamped axis
    CHECK(wall.vy == 0.0);
}

TEST_CASE("spline dataset is replayable and starts at the origin") {
    EnvConfig cfg = EnvConfig::make(32);
    RngStream rng(17);
    GenStats stats;
    const auto dataset = gen_spline_dataset(20, cfg, rng, &stats);
    REQUIRE(dataset.size() == 20);
    CHECK(stats.attempts >= 20);

    for (const Trajectory& tr : dataset) {
        REQUIRE(tr.states.size() == 33);
        REQUIRE(tr.actions.size() == 32);
        CHECK(tr.states[0].x == 0.0);
        CHECK(tr.states[0].y == 0.0);
        CHECK(tr.states[0].vx == 0.0);
        CHECK(tr.states[0].vy == 0.0);
        for (const Action& a : tr.actions) {
            CHECK(std::abs(a.fx) <= cfg.f_clip);
            CHECK(std::abs(a.fy) <= cfg.f_clip);
        }
        // Bit-exact replay.
        const Trajectory re = replay_actions(tr.actions, cfg);
        REQUIRE(re.states.size() == tr.states.size());
        for (std::size_t t = 0; t < tr.states.size(); ++t) CHECK(re.states[t] == tr.states[t]);
    }
}

TEST_CASE("clamped B-spline interpolates its endpoints") {
    RngStream rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Eigen::Vector2d> ctrl(5);
        for (auto& p : ctrl) p = {rng.uniform_in(0.0, 6.0), rng.uniform_in(0.0, 6.0)};
        const Eigen::Vector2d at0 = bspline_point(ctrl, 2, 0.0);
        const Eigen::Vector2d at1 = bspline_point(ctrl, 2, 1.0);
        CHECK((at0 - ctrl.front()).norm() <= 1e-12);
        CHECK((at1 - ctrl.back()).norm() <= 1e-12);
    }
}

TEST_CASE("degenerate spline with equal control points is stationary") {
    // All control points equal: after the origin shift the curve is the zero
    // curve, so actions vanish and the trajectory is constant.
    std::vector<Eigen::Vector2d> ctrl(5, Eigen::Vector2d(2.5, 2.5));
    const Eigen::Vector2d shift = ctrl.front();
    for (auto& p : ctrl) p -= shift;
    for (double u : {0.0, 0.3, 0.7, 1.0}) CHECK(bspline_point(ctrl, 2, u).norm() == 0.0);
}

TEST_CASE("deceleration dataset halves velocity after t_acc away from walls") {
    EnvConfig cfg = EnvConfig::make(32);
    cfg.c_max = 1000.0;  // keep the halving test clear of wall contacts
    const int t_acc = 16;
    RngStream rng(23);
    const auto dataset = gen_deceleration_dataset(30, cfg, t_acc, rng, 2.0);
    REQUIRE(dataset.size() == 30);

    long checked = 0;
    for (const Trajectory& tr : dataset) {
        // Bit-exact replay.
        const Trajectory re = replay_actions(tr.actions, cfg);
        for (std::size_t t = 0; t < tr.states.size(); ++t) CHECK(re.states[t] == tr.states[t]);

        for (int t = t_acc; t < cfg.horizon; ++t) {
            const ParticleState& prev = tr.states[t];
            const ParticleState& next = tr.states[t + 1];
            // Skip steps where clamping interfered (wall contact or force clip).
            const bool clean =
                next.vx == prev.vx + tr.actions[t].fx * cfg.dt &&
                next.vy == prev.vy + tr.actions[t].fy * cfg.dt &&
                std::abs(tr.actions[t].fx) < cfg.f_clip && std::abs(tr.actions[t].fy) < cfg.f_clip;
            if (!clean) continue;
            const double prev_speed = std::hypot(prev.vx, prev.vy);
            const double next_speed = std::hypot(next.vx, next.vy);
            if (prev_speed > 1e-12) {
                CHECK(next_speed == doctest::Approx(prev_speed / 2.0).epsilon(1e-12));
                ++checked;
            }
        }

        // Geometric decay from t_acc on clean tails.
        const double v0 = std::hypot(tr.states[t_acc].vx, tr.states[t_acc].vy);
        const double v4 = std::hypot(tr.states[t_acc + 4].vx, tr.states[t_acc + 4].vy);
        if (v0 > 1e-9) CHECK(v4 <= v0 / 16.0 * (1.0 + 1e-9));
    }
    CHECK(checked > 100);  // the property was actually exercised
}

TEST_CASE("deceleration boundary cases") {
    EnvConfig cfg = EnvConfig::make(8);
    RngStream rng(5);
    const auto single = gen_deceleration_dataset(2, cfg, cfg.horizon - 1, rng, 1.0);
    CHECK(single[0].actions.size() == 8);

    RngStream rng2(6);
    const auto zero_force = gen_deceleration_dataset(1, cfg, 4, rng2, 0.0);
    for (const ParticleState& s : zero_force[0].states) {
        CHECK(s.x == 0.0);
        CHECK(s.y == 0.0);
    }

    RngStream rng3(7);
    CHECK_THROWS_AS(gen_deceleration_dataset(1, cfg, 0, rng3), InvalidInput);
    CHECK_THROWS_AS(gen_deceleration_dataset(1, cfg, cfg.horizon, rng3), InvalidInput);
    CHECK_THROWS_AS(gen_deceleration_dataset(0, cfg, 4, rng3), InvalidInput);
}

TEST_CASE("trajectory_mse sums positional distances") {
    EnvConfig cfg = EnvConfig::make(10);
    Trajectory a, b;
    for (int t = 0; t <= 10; ++t) {
        a.states.push_back(ParticleState{double(t), 0.0, 0.0, 0.0});
        b.states.push_back(ParticleState{double(t) + 3.0, 4.0, 0.0, 0.0});
    }
    a.actions.resize(10);
    b.actions.resize(10);
    CHECK(trajectory_mse(a, a) == 0.0);
    CHECK(trajectory_mse(a, b) == doctest::Approx(55.0).epsilon(1e-12));  // 11 * 5
    CHECK(trajectory_mse(a, b) == trajectory_mse(b, a));

    Trajectory shorter = a;
    shorter.states.pop_back();
    CHECK_THROWS_AS(trajectory_mse(a, shorter), InvalidInput);
}

TEST_CASE("dataset generation is bit-deterministic in the seed") {
    EnvConfig cfg = EnvConfig::make(16);
    RngStream r1(99), r2(99);
    const auto a = gen_spline_dataset(5, cfg, r1);
    const auto b = gen_spline_dataset(5, cfg, r2);
    for (int i = 0; i < 5; ++i) {
        CHECK(a[i].states == b[i].states);
        CHECK(a[i].actions == b[i].actions);
        CHECK(trajectory_to_csv(a[i]) == trajectory_to_csv(b[i]));
    }
}

TEST_CASE("trajectory CSV round-trips exactly") {
    EnvConfig cfg = EnvConfig::make(16);
    RngStream rng(55);
    const auto dataset = gen_spline_dataset(3, cfg, rng);
    for (const Trajectory& tr : dataset) {
        const Trajectory back = trajectory_from_csv(trajectory_to_csv(tr));
        CHECK(back.states == tr.states);
        CHECK(back.actions == tr.actions);
    }
}
