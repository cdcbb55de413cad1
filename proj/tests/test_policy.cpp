#include <catch2/catch_amalgamated.hpp>

#include "pdmp/cell_model.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/value.hpp"
#include "test_models.hpp"

#include <cmath>

using namespace pdmp;
using Catch::Approx;

namespace {

const CellParams kParams{2.0, 1.0, 1.0};

SolverConfig small_config() {
    SolverConfig cfg;
    cfg.nbpt = 101;
    return cfg;
}

RewardFunction cell_reward(int horizon = 1, int cells = 1) {
    return discounted_capped_size_reward(
        kParams, static_cast<double>(cells + horizon) * kParams.gamma);
}

} // namespace

TEST_CASE("threshold: constant rewards stop immediately") {
    const PdmpModel model = testutil::lattice_walk_model();
    const RewardFunction g = testutil::constant_reward(0.7);
    const ValueFunction vf = value_iterate(model, g, 0, small_config());
    const ThresholdTime th = threshold_time(vf, 0, testutil::scalar_state(0.0),
                                            1e-3);
    CHECK_FALSE(th.wait_for_jump);
    CHECK(th.time == 0.0);
}

TEST_CASE("threshold: division start waits for the jump") {
    const PdmpModel model = time_augmented_population_model(kParams);
    const RewardFunction g = cell_reward();
    SolverConfig cfg;
    cfg.nbpt = 2001;
    const ValueFunction vf = value_iterate(model, g, 0, cfg);
    const HybridState x = augmented_initial_state({3.0});
    const ThresholdTime th = threshold_time(vf, 0, x, 1e-3);
    CHECK(th.wait_for_jump);
    CHECK(th.time > 1.0);          // the truncation horizon stands in for t*
    CHECK(th.k_value > th.sup_j);
}

TEST_CASE("threshold: a huge tolerance accepts the first grid point") {
    const PdmpModel model = testutil::lattice_walk_model();
    const RewardFunction g = testutil::lattice_reward();
    const ValueFunction vf = value_iterate(model, g, 0, small_config());
    // From a valley the walk would rather wait, but eps beyond sup_j accepts
    // t = 0 at once.
    const ThresholdTime th =
        threshold_time(vf, 0, testutil::scalar_state(4.0), 10.0);
    if (!th.wait_for_jump) {
        CHECK(th.time == 0.0);
    }
    CHECK_THROWS_AS(threshold_time(vf, 0, testutil::scalar_state(4.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("one-stage execution stops at threshold or first jump") {
    const PdmpModel model = time_augmented_population_model(kParams);
    const RewardFunction g = cell_reward();
    const StoppingPolicy policy{1, 0.05};
    const PolicyExecutor executor(model, g, policy, small_config());
    const HybridState x = augmented_initial_state({0.4, 0.6});

    for (std::uint64_t stream = 0; stream < 50; ++stream) {
        const PolicyPath path = executor.execute(x, RngStream(4401, stream));
        REQUIRE(path.stages.size() >= 1);
        const StageRecord st = path.stages[0];
        CHECK(path.stop_time == std::min(st.threshold, st.inter_jump));
        CHECK(path.reward == Approx(g(path.stopped_state)));
    }
}

TEST_CASE("no jumps ever: the policy stops at the stage threshold") {
    const PdmpModel model = testutil::no_jump_model();
    const RewardFunction g = testutil::lattice_reward();
    const StoppingPolicy policy{1, 0.01};
    const PolicyExecutor executor(model, g, policy, small_config());
    const HybridState x = testutil::scalar_state(2.0);

    const ThresholdTime th = executor.threshold(0, x, policy.epsilon);
    const PolicyPath a = executor.execute(x, RngStream(4402, 0));
    const PolicyPath b = executor.execute(x, RngStream(4402, 99));
    CHECK(a.stop_time == th.time);
    CHECK(b.stop_time == th.time); // deterministic: T1 is infinite
    CHECK(a.stages[0].inter_jump == kInfiniteTime);
}

TEST_CASE("pathwise decomposition replays the stop time exactly") {
    const PdmpModel lattice = testutil::lattice_walk_model();
    const RewardFunction g0 = testutil::lattice_reward();
    SolverConfig cfg = small_config();

    for (int n : {1, 2, 3}) {
        const PolicyExecutor executor(lattice, g0, StoppingPolicy{n, 0.02}, cfg);
        for (std::uint64_t stream = 0; stream < 300; ++stream) {
            const PolicyPath path =
                executor.execute(testutil::scalar_state(1.0),
                                 RngStream(4403u + static_cast<std::uint64_t>(n),
                                           stream));
            CHECK(path.stop_time == replay_stop_time(path));
            CHECK(path.stages.size() <= static_cast<std::size_t>(n));
            // stop_time <= T_n: the realized jump times dominate the stop.
            double t_upper = 0.0;
            for (const auto& st : path.stages) t_upper += st.inter_jump;
            CHECK(path.stop_time <= t_upper);
        }
    }

    const PdmpModel model = time_augmented_population_model(kParams);
    const RewardFunction g = cell_reward(2, 2);
    const PolicyExecutor executor(model, g, StoppingPolicy{2, 0.05}, cfg);
    const HybridState x = augmented_initial_state({0.8, 1.5});
    for (std::uint64_t stream = 0; stream < 100; ++stream) {
        const PolicyPath path = executor.execute(x, RngStream(4404, stream));
        CHECK(path.stop_time == replay_stop_time(path));
    }
}

TEST_CASE("policy evaluation: constant reward and the value sandwich") {
    const PdmpModel lattice = testutil::lattice_walk_model();
    const RewardFunction c = testutil::constant_reward(0.7);
    const PolicyEvaluation flat = evaluate_policy(
        lattice, c, StoppingPolicy{1, 0.01}, testutil::scalar_state(0.0), 500,
        small_config(), 4405);
    CHECK(flat.mean == Approx(0.7).margin(1e-12));
    CHECK(flat.standard_error == Approx(0.0).margin(1e-12));

    const PdmpModel model = time_augmented_population_model(kParams);
    const RewardFunction g = cell_reward();
    const double eps = 0.05;
    const PolicyEvaluation eval =
        evaluate_policy(model, g, StoppingPolicy{1, eps},
                        augmented_initial_state({3.0}), 4000, small_config(),
                        4406);
    const ValueFunction vf = value_iterate(model, g, 1, small_config());
    const double v1 = vf.evaluate(augmented_initial_state({3.0}));
    CHECK(eval.mean >= v1 - eps - 3.0 * eval.standard_error);
    CHECK(eval.mean <= v1 + 3.0 * eval.standard_error);
    CHECK(eval.ci95_high - eval.ci95_low ==
          Approx(2.0 * 1.96 * eval.standard_error));

    CHECK_THROWS_AS(evaluate_policy(model, g, StoppingPolicy{1, eps},
                                    augmented_initial_state({3.0}), 1,
                                    small_config(), 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(PolicyExecutor(model, g, StoppingPolicy{0, eps},
                                   small_config()),
                    std::invalid_argument);
}

TEST_CASE("executed rewards are reproducible per stream") {
    const PdmpModel model = time_augmented_population_model(kParams);
    const RewardFunction g = cell_reward();
    const PolicyExecutor executor(model, g, StoppingPolicy{2, 0.05},
                                  small_config());
    const HybridState x = augmented_initial_state({1.0, 2.0});
    const PolicyPath p1 = executor.execute(x, RngStream(4407, 3));
    const PolicyPath p2 = executor.execute(x, RngStream(4407, 3));
    CHECK(p1.stop_time == p2.stop_time);
    CHECK(p1.reward == p2.reward);
    CHECK(p1.stopped_state == p2.stopped_state);
}
