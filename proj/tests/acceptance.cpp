// Acceptance suite: one numbered criterion per check, each printing a
// [PASS]/[FAIL] line with the measured quantities. Run with no arguments for
// the full suite, or with a criterion number (1-8) to run a single one.

#include "pdmp/cell_model.hpp"
#include "pdmp/model.hpp"
#include "pdmp/point_measure.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/serialize.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/value.hpp"

#include <json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace pdmp;

namespace {

// Independent analytic oracle for the one-jump population value from a
// single size-3 cell: 3 e^{3/2} E1(3/2), evaluated ahead of this
// implementation by high-precision quadrature of the hazard integral
// (30-digit arithmetic, cross-checked against the exponential-integral
// identity). The reported reference band for the same quantity is
// 1.3447 +- 3.6034e-4.
constexpr double kOracleV1Population = 1.3447700078747489;
constexpr double kReferenceV1Population = 1.3447;
constexpr double kReferenceV1Tagged = 1.0018;

const CellParams kDefaults{2.0, 1.0, 1.0};

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion
              << ": " << detail << "\n";
    if (!pass) ++g_failures;
}

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(PDMP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    if (WIFEXITED(rc)) return WEXITSTATUS(rc);
    return -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json load_json(const std::string& path) {
    return nlohmann::json::parse(read_file(path));
}

double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
}

RewardFunction default_reward(int cells, int horizon) {
    return discounted_capped_size_reward(
        kDefaults, static_cast<double>(cells + horizon) * kDefaults.gamma);
}

// ---------------------------------------------------------------------------

void criterion_1_population_value() {
    const auto start = std::chrono::steady_clock::now();
    const int rc = run_cli("--out acc1 compare");
    const double elapsed = seconds_since(start);
    if (rc != 0) {
        report(1, false, "compare exited with code " + std::to_string(rc));
        return;
    }
    const nlohmann::json rep = load_json("acc1.json");
    const double v1 = rep["v1_population"]["value"].get<double>();
    const double gap_ref = std::fabs(v1 - kReferenceV1Population);
    const double gap_oracle = std::fabs(v1 - kOracleV1Population);
    const bool pass = gap_ref <= 5e-3 && gap_oracle <= 1e-3 && elapsed <= 120.0;
    std::ostringstream detail;
    detail << "V1(population from size 3) = " << v1 << ", |v-1.3447| = "
           << gap_ref << " (<= 5e-3), |v-oracle| = " << gap_oracle
           << " (<= 1e-3), " << elapsed << " s (<= 120)";
    report(1, pass, detail.str());
}

void criterion_2_tagged_value() {
    const int rc = run_cli("--out acc2 compare");
    if (rc != 0) {
        report(2, false, "compare exited with code " + std::to_string(rc));
        return;
    }
    const nlohmann::json rep = load_json("acc2.json");
    const double tagged = rep["v1_tagged"]["value"].get<double>();
    const double tagged_mc = rep["v1_tagged_mc"]["mean"].get<double>();
    const bool pass = std::fabs(tagged_mc - kReferenceV1Tagged) <= 5e-3 &&
                      std::fabs(tagged - kReferenceV1Tagged) <= 5e-3 &&
                      std::fabs(tagged - 1.0) <= 1e-6;
    std::ostringstream detail;
    detail << "tagged value = " << tagged << " (display evaluates to 1 exactly"
           << "), MC variant = " << tagged_mc << "; both within 5e-3 of "
           << kReferenceV1Tagged;
    report(2, pass, detail.str());
}

void criterion_3_divergence_gap() {
    const int rc = run_cli("--out acc3 compare");
    if (rc != 0) {
        report(3, false, "compare exited with code " + std::to_string(rc));
        return;
    }
    const nlohmann::json rep = load_json("acc3.json");
    const double gap = rep["gap"].get<double>();
    std::ostringstream detail;
    detail << "population - tagged gap = " << gap << " (>= 0.3)";
    report(3, gap >= 0.3, detail.str());
}

void criterion_4_cross_validation() {
    RngStream rng(20240404, 0);
    const double alphas[] = {0.5, 1.0, 2.0};
    const double rates[] = {1.0, 2.0};
    const double gammas[] = {0.5, 1.0, 2.0};
    SolverConfig cfg; // default full-resolution grid

    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        CellParams params;
        params.alpha = alphas[rng.next_u64() % 3];
        params.r = rates[rng.next_u64() % 2];
        params.gamma = gammas[rng.next_u64() % 3];
        const int cells = 1 + static_cast<int>(rng.next_u64() % 4);
        std::vector<double> sizes;
        for (int i = 0; i < cells; ++i) {
            sizes.push_back(0.1 + 3.9 * rng.uniform01());
        }

        const OneJumpValue direct = direct_one_jump_value(sizes, params, cfg);
        const PdmpModel model = time_augmented_population_model(params);
        const RewardFunction g = discounted_capped_size_reward(
            params, static_cast<double>(cells + 1) * params.gamma);
        const ValueFunction vf = value_iterate(model, g, 1, cfg);
        const double via_op = vf.evaluate(augmented_initial_state(sizes));
        worst = std::max(worst, std::fabs(direct.value - via_op));
    }
    std::ostringstream detail;
    detail << "20 randomized populations, max |direct - operator| = " << worst
           << " (<= 5e-3)";
    report(4, worst <= 5e-3, detail.str());
}

void criterion_5_policy_optimality() {
    const auto start = std::chrono::steady_clock::now();
    const PdmpModel model = time_augmented_population_model(kDefaults);
    const RewardFunction g = default_reward(1, 1);
    const HybridState x = augmented_initial_state({3.0});
    const double eps = 0.05;

    const PolicyEvaluation eval = evaluate_policy(
        model, g, StoppingPolicy{1, eps}, x, 100000, SolverConfig{}, 20240817,
        1000);
    const ValueFunction vf = value_iterate(model, g, 1, SolverConfig{});
    const double v1 = vf.evaluate(x);
    const double elapsed = seconds_since(start);

    const double low = v1 - eps - 3.0 * eval.standard_error;
    const double high = v1 + 3.0 * eval.standard_error;
    const bool pass =
        eval.mean >= low && eval.mean <= high && elapsed <= 300.0;
    std::ostringstream detail;
    detail << "policy mean = " << eval.mean << " (stderr "
           << eval.standard_error << "), V1 = " << v1 << ", window [" << low
           << ", " << high << "], " << elapsed << " s (<= 300)";
    report(5, pass, detail.str());
}

double ks_against_survivor(const PdmpModel& model, const HybridState& x,
                           std::uint64_t seed) {
    constexpr std::size_t kSamples = 100000;
    std::vector<double> samples(kSamples);
    for (std::size_t i = 0; i < kSamples; ++i) {
        samples[i] = simulate(model, x, StopRule::after_jumps(1),
                              RngStream(seed, i))
                         .jumps[0]
                         .s;
    }
    std::sort(samples.begin(), samples.end());
    double ks = 0.0;
    const double n = static_cast<double>(kSamples);
    for (std::size_t i = 0; i < kSamples; ++i) {
        const double f = 1.0 - survivor(model, x, samples[i]);
        ks = std::max(ks, std::fabs(f - static_cast<double>(i) / n));
        ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / n - f));
    }
    return ks;
}

void criterion_6_sampling_law() {
    const HybridState x{0, PointMeasure::dirac(3.0)};
    const double ks_pop =
        ks_against_survivor(population_model(kDefaults), x, 20240601);
    const double ks_single =
        ks_against_survivor(single_cell_model(kDefaults), x, 20240602);
    const bool pass = ks_pop < 0.006 && ks_single < 0.006;
    std::ostringstream detail;
    detail << "KS(population) = " << ks_pop << ", KS(single cell) = "
           << ks_single << " (both < 0.006, 1e5 samples)";
    report(6, pass, detail.str());
}

// --- criterion 7: property batteries ---------------------------------------

bool property_semigroup() {
    const PdmpModel model = time_augmented_population_model(kDefaults);
    const TestFunctionBasis basis =
        TestFunctionBasis::dyadic_tents(0.0, 64.0, 3, 2);
    RngStream rng(20240701, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> sizes;
        const int cells = 1 + static_cast<int>(rng.next_u64() % 3);
        for (int i = 0; i < cells; ++i) sizes.push_back(0.2 + 3.0 * rng.uniform01());
        const HybridState x = augmented_initial_state(sizes);
        const double s = rng.uniform01();
        const double t = rng.uniform01();
        if (hybrid_distance(model.flow(model.flow(x, s), t),
                            model.flow(x, s + t), basis) >= 1e-9) {
            return false;
        }
    }
    return true;
}

bool property_survivor_monotone() {
    const PdmpModel model = population_model(kDefaults);
    RngStream rng(20240702, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const HybridState x{
            0, PointMeasure::dirac(0.2 + 3.0 * rng.uniform01())};
        if (survivor(model, x, 0.0) != 1.0) return false;
        const double t1 = 2.0 * rng.uniform01();
        const double t2 = t1 + 2.0 * rng.uniform01();
        if (survivor(model, x, t2) > survivor(model, x, t1) + 1e-12) {
            return false;
        }
    }
    return true;
}

bool property_jump_conservation(bool check_no_move) {
    const PdmpModel model = population_model(kDefaults);
    RngStream rng(20240703, 0);
    int jumps_seen = 0;
    for (int trial = 0; jumps_seen < 1000; ++trial) {
        std::vector<double> sizes;
        const int cells = 1 + static_cast<int>(rng.next_u64() % 4);
        for (int i = 0; i < cells; ++i) sizes.push_back(0.2 + 3.8 * rng.uniform01());
        const Trajectory traj = simulate(
            model, population_initial_state(sizes), StopRule::after_jumps(5),
            RngStream(20240704, static_cast<std::uint64_t>(trial)));
        HybridState current = traj.initial;
        for (const auto& jump : traj.jumps) {
            const HybridState pre = model.flow(current, jump.s);
            const auto mass = [](const HybridState& s) {
                return s.measure.integrate(
                    [](const std::vector<double>& y) { return y[0]; });
            };
            if (check_no_move) {
                if (jump.z == pre) return false;
            } else {
                if (jump.z.measure.total_multiplicity() !=
                    pre.measure.total_multiplicity() + 1) {
                    return false;
                }
                if (std::fabs(mass(jump.z) - mass(pre)) >
                    1e-12 * std::max(1.0, mass(pre))) {
                    return false;
                }
            }
            current = jump.z;
            ++jumps_seen;
        }
    }
    return true;
}

bool property_post_division_identity() {
    const RewardFunction g = discounted_capped_size_reward(kDefaults, 100.0);
    RngStream rng(20240705, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> sizes;
        const int cells = 1 + static_cast<int>(rng.next_u64() % 4);
        for (int i = 0; i < cells; ++i) sizes.push_back(0.05 + 4.95 * rng.uniform01());
        const std::size_t split = rng.next_u64() % sizes.size();
        const double t1 = 2.0 * rng.uniform01();
        const double growth = std::exp(kDefaults.r * t1);
        std::vector<Atom> atoms;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            if (i == split) {
                atoms.push_back(Atom{{sizes[i] * growth / 2.0, t1}, 2});
            } else {
                atoms.push_back(Atom{{sizes[i] * growth, t1}, 1});
            }
        }
        const double direct =
            reward_after_first_split(sizes, split, t1, kDefaults);
        if (std::fabs(direct - g(HybridState{0, PointMeasure(atoms)})) >=
            1e-12) {
            return false;
        }
    }
    return true;
}

bool property_pathwise_decomposition() {
    // Lattice walk with memoized thresholds carries the bulk of the paths.
    PdmpModel lattice;
    lattice.flow = [](const HybridState& x, double) { return x; };
    lattice.intensity = [](const HybridState&) { return 1.0; };
    lattice.exit_time = [](const HybridState&) { return kInfiniteTime; };
    lattice.kernel.enumerate = [](const HybridState& y) {
        const double p = y.measure.atoms()[0].location[0];
        return std::vector<JumpOutcome>{
            {HybridState{0, PointMeasure::dirac(p - 1.0)}, 0.5},
            {HybridState{0, PointMeasure::dirac(p + 1.0)}, 0.5}};
    };
    lattice.hazard = [](const HybridState&, double t) { return t; };
    lattice.jump_time_inverse = [](const HybridState&, double u) {
        return -std::log(u);
    };
    const RewardFunction g_lattice{
        [](const HybridState& x) {
            return 1.0 / (1.0 + std::fabs(x.measure.atoms()[0].location[0]));
        },
        1.0};

    SolverConfig cfg;
    cfg.nbpt = 101;
    const HybridState start{0, PointMeasure::dirac(1.0)};
    for (int n : {1, 2, 3}) {
        const PolicyExecutor executor(lattice, g_lattice,
                                      StoppingPolicy{n, 0.02}, cfg);
        for (std::uint64_t stream = 0; stream < 3000; ++stream) {
            const PolicyPath path = executor.execute(
                start, RngStream(20240706 + static_cast<std::uint64_t>(n),
                                 stream));
            if (path.stop_time != replay_stop_time(path)) return false;
            double t_realized = 0.0;
            for (const auto& st : path.stages) t_realized += st.inter_jump;
            if (!(path.stop_time <= t_realized)) return false;
        }
    }

    // A continuous-state batch on the growth-division model.
    const PdmpModel model = time_augmented_population_model(kDefaults);
    for (int n : {1, 2}) {
        const RewardFunction g = default_reward(2, n);
        const PolicyExecutor executor(model, g, StoppingPolicy{n, 0.05}, cfg);
        const HybridState x = augmented_initial_state({0.8, 1.5});
        const std::uint64_t paths = (n == 1) ? 600 : 400;
        for (std::uint64_t stream = 0; stream < paths; ++stream) {
            const PolicyPath path =
                executor.execute(x, RngStream(20240707 + static_cast<std::uint64_t>(n),
                                              stream));
            if (path.stop_time != replay_stop_time(path)) return false;
            double t_realized = 0.0;
            for (const auto& st : path.stages) t_realized += st.inter_jump;
            if (!(path.stop_time <= t_realized)) return false;
        }
    }
    return true;
}

bool property_value_monotone() {
    SolverConfig cfg;
    cfg.nbpt = 101;

    PdmpModel lattice;
    lattice.flow = [](const HybridState& x, double) { return x; };
    lattice.intensity = [](const HybridState&) { return 1.0; };
    lattice.exit_time = [](const HybridState&) { return kInfiniteTime; };
    lattice.kernel.enumerate = [](const HybridState& y) {
        const double p = y.measure.atoms()[0].location[0];
        return std::vector<JumpOutcome>{
            {HybridState{0, PointMeasure::dirac(p - 1.0)}, 0.5},
            {HybridState{0, PointMeasure::dirac(p + 1.0)}, 0.5}};
    };
    lattice.hazard = [](const HybridState&, double t) { return t; };
    lattice.jump_time_inverse = [](const HybridState&, double u) {
        return -std::log(u);
    };
    const RewardFunction g_lattice{
        [](const HybridState& x) {
            return 1.0 / (1.0 + std::fabs(x.measure.atoms()[0].location[0]));
        },
        1.0};

    const ValueFunction vf = value_iterate(lattice, g_lattice, 3, cfg);
    RngStream rng(20240708, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        const HybridState x{
            0, PointMeasure::dirac(
                   std::floor(rng.uniform01() * 11.0) - 5.0)};
        double prev = g_lattice(x);
        for (int level = 1; level <= 3; ++level) {
            const double v = vf.evaluate_level(level, x);
            if (v < prev - 1e-9) return false;
            prev = v;
        }
    }

    const PdmpModel model = time_augmented_population_model(kDefaults);
    const RewardFunction g = default_reward(3, 2);
    const ValueFunction vf_cell = value_iterate(model, g, 2, cfg);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> sizes;
        const int cells = 1 + static_cast<int>(rng.next_u64() % 3);
        for (int i = 0; i < cells; ++i) sizes.push_back(0.3 + 3.0 * rng.uniform01());
        const HybridState x = augmented_initial_state(sizes);
        const double v1 = vf_cell.evaluate_level(1, x);
        const double v2 = vf_cell.evaluate_level(2, x);
        if (v1 < g(x) - 1e-9) return false;
        if (v2 < v1 - 1e-9) return false;
    }
    return true;
}

void criterion_7_property_suites() {
    struct Suite {
        const char* name;
        bool ok;
    };
    const Suite suites[] = {
        {"flow semigroup (1000 cases, tol 1e-9)", property_semigroup()},
        {"survivor monotone, F(x,0)=1 (1000 cases)",
         property_survivor_monotone()},
        {"division conservation (1000 jumps)",
         property_jump_conservation(false)},
        {"no-move-jump exclusion (1000 jumps)",
         property_jump_conservation(true)},
        {"post-division reward identity (1000 cases, 1e-12)",
         property_post_division_identity()},
        {"pathwise stop-time decomposition (1e4 paths, n in {1,2,3})",
         property_pathwise_decomposition()},
        {"value monotone in horizon, V >= g",
         property_value_monotone()},
    };
    bool all = true;
    std::ostringstream detail;
    for (const auto& s : suites) {
        all = all && s.ok;
        std::cout << "       - " << (s.ok ? "ok  " : "FAIL") << " " << s.name
                  << "\n";
    }
    report(7, all, "property suites");
}

void criterion_8_determinism() {
    bool pass = true;
    std::ostringstream detail;

    const auto rerun_identical = [&](const std::string& args,
                                     const std::vector<std::string>& files) {
        if (run_cli(args + " --out acc8_a") != 0 ||
            run_cli(args + " --out acc8_b") != 0) {
            pass = false;
            detail << "[rerun failed: " << args << "] ";
            return;
        }
        for (const auto& suffix : files) {
            const std::string a = read_file("acc8_a" + suffix);
            const std::string b = read_file("acc8_b" + suffix);
            if (a.empty() || a != b) {
                pass = false;
                detail << "[mismatch: " << args << " " << suffix << "] ";
            }
        }
    };

    rerun_identical("--seed 31415 simulate", {".json", ".csv"});
    rerun_identical("value", {".json", "_grid.csv"});
    rerun_identical("--samples 5000 compare", {".json", ".txt"});

    // Distinct seeds must leave a visible difference in sampled artifacts.
    run_cli("--seed 31415 simulate --out acc8_a");
    run_cli("--seed 27182 simulate --out acc8_c");
    if (read_file("acc8_a.csv") == read_file("acc8_c.csv")) {
        pass = false;
        detail << "[seed change left simulate output identical] ";
    }

    detail << "byte-identical reruns for simulate, value, compare";
    report(8, pass, detail.str());
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);

    const auto want = [&](int k) { return only == 0 || only == k; };

    try {
        if (want(1)) criterion_1_population_value();
        if (want(2)) criterion_2_tagged_value();
        if (want(3)) criterion_3_divergence_gap();
        if (want(4)) criterion_4_cross_validation();
        if (want(5)) criterion_5_policy_optimality();
        if (want(6)) criterion_6_sampling_law();
        if (want(7)) criterion_7_property_suites();
        if (want(8)) criterion_8_determinism();
    } catch (const std::exception& e) {
        std::cout << "[FAIL] unexpected exception: " << e.what() << "\n";
        return 1;
    }
    return g_failures == 0 ? 0 : 1;
}
