// Command-line front end: simulate trajectories, evaluate value functions,
// run policy evaluations and produce the population-versus-tagged-cell
// comparison report. All commands are deterministic given the resolved
// configuration (including the seed) and embed that configuration in every
// output file.

#include "pdmp/cell_model.hpp"
#include "pdmp/model.hpp"
#include "pdmp/point_measure.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/serialize.hpp"
#include "pdmp/simulate.hpp"
#include "pdmp/solver.hpp"
#include "pdmp/value.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string model = "population_time_augmented";
    pdmp::CellParams params{2.0, 1.0, 1.0};
    nlohmann::json initial = nlohmann::json::array({{3.0, 1}});
    pdmp::SolverConfig solver;
    int horizon = 1;
    double epsilon = 0.05;
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 20240817;
    std::optional<std::size_t> stop_jumps;
    std::optional<double> stop_time;
};

// Stream layout: trajectory commands use stream 0; the population and tagged
// Monte Carlo estimators use streams 1 and 2; policy replications start at
// stream 1000.
constexpr std::uint64_t kPolicyStreamBase = 1000;

ExperimentConfig load_config(const std::string& path) {
    ExperimentConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    try {
        if (j.contains("model")) cfg.model = j["model"].get<std::string>();
        if (j.contains("params")) {
            const auto& p = j["params"];
            if (p.contains("r")) cfg.params.r = p["r"].get<double>();
            if (p.contains("alpha")) cfg.params.alpha = p["alpha"].get<double>();
            if (p.contains("gamma")) cfg.params.gamma = p["gamma"].get<double>();
        }
        if (j.contains("initial")) cfg.initial = j["initial"];
        if (j.contains("solver")) {
            const auto& s = j["solver"];
            if (s.contains("nbpt")) cfg.solver.nbpt = s["nbpt"].get<int>();
            if (s.contains("t_max")) cfg.solver.t_max = s["t_max"].get<double>();
            if (s.contains("quad_tol"))
                cfg.solver.quad_tol = s["quad_tol"].get<double>();
            if (s.contains("kernel_mc_samples"))
                cfg.solver.kernel_mc_samples =
                    s["kernel_mc_samples"].get<int>();
            if (s.contains("comparison_tol"))
                cfg.solver.comparison_tol = s["comparison_tol"].get<double>();
            if (s.contains("refine_sup"))
                cfg.solver.refine_sup = s["refine_sup"].get<bool>();
        }
        if (j.contains("horizon")) cfg.horizon = j["horizon"].get<int>();
        if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
        if (j.contains("mc_samples"))
            cfg.mc_samples = j["mc_samples"].get<std::size_t>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("stop_jumps"))
            cfg.stop_jumps = j["stop_jumps"].get<std::size_t>();
        if (j.contains("stop_time"))
            cfg.stop_time = j["stop_time"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    try {
        cfg.params.validate();
        cfg.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.model != "single_cell" && cfg.model != "population" &&
        cfg.model != "population_time_augmented") {
        throw ConfigError("unknown model: " + cfg.model);
    }
    if (cfg.horizon < 0) throw ConfigError("horizon must be >= 0");
    if (cfg.epsilon <= 0.0) throw ConfigError("epsilon must be > 0");
    if (cfg.mc_samples < 2) throw ConfigError("mc_samples must be >= 2");
    if (cfg.stop_jumps && cfg.stop_time) {
        throw ConfigError("give stop_jumps or stop_time, not both");
    }
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j{
        {"model", cfg.model},
        {"params",
         {{"r", cfg.params.r},
          {"alpha", cfg.params.alpha},
          {"gamma", cfg.params.gamma}}},
        {"initial", cfg.initial},
        {"solver",
         {{"nbpt", cfg.solver.nbpt},
          {"t_max", cfg.solver.t_max},
          {"quad_tol", cfg.solver.quad_tol},
          {"kernel_mc_samples", cfg.solver.kernel_mc_samples},
          {"comparison_tol", cfg.solver.comparison_tol},
          {"refine_sup", cfg.solver.refine_sup}}},
        {"horizon", cfg.horizon},
        {"epsilon", cfg.epsilon},
        {"mc_samples", cfg.mc_samples},
        {"seed", cfg.seed},
        {"version", kVersion}};
    if (cfg.stop_jumps) j["stop_jumps"] = *cfg.stop_jumps;
    if (cfg.stop_time) j["stop_time"] = *cfg.stop_time;
    return j;
}

pdmp::PdmpModel build_model(const ExperimentConfig& cfg) {
    if (cfg.model == "single_cell") return pdmp::single_cell_model(cfg.params);
    if (cfg.model == "population") return pdmp::population_model(cfg.params);
    return pdmp::time_augmented_population_model(cfg.params);
}

/// Initial state from the config records. Size-only records get a zero clock
/// appended for the time-augmented model.
pdmp::HybridState build_initial(const ExperimentConfig& cfg) {
    pdmp::PointMeasure raw;
    try {
        raw = pdmp::measure_from_json(cfg.initial);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("initial measure: ") + e.what());
    }
    const bool augmented = cfg.model == "population_time_augmented";
    std::vector<pdmp::Atom> atoms;
    for (const auto& a : raw.atoms()) {
        if (a.location.empty() || a.location[0] <= 0.0) {
            throw ConfigError("initial measure: cell sizes must be > 0");
        }
        pdmp::Atom atom = a;
        if (augmented && atom.location.size() == 1) {
            atom.location.push_back(0.0);
        }
        const std::size_t want = augmented ? 2 : 1;
        if (atom.location.size() != want) {
            throw ConfigError("initial measure: wrong record dimension");
        }
        atoms.push_back(std::move(atom));
    }
    if (atoms.empty()) throw ConfigError("initial measure: empty");
    return pdmp::HybridState{0, pdmp::PointMeasure(std::move(atoms))};
}

/// Sizes (expanded with multiplicity) of an initial state; for the direct
/// value routes clocks must be zero.
std::vector<double> initial_sizes(const pdmp::HybridState& x0) {
    std::vector<double> sizes;
    for (const auto& a : x0.measure.atoms()) {
        if (a.location.size() == 2 && a.location[1] != 0.0) {
            throw ConfigError("comparison requires initial clocks of 0");
        }
        for (std::int64_t k = 0; k < a.multiplicity; ++k) {
            sizes.push_back(a.location[0]);
        }
    }
    return sizes;
}

double reward_bound(const pdmp::HybridState& x0, int horizon,
                    const pdmp::CellParams& params) {
    return static_cast<double>(x0.measure.total_multiplicity() + horizon) *
           params.gamma;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_prefix) {
    const pdmp::PdmpModel model = build_model(cfg);
    const pdmp::HybridState x0 = build_initial(cfg);

    pdmp::StopRule rule = pdmp::StopRule::after_jumps(1);
    if (cfg.stop_time) rule = pdmp::StopRule::at_time(*cfg.stop_time);
    if (cfg.stop_jumps) rule = pdmp::StopRule::after_jumps(*cfg.stop_jumps);

    const pdmp::Trajectory traj =
        simulate(model, x0, rule, pdmp::RngStream(cfg.seed, 0));

    nlohmann::json out{{"config", config_to_json(cfg)},
                       {"trajectory", pdmp::trajectory_to_json(traj)}};
    write_json_file(out_prefix + ".json", out);

    std::ostringstream csv;
    pdmp::trajectory_to_csv(csv, traj);
    write_text_file(out_prefix + ".csv", csv.str());

    std::cout << "wrote " << out_prefix << ".json and " << out_prefix
              << ".csv (" << traj.jumps.size() << " jumps"
              << (traj.truncated ? ", truncated by max_jumps" : "") << ")\n";
    if (traj.truncated) {
        std::cerr << "warning: trajectory truncated by the max_jumps guard\n";
    }
    return kExitOk;
}

int cmd_value(const ExperimentConfig& cfg, const std::string& out_prefix) {
    if (cfg.model != "population_time_augmented") {
        throw ConfigError("value requires model=population_time_augmented");
    }
    const pdmp::PdmpModel model = build_model(cfg);
    const pdmp::HybridState x0 = build_initial(cfg);
    const pdmp::RewardFunction g = pdmp::discounted_capped_size_reward(
        cfg.params, reward_bound(x0, cfg.horizon, cfg.params));

    const pdmp::ValueFunction vf =
        pdmp::value_iterate(model, g, cfg.horizon, cfg.solver);
    if (const auto note = vf.cost_note(x0)) {
        std::cerr << "warning: " << *note << "\n";
    }
    const pdmp::ValueDiagnostics diag = vf.diagnostics(x0);

    nlohmann::json out{{"config", config_to_json(cfg)},
                       {"x", pdmp::state_to_json(x0)},
                       {"n", cfg.horizon},
                       {"value", diag.value},
                       {"arg_sup", diag.arg_sup},
                       {"k_value", diag.k_value},
                       {"sup_j", diag.sup_j},
                       {"truncation_bound", diag.truncation_bound},
                       {"t_end", diag.t_end}};
    write_json_file(out_prefix + ".json", out);

    // J-grid dump for plotting the stop-versus-wait compromise.
    if (cfg.horizon >= 1) {
        const pdmp::BoundedFunction w{
            [&vf, n = cfg.horizon](const pdmp::HybridState& y) {
                return vf.evaluate_level(n - 1, y);
            },
            g.bound};
        const pdmp::GridScan scan =
            pdmp::scan_grid(model, w, g, x0, cfg.solver);
        std::ostringstream csv;
        csv << "t,h,i,j\n";
        for (std::size_t i = 0; i < scan.times.size(); ++i) {
            char line[160];
            std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g\n",
                          scan.times[i], scan.h_values[i], scan.i_values[i],
                          scan.j_values[i]);
            csv << line;
        }
        write_text_file(out_prefix + "_grid.csv", csv.str());
    }

    std::cout << "V_" << cfg.horizon << "(x0) = " << format_value(diag.value)
              << "  (arg_sup " << format_value(diag.arg_sup) << ", K "
              << format_value(diag.k_value) << ", truncation bound "
              << diag.truncation_bound << ")\n";
    return kExitOk;
}

int cmd_policy_eval(const ExperimentConfig& cfg,
                    const std::string& out_prefix) {
    if (cfg.model != "population_time_augmented") {
        throw ConfigError("policy-eval requires model=population_time_augmented");
    }
    if (cfg.horizon < 1) throw ConfigError("policy-eval requires horizon >= 1");
    const pdmp::PdmpModel model = build_model(cfg);
    const pdmp::HybridState x0 = build_initial(cfg);
    const pdmp::RewardFunction g = pdmp::discounted_capped_size_reward(
        cfg.params, reward_bound(x0, cfg.horizon, cfg.params));

    const pdmp::StoppingPolicy policy{cfg.horizon, cfg.epsilon};
    const pdmp::PolicyEvaluation eval =
        evaluate_policy(model, g, policy, x0, cfg.mc_samples, cfg.solver,
                        cfg.seed, kPolicyStreamBase);

    const pdmp::ValueFunction vf =
        pdmp::value_iterate(model, g, cfg.horizon, cfg.solver);
    const pdmp::ValueDiagnostics diag = vf.diagnostics(x0);

    const double low = diag.value - cfg.epsilon - 3.0 * eval.standard_error;
    const double high = diag.value + 3.0 * eval.standard_error;
    const bool sandwich = eval.mean >= low && eval.mean <= high;

    nlohmann::json out{{"config", config_to_json(cfg)},
                       {"x", pdmp::state_to_json(x0)},
                       {"n", cfg.horizon},
                       {"epsilon", cfg.epsilon},
                       {"mean", eval.mean},
                       {"stderr", eval.standard_error},
                       {"ci95", {eval.ci95_low, eval.ci95_high}},
                       {"value", diag.value},
                       {"truncation_bound", diag.truncation_bound},
                       {"sandwich_ok", sandwich}};
    write_json_file(out_prefix + ".json", out);

    std::cout << "policy mean = " << format_value(eval.mean) << " +- "
              << format_value(1.96 * eval.standard_error) << " (95% CI, "
              << eval.samples << " paths)\n"
              << "value V_" << cfg.horizon << " = "
              << format_value(diag.value) << ", sandwich "
              << (sandwich ? "ok" : "VIOLATED") << " [" << format_value(low)
              << ", " << format_value(high) << "]\n";
    return sandwich ? kExitOk : kExitNumericError;
}

int cmd_compare(const ExperimentConfig& cfg, const std::string& out_prefix) {
    const pdmp::HybridState x0_plain = [&cfg] {
        ExperimentConfig plain = cfg;
        plain.model = "population";
        return build_initial(plain);
    }();
    const std::vector<double> sizes = initial_sizes(x0_plain);

    // Population value, direct route.
    const pdmp::OneJumpValue direct =
        pdmp::direct_one_jump_value(sizes, cfg.params, cfg.solver);

    // Population value, generic operator route on the time-augmented model.
    const pdmp::PdmpModel aug_model =
        pdmp::time_augmented_population_model(cfg.params);
    pdmp::HybridState x0_aug = pdmp::augmented_initial_state(sizes);
    const pdmp::RewardFunction g = pdmp::discounted_capped_size_reward(
        cfg.params, reward_bound(x0_aug, 1, cfg.params));
    const pdmp::ValueFunction vf =
        pdmp::value_iterate(aug_model, g, 1, cfg.solver);
    const pdmp::ValueDiagnostics op_diag = vf.diagnostics(x0_aug);

    const double agreement_gap = std::fabs(direct.value - op_diag.value);
    const bool routes_agree = agreement_gap <= 5e-3;

    // Monte Carlo population estimate on the same grid.
    const pdmp::McValue pop_mc = pdmp::one_jump_value_monte_carlo(
        sizes, cfg.params, cfg.solver, cfg.mc_samples,
        pdmp::RngStream(cfg.seed, 1));

    // Tagged cell: deterministic quadrature value and the Monte Carlo
    // variant of the same display.
    const double tagged_size = sizes.front();
    const pdmp::TaggedCellValue tagged =
        pdmp::tagged_cell_value(tagged_size, cfg.params, cfg.solver);
    const pdmp::McValue tagged_mc = pdmp::tagged_cell_value_monte_carlo(
        tagged_size, cfg.params, cfg.solver, cfg.mc_samples,
        pdmp::RngStream(cfg.seed, 2));

    // Executed-policy estimate for the population problem.
    const pdmp::StoppingPolicy policy{1, cfg.epsilon};
    const pdmp::PolicyEvaluation eval =
        evaluate_policy(aug_model, g, policy, x0_aug, cfg.mc_samples,
                        cfg.solver, cfg.seed, kPolicyStreamBase);

    const double gap = direct.value - tagged.v1;
    const bool gap_above = gap > 0.3;

    nlohmann::json report{
        {"provenance",
         {{"version", kVersion}, {"seed", cfg.seed}, {"config", config_to_json(cfg)}}},
        {"v1_population",
         {{"value", direct.value},
          {"arg_sup", direct.arg_sup},
          {"k_value", direct.k_value},
          {"truncation_bound", direct.truncation_bound},
          {"t_end", direct.t_end}}},
        {"v1_population_operator",
         {{"value", op_diag.value},
          {"arg_sup", op_diag.arg_sup},
          {"k_value", op_diag.k_value},
          {"truncation_bound", op_diag.truncation_bound}}},
        {"agreement_gap", agreement_gap},
        {"routes_agree", routes_agree},
        {"v1_population_mc",
         {{"mean", pop_mc.value},
          {"stderr", pop_mc.standard_error},
          {"arg_sup", pop_mc.arg_sup}}},
        {"v1_tagged", {{"value", tagged.v1}, {"arg_sup", tagged.arg_sup}}},
        {"v1_tagged_mc",
         {{"mean", tagged_mc.value}, {"stderr", tagged_mc.standard_error}}},
        {"policy_eval",
         {{"mean", eval.mean},
          {"stderr", eval.standard_error},
          {"ci95", {eval.ci95_low, eval.ci95_high}}}},
        {"gap", gap},
        {"gap_above_0.3", gap_above}};
    write_json_file(out_prefix + ".json", report);

    std::ostringstream table;
    table << "population vs tagged cell, one-jump horizon\n"
          << "--------------------------------------------\n"
          << "V1 population (direct)    " << format_value(direct.value)
          << "\n"
          << "V1 population (operator)  " << format_value(op_diag.value)
          << "   |diff| = " << agreement_gap << "\n"
          << "V1 population (MC)        " << format_value(pop_mc.value)
          << " +- " << format_value(1.96 * pop_mc.standard_error) << "\n"
          << "V1 tagged (quadrature)    " << format_value(tagged.v1) << "\n"
          << "V1 tagged (MC)            " << format_value(tagged_mc.value)
          << " +- " << format_value(1.96 * tagged_mc.standard_error) << "\n"
          << "policy mean               " << format_value(eval.mean) << " +- "
          << format_value(1.96 * eval.standard_error) << "\n"
          << "gap population - tagged   " << format_value(gap)
          << (gap_above ? "  (> 0.3)" : "") << "\n";
    write_text_file(out_prefix + ".txt", table.str());
    std::cout << table.str();

    if (!routes_agree) {
        std::cerr << "error: direct and operator population values disagree "
                     "beyond 5e-3 ("
                  << agreement_gap << ")\n";
        return kExitNumericError;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Measure-valued piecewise deterministic Markov processes: "
                 "simulation and random-horizon optimal stopping"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_prefix;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::size_t> samples_override;
    std::optional<int> nbpt_override;
    std::optional<double> tmax_override;
    std::optional<double> epsilon_override;
    std::optional<int> horizon_override;

    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_prefix, "output file prefix");
    app.add_option("--seed", seed_override, "override the RNG seed");
    app.add_option("--samples", samples_override,
                   "override the Monte Carlo sample count");
    app.add_option("--nbpt", nbpt_override, "override the time-grid size");
    app.add_option("--tmax", tmax_override,
                   "override the hard truncation horizon");
    app.add_option("--epsilon", epsilon_override,
                   "override the policy tolerance");
    app.add_option("--horizon", horizon_override,
                   "override the stopping horizon n");

    auto* sim = app.add_subcommand("simulate", "simulate one trajectory");
    auto* val = app.add_subcommand("value", "evaluate the value function");
    auto* pol = app.add_subcommand("policy-eval",
                                   "Monte Carlo evaluation of the policy");
    auto* cmp = app.add_subcommand(
        "compare", "population versus tagged-cell comparison report");
    for (auto* sub : {sim, val, pol, cmp}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (samples_override) cfg.mc_samples = *samples_override;
        if (nbpt_override) cfg.solver.nbpt = *nbpt_override;
        if (tmax_override) cfg.solver.t_max = *tmax_override;
        if (epsilon_override) cfg.epsilon = *epsilon_override;
        if (horizon_override) cfg.horizon = *horizon_override;
        validate_config(cfg);

        if (sim->parsed()) {
            return cmd_simulate(cfg, out_prefix.empty() ? "trajectory"
                                                        : out_prefix);
        }
        if (val->parsed()) {
            return cmd_value(cfg, out_prefix.empty() ? "value" : out_prefix);
        }
        if (pol->parsed()) {
            return cmd_policy_eval(cfg, out_prefix.empty() ? "policy_eval"
                                                           : out_prefix);
        }
        if (cmp->parsed()) {
            return cmd_compare(cfg, out_prefix.empty() ? "comparison"
                                                       : out_prefix);
        }
        return kExitConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const pdmp::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumericError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericError;
    }
}
