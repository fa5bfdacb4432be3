// Command-line front end: estimate / solve / simulate / compare / benchmark /
// capacity / periodicity. Exit codes: 0 success, 1 validation error, 2 I/O
// error.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cesdp/io.hpp"

namespace {

using namespace cesdp;

/// Stages over the whole bundled series, not just the configured horizon;
/// the study commands window the data themselves.
MdpInstance full_horizon_instance(const AssembledProblem& problem) {
    MdpInstance inst = problem.instance;
    inst.stages.resize(problem.prices.size());
    for (std::size_t t = 0; t < problem.prices.size(); ++t) {
        inst.stages[t].p0_forecast = problem.prices[t];
        inst.stages[t].h = inst.mp.slope_table.lookup(problem.prices[t]);
        inst.stages[t].max_load = problem.load[t];
    }
    return inst;
}

void warn_clamped(const AssembledProblem& problem) {
    if (problem.clamped_slopes > 0)
        std::cerr << "warning: " << problem.clamped_slopes
                  << " stage(s) had forecast prices outside the slope table; "
                     "clamped to the nearest band\n";
}

double start_value(const ValueTable& values, const MdpInstance& inst) {
    const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
    return values.v[0][inst.re_init][i0];
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Price-maker community energy storage scheduling"};
    app.require_subcommand(1);
    unsigned workers = 1;
    app.add_option("--workers", workers, "Worker threads for grid sweeps")
        ->capture_default_str();

    std::string config_path;

    auto* estimate = app.add_subcommand(
        "estimate", "Estimate the renewable Markov chain from the configured series");
    std::string estimate_out;
    estimate->add_option("--config", config_path, "Run configuration (JSON)")->required();
    estimate->add_option("--out", estimate_out, "Chain output (JSON)")->required();

    auto* solve = app.add_subcommand("solve", "Solve for the optimal policy");
    std::string solver = "sdp";
    std::string policy_out, values_out, curves_out, objective_override;
    solve->add_option("--config", config_path, "Run configuration (JSON)")->required();
    solve->add_option("--solver", solver, "Solver: sdp or threshold")
        ->check(CLI::IsMember({"sdp", "threshold"}))
        ->capture_default_str();
    solve->add_option("--policy", policy_out, "Policy table output (CSV)");
    solve->add_option("--values", values_out, "Value table output (CSV)");
    solve->add_option("--curves", curves_out,
                      "Marginal-curve output (CSV, threshold solver only)");
    solve->add_option("--objective", objective_override,
                      "Override the configured objective")
        ->check(CLI::IsMember({"price_taker", "profit_max", "welfare_max"}));

    auto* simulate = app.add_subcommand("simulate", "Roll a saved policy forward");
    std::string policy_in, trajectory_out;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    double sim_sigma = -1.0;
    simulate->add_option("--config", config_path, "Run configuration (JSON)")->required();
    simulate->add_option("--policy", policy_in, "Policy table input (CSV)")->required();
    simulate->add_option("--out", trajectory_out, "Trajectory output (CSV)")->required();
    simulate->add_option("--seed", sim_seed, "Renewable path seed (default: config seed)")
        ->each([&](const std::string&) { sim_seed_set = true; });
    simulate->add_option("--sigma", sim_sigma,
                         "Price forecast error std dev (default: config value)");

    auto* compare = app.add_subcommand(
        "compare", "Realized value of the price-taker, profit, and welfare objectives");
    std::string compare_out;
    std::size_t compare_paths = 200;
    std::uint64_t compare_seed = 0;
    bool compare_seed_set = false;
    compare->add_option("--config", config_path, "Run configuration (JSON)")->required();
    compare->add_option("--out", compare_out, "Report output (CSV)")->required();
    compare->add_option("--paths", compare_paths, "Monte Carlo paths per case")
        ->capture_default_str();
    compare->add_option("--seed", compare_seed, "Monte Carlo seed (default: config seed)")
        ->each([&](const std::string&) { compare_seed_set = true; });

    auto* bench = app.add_subcommand("benchmark", "Time both solvers across grid sizes");
    std::string bench_out;
    std::vector<std::size_t> bench_grids;
    double bench_min_ms = 50.0;
    bench->add_option("--config", config_path, "Run configuration (JSON)")->required();
    bench->add_option("--grids", bench_grids, "Grid sizes (n_soc values)")
        ->required()
        ->delimiter(',');
    bench->add_option("--out", bench_out, "Report output (CSV)")->required();
    bench->add_option("--min-ms", bench_min_ms, "Minimum timing window per measurement")
        ->capture_default_str();

    auto* capacity = app.add_subcommand("capacity", "Value-of-capacity sweep");
    std::string capacity_out;
    std::vector<double> capacity_list;
    double rho = 0.0;
    capacity->add_option("--config", config_path, "Run configuration (JSON)")->required();
    capacity->add_option("--capacities", capacity_list, "Capacities to sweep (MWh)")
        ->required()
        ->delimiter(',');
    capacity->add_option("--rho", rho, "Capital cost per MWh of capacity")->required();
    capacity->add_option("--out", capacity_out, "Curve output (CSV)")->required();

    auto* periodicity = app.add_subcommand(
        "periodicity", "Optimal value versus cycle length and start level");
    std::string periodicity_out;
    std::vector<std::size_t> horizon_list;
    std::vector<double> x_init_list;
    periodicity->add_option("--config", config_path, "Run configuration (JSON)")
        ->required();
    periodicity->add_option("--horizons", horizon_list, "Cycle lengths in stages")
        ->required()
        ->delimiter(',');
    periodicity->add_option("--x-inits", x_init_list, "Start levels in MWh")
        ->required()
        ->delimiter(',');
    periodicity->add_option("--out", periodicity_out, "Matrix output (CSV)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*estimate) {
            const RunConfig cfg = load_config(config_path);
            const auto series = resample(load_series(cfg.renewable_path), cfg.stage_minutes);
            const RenewableChain chain = estimate_chain(series, cfg.n_res, cfg.chain_alpha);
            save_chain_json(estimate_out, chain);
            std::cout << "estimated " << chain.n_bins() << "-state chain from "
                      << series.size() << " observations -> " << estimate_out << "\n";
        } else if (*solve) {
            AssembledProblem problem = assemble(load_config(config_path));
            warn_clamped(problem);
            if (!objective_override.empty())
                problem.instance.mode = parse_objective(objective_override);
            if (solver == "sdp") {
                if (!curves_out.empty())
                    throw std::invalid_argument(
                        "--curves requires --solver threshold");
                const SdpResult sol = backward_induction(problem.instance, workers);
                if (!policy_out.empty()) save_policy_csv(policy_out, sol.policy);
                if (!values_out.empty()) save_value_csv(values_out, sol.values);
                std::cout << "sdp optimal value: "
                          << fmt_double(start_value(sol.values, problem.instance)) << "\n";
            } else {
                const ThresholdResult sol = threshold_solve(problem.instance, workers);
                if (sol.fallback_count > 0)
                    std::cerr << "warning: " << sol.fallback_count
                              << " crossing search(es) fell back to idle\n";
                if (!policy_out.empty()) save_policy_csv(policy_out, sol.policy);
                if (!values_out.empty()) save_value_csv(values_out, sol.values);
                if (!curves_out.empty()) save_curves_csv(curves_out, sol.curves);
                std::cout << "threshold policy value: "
                          << fmt_double(start_value(sol.values, problem.instance))
                          << "  (max marginal clip " << fmt_double(sol.max_clip) << ")\n";
            }
        } else if (*simulate) {
            const AssembledProblem problem = assemble(load_config(config_path));
            warn_clamped(problem);
            const PolicyTable policy = load_policy_csv(policy_in);
            const std::uint64_t seed = sim_seed_set ? sim_seed : problem.config.seed;
            const double sigma =
                sim_sigma >= 0.0 ? sim_sigma : problem.config.forecast_sigma;
            const Trajectory traj =
                rollout(policy, problem.instance, seed, sigma, seed + 1);
            save_trajectory_csv(trajectory_out, traj, problem.instance.chain);
            std::cout << "simulated " << traj.stages.size()
                      << " stages: arbitrage " << fmt_double(traj.arbitrage_total)
                      << ", welfare " << fmt_double(traj.welfare_total) << ", total "
                      << fmt_double(traj.total()) << "\n";
        } else if (*compare) {
            const AssembledProblem problem = assemble(load_config(config_path));
            warn_clamped(problem);
            const std::uint64_t seed =
                compare_seed_set ? compare_seed : problem.config.seed;
            const auto reports =
                compare_cases(problem.instance, compare_paths, seed, workers);
            save_compare_csv(compare_out, reports);
            for (const ValueReport& r : reports)
                std::cout << to_string(r.mode) << ": planned " << fmt_double(r.planned)
                          << ", realized " << fmt_double(r.total) << " (arbitrage "
                          << fmt_double(r.arbitrage) << ", welfare "
                          << fmt_double(r.welfare) << ")\n";
            const bool ordered = reports[2].total >= reports[1].total &&
                                 reports[1].total >= reports[0].total;
            std::cout << "ordering welfare >= profit >= price-taker (realized): "
                      << (ordered ? "holds" : "VIOLATED") << "\n";
        } else if (*bench) {
            const AssembledProblem problem = assemble(load_config(config_path));
            warn_clamped(problem);
            const auto rows =
                benchmark(problem.instance, bench_grids, workers, bench_min_ms);
            save_benchmark_csv(bench_out, rows);
            for (const BenchmarkRow& r : rows)
                std::cout << "n_soc " << r.n_soc << ": sdp " << fmt_double(r.sdp_ms)
                          << " ms (value " << fmt_double(r.sdp_value) << "), threshold "
                          << fmt_double(r.threshold_ms) << " ms (value "
                          << fmt_double(r.threshold_value) << ")\n";
        } else if (*capacity) {
            const AssembledProblem problem = assemble(load_config(config_path));
            warn_clamped(problem);
            const CapacityCurve curve =
                capacity_sweep(problem.instance, capacity_list, rho, workers);
            save_capacity_csv(capacity_out, curve);
            std::cout << "break-even capacity (marginal value crosses rho="
                      << fmt_double(rho) << "): " << fmt_double(curve.c_star)
                      << " MWh; argmax of U(C)-rho*C: "
                      << fmt_double(curve.c_star_argmax) << " MWh\n";
        } else if (*periodicity) {
            const AssembledProblem problem = assemble(load_config(config_path));
            warn_clamped(problem);
            const MdpInstance full = full_horizon_instance(problem);
            const PeriodicityStudy study =
                periodicity_study(full, problem.renewable, horizon_list, x_init_list,
                                  problem.config.stage_minutes, workers);
            save_periodicity_csv(periodicity_out, study);
            std::cout << "periodicity study: " << study.horizons.size() << " x "
                      << study.x_inits.size() << " matrix -> " << periodicity_out << "\n";
        }
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
