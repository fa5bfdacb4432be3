#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "cesdp/chain.hpp"
#include "cesdp/mdp.hpp"
#include "cesdp/sdp.hpp"
#include "cesdp/threshold.hpp"

namespace cesdp {

/// One simulated stage: state, action, realized prices, and the stage's cash
/// flow split into arbitrage (the storage's own trading profit) and welfare
/// (the community's surplus change).
struct TrajectoryStage {
    std::size_t t = 0;
    double x = 0.0;  ///< storage level entering the stage (MWh)
    std::size_t re_bin = 0;
    double u = 0.0;
    double w = 0.0;
    double p_ante = 0.0;  ///< clearing price before the storage acts
    double p_post = 0.0;  ///< clearing price after; equals p_ante when idle
    double arbitrage = 0.0;
    double welfare = 0.0;
};

/// Forward-simulated schedule with its realized value decomposition.
struct Trajectory {
    std::vector<TrajectoryStage> stages;
    double arbitrage_total = 0.0;
    double welfare_total = 0.0;

    double total() const { return arbitrage_total + welfare_total; }
};

/// Simulate a policy forward along a given renewable bin path under the true
/// price-impact market. Off-grid levels look the action up by interpolating
/// the policy's signed deltas in X; the final stage always applies the forced
/// return action. Optional zero-mean Gaussian noise on the price forecast
/// models realized forecast error.
inline Trajectory rollout(const PolicyTable& policy, const MdpInstance& inst,
                          const std::vector<std::size_t>& re_path,
                          double forecast_sigma = 0.0, std::uint64_t noise_seed = 0) {
    inst.validate();
    const std::size_t T = inst.horizon();
    if (re_path.size() != T)
        throw std::invalid_argument("rollout: path length differs from horizon");
    const StorageGrid grid = inst.grid();
    const std::size_t nx = grid.size();
    const std::size_t nk = inst.chain.n_bins();
    if (policy.horizon() != T)
        throw std::invalid_argument("rollout: policy horizon mismatch");
    for (std::size_t t = 0; t < T; ++t)
        if (policy.a[t].size() != nk || policy.a[t].front().size() != nx)
            throw std::invalid_argument("rollout: policy grid mismatch");

    std::mt19937_64 noise_rng(noise_seed);
    const PriceForecastModel noise{forecast_sigma};
    noise.validate();

    Trajectory traj;
    traj.stages.reserve(T);
    std::vector<double> deltas(nx);
    double x = inst.spec.x_init;
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t k = re_path[t];
        if (k >= nk) throw std::invalid_argument("rollout: path bin out of range");
        const double re = inst.chain.bin_values[k];

        Action act;
        if (t + 1 == T) {
            act = terminal_action(x, inst.spec);
        } else {
            for (std::size_t i = 0; i < nx; ++i) deltas[i] = policy.a[t][k][i].delta;
            act = Action{grid.interpolate(deltas, x)};
        }
        // Interpolated actions can overshoot the feasible box by round-off
        // (or by a grid step near the bounds); clamp before applying.
        const auto [u_max, w_max] = feasible_bounds(x, inst.spec);
        const double u = std::min(act.u(), u_max);
        const double w = std::min(act.w(), w_max);

        StageMarket stage = inst.stages[t];
        stage.p0_forecast += noise.sample(noise_rng);
        const double p_ante = ex_ante_price(stage, re, inst.mp);
        const double p_c = ex_post_charge_price(p_ante, u, stage, inst.mp, inst.spec.eta_c);
        const double p_d =
            ex_post_discharge_price(p_ante, w, stage, inst.mp, inst.spec.eta_d);

        TrajectoryStage rec;
        rec.t = t;
        rec.x = x;
        rec.re_bin = k;
        rec.u = u;
        rec.w = w;
        rec.p_ante = p_ante;
        rec.p_post = u > 0.0 ? p_c : (w > 0.0 ? p_d : p_ante);
        rec.arbitrage = inst.spec.eta_d * w * p_d - u * p_c / inst.spec.eta_c;
        rec.welfare = welfare_discharge(w, re, p_ante, stage, inst.mp, inst.spec.eta_d) +
                      welfare_charge(u, re, p_ante, stage, inst.mp, inst.spec.eta_c);
        traj.stages.push_back(rec);
        traj.arbitrage_total += rec.arbitrage;
        traj.welfare_total += rec.welfare;

        x = transition(x, u, w, inst.spec);
    }
    return traj;
}

/// Rollout along a path sampled from the instance's renewable chain.
inline Trajectory rollout(const PolicyTable& policy, const MdpInstance& inst,
                          std::uint64_t path_seed, double forecast_sigma = 0.0,
                          std::uint64_t noise_seed = 0) {
    const auto path = sample_path(inst.chain, inst.re_init, inst.horizon(), path_seed);
    return rollout(policy, inst, path, forecast_sigma, noise_seed);
}

/// Expected realized value of a policy, split into arbitrage and welfare.
struct PolicyValue {
    double arbitrage = 0.0;
    double welfare = 0.0;

    double total() const { return arbitrage + welfare; }
};

/// Exact expected realized value of a policy under the true price-impact
/// market: a backward policy-evaluation pass that tracks the arbitrage and
/// welfare components separately. Off-grid landings interpolate both
/// component tables (interpolation and expectation commute, both linear).
inline PolicyValue evaluate_policy(const MdpInstance& inst, const PolicyTable& policy) {
    inst.validate();
    const StorageGrid grid = inst.grid();
    const std::vector<double>& lv = grid.levels();
    const std::size_t T = inst.horizon();
    const std::size_t nx = grid.size();
    const std::size_t nk = inst.chain.n_bins();
    if (policy.horizon() != T)
        throw std::invalid_argument("evaluate_policy: policy horizon mismatch");

    std::vector<std::vector<double>> arb(nk, std::vector<double>(nx, 0.0));
    std::vector<std::vector<double>> wel(nk, std::vector<double>(nx, 0.0));

    for (std::size_t t = T; t-- > 0;) {
        std::vector<std::vector<double>> arb_next(nk), wel_next(nk);
        if (t + 1 < T)
            for (std::size_t k = 0; k < nk; ++k) {
                arb_next[k] = expected_continuation(arb, k, inst.chain);
                wel_next[k] = expected_continuation(wel, k, inst.chain);
            }
        std::vector<std::vector<double>> arb_now(nk, std::vector<double>(nx, 0.0));
        std::vector<std::vector<double>> wel_now(nk, std::vector<double>(nx, 0.0));
        const StageMarket& stage = inst.stages[t];
        for (std::size_t k = 0; k < nk; ++k) {
            const double re = inst.chain.bin_values[k];
            const double p_ante = ex_ante_price(stage, re, inst.mp);
            for (std::size_t i = 0; i < nx; ++i) {
                const double x = lv[i];
                const Action act =
                    t + 1 == T ? terminal_action(x, inst.spec) : policy.a[t][k][i];
                const auto [u_max, w_max] = feasible_bounds(x, inst.spec);
                const double u = std::min(act.u(), u_max);
                const double w = std::min(act.w(), w_max);
                const double p_c =
                    ex_post_charge_price(p_ante, u, stage, inst.mp, inst.spec.eta_c);
                const double p_d =
                    ex_post_discharge_price(p_ante, w, stage, inst.mp, inst.spec.eta_d);
                const double a_step =
                    inst.spec.eta_d * w * p_d - u * p_c / inst.spec.eta_c;
                const double w_step =
                    welfare_discharge(w, re, p_ante, stage, inst.mp, inst.spec.eta_d) +
                    welfare_charge(u, re, p_ante, stage, inst.mp, inst.spec.eta_c);
                if (t + 1 == T) {
                    arb_now[k][i] = a_step;
                    wel_now[k][i] = w_step;
                } else {
                    const double x_next = x + u - w;
                    arb_now[k][i] = a_step + grid.interpolate(arb_next[k], x_next);
                    wel_now[k][i] = w_step + grid.interpolate(wel_next[k], x_next);
                }
            }
        }
        arb = std::move(arb_now);
        wel = std::move(wel_now);
    }
    const std::size_t i0 = grid.nearest_index(inst.spec.x_init);
    return PolicyValue{arb[inst.re_init][i0], wel[inst.re_init][i0]};
}

/// Planned and realized value of one objective mode.
struct ValueReport {
    ObjectiveMode mode = ObjectiveMode::welfare_max;
    double planned = 0.0;    ///< the solver's own expected objective
    double arbitrage = 0.0;  ///< exact expected realized arbitrage
    double welfare = 0.0;    ///< exact expected realized welfare
    double total = 0.0;      ///< arbitrage + welfare
    double mc_mean = 0.0;    ///< Monte Carlo mean of realized totals
    double mc_stderr = 0.0;
    std::size_t mc_paths = 0;
};

/// Solve the instance once per objective mode and report what each policy
/// actually earns under the true price-impact market. The price-taker plan
/// is scored the same way, which is what exposes its misestimate: its
/// planned value ignores the impact its own trades have on prices.
inline std::vector<ValueReport> compare_cases(MdpInstance inst, std::size_t mc_paths = 200,
                                              std::uint64_t seed = 1,
                                              unsigned workers = 1) {
    const ObjectiveMode modes[3] = {ObjectiveMode::price_taker, ObjectiveMode::profit_max,
                                    ObjectiveMode::welfare_max};
    std::vector<ValueReport> reports;
    reports.reserve(3);
    const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
    for (ObjectiveMode mode : modes) {
        inst.mode = mode;
        const SdpResult sol = backward_induction(inst, workers);
        ValueReport rep;
        rep.mode = mode;
        rep.planned = sol.values.v[0][inst.re_init][i0];
        const PolicyValue pv = evaluate_policy(inst, sol.policy);
        rep.arbitrage = pv.arbitrage;
        rep.welfare = pv.welfare;
        rep.total = pv.total();
        rep.mc_paths = mc_paths;
        if (mc_paths > 0) {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t p = 0; p < mc_paths; ++p) {
                const auto path = sample_path(inst.chain, inst.re_init, inst.horizon(),
                                              seed + static_cast<std::uint64_t>(p));
                const double v = rollout(sol.policy, inst, path).total();
                sum += v;
                sum_sq += v * v;
            }
            const double n = static_cast<double>(mc_paths);
            rep.mc_mean = sum / n;
            const double var = std::max(0.0, sum_sq / n - rep.mc_mean * rep.mc_mean);
            rep.mc_stderr = mc_paths > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        }
        reports.push_back(rep);
    }
    return reports;
}

/// Timing and value of both solvers at one grid size.
struct BenchmarkRow {
    std::size_t n_soc = 0;
    double sdp_ms = 0.0;
    double sdp_value = 0.0;
    double threshold_ms = 0.0;
    double threshold_value = 0.0;
};

namespace detail {

/// Best (minimum) wall time per call, repeating until `min_ms` of measured
/// time accumulates. The minimum over repetitions is robust to scheduler
/// stalls that would skew a mean, which matters when comparing scaling
/// exponents of sub-millisecond solves.
template <typename F>
double time_ms(F&& f, double min_ms) {
    using clock = std::chrono::steady_clock;
    f();  // warm-up, also ensures one call before timing
    double best = std::numeric_limits<double>::infinity();
    double total = 0.0;
    do {
        const auto start = clock::now();
        f();
        const double dt =
            std::chrono::duration<double, std::milli>(clock::now() - start).count();
        best = std::min(best, dt);
        total += dt;
    } while (total < min_ms);
    return best;
}

}  // namespace detail

/// Run both solvers across grid resolutions on the same instance data.
/// Values are deterministic; timings are best-of-repetition wall clock.
inline std::vector<BenchmarkRow> benchmark(MdpInstance inst,
                                           const std::vector<std::size_t>& grid_sizes,
                                           unsigned workers = 1, double min_ms = 50.0) {
    std::vector<BenchmarkRow> rows;
    rows.reserve(grid_sizes.size());
    for (std::size_t n : grid_sizes) {
        inst.n_soc = n;
        const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
        BenchmarkRow row;
        row.n_soc = n;
        SdpResult sdp;
        row.sdp_ms = detail::time_ms([&] { sdp = backward_induction(inst, workers); },
                                     min_ms);
        row.sdp_value = sdp.values.v[0][inst.re_init][i0];
        ThresholdResult thr;
        row.threshold_ms =
            detail::time_ms([&] { thr = threshold_solve(inst, workers); }, min_ms);
        row.threshold_value = thr.values.v[0][inst.re_init][i0];
        rows.push_back(row);
    }
    return rows;
}

/// Value of the optimal schedule as a function of installed capacity, with
/// the investment break-even capacity.
struct CapacityCurve {
    std::vector<double> capacities;
    std::vector<double> values;   ///< U(C) per sampled capacity
    std::vector<double> slopes;   ///< finite-difference marginal value per segment
    double rho = 0.0;             ///< capital cost per MWh of capacity
    double c_star = 0.0;          ///< where the marginal value crosses rho
    double c_star_argmax = 0.0;   ///< exhaustive argmax of U(C) - rho*C
    double eta_c = 1.0;
    double eta_d = 1.0;
};

/// Re-solve per capacity, keeping the template's grid spacing so coarser
/// capacities use nested grids, then recommend the capacity where the
/// marginal value of one more MWh drops below its capital cost.
inline CapacityCurve capacity_sweep(MdpInstance inst, const std::vector<double>& c_list,
                                    double rho, unsigned workers = 1) {
    if (c_list.empty()) throw std::invalid_argument("capacity_sweep: empty capacity list");
    for (std::size_t i = 1; i < c_list.size(); ++i)
        if (!(c_list[i - 1] < c_list[i]))
            throw std::invalid_argument("capacity_sweep: capacities must be ascending");
    if (rho < 0.0) throw std::invalid_argument("capacity_sweep: rho must be >= 0");

    const double spacing = inst.spec.capacity / static_cast<double>(inst.n_soc);
    CapacityCurve curve;
    curve.rho = rho;
    curve.eta_c = inst.spec.eta_c;
    curve.eta_d = inst.spec.eta_d;
    for (double c : c_list) {
        inst.spec.capacity = c;
        inst.spec.x_init = std::min(inst.spec.x_init, c);
        inst.n_soc = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c / spacing)));
        const SdpResult sol = backward_induction(inst, workers);
        const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
        curve.capacities.push_back(c);
        curve.values.push_back(sol.values.v[0][inst.re_init][i0]);
    }
    for (std::size_t i = 0; i + 1 < curve.capacities.size(); ++i)
        curve.slopes.push_back((curve.values[i + 1] - curve.values[i]) /
                               (curve.capacities[i + 1] - curve.capacities[i]));

    // Slope crossing: the last sampled capacity whose incoming segment still
    // earns at least rho per MWh. All slopes below rho -> smallest capacity;
    // none below -> largest.
    std::size_t cross = 0;
    while (cross < curve.slopes.size() && curve.slopes[cross] >= rho) ++cross;
    curve.c_star = curve.capacities[cross];

    double best = curve.values[0] - rho * curve.capacities[0];
    curve.c_star_argmax = curve.capacities[0];
    for (std::size_t i = 1; i < curve.capacities.size(); ++i) {
        const double net = curve.values[i] - rho * curve.capacities[i];
        if (net >= best) {
            best = net;
            curve.c_star_argmax = curve.capacities[i];
        }
    }
    return curve;
}

/// Average per-quarter-day optimal value for each (cycle length, start level)
/// pair, solved over every disjoint window of that length in the data.
struct PeriodicityStudy {
    std::vector<std::size_t> horizons;
    std::vector<double> x_inits;
    std::vector<std::vector<double>> quarter_day_value;  ///< [horizon][x_init]
};

inline PeriodicityStudy periodicity_study(const MdpInstance& full,
                                          const std::vector<double>& renewable_series,
                                          const std::vector<std::size_t>& t_list,
                                          const std::vector<double>& x_init_list,
                                          unsigned stage_minutes, unsigned workers = 1) {
    full.validate();
    if (renewable_series.size() < full.horizon())
        throw std::invalid_argument("periodicity_study: renewable series shorter than data");
    PeriodicityStudy study;
    study.horizons = t_list;
    study.x_inits = x_init_list;
    for (std::size_t T : t_list) {
        if (T < 1 || T > full.horizon())
            throw std::invalid_argument("periodicity_study: not enough data for T=" +
                                        std::to_string(T));
        const std::size_t n_windows = full.horizon() / T;
        const double quarter_days =
            static_cast<double>(T) * static_cast<double>(stage_minutes) / 360.0;
        std::vector<double> row;
        for (double x0 : x_init_list) {
            MdpInstance inst = full;
            inst.spec.x_init = std::min(x0, inst.spec.capacity);
            double sum = 0.0;
            for (std::size_t w = 0; w < n_windows; ++w) {
                inst.stages.assign(full.stages.begin() + static_cast<long>(w * T),
                                   full.stages.begin() + static_cast<long>((w + 1) * T));
                inst.re_init = full.chain.bin_of(renewable_series[w * T]);
                const SdpResult sol = backward_induction(inst, workers);
                const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
                sum += sol.values.v[0][inst.re_init][i0];
            }
            row.push_back(sum / static_cast<double>(n_windows) / quarter_days);
        }
        study.quarter_day_value.push_back(row);
    }
    return study;
}

namespace detail {

inline double oracle_value(const MdpInstance& inst, const StorageGrid& grid,
                           const std::vector<std::vector<StageCoefficients>>& coeff,
                           std::size_t t, std::size_t i, std::size_t k) {
    const std::vector<double>& lv = grid.levels();
    if (t + 1 == inst.horizon()) {
        const Action a = terminal_action(lv[i], inst.spec);
        const StageCoefficients& c = coeff[t][k];
        return c.g_discharge(a.w()) - c.g_charge(a.u());
    }
    const StageCoefficients& c = coeff[t][k];
    double best = 0.0;
    bool first = true;
    for (std::size_t j = 0; j < lv.size(); ++j) {
        const double delta = lv[j] - lv[i];
        double r = 0.0;
        if (delta < 0.0)
            r = c.g_discharge(-delta);
        else if (delta > 0.0)
            r = -c.g_charge(delta);
        double expect = 0.0;
        for (std::size_t k2 = 0; k2 < inst.chain.n_bins(); ++k2)
            expect += inst.chain.transition[k][k2] *
                      oracle_value(inst, grid, coeff, t + 1, j, k2);
        if (first || r + expect > best) {
            best = r + expect;
            first = false;
        }
    }
    return best;
}

}  // namespace detail

/// Brute-force optimum by direct recursion over every grid action and every
/// renewable successor — no tables, no shared code path with the solvers.
/// Cost explodes combinatorially, so a budget guards against accidental use
/// on instances beyond toy size.
inline double oracle_enumerate(const MdpInstance& inst, double budget = 1e7) {
    inst.validate();
    const double paths =
        std::pow(static_cast<double>(inst.n_soc + 1),
                 static_cast<double>(inst.horizon() > 0 ? inst.horizon() - 1 : 0)) *
        std::pow(static_cast<double>(inst.chain.n_bins()),
                 static_cast<double>(inst.horizon()));
    if (paths > budget) throw std::invalid_argument("oracle_enumerate: instance too large");
    const StorageGrid grid = inst.grid();
    const auto coeff = coefficient_table(inst);
    const std::size_t i0 = grid.nearest_index(inst.spec.x_init);
    return detail::oracle_value(inst, grid, coeff, 0, i0, inst.re_init);
}

}  // namespace cesdp
