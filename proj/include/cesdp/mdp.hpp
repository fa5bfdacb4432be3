#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cesdp/chain.hpp"
#include "cesdp/market.hpp"

namespace cesdp {

/// Physical storage: capacity, one-way efficiencies, and the level the
/// schedule must start from and return to.
struct StorageSpec {
    double capacity = 0.0;  ///< usable energy capacity C (MWh)
    double eta_c = 1.0;     ///< charging efficiency in (0, 1]
    double eta_d = 1.0;     ///< discharging efficiency in (0, 1]
    double x_init = 0.0;    ///< level at the start and end of each cycle (MWh)

    void validate() const {
        if (capacity <= 0.0) throw std::invalid_argument("storage: capacity must be > 0");
        if (eta_c <= 0.0 || eta_c > 1.0)
            throw std::invalid_argument("storage: eta_c must be in (0, 1]");
        if (eta_d <= 0.0 || eta_d > 1.0)
            throw std::invalid_argument("storage: eta_d must be in (0, 1]");
        if (x_init < 0.0 || x_init > capacity)
            throw std::invalid_argument("storage: x_init must be in [0, capacity]");
    }
};

/// A stage action. Charging and discharging are mutually exclusive at the
/// optimum, so a single signed delta represents both: positive charges,
/// negative discharges. This makes simultaneous charge+discharge
/// unrepresentable rather than merely discouraged.
struct Action {
    double delta = 0.0;  ///< storage-level change: u - w (MWh)

    double u() const { return delta > 0.0 ? delta : 0.0; }
    double w() const { return delta < 0.0 ? -delta : 0.0; }

    static Action charge(double u) { return Action{u}; }
    static Action discharge(double w) { return Action{-w}; }
};

/// Equally spaced storage levels from 0 to capacity inclusive
/// (n_soc intervals, n_soc+1 grid points).
class StorageGrid {
  public:
    StorageGrid() = default;

    StorageGrid(double capacity, std::size_t n_soc) : capacity_(capacity), n_soc_(n_soc) {
        if (capacity <= 0.0) throw std::invalid_argument("grid: capacity must be > 0");
        if (n_soc < 1) throw std::invalid_argument("grid: n_soc must be >= 1");
        levels_.resize(n_soc + 1);
        for (std::size_t i = 0; i <= n_soc; ++i)
            levels_[i] = capacity * static_cast<double>(i) / static_cast<double>(n_soc);
    }

    const std::vector<double>& levels() const { return levels_; }
    std::size_t size() const { return levels_.size(); }
    double capacity() const { return capacity_; }
    double spacing() const { return capacity_ / static_cast<double>(n_soc_); }
    double level(std::size_t i) const { return levels_[i]; }

    /// Index of the grid level nearest to x.
    std::size_t nearest_index(double x) const {
        const double f = x / spacing();
        auto i = static_cast<long>(std::lround(f));
        if (i < 0) i = 0;
        if (i >= static_cast<long>(levels_.size())) i = static_cast<long>(levels_.size()) - 1;
        return static_cast<std::size_t>(i);
    }

    /// Linear interpolation of per-level values at an off-grid point.
    double interpolate(const std::vector<double>& values, double x) const {
        if (values.size() != levels_.size())
            throw std::invalid_argument("grid: value vector size mismatch");
        if (x <= levels_.front()) return values.front();
        if (x >= levels_.back()) return values.back();
        const double f = x / spacing();
        auto i = static_cast<std::size_t>(f);
        if (i + 1 >= levels_.size()) i = levels_.size() - 2;
        const double frac = f - static_cast<double>(i);
        return values[i] * (1.0 - frac) + values[i + 1] * frac;
    }

  private:
    double capacity_ = 0.0;
    std::size_t n_soc_ = 0;
    std::vector<double> levels_;
};

/// Charge/discharge limits at level x: can charge up to the headroom and
/// discharge down to empty.
inline std::pair<double, double> feasible_bounds(double x, const StorageSpec& spec) {
    if (x < 0.0 || x > spec.capacity)
        throw std::invalid_argument("feasible_bounds: level outside [0, capacity]");
    return {spec.capacity - x, x};
}

/// Next storage level after charging u and discharging w.
inline double transition(double x, double u, double w, const StorageSpec& spec) {
    if (u < 0.0 || w < 0.0) throw std::invalid_argument("transition: negative action");
    const auto [u_max, w_max] = feasible_bounds(x, spec);
    // Tiny tolerance absorbs round-off from interpolated continuous actions.
    const double tol = 1e-9 * std::max(1.0, spec.capacity);
    if (u > u_max + tol) throw std::invalid_argument("transition: charge exceeds headroom");
    if (w > w_max + tol) throw std::invalid_argument("transition: discharge exceeds level");
    return x + u - w;
}

/// Forced final-stage action returning the level to x_init.
inline Action terminal_action(double x_T, const StorageSpec& spec) {
    if (x_T < spec.x_init) return Action::charge(spec.x_init - x_T);
    return Action::discharge(x_T - spec.x_init);
}

/// Reward of the forced final-stage action.
inline double terminal_value(double x_T, double re, const StageMarket& stage,
                             const MarketParams& mp, const StorageSpec& spec,
                             ObjectiveMode mode) {
    const Action a = terminal_action(x_T, spec);
    return reward(a.u(), a.w(), re, stage, mp, spec.eta_c, spec.eta_d, mode);
}

/// Everything a solver needs: storage, objective, per-stage market data,
/// market parameters, the renewable chain, and grid resolution.
struct MdpInstance {
    StorageSpec spec;
    ObjectiveMode mode = ObjectiveMode::welfare_max;
    std::vector<StageMarket> stages;  ///< length T; stages.back() is the forced stage
    MarketParams mp;
    RenewableChain chain;
    std::size_t n_soc = 1;      ///< storage-level interval count (n_soc+1 grid points)
    std::size_t re_init = 0;    ///< renewable bin observed at stage 1

    std::size_t horizon() const { return stages.size(); }

    StorageGrid grid() const { return StorageGrid(spec.capacity, n_soc); }

    void validate() const {
        spec.validate();
        mp.validate();
        chain.validate();
        if (stages.empty()) throw std::invalid_argument("instance: horizon must be >= 1");
        if (n_soc < 1) throw std::invalid_argument("instance: n_soc must be >= 1");
        if (re_init >= chain.n_bins())
            throw std::invalid_argument("instance: re_init out of range");
        for (std::size_t t = 0; t < stages.size(); ++t)
            if (stages[t].h < 0.0)
                throw std::invalid_argument("instance: stage " + std::to_string(t) +
                                            " has negative slope");
    }
};

/// Reward coefficients for every (stage, renewable bin) pair of an instance,
/// resolved once so solver inner loops stay arithmetic-only.
/// Layout: cache[t][re_bin].
inline std::vector<std::vector<StageCoefficients>> coefficient_table(
    const MdpInstance& inst, ObjectiveMode mode) {
    std::vector<std::vector<StageCoefficients>> cache(inst.horizon());
    for (std::size_t t = 0; t < inst.horizon(); ++t) {
        cache[t].resize(inst.chain.n_bins());
        for (std::size_t k = 0; k < inst.chain.n_bins(); ++k)
            cache[t][k] = stage_coefficients(inst.stages[t], inst.chain.bin_values[k],
                                             inst.mp, inst.spec.eta_c, inst.spec.eta_d,
                                             mode);
    }
    return cache;
}

inline std::vector<std::vector<StageCoefficients>> coefficient_table(const MdpInstance& inst) {
    return coefficient_table(inst, inst.mode);
}

}  // namespace cesdp
