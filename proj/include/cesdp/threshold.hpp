#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cesdp/mdp.hpp"
#include "cesdp/parallel.hpp"
#include "cesdp/sdp.hpp"

namespace cesdp {

/// Expected marginal value of stored energy as a function of the storage
/// level: piecewise-linear between knots on the storage grid, non-increasing
/// because the value function is concave in the level.
struct MarginalCurve {
    std::vector<double> levels;  ///< ascending knot levels covering [0, C]
    std::vector<double> values;  ///< marginal value at each knot ($/MWh)

    /// Piecewise-linear evaluation, clamped to the end knots outside [0, C].
    double value_at(double x) const {
        if (x <= levels.front()) return values.front();
        if (x >= levels.back()) return values.back();
        const auto it = std::upper_bound(levels.begin(), levels.end(), x);
        const auto j = static_cast<std::size_t>(it - levels.begin()) - 1;
        const double t = (x - levels[j]) / (levels[j + 1] - levels[j]);
        return values[j] * (1.0 - t) + values[j + 1] * t;
    }

    /// Largest increase between consecutive knots (0 when non-increasing).
    double max_monotonicity_violation() const {
        double worst = 0.0;
        for (std::size_t i = 1; i < values.size(); ++i)
            worst = std::max(worst, values[i] - values[i - 1]);
        return worst;
    }
};

/// Transition-weighted average of per-bin marginal curves, knot-wise, then
/// isotonic clipping (running minimum from level 0 upward) to absorb
/// round-off violations of monotonicity. The applied clip magnitude is
/// reported through `clip` when given; it must stay at round-off scale.
/// In-place form so per-stage solver loops can reuse `out`'s buffers.
inline void expected_marginal_into(const std::vector<MarginalCurve>& curves,
                                   std::size_t re, const RenewableChain& chain,
                                   MarginalCurve& out, double* clip = nullptr) {
    if (re >= chain.n_bins())
        throw std::invalid_argument("expected_marginal: bin out of range");
    if (curves.size() != chain.n_bins())
        throw std::invalid_argument("expected_marginal: curve count mismatch");
    const std::vector<double>& ref = curves.front().levels;
    for (const MarginalCurve& c : curves)
        if (c.levels.size() != ref.size() || c.levels.front() != ref.front() ||
            c.levels.back() != ref.back())
            throw std::invalid_argument("expected_marginal: mismatched knot grids");

    out.levels.assign(ref.begin(), ref.end());
    out.values.assign(ref.size(), 0.0);
    const std::vector<double>& row = chain.transition[re];
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < chain.n_bins(); ++k) sum += row[k] * curves[k].values[i];
        out.values[i] = sum;
    }
    double worst = 0.0;
    for (std::size_t i = 1; i < out.values.size(); ++i)
        if (out.values[i] > out.values[i - 1]) {
            worst = std::max(worst, out.values[i] - out.values[i - 1]);
            out.values[i] = out.values[i - 1];
        }
    if (clip) *clip = worst;
}

/// Convenience wrapper around expected_marginal_into.
inline MarginalCurve expected_marginal(const std::vector<MarginalCurve>& curves,
                                       std::size_t re, const RenewableChain& chain,
                                       double* clip = nullptr) {
    MarginalCurve out;
    expected_marginal_into(curves, re, chain, out, clip);
    return out;
}

/// Which branch of the threshold structure an optimal stage decision took.
enum class ThresholdCase {
    full_discharge = 1,   ///< selling every stored MWh beats the best future use
    full_charge = 2,      ///< filling to capacity is cheaper than any future buy
    partial_discharge = 3,  ///< sell down to where marginal revenue meets the curve
    partial_charge = 4,   ///< buy up to where marginal cost meets the curve
    idle = 5              ///< the curve brackets both marginals; do nothing
};

/// One resolved stage decision: the action, the branch taken, the resulting
/// storage level, and the stage's own marginal value at the decision point.
struct ThresholdDecision {
    Action action;
    ThresholdCase which = ThresholdCase::idle;
    double landing = 0.0;   ///< storage level after the action
    double marginal = 0.0;  ///< marginal value of the current level
    bool fallback = false;  ///< crossing search failed and idled (never expected)
};

namespace detail {

/// Landing level for a partial discharge from x: the smallest z in [0, x]
/// where selling down to z stops paying, i.e. where
///   d_g_discharge(x - z) - h(z)
/// (non-decreasing in z) turns non-negative. Caller guarantees a sign
/// change across [0, x]. Exact per-segment linear solve.
inline bool discharge_landing(double x, const MarginalCurve& h, const StageCoefficients& c,
                              double* out) {
    const std::vector<double>& lv = h.levels;
    // Grid knots at or below x, plus x itself when off-grid.
    const auto ub = std::upper_bound(lv.begin(), lv.end(), x);
    const auto jb = static_cast<std::size_t>(ub - lv.begin()) - 1;  // lv[jb] <= x
    const bool extra = lv[jb] < x;
    const std::size_t n_knots = jb + 1 + (extra ? 1 : 0);
    const auto knot_z = [&](std::size_t i) { return i <= jb ? lv[i] : x; };
    const auto phi = [&](std::size_t i) {
        const double z = knot_z(i);
        const double hz = i <= jb ? h.values[i] : h.value_at(x);
        return c.d_g_discharge(x - z) - hz;
    };
    // Smallest knot with phi >= 0.
    std::size_t lo = 0, hi = n_knots - 1;
    if (phi(hi) < 0.0) return false;  // no sign change: numerical fallback
    if (phi(lo) >= 0.0) {
        *out = knot_z(lo);
        return true;
    }
    while (lo + 1 < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (phi(mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    const double z0 = knot_z(lo), z1 = knot_z(hi);
    const double f0 = phi(lo), f1 = phi(hi);
    *out = z0 + (z1 - z0) * (-f0) / (f1 - f0);
    return true;
}

/// Landing level for a partial charge from x: the largest z in [x, C] where
/// buying up to z still pays, i.e. the right edge of the region where
///   d_g_charge(z - x) - h(z)
/// (non-decreasing in z) is still non-positive. Caller guarantees a sign
/// change across [x, C].
inline bool charge_landing(double x, const MarginalCurve& h, const StageCoefficients& c,
                           double* out) {
    const std::vector<double>& lv = h.levels;
    // Knot 0 is x itself; the rest are grid knots strictly above x.
    const auto ub = std::upper_bound(lv.begin(), lv.end(), x);
    const auto ja = static_cast<std::size_t>(ub - lv.begin());  // first lv > x
    const std::size_t n_knots = 1 + (lv.size() - ja);
    const auto knot_z = [&](std::size_t i) { return i == 0 ? x : lv[ja + i - 1]; };
    const auto psi = [&](std::size_t i) {
        const double z = knot_z(i);
        const double hz = i == 0 ? h.value_at(x) : h.values[ja + i - 1];
        return c.d_g_charge(z - x) - hz;
    };
    // Largest knot with psi <= 0.
    std::size_t lo = 0, hi = n_knots - 1;
    if (psi(lo) > 0.0) return false;  // no sign change: numerical fallback
    if (psi(hi) <= 0.0) {
        *out = knot_z(hi);
        return true;
    }
    while (lo + 1 < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (psi(mid) <= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    const double z0 = knot_z(lo), z1 = knot_z(hi);
    const double f0 = psi(lo), f1 = psi(hi);
    *out = z0 + (z1 - z0) * (-f0) / (f1 - f0);
    return true;
}

/// Resolve every grid level of one (stage, renewable-bin) slice in a single
/// ascending pass. Equivalent to calling threshold_decision at each knot,
/// but the partial-crossing segments are located with forward-walking
/// pointers instead of per-state binary searches: both landings are
/// non-decreasing in the level and both sign predicates are monotone knot to
/// knot even in floating point, so the walk finds the same bracketing
/// segment and therefore the same actions, marginals, and values.
/// Returns the number of fallback (idled) states, which stays zero because
/// on-grid queries always bracket their crossing.
inline std::size_t threshold_sweep(const std::vector<double>& lv,
                                   const MarginalCurve& h_next,
                                   const std::vector<double>& v_next,
                                   const StageCoefficients& c, const StorageSpec& spec,
                                   const StorageGrid& grid, std::vector<Action>& actions,
                                   std::vector<double>& marginals,
                                   std::vector<double>& values) {
    const std::size_t nx = lv.size();
    const double* h = h_next.values.data();
    const double capacity = spec.capacity;
    const double h0 = h[0];
    const double hC = h[nx - 1];
    std::size_t fallbacks = 0;
    std::size_t pd = 0;  // partial-discharge crossing knot, non-decreasing in i
    std::size_t pc = 0;  // partial-charge crossing knot, non-decreasing in i

    for (std::size_t i = 0; i < nx; ++i) {
        const double x = lv[i];
        Action action{0.0};
        double landing = x;
        double marginal = h[i];

        const double sell_all = c.d_g_discharge(x);
        const double fill_up = c.d_g_charge(capacity - x);
        if (sell_all >= h0) {
            action = Action::discharge(x);
            landing = 0.0;
            marginal = sell_all;
        } else if (fill_up <= hC) {
            action = Action::charge(capacity - x);
            landing = capacity;
            marginal = fill_up;
        } else if (c.d_g_discharge(0.0) > h[i]) {
            // Smallest knot where selling down stops paying; the previous
            // level's crossing is a lower bound.
            while (pd <= i && c.d_g_discharge(x - lv[pd]) - h[pd] < 0.0) ++pd;
            if (pd > i) {
                ++fallbacks;  // bracket lost to round-off; idle (unreachable)
                pd = i;
            } else {
                double z = lv[0];
                double hz = h[0];
                if (pd > 0) {
                    const double z0 = lv[pd - 1], z1 = lv[pd];
                    const double f0 = c.d_g_discharge(x - z0) - h[pd - 1];
                    const double f1 = c.d_g_discharge(x - z1) - h[pd];
                    z = z0 + (z1 - z0) * (-f0) / (f1 - f0);
                    // The curve value at z, interpolated on the segment the
                    // walk just bracketed (same arithmetic as value_at).
                    const double s = (z - z0) / (z1 - z0);
                    hz = h[pd - 1] * (1.0 - s) + h[pd] * s;
                }
                action = Action::discharge(x - z);
                landing = z;
                marginal = hz;
            }
        } else if (c.d_g_charge(0.0) < h[i]) {
            // Largest knot to which buying up still pays; walk forward from
            // the previous level's crossing (never behind the level itself).
            if (pc < i) pc = i;
            while (pc + 1 < nx && c.d_g_charge(lv[pc + 1] - x) - h[pc + 1] <= 0.0) ++pc;
            if (pc + 1 >= nx) {
                ++fallbacks;  // would imply a full charge; idle (unreachable)
            } else {
                const double z0 = lv[pc], z1 = lv[pc + 1];
                const double f0 = c.d_g_charge(z0 - x) - h[pc];
                const double f1 = c.d_g_charge(z1 - x) - h[pc + 1];
                const double z = z0 + (z1 - z0) * (-f0) / (f1 - f0);
                const double s = (z - z0) / (z1 - z0);
                action = Action::charge(z - x);
                landing = z;
                marginal = h[pc] * (1.0 - s) + h[pc + 1] * s;
            }
        }

        actions[i] = action;
        marginals[i] = marginal;
        const double r = c.g_discharge(action.w()) - c.g_charge(action.u());
        values[i] = r + grid.interpolate(v_next, landing);
    }
    return fallbacks;
}

}  // namespace detail

/// Resolve the optimal stage action at level x by comparing the stage's
/// marginal reward against the expected marginal-value curve of the next
/// stage. Exactly one of five branches applies:
///
///   1. full discharge   d_g_discharge(x) >= h(0)
///   2. full charge      d_g_charge(C-x) <= h(C)
///   3. partial discharge: marginal revenue still beats holding, but a full
///      sale would not; sell down to the crossing
///   4. partial charge: buying the first MWh beats its future value... (the
///      mirror case); buy up to the crossing
///   5. idle: the curve at x sits between the two zero-action marginals
inline ThresholdDecision threshold_decision(double x, const MarginalCurve& h_next,
                                            const StageCoefficients& c, double capacity) {
    if (x < 0.0 || x > capacity)
        throw std::invalid_argument("threshold_decision: level outside [0, capacity]");
    ThresholdDecision d;
    const double h0 = h_next.values.front();
    const double hC = h_next.values.back();
    const double hx = h_next.value_at(x);

    if (c.d_g_discharge(x) >= h0) {
        d.which = ThresholdCase::full_discharge;
        d.action = Action::discharge(x);
        d.landing = 0.0;
        d.marginal = c.d_g_discharge(x);
        return d;
    }
    if (c.d_g_charge(capacity - x) <= hC) {
        d.which = ThresholdCase::full_charge;
        d.action = Action::charge(capacity - x);
        d.landing = capacity;
        d.marginal = c.d_g_charge(capacity - x);
        return d;
    }
    if (c.d_g_discharge(0.0) > hx) {
        double z = x;
        if (detail::discharge_landing(x, h_next, c, &z)) {
            d.which = ThresholdCase::partial_discharge;
            d.action = Action::discharge(x - z);
            d.landing = z;
            d.marginal = h_next.value_at(z);
            return d;
        }
        d.fallback = true;  // bracket lost to round-off; idle instead
    } else if (c.d_g_charge(0.0) < hx) {
        double z = x;
        if (detail::charge_landing(x, h_next, c, &z)) {
            d.which = ThresholdCase::partial_charge;
            d.action = Action::charge(z - x);
            d.landing = z;
            d.marginal = h_next.value_at(z);
            return d;
        }
        d.fallback = true;
    }
    d.which = ThresholdCase::idle;
    d.action = Action{0.0};
    d.landing = x;
    d.marginal = hx;
    return d;
}

/// Optimal action only (see threshold_decision).
inline Action threshold_policy(double x, const MarginalCurve& h_next,
                               const StageCoefficients& c, double capacity) {
    return threshold_decision(x, h_next, c, capacity).action;
}

/// This stage's marginal value at x, propagated from the decision branch.
inline double marginal_update(double x, const MarginalCurve& h_next,
                              const StageCoefficients& c, double capacity) {
    return threshold_decision(x, h_next, c, capacity).marginal;
}

/// Marginal value at the forced final stage: below the return target the
/// next MWh saves a forced buy, above it the next MWh is a forced sale.
/// At the target exactly, the discharge branch applies (right-derivative).
inline double terminal_marginal(double x, const StorageSpec& spec,
                                const StageCoefficients& c) {
    if (x < spec.x_init) return c.d_g_charge(spec.x_init - x);
    return c.d_g_discharge(x - spec.x_init);
}

/// Threshold-solver output: a (possibly off-grid) policy, the per-stage
/// marginal curves, and the policy's expected value tracked on the grid for
/// comparison against the exact solver. max_clip and fallback_count report
/// the numerical health of the sweep and stay at zero/round-off in practice.
struct ThresholdResult {
    PolicyTable policy;
    std::vector<std::vector<MarginalCurve>> curves;  ///< [stage][renewable bin]
    ValueTable values;
    double max_clip = 0.0;
    std::size_t fallback_count = 0;
};

/// Accelerated backward sweep: propagates marginal-value curves instead of
/// enumerating actions, resolving each stage's whole level axis in one
/// ascending pass per renewable bin (see detail::threshold_sweep).
inline ThresholdResult threshold_solve(const MdpInstance& inst, unsigned workers = 1) {
    inst.validate();
    const StorageGrid grid = inst.grid();
    const std::vector<double>& lv = grid.levels();
    const std::size_t T = inst.horizon();
    const std::size_t nx = grid.size();
    const std::size_t nk = inst.chain.n_bins();
    const auto coeff = coefficient_table(inst);

    ThresholdResult res;
    res.policy.a.assign(T, std::vector<std::vector<Action>>(nk, std::vector<Action>(nx)));
    res.values.v.assign(T, std::vector<std::vector<double>>(nk, std::vector<double>(nx, 0.0)));
    res.curves.assign(T, std::vector<MarginalCurve>(nk));

    for (std::size_t k = 0; k < nk; ++k) {
        MarginalCurve& curve = res.curves[T - 1][k];
        curve.levels = lv;
        curve.values.resize(nx);
        const StageCoefficients& c = coeff[T - 1][k];
        std::vector<double>& vk = res.values.v[T - 1][k];
        std::vector<Action>& ak = res.policy.a[T - 1][k];
        for (std::size_t i = 0; i < nx; ++i) {
            const Action a = terminal_action(lv[i], inst.spec);
            ak[i] = a;
            vk[i] = c.g_discharge(a.w()) - c.g_charge(a.u());
            curve.values[i] = terminal_marginal(lv[i], inst.spec, c);
        }
    }
    if (T == 1) return res;

    // Per-bin scratch reused across stages; bins are independent within a
    // stage, so the parallel split runs one sweep per bin.
    std::vector<double> clip_by_bin(nk, 0.0);
    std::vector<MarginalCurve> h_next(nk);
    std::vector<std::vector<double>> v_next(nk);
    std::vector<std::size_t> fallbacks_by_bin(nk, 0);
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t k = 0; k < nk; ++k) {
            double clip = 0.0;
            expected_marginal_into(res.curves[t + 1], k, inst.chain, h_next[k], &clip);
            clip_by_bin[k] = std::max(clip_by_bin[k], clip);
            expected_continuation_into(res.values.v[t + 1], k, inst.chain, v_next[k]);
            res.curves[t][k].levels = lv;
            res.curves[t][k].values.assign(nx, 0.0);
            fallbacks_by_bin[k] = 0;
        }
        parallel_for(nk, workers, [&](std::size_t k) {
            fallbacks_by_bin[k] = detail::threshold_sweep(
                lv, h_next[k], v_next[k], coeff[t][k], inst.spec, grid,
                res.policy.a[t][k], res.curves[t][k].values, res.values.v[t][k]);
        });
        for (std::size_t k = 0; k < nk; ++k) res.fallback_count += fallbacks_by_bin[k];
    }
    for (std::size_t k = 0; k < nk; ++k)
        res.max_clip = std::max(res.max_clip, clip_by_bin[k]);
    return res;
}

}  // namespace cesdp
