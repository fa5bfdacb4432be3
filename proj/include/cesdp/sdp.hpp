#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "cesdp/mdp.hpp"
#include "cesdp/parallel.hpp"

namespace cesdp {

/// Optimal expected values on the (stage, renewable-bin, level) grid.
/// v[t][k][i] is the best expected return from stage t onward when the
/// renewable bin is k and the storage holds grid level i. The level axis is
/// innermost so the per-stage sweeps stream through contiguous memory.
struct ValueTable {
    std::vector<std::vector<std::vector<double>>> v;

    std::size_t horizon() const { return v.size(); }
};

/// Optimal actions on the same grid as ValueTable; a[t][k][i] is the signed
/// level change (positive charge, negative discharge).
struct PolicyTable {
    std::vector<std::vector<std::vector<Action>>> a;

    std::size_t horizon() const { return a.size(); }
};

/// Expected next-stage value over the renewable transition, per grid level:
/// out[j] = sum_k' P(re -> k') * v_next[k'][j], summed in ascending bin
/// order so the result is identical however the caller parallelizes.
/// `out` is overwritten; reusing it across stages avoids reallocation.
inline void expected_continuation_into(const std::vector<std::vector<double>>& v_next,
                                       std::size_t re, const RenewableChain& chain,
                                       std::vector<double>& out) {
    if (re >= chain.n_bins())
        throw std::invalid_argument("expected_continuation: bin out of range");
    if (v_next.size() != chain.n_bins())
        throw std::invalid_argument("expected_continuation: slice count mismatch");
    const std::size_t n = v_next.front().size();
    for (const auto& slice : v_next)
        if (slice.size() != n)
            throw std::invalid_argument("expected_continuation: slice width mismatch");
    const std::vector<double>& row = chain.transition[re];
    out.assign(n, 0.0);
    for (std::size_t k = 0; k < chain.n_bins(); ++k) {
        const double p = row[k];
        const double* vk = v_next[k].data();
        for (std::size_t j = 0; j < n; ++j) out[j] += p * vk[j];
    }
}

/// Allocation-friendly wrapper around expected_continuation_into.
inline std::vector<double> expected_continuation(
    const std::vector<std::vector<double>>& v_next, std::size_t re,
    const RenewableChain& chain) {
    std::vector<double> out;
    expected_continuation_into(v_next, re, chain, out);
    return out;
}

struct SdpResult {
    ValueTable values;
    PolicyTable policy;
};

/// Exact backward induction over grid-to-grid actions.
///
/// The final stage is the forced return to x_init; every earlier stage
/// maximizes reward plus expected continuation over all reachable grid
/// levels. Ties break toward the smaller action magnitude, then toward
/// discharging, so the argmax is unique and reproducible.
inline SdpResult backward_induction(const MdpInstance& inst, unsigned workers = 1) {
    inst.validate();
    const StorageGrid grid = inst.grid();
    const std::vector<double>& lv = grid.levels();
    const std::size_t T = inst.horizon();
    const std::size_t nx = grid.size();
    const std::size_t nk = inst.chain.n_bins();
    const auto coeff = coefficient_table(inst);

    SdpResult res;
    res.values.v.assign(T, std::vector<std::vector<double>>(nk, std::vector<double>(nx, 0.0)));
    res.policy.a.assign(T, std::vector<std::vector<Action>>(nk, std::vector<Action>(nx)));

    // Forced final stage.
    for (std::size_t k = 0; k < nk; ++k) {
        const StageCoefficients& c = coeff[T - 1][k];
        std::vector<double>& vk = res.values.v[T - 1][k];
        std::vector<Action>& ak = res.policy.a[T - 1][k];
        for (std::size_t i = 0; i < nx; ++i) {
            const Action a = terminal_action(lv[i], inst.spec);
            vk[i] = c.g_discharge(a.w()) - c.g_charge(a.u());
            ak[i] = a;
        }
    }

    if (T == 1) return res;

    // Continuation buffers reused across stages to keep the backward loop
    // allocation-free.
    std::vector<std::vector<double>> phi(nk);
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t k = 0; k < nk; ++k)
            expected_continuation_into(res.values.v[t + 1], k, inst.chain, phi[k]);

        parallel_for(nx * nk, workers, [&](std::size_t s) {
            const std::size_t k = s / nx;
            const std::size_t i = s % nx;
            const StageCoefficients& c = coeff[t][k];
            const double* phi_k = phi[k].data();
            const double xi = lv[i];
            // Two outward scans, discharge side first. Within a side the
            // scan runs from the smallest move up and replaces only on
            // strict improvement, so the smallest action magnitude wins
            // ties; across sides, discharging wins ties at equal distance.
            double best_d = phi_k[i];  // d = 0: idle
            std::size_t j_d = i;
            for (std::size_t j = i; j-- > 0;) {
                const double gain = c.g_discharge(xi - lv[j]) + phi_k[j];
                if (gain > best_d) {
                    best_d = gain;
                    j_d = j;
                }
            }
            double best_c = 0.0;
            std::size_t j_c = i;
            bool have_c = false;
            for (std::size_t j = i + 1; j < nx; ++j) {
                const double gain = phi_k[j] - c.g_charge(lv[j] - xi);
                if (!have_c || gain > best_c) {
                    best_c = gain;
                    j_c = j;
                    have_c = true;
                }
            }
            std::size_t best_j = j_d;
            double best = best_d;
            if (have_c &&
                (best_c > best_d || (best_c == best_d && j_c - i < i - j_d))) {
                best_j = j_c;
                best = best_c;
            }
            res.values.v[t][k][i] = best;
            res.policy.a[t][k][i] = Action{lv[best_j] - lv[i]};
        });
    }
    return res;
}

/// Largest positive second difference of v[t][k][.] along the level axis
/// across the whole table, relative to the table's magnitude. Concavity in
/// the storage level means this stays at round-off scale.
inline double max_concavity_violation(const ValueTable& table) {
    double scale = 1.0;
    for (const auto& slab : table.v)
        for (const auto& row : slab)
            for (double x : row) scale = std::max(scale, std::abs(x));
    double worst = 0.0;
    for (const auto& slab : table.v)
        for (const auto& row : slab)
            for (std::size_t i = 1; i + 1 < row.size(); ++i) {
                const double second = row[i + 1] - 2.0 * row[i] + row[i - 1];
                worst = std::max(worst, second / scale);
            }
    return worst;
}

}  // namespace cesdp
