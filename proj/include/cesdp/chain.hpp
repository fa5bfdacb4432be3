#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesdp {

/// Deterministic uniform draw in [0, 1) from a 64-bit engine.
///
/// Uses the top 53 bits of the engine output directly so results are
/// identical across platforms and standard-library versions, unlike
/// std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Deterministic standard-normal draw (Box-Muller, one value per call pair
/// discarded for simplicity and reproducibility).
inline double gaussian01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Zero-mean Gaussian error on the price forecast; only simulation draws
/// from it, planning always uses the mean.
struct PriceForecastModel {
    double sigma = 0.0;

    void validate() const {
        if (sigma < 0.0) throw std::invalid_argument("forecast model: sigma must be >= 0");
    }

    double sample(std::mt19937_64& rng) const {
        return sigma == 0.0 ? 0.0 : sigma * gaussian01(rng);
    }
};

/// Discretized Markov chain over renewable-output levels.
///
/// Bins are equal-width over [0, max of the source series], top edge
/// inclusive; each bin is represented by its midpoint.
struct RenewableChain {
    std::vector<double> bin_edges;             ///< n_bins+1 ascending edges (MWh)
    std::vector<double> bin_values;            ///< midpoint of each bin (MWh)
    std::vector<std::vector<double>> transition;  ///< row-stochastic matrix

    std::size_t n_bins() const { return bin_values.size(); }

    /// Bin index of a renewable level; values at or above the top edge map
    /// to the last bin.
    std::size_t bin_of(double value) const {
        if (value < 0.0) throw std::invalid_argument("chain: negative renewable value");
        if (value >= bin_edges.back()) return n_bins() - 1;
        std::size_t idx = 0;
        while (idx + 1 < n_bins() && value >= bin_edges[idx + 1]) ++idx;
        return idx;
    }

    void validate() const {
        if (bin_values.empty()) throw std::invalid_argument("chain: no bins");
        if (bin_edges.size() != bin_values.size() + 1)
            throw std::invalid_argument("chain: edge/value size mismatch");
        for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
            if (!(bin_edges[i] < bin_edges[i + 1]))
                throw std::invalid_argument("chain: bin edges not strictly ascending");
        if (transition.size() != n_bins())
            throw std::invalid_argument("chain: transition row count mismatch");
        for (const auto& row : transition) {
            if (row.size() != n_bins())
                throw std::invalid_argument("chain: transition column count mismatch");
            double sum = 0.0;
            for (double p : row) {
                if (p < 0.0) throw std::invalid_argument("chain: negative probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("chain: row does not sum to 1");
        }
    }
};

/// Build the bin skeleton (edges, midpoints, zeroed transitions) for a
/// renewable series; equal-width bins over [0, max(series)].
inline RenewableChain discretize(const std::vector<double>& series, std::size_t n_bins) {
    if (series.empty()) throw std::invalid_argument("discretize: empty series");
    if (n_bins < 1) throw std::invalid_argument("discretize: n_bins must be >= 1");
    double top = 0.0;
    for (double v : series) {
        if (v < 0.0) throw std::invalid_argument("discretize: negative renewable value");
        top = std::max(top, v);
    }
    // A constant-zero series still needs a nonzero bin width.
    if (top <= 0.0) top = 1.0;

    RenewableChain chain;
    chain.bin_edges.resize(n_bins + 1);
    chain.bin_values.resize(n_bins);
    for (std::size_t i = 0; i <= n_bins; ++i)
        chain.bin_edges[i] = top * static_cast<double>(i) / static_cast<double>(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i)
        chain.bin_values[i] = 0.5 * (chain.bin_edges[i] + chain.bin_edges[i + 1]);
    chain.transition.assign(n_bins, std::vector<double>(n_bins, 0.0));
    return chain;
}

/// Estimate the transition matrix from consecutive pairs of the series,
/// with additive (Laplace) smoothing `alpha` so no row degenerates even
/// when a bin is never visited.
inline RenewableChain estimate_chain(const std::vector<double>& series, std::size_t n_bins,
                                     double alpha = 1.0) {
    if (series.size() < 2)
        throw std::invalid_argument("estimate_chain: need at least 2 observations");
    if (alpha < 0.0) throw std::invalid_argument("estimate_chain: alpha must be >= 0");

    RenewableChain chain = discretize(series, n_bins);
    std::vector<std::vector<double>> counts(n_bins, std::vector<double>(n_bins, 0.0));
    for (std::size_t t = 0; t + 1 < series.size(); ++t)
        counts[chain.bin_of(series[t])][chain.bin_of(series[t + 1])] += 1.0;

    for (std::size_t i = 0; i < n_bins; ++i) {
        double row_total = 0.0;
        for (double c : counts[i]) row_total += c;
        const double denom = row_total + alpha * static_cast<double>(n_bins);
        if (denom <= 0.0) {
            // alpha = 0 and an unvisited bin: make it absorbing rather than
            // leaving a zero row.
            chain.transition[i][i] = 1.0;
            continue;
        }
        for (std::size_t j = 0; j < n_bins; ++j)
            chain.transition[i][j] = (counts[i][j] + alpha) / denom;
    }
    chain.validate();
    return chain;
}

/// Sample a length-T path of bin indices starting from `start_bin`.
/// Deterministic for a given seed: inverse-CDF walk on uniform01 draws.
inline std::vector<std::size_t> sample_path(const RenewableChain& chain,
                                            std::size_t start_bin, std::size_t T,
                                            std::uint64_t seed) {
    if (start_bin >= chain.n_bins())
        throw std::invalid_argument("sample_path: start_bin out of range");
    std::vector<std::size_t> path;
    path.reserve(T);
    if (T == 0) return path;
    path.push_back(start_bin);
    std::mt19937_64 rng(seed);
    for (std::size_t t = 1; t < T; ++t) {
        const std::vector<double>& row = chain.transition[path.back()];
        const double draw = uniform01(rng);
        double cum = 0.0;
        std::size_t next = chain.n_bins() - 1;
        for (std::size_t j = 0; j < row.size(); ++j) {
            cum += row[j];
            if (draw < cum) {
                next = j;
                break;
            }
        }
        path.push_back(next);
    }
    return path;
}

}  // namespace cesdp
