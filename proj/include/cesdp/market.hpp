#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesdp {

/// What the storage optimizes for.
///
/// price_taker plans as if its own actions never move the clearing price;
/// profit_max accounts for its price impact but only in its own cash flow;
/// welfare_max additionally credits the community's surplus changes.
enum class ObjectiveMode { price_taker, profit_max, welfare_max };

inline const char* to_string(ObjectiveMode m) {
    switch (m) {
        case ObjectiveMode::price_taker: return "price_taker";
        case ObjectiveMode::profit_max: return "profit_max";
        case ObjectiveMode::welfare_max: return "welfare_max";
    }
    return "?";
}

/// Linear community demand: load falls with price and shuts off above a cap.
struct DemandParams {
    double max_load = 0.0;    ///< load at zero price (MWh per stage)
    double elasticity = 0.0;  ///< MWh shed per $/MWh price increase
    double price_cap = 0.0;   ///< price above which the community buys nothing

    void validate() const {
        if (max_load < 0.0) throw std::invalid_argument("demand: max_load must be >= 0");
        if (elasticity <= 0.0) throw std::invalid_argument("demand: elasticity must be > 0");
        if (price_cap <= 0.0) throw std::invalid_argument("demand: price_cap must be > 0");
    }
};

/// Community load at a given price.
inline double demand(double price, const DemandParams& d) {
    if (price > d.price_cap) return 0.0;
    return std::max(0.0, d.max_load - d.elasticity * price);
}

/// One band of the piecewise-constant supply-curve slope: slope applies to
/// forecast prices in [price_lo, price_hi).
struct SlopeBand {
    double price_lo = 0.0;
    double price_hi = 0.0;
    double slope = 0.0;  ///< $/MWh increase per MWh of extra demand
};

/// Local slope of the aggregate supply curve, banded by price level.
///
/// Bands must be sorted, contiguous, and non-overlapping; slopes are
/// non-negative because supply curves do not bend downward.
class SlopeTable {
  public:
    SlopeTable() = default;

    explicit SlopeTable(std::vector<SlopeBand> bands) : bands_(std::move(bands)) {
        if (bands_.empty()) throw std::invalid_argument("slope table: no bands");
        for (std::size_t i = 0; i < bands_.size(); ++i) {
            const SlopeBand& b = bands_[i];
            if (!(b.price_lo < b.price_hi))
                throw std::invalid_argument("slope table: band " + std::to_string(i) +
                                            " has price_lo >= price_hi");
            if (b.slope < 0.0)
                throw std::invalid_argument("slope table: band " + std::to_string(i) +
                                            " has negative slope");
            if (i > 0 && bands_[i - 1].price_hi != b.price_lo)
                throw std::invalid_argument("slope table: bands " + std::to_string(i - 1) +
                                            " and " + std::to_string(i) +
                                            " are not contiguous");
        }
    }

    const std::vector<SlopeBand>& bands() const { return bands_; }
    bool empty() const { return bands_.empty(); }

    /// Slope of the band containing the forecast price. Out-of-range prices
    /// clamp to the nearest band; `clamped` reports when that happened.
    double lookup(double price, bool& clamped) const {
        if (bands_.empty()) throw std::logic_error("slope table: lookup on empty table");
        clamped = false;
        if (price < bands_.front().price_lo) {
            clamped = true;
            return bands_.front().slope;
        }
        if (price >= bands_.back().price_hi) {
            clamped = true;
            return bands_.back().slope;
        }
        // Bands are contiguous, so binary search on the lower edges works.
        std::size_t lo = 0, hi = bands_.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi + 1) / 2;
            if (bands_[mid].price_lo <= price)
                lo = mid;
            else
                hi = mid - 1;
        }
        return bands_[lo].slope;
    }

    double lookup(double price) const {
        bool clamped = false;
        return lookup(price, clamped);
    }

  private:
    std::vector<SlopeBand> bands_;
};

/// Market-wide parameters shared by every stage.
struct MarketParams {
    DemandParams demand;
    SlopeTable slope_table;
    double elasticity_total = 0.0;  ///< whole-market price elasticity (> community's)

    void validate() const {
        demand.validate();
        if (elasticity_total <= demand.elasticity)
            throw std::invalid_argument(
                "market: total elasticity must exceed the community's");
    }
};

/// Per-stage market data: the price forecast, the supply slope resolved for
/// that forecast, and the stage's community maximum load.
struct StageMarket {
    double p0_forecast = 0.0;  ///< predicted clearing price before any local action
    double h = 0.0;            ///< resolved supply-curve slope for this stage
    double max_load = 0.0;     ///< community maximum load this stage (MWh)
};

/// Mean clearing price once the stage's renewable output is bid in.
/// Renewable generation displaces supply, so price falls with `re`.
inline double ex_ante_price(const StageMarket& stage, double re, const MarketParams& mp) {
    return stage.p0_forecast - stage.h * re / (1.0 + mp.elasticity_total * stage.h);
}

/// Clearing price after a charge of `u` MWh (storage side) is bought.
inline double ex_post_charge_price(double p_t, double u, const StageMarket& stage,
                                   const MarketParams& mp, double eta_c) {
    return p_t + stage.h * (u / eta_c) / (1.0 + mp.elasticity_total * stage.h);
}

/// Clearing price after a discharge of `w` MWh (storage side) is sold.
inline double ex_post_discharge_price(double p_t, double w, const StageMarket& stage,
                                      const MarketParams& mp, double eta_d) {
    return p_t - stage.h * (eta_d * w) / (1.0 + mp.elasticity_total * stage.h);
}

namespace detail {

/// Price shift per MWh of storage-side charge (grid sees u/eta_c).
inline double price_shift_charge(const StageMarket& stage, const MarketParams& mp,
                                 double eta_c) {
    return stage.h / (eta_c * (1.0 + mp.elasticity_total * stage.h));
}

/// Price shift per MWh of storage-side discharge (grid sees eta_d*w).
inline double price_shift_discharge(const StageMarket& stage, const MarketParams& mp,
                                    double eta_d) {
    return stage.h * eta_d / (1.0 + mp.elasticity_total * stage.h);
}

}  // namespace detail

/// Community welfare change caused by charging `u` MWh at mean price `p_t`:
/// consumers pay more and shed load; typically negative when renewables are low.
inline double welfare_charge(double u, double re, double p_t, const StageMarket& stage,
                             const MarketParams& mp, double eta_c) {
    const double k_c = detail::price_shift_charge(stage, mp, eta_c);
    const double b = mp.demand.elasticity;
    const double net = stage.max_load - b * p_t - re;
    return -net * k_c * u + 0.5 * b * k_c * k_c * u * u;
}

/// Community welfare change caused by discharging `w` MWh at mean price `p_t`:
/// consumers pay less; typically positive.
inline double welfare_discharge(double w, double re, double p_t, const StageMarket& stage,
                                const MarketParams& mp, double eta_d) {
    const double k_d = detail::price_shift_discharge(stage, mp, eta_d);
    const double b = mp.demand.elasticity;
    const double net = stage.max_load - b * p_t - re;
    return net * k_d * w + 0.5 * b * k_d * k_d * w * w;
}

/// Linear and quadratic coefficients of the stage reward, resolved once per
/// (stage, renewable bin, mode):
///
///   g_discharge(w) = L_d*w - q_d*w^2      (concave, q_d >= 0)
///   g_charge(u)    = L_c*u + q_c*u^2      (convex,  q_c >= 0)
///
/// Solvers work off these rather than recomputing prices per action.
struct StageCoefficients {
    double p_t = 0.0;  ///< mean ex-ante price for this (stage, renewable) pair
    double L_d = 0.0;
    double q_d = 0.0;
    double L_c = 0.0;
    double q_c = 0.0;
    double k_c = 0.0;  ///< price shift per MWh charged
    double k_d = 0.0;  ///< price shift per MWh discharged

    double g_discharge(double w) const { return L_d * w - q_d * w * w; }
    double g_charge(double u) const { return L_c * u + q_c * u * u; }
    double d_g_discharge(double w) const { return L_d - 2.0 * q_d * w; }
    double d_g_charge(double u) const { return L_c + 2.0 * q_c * u; }
};

/// Resolve the stage reward coefficients for one (stage, renewable, mode).
inline StageCoefficients stage_coefficients(const StageMarket& stage, double re,
                                            const MarketParams& mp, double eta_c,
                                            double eta_d, ObjectiveMode mode) {
    StageCoefficients c;
    c.p_t = ex_ante_price(stage, re, mp);
    c.k_c = detail::price_shift_charge(stage, mp, eta_c);
    c.k_d = detail::price_shift_discharge(stage, mp, eta_d);
    const double b = mp.demand.elasticity;
    const double net = stage.max_load - b * c.p_t - re;
    switch (mode) {
        case ObjectiveMode::price_taker:
            // Plans as if its trades clear at the undisturbed price.
            c.L_d = eta_d * c.p_t;
            c.L_c = c.p_t / eta_c;
            c.q_d = 0.0;
            c.q_c = 0.0;
            c.k_c = 0.0;
            c.k_d = 0.0;
            break;
        case ObjectiveMode::profit_max:
            // Own cash flow with price impact, no welfare credit.
            c.L_d = eta_d * c.p_t;
            c.L_c = c.p_t / eta_c;
            c.q_d = eta_d * c.k_d;
            c.q_c = c.k_c / eta_c;
            break;
        case ObjectiveMode::welfare_max:
            // Cash flow plus the community's surplus change.
            c.L_d = eta_d * c.p_t + c.k_d * net;
            c.L_c = c.p_t / eta_c + c.k_c * net;
            c.q_d = eta_d * c.k_d - 0.5 * b * c.k_d * c.k_d;
            c.q_c = c.k_c / eta_c - 0.5 * b * c.k_c * c.k_c;
            break;
    }
    return c;
}

/// Stage revenue of discharging `w` MWh under the given objective mode.
inline double g_discharge(double w, double re, const StageMarket& stage,
                          const MarketParams& mp, double eta_d, ObjectiveMode mode) {
    return stage_coefficients(stage, re, mp, 1.0, eta_d, mode).g_discharge(w);
}

/// Stage cost of charging `u` MWh under the given objective mode.
inline double g_charge(double u, double re, const StageMarket& stage,
                       const MarketParams& mp, double eta_c, ObjectiveMode mode) {
    return stage_coefficients(stage, re, mp, eta_c, 1.0, mode).g_charge(u);
}

/// Stage reward: discharge revenue minus charge cost.
inline double reward(double u, double w, double re, const StageMarket& stage,
                     const MarketParams& mp, double eta_c, double eta_d,
                     ObjectiveMode mode) {
    const StageCoefficients c = stage_coefficients(stage, re, mp, eta_c, eta_d, mode);
    return c.g_discharge(w) - c.g_charge(u);
}

/// Marginal revenue of the next MWh discharged.
inline double d_g_discharge(double w, double re, const StageMarket& stage,
                            const MarketParams& mp, double eta_d, ObjectiveMode mode) {
    return stage_coefficients(stage, re, mp, 1.0, eta_d, mode).d_g_discharge(w);
}

/// Marginal cost of the next MWh charged.
inline double d_g_charge(double u, double re, const StageMarket& stage,
                         const MarketParams& mp, double eta_c, ObjectiveMode mode) {
    return stage_coefficients(stage, re, mp, eta_c, 1.0, mode).d_g_charge(u);
}

}  // namespace cesdp
