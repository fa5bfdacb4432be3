#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cesdp/evaluate.hpp"
#include "cesdp/sdp.hpp"

using namespace cesdp;
using Catch::Matchers::WithinAbs;

namespace {

MarketParams default_market() {
    MarketParams mp;
    mp.demand = DemandParams{10.0, 0.2, 240.0};
    mp.elasticity_total = 0.5;
    return mp;
}

/// Single-bin chain so deterministic scenarios stay deterministic.
RenewableChain flat_chain() { return estimate_chain({2.0, 2.0}, 1); }

/// Small instance with enough price movement to make storage worth using.
MdpInstance small_instance() {
    MdpInstance inst;
    inst.spec = StorageSpec{10.0, 0.9, 0.9, 0.0};
    inst.mode = ObjectiveMode::welfare_max;
    inst.mp = default_market();
    inst.chain = estimate_chain({1.0, 3.0, 5.0, 1.0, 3.0, 5.0, 2.0, 4.0}, 2);
    inst.stages = {StageMarket{15.0, 0.1, 10.0}, StageMarket{40.0, 0.3, 10.0},
                   StageMarket{12.0, 0.1, 10.0}, StageMarket{45.0, 0.2, 10.0},
                   StageMarket{25.0, 0.15, 10.0}};
    inst.n_soc = 5;
    inst.re_init = 0;
    return inst;
}

/// Randomized toy instance for oracle cross-checks.
MdpInstance random_instance(std::mt19937_64& rng) {
    MdpInstance inst;
    const double cap = 2.0 + 18.0 * uniform01(rng);
    inst.spec = StorageSpec{cap, 0.7 + 0.3 * uniform01(rng), 0.7 + 0.3 * uniform01(rng),
                            cap * uniform01(rng)};
    inst.mode = static_cast<ObjectiveMode>(rng() % 3);
    inst.mp = default_market();

    const std::size_t nk = 1 + rng() % 3;
    RenewableChain chain = discretize({0.0, 6.0}, nk);
    for (std::size_t i = 0; i < nk; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < nk; ++j) {
            chain.transition[i][j] = 0.05 + uniform01(rng);
            total += chain.transition[i][j];
        }
        for (std::size_t j = 0; j < nk; ++j) chain.transition[i][j] /= total;
        // Exact row sum: push the residual into the diagonal.
        double sum = 0.0;
        for (double p : chain.transition[i]) sum += p;
        chain.transition[i][i] += 1.0 - sum;
    }
    inst.chain = chain;

    const std::size_t T = 1 + rng() % 4;
    for (std::size_t t = 0; t < T; ++t)
        inst.stages.push_back(StageMarket{5.0 + 55.0 * uniform01(rng), uniform01(rng),
                                          5.0 + 10.0 * uniform01(rng)});
    inst.n_soc = 1 + rng() % 4;
    inst.re_init = rng() % nk;
    return inst;
}

}  // namespace

TEST_CASE("expected_continuation is a transition-weighted average", "[sdp]") {
    RenewableChain chain = discretize({0.0, 9.0}, 2);
    chain.transition = {{0.25, 0.75}, {2.0 / 3.0, 1.0 / 3.0}};
    // Bin-major: v_next[k][j] is the value of level j under renewable bin k.
    const std::vector<std::vector<double>> v_next = {{10.0, 30.0}, {20.0, 40.0}};

    const auto from0 = expected_continuation(v_next, 0, chain);
    REQUIRE(from0.size() == 2);
    CHECK_THAT(from0[0], WithinAbs(17.5, 1e-12));
    CHECK_THAT(from0[1], WithinAbs(37.5, 1e-12));

    const auto from1 = expected_continuation(v_next, 1, chain);
    CHECK_THAT(from1[0], WithinAbs(2.0 / 3.0 * 10.0 + 1.0 / 3.0 * 20.0, 1e-12));

    CHECK_THROWS_AS(expected_continuation(v_next, 2, chain), std::invalid_argument);
    const std::vector<std::vector<double>> ragged = {{1.0}, {2.0, 3.0}};
    CHECK_THROWS_AS(expected_continuation(ragged, 0, chain), std::invalid_argument);
}

TEST_CASE("a one-stage horizon is just the forced return", "[sdp]") {
    MdpInstance inst = small_instance();
    inst.stages.resize(1);
    inst.spec.x_init = 6.0;
    const SdpResult sol = backward_induction(inst);
    REQUIRE(sol.values.horizon() == 1);
    const StorageGrid grid = inst.grid();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Action want = terminal_action(grid.level(i), inst.spec);
        for (std::size_t k = 0; k < inst.chain.n_bins(); ++k) {
            CHECK(sol.policy.a[0][k][i].delta == want.delta);
            const double r = reward(want.u(), want.w(), inst.chain.bin_values[k],
                                    inst.stages[0], inst.mp, inst.spec.eta_c,
                                    inst.spec.eta_d, inst.mode);
            CHECK_THAT(sol.values.v[0][k][i], WithinAbs(r, 1e-12));
        }
    }
}

TEST_CASE("two-stage spread is captured exactly", "[sdp]") {
    // Price 10 now, 30 at the forced stage, lossless storage, no price
    // impact: fill up now (pay 10/MWh), forced sale at 30/MWh nets 20/MWh.
    MdpInstance inst;
    inst.spec = StorageSpec{10.0, 1.0, 1.0, 0.0};
    inst.mode = ObjectiveMode::welfare_max;
    inst.mp = default_market();
    inst.chain = flat_chain();
    inst.stages = {StageMarket{10.0, 0.0, 10.0}, StageMarket{30.0, 0.0, 10.0}};
    inst.n_soc = 2;
    inst.re_init = 0;

    const SdpResult sol = backward_induction(inst);
    CHECK(sol.values.v[0][0][0] == 200.0);
    CHECK(sol.policy.a[0][0][0].delta == 10.0);
    // From a full store the buy is impossible and the sale nets 30/MWh now
    // vs 30/MWh later; holding and selling at the end are tied, and the
    // smaller action (idle) wins the tie.
    CHECK(sol.policy.a[0][0][2].delta == 0.0);
}

TEST_CASE("declining prices leave an empty store idle", "[sdp]") {
    MdpInstance inst;
    inst.spec = StorageSpec{10.0, 0.9, 0.9, 0.0};
    inst.mode = ObjectiveMode::welfare_max;
    inst.mp = default_market();
    inst.chain = flat_chain();
    for (double p : {50.0, 40.0, 30.0, 20.0, 10.0})
        inst.stages.push_back(StageMarket{p, 0.0, 10.0});
    inst.n_soc = 5;
    inst.re_init = 0;

    const SdpResult sol = backward_induction(inst);
    // Charging only ever loses money, so the empty store never acts and the
    // whole problem is worth exactly zero.
    CHECK(sol.values.v[0][0][0] == 0.0);
    for (std::size_t t = 0; t + 1 < inst.horizon(); ++t)
        CHECK(sol.policy.a[t][0][0].delta == 0.0);
}

TEST_CASE("flat prices break ties toward the smallest action", "[sdp]") {
    MdpInstance inst;
    inst.spec = StorageSpec{10.0, 1.0, 1.0, 5.0};
    inst.mode = ObjectiveMode::welfare_max;
    inst.mp = default_market();
    inst.chain = flat_chain();
    for (int t = 0; t < 4; ++t) inst.stages.push_back(StageMarket{25.0, 0.0, 10.0});
    inst.n_soc = 4;
    inst.re_init = 0;

    // Lossless storage and a flat price make every balanced schedule worth
    // the same; the deterministic tie-break must pick the do-nothing one.
    const SdpResult sol = backward_induction(inst);
    for (std::size_t t = 0; t + 1 < inst.horizon(); ++t)
        for (std::size_t i = 0; i < inst.grid().size(); ++i)
            CHECK(sol.policy.a[t][0][i].delta == 0.0);
}

TEST_CASE("backward induction matches brute-force enumeration", "[sdp]") {
    SECTION("fixed small instance") {
        MdpInstance inst = small_instance();
        inst.stages.resize(4);
        inst.n_soc = 4;
        const SdpResult sol = backward_induction(inst);
        const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
        const double got = sol.values.v[0][inst.re_init][i0];
        const double want = oracle_enumerate(inst);
        CHECK_THAT(got, WithinAbs(want, 1e-9 * std::max(1.0, std::abs(want))));
    }

    SECTION("randomized instances across modes and sizes") {
        std::mt19937_64 rng(2024);
        for (int trial = 0; trial < 30; ++trial) {
            const MdpInstance inst = random_instance(rng);
            const SdpResult sol = backward_induction(inst);
            const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
            const double got = sol.values.v[0][inst.re_init][i0];
            const double want = oracle_enumerate(inst);
            INFO("trial " << trial << " mode " << to_string(inst.mode) << " T "
                          << inst.horizon() << " n_soc " << inst.n_soc << " bins "
                          << inst.chain.n_bins());
            REQUIRE_THAT(got, WithinAbs(want, 1e-9 * std::max(1.0, std::abs(want))));
        }
    }
}

TEST_CASE("value tables are concave in the storage level", "[sdp]") {
    MdpInstance inst = small_instance();
    inst.n_soc = 30;
    // Stretch the horizon so concavity has to survive many compositions.
    std::vector<StageMarket> stages;
    for (int rep = 0; rep < 4; ++rep)
        for (const StageMarket& s : inst.stages) stages.push_back(s);
    inst.stages = stages;
    for (auto mode : {ObjectiveMode::price_taker, ObjectiveMode::profit_max,
                      ObjectiveMode::welfare_max}) {
        inst.mode = mode;
        const SdpResult sol = backward_induction(inst);
        CHECK(max_concavity_violation(sol.values) <= 1e-8);
    }
}

TEST_CASE("optimal actions never charge and discharge at once", "[sdp]") {
    const SdpResult sol = backward_induction(small_instance());
    for (const auto& slab : sol.policy.a)
        for (const auto& row : slab)
            for (const Action& a : row) CHECK(a.u() * a.w() == 0.0);
}

TEST_CASE("value is monotone in capacity on nested grids", "[sdp]") {
    MdpInstance small = small_instance();
    small.spec.capacity = 8.0;
    small.n_soc = 4;  // spacing 2
    MdpInstance big = small_instance();
    big.spec.capacity = 10.0;
    big.n_soc = 5;  // same spacing, superset of levels

    const SdpResult a = backward_induction(small);
    const SdpResult b = backward_induction(big);
    // Every schedule feasible at 8 MWh is feasible at 10 MWh, so the bigger
    // store can only help.
    CHECK(b.values.v[0][big.re_init][0] >= a.values.v[0][small.re_init][0] - 1e-9);
}

TEST_CASE("solver output is identical for any worker count", "[sdp]") {
    MdpInstance inst = small_instance();
    inst.n_soc = 12;
    const SdpResult one = backward_induction(inst, 1);
    const SdpResult four = backward_induction(inst, 4);
    for (std::size_t t = 0; t < inst.horizon(); ++t)
        for (std::size_t k = 0; k < inst.chain.n_bins(); ++k)
            for (std::size_t i = 0; i < inst.grid().size(); ++i) {
                CHECK(one.values.v[t][k][i] == four.values.v[t][k][i]);
                CHECK(one.policy.a[t][k][i].delta == four.policy.a[t][k][i].delta);
            }
}
