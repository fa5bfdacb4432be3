#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cesdp/mdp.hpp"

using namespace cesdp;
using Catch::Matchers::WithinAbs;

namespace {

StorageSpec default_storage() { return StorageSpec{20.0, 0.9, 0.9, 0.0}; }

MarketParams default_market() {
    MarketParams mp;
    mp.demand = DemandParams{10.0, 0.2, 240.0};
    mp.elasticity_total = 0.5;
    return mp;
}

}  // namespace

TEST_CASE("storage spec validation", "[mdp]") {
    CHECK_NOTHROW(default_storage().validate());

    StorageSpec s = default_storage();
    s.capacity = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = default_storage();
    s.eta_c = 1.5;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.eta_c = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = default_storage();
    s.eta_d = -0.1;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);

    s = default_storage();
    s.x_init = 25.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s.x_init = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("actions are a single signed delta", "[mdp]") {
    const Action c = Action::charge(5.0);
    CHECK(c.delta == 5.0);
    CHECK(c.u() == 5.0);
    CHECK(c.w() == 0.0);

    const Action d = Action::discharge(3.0);
    CHECK(d.delta == -3.0);
    CHECK(d.u() == 0.0);
    CHECK(d.w() == 3.0);

    const Action idle{};
    CHECK(idle.u() == 0.0);
    CHECK(idle.w() == 0.0);

    // Simultaneous charge and discharge cannot even be expressed.
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const Action a{40.0 * uniform01(rng) - 20.0};
        CHECK(a.u() * a.w() == 0.0);
        CHECK(a.u() - a.w() == a.delta);
    }
}

TEST_CASE("storage grid levels, lookup, and interpolation", "[mdp]") {
    const StorageGrid g(20.0, 20);
    REQUIRE(g.size() == 21);
    CHECK(g.level(0) == 0.0);
    CHECK(g.level(20) == 20.0);
    CHECK(g.level(7) == 7.0);
    CHECK(g.spacing() == 1.0);

    CHECK(g.nearest_index(0.0) == 0);
    CHECK(g.nearest_index(7.4) == 7);
    CHECK(g.nearest_index(7.6) == 8);
    CHECK(g.nearest_index(20.0) == 20);
    CHECK(g.nearest_index(-3.0) == 0);   // clamped
    CHECK(g.nearest_index(99.0) == 20);  // clamped

    std::vector<double> vals(21);
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = 3.0 * static_cast<double>(i) + 1.0;  // linear in the level
    CHECK_THAT(g.interpolate(vals, 7.25), WithinAbs(3.0 * 7.25 + 1.0, 1e-12));
    CHECK(g.interpolate(vals, 0.0) == vals.front());
    CHECK(g.interpolate(vals, 20.0) == vals.back());
    CHECK(g.interpolate(vals, -5.0) == vals.front());  // clamped
    CHECK(g.interpolate(vals, 25.0) == vals.back());

    std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_AS(g.interpolate(wrong, 1.0), std::invalid_argument);

    CHECK_THROWS_AS(StorageGrid(0.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(StorageGrid(10.0, 0), std::invalid_argument);
}

TEST_CASE("feasible bounds and transitions", "[mdp]") {
    const StorageSpec spec = default_storage();

    CHECK(feasible_bounds(0.0, spec) == std::pair{20.0, 0.0});
    CHECK(feasible_bounds(20.0, spec) == std::pair{0.0, 20.0});
    CHECK(feasible_bounds(7.5, spec) == std::pair{12.5, 7.5});
    CHECK_THROWS_AS(feasible_bounds(-0.1, spec), std::invalid_argument);
    CHECK_THROWS_AS(feasible_bounds(20.1, spec), std::invalid_argument);

    CHECK(transition(10.0, 5.0, 0.0, spec) == 15.0);
    CHECK(transition(10.0, 0.0, 10.0, spec) == 0.0);
    CHECK(transition(10.0, 0.0, 0.0, spec) == 10.0);
    CHECK_THROWS_AS(transition(10.0, 15.0, 0.0, spec), std::invalid_argument);
    CHECK_THROWS_AS(transition(10.0, 0.0, 11.0, spec), std::invalid_argument);
    CHECK_THROWS_AS(transition(10.0, -1.0, 0.0, spec), std::invalid_argument);
    // Round-off-sized overshoot from interpolated actions is absorbed.
    CHECK_NOTHROW(transition(10.0, 10.0 + 1e-10, 0.0, spec));
}

TEST_CASE("terminal action restores the cycle start level", "[mdp]") {
    StorageSpec spec = default_storage();
    spec.x_init = 5.0;

    CHECK(terminal_action(5.0, spec).delta == 0.0);
    CHECK(terminal_action(0.0, spec).delta == 5.0);   // must buy back up
    CHECK(terminal_action(20.0, spec).delta == -15.0);  // must sell down

    const StorageGrid g(spec.capacity, 40);
    for (double x : g.levels()) {
        const Action a = terminal_action(x, spec);
        CHECK(transition(x, a.u(), a.w(), spec) == spec.x_init);
    }
}

TEST_CASE("terminal value prices the forced action like any other", "[mdp]") {
    StorageSpec spec = default_storage();
    spec.x_init = 5.0;
    const MarketParams mp = default_market();
    const StageMarket st{30.0, 0.166, 10.0};
    const auto mode = ObjectiveMode::welfare_max;

    CHECK(terminal_value(5.0, 2.0, st, mp, spec, mode) == 0.0);
    // Above x_init the forced action is a discharge of the excess.
    CHECK(terminal_value(12.0, 2.0, st, mp, spec, mode) ==
          g_discharge(7.0, 2.0, st, mp, spec.eta_d, mode));
    // Below x_init it is a charge back up to x_init.
    CHECK(terminal_value(1.0, 2.0, st, mp, spec, mode) ==
          -g_charge(4.0, 2.0, st, mp, spec.eta_c, mode));
}

TEST_CASE("instance validation and coefficient cache", "[mdp]") {
    MdpInstance inst;
    inst.spec = default_storage();
    inst.mp = default_market();
    inst.chain = estimate_chain({1.0, 3.0, 5.0, 1.0, 3.0, 5.0}, 3);
    inst.stages = {StageMarket{30.0, 0.166, 10.0}, StageMarket{40.0, 0.2, 10.0},
                   StageMarket{35.0, 0.0, 10.0}};
    inst.n_soc = 20;
    inst.re_init = 1;
    CHECK_NOTHROW(inst.validate());
    CHECK(inst.horizon() == 3);
    CHECK(inst.grid().size() == 21);

    const auto cache = coefficient_table(inst);
    REQUIRE(cache.size() == 3);
    REQUIRE(cache[0].size() == inst.chain.n_bins());
    for (std::size_t t = 0; t < inst.horizon(); ++t)
        for (std::size_t k = 0; k < inst.chain.n_bins(); ++k) {
            const StageCoefficients want = stage_coefficients(
                inst.stages[t], inst.chain.bin_values[k], inst.mp, inst.spec.eta_c,
                inst.spec.eta_d, inst.mode);
            CHECK(cache[t][k].L_d == want.L_d);
            CHECK(cache[t][k].q_d == want.q_d);
            CHECK(cache[t][k].L_c == want.L_c);
            CHECK(cache[t][k].q_c == want.q_c);
        }

    // Mode override resolves with the requested mode, not the instance's.
    const auto taker = coefficient_table(inst, ObjectiveMode::price_taker);
    CHECK(taker[0][0].q_d == 0.0);
    CHECK(taker[0][0].q_c == 0.0);

    MdpInstance bad = inst;
    bad.stages.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = inst;
    bad.re_init = 3;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = inst;
    bad.stages[1].h = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
