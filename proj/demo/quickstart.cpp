// Minimal library walkthrough: build a one-day toy instance in code, solve it
// with both solvers, and simulate the resulting schedule.

#include <iostream>

#include "cesdp/evaluate.hpp"
#include "cesdp/sdp.hpp"
#include "cesdp/threshold.hpp"

int main() {
    using namespace cesdp;

    // A 12-stage day: cheap early, expensive late.
    MdpInstance inst;
    inst.spec = StorageSpec{10.0, 0.9, 0.9, 0.0};
    inst.mode = ObjectiveMode::welfare_max;
    inst.mp.demand = DemandParams{10.0, 0.2, 240.0};
    inst.mp.slope_table = SlopeTable({{0.0, 25.0, 0.043}, {25.0, 240.0, 0.166}});
    inst.mp.elasticity_total = 0.5;
    inst.n_soc = 10;
    for (int t = 0; t < 12; ++t) {
        StageMarket stage;
        stage.p0_forecast = t < 6 ? 18.0 + t : 40.0 - t;
        stage.h = inst.mp.slope_table.lookup(stage.p0_forecast);
        stage.max_load = 10.0;
        inst.stages.push_back(stage);
    }

    // A lightly persistent two-state renewable chain.
    inst.chain.bin_edges = {0.0, 2.0, 4.0};
    inst.chain.bin_values = {1.0, 3.0};
    inst.chain.transition = {{0.8, 0.2}, {0.3, 0.7}};
    inst.re_init = 0;

    const SdpResult sdp = backward_induction(inst);
    const ThresholdResult thr = threshold_solve(inst);
    const std::size_t i0 = inst.grid().nearest_index(inst.spec.x_init);
    std::cout << "sdp optimal value:       " << sdp.values.v[0][inst.re_init][i0] << "\n";
    std::cout << "threshold policy value:  " << thr.values.v[0][inst.re_init][i0] << "\n";

    const Trajectory traj = rollout(sdp.policy, inst, /*path_seed=*/7);
    std::cout << "one sampled day: arbitrage " << traj.arbitrage_total << ", welfare "
              << traj.welfare_total << ", total " << traj.total() << "\n";
    for (const TrajectoryStage& s : traj.stages)
        std::cout << "  t=" << s.t + 1 << " x=" << s.x << " u=" << s.u << " w=" << s.w
                  << " price " << s.p_ante << " -> " << s.p_post << "\n";
    return 0;
}
