#pragma once

#include "hem/core.hpp"
#include "hem/rng.hpp"

#include <cstdint>
#include <vector>

namespace hem {

struct StepEvent {
    AgentType arrival_type = AgentType::H;
    bool matched = false;
    int chain_len = 0;  // 0 unless a segment formed
};

struct StepResult {
    CountsState state;
    StepEvent event;
};

// Coin order in every step: arrival type first, then match coins in
// priority order, each drawn only when the previous one failed. Under chain
// policies the bridge coin is always drawn; inside a segment the H coin is
// drawn only while H agents remain and the E coin only while E agents remain.

StepResult step_bilateral_h(CountsState s, const MarketParams& p, Rng& rng);
StepResult step_bilateral_e(CountsState s, const MarketParams& p, Rng& rng);
StepResult step_chain(CountsState s, const MarketParams& p, Rng& rng);
/// Unmatched E arrivals leave, so e stays 0.
StepResult step_chain_hat(CountsState s, const MarketParams& p, Rng& rng);
/// Unmatched E arrivals become H agents.
int step_bilateral_e_tilde(int h, const MarketParams& p, Rng& rng);

StepResult step(Policy policy, CountsState s, const MarketParams& p, Rng& rng);

/// Runs one replica from the empty market. The warm-up prefix of the
/// arrivals is discarded and the state after each later arrival is averaged.
SimSummary run_replica(Policy policy, const MarketParams& p, const RunControls& rc, Rng& rng);

/// rc.replicas independent replicas with seeds replica_seed(rc.seed, i).
std::vector<SimSummary> run_replicas(Policy policy, const MarketParams& p, const RunControls& rc);

struct CoupledTrace {
    /// Dominated process (C(d) or B_E) and dominating process (Ĉ(d) or B̃_E),
    /// recorded after every epoch.
    std::vector<CountsState> first;
    std::vector<CountsState> second;
    std::int64_t violation_count = 0;
    /// Chain coupling: proof cases a, b, c. Bilateral: joint / independent.
    std::int64_t case_counts[3] = {0, 0, 0};
    SimSummary first_summary;
    SimSummary second_summary;
};

/// H count of C(d) never exceeds that of Ĉ(d).
CoupledTrace run_coupled_chain(const MarketParams& p, const RunControls& rc, Rng& rng);
/// h + e under B_E never exceeds h + 1 under B̃_E.
CoupledTrace run_coupled_bilateral_e(const MarketParams& p, const RunControls& rc, Rng& rng);

}  // namespace hem
