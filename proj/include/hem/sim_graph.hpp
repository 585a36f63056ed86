#pragma once

#include "hem/core.hpp"
#include "hem/rng.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hem {

struct Agent {
    int id = 0;
    AgentType agent_type = AgentType::H;
    std::int64_t arrival_epoch = 0;
    bool is_bridge = false;
    bool altruist = false;  // one of the initial d bridges; has no type of need
};

struct ChainPath {
    std::vector<int> ids;  // ids[0] is the bridge
    int h_count = 0;
    int e_count = 0;
    int length() const { return static_cast<int>(ids.size()) - 1; }
};

/// Thrown by the exact Max-Chains search when its expansion cap is hit.
class SearchBudgetExceeded : public NumericError {
public:
    using NumericError::NumericError;
};

/// Agent-level market. Edge i -> j means j can use i's item. Coins are drawn
/// once, at the later arrival of the pair, and kept while both stay.
class CompatibilityGraph {
public:
    explicit CompatibilityGraph(int bridges = 0, bool track_coins = false);

    /// Adds a waiting agent and samples its coins against every live agent
    /// in increasing id order.
    const Agent& arrive(AgentType t, const MarketParams& p, Rng& rng, std::int64_t epoch);
    /// Adds a waiting agent without edges (for constructed instances).
    const Agent& add_agent(AgentType t, std::int64_t epoch = 0);
    void add_edge(int from, int to);

    bool has_edge(int from, int to) const;
    const Agent& agent(int id) const;
    const std::vector<int>& out_edges(int id) const;
    const std::vector<int>& waiting() const { return waiting_; }
    const std::vector<int>& bridges() const { return bridges_; }
    int waiting_of(AgentType t) const { return t == AgentType::H ? waiting_h_ : waiting_e_; }
    bool is_waiting(int id) const;
    std::size_t edge_count() const;

    /// Removes a waiting or bridge agent with all its edges.
    void remove(int id);
    /// Waiting agent becomes a bridge; its incoming edges are dropped.
    void make_bridge(int id);

    /// Pairs whose coins were drawn more than once (always 0 by design).
    std::int64_t duplicate_coin_pairs() const { return duplicates_; }

    /// True when some pair of waiting agents forms a 2-cycle.
    bool has_waiting_two_cycle() const;
    /// True when some bridge has an edge to a waiting agent.
    bool bridge_points_to_waiting() const;

private:
    struct Node {
        Agent agent;
        std::vector<int> out;  // increasing ids
        std::vector<int> in;
    };
    Node& node(int id);
    const Node& node(int id) const;
    static void erase_id(std::vector<int>& v, int id);

    std::unordered_map<int, Node> nodes_;
    std::vector<int> waiting_;  // increasing ids
    std::vector<int> bridges_;  // increasing ids
    int next_id_ = 0;
    int waiting_h_ = 0;
    int waiting_e_ = 0;
    bool track_coins_;
    std::set<std::pair<int, int>> coin_pairs_;
    std::int64_t duplicates_ = 0;
};

enum class BilateralPriority { H_FIRST, E_FIRST };

/// Picks a 2-cycle partner for `new_agent` and removes both on success.
std::optional<int> match_bilateral(CompatibilityGraph& g, int new_agent, BilateralPriority prio, Rng& rng);

/// Local-search segment through `new_agent`, without modifying the graph.
std::optional<ChainPath> find_chain_local(const CompatibilityGraph& g, int new_agent, Rng& rng);
/// Path maximising (H count, length), smallest id sequence among ties.
std::optional<ChainPath> find_chain_max(const CompatibilityGraph& g, int new_agent,
                                        std::int64_t budget = 10'000'000);
/// Executes a segment: the bridge leaves, inner agents leave, last agent
/// becomes a bridge.
void apply_chain(CompatibilityGraph& g, const ChainPath& path);

std::optional<ChainPath> match_chain_local(CompatibilityGraph& g, int new_agent, Rng& rng);
std::optional<ChainPath> match_chain_max(CompatibilityGraph& g, int new_agent,
                                         std::int64_t budget = 10'000'000);

struct GraphRunOptions {
    std::int64_t search_budget = 10'000'000;
    /// Under MAX_CHAIN, also run local search on the same graph each epoch
    /// and count epochs where it removes more H agents.
    bool compare_with_local = false;
    /// Assert the between-arrival graph invariants at every epoch.
    bool check_invariants = false;
    bool track_coins = false;
};

struct GraphSummary {
    SimSummary little;            // counts averaged, waiting by Little's law
    double w_h_direct = 0.0;      // mean sojourn of H agents, time units
    double w_e_direct = 0.0;
    double stderr_w_h_direct = 0.0;
    std::int64_t direct_samples_h = 0;
    std::int64_t censored_h = 0;  // still waiting at the horizon
    std::int64_t compare_violations = 0;
    std::int64_t invariant_violations = 0;
    std::int64_t duplicate_coin_pairs = 0;
};

GraphSummary run_graph_replica(Policy policy, const MarketParams& p, const RunControls& rc, Rng& rng,
                               const GraphRunOptions& opts = {});

}  // namespace hem
