#include "hem/sim_graph.hpp"
#include "hem/stats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace hem {

CompatibilityGraph::CompatibilityGraph(int bridges, bool track_coins) : track_coins_(track_coins) {
    for (int i = 0; i < bridges; ++i) {
        Node n;
        n.agent = {next_id_, AgentType::H, 0, true, true};
        nodes_.emplace(next_id_, std::move(n));
        bridges_.push_back(next_id_++);
    }
}

CompatibilityGraph::Node& CompatibilityGraph::node(int id) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw ParamError("unknown agent id " + std::to_string(id));
    return it->second;
}

const CompatibilityGraph::Node& CompatibilityGraph::node(int id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw ParamError("unknown agent id " + std::to_string(id));
    return it->second;
}

void CompatibilityGraph::erase_id(std::vector<int>& v, int id) {
    auto it = std::lower_bound(v.begin(), v.end(), id);
    if (it != v.end() && *it == id) v.erase(it);
}

const Agent& CompatibilityGraph::add_agent(AgentType t, std::int64_t epoch) {
    Node n;
    n.agent = {next_id_, t, epoch, false, false};
    auto [it, ok] = nodes_.emplace(next_id_, std::move(n));
    waiting_.push_back(next_id_++);
    (t == AgentType::H ? waiting_h_ : waiting_e_) += 1;
    return it->second.agent;
}

void CompatibilityGraph::add_edge(int from, int to) {
    auto& out = node(from).out;
    auto pos = std::lower_bound(out.begin(), out.end(), to);
    if (pos != out.end() && *pos == to) return;
    out.insert(pos, to);
    auto& in = node(to).in;
    in.insert(std::lower_bound(in.begin(), in.end(), from), from);
}

const Agent& CompatibilityGraph::arrive(AgentType t, const MarketParams& p, Rng& rng, std::int64_t epoch) {
    const int id = next_id_;
    std::vector<int> live;
    live.reserve(bridges_.size() + waiting_.size());
    std::merge(bridges_.begin(), bridges_.end(), waiting_.begin(), waiting_.end(), std::back_inserter(live));
    add_agent(t, epoch);
    Node& fresh = node(id);
    const double p_new = p.p_of(t);
    for (int j : live) {
        Node& other = node(j);
        if (track_coins_ && !coin_pairs_.insert({j, id}).second) ++duplicates_;
        // Bridges hold an item but need nothing, so only j -> new is drawn.
        if (!other.agent.is_bridge && rng.bernoulli(p.p_of(other.agent.agent_type))) {
            fresh.out.push_back(j);
            other.in.push_back(id);
        }
        if (rng.bernoulli(p_new)) {
            other.out.push_back(id);
            fresh.in.push_back(j);
        }
    }
    return fresh.agent;
}

bool CompatibilityGraph::has_edge(int from, int to) const {
    const auto& out = node(from).out;
    return std::binary_search(out.begin(), out.end(), to);
}

const Agent& CompatibilityGraph::agent(int id) const { return node(id).agent; }

const std::vector<int>& CompatibilityGraph::out_edges(int id) const { return node(id).out; }

bool CompatibilityGraph::is_waiting(int id) const {
    auto it = nodes_.find(id);
    return it != nodes_.end() && !it->second.agent.is_bridge;
}

std::size_t CompatibilityGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& [id, nd] : nodes_) n += nd.out.size();
    return n;
}

void CompatibilityGraph::remove(int id) {
    Node& n = node(id);
    for (int j : n.out) erase_id(node(j).in, id);
    for (int j : n.in) erase_id(node(j).out, id);
    if (n.agent.is_bridge) {
        erase_id(bridges_, id);
    } else {
        erase_id(waiting_, id);
        (n.agent.agent_type == AgentType::H ? waiting_h_ : waiting_e_) -= 1;
    }
    nodes_.erase(id);
}

void CompatibilityGraph::make_bridge(int id) {
    Node& n = node(id);
    if (n.agent.is_bridge) return;
    for (int j : n.in) erase_id(node(j).out, id);
    n.in.clear();
    n.agent.is_bridge = true;
    erase_id(waiting_, id);
    (n.agent.agent_type == AgentType::H ? waiting_h_ : waiting_e_) -= 1;
    bridges_.insert(std::lower_bound(bridges_.begin(), bridges_.end(), id), id);
}

bool CompatibilityGraph::has_waiting_two_cycle() const {
    for (int i : waiting_)
        for (int j : node(i).out)
            if (j > i && is_waiting(j) && has_edge(j, i)) return true;
    return false;
}

bool CompatibilityGraph::bridge_points_to_waiting() const {
    for (int b : bridges_)
        for (int j : node(b).out)
            if (is_waiting(j)) return true;
    return false;
}

std::optional<int> match_bilateral(CompatibilityGraph& g, int new_agent, BilateralPriority prio, Rng& rng) {
    std::vector<int> by_type[2];
    for (int j : g.out_edges(new_agent)) {
        if (!g.is_waiting(j) || !g.has_edge(j, new_agent)) continue;
        by_type[g.agent(j).agent_type == AgentType::H ? 0 : 1].push_back(j);
    }
    const int first = prio == BilateralPriority::H_FIRST ? 0 : 1;
    const auto& pool = !by_type[first].empty() ? by_type[first] : by_type[1 - first];
    if (pool.empty()) return std::nullopt;
    const int partner = pool[rng.index(pool.size())];
    g.remove(new_agent);
    g.remove(partner);
    return partner;
}

namespace {

bool on_path(const std::vector<int>& path, int id) {
    return std::find(path.begin(), path.end(), id) != path.end();
}

std::vector<int> bridges_into(const CompatibilityGraph& g, int new_agent) {
    std::vector<int> out;
    for (int b : g.bridges())
        if (g.has_edge(b, new_agent)) out.push_back(b);
    return out;
}

void count_types(const CompatibilityGraph& g, ChainPath& path) {
    path.h_count = path.e_count = 0;
    for (std::size_t i = 1; i < path.ids.size(); ++i)
        (g.agent(path.ids[i]).agent_type == AgentType::H ? path.h_count : path.e_count) += 1;
}

// Min-cost flow by successive unit shortest paths (Bellman-Ford), stopping
// once no path has negative cost.
class UnitFlow {
public:
    void reset(int nodes) {
        head_.assign(static_cast<std::size_t>(nodes), -1);
        arcs_.clear();
    }

    void add(int from, int to, int cost, int cap = 1) {
        arcs_.push_back({to, head_[static_cast<std::size_t>(from)], cap, cost});
        head_[static_cast<std::size_t>(from)] = static_cast<int>(arcs_.size()) - 1;
        arcs_.push_back({from, head_[static_cast<std::size_t>(to)], 0, -cost});
        head_[static_cast<std::size_t>(to)] = static_cast<int>(arcs_.size()) - 1;
    }

    int min_cost(int source, int sink) {
        const std::size_t n = head_.size();
        int total = 0;
        std::vector<int> dist(n), via(n);
        std::vector<char> queued(n);
        for (;;) {
            std::fill(dist.begin(), dist.end(), std::numeric_limits<int>::max());
            std::fill(via.begin(), via.end(), -1);
            std::deque<int> queue{source};
            dist[static_cast<std::size_t>(source)] = 0;
            std::fill(queued.begin(), queued.end(), 0);
            queued[static_cast<std::size_t>(source)] = 1;
            while (!queue.empty()) {
                const int x = queue.front();
                queue.pop_front();
                queued[static_cast<std::size_t>(x)] = 0;
                for (int a = head_[static_cast<std::size_t>(x)]; a >= 0; a = arcs_[static_cast<std::size_t>(a)].next) {
                    const Arc& arc = arcs_[static_cast<std::size_t>(a)];
                    if (arc.cap == 0) continue;
                    const int nd = dist[static_cast<std::size_t>(x)] + arc.cost;
                    if (nd < dist[static_cast<std::size_t>(arc.to)]) {
                        dist[static_cast<std::size_t>(arc.to)] = nd;
                        via[static_cast<std::size_t>(arc.to)] = a;
                        if (!queued[static_cast<std::size_t>(arc.to)]) {
                            queued[static_cast<std::size_t>(arc.to)] = 1;
                            queue.push_back(arc.to);
                        }
                    }
                }
            }
            if (via[static_cast<std::size_t>(sink)] < 0 || dist[static_cast<std::size_t>(sink)] >= 0) return total;
            total += dist[static_cast<std::size_t>(sink)];
            for (int x = sink; x != source;) {
                const int a = via[static_cast<std::size_t>(x)];
                arcs_[static_cast<std::size_t>(a)].cap -= 1;
                arcs_[static_cast<std::size_t>(a ^ 1)].cap += 1;
                x = arcs_[static_cast<std::size_t>(a ^ 1)].to;
            }
        }
    }

private:
    struct Arc {
        int to;
        int next;
        int cap;
        int cost;
    };
    std::vector<int> head_;
    std::vector<Arc> arcs_;
};

// Exact search for the segment maximising (H count, length), smallest id
// sequence among ties. A path that leaves a strongly connected component
// never re-enters it, so the best continuation from each vertex is memoised
// over the condensation, sinks first. Inside a component the best
// continuation from v depends only on v and the unvisited members still
// reachable from v, so it is memoised on that pair; different orders of
// visiting the same agents collapse into one state.
class MaxSearch {
public:
    MaxSearch(const CompatibilityGraph& g, std::int64_t budget) : g_(g), budget_(budget) {}

    ChainPath run(int bridge, int new_agent) {
        components(new_agent);
        // Only the root and agents entered from another component are ever
        // looked up.
        needed_.insert(new_agent);
        for (const auto& comp : comps_)
            for (int x : comp)
                for (int w : succ(x))
                    if (comp_of_.at(w) != comp_of_.at(x)) needed_.insert(w);
        for (const auto& comp : comps_) solve_component(comp);
        ChainPath out;
        out.ids = {bridge};
        const auto& tail = best_.at(new_agent).ids;
        out.ids.insert(out.ids.end(), tail.begin(), tail.end());
        count_types(g_, out);
        return out;
    }

private:
    struct Best {
        int h = 0;
        int len = 0;
        std::vector<int> ids;
    };

    static bool better(const Best& a, const Best& b) {
        if (a.h != b.h) return a.h > b.h;
        if (a.len != b.len) return a.len > b.len;
        return a.ids < b.ids;
    }

    using Bits = std::vector<std::uint64_t>;

    struct Key {
        int v;
        Bits unvisited;
        bool operator==(const Key&) const = default;
    };

    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.v));
            for (auto w : k.unvisited) h = splitmix64(h ^ w);
            return static_cast<std::size_t>(h);
        }
    };

    bool is_h(int id) const { return g_.agent(id).agent_type == AgentType::H; }

    std::vector<int> succ(int v) const {
        std::vector<int> out;
        for (int j : g_.out_edges(v))
            if (g_.is_waiting(j)) out.push_back(j);
        return out;
    }

    // Iterative Tarjan over waiting agents reachable from root; components
    // come out sinks first.
    void components(int root) {
        std::unordered_map<int, int> index, low;
        std::vector<int> stack;
        std::unordered_set<int> on_stack;
        struct Frame {
            int v;
            std::vector<int> next;
            std::size_t pos;
        };
        std::vector<Frame> call;
        int counter = 0;
        auto open = [&](int v) {
            index[v] = low[v] = counter++;
            stack.push_back(v);
            on_stack.insert(v);
            call.push_back({v, succ(v), 0});
        };
        open(root);
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.pos < f.next.size()) {
                const int w = f.next[f.pos++];
                if (!index.count(w)) {
                    open(w);
                } else if (on_stack.count(w)) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const int v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::vector<int> comp;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack.erase(w);
                    comp_of_[w] = static_cast<int>(comps_.size());
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                comps_.push_back(std::move(comp));
            }
        }
    }

    struct Score {
        int h = 0;
        int len = 0;
        friend auto operator<=>(const Score&, const Score&) = default;
        Score operator+(const Score& o) const { return {h + o.h, len + o.len}; }
    };
    static Score score(const Best& b) { return {b.h, b.len}; }

    void solve_component(const std::vector<int>& comp) {
        const int cid = comp_of_.at(comp.front());
        members_ = comp;
        local_.clear();
        local_succ_.assign(comp.size(), {});
        local_h_.assign(comp.size(), 0);
        exit_.assign(comp.size(), Best{});
        for (std::size_t i = 0; i < comp.size(); ++i) {
            local_[comp[i]] = static_cast<int>(i);
            local_h_[i] = is_h(comp[i]) ? 1 : 0;
        }
        for (std::size_t i = 0; i < comp.size(); ++i) {
            for (int w : succ(comp[i])) {
                if (comp_of_.at(w) == cid) {
                    local_succ_[i].push_back(local_.at(w));
                } else {
                    const Best& b = best_.at(w);
                    if (better(b, exit_[i])) exit_[i] = b;
                }
            }
        }
        const std::size_t words = (comp.size() + 63) / 64;
        Bits all(words, 0);
        for (std::size_t j = 0; j < comp.size(); ++j) set_bit(all, static_cast<int>(j));
        for (std::size_t i = 0; i < comp.size(); ++i) {
            if (!needed_.count(comp[i])) continue;
            const int u = static_cast<int>(i);
            Bits rest = all;
            clear_bit(rest, u);
            const Bits open = reach(u, rest);
            const Score start{local_h_[i], 1};

            // Phase 1: the optimal score.
            dominance_.clear();
            incumbent_ = start + score(exit_[i]);
            root_bound_ = start + bound(u, open);
            stop_ = false;
            optimise(u, open, start);

            // Phase 2: the smallest id sequence with that score.
            failed_.clear();
            target_ = incumbent_;
            path_ = {comp[i]};
            found_.clear();
            if (!first_in_order(u, open, start)) throw NumericError("Max-Chains: optimum not re-found");
            best_[comp[i]] = Best{target_.h, target_.len, found_};
        }
    }

    void charge() {
        if (++expansions_ > budget_)
            throw SearchBudgetExceeded("Max-Chains search exceeded " + std::to_string(budget_) + " expansions");
    }

    void optimise(int v, const Bits& open, Score prefix) {
        charge();
        incumbent_ = std::max(incumbent_, prefix + score(exit_[static_cast<std::size_t>(v)]));
        if (incumbent_ >= root_bound_) {
            stop_ = true;
            return;
        }
        // A state already entered with at least this prefix cannot improve.
        auto [it, fresh] = dominance_.try_emplace(Key{v, open}, prefix);
        if (!fresh) {
            if (it->second >= prefix) return;
            it->second = prefix;
        }
        if (prefix + bound(v, open) <= incumbent_) return;
        std::vector<int> next;
        for (int w : local_succ_[static_cast<std::size_t>(v)])
            if (test_bit(open, w)) next.push_back(w);
        std::stable_partition(next.begin(), next.end(), [&](int w) { return local_h_[static_cast<std::size_t>(w)] != 0; });
        for (int w : next) {
            Bits rest = open;
            clear_bit(rest, w);
            optimise(w, reach(w, rest), prefix + Score{local_h_[static_cast<std::size_t>(w)], 1});
            if (stop_) return;
        }
    }

    // Depth-first in id order, so the first path reaching target_ is the
    // smallest. Ending here (with the best exit) competes by its first id.
    bool first_in_order(int v, const Bits& open, Score prefix) {
        charge();
        const Best& ex = exit_[static_cast<std::size_t>(v)];
        const bool exit_hits = prefix + score(ex) == target_;
        const int exit_first = ex.ids.empty() ? -1 : ex.ids.front();
        auto take_exit = [&] {
            found_ = path_;
            found_.insert(found_.end(), ex.ids.begin(), ex.ids.end());
            return true;
        };
        bool exit_pending = exit_hits;
        for (int w : local_succ_[static_cast<std::size_t>(v)]) {
            if (!test_bit(open, w)) continue;
            const int id = members_[static_cast<std::size_t>(w)];
            if (exit_pending && exit_first < id) return take_exit();
            const Score next = prefix + Score{local_h_[static_cast<std::size_t>(w)], 1};
            Bits rest = open;
            clear_bit(rest, w);
            Bits sub = reach(w, rest);
            Key key{w, sub};
            if (auto it = failed_.find(key); it != failed_.end() && it->second >= next) continue;
            if (next + bound(w, sub) < target_) continue;
            path_.push_back(id);
            if (first_in_order(w, sub, next)) return true;
            path_.pop_back();
            auto [it, fresh] = failed_.try_emplace(std::move(key), next);
            if (!fresh) it->second = std::max(it->second, next);
        }
        return exit_pending ? take_exit() : false;
    }

    // Optimistic score of any continuation after v through `open`.
    Score bound(int v, const Bits& open) {
        int n = 0, hs = 0, exit_h = exit_[static_cast<std::size_t>(v)].h, exit_len = exit_[static_cast<std::size_t>(v)].len;
        for (std::size_t i = 0; i < members_.size(); ++i) {
            if (!test_bit(open, static_cast<int>(i))) continue;
            ++n;
            hs += local_h_[i];
            exit_h = std::max(exit_h, exit_[i].h);
            exit_len = std::max(exit_len, exit_[i].len);
        }
        int hb = 0;
        if (hs > 0) {
            const int runs = run_bound(v, open);
            hb = std::min({hs, runs, flow_bound(v, open)});
        }
        return {hb + exit_h, (n - hs) + hb + exit_len};
    }

    // Vertex-disjoint H runs, each entered from its own non-H predecessor
    // (v or an E in `open`) and continued along H-H edges, packed by
    // min-cost flow with profit per H agent. The rest of the path is one
    // such packing, so the profit bounds its H count. Components of the
    // H-only subgraph (labelled by run_bound) are contracted and credited
    // in full on first use, which keeps the network acyclic.
    int flow_bound(int v, const Bits& open) {
        const int m = static_cast<int>(members_.size());
        // Nodes: 0 source, 1 sink, 2+i entry copy of member i, then
        // in/out per H component.
        const int source = 0, sink = 1;
        auto entry = [&](int i) { return 2 + i; };
        auto g_in = [&](int g) { return 2 + m + 2 * g; };
        auto g_out = [&](int g) { return 3 + m + 2 * g; };
        flow_.reset(2 + m + 2 * static_cast<int>(group_size_.size()));
        auto labelled = [&](int c) { return run_member(c) && h_group_[static_cast<std::size_t>(c)] >= 0; };
        for (std::size_t g = 0; g < group_size_.size(); ++g) {
            const int size = group_size_[g];
            flow_.add(g_in(static_cast<int>(g)), g_out(static_cast<int>(g)), -size);
            if (size > 1) flow_.add(g_in(static_cast<int>(g)), g_out(static_cast<int>(g)), 0, size - 1);
            flow_.add(g_out(static_cast<int>(g)), sink, 0, size);
        }
        for (int i = 0; i < m; ++i) {
            const auto ii = static_cast<std::size_t>(i);
            const bool is_entry = i == v || (test_bit(open, i) && !local_h_[ii]);
            if (is_entry) {
                bool any = false;
                for (int c : local_succ_[ii])
                    if (labelled(c)) {
                        flow_.add(entry(i), g_in(h_group_[static_cast<std::size_t>(c)]), 0);
                        any = true;
                    }
                if (any) flow_.add(source, entry(i), 0);
            }
            if (i != v && labelled(i))
                for (int w : local_succ_[ii])
                    if (labelled(w) && h_group_[static_cast<std::size_t>(w)] != h_group_[ii])
                        flow_.add(g_out(h_group_[ii]), g_in(h_group_[static_cast<std::size_t>(w)]), 0, m);
        }
        return -flow_.min_cost(source, sink);
    }

    // Maximal runs of H agents are entered from distinct non-H predecessors
    // (v or an E in `open`). A run is bounded by the heaviest chain of
    // components of the H-only subgraph, each at full size. H in-degrees are
    // tiny, so this sees that a tree of H agents yields one branch.
    int run_bound(int v, const Bits& open) {
        run_.assign(members_.size(), -1);
        h_group_.assign(members_.size(), -1);
        group_size_.clear();
        open_ = &open;
        int total = best_run_from(v);
        for (std::size_t i = 0; i < members_.size(); ++i)
            if (test_bit(open, static_cast<int>(i)) && !local_h_[i]) total += best_run_from(static_cast<int>(i));
        return total;
    }

    bool run_member(int c) const { return local_h_[static_cast<std::size_t>(c)] && test_bit(*open_, c); }

    int best_run_from(int x) {
        int best = 0;
        for (int c : local_succ_[static_cast<std::size_t>(x)])
            if (run_member(c)) best = std::max(best, run_value(c));
        return best;
    }

    int run_value(int c) {
        if (run_[static_cast<std::size_t>(c)] >= 0) return run_[static_cast<std::size_t>(c)];
        h_index_.assign(members_.size(), -1);
        h_low_.assign(members_.size(), 0);
        h_on_stack_.assign(members_.size(), 0);
        h_stack_.clear();
        h_counter_ = 0;
        h_tarjan(c);
        return run_[static_cast<std::size_t>(c)];
    }

    void h_tarjan(int v) {
        const auto vi = static_cast<std::size_t>(v);
        h_index_[vi] = h_low_[vi] = h_counter_++;
        h_stack_.push_back(v);
        h_on_stack_[vi] = 1;
        for (int w : local_succ_[vi]) {
            const auto wi = static_cast<std::size_t>(w);
            if (!run_member(w) || run_[wi] >= 0) continue;
            if (h_index_[wi] < 0) {
                h_tarjan(w);
                h_low_[vi] = std::min(h_low_[vi], h_low_[wi]);
            } else if (h_on_stack_[wi]) {
                h_low_[vi] = std::min(h_low_[vi], h_index_[wi]);
            }
        }
        if (h_low_[vi] != h_index_[vi]) return;
        std::vector<int> group;
        int w;
        do {
            w = h_stack_.back();
            h_stack_.pop_back();
            h_on_stack_[static_cast<std::size_t>(w)] = 0;
            group.push_back(w);
        } while (w != v);
        // Later components in the H-only subgraph are already valued.
        int next = 0;
        for (int m : group)
            for (int x : local_succ_[static_cast<std::size_t>(m)])
                if (run_member(x) && !h_on_stack_[static_cast<std::size_t>(x)] &&
                    std::find(group.begin(), group.end(), x) == group.end())
                    next = std::max(next, run_[static_cast<std::size_t>(x)]);
        const int value = static_cast<int>(group.size()) + next;
        for (int m : group) {
            run_[static_cast<std::size_t>(m)] = value;
            h_group_[static_cast<std::size_t>(m)] = static_cast<int>(group_size_.size());
        }
        group_size_.push_back(static_cast<int>(group.size()));
    }

    static bool test_bit(const Bits& b, int i) { return (b[static_cast<std::size_t>(i) / 64] >> (i % 64)) & 1U; }
    static void set_bit(Bits& b, int i) { b[static_cast<std::size_t>(i) / 64] |= std::uint64_t{1} << (i % 64); }
    static void clear_bit(Bits& b, int i) { b[static_cast<std::size_t>(i) / 64] &= ~(std::uint64_t{1} << (i % 64)); }

    // Members of `open` reachable from v through members of `open`.
    Bits reach(int v, const Bits& open) const {
        Bits seen(open.size(), 0);
        std::vector<int> queue{v};
        for (std::size_t q = 0; q < queue.size(); ++q)
            for (int w : local_succ_[static_cast<std::size_t>(queue[q])]) {
                if (!test_bit(open, w) || test_bit(seen, w)) continue;
                set_bit(seen, w);
                queue.push_back(w);
            }
        return seen;
    }

    const CompatibilityGraph& g_;
    std::int64_t budget_;
    std::int64_t expansions_ = 0;
    std::vector<std::vector<int>> comps_;
    std::unordered_map<int, int> comp_of_;
    std::unordered_map<int, Best> best_;
    std::unordered_set<int> needed_;
    // Current component, in local indices (ascending ids).
    std::vector<int> members_;
    std::unordered_map<int, int> local_;
    std::vector<std::vector<int>> local_succ_;
    std::vector<int> local_h_;
    std::vector<Best> exit_;
    // Search state for one start vertex.
    std::unordered_map<Key, Score, KeyHash> dominance_;
    std::unordered_map<Key, Score, KeyHash> failed_;
    Score incumbent_, root_bound_, target_;
    bool stop_ = false;
    std::vector<int> path_;
    std::vector<int> found_;
    UnitFlow flow_;
    std::vector<int> h_group_;
    std::vector<int> group_size_;
    // Run-bound scratch.
    const Bits* open_ = nullptr;
    std::vector<int> run_;
    std::vector<int> h_index_, h_low_;
    std::vector<char> h_on_stack_;
    std::vector<int> h_stack_;
    int h_counter_ = 0;
};

}  // namespace

std::optional<ChainPath> find_chain_local(const CompatibilityGraph& g, int new_agent, Rng& rng) {
    const auto starts = bridges_into(g, new_agent);
    if (starts.empty()) return std::nullopt;
    ChainPath path;
    path.ids = {starts[rng.index(starts.size())], new_agent};
    int cur = new_agent;
    for (;;) {
        std::vector<int> by_type[2];
        for (int j : g.out_edges(cur)) {
            if (!g.is_waiting(j) || on_path(path.ids, j)) continue;
            by_type[g.agent(j).agent_type == AgentType::H ? 0 : 1].push_back(j);
        }
        const auto& pool = !by_type[0].empty() ? by_type[0] : by_type[1];
        if (pool.empty()) break;
        cur = pool[rng.index(pool.size())];
        path.ids.push_back(cur);
    }
    count_types(g, path);
    return path;
}

std::optional<ChainPath> find_chain_max(const CompatibilityGraph& g, int new_agent, std::int64_t budget) {
    const auto starts = bridges_into(g, new_agent);
    if (starts.empty()) return std::nullopt;
    // Every bridge can only enter through new_agent, so the lowest id wins ties.
    MaxSearch search(g, budget);
    return search.run(starts.front(), new_agent);
}

void apply_chain(CompatibilityGraph& g, const ChainPath& path) {
    if (path.ids.size() < 2) throw ParamError("apply_chain: path needs a bridge and one agent");
    g.remove(path.ids.front());
    for (std::size_t i = 1; i + 1 < path.ids.size(); ++i) g.remove(path.ids[i]);
    g.make_bridge(path.ids.back());
}

std::optional<ChainPath> match_chain_local(CompatibilityGraph& g, int new_agent, Rng& rng) {
    auto path = find_chain_local(g, new_agent, rng);
    if (path) apply_chain(g, *path);
    return path;
}

std::optional<ChainPath> match_chain_max(CompatibilityGraph& g, int new_agent, std::int64_t budget) {
    auto path = find_chain_max(g, new_agent, budget);
    if (path) apply_chain(g, *path);
    return path;
}

GraphSummary run_graph_replica(Policy policy, const MarketParams& p, const RunControls& rc, Rng& rng,
                               const GraphRunOptions& opts) {
    validate_params(p);
    validate_controls(rc);
    if (policy == Policy::CHAIN_HAT || policy == Policy::BILATERAL_E_TILDE)
        throw ParamError(to_string(policy) + " is a counts-only auxiliary process");
    const bool chains = is_chain(policy);
    CompatibilityGraph g(chains ? p.d : 0, opts.track_coins);
    Rng compare_rng(splitmix64(rc.seed ^ 0xC0FFEEULL));

    const auto warm = static_cast<std::int64_t>(std::floor(rc.warmup_fraction * static_cast<double>(rc.arrivals)));
    const std::int64_t post = rc.arrivals - warm;
    BatchMeans bh(post), be(post);

    // Sojourns are measured for agents arriving in the first half of the
    // post-warm-up window, so nearly all of them leave before the horizon.
    const std::int64_t direct_end = warm + post / 2;
    std::unordered_map<int, std::size_t> slot;
    std::vector<std::int64_t> arrived;
    std::vector<std::int64_t> left;
    std::vector<AgentType> kind;
    auto depart = [&](int id, std::int64_t k) {
        auto it = slot.find(id);
        if (it != slot.end()) left[it->second] = k;
    };

    GraphSummary out;
    long double len_sum = 0.0L;
    std::int64_t segments = 0;
    for (std::int64_t k = 0; k < rc.arrivals; ++k) {
        const AgentType t = rng.uniform() < p.prob_h_arrival() ? AgentType::H : AgentType::E;
        const int id = g.arrive(t, p, rng, k).id;
        if (k >= warm && k < direct_end) {
            slot.emplace(id, arrived.size());
            arrived.push_back(k);
            left.push_back(-1);
            kind.push_back(t);
        }
        std::optional<ChainPath> path;
        switch (policy) {
            case Policy::BILATERAL_H:
            case Policy::BILATERAL_E: {
                const auto prio = policy == Policy::BILATERAL_H ? BilateralPriority::H_FIRST : BilateralPriority::E_FIRST;
                if (auto partner = match_bilateral(g, id, prio, rng)) {
                    depart(id, k);
                    depart(*partner, k);
                }
                break;
            }
            case Policy::CHAIN:
                path = match_chain_local(g, id, rng);
                break;
            case Policy::MAX_CHAIN: {
                std::optional<ChainPath> local;
                if (opts.compare_with_local) local = find_chain_local(g, id, compare_rng);
                path = find_chain_max(g, id, opts.search_budget);
                if (local && (!path || path->h_count < local->h_count)) ++out.compare_violations;
                if (path) apply_chain(g, *path);
                break;
            }
            default: break;
        }
        if (path) {
            for (std::size_t i = 1; i < path->ids.size(); ++i) depart(path->ids[i], k);
            if (k >= warm) {
                len_sum += path->length();
                ++segments;
            }
        }
        if (opts.check_invariants) {
            if (!chains && g.has_waiting_two_cycle()) ++out.invariant_violations;
            if (chains && g.bridge_points_to_waiting()) ++out.invariant_violations;
            if (chains && static_cast<int>(g.bridges().size()) != p.d) ++out.invariant_violations;
        }
        if (k >= warm) {
            bh.add(g.waiting_of(AgentType::H));
            be.add(g.waiting_of(AgentType::E));
        }
    }

    SimSummary& s = out.little;
    s.mean_h = bh.mean();
    s.mean_e = be.mean();
    s.w_h = little_law(s.mean_h, p.lambda_h);
    s.w_e = p.lambda_e > 0.0 ? little_law(s.mean_e, p.lambda_e) : 0.0;
    s.stderr_h = bh.std_error();
    s.stderr_e = be.std_error();
    s.ci_half_width_h = bh.half_width();
    s.samples = bh.count();
    s.segments = segments;
    if (chains && segments > 0) s.chain_len_mean_given_positive = static_cast<double>(len_sum / segments);

    // Epoch gaps to time units: one arrival per 1/(lambda_h + lambda_e).
    const double per_epoch = 1.0 / p.total_rate();
    std::vector<double> waits_h;
    long double sum_e = 0.0L;
    std::int64_t n_e = 0;
    for (std::size_t i = 0; i < arrived.size(); ++i) {
        std::int64_t end = left[i];
        if (end < 0) {
            end = rc.arrivals - 1;
            if (kind[i] == AgentType::H) ++out.censored_h;
        }
        const double w = static_cast<double>(end - arrived[i]) * per_epoch;
        if (kind[i] == AgentType::H) {
            waits_h.push_back(w);
        } else {
            sum_e += w;
            ++n_e;
        }
    }
    out.direct_samples_h = static_cast<std::int64_t>(waits_h.size());
    if (waits_h.size() >= 2) {
        BatchMeans bw(static_cast<std::int64_t>(waits_h.size()));
        for (double w : waits_h) bw.add(w);
        out.w_h_direct = bw.mean();
        out.stderr_w_h_direct = bw.std_error();
    }
    out.w_e_direct = n_e ? static_cast<double>(sum_e / n_e) : 0.0;
    out.duplicate_coin_pairs = g.duplicate_coin_pairs();
    return out;
}

}  // namespace hem
