#include "hem/sim_counts.hpp"
#include "hem/sim_graph.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>

using namespace hem;

namespace {

// Exhaustive oracle: every simple path new_agent -> ... through waiting agents,
// ranked by (H count, length), ties to the smallest id sequence.
std::optional<ChainPath> brute_force_max(const CompatibilityGraph& g, int new_agent) {
    int bridge = -1;
    for (int b : g.bridges())
        if (g.has_edge(b, new_agent)) {
            bridge = b;
            break;
        }
    if (bridge < 0) return std::nullopt;

    ChainPath best;
    std::vector<int> cur{bridge, new_agent};
    std::function<void(int)> dfs = [&](int h) {
        const int len = static_cast<int>(cur.size()) - 1;
        const bool better = h > best.h_count || (h == best.h_count && len > best.length()) ||
                            (h == best.h_count && len == best.length() && cur < best.ids);
        if (best.ids.empty() || better) {
            best.ids = cur;
            best.h_count = h;
            best.e_count = len - h;
        }
        for (int nxt : g.out_edges(cur.back())) {
            if (!g.is_waiting(nxt) || std::find(cur.begin(), cur.end(), nxt) != cur.end()) continue;
            cur.push_back(nxt);
            dfs(h + (g.agent(nxt).agent_type == AgentType::H ? 1 : 0));
            cur.pop_back();
        }
    };
    dfs(g.agent(new_agent).agent_type == AgentType::H ? 1 : 0);
    return best;
}

CompatibilityGraph random_instance(Rng& rng, int bridges, int waiting, double density, double h_share) {
    CompatibilityGraph g(bridges);
    std::vector<int> ids;
    for (int i = 0; i <= waiting; ++i)
        ids.push_back(g.add_agent(rng.uniform() < h_share ? AgentType::H : AgentType::E).id);
    for (int a : ids)
        for (int b : ids)
            if (a != b && rng.uniform() < density) g.add_edge(a, b);
    const int new_agent = ids.back();
    for (int b : g.bridges())
        if (rng.uniform() < 0.7) g.add_edge(b, new_agent);
    return g;
}

}  // namespace

TEST_CASE("arrive on an empty market adds one isolated agent") {
    CompatibilityGraph g;
    Rng rng(1);
    const MarketParams p{1, 2, 0.3, 0.5, 1};
    const int id = g.arrive(AgentType::H, p, rng, 0).id;
    CHECK(g.waiting().size() == 1);
    CHECK(g.edge_count() == 0);
    CHECK(g.waiting_of(AgentType::H) == 1);
    CHECK(g.out_edges(id).empty());
}

TEST_CASE("with p_e = 1 every live agent can give to an E arrival") {
    CompatibilityGraph g(2);
    Rng rng(3);
    const MarketParams p{1, 2, 0.1, 1.0, 2};
    for (int i = 0; i < 20; ++i) g.arrive(i % 3 ? AgentType::E : AgentType::H, p, rng, i);
    const int id = g.arrive(AgentType::E, p, rng, 20).id;
    for (int b : g.bridges()) CHECK(g.has_edge(b, id));
    for (int w : g.waiting())
        if (w != id) CHECK(g.has_edge(w, id));
}

TEST_CASE("in-degree of an H arrival is Binomial(n, p_h)") {
    const int n = 50;
    const MarketParams p{1, 2, 0.08, 0.5, 1};
    Rng rng(5);
    CompatibilityGraph g;
    for (int i = 0; i < n; ++i) g.add_agent(AgentType::E);
    const int trials = 100000;
    double total = 0;
    for (int t = 0; t < trials; ++t) {
        const int id = g.arrive(AgentType::H, p, rng, t).id;
        int deg = 0;
        for (int w : g.waiting())
            if (w != id && g.has_edge(w, id)) ++deg;
        total += deg;
        g.remove(id);
    }
    const double mean = total / trials;
    const double sd = std::sqrt(n * p.p_h * (1 - p.p_h) / trials);
    CHECK(std::abs(mean - n * p.p_h) < 3 * sd);
}

TEST_CASE("match_bilateral") {
    Rng rng(7);
    SUBCASE("no 2-cycle means no match") {
        CompatibilityGraph g;
        const int a = g.add_agent(AgentType::H).id;
        const int b = g.add_agent(AgentType::E).id;
        g.add_edge(a, b);
        CHECK_FALSE(match_bilateral(g, b, BilateralPriority::H_FIRST, rng).has_value());
        CHECK(g.waiting().size() == 2);
    }
    SUBCASE("a single partner is taken and both leave") {
        CompatibilityGraph g;
        const int a = g.add_agent(AgentType::E).id;
        const int b = g.add_agent(AgentType::E).id;
        g.add_edge(a, b);
        g.add_edge(b, a);
        auto m = match_bilateral(g, b, BilateralPriority::H_FIRST, rng);
        REQUIRE(m.has_value());
        CHECK(*m == a);
        CHECK(g.waiting().empty());
    }
    SUBCASE("priority chooses the type") {
        for (auto prio : {BilateralPriority::H_FIRST, BilateralPriority::E_FIRST}) {
            CompatibilityGraph g;
            const int e = g.add_agent(AgentType::E).id;
            const int h = g.add_agent(AgentType::H).id;
            const int x = g.add_agent(AgentType::E).id;
            for (int o : {e, h}) {
                g.add_edge(o, x);
                g.add_edge(x, o);
            }
            auto m = match_bilateral(g, x, prio, rng);
            REQUIRE(m.has_value());
            CHECK(*m == (prio == BilateralPriority::H_FIRST ? h : e));
        }
    }
}

TEST_CASE("local chain needs a bridge edge") {
    CompatibilityGraph g(1);
    const int a = g.add_agent(AgentType::H).id;
    const int b = g.add_agent(AgentType::H).id;
    g.add_edge(b, a);
    Rng rng(9);
    CHECK_FALSE(find_chain_local(g, b, rng).has_value());
    g.add_edge(g.bridges().front(), b);
    auto path = find_chain_local(g, b, rng);
    REQUIRE(path.has_value());
    CHECK(path->ids == std::vector<int>{0, b, a});
    CHECK(path->h_count == 2);
}

TEST_CASE("local chain from two waiting H agents removes 0, 1 or 2 of them") {
    // first hop reaches some waiting H w.p. 1-(1-p)^2, then the other w.p. p
    const MarketParams p{1, 0.0001, 0.1, 0.1, 1};
    const double first = 1 - std::pow(1 - p.p_h, 2);
    const std::array<double, 3> expect{1 - first, first * (1 - p.p_h), first * p.p_h};
    CHECK(expect[0] == doctest::Approx(0.81));
    CHECK(expect[1] == doctest::Approx(0.171));
    CHECK(expect[2] == doctest::Approx(0.019));

    Rng rng(11);
    std::array<std::int64_t, 3> seen{};
    std::int64_t started = 0;
    while (started < 300000) {
        // a between-arrival market: no bridge edges into the waiting pair
        CompatibilityGraph g(1);
        const int a = g.add_agent(AgentType::H).id;
        const int b = g.add_agent(AgentType::H).id;
        if (rng.uniform() < p.p_h) g.add_edge(a, b);
        if (rng.uniform() < p.p_h) g.add_edge(b, a);
        const int id = g.arrive(AgentType::H, p, rng, 2).id;
        if (auto path = find_chain_local(g, id, rng)) {
            ++started;
            ++seen[static_cast<std::size_t>(path->h_count - 1)];
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const double sd = std::sqrt(expect[k] * (1 - expect[k]) / static_cast<double>(started));
        CHECK(std::abs(static_cast<double>(seen[k]) / static_cast<double>(started) - expect[k]) < 3 * sd);
    }
}

TEST_CASE("max chain beats local search on the adversarial instance") {
    // bridge -> new(H); new -> H1 (dead end); new -> E1 -> H2 -> H3.
    CompatibilityGraph g(1);
    const int h1 = g.add_agent(AgentType::H).id;
    const int e1 = g.add_agent(AgentType::E).id;
    const int h2 = g.add_agent(AgentType::H).id;
    const int h3 = g.add_agent(AgentType::H).id;
    const int nw = g.add_agent(AgentType::H).id;
    g.add_edge(0, nw);
    g.add_edge(nw, h1);
    g.add_edge(nw, e1);
    g.add_edge(e1, h2);
    g.add_edge(h2, h3);
    Rng rng(13);
    auto local = find_chain_local(g, nw, rng);
    REQUIRE(local.has_value());
    CHECK(local->h_count == 2);
    auto best = find_chain_max(g, nw);
    REQUIRE(best.has_value());
    CHECK(best->h_count == 3);
    CHECK(best->ids == std::vector<int>{0, nw, e1, h2, h3});
}

TEST_CASE("max chain agrees with exhaustive search on small random graphs") {
    Rng rng(17);
    int compared = 0;
    for (int trial = 0; trial < 3000; ++trial) {
        const int bridges = 1 + trial % 3;
        const int waiting = 1 + static_cast<int>(rng.uniform() * 9);
        const double density = 0.15 + 0.5 * rng.uniform();
        auto g = random_instance(rng, bridges, waiting, density, 0.5);
        const int nw = g.waiting().back();
        auto oracle = brute_force_max(g, nw);
        auto got = find_chain_max(g, nw);
        REQUIRE(oracle.has_value() == got.has_value());
        if (!oracle) continue;
        ++compared;
        CHECK(got->h_count == oracle->h_count);
        CHECK(got->length() == oracle->length());
        CHECK(got->ids == oracle->ids);
        CHECK(got->e_count == oracle->e_count);
    }
    CHECK(compared > 1000);
}

TEST_CASE("max chain search budget") {
    Rng rng(19);
    auto g = random_instance(rng, 1, 30, 0.5, 0.5);
    g.add_edge(0, g.waiting().back());
    CHECK_THROWS_AS(find_chain_max(g, g.waiting().back(), 5), SearchBudgetExceeded);
}

TEST_CASE("apply_chain moves the bridge to the tail") {
    CompatibilityGraph g(1);
    const int a = g.add_agent(AgentType::E).id;
    const int b = g.add_agent(AgentType::H).id;
    g.add_edge(0, b);
    g.add_edge(b, a);
    g.add_edge(a, b);
    ChainPath path{{0, b, a}, 1, 1};
    apply_chain(g, path);
    CHECK(g.bridges() == std::vector<int>{a});
    CHECK(g.waiting().empty());
    CHECK_FALSE(g.bridge_points_to_waiting());
}

TEST_CASE("graph replica keeps its invariants") {
    const MarketParams p{1, 2, 0.05, 0.5, 2};
    RunControls rc;
    rc.arrivals = 20000;
    GraphRunOptions opts;
    opts.check_invariants = true;
    opts.track_coins = true;
    for (Policy pol : {Policy::BILATERAL_H, Policy::BILATERAL_E, Policy::CHAIN, Policy::MAX_CHAIN}) {
        Rng rng(23);
        auto s = run_graph_replica(pol, p, rc, rng, opts);
        CHECK(s.invariant_violations == 0);
        CHECK(s.duplicate_coin_pairs == 0);
    }
    Rng rng(1);
    CHECK_THROWS_AS(run_graph_replica(Policy::CHAIN_HAT, p, rc, rng), ParamError);
}

TEST_CASE("max chain never removes fewer H than local search") {
    const MarketParams p{1, 2, 0.05, 0.5, 1};
    RunControls rc;
    rc.arrivals = 20000;
    GraphRunOptions opts;
    opts.compare_with_local = true;
    Rng rng(29);
    auto s = run_graph_replica(Policy::MAX_CHAIN, p, rc, rng, opts);
    CHECK(s.compare_violations == 0);
}

TEST_CASE("direct sojourn matches Little's law") {
    const MarketParams p{1, 2, 0.05, 0.5, 1};
    RunControls rc;
    rc.arrivals = 200000;
    Rng rng(31);
    auto s = run_graph_replica(Policy::BILATERAL_H, p, rc, rng);
    const double little_se = s.little.stderr_h / p.lambda_h;
    const double se = std::hypot(little_se, s.stderr_w_h_direct);
    CHECK(std::abs(s.w_h_direct - s.little.w_h) < 3 * se);
}

TEST_CASE("graph and counts engines agree") {
    const MarketParams p{1, 2, 0.02, 0.5, 1};
    RunControls rc;
    rc.arrivals = 100000;
    for (Policy pol : {Policy::BILATERAL_H, Policy::CHAIN}) {
        Rng rg(37), rcnt(41);
        auto graph = run_graph_replica(pol, p, rc, rg).little;
        auto counts = run_replica(pol, p, rc, rcnt);
        const double se = std::hypot(graph.stderr_h, counts.stderr_h);
        INFO(to_string(pol), " graph ", graph.mean_h, " counts ", counts.mean_h, " se ", se);
        CHECK(std::abs(graph.mean_h - counts.mean_h) < 3 * se);
        CHECK(std::abs(graph.mean_e - counts.mean_e) < 3 * std::hypot(graph.stderr_e, counts.stderr_e) + 1e-9);
    }
}
