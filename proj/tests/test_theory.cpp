#include "constructions.hpp"
#include "hem/ctmc.hpp"
#include "hem/theory.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hem;

namespace {

struct RandomMinority {
    std::mt19937_64 gen{2024};
    std::uniform_real_distribution<double> u{0.0, 1.0};

    MarketParams next() {
        MarketParams p;
        p.lambda_e = 0.5 + 5.0 * u(gen);
        p.lambda_h = p.lambda_e * (0.02 + 0.96 * u(gen));
        p.p_e = 0.05 + 0.95 * u(gen);
        p.p_h = 0.001;
        p.d = 1 + static_cast<int>(u(gen) * 50);
        return p;
    }
};

}  // namespace

TEST_CASE("bilateral-H limit") {
    const auto a = limit_bilateral_h({1, 2, 0.02, 0.5, 1});
    CHECK(a.scaling == Scaling::INV_PH);
    CHECK(a.kind == LimitKind::EXACT);
    CHECK(a.constant == doctest::Approx(std::log(2.0) / 0.5).epsilon(1e-14));
    CHECK(a.constant == doctest::Approx(1.386294).epsilon(1e-6));

    const auto b = limit_bilateral_h({2, 1, 0.02, 0.5, 1});
    CHECK(b.scaling == Scaling::INV_PH_SQ);
    CHECK(b.constant == doctest::Approx(0.143841).epsilon(1e-5));
    CHECK(limit_bilateral_h({2, 1, 0.02, 0.9, 1}).constant == b.constant);
    CHECK(b.waiting_time(0.1) == doctest::Approx(b.constant * 100));

    CHECK_THROWS_AS(limit_bilateral_h({1, 1, 0.02, 0.5, 1}), ParamError);
}

TEST_CASE("bilateral-E bounds") {
    const auto b = bounds_bilateral_e({1, 2, 0.02, 0.5, 1});
    CHECK(b.lower.constant == doctest::Approx(1.386294).epsilon(1e-6));
    CHECK(b.heuristic.constant == doctest::Approx(2.197225).epsilon(1e-6));
    CHECK(b.upper.constant == doctest::Approx(2.772589).epsilon(1e-6));
    CHECK(b.lower.kind == LimitKind::LOWER_BOUND);
    CHECK(b.upper.kind == LimitKind::UPPER_BOUND);
    CHECK(b.heuristic.kind == LimitKind::HEURISTIC);

    const auto m = bounds_bilateral_e({2, 1, 0.02, 0.5, 1});
    for (const auto& r : {m.lower, m.upper, m.heuristic}) {
        CHECK(r.constant == doctest::Approx(0.143841).epsilon(1e-5));
        CHECK(r.kind == LimitKind::EXACT);
    }

    RandomMinority gen;
    for (int i = 0; i < 100; ++i) {
        const auto p = gen.next();
        const auto r = bounds_bilateral_e(p);
        CHECK(r.lower.constant <= r.heuristic.constant);
        CHECK(r.heuristic.constant <= r.upper.constant);
    }
    CHECK_THROWS_AS(bounds_bilateral_e({1, 1, 0.02, 0.5, 1}), ParamError);
}

TEST_CASE("chain bound") {
    const auto c = bound_chain({2, 2, 0.005, 0.5, 1});
    CHECK(c.constant == doctest::Approx(std::log(3.0) / 2).epsilon(1e-14));
    CHECK(c.constant == doctest::Approx(0.549306).epsilon(1e-6));
    CHECK(c.kind == LimitKind::UPPER_BOUND);

    const auto one = bound_chain({1, 2, 0.005, 1.0, 1});
    const auto fifty = bound_chain({1, 2, 0.005, 1.0, 50});
    CHECK(one.constant == fifty.constant);
    CHECK(one.constant == doctest::Approx(std::log(1.5)).epsilon(1e-14));
    CHECK(one.kind == LimitKind::EXACT);

    RandomMinority gen;
    for (int i = 0; i < 100; ++i) {
        const auto p = gen.next();
        CHECK(bound_chain(p).constant < limit_bilateral_h(p).constant);
    }
    CHECK_THROWS_AS(bound_chain({1, 0, 0.005, 0.5, 1}), ParamError);
}

TEST_CASE("chain heuristic") {
    const MarketParams p{3, 3, 0.002, 0.5, 1};
    CHECK(heuristic_chain_constant(p).constant == doctest::Approx(std::log(2.0) / 3).epsilon(0.01));
    CHECK(heuristic_chain_constant(p).kind == LimitKind::HEURISTIC);
    // as p_h -> 0 it reaches the p_e = 1 chain constant
    const MarketParams tiny{1, 2, 1e-9, 1.0, 1};
    CHECK(heuristic_chain_constant(tiny).constant == doctest::Approx(bound_chain(tiny).constant).epsilon(1e-7));
    MarketParams q{1, 2, 0.01, 0.5, 1};
    double last = heuristic_chain_constant(q).constant;
    for (q.d = 2; q.d <= 60; ++q.d) {
        const double now = heuristic_chain_constant(q).constant;
        CHECK(now <= last);
        last = now;
    }
}

TEST_CASE("chain length limit") {
    CHECK(chain_length_limit({1, 2, 0.01, 1.0, 1}) == doctest::Approx(1.5));
    CHECK(chain_length_limit({3, 2, 0.01, 1.0, 4}) == doctest::Approx(2.5));
    CHECK(chain_length_limit({2, 2, 0.01, 0.5, 1}) == doctest::Approx(4.0));
    for (int d = 1; d < 20; ++d)
        CHECK(chain_length_limit({2, 2, 0.01, 0.3, d + 1}) < chain_length_limit({2, 2, 0.01, 0.3, d}));
    for (double lh = 0.5; lh < 5; lh += 0.5)
        CHECK(chain_length_limit({lh + 0.5, 2, 0.01, 0.3, 2}) > chain_length_limit({lh, 2, 0.01, 0.3, 2}));
    CHECK_THROWS_AS(chain_length_limit({1, 0, 0.01, 0.5, 1}), ParamError);
}

TEST_CASE("critical ratio and the H-majority shape") {
    const double x = critical_ratio();
    CHECK(x >= 2.17);
    CHECK(x <= 2.19);
    CHECK(std::abs(critical_ratio_residual(x)) <= 1e-12);

    const double le = 1.0;
    auto constant = [&](double lh) { return limit_bilateral_h({lh, le, 0.01, 0.5, 1}).constant; };
    const double step = 1e-5;
    for (double lh = 1.05; lh < 6.0; lh += 0.05) {
        if (std::abs(lh - x * le) < 0.02) continue;
        const double slope = (constant(lh + step) - constant(lh - step)) / (2 * step);
        if (lh < x * le)
            CHECK(slope > 0);
        else
            CHECK(slope < 0);
    }
    // H minority: increasing in lambda_h
    for (double lh = 0.05; lh < 0.95; lh += 0.05)
        CHECK(limit_bilateral_h({lh + step, 1, 0.01, 0.5, 1}).constant > limit_bilateral_h({lh, 1, 0.01, 0.5, 1}).constant);
}

TEST_CASE("drift residuals at the plug-in points") {
    const MarketParams p{1, 2, 0.01, 0.5, 1};
    const DriftPoint x{std::log(2.0) / (0.5 * 0.01), -std::log(2.0) / std::log(1 - 0.25)};
    const auto r = drift_residual(Policy::BILATERAL_H, x, p);
    CHECK(std::abs(r.horizontal) <= 10 * p.p_h * p.total_rate());
    CHECK(std::abs(r.vertical) <= 10 * p.p_h * p.total_rate());
    const auto plug = drift_plugin_point(Policy::BILATERAL_H, p);
    CHECK(plug.h == doctest::Approx(x.h));
    CHECK(plug.e == doctest::Approx(x.e));

    const MarketParams q{2, 1, 0.01, 0.5, 1};
    const DriftPoint y{std::log(4.0 / 3.0) / (0.01 * 0.01), 0.0};
    const auto s = drift_residual(Policy::BILATERAL_H, y, q);
    CHECK(std::abs(s.horizontal) <= 10 * q.p_h * q.p_h * q.total_rate());

    const MarketParams bal{1, 1, 0.01, 0.5, 1};
    CHECK(drift_residual(Policy::BILATERAL_H, {0, 0}, bal).horizontal == 1.0);
    CHECK_THROWS_AS(drift_residual(Policy::CHAIN, {0, 0}, bal), ParamError);
}

TEST_CASE("drift solve") {
    // Roots from an independent scipy fsolve of the same point-collapsed system.
    const MarketParams p{1, 2, 0.01, 0.5, 1};
    const auto h = drift_solve(Policy::BILATERAL_H, p, drift_plugin_point(Policy::BILATERAL_H, p));
    CHECK(h.h == doctest::Approx(130.90542595).epsilon(1e-9));
    CHECK(h.e == doctest::Approx(2.3705835).epsilon(1e-7));
    const auto rh = drift_residual(Policy::BILATERAL_H, h, p);
    CHECK(std::max(std::abs(rh.horizontal), std::abs(rh.vertical)) <= 1e-10);

    const auto e = drift_solve(Policy::BILATERAL_E, p, drift_plugin_point(Policy::BILATERAL_E, p));
    CHECK(e.h == doctest::Approx(206.5003538).epsilon(1e-9));
    CHECK(e.e == doctest::Approx(1.04743969).epsilon(1e-7));
    const auto re = drift_residual(Policy::BILATERAL_E, e, p);
    CHECK(std::max(std::abs(re.horizontal), std::abs(re.vertical)) <= 1e-10);

    // The plug-in values ln2/(p_e p_h) and ln3/(p_e p_h) are the p_h -> 0
    // limits; at p_h = 0.01 the roots sit about 6% below them.
    const MarketParams small{1, 2, 0.001, 0.5, 1};
    const auto hs = drift_solve(Policy::BILATERAL_H, small, drift_plugin_point(Policy::BILATERAL_H, small));
    CHECK(hs.h == doctest::Approx(std::log(2.0) / (0.5 * 0.001)).epsilon(0.01));
    const auto es = drift_solve(Policy::BILATERAL_E, small, drift_plugin_point(Policy::BILATERAL_E, small));
    CHECK(es.h == doctest::Approx(std::log(3.0) / (0.5 * 0.001)).epsilon(0.01));
    CHECK(std::abs(hs.h * 0.5 * 0.001 / std::log(2.0) - 1) < std::abs(h.h * 0.5 * 0.01 / std::log(2.0) - 1));
}

TEST_CASE("merge gain") {
    const MarketParams one{1, 1.3, 0.02, 0.5, 1};
    // only E agents added
    const auto more_e = merge_gain(one, {1e-9, 0.7, 0.02, 0.5, 1});
    REQUIRE(more_e.delta_constant.has_value());
    CHECK(*more_e.delta_constant < 0);
    CHECK(more_e.direction == -1);

    const auto flooded = merge_gain(one, {5, 1e-9, 0.02, 0.5, 1});
    CHECK(flooded.standalone == Scaling::INV_PH);
    CHECK(flooded.merged == Scaling::INV_PH_SQ);
    CHECK(flooded.direction == 1);
    CHECK_FALSE(flooded.delta_constant.has_value());

    // Doubling both rates keeps the ratio but halves the minority constant,
    // since it carries a 1/lambda_h factor.
    const auto twin = merge_gain(one, one);
    REQUIRE(twin.delta_constant.has_value());
    CHECK(*twin.delta_constant == doctest::Approx(-0.5 * limit_bilateral_h(one).constant).epsilon(1e-12));
}

TEST_CASE("competing rate threshold") {
    CHECK(competing_rate_threshold(1, 2, 1.0, 1) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(competing_rate_threshold(1, 2, 0.5, 1) == doctest::Approx(3.41421).epsilon(1e-5));
    CHECK(competing_rate_threshold(1, 2, 0.5, 1) == doctest::Approx(std::sqrt(2.0) / (std::sqrt(2.0) - 1)).epsilon(1e-14));
    for (int d : {1, 5, 20}) CHECK(competing_rate_threshold(0.7, 1.9, 1.0, d) == doctest::Approx(2.6));
    CHECK_THROWS_AS(competing_rate_threshold(0, 2, 0.5, 1), ParamError);
}

TEST_CASE("constants are finite and positive on a grid") {
    for (double lh : {0.1, 0.9, 1.1, 3.0})
        for (double le : {0.5, 1.0, 4.0})
            for (double pe : {0.1, 0.5, 1.0})
                for (int d : {1, 10}) {
                    const MarketParams p{lh, le, 0.001, pe, d};
                    if (regime(p) == Regime::BALANCED) continue;
                    for (double c : {limit_bilateral_h(p).constant, bounds_bilateral_e(p).upper.constant,
                                     bound_chain(p).constant, heuristic_chain_constant(p).constant,
                                     chain_length_limit(p)}) {
                        CHECK(std::isfinite(c));
                        CHECK(c > 0);
                    }
                }
}

TEST_CASE("lemma 1 bound") {
    TailBoundSpec s;
    s.f = [](int) { return 1.0; };
    s.g = [](int) { return 0.25; };
    s.eta = 10;
    s.rho = 0.5;
    s.k = 10;
    s.check_max = 50;
    CHECK(lemma1_lower_tail_bound(s) == doctest::Approx(std::pow(2.0, -9)).epsilon(1e-15));
    s.k = 0;
    CHECK(lemma1_lower_tail_bound(s) >= 1.0);

    s.g = [](int x) { return x < 20 ? 0.25 : 0.1; };  // not nondecreasing
    CHECK_THROWS_AS(lemma1_lower_tail_bound(s), LemmaConditionError);
    s.g = [](int) { return 0.75; };  // g/f above rho
    CHECK_THROWS_WITH_AS(lemma1_lower_tail_bound(s), "g(eta+1)/f(eta) must be below rho", LemmaConditionError);
}

TEST_CASE("lemma 2 bound") {
    TailBoundSpec s;
    s.f = [](int) { return 0.25; };
    s.g = [](int) { return 1.0; };
    s.eta = 5;
    s.rho = 0.5;
    s.k = 7;
    s.check_max = 60;
    CHECK(lemma2_upper_tail_bound(s) == doctest::Approx(std::pow(0.5, 7) / 0.5).epsilon(1e-15));

    s.c = 2.0;
    s.delta = 0.3;
    double last = 1e300;
    for (int k = 0; k <= 1000; ++k) {
        s.k = k;
        const double b = lemma2_upper_tail_bound(s);
        CHECK(b <= last);
        last = b;
    }
    s.f = [](int) { return 0.8; };
    CHECK_THROWS_AS(lemma2_upper_tail_bound(s), LemmaConditionError);
}

TEST_CASE("tail lemmas bound the exact stationary tails of bilateral-H") {
    const MarketParams p{1, 2, 0.05, 0.5, 1};
    const auto dist = solve_stationary(query_bilateral_h(p), default_truncation(Policy::BILATERAL_H, p));
    const auto m = stationary_moments(dist);
    for (int k : {5, 10, 20}) {
        const auto lo = testing::lower_tail_construction(p, dist, k);
        CHECK(m.cdf_h_le(lo.eta - k) <= lemma1_lower_tail_bound(lo));
        const auto up = testing::upper_tail_construction(p, dist.truncation().h_max, k);
        CHECK(m.tail_h_ge(up.eta + k) <= lemma2_upper_tail_bound(up));
    }
}
