#include "hem/ctmc.hpp"
#include "hem/theory.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace hem;

TEST_CASE("bilateral-H rates") {
    const MarketParams p{1, 2, 0.1, 0.5, 1};
    const auto r0 = rates_bilateral_h({0, 0}, p);
    CHECK(r0.right == 1.0);
    CHECK(r0.up == 2.0);
    CHECK(r0.left == 0.0);
    CHECK(r0.down == 0.0);

    const MarketParams q{1, 1, 0.1, 0.5, 1};
    // p_h^2 + p_e p_h at one agent of each type
    CHECK(rates_bilateral_h({1, 1}, q).left == doctest::Approx(0.06).epsilon(1e-12));

    for (int h = 0; h < 30; ++h)
        for (int e = 0; e < 30; ++e) {
            const auto r = rates_bilateral_h({h, e}, p);
            CHECK(r.total() <= p.total_rate() + 1e-12);
            CHECK(r.right >= 0);
            CHECK(r.down >= 0);
        }
}

TEST_CASE("bilateral-E rates") {
    const MarketParams p{1, 2, 0.1, 0.5, 1};
    const auto a = rates_bilateral_e({0, 0}, p);
    const auto b = rates_bilateral_h({0, 0}, p);
    CHECK(a.right == b.right);
    CHECK(a.up == b.up);
    CHECK(a.left == b.left);
    CHECK(a.down == b.down);

    for (int h = 0; h < 20; ++h) {
        const double expect = 1.0 * (1 - std::pow(1 - 0.01, h)) + 2.0 * (1 - std::pow(1 - 0.05, h));
        CHECK(rates_bilateral_e({h, 0}, p).left == doctest::Approx(expect).epsilon(1e-13));
        CHECK(rates_bilateral_h({h, 0}, p).left == doctest::Approx(expect).epsilon(1e-13));
    }
    // 1 (1 - 0.95^3) + 2 (1 - 0.75^3)
    CHECK(rates_bilateral_e({2, 3}, p).down == doctest::Approx(1.298875).epsilon(1e-12));
}

TEST_CASE("B-tilde-E rates are monotone") {
    const MarketParams p{1, 2, 0.05, 0.5, 1};
    CHECK(rates_bilateral_e_tilde(0, p).down == 0.0);
    for (int h = 0; h < 500; ++h)
        CHECK(rates_bilateral_e_tilde(h + 1, p).up <= rates_bilateral_e_tilde(h, p).up);
}

TEST_CASE("chain segment law") {
    const auto s0 = chain_seg_pmf(0, 0.3);
    CHECK(s0.pmf.size() == 1);
    CHECK(s0.pmf[0] == 1.0);

    const auto s = chain_seg_pmf(2, 0.1);
    CHECK(s.pmf[0] == doctest::Approx(0.81).epsilon(1e-14));
    CHECK(s.pmf[1] == doctest::Approx(0.171).epsilon(1e-14));
    CHECK(s.pmf[2] == doctest::Approx(0.019).epsilon(1e-14));
    CHECK(s.tail(1) == doctest::Approx(0.19).epsilon(1e-14));
    CHECK(s.tail(1) == doctest::Approx(s.pmf[1] + s.pmf[2]).epsilon(1e-14));
    CHECK(s.tail(0) == 1.0);
    CHECK(s.tail(3) == 0.0);

    for (double ph : {1e-3, 1e-2, 0.1, 0.5})
        for (int h : {1, 7, 100, 999, 5000, 10000}) {
            const auto d = chain_seg_pmf(h, ph);
            const long double total = std::accumulate(d.pmf.begin(), d.pmf.end(), 0.0L);
            CHECK(std::abs(static_cast<double>(total) - 1.0) <= 1e-14);
            CHECK(seg_pmf_value(h, h / 2, ph) == doctest::Approx(d.pmf[static_cast<std::size_t>(h / 2)]));
        }
}

TEST_CASE("memoryless split") {
    CHECK(check_memoryless(5, 2, 3, 0.1) <= 1e-14);
    for (double ph : {1e-3, 1e-2, 0.1, 0.5})
        for (int h : {3, 40, 200}) {
            CHECK(check_memoryless(h, 0, h / 3, ph) == 0.0);
            CHECK(check_memoryless(h, h / 2, h / 2, ph) <= 1e-14);
            CHECK(check_memoryless(h, h / 4, h / 2, ph) <= 1e-14);
        }
    CHECK_THROWS_AS(check_memoryless(5, 3, 2, 0.1), ParamError);
}

TEST_CASE("C-hat rates") {
    const MarketParams p{1, 2, 0.02, 0.5, 3};
    const auto r0 = rates_chain_hat(0, p);
    REQUIRE(r0.size() == 1);
    CHECK(r0[0].to.h == 1);
    CHECK(r0[0].rate == doctest::Approx(std::pow(0.98, 3)).epsilon(1e-14));

    const int h = 25;
    double down = 0.0;
    for (const auto& t : rates_chain_hat(h, p))
        if (t.to.h < h) down += t.rate;
    const double lam = segment_start_rate(p);
    CHECK(down == doctest::Approx(lam * (1 - chain_seg_pmf(h, p.p_h).pmf[0])).epsilon(1e-13));

    const MarketParams q{1, 2, 0.02, 1.0, 1};
    CHECK(segment_start_rate(q) == doctest::Approx(1 * 0.02 + 2).epsilon(1e-15));
}

TEST_CASE("C(d) kernel conserves segment mass") {
    const MarketParams p{1, 2, 0.1, 0.5, 2};
    for (int h : {0, 3, 9})
        for (int e : {0, 2, 5}) {
            const auto law = segment_removal_law({h, e}, p);
            CHECK(std::accumulate(law.begin(), law.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
        }
    // with no E agents the kernel reduces to the H-only segment law
    const auto law = segment_removal_law({4, 0}, p);
    const auto seg = chain_seg_pmf(4, p.p_h);
    for (int i = 0; i <= 4; ++i) CHECK(law[static_cast<std::size_t>(i)] == doctest::Approx(seg.pmf[static_cast<std::size_t>(i)]).epsilon(1e-14));
}

TEST_CASE("token chain rates") {
    const MarketParams p{1, 2, 0.1, 0.5, 1};
    const RateQuery q = query_token_chain(p, 100.0);
    CHECK(q.rate({3, 2, 0}, {3, 2, 1}) == doctest::Approx(1 * 0.1 + 2 * 0.5).epsilon(1e-15));
    CHECK(q.rate({0, 0, 1}, {0, 0, 0}) == doctest::Approx(100.0).epsilon(1e-15));
    CHECK(q.rate({2, 1, 1}, {2, 1, 0}) == doctest::Approx(40.5).epsilon(1e-13));
    CHECK(q.rate({2, 1, 1}, {1, 1, 1}) == doctest::Approx(100 * 0.19).epsilon(1e-13));
    CHECK_THROWS_AS(rates_token_chain({0, 0, 2}, p, 1.0), ParamError);
}

TEST_CASE("solver reproduces the birth-death closed form") {
    // lambda_e = 0 leaves the 1-D walk of H agents matching each other
    const MarketParams p{1, 0, 0.05, 0.5, 1};
    TruncationSpec t;
    t.h_max = 2000;
    t.e_max = 0;
    const auto dist = solve_stationary(query_bilateral_h(p), t);

    std::vector<long double> w(static_cast<std::size_t>(t.h_max) + 1);
    w[0] = 1.0L;
    for (int h = 0; h < t.h_max; ++h) {
        const auto a = rates_bilateral_h({h, 0}, p);
        const auto b = rates_bilateral_h({h + 1, 0}, p);
        w[static_cast<std::size_t>(h) + 1] = w[static_cast<std::size_t>(h)] * a.right / b.left;
    }
    const long double z = std::accumulate(w.begin(), w.end(), 0.0L);
    double worst = 0.0;
    for (int h = 0; h <= t.h_max; ++h)
        worst = std::max(worst, std::abs(dist.prob({h, 0, 0}) - static_cast<double>(w[static_cast<std::size_t>(h)] / z)));
    CHECK(worst <= 1e-10);
    CHECK(dist.residual <= 1e-10);
    const double total = std::accumulate(dist.masses().begin(), dist.masses().end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("power iteration agrees with the direct solve") {
    const MarketParams p{1, 2, 0.2, 0.5, 1};
    TruncationSpec t{120, 60, 0};
    SolveOptions power;
    power.method = SolveMethod::POWER;
    const auto a = solve_stationary(query_bilateral_h(p), t);
    const auto b = solve_stationary(query_bilateral_h(p), t, power);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.masses()[i] - b.masses()[i]));
    CHECK(worst <= 1e-9);
}

TEST_CASE("truncation too small is reported") {
    const MarketParams p{1, 2, 0.02, 0.5, 1};
    TruncationSpec t{5, 3, 0};
    CHECK_THROWS_AS(solve_stationary(query_bilateral_h(p), t), NumericError);
    SolveOptions allow;
    allow.allow_boundary_mass = true;
    const auto d = solve_stationary(query_bilateral_h(p), t, allow);
    CHECK(d.boundary_mass > 1e-6);
}

TEST_CASE("C-hat at p_E = 1 matches the chain constant") {
    const MarketParams p{1, 2, 0.02, 1.0, 1};
    const auto dist = solve_stationary(query_chain_hat(p), default_truncation(Policy::CHAIN_HAT, p));
    const auto m = stationary_moments(dist);
    CHECK(p.p_h * m.mean_h / p.lambda_h == doctest::Approx(std::log(1.5)).epsilon(0.05));
}

TEST_CASE("stationary moments") {
    TruncationSpec t{6, 4, 0};
    std::vector<double> mass(7 * 5, 0.0);
    StationaryDistribution point(t, mass);
    const std::size_t at = point.index({3, 2, 0});
    mass[at] = 1.0;
    const auto m = stationary_moments(StationaryDistribution(t, mass));
    CHECK(m.mean_h == 3.0);
    CHECK(m.mean_e == 2.0);
    CHECK(m.tail_h_ge(3) == 1.0);
    CHECK(m.tail_h_ge(4) == 0.0);
    CHECK(m.cdf_h_le(3) == 1.0);
    CHECK(m.cdf_h_le(2) == 0.0);

    const MarketParams p{1, 2, 0.05, 0.5, 1};
    const auto sm = stationary_moments(solve_stationary(query_bilateral_h(p), default_truncation(Policy::BILATERAL_H, p)));
    for (int k = 0; k < 120; ++k) CHECK(sm.tail_h_ge(k + 1) <= sm.tail_h_ge(k));
}

TEST_CASE("zero-drift identities under the stationary law") {
    // sum_s pi(s) sum_t q(s,t) (h_t - h_s) = sum_t h_t (pi Q)_t, so the drift
    // is bounded by the residual times the sum of h over the grid.
    const MarketParams p{1, 2, 0.05, 0.5, 1};
    const RateQuery q = query_bilateral_h(p);
    const auto t = default_truncation(Policy::BILATERAL_H, p);
    const auto dist = solve_stationary(q, t);
    const Drift d = stationary_drift(dist, q);
    const double sum_h = 0.5 * t.h_max * (t.h_max + 1.0) * (t.e_max + 1.0);
    const double sum_e = 0.5 * t.e_max * (t.e_max + 1.0) * (t.h_max + 1.0);
    CHECK(std::abs(d.horizontal) <= dist.residual * sum_h);
    CHECK(std::abs(d.vertical) <= dist.residual * sum_e);
    CHECK(std::abs(d.horizontal) <= 1e-13);
    CHECK(std::abs(d.vertical) <= 1e-13);
}

TEST_CASE("segment length") {
    CHECK(chain_length_limit({2, 2, 0.01, 0.5, 1}) == doctest::Approx(4.0));
    // Flow balance: agents leave only through segments, so Lambda E[L-1]
    // equals the rate of arrivals that join. This holds at every p_h.
    const MarketParams p{2, 2, 0.05, 0.5, 1};
    const double lam = segment_start_rate(p);
    const double joins = p.lambda_h * (1 - p.p_h) + p.lambda_e * (1 - p.p_e);
    const double c_len = expected_chain_length_chain(p, default_truncation(Policy::CHAIN, p));
    CHECK(c_len == doctest::Approx(1 + joins / lam).epsilon(1e-9));
    CHECK(c_len == doctest::Approx(4.0).epsilon(0.10));
    // C-hat drops unmatched E agents, so only the H inflow is carried
    const MarketParams q{2, 2, 0.01, 0.5, 1};
    const double hat = expected_chain_length_stationary(q);
    CHECK(hat == doctest::Approx(1 + q.lambda_h * (1 - q.p_h) / segment_start_rate(q)).epsilon(1e-9));
}
