#include "hem/ctmc.hpp"
#include "hem/theory.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace hem {

namespace {

double no_match(double prob, double count) { return std::pow(1.0 - prob, count); }

}  // namespace

NeighborRates rates_bilateral_h(CountsState s, const MarketParams& p) {
    const double a = no_match(p.p_h * p.p_h, s.h);
    const double bh = no_match(p.p_e * p.p_h, s.h);
    const double be = no_match(p.p_e * p.p_h, s.e);
    const double c = no_match(p.p_e * p.p_e, s.e);
    NeighborRates r;
    r.right = p.lambda_h * a * be;
    r.left = p.lambda_h * (1.0 - a) + p.lambda_e * (1.0 - bh);
    r.up = p.lambda_e * bh * c;
    r.down = p.lambda_h * a * (1.0 - be) + p.lambda_e * bh * (1.0 - c);
    return r;
}

NeighborRates rates_bilateral_e(CountsState s, const MarketParams& p) {
    const double a = no_match(p.p_h * p.p_h, s.h);
    const double bh = no_match(p.p_e * p.p_h, s.h);
    const double be = no_match(p.p_e * p.p_h, s.e);
    const double c = no_match(p.p_e * p.p_e, s.e);
    NeighborRates r;
    r.right = p.lambda_h * a * be;
    r.left = p.lambda_h * be * (1.0 - a) + p.lambda_e * c * (1.0 - bh);
    r.up = p.lambda_e * bh * c;
    r.down = p.lambda_h * (1.0 - be) + p.lambda_e * (1.0 - c);
    return r;
}

BirthDeathRates rates_bilateral_e_tilde(int h, const MarketParams& p) {
    const double a = no_match(p.p_h * p.p_h, h);
    const double b = no_match(p.p_e * p.p_h, h);
    return {p.lambda_h * a + p.lambda_e * b, p.lambda_h * (1.0 - a) + p.lambda_e * (1.0 - b)};
}

// Products are accumulated in long double so that the pmf stays normalised
// to a few ulps even for h in the thousands.
double seg_tail_value(int h, int k, double p_h) {
    if (k <= 0) return 1.0;
    if (k > h) return 0.0;
    const long double q = 1.0L - static_cast<long double>(p_h);
    long double t = 1.0L;
    for (int j = 0; j < k; ++j) t *= 1.0L - std::pow(q, static_cast<long double>(h - j));
    return static_cast<double>(t);
}

namespace {

long double tail_ld(int h, int k, long double q) {
    long double t = 1.0L;
    for (int j = 0; j < k; ++j) t *= 1.0L - std::pow(q, static_cast<long double>(h - j));
    return t;
}

long double pmf_ld(int h, int i, long double q) {
    return std::pow(q, static_cast<long double>(h - i)) * tail_ld(h, i, q);
}

}  // namespace

double seg_pmf_value(int h, int i, double p_h) {
    if (i < 0 || i > h) return 0.0;
    return static_cast<double>(pmf_ld(h, i, 1.0L - static_cast<long double>(p_h)));
}

double ChainSegDist::tail(int k) const {
    if (k <= 0) return 1.0;
    if (k > h) return 0.0;
    return tails[static_cast<std::size_t>(k)];
}

ChainSegDist chain_seg_pmf(int h, double p_h) {
    if (h < 0) throw ParamError("chain_seg_pmf: h must be nonnegative");
    ChainSegDist out;
    out.h = h;
    out.p_h = p_h;
    out.pmf.resize(static_cast<std::size_t>(h) + 1);
    out.tails.resize(static_cast<std::size_t>(h) + 2);
    const long double q = 1.0L - static_cast<long double>(p_h);
    long double t = 1.0L;
    for (int i = 0; i <= h; ++i) {
        const long double stay = std::pow(q, static_cast<long double>(h - i));
        out.tails[static_cast<std::size_t>(i)] = static_cast<double>(t);
        out.pmf[static_cast<std::size_t>(i)] = static_cast<double>(t * stay);
        t *= 1.0L - stay;
    }
    out.tails[static_cast<std::size_t>(h) + 1] = 0.0;
    return out;
}

double check_memoryless(int h, int i_tilde, int i, double p_h) {
    if (!(0 <= i_tilde && i_tilde <= i && i <= h))
        throw ParamError("check_memoryless: need 0 <= i_tilde <= i <= h");
    const long double q = 1.0L - static_cast<long double>(p_h);
    const long double whole = pmf_ld(h, i, q);
    const long double split = tail_ld(h, i_tilde, q) * pmf_ld(h - i_tilde, i - i_tilde, q);
    return static_cast<double>(std::abs(whole - split));
}

double segment_start_rate(const MarketParams& p) {
    return p.lambda_h * (1.0 - no_match(p.p_h, p.d)) + p.lambda_e * (1.0 - no_match(p.p_e, p.d));
}

std::vector<Transition> rates_chain_hat(int h, const MarketParams& p) {
    std::vector<Transition> out;
    out.push_back({{h + 1, 0, 0}, p.lambda_h * no_match(p.p_h, p.d)});
    if (h > 0) {
        const double start = segment_start_rate(p);
        const ChainSegDist seg = chain_seg_pmf(h, p.p_h);
        for (int i = 1; i <= h; ++i) {
            const double r = start * seg.pmf[static_cast<std::size_t>(i)];
            if (r > 0.0) out.push_back({{h - i, 0, 0}, r});
        }
    }
    return out;
}

std::vector<double> segment_removal_law(CountsState s, const MarketParams& p) {
    const int w = s.e + 1;
    std::vector<double> flow(static_cast<std::size_t>((s.h + 1) * w), 0.0);
    std::vector<double> law(flow.size(), 0.0);
    auto at = [w](int a, int b) { return static_cast<std::size_t>(a * w + b); };
    flow[at(0, 0)] = 1.0;
    // a, b count removals so far; flows only increase a or b.
    for (int a = 0; a <= s.h; ++a) {
        for (int b = 0; b <= s.e; ++b) {
            const double m = flow[at(a, b)];
            if (m == 0.0) continue;
            const double take_h = 1.0 - no_match(p.p_h, s.h - a);
            const double take_e = (1.0 - take_h) * (1.0 - no_match(p.p_e, s.e - b));
            if (a < s.h) flow[at(a + 1, b)] += m * take_h;
            if (b < s.e) flow[at(a, b + 1)] += m * take_e;
            law[at(a, b)] += m * (1.0 - take_h - take_e);
        }
    }
    return law;
}

std::vector<Transition> rates_chain(CountsState s, const MarketParams& p) {
    std::vector<Transition> out;
    out.push_back({{s.h + 1, s.e, 0}, p.lambda_h * no_match(p.p_h, p.d)});
    out.push_back({{s.h, s.e + 1, 0}, p.lambda_e * no_match(p.p_e, p.d)});
    const double start = segment_start_rate(p);
    const std::vector<double> law = segment_removal_law(s, p);
    const int w = s.e + 1;
    for (int a = 0; a <= s.h; ++a)
        for (int b = 0; b <= s.e; ++b) {
            if (a == 0 && b == 0) continue;
            const double r = start * law[static_cast<std::size_t>(a * w + b)];
            if (r > 0.0) out.push_back({{s.h - a, s.e - b, 0}, r});
        }
    return out;
}

double default_token_rate(const MarketParams& p) { return 1e3 * p.total_rate(); }

std::vector<Transition> rates_token_chain(GridState s, const MarketParams& p, double mu) {
    if (s.u != 0 && s.u != 1) throw ParamError("rates_token_chain: u must be 0 or 1");
    std::vector<Transition> out;
    if (s.u == 0) {
        out.push_back({{s.h + 1, s.e, 0}, p.lambda_h * no_match(p.p_h, p.d)});
        out.push_back({{s.h, s.e + 1, 0}, p.lambda_e * no_match(p.p_e, p.d)});
        out.push_back({{s.h, s.e, 1}, segment_start_rate(p)});
        return out;
    }
    const double miss_h = no_match(p.p_h, s.h);
    const double miss_e = no_match(p.p_e, s.e);
    out.push_back({{s.h, s.e, 0}, mu * miss_h * miss_e});
    if (s.h > 0) out.push_back({{s.h - 1, s.e, 1}, mu * (1.0 - miss_h)});
    if (s.e > 0) out.push_back({{s.h, s.e - 1, 1}, mu * miss_h * (1.0 - miss_e)});
    return out;
}

double RateQuery::rate(const GridState& from, const GridState& to) const {
    std::vector<Transition> buf;
    neighbors(from, buf);
    double r = 0.0;
    for (const auto& t : buf)
        if (t.to == to) r += t.rate;
    return r;
}

namespace {

void push_nn(const GridState& s, const NeighborRates& r, std::vector<Transition>& out) {
    if (r.right > 0) out.push_back({{s.h + 1, s.e, 0}, r.right});
    if (r.left > 0) out.push_back({{s.h - 1, s.e, 0}, r.left});
    if (r.up > 0) out.push_back({{s.h, s.e + 1, 0}, r.up});
    if (r.down > 0) out.push_back({{s.h, s.e - 1, 0}, r.down});
}

}  // namespace

RateQuery query_bilateral_h(const MarketParams& p) {
    return RateQuery([p](const GridState& s, std::vector<Transition>& out) {
        push_nn(s, rates_bilateral_h({s.h, s.e}, p), out);
    });
}

RateQuery query_bilateral_e(const MarketParams& p) {
    return RateQuery([p](const GridState& s, std::vector<Transition>& out) {
        push_nn(s, rates_bilateral_e({s.h, s.e}, p), out);
    });
}

RateQuery query_bilateral_e_tilde(const MarketParams& p) {
    return RateQuery([p](const GridState& s, std::vector<Transition>& out) {
        const auto r = rates_bilateral_e_tilde(s.h, p);
        if (r.up > 0) out.push_back({{s.h + 1, 0, 0}, r.up});
        if (r.down > 0) out.push_back({{s.h - 1, 0, 0}, r.down});
    });
}

RateQuery query_chain_hat(const MarketParams& p) {
    return RateQuery([p](const GridState& s, std::vector<Transition>& out) {
        auto r = rates_chain_hat(s.h, p);
        out.insert(out.end(), r.begin(), r.end());
    });
}

RateQuery query_chain(const MarketParams& p) {
    return RateQuery([p](const GridState& s, std::vector<Transition>& out) {
        auto r = rates_chain({s.h, s.e}, p);
        out.insert(out.end(), r.begin(), r.end());
    });
}

RateQuery query_token_chain(const MarketParams& p, double mu) {
    return RateQuery([p, mu](const GridState& s, std::vector<Transition>& out) {
        auto r = rates_token_chain(s, p, mu);
        out.insert(out.end(), r.begin(), r.end());
    });
}

RateQuery query_for(Policy policy, const MarketParams& p) {
    switch (policy) {
        case Policy::BILATERAL_H: return query_bilateral_h(p);
        case Policy::BILATERAL_E: return query_bilateral_e(p);
        case Policy::CHAIN: return query_chain(p);
        case Policy::CHAIN_HAT: return query_chain_hat(p);
        case Policy::BILATERAL_E_TILDE: return query_bilateral_e_tilde(p);
        case Policy::MAX_CHAIN: break;
    }
    throw ParamError("no counts CTMC exists for " + to_string(policy));
}

TruncationSpec default_truncation(Policy policy, const MarketParams& p) {
    validate_params(p);
    double mean_h = 0.0;  // theory-predicted E[H]
    const bool two_d = policy == Policy::BILATERAL_H || policy == Policy::BILATERAL_E ||
                       policy == Policy::CHAIN;
    if (policy == Policy::BILATERAL_H || policy == Policy::BILATERAL_E ||
        policy == Policy::BILATERAL_E_TILDE) {
        if (regime(p) == Regime::BALANCED) {
            mean_h = p.lambda_h / std::pow(p.p_h, 1.5);
        } else {
            const LimitResult lim = policy == Policy::BILATERAL_H ? limit_bilateral_h(p)
                                                                   : bounds_bilateral_e(p).upper;
            mean_h = p.lambda_h * lim.waiting_time(p.p_h);
        }
    } else if (p.lambda_e > 0.0) {
        mean_h = p.lambda_h * bound_chain(p).waiting_time(p.p_h);
    } else {
        mean_h = p.lambda_h / (p.p_h * p.p_h);
    }
    TruncationSpec t;
    t.h_max = std::max(40, static_cast<int>(std::ceil(4.0 * mean_h)));
    t.e_max = (two_d && p.lambda_e > 0.0) ? static_cast<int>(std::ceil(8.0 / (p.p_e * p.p_e))) : 0;
    return t;
}

std::size_t StationaryDistribution::index(const GridState& s) const {
    const auto nh = static_cast<std::size_t>(trunc_.h_max) + 1;
    const auto ne = static_cast<std::size_t>(trunc_.e_max) + 1;
    return (static_cast<std::size_t>(s.u) * ne + static_cast<std::size_t>(s.e)) * nh +
           static_cast<std::size_t>(s.h);
}

GridState StationaryDistribution::state(std::size_t i) const {
    const auto nh = static_cast<std::size_t>(trunc_.h_max) + 1;
    const auto ne = static_cast<std::size_t>(trunc_.e_max) + 1;
    return {static_cast<int>(i % nh), static_cast<int>((i / nh) % ne), static_cast<int>(i / (nh * ne))};
}

bool StationaryDistribution::contains(const GridState& s) const {
    return s.h >= 0 && s.h <= trunc_.h_max && s.e >= 0 && s.e <= trunc_.e_max && s.u >= 0 &&
           s.u <= trunc_.u_max;
}

double StationaryDistribution::prob(const GridState& s) const {
    return contains(s) ? mass_[index(s)] : 0.0;
}

namespace {

struct Generator {
    // Off-diagonal rates by source row, plus exit rates on the diagonal.
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
    std::vector<double> exit;
};

Generator build_generator(const RateQuery& q, const StationaryDistribution& grid) {
    Generator g;
    g.rows.resize(grid.size());
    g.exit.assign(grid.size(), 0.0);
    std::vector<Transition> buf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const GridState s = grid.state(i);
        buf.clear();
        q.neighbors(s, buf);
        for (const auto& t : buf) {
            if (!grid.contains(t.to) || t.to == s || !(t.rate > 0.0)) continue;
            if (t.rate < 0.0 || !std::isfinite(t.rate)) throw NumericError("invalid rate");
            g.rows[i].push_back({grid.index(t.to), t.rate});
            g.exit[i] += t.rate;
        }
    }
    return g;
}

// (pi Q) accumulated in long double.
std::vector<long double> apply_left(const Generator& g, const std::vector<double>& pi) {
    std::vector<long double> out(pi.size(), 0.0L);
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const long double m = pi[i];
        if (m == 0.0L) continue;
        out[i] -= m * g.exit[i];
        for (const auto& [j, r] : g.rows[i]) out[j] += m * r;
    }
    return out;
}

void normalise(std::vector<double>& pi) {
    long double sum = 0.0L;
    for (double& x : pi) {
        if (x < 0.0) x = 0.0;
        sum += x;
    }
    if (!(sum > 0.0L)) throw NumericError("solve_stationary: zero mass");
    for (double& x : pi) x = static_cast<double>(x / sum);
}

// One uniformised power step; returns the sup-norm change.
double power_step(const Generator& g, double unif, std::vector<double>& pi) {
    const auto flow = apply_left(g, pi);
    double change = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) {
        const double next = static_cast<double>(pi[i] + flow[i] / unif);
        change = std::max(change, std::abs(next - pi[i]));
        pi[i] = next;
    }
    normalise(pi);
    return change;
}

std::vector<double> direct_solve(const Generator& g) {
    const std::size_t n = g.rows.size();
    // Rows of Q^T, with row 0 replaced by the normalisation constraint.
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < n; ++i) {
        if (i != 0) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -g.exit[i]);
        for (const auto& [j, r] : g.rows[i])
            if (j != 0) trip.emplace_back(static_cast<int>(j), static_cast<int>(i), r);
        trip.emplace_back(0, static_cast<int>(i), 1.0);
    }
    Eigen::SparseMatrix<double> a(static_cast<int>(n), static_cast<int>(n));
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw NumericError("solve_stationary: sparse LU failed (reducible truncated chain?)");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<int>(n));
    rhs(0) = 1.0;
    Eigen::VectorXd x = lu.solve(rhs);
    // One round of iterative refinement.
    Eigen::VectorXd r = rhs - a * x;
    x += lu.solve(r);
    std::vector<double> pi(n);
    for (std::size_t i = 0; i < n; ++i) pi[i] = x(static_cast<int>(i));
    return pi;
}

}  // namespace

StationaryDistribution solve_stationary(const RateQuery& q, const TruncationSpec& trunc,
                                        const SolveOptions& opts) {
    if (trunc.h_max < 1 || trunc.e_max < 0 || trunc.u_max < 0)
        throw ParamError("TruncationSpec: need h_max >= 1, e_max >= 0, u_max >= 0");
    const std::size_t n = static_cast<std::size_t>(trunc.h_max + 1) *
                          static_cast<std::size_t>(trunc.e_max + 1) *
                          static_cast<std::size_t>(trunc.u_max + 1);
    StationaryDistribution dist(trunc, std::vector<double>(n, 0.0));
    const Generator g = build_generator(q, dist);
    const double unif = 1.01 * *std::max_element(g.exit.begin(), g.exit.end());
    if (!(unif > 0.0)) throw NumericError("solve_stationary: chain has no transitions");

    std::vector<double> pi;
    long long iters = 0;
    if (opts.method == SolveMethod::DIRECT) {
        pi = direct_solve(g);
        normalise(pi);
    } else {
        pi.assign(n, 1.0 / static_cast<double>(n));
    }
    // Power iteration on the uniformised chain; after a direct solve this
    // only polishes away rounding and clipped negatives.
    for (;;) {
        if (iters >= opts.max_iterations)
            throw NumericError("solve_stationary: no convergence within iteration cap");
        ++iters;
        if (power_step(g, unif, pi) < opts.tolerance) break;
    }

    const auto flow = apply_left(g, pi);
    double res = 0.0;
    for (auto v : flow) res = std::max(res, static_cast<double>(std::abs(v)));
    double boundary = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const GridState s = dist.state(i);
        if (s.h == trunc.h_max || (trunc.e_max > 0 && s.e == trunc.e_max)) boundary += pi[i];
    }
    StationaryDistribution out(trunc, std::move(pi));
    out.residual = res;
    out.boundary_mass = boundary;
    out.uniformization_rate = unif;
    out.iterations = iters;
    if (boundary > opts.boundary_limit && !opts.allow_boundary_mass)
        throw NumericError("solve_stationary: truncation too small (boundary mass " +
                           std::to_string(boundary) + ")");
    return out;
}

double StationaryMoments::tail_h_ge(int k) const {
    if (k <= 0) return 1.0;
    long double s = 0.0L;
    for (std::size_t h = static_cast<std::size_t>(k); h < marginal_h.size(); ++h) s += marginal_h[h];
    return static_cast<double>(s);
}

double StationaryMoments::cdf_h_le(int k) const {
    if (k < 0) return 0.0;
    long double s = 0.0L;
    for (std::size_t h = 0; h < marginal_h.size() && h <= static_cast<std::size_t>(k); ++h)
        s += marginal_h[h];
    return static_cast<double>(s);
}

StationaryMoments stationary_moments(const StationaryDistribution& dist) {
    StationaryMoments m;
    m.marginal_h.assign(static_cast<std::size_t>(dist.truncation().h_max) + 1, 0.0);
    long double mh = 0.0L, me = 0.0L;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double w = dist.masses()[i];
        const GridState s = dist.state(i);
        m.marginal_h[static_cast<std::size_t>(s.h)] += w;
        mh += static_cast<long double>(w) * s.h;
        me += static_cast<long double>(w) * s.e;
    }
    m.mean_h = static_cast<double>(mh);
    m.mean_e = static_cast<double>(me);
    return m;
}

Drift stationary_drift(const StationaryDistribution& dist, const RateQuery& q) {
    long double dh = 0.0L, de = 0.0L;
    std::vector<Transition> buf;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double w = dist.masses()[i];
        if (w == 0.0) continue;
        const GridState s = dist.state(i);
        buf.clear();
        q.neighbors(s, buf);
        for (const auto& t : buf) {
            if (!dist.contains(t.to)) continue;
            dh += static_cast<long double>(w) * t.rate * (t.to.h - s.h);
            de += static_cast<long double>(w) * t.rate * (t.to.e - s.e);
        }
    }
    return {static_cast<double>(dh), static_cast<double>(de)};
}

double expected_chain_length_stationary(const MarketParams& p) {
    return expected_chain_length_stationary(p, default_truncation(Policy::CHAIN_HAT, p));
}

double expected_chain_length_stationary(const MarketParams& p, const TruncationSpec& trunc) {
    validate_params(p);
    const auto dist = solve_stationary(query_chain_hat(p), trunc);
    // Segments start at the same rate in every state, so conditioning on
    // formation leaves pi unchanged: E[L | L>=1] = 1 + E_pi[E S_h].
    long double mean = 0.0L;
    for (int h = 0; h <= trunc.h_max; ++h) {
        const double w = dist.prob({h, 0, 0});
        if (w == 0.0) continue;
        const ChainSegDist seg = chain_seg_pmf(h, p.p_h);
        long double inner = 0.0L;
        for (int i = 0; i <= h; ++i) inner += static_cast<long double>(i + 1) * seg.pmf[static_cast<std::size_t>(i)];
        mean += w * inner;
    }
    return static_cast<double>(mean);
}

double expected_chain_length_chain(const MarketParams& p, const TruncationSpec& trunc) {
    validate_params(p);
    const auto dist = solve_stationary(query_chain(p), trunc);
    long double mean = 0.0L;
    for (std::size_t idx = 0; idx < dist.size(); ++idx) {
        const double w = dist.masses()[idx];
        if (w == 0.0) continue;
        const GridState s = dist.state(idx);
        const auto law = segment_removal_law({s.h, s.e}, p);
        long double inner = 0.0L;
        for (int a = 0; a <= s.h; ++a)
            for (int b = 0; b <= s.e; ++b)
                inner += static_cast<long double>(1 + a + b) * law[static_cast<std::size_t>(a * (s.e + 1) + b)];
        mean += w * inner;
    }
    return static_cast<double>(mean);
}

}  // namespace hem
