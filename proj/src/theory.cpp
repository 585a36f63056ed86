#include "hem/theory.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace hem {

namespace {

void refuse_balanced(const MarketParams& p, const char* what) {
    if (regime(p) == Regime::BALANCED)
        throw ParamError(std::string(what) + ": balanced regime (lambda_h == lambda_e) has no constant");
}

// ln(2 lambda_h / (lambda_h + lambda_e)) / lambda_h, the H-majority constant.
double majority_constant(const MarketParams& p) {
    return std::log(2.0 * p.lambda_h / (p.lambda_h + p.lambda_e)) / p.lambda_h;
}

double coverage(double prob, int d) { return 1.0 - std::pow(1.0 - prob, d); }

}  // namespace

double LimitResult::waiting_time(double p_h) const {
    return scaling == Scaling::INV_PH ? constant / p_h : constant / (p_h * p_h);
}

std::string to_string(Scaling s) { return s == Scaling::INV_PH ? "INV_PH" : "INV_PH_SQ"; }

std::string to_string(LimitKind k) {
    switch (k) {
        case LimitKind::EXACT: return "EXACT";
        case LimitKind::UPPER_BOUND: return "UPPER_BOUND";
        case LimitKind::LOWER_BOUND: return "LOWER_BOUND";
        case LimitKind::HEURISTIC: return "HEURISTIC";
    }
    return "?";
}

LimitResult limit_bilateral_h(const MarketParams& p) {
    validate_params(p);
    refuse_balanced(p, "limit_bilateral_h");
    if (regime(p) == Regime::H_MINORITY)
        return {Scaling::INV_PH,
                std::log(p.lambda_e / (p.lambda_e - p.lambda_h)) / (p.p_e * p.lambda_h),
                LimitKind::EXACT};
    return {Scaling::INV_PH_SQ, majority_constant(p), LimitKind::EXACT};
}

BilateralEBounds bounds_bilateral_e(const MarketParams& p) {
    validate_params(p);
    refuse_balanced(p, "bounds_bilateral_e");
    if (regime(p) == Regime::H_MAJORITY) {
        LimitResult exact{Scaling::INV_PH_SQ, majority_constant(p), LimitKind::EXACT};
        return {exact, exact, exact};
    }
    const double gap = p.lambda_e - p.lambda_h;
    const double scale = p.p_e * p.lambda_h;
    return {{Scaling::INV_PH, std::log(p.lambda_e / gap) / scale, LimitKind::LOWER_BOUND},
            {Scaling::INV_PH, std::log(2.0 * p.lambda_e / gap) / scale, LimitKind::UPPER_BOUND},
            {Scaling::INV_PH, std::log((p.lambda_e + p.lambda_h) / gap) / scale,
             LimitKind::HEURISTIC}};
}

LimitResult bound_chain(const MarketParams& p) {
    validate_params(p);
    if (!(p.lambda_e > 0.0)) throw ParamError("bound_chain: lambda_e must be positive");
    const double served = p.lambda_e * coverage(p.p_e, p.d);
    return {Scaling::INV_PH, std::log(p.lambda_h / served + 1.0) / p.lambda_h,
            p.p_e == 1.0 ? LimitKind::EXACT : LimitKind::UPPER_BOUND};
}

LimitResult heuristic_chain_constant(const MarketParams& p) {
    validate_params(p);
    const double denom = p.lambda_h * coverage(p.p_h, p.d) + p.lambda_e;
    return {Scaling::INV_PH, std::log((p.lambda_h + p.lambda_e) / denom) / p.lambda_h,
            LimitKind::HEURISTIC};
}

double chain_length_limit(const MarketParams& p) {
    validate_params(p);
    const double served = p.lambda_e * coverage(p.p_e, p.d);
    if (!(served > 0.0)) throw ParamError("chain_length_limit: lambda_e (1-(1-p_e)^d) is zero");
    return (p.lambda_h + p.lambda_e * std::pow(1.0 - p.p_e, p.d)) / served + 1.0;
}

double critical_ratio_residual(double x) {
    return (x + 1.0) * std::log(2.0 - 2.0 / (x + 1.0)) - 1.0;
}

double critical_ratio() {
    // The residual is negative at 1 and positive at 10.
    double lo = 1.0, hi = 10.0;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        mid = 0.5 * (lo + hi);
        if (critical_ratio_residual(mid) < 0.0) lo = mid; else hi = mid;
    }
    if (std::abs(critical_ratio_residual(mid)) > 1e-12)
        throw NumericError("critical_ratio: bisection did not reach 1e-12");
    return mid;
}

DriftResidual drift_residual(Policy policy, DriftPoint x, const MarketParams& p) {
    const double a = std::pow(1.0 - p.p_h * p.p_h, x.h);       // no H-H match
    const double bh = std::pow(1.0 - p.p_e * p.p_h, x.h);      // no E-H match, over h
    const double be = std::pow(1.0 - p.p_e * p.p_h, x.e);      // no H-E match, over e
    const double c = std::pow(1.0 - p.p_e * p.p_e, x.e);       // no E-E match
    const double lh = p.lambda_h, le = p.lambda_e;
    if (policy == Policy::BILATERAL_H) {
        return {lh * a * be - lh * (1.0 - a) - le * (1.0 - bh),
                le * bh * c - lh * a * (1.0 - be) - le * bh * (1.0 - c)};
    }
    if (policy == Policy::BILATERAL_E) {
        return {lh * a * be - lh * be * (1.0 - a) - le * c * (1.0 - bh),
                le * bh * c - lh * (1.0 - be) - le * (1.0 - c)};
    }
    throw ParamError("drift_residual: policy must be BILATERAL_H or BILATERAL_E");
}

DriftPoint drift_plugin_point(Policy policy, const MarketParams& p) {
    validate_params(p);
    refuse_balanced(p, "drift_plugin_point");
    if (regime(p) == Regime::H_MAJORITY)
        return {majority_constant(p) * p.lambda_h / (p.p_h * p.p_h), 0.0};
    const double gap = p.lambda_e - p.lambda_h;
    const double scale = p.p_e * p.p_h;
    const double ln_c = std::log(1.0 - p.p_e * p.p_e);
    if (policy == Policy::BILATERAL_H)
        return {std::log(p.lambda_e / gap) / scale, -std::log(2.0) / ln_c};
    if (policy == Policy::BILATERAL_E)
        return {std::log((p.lambda_e + p.lambda_h) / gap) / scale,
                std::log((p.lambda_e + p.lambda_h) / (2.0 * p.lambda_e)) / ln_c};
    throw ParamError("drift_plugin_point: policy must be BILATERAL_H or BILATERAL_E");
}

DriftPoint drift_solve(Policy policy, const MarketParams& p, DriftPoint init) {
    validate_params(p);
    auto norm = [](DriftResidual r) { return std::max(std::abs(r.horizontal), std::abs(r.vertical)); };
    DriftPoint x = init;
    DriftResidual r = drift_residual(policy, x, p);
    for (int it = 0; it < 1000; ++it) {
        if (norm(r) <= 1e-10) return x;
        // Central-difference Jacobian.
        const double sh = 1e-6 * std::max(1.0, std::abs(x.h));
        const double se = 1e-6 * std::max(1.0, std::abs(x.e));
        auto rhp = drift_residual(policy, {x.h + sh, x.e}, p);
        auto rhm = drift_residual(policy, {x.h - sh, x.e}, p);
        auto rep = drift_residual(policy, {x.h, x.e + se}, p);
        auto rem = drift_residual(policy, {x.h, x.e - se}, p);
        const double j11 = (rhp.horizontal - rhm.horizontal) / (2 * sh);
        const double j21 = (rhp.vertical - rhm.vertical) / (2 * sh);
        const double j12 = (rep.horizontal - rem.horizontal) / (2 * se);
        const double j22 = (rep.vertical - rem.vertical) / (2 * se);
        const double det = j11 * j22 - j12 * j21;
        if (!(std::abs(det) > 0.0) || !std::isfinite(det))
            throw NumericError("drift_solve: singular Jacobian");
        const double dh = -(j22 * r.horizontal - j12 * r.vertical) / det;
        const double de = -(-j21 * r.horizontal + j11 * r.vertical) / det;

        // Halve the step until the residual decreases.
        double t = 1.0;
        DriftPoint next;
        DriftResidual rn;
        bool improved = false;
        for (int half = 0; half < 60; ++half, t *= 0.5) {
            next = {std::max(0.0, x.h + t * dh), std::max(0.0, x.e + t * de)};
            rn = drift_residual(policy, next, p);
            if (norm(rn) < norm(r)) { improved = true; break; }
        }
        if (!improved) break;
        x = next;
        r = rn;
    }
    if (norm(r) <= 1e-10) return x;
    throw NumericError("drift_solve: no convergence to 1e-10 within 1000 iterations");
}

MergeGain merge_gain(const MarketParams& p1, const MarketParams& p2) {
    MarketParams merged = p1;
    merged.lambda_h = p1.lambda_h + p2.lambda_h;
    merged.lambda_e = p1.lambda_e + p2.lambda_e;
    const LimitResult alone = limit_bilateral_h(p1);
    const LimitResult joint = limit_bilateral_h(merged);
    MergeGain g;
    g.standalone = alone.scaling;
    g.merged = joint.scaling;
    if (alone.scaling == joint.scaling) {
        g.delta_constant = joint.constant - alone.constant;
        g.direction = *g.delta_constant > 0 ? 1 : (*g.delta_constant < 0 ? -1 : 0);
    } else {
        // 1/p_h^2 growth dominates any constant as p_h -> 0.
        g.direction = joint.scaling == Scaling::INV_PH_SQ ? 1 : -1;
    }
    return g;
}

double competing_rate_threshold(double lambda_h, double lambda_e1, double p_e, int d) {
    if (!(lambda_h > 0.0) || !(lambda_e1 > 0.0) || !(p_e > 0.0 && p_e <= 1.0) || d < 1)
        throw ParamError("competing_rate_threshold: inputs must be positive, p_e in (0,1]");
    const double served = lambda_e1 * coverage(p_e, d);
    const double top = std::pow(lambda_h + served, p_e);
    const double denom = top - std::pow(served, p_e);
    if (!(denom > 0.0)) throw NumericError("competing_rate_threshold: degenerate denominator");
    return lambda_h * top / denom;
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw LemmaConditionError(what);
}

void check_common(const TailBoundSpec& s) {
    require(static_cast<bool>(s.f) && static_cast<bool>(s.g), "f and g must be supplied");
    require(s.eta >= 0, "eta must be nonnegative");
    require(s.k >= 0, "k must be nonnegative");
    require(s.rho > 0.0 && s.rho < 1.0, "rho must lie in (0,1)");
    require(s.check_max > s.eta, "check_max must exceed eta");
}

}  // namespace

double lemma1_lower_tail_bound(const TailBoundSpec& s) {
    check_common(s);
    require(s.epsilon >= 0.0 && s.epsilon <= 1.0, "epsilon must lie in [0,1]");
    for (int x = 0; x <= s.check_max; ++x) {
        require(s.f(x) > 0.0, "f must be positive");
        if (x + 1 <= s.check_max) require(s.f(x + 1) <= s.f(x), "f must be nonincreasing");
        // g(0) never enters the bound; positivity is required from 1 on.
        if (x >= 1) require(s.g(x) > 0.0, "g must be positive");
        if (x + 1 <= s.check_max) require(s.g(x + 1) >= s.g(x), "g must be nondecreasing");
    }
    const double fe = s.f(s.eta);
    const double ge = s.g(s.eta + 1);
    require(ge / fe < s.rho, "g(eta+1)/f(eta) must be below rho");
    return s.eta * s.epsilon * (1.0 + 1.0 / (fe - ge)) + std::pow(s.rho, s.k) / (1.0 - s.rho);
}

double lemma2_upper_tail_bound(const TailBoundSpec& s) {
    check_common(s);
    require(s.c >= 0.0, "c must be nonnegative");
    require(s.delta >= 0.0 && s.delta < 1.0, "delta must lie in [0,1)");
    require(s.rho >= s.delta, "rho must be at least delta");
    const double g_eta = s.g(s.eta + 1);
    require(g_eta > 0.0, "g(eta+1) must be positive");
    for (int x = s.eta; x <= s.check_max; ++x) {
        const double gx = s.g(x + 1);
        require(gx > 0.0, "g must be positive beyond eta");
        require(s.f(x) / gx <= s.rho, "f(x)/g(x+1) must not exceed rho for x >= eta");
        if (s.delta > 0.0) {
            // delta^x / g(x+1) <= rho^x / g(eta+1), compared in logs.
            require(x * std::log(s.delta) - std::log(gx) <= x * std::log(s.rho) - std::log(g_eta) + 1e-12,
                    "delta^x/g(x+1) must not exceed rho^x/g(eta+1)");
        }
    }
    double bracket = 1.0 + s.c;
    if (s.c > 0.0) {
        const double gap = g_eta - s.f(s.eta);
        require(gap > 0.0, "g(eta+1) - f(eta) must be positive");
        bracket += s.c * (s.k + 1) / gap;
    }
    return std::pow(s.rho, s.k) / (1.0 - s.rho) * bracket;
}

}  // namespace hem
