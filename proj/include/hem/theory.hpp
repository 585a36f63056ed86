#pragma once

#include "hem/core.hpp"

#include <functional>
#include <optional>
#include <string>

namespace hem {

/// How E[H] grows as p_h -> 0: p_h * w_h or p_h^2 * w_h tends to `constant`.
enum class Scaling { INV_PH, INV_PH_SQ };
enum class LimitKind { EXACT, UPPER_BOUND, LOWER_BOUND, HEURISTIC };

struct LimitResult {
    Scaling scaling = Scaling::INV_PH;
    double constant = 0.0;
    LimitKind kind = LimitKind::EXACT;

    /// w_h predicted at a finite p_h.
    double waiting_time(double p_h) const;
};

std::string to_string(Scaling s);
std::string to_string(LimitKind k);

LimitResult limit_bilateral_h(const MarketParams& p);

struct BilateralEBounds {
    LimitResult lower;
    LimitResult upper;
    LimitResult heuristic;
};
BilateralEBounds bounds_bilateral_e(const MarketParams& p);

LimitResult bound_chain(const MarketParams& p);
/// Finite-p_h guess for p_h * w_h under the chain policy.
LimitResult heuristic_chain_constant(const MarketParams& p);

double chain_length_limit(const MarketParams& p);

/// Root of (x+1) ln(2 - 2/(x+1)) = 1 on (1, 10).
double critical_ratio();
double critical_ratio_residual(double x);

struct DriftPoint {
    double h = 0.0;
    double e = 0.0;
};
struct DriftResidual {
    double horizontal = 0.0;
    double vertical = 0.0;
};

/// Policy must be BILATERAL_H or BILATERAL_E.
DriftResidual drift_residual(Policy policy, DriftPoint x, const MarketParams& p);
DriftPoint drift_solve(Policy policy, const MarketParams& p, DriftPoint init);
/// The plug-in point the heuristic derivation suggests, usable as init.
DriftPoint drift_plugin_point(Policy policy, const MarketParams& p);

struct MergeGain {
    /// +1: market one's limit worsens, -1: improves, 0: unchanged.
    int direction = 0;
    Scaling standalone = Scaling::INV_PH;
    Scaling merged = Scaling::INV_PH;
    /// merged minus standalone constant; absent when the scalings differ.
    std::optional<double> delta_constant;
};
MergeGain merge_gain(const MarketParams& p1, const MarketParams& p2);

double competing_rate_threshold(double lambda_h, double lambda_e1, double p_e, int d);

/// Inputs of the two-dimensional tail lemmas. Conditions are verified
/// numerically for x in [0, check_max].
struct TailBoundSpec {
    std::function<double(int)> f;
    std::function<double(int)> g;
    double epsilon = 0.0;  // lower-tail lemma: P[Y outside S] <= epsilon
    double c = 0.0;        // upper-tail lemma
    double delta = 0.0;    // upper-tail lemma
    int eta = 0;
    double rho = 0.5;
    int k = 0;
    int check_max = 1000;
};

/// Lemma-condition failure; the message names the condition.
class LemmaConditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

double lemma1_lower_tail_bound(const TailBoundSpec& spec);
double lemma2_upper_tail_bound(const TailBoundSpec& spec);

}  // namespace hem
