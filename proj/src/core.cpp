#include "hem/core.hpp"
#include "hem/rng.hpp"

#include <cmath>

namespace hem {

MarketParams validate_params(const MarketParams& p) {
    if (!(p.lambda_h > 0.0) || !std::isfinite(p.lambda_h))
        throw ParamError("lambda_h must be positive");
    if (!(p.lambda_e >= 0.0) || !std::isfinite(p.lambda_e))
        throw ParamError("lambda_e must be nonnegative");
    if (!(p.p_h > 0.0 && p.p_h <= 1.0)) throw ParamError("p_h must lie in (0,1]");
    if (!(p.p_e > 0.0 && p.p_e <= 1.0)) throw ParamError("p_e must lie in (0,1]");
    if (p.p_h > p.p_e) throw ParamError("p_h must not exceed p_e");
    if (p.d < 1) throw ParamError("d must be at least 1");
    return p;
}

void validate_controls(const RunControls& rc) {
    if (rc.arrivals < 2) throw ParamError("arrivals must be at least 2");
    if (!(rc.warmup_fraction >= 0.0 && rc.warmup_fraction < 1.0))
        throw ParamError("warmup_fraction must lie in [0,1)");
    if (rc.replicas < 1) throw ParamError("replicas must be positive");
}

double little_law(double mean_count, double rate) {
    if (!(rate > 0.0)) throw ParamError("little_law: rate must be positive");
    return mean_count / rate;
}

Regime regime(const MarketParams& p) {
    if (p.lambda_h < p.lambda_e) return Regime::H_MINORITY;
    if (p.lambda_h > p.lambda_e) return Regime::H_MAJORITY;
    return Regime::BALANCED;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::H_MINORITY: return "H_MINORITY";
        case Regime::H_MAJORITY: return "H_MAJORITY";
        case Regime::BALANCED: return "BALANCED";
    }
    return "?";
}

std::string to_string(Policy policy) {
    switch (policy) {
        case Policy::BILATERAL_H: return "BILATERAL_H";
        case Policy::BILATERAL_E: return "BILATERAL_E";
        case Policy::CHAIN: return "CHAIN";
        case Policy::CHAIN_HAT: return "CHAIN_HAT";
        case Policy::BILATERAL_E_TILDE: return "BILATERAL_E_TILDE";
        case Policy::MAX_CHAIN: return "MAX_CHAIN";
    }
    return "?";
}

Policy parse_policy(const std::string& name) {
    for (Policy p : {Policy::BILATERAL_H, Policy::BILATERAL_E, Policy::CHAIN, Policy::CHAIN_HAT,
                     Policy::BILATERAL_E_TILDE, Policy::MAX_CHAIN})
        if (to_string(p) == name) return p;
    throw ParamError("unknown policy '" + name + "'");
}

bool is_chain(Policy policy) {
    return policy == Policy::CHAIN || policy == Policy::CHAIN_HAT || policy == Policy::MAX_CHAIN;
}

// base + (index+1)*gamma is injective in index (gamma odd) and splitmix64 is
// a bijection, so distinct replicas never share a seed.
std::uint64_t replica_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64(base + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

}  // namespace hem
