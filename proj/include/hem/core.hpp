#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace hem {

/// Thrown when market parameters or run controls break an invariant.
class ParamError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numeric failure: non-convergence, degenerate formula, search budget.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AgentType { H, E };

struct MarketParams {
    double lambda_h = 1.0;
    double lambda_e = 1.0;
    double p_h = 0.02;
    double p_e = 0.5;
    int d = 1;  // bridge agents, ignored by bilateral policies

    double total_rate() const { return lambda_h + lambda_e; }
    double prob_h_arrival() const { return lambda_h / total_rate(); }
    /// Compatibility probability for a receiver of type t.
    double p_of(AgentType t) const { return t == AgentType::H ? p_h : p_e; }
};

struct CountsState {
    int h = 0;
    int e = 0;
    friend bool operator==(const CountsState&, const CountsState&) = default;
};

struct RunControls {
    std::int64_t arrivals = 1'000'000;
    double warmup_fraction = 0.5;
    std::uint64_t seed = 1;
    int replicas = 1;
};

struct SimSummary {
    double mean_h = 0.0;
    double mean_e = 0.0;
    double w_h = 0.0;
    double w_e = 0.0;
    std::optional<double> chain_len_mean_given_positive;
    double ci_half_width_h = 0.0;  // 95%, Student t over batch means
    double stderr_h = 0.0;         // batch-means standard error of mean_h
    double stderr_e = 0.0;
    std::int64_t samples = 0;      // post-warmup epochs
    std::int64_t segments = 0;     // post-warmup segment-forming epochs
};

/// Matching policy. CHAIN and CHAIN_HAT take d from MarketParams; MAX_CHAIN
/// needs the agent-level graph engine.
enum class Policy { BILATERAL_H, BILATERAL_E, CHAIN, CHAIN_HAT, BILATERAL_E_TILDE, MAX_CHAIN };

std::string to_string(Policy policy);
Policy parse_policy(const std::string& name);
bool is_chain(Policy policy);

enum class Regime { H_MINORITY, H_MAJORITY, BALANCED };

MarketParams validate_params(const MarketParams& p);
void validate_controls(const RunControls& rc);

double little_law(double mean_count, double rate);

Regime regime(const MarketParams& p);
std::string to_string(Regime r);

/// Seed of replica `index` under base seed `base`. Injective in `index`.
std::uint64_t replica_seed(std::uint64_t base, std::uint64_t index);

}  // namespace hem
