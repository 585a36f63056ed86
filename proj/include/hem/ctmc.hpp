#pragma once

#include "hem/core.hpp"

#include <functional>
#include <vector>

namespace hem {

/// Grid point of a counts CTMC. `u` is the token flag of the segment-advance
/// chain and stays 0 elsewhere.
struct GridState {
    int h = 0;
    int e = 0;
    int u = 0;
    friend bool operator==(const GridState&, const GridState&) = default;
};

struct Transition {
    GridState to;
    double rate = 0.0;
};

/// Nearest-neighbour rates of the 2-D bilateral walks.
struct NeighborRates {
    double right = 0.0;  // h+1
    double left = 0.0;   // h-1
    double up = 0.0;     // e+1
    double down = 0.0;   // e-1
    double total() const { return right + left + up + down; }
};

NeighborRates rates_bilateral_h(CountsState s, const MarketParams& p);
NeighborRates rates_bilateral_e(CountsState s, const MarketParams& p);

/// Up and down rates of the 1-D walk in which unmatched E arrivals turn into H.
struct BirthDeathRates {
    double up = 0.0;
    double down = 0.0;
};
BirthDeathRates rates_bilateral_e_tilde(int h, const MarketParams& p);

/// Law of the number of H agents a segment removes when h are waiting.
struct ChainSegDist {
    int h = 0;
    double p_h = 0.0;
    std::vector<double> pmf;    // size h+1
    std::vector<double> tails;  // tails[k] = P[S >= k], size h+2

    double tail(int k) const;
};

ChainSegDist chain_seg_pmf(int h, double p_h);
double seg_pmf_value(int h, int i, double p_h);
double seg_tail_value(int h, int k, double p_h);

/// |P[S_h=i] - P[S_h>=i_tilde] P[S_{h-i_tilde}=i-i_tilde]|.
double check_memoryless(int h, int i_tilde, int i, double p_h);

/// Rate at which bridge-matched arrivals start segments.
double segment_start_rate(const MarketParams& p);

std::vector<Transition> rates_chain_hat(int h, const MarketParams& p);

/// Exact jump kernel of the chain policy on (h,e) counts. Segment outcomes
/// are summed over every path of the local search. Self-loops are omitted.
std::vector<Transition> rates_chain(CountsState s, const MarketParams& p);

/// Law of (H removed, E removed) by one segment started at (h,e);
/// entry [a*(e+1)+b] is P[a H and b E removed].
std::vector<double> segment_removal_law(CountsState s, const MarketParams& p);

std::vector<Transition> rates_token_chain(GridState s, const MarketParams& p, double mu);
double default_token_rate(const MarketParams& p);

/// Generator given by neighbour enumeration. Rates are pure functions.
class RateQuery {
public:
    using Enumerator = std::function<void(const GridState&, std::vector<Transition>&)>;

    explicit RateQuery(Enumerator neighbors) : neighbors_(std::move(neighbors)) {}

    /// Appends all positive-rate transitions out of `from` (no self-loops).
    void neighbors(const GridState& from, std::vector<Transition>& out) const {
        neighbors_(from, out);
    }
    double rate(const GridState& from, const GridState& to) const;

private:
    Enumerator neighbors_;
};

RateQuery query_bilateral_h(const MarketParams& p);
RateQuery query_bilateral_e(const MarketParams& p);
RateQuery query_bilateral_e_tilde(const MarketParams& p);
RateQuery query_chain_hat(const MarketParams& p);
RateQuery query_chain(const MarketParams& p);
RateQuery query_token_chain(const MarketParams& p, double mu);
RateQuery query_for(Policy policy, const MarketParams& p);

/// Out-of-range transitions are dropped (reflecting truncation).
struct TruncationSpec {
    int h_max = 1;
    int e_max = 0;
    int u_max = 0;
};

/// h_max is four times the theory-predicted mean of H; e_max = ceil(8/p_e^2).
TruncationSpec default_truncation(Policy policy, const MarketParams& p);

enum class SolveMethod { DIRECT, POWER };

struct SolveOptions {
    SolveMethod method = SolveMethod::DIRECT;
    double tolerance = 1e-13;
    long long max_iterations = 10'000'000;
    double boundary_limit = 1e-6;
    bool allow_boundary_mass = false;  // report instead of throwing
};

class StationaryDistribution {
public:
    StationaryDistribution(TruncationSpec trunc, std::vector<double> mass)
        : trunc_(trunc), mass_(std::move(mass)) {}

    const TruncationSpec& truncation() const { return trunc_; }
    const std::vector<double>& masses() const { return mass_; }
    std::size_t size() const { return mass_.size(); }

    std::size_t index(const GridState& s) const;
    GridState state(std::size_t i) const;
    bool contains(const GridState& s) const;
    double prob(const GridState& s) const;

    double residual = 0.0;       // ||pi Q||_inf on the truncated generator
    double boundary_mass = 0.0;  // mass on h = h_max or e = e_max
    double uniformization_rate = 0.0;
    long long iterations = 0;

private:
    TruncationSpec trunc_;
    std::vector<double> mass_;
};

StationaryDistribution solve_stationary(const RateQuery& q, const TruncationSpec& trunc,
                                        const SolveOptions& opts = {});

struct StationaryMoments {
    double mean_h = 0.0;
    double mean_e = 0.0;
    std::vector<double> marginal_h;

    double tail_h_ge(int k) const;  // P[H >= k]
    double cdf_h_le(int k) const;   // P[H <= k]
};

StationaryMoments stationary_moments(const StationaryDistribution& dist);

/// Expected horizontal and vertical drift under pi, using the truncated rates.
struct Drift {
    double horizontal = 0.0;
    double vertical = 0.0;
};
Drift stationary_drift(const StationaryDistribution& dist, const RateQuery& q);

/// E[L | L >= 1] under the Ĉ(d) stationary law: segments start at rate
/// segment_start_rate and remove S_h agents, so L = 1 + S_h.
double expected_chain_length_stationary(const MarketParams& p);
double expected_chain_length_stationary(const MarketParams& p, const TruncationSpec& trunc);

/// E[L | L >= 1] under the exact C(d) kernel.
double expected_chain_length_chain(const MarketParams& p, const TruncationSpec& trunc);

}  // namespace hem
