#include "hem/sim_counts.hpp"
#include "hem/stats.hpp"

#include <cmath>

namespace hem {

namespace {

double hit(double prob, int count) { return 1.0 - std::pow(1.0 - prob, count); }

AgentType draw_type(const MarketParams& p, Rng& rng) {
    return rng.uniform() < p.prob_h_arrival() ? AgentType::H : AgentType::E;
}

enum class Priority { H_FIRST, E_FIRST };

StepResult bilateral_given(AgentType t, CountsState s, const MarketParams& p, Rng& rng,
                           Priority prio) {
    const double ph = p.p_of(t) * p.p_h;  // match with a waiting H
    const double pe = p.p_of(t) * p.p_e;  // match with a waiting E
    StepResult r{s, {t, false, 0}};
    const bool h_first = prio == Priority::H_FIRST;
    const double first = h_first ? hit(ph, s.h) : hit(pe, s.e);
    const double second = h_first ? hit(pe, s.e) : hit(ph, s.h);
    if (rng.uniform() < first) {
        (h_first ? r.state.h : r.state.e) -= 1;
        r.event.matched = true;
    } else if (rng.uniform() < second) {
        (h_first ? r.state.e : r.state.h) -= 1;
        r.event.matched = true;
    } else {
        (t == AgentType::H ? r.state.h : r.state.e) += 1;
    }
    return r;
}

// Local-search segment continuing from (h,e); returns agents removed.
int run_segment(CountsState& s, const MarketParams& p, Rng& rng) {
    int removed = 0;
    for (;;) {
        if (s.h > 0 && rng.uniform() < hit(p.p_h, s.h)) {
            --s.h;
        } else if (s.e > 0 && rng.uniform() < hit(p.p_e, s.e)) {
            --s.e;
        } else {
            return removed;
        }
        ++removed;
    }
}

// H-only run as in Ĉ(d): the number of H agents removed from h.
int run_h_only(int h, const MarketParams& p, Rng& rng) {
    int removed = 0;
    while (h - removed > 0 && rng.uniform() < hit(p.p_h, h - removed)) ++removed;
    return removed;
}

StepResult chain_given(AgentType t, CountsState s, const MarketParams& p, Rng& rng) {
    StepResult r{s, {t, false, 0}};
    if (!(rng.uniform() < hit(p.p_of(t), p.d))) {
        (t == AgentType::H ? r.state.h : r.state.e) += 1;
        return r;
    }
    r.event.matched = true;
    r.event.chain_len = 1 + run_segment(r.state, p, rng);
    return r;
}

StepResult chain_hat_given(AgentType t, CountsState s, const MarketParams& p, Rng& rng) {
    StepResult r{{s.h, 0}, {t, false, 0}};
    if (!(rng.uniform() < hit(p.p_of(t), p.d))) {
        if (t == AgentType::H) ++r.state.h;
        return r;
    }
    const int removed = run_h_only(r.state.h, p, rng);
    r.state.h -= removed;
    r.event.matched = true;
    r.event.chain_len = 1 + removed;
    return r;
}

int e_tilde_given(AgentType t, int h, const MarketParams& p, Rng& rng) {
    const double prob = t == AgentType::H ? hit(p.p_h * p.p_h, h) : hit(p.p_e * p.p_h, h);
    return rng.uniform() < prob ? h - 1 : h + 1;
}

struct Window {
    std::int64_t warmup;
    std::int64_t post;
};

Window window_of(const RunControls& rc) {
    validate_controls(rc);
    const auto warm = static_cast<std::int64_t>(std::floor(rc.warmup_fraction * static_cast<double>(rc.arrivals)));
    return {warm, rc.arrivals - warm};
}

SimSummary summarise(const BatchMeans& bh, const BatchMeans& be, const MarketParams& p) {
    SimSummary s;
    s.mean_h = bh.mean();
    s.mean_e = be.mean();
    s.w_h = little_law(s.mean_h, p.lambda_h);
    s.w_e = p.lambda_e > 0.0 ? little_law(s.mean_e, p.lambda_e) : 0.0;
    s.stderr_h = bh.std_error();
    s.stderr_e = be.std_error();
    s.ci_half_width_h = bh.half_width();
    s.samples = bh.count();
    return s;
}

}  // namespace

StepResult step_bilateral_h(CountsState s, const MarketParams& p, Rng& rng) {
    const AgentType t = draw_type(p, rng);
    return bilateral_given(t, s, p, rng, Priority::H_FIRST);
}

StepResult step_bilateral_e(CountsState s, const MarketParams& p, Rng& rng) {
    const AgentType t = draw_type(p, rng);
    return bilateral_given(t, s, p, rng, Priority::E_FIRST);
}

StepResult step_chain(CountsState s, const MarketParams& p, Rng& rng) {
    const AgentType t = draw_type(p, rng);
    return chain_given(t, s, p, rng);
}

StepResult step_chain_hat(CountsState s, const MarketParams& p, Rng& rng) {
    const AgentType t = draw_type(p, rng);
    return chain_hat_given(t, s, p, rng);
}

int step_bilateral_e_tilde(int h, const MarketParams& p, Rng& rng) {
    const AgentType t = draw_type(p, rng);
    return e_tilde_given(t, h, p, rng);
}

StepResult step(Policy policy, CountsState s, const MarketParams& p, Rng& rng) {
    switch (policy) {
        case Policy::BILATERAL_H: return step_bilateral_h(s, p, rng);
        case Policy::BILATERAL_E: return step_bilateral_e(s, p, rng);
        case Policy::CHAIN: return step_chain(s, p, rng);
        case Policy::CHAIN_HAT: return step_chain_hat(s, p, rng);
        case Policy::BILATERAL_E_TILDE: {
            const AgentType t = draw_type(p, rng);
            const int next = e_tilde_given(t, s.h, p, rng);
            return {{next, 0}, {t, next < s.h, 0}};
        }
        case Policy::MAX_CHAIN: break;
    }
    throw ParamError("MAX_CHAIN needs the graph engine");
}

SimSummary run_replica(Policy policy, const MarketParams& p, const RunControls& rc, Rng& rng) {
    validate_params(p);
    if (policy == Policy::MAX_CHAIN) throw ParamError("MAX_CHAIN needs the graph engine");
    const Window w = window_of(rc);
    BatchMeans bh(w.post), be(w.post);
    long double len_sum = 0.0L;
    std::int64_t segments = 0;
    CountsState s;
    for (std::int64_t k = 0; k < rc.arrivals; ++k) {
        const StepResult r = step(policy, s, p, rng);
        s = r.state;
        if (k < w.warmup) continue;
        bh.add(s.h);
        be.add(s.e);
        if (r.event.chain_len >= 1) {
            len_sum += r.event.chain_len;
            ++segments;
        }
    }
    SimSummary out = summarise(bh, be, p);
    if (is_chain(policy) && segments > 0)
        out.chain_len_mean_given_positive = static_cast<double>(len_sum / segments);
    out.segments = segments;
    return out;
}

std::vector<SimSummary> run_replicas(Policy policy, const MarketParams& p, const RunControls& rc) {
    validate_controls(rc);
    std::vector<SimSummary> out;
    out.reserve(static_cast<std::size_t>(rc.replicas));
    for (int i = 0; i < rc.replicas; ++i) {
        Rng rng(replica_seed(rc.seed, static_cast<std::uint64_t>(i)));
        out.push_back(run_replica(policy, p, rc, rng));
    }
    return out;
}

CoupledTrace run_coupled_chain(const MarketParams& p, const RunControls& rc, Rng& rng) {
    validate_params(p);
    const Window w = window_of(rc);
    BatchMeans c_h(w.post), c_e(w.post), hat_h(w.post), hat_e(w.post);
    CoupledTrace tr;
    tr.first.reserve(static_cast<std::size_t>(rc.arrivals));
    tr.second.reserve(static_cast<std::size_t>(rc.arrivals));
    CountsState c;   // C(d)
    int hat = 0;     // Ĉ(d)
    for (std::int64_t k = 0; k < rc.arrivals; ++k) {
        const AgentType t = draw_type(p, rng);
        // The bridge coin is shared.
        if (!(rng.uniform() < hit(p.p_of(t), p.d))) {
            if (t == AgentType::H) {
                ++c.h;
                ++hat;
            } else {
                ++c.e;
            }
        } else if (hat >= c.h) {
            // Walk Ĉ's run down to C's level; the memoryless split lets C
            // reuse the remainder of the run as its first H-only stretch.
            const int gap = hat - c.h;
            int cur = hat;
            while (hat - cur < gap && rng.uniform() < hit(p.p_h, cur)) --cur;
            if (hat - cur < gap) {
                ++tr.case_counts[0];
                hat = cur;
                run_segment(c, p, rng);
            } else {
                ++tr.case_counts[1];
                const int xi = run_h_only(c.h, p, rng);
                hat = c.h - xi;
                c.h -= xi;
                // The H run stopped; the segment continues with an E coin.
                if (c.e > 0 && rng.uniform() < hit(p.p_e, c.e)) {
                    --c.e;
                    run_segment(c, p, rng);
                }
            }
        } else {
            ++tr.case_counts[2];
            hat -= run_h_only(hat, p, rng);
            run_segment(c, p, rng);
        }
        if (c.h > hat) ++tr.violation_count;
        tr.first.push_back(c);
        tr.second.push_back({hat, 0});
        if (k >= w.warmup) {
            c_h.add(c.h);
            c_e.add(c.e);
            hat_h.add(hat);
            hat_e.add(0.0);
        }
    }
    tr.first_summary = summarise(c_h, c_e, p);
    tr.second_summary = summarise(hat_h, hat_e, p);
    return tr;
}

CoupledTrace run_coupled_bilateral_e(const MarketParams& p, const RunControls& rc, Rng& rng) {
    validate_params(p);
    const Window w = window_of(rc);
    BatchMeans b_h(w.post), b_e(w.post), til_h(w.post), til_e(w.post);
    CoupledTrace tr;
    tr.first.reserve(static_cast<std::size_t>(rc.arrivals));
    tr.second.reserve(static_cast<std::size_t>(rc.arrivals));
    CountsState b;   // B_E
    int til = 0;     // B̃_E
    const double a = 1.0 - p.p_h * p.p_h;
    const double be_ = 1.0 - p.p_e * p.p_h;
    const double c = 1.0 - p.p_e * p.p_e;
    for (std::int64_t k = 0; k < rc.arrivals; ++k) {
        const AgentType t = draw_type(p, rng);
        const int total = b.h + b.e;
        if (til <= total && total <= til + 1) {
            ++tr.case_counts[0];
            // Joint law: the no-match event of B_E is contained in B̃_E's.
            const bool h_arr = t == AgentType::H;
            const double tilde_miss = h_arr ? std::pow(a, til) : std::pow(be_, til);
            const double own_e = h_arr ? std::pow(be_, b.e) : std::pow(c, b.e);  // no E partner
            const double own_h = h_arr ? std::pow(a, b.h) : std::pow(be_, b.h);  // no H partner
            const double full_miss = own_h * own_e;
            const bool b1 = rng.uniform() < tilde_miss;
            const bool b2 = b1 && rng.uniform() < full_miss / tilde_miss;
            til += b1 ? 1 : -1;
            if (b1 && b2) {
                (h_arr ? b.h : b.e) += 1;
            } else if (rng.uniform() < (1.0 - own_e) / (1.0 - full_miss)) {
                --b.e;  // E-first priority
            } else {
                --b.h;
            }
        } else {
            ++tr.case_counts[1];
            b = bilateral_given(t, b, p, rng, Priority::E_FIRST).state;
            til = e_tilde_given(t, til, p, rng);
        }
        if (b.h + b.e > til + 1) ++tr.violation_count;
        tr.first.push_back(b);
        tr.second.push_back({til, 0});
        if (k >= w.warmup) {
            b_h.add(b.h);
            b_e.add(b.e);
            til_h.add(til);
            til_e.add(0.0);
        }
    }
    tr.first_summary = summarise(b_h, b_e, p);
    tr.second_summary = summarise(til_h, til_e, p);
    return tr;
}

}  // namespace hem
