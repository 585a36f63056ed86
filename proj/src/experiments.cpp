#include "hem/experiments.hpp"
#include "hem/ctmc.hpp"
#include "hem/sim_counts.hpp"
#include "hem/sim_graph.hpp"
#include "hem/theory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

namespace hem {

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "priorities", "merging", "chain-statics", "max-vs-local",
        "chains-vs-bilateral", "table1-search", "heuristic-tightness", "solver-vs-sim"};
    return names;
}

ExperimentSpec default_spec(const std::string& name) {
    ExperimentSpec s;
    s.name = name;
    s.rc.seed = 1;
    s.p_e = {0.5};
    s.d = {1};
    if (name == "priorities") {
        s.lambda_h = {1, 2, 3, 4, 6, 7, 8, 9};
        s.lambda_e = {5};
        s.p_h = {0.002};
        s.rc.arrivals = 2'000'000;
        s.policies = {Policy::BILATERAL_H, Policy::BILATERAL_E};
    } else if (name == "merging") {
        s.lambda_h = {0, 0.5, 1, 1.5, 2, 2.5, 3};
        s.lambda_e = {0, 0.5, 1, 1.5, 2, 2.5, 3};
        s.p_h = {0.02};
        s.rc.arrivals = 100'000;
        s.policies = {Policy::BILATERAL_H};
    } else if (name == "chain-statics") {
        s.lambda_h = {1, 2, 3, 4, 5};
        s.lambda_e = {1, 2, 3, 4, 5};
        s.p_h = {0.02};
        s.d = {1, 5, 20};
        s.rc.arrivals = 100'000;
        s.policies = {Policy::CHAIN};
    } else if (name == "max-vs-local") {
        s.lambda_h = {1, 2, 3, 4};
        s.lambda_e = {2};
        s.p_h = {0.002};
        s.rc.arrivals = 100'000;
        s.policies = {Policy::CHAIN, Policy::MAX_CHAIN};
    } else if (name == "chains-vs-bilateral") {
        s.lambda_h = {1, 2, 3, 4, 6, 7, 8, 9};
        s.lambda_e = {5};
        s.p_h = {0.02};
        s.d = {1, 20};
        s.rc.arrivals = 2'000'000;
        s.policies = {Policy::BILATERAL_H, Policy::CHAIN};
    } else if (name == "table1-search") {
        s.lambda_h = {1};
        s.lambda_e = {2};
        s.p_h = {0.02};
        s.p_e = {0.1, 0.3, 0.5, 0.9, 1.0};
        s.d = {1, 10, 50};
        s.rc.arrivals = 1'000'000;
        s.policies = {Policy::BILATERAL_H, Policy::CHAIN};
    } else if (name == "heuristic-tightness") {
        s.lambda_h = {1, 2, 3, 4};
        s.lambda_e = {2, 3, 5};
        s.p_h = {0.002};
        s.rc.arrivals = 100'000;
        s.policies = {Policy::BILATERAL_E, Policy::CHAIN};
    } else if (name == "solver-vs-sim") {
        s.lambda_h = {1};
        s.lambda_e = {2};
        s.p_h = {0.05};
        s.rc.arrivals = 1'000'000;
        s.policies = {Policy::BILATERAL_H, Policy::BILATERAL_E, Policy::CHAIN, Policy::CHAIN_HAT};
    } else {
        throw ConfigError("unknown experiment name '" + name + "'", 0);
    }
    return s;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

double parse_real(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(x))
        throw ConfigError("key '" + key + "' expects a number, got '" + v + "'", line);
    return x;
}

std::int64_t parse_int(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size())
        throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'", line);
    return x;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v, int line) {
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        x = std::stoull(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size())
        throw ConfigError("key '" + key + "' expects an unsigned integer, got '" + v + "'", line);
    return x;
}

std::vector<double> parse_reals(const std::string& key, const std::string& v, int line, double lo,
                                double hi, bool lo_open) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) {
        const double x = parse_real(key, item, line);
        if ((lo_open ? x <= lo : x < lo) || x > hi)
            throw ConfigError("key '" + key + "' value " + item + " out of range", line);
        out.push_back(x);
    }
    if (out.empty()) throw ConfigError("key '" + key + "' needs at least one value", line);
    return out;
}

}  // namespace

ExperimentSpec parse_config(const std::string& text) {
    std::map<std::string, std::pair<std::string, int>> kv;
    std::stringstream ss(text);
    std::string raw;
    int line = 0;
    static const std::vector<std::string> known = {
        "name", "lambda_h", "lambda_e", "p_h", "p_e", "d", "arrivals", "seed", "replicas",
        "warmup_fraction", "policies", "output", "lambda_h1", "lambda_e1", "search_budget"};
    while (std::getline(ss, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown key '" + key + "'", line);
        if (value.empty()) throw ConfigError("key '" + key + "' has no value", line);
        if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'", line);
        kv[key] = {value, line};
    }
    if (!kv.count("name")) throw ConfigError("missing required key 'name'", 0);
    const auto& [name, name_line] = kv["name"];
    if (std::find(experiment_names().begin(), experiment_names().end(), name) == experiment_names().end())
        throw ConfigError("unknown experiment name '" + name + "'", name_line);
    ExperimentSpec s = default_spec(name);

    // The merging grid describes market two, which may be empty of a type.
    const bool zero_ok = name == "merging";
    for (const auto& [key, entry] : kv) {
        const auto& [v, ln] = entry;
        if (key == "lambda_h") s.lambda_h = parse_reals(key, v, ln, 0.0, 1e9, !zero_ok);
        else if (key == "lambda_e") s.lambda_e = parse_reals(key, v, ln, 0.0, 1e9, false);
        else if (key == "p_h") s.p_h = parse_reals(key, v, ln, 0.0, 1.0, true);
        else if (key == "p_e") s.p_e = parse_reals(key, v, ln, 0.0, 1.0, true);
        else if (key == "d") {
            s.d.clear();
            for (const auto& item : split_list(v)) {
                const auto x = parse_int(key, item, ln);
                if (x < 1 || x > 1'000'000) throw ConfigError("key 'd' value " + item + " out of range", ln);
                s.d.push_back(static_cast<int>(x));
            }
        } else if (key == "arrivals") {
            s.rc.arrivals = parse_int(key, v, ln);
            if (s.rc.arrivals < 2) throw ConfigError("key 'arrivals' must be at least 2", ln);
        } else if (key == "seed") s.rc.seed = parse_u64(key, v, ln);
        else if (key == "replicas") {
            const auto r = parse_int(key, v, ln);
            if (r < 1 || r > 100000) throw ConfigError("key 'replicas' out of range", ln);
            s.rc.replicas = static_cast<int>(r);
        } else if (key == "warmup_fraction") {
            s.rc.warmup_fraction = parse_real(key, v, ln);
            if (s.rc.warmup_fraction < 0.0 || s.rc.warmup_fraction >= 1.0)
                throw ConfigError("key 'warmup_fraction' must lie in [0,1)", ln);
        } else if (key == "policies") {
            s.policies.clear();
            for (const auto& item : split_list(v)) {
                try {
                    s.policies.push_back(parse_policy(item));
                } catch (const ParamError& e) {
                    throw ConfigError(e.what(), ln);
                }
            }
        } else if (key == "output") s.output = v;
        else if (key == "lambda_h1") s.lambda_h1 = parse_reals(key, v, ln, 0.0, 1e9, true).front();
        else if (key == "lambda_e1") s.lambda_e1 = parse_reals(key, v, ln, 0.0, 1e9, false).front();
        else if (key == "search_budget") {
            s.search_budget = parse_int(key, v, ln);
            if (s.search_budget < 1) throw ConfigError("key 'search_budget' must be positive", ln);
        }
    }
    if (s.grid_size() == 0) throw ConfigError("parameter grid is empty", 0);
    return s;
}

ExperimentSpec load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

namespace {

struct GridPoint {
    MarketParams p;
};

std::vector<GridPoint> grid_of(const ExperimentSpec& s) {
    std::vector<GridPoint> out;
    for (double lh : s.lambda_h)
        for (double le : s.lambda_e)
            for (double ph : s.p_h)
                for (double pe : s.p_e)
                    for (int d : s.d) out.push_back({{lh, le, ph, pe, d}});
    return out;
}

// Runs tasks on the available cores; results are placed by index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                            static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

std::optional<double> theory_for(Policy policy, const MarketParams& p, bool heuristic) {
    try {
        switch (policy) {
            case Policy::BILATERAL_H:
                return limit_bilateral_h(p).constant;
            case Policy::BILATERAL_E: {
                const auto b = bounds_bilateral_e(p);
                return b.heuristic.constant;
            }
            case Policy::CHAIN:
                return heuristic ? heuristic_chain_constant(p).constant : bound_chain(p).constant;
            case Policy::CHAIN_HAT:
                return bound_chain(p).constant;
            default:
                return std::nullopt;
        }
    } catch (const ParamError&) {
        return std::nullopt;  // balanced regime or lambda_e = 0: no closed form
    }
}

ResultRow base_row(const ExperimentSpec& s, Policy policy, const MarketParams& p) {
    ResultRow r;
    r.experiment = s.name;
    r.policy = to_string(policy);
    r.lambda_h = p.lambda_h;
    r.lambda_e = p.lambda_e;
    r.p_h = p.p_h;
    r.p_e = p.p_e;
    r.d = p.d;
    r.arrivals = s.rc.arrivals;
    r.seed = s.rc.seed;
    r.engine = "counts";
    return r;
}

void fill(ResultRow& r, const SimSummary& sum) {
    r.mean_h = sum.mean_h;
    r.mean_e = sum.mean_e;
    r.w_h = sum.w_h;
    r.w_e = sum.w_e;
    r.chain_len = sum.chain_len_mean_given_positive;
    r.ci_half_width = sum.ci_half_width_h;
}

SimSummary simulate_counts(Policy policy, const MarketParams& p, const RunControls& rc, int replica) {
    Rng rng(replica_seed(rc.seed, static_cast<std::uint64_t>(replica)));
    return run_replica(policy, p, rc, rng);
}

struct Task {
    Policy policy;
    MarketParams p;
    int replica;
};

// Policies that ignore d are run once per grid point, at the first d.
std::vector<Task> tasks_of(const ExperimentSpec& s) {
    std::vector<Task> out;
    for (const auto& g : grid_of(s))
        for (Policy pol : s.policies) {
            if (!is_chain(pol) && g.p.d != s.d.front()) continue;
            for (int r = 0; r < s.rc.replicas; ++r) out.push_back({pol, g.p, r});
        }
    return out;
}

using RowMaker = std::function<std::vector<ResultRow>(const Task&)>;

std::vector<ResultRow> run_tasks(const ExperimentSpec& s, const std::vector<Task>& tasks, const RowMaker& make) {
    std::vector<std::vector<ResultRow>> slots(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t i) {
        try {
            slots[i] = make(tasks[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    std::vector<ResultRow> rows;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (errors[i]) {
            if (!s.output.empty()) emit_csv(rows, s.output);
            std::rethrow_exception(errors[i]);
        }
        rows.insert(rows.end(), slots[i].begin(), slots[i].end());
    }
    return rows;
}

std::vector<ResultRow> run_merging(const ExperimentSpec& s) {
    std::vector<Task> tasks;
    for (const auto& g : grid_of(s))
        for (int r = 0; r < s.rc.replicas; ++r) tasks.push_back({Policy::BILATERAL_H, g.p, r});
    std::map<std::tuple<double, double, int, int>, double> standalone;  // (p_h, p_e, d, replica) -> w_{H,1}
    std::mutex mu;
    auto w_alone = [&](const MarketParams& two, int replica) {
        MarketParams one{s.lambda_h1, s.lambda_e1, two.p_h, two.p_e, two.d};
        std::lock_guard<std::mutex> lock(mu);
        const auto key = std::make_tuple(two.p_h, two.p_e, two.d, replica);
        auto it = standalone.find(key);
        if (it != standalone.end()) return it->second;
        const double w = simulate_counts(Policy::BILATERAL_H, one, s.rc, replica).w_h;
        standalone[key] = w;
        return w;
    };
    return run_tasks(s, tasks, [&](const Task& t) {
        MarketParams merged = t.p;
        merged.lambda_h = s.lambda_h1 + t.p.lambda_h;
        merged.lambda_e = s.lambda_e1 + t.p.lambda_e;
        const SimSummary sum = simulate_counts(Policy::BILATERAL_H, merged, s.rc, t.replica);
        ResultRow r = base_row(s, Policy::BILATERAL_H, t.p);
        fill(r, sum);
        r.w_h = sum.w_h - w_alone(t.p, t.replica);
        r.w_e.reset();
        try {
            MarketParams one{s.lambda_h1, s.lambda_e1, t.p.p_h, t.p.p_e, t.p.d};
            const MergeGain g = merge_gain(one, t.p);
            if (g.delta_constant) r.theory_value = *g.delta_constant;
        } catch (const ParamError&) {
        }
        return std::vector<ResultRow>{r};
    });
}

std::vector<ResultRow> run_table1(const ExperimentSpec& s) {
    std::vector<Task> tasks;
    for (const auto& g : grid_of(s)) tasks.push_back({Policy::CHAIN, g.p, 0});
    return run_tasks(s, tasks, [&](const Task& t) {
        const Table1Result res = table1_search(t.p.lambda_h, t.p.lambda_e, t.p.p_e, t.p.d, t.p.p_h, s.rc);
        ResultRow chain = base_row(s, Policy::CHAIN, t.p);
        chain.w_h = res.w_chain;
        chain.theory_value = theory_for(Policy::CHAIN, t.p, false);
        MarketParams two = t.p;
        two.lambda_e = res.lambda_e2;
        ResultRow bil = base_row(s, Policy::BILATERAL_H, two);
        bil.w_h = res.w_bilateral;
        bil.theory_value = res.threshold;
        return std::vector<ResultRow>{chain, bil};
    });
}

std::vector<ResultRow> run_solver_vs_sim(const ExperimentSpec& s) {
    std::vector<Task> tasks;
    for (const auto& g : grid_of(s))
        for (Policy pol : s.policies) {
            tasks.push_back({pol, g.p, -1});  // CTMC row
            for (int r = 0; r < s.rc.replicas; ++r) tasks.push_back({pol, g.p, r});
        }
    return run_tasks(s, tasks, [&](const Task& t) {
        ResultRow r = base_row(s, t.policy, t.p);
        r.theory_value = theory_for(t.policy, t.p, false);
        if (t.replica >= 0) {
            fill(r, simulate_counts(t.policy, t.p, s.rc, t.replica));
            return std::vector<ResultRow>{r};
        }
        const auto dist = solve_stationary(query_for(t.policy, t.p), default_truncation(t.policy, t.p));
        const auto m = stationary_moments(dist);
        r.engine = "ctmc";
        r.arrivals = 0;
        r.mean_h = m.mean_h;
        r.mean_e = m.mean_e;
        r.w_h = little_law(m.mean_h, t.p.lambda_h);
        r.w_e = t.p.lambda_e > 0 ? little_law(m.mean_e, t.p.lambda_e) : 0.0;
        if (t.policy == Policy::CHAIN_HAT)
            r.chain_len = expected_chain_length_stationary(t.p, dist.truncation());
        else if (t.policy == Policy::CHAIN)
            r.chain_len = expected_chain_length_chain(t.p, dist.truncation());
        return std::vector<ResultRow>{r};
    });
}

}  // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
    if (spec.grid_size() == 0) throw ParamError("experiment grid is empty");
    validate_controls(spec.rc);
    if (spec.name == "merging") return run_merging(spec);
    if (spec.name == "table1-search") return run_table1(spec);
    if (spec.name == "solver-vs-sim") return run_solver_vs_sim(spec);
    const bool heuristic = spec.name == "heuristic-tightness";
    const bool graph = spec.name == "max-vs-local";
    return run_tasks(spec, tasks_of(spec), [&](const Task& t) {
        ResultRow r = base_row(spec, t.policy, t.p);
        r.theory_value = theory_for(t.policy, t.p, heuristic);
        if (graph || t.policy == Policy::MAX_CHAIN) {
            Rng rng(replica_seed(spec.rc.seed, static_cast<std::uint64_t>(t.replica)));
            GraphRunOptions opts;
            opts.search_budget = spec.search_budget;
            const GraphSummary g = run_graph_replica(t.policy, t.p, spec.rc, rng, opts);
            fill(r, g.little);
            r.engine = "graph";
        } else {
            fill(r, simulate_counts(t.policy, t.p, spec.rc, t.replica));
        }
        return std::vector<ResultRow>{r};
    });
}

Table1Result table1_search(double lambda_h, double lambda_e1, double p_e, int d, double p_h,
                           const RunControls& rc) {
    const MarketParams chain_p = validate_params({lambda_h, lambda_e1, p_h, p_e, d});
    Table1Result out;
    out.threshold = competing_rate_threshold(lambda_h, lambda_e1, p_e, d);
    const SimSummary chain = simulate_counts(Policy::CHAIN, chain_p, rc, 0);
    out.w_chain = chain.w_h;
    const double chain_hw = chain.ci_half_width_h / lambda_h;

    // Every bilateral evaluation reuses replica 1's stream.
    struct Eval {
        double diff;
        double half_width;
        double w;
    };
    auto eval = [&](double lambda_e2) {
        ++out.evaluations;
        const SimSummary b = simulate_counts(Policy::BILATERAL_H, {lambda_h, lambda_e2, p_h, p_e, d}, rc, 1);
        const double hw = std::hypot(b.ci_half_width_h / lambda_h, chain_hw);
        return Eval{b.w_h - out.w_chain, hw, b.w_h};
    };

    double lo = out.threshold, hi = 50.0 * out.threshold;
    const Eval at_lo = eval(lo);
    const Eval at_hi = eval(hi);
    // When the root sits at the threshold itself (p_e = 1) the lower end is
    // a coin flip; inside the CI that is an undecided answer, not an error.
    if (at_lo.diff <= 0.0 && -at_lo.diff <= at_lo.half_width && at_hi.diff < 0.0) {
        out.decided = false;
        out.bracket_lo = out.bracket_hi = out.lambda_e2 = lo;
        out.w_bilateral = at_lo.w;
        return out;
    }
    if (!(at_lo.diff > 0.0 && at_hi.diff < 0.0))
        throw NumericError("table1_search: bracket [threshold, 50 x threshold] does not straddle a sign change");
    Eval last = at_lo;
    while (hi - lo > 0.05) {
        const double mid = 0.5 * (lo + hi);
        last = eval(mid);
        if (std::abs(last.diff) <= last.half_width) {
            out.decided = false;
            out.bracket_lo = lo;
            out.bracket_hi = hi;
            out.lambda_e2 = mid;
            out.w_bilateral = last.w;
            return out;
        }
        (last.diff > 0.0 ? lo : hi) = mid;
    }
    out.bracket_lo = lo;
    out.bracket_hi = hi;
    out.lambda_e2 = 0.5 * (lo + hi);
    out.w_bilateral = eval(out.lambda_e2).w;
    return out;
}

const char* const kCsvHeader =
    "experiment,policy,lambda_h,lambda_e,p_h,p_e,d,arrivals,seed,mean_h,mean_e,w_h,w_e,chain_len,"
    "ci_half_width,theory_value,engine";

namespace {

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string opt(const std::optional<double>& x) { return x ? num(*x) : ""; }

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
}

}  // namespace

std::string format_csv(const std::vector<ResultRow>& rows) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : rows) {
        out += r.experiment + "," + r.policy + "," + num(r.lambda_h) + "," + num(r.lambda_e) + "," +
               num(r.p_h) + "," + num(r.p_e) + "," + std::to_string(r.d) + "," +
               std::to_string(r.arrivals) + "," + std::to_string(r.seed) + "," + opt(r.mean_h) + "," +
               opt(r.mean_e) + "," + opt(r.w_h) + "," + opt(r.w_e) + "," + opt(r.chain_len) + "," +
               opt(r.ci_half_width) + "," + opt(r.theory_value) + "," + r.engine + "\n";
    }
    return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != kCsvHeader) throw ParamError("parse_csv: header mismatch");
    std::vector<ResultRow> rows;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 17) throw ParamError("parse_csv: expected 17 fields");
        ResultRow r;
        r.experiment = f[0];
        r.policy = f[1];
        r.lambda_h = std::stod(f[2]);
        r.lambda_e = std::stod(f[3]);
        r.p_h = std::stod(f[4]);
        r.p_e = std::stod(f[5]);
        r.d = std::stoi(f[6]);
        r.arrivals = std::stoll(f[7]);
        r.seed = std::stoull(f[8]);
        r.mean_h = parse_opt(f[9]);
        r.mean_e = parse_opt(f[10]);
        r.w_h = parse_opt(f[11]);
        r.w_e = parse_opt(f[12]);
        r.chain_len = parse_opt(f[13]);
        r.ci_half_width = parse_opt(f[14]);
        r.theory_value = parse_opt(f[15]);
        r.engine = f[16];
        rows.push_back(std::move(r));
    }
    return rows;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << format_csv(rows);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace hem
