// hem: command-line front end to the matching-market engines.
#include "hem/ctmc.hpp"
#include "hem/experiments.hpp"
#include "hem/sim_counts.hpp"
#include "hem/sim_graph.hpp"
#include "hem/theory.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

enum Exit { OK = 0, CONFIG = 2, NUMERIC = 3, IO = 4 };

struct MarketArgs {
    double lambda_h = 1.0;
    double lambda_e = 2.0;
    double p_h = 0.02;
    double p_e = 0.5;
    int d = 1;
    std::string policy = "BILATERAL_H";

    hem::MarketParams params() const { return {lambda_h, lambda_e, p_h, p_e, d}; }
};

void add_market(CLI::App* app, MarketArgs& m) {
    app->add_option("--lambda-h", m.lambda_h, "H arrival rate")->capture_default_str();
    app->add_option("--lambda-e", m.lambda_e, "E arrival rate")->capture_default_str();
    app->add_option("--p-h", m.p_h, "compatibility probability of H agents")->capture_default_str();
    app->add_option("--p-e", m.p_e, "compatibility probability of E agents")->capture_default_str();
    app->add_option("-d,--bridges", m.d, "bridge agents for chain policies")->capture_default_str();
    app->add_option("--policy", m.policy, "BILATERAL_H, BILATERAL_E, CHAIN, CHAIN_HAT, BILATERAL_E_TILDE or MAX_CHAIN")->capture_default_str();
}

void print_kv(const char* key, double v) { std::printf("%s=%.10g\n", key, v); }

void print_limit(const char* key, const hem::LimitResult& r) {
    std::printf("%s=%.10g scaling=%s kind=%s\n", key, r.constant, hem::to_string(r.scaling).c_str(),
                hem::to_string(r.kind).c_str());
}

hem::ResultRow row_of(const std::string& experiment, const std::string& engine, hem::Policy policy,
                      const hem::MarketParams& p, const hem::RunControls& rc, const hem::SimSummary& s) {
    hem::ResultRow r;
    r.experiment = experiment;
    r.policy = hem::to_string(policy);
    r.lambda_h = p.lambda_h;
    r.lambda_e = p.lambda_e;
    r.p_h = p.p_h;
    r.p_e = p.p_e;
    r.d = p.d;
    r.arrivals = rc.arrivals;
    r.seed = rc.seed;
    r.mean_h = s.mean_h;
    r.mean_e = s.mean_e;
    r.w_h = s.w_h;
    r.w_e = s.w_e;
    r.chain_len = s.chain_len_mean_given_positive;
    r.ci_half_width = s.ci_half_width_h;
    r.engine = engine;
    return r;
}

void write_rows(const std::vector<hem::ResultRow>& rows, const std::string& out) {
    if (out.empty())
        std::cout << hem::format_csv(rows);
    else
        hem::emit_csv(rows, out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate, solve and bound waiting times in hard/easy matching markets"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config;
    std::uint64_t seed = 1;
    std::int64_t arrivals = 0;
    std::string out;
    bool quick = false;
    app.add_option("--config", config, "key = value experiment config");
    app.add_option("--seed", seed, "base seed")->capture_default_str();
    app.add_option("--arrivals", arrivals, "arrivals per replica (overrides config)");
    app.add_option("--out", out, "CSV output path (stdout when absent)");
    app.add_flag("--quick", quick, "divide the arrival budget by 20");

    MarketArgs sim_m;
    std::string engine = "counts";
    int replicas = 1;
    auto* sim = app.add_subcommand("simulate", "run replicas of one policy");
    add_market(sim, sim_m);
    sim->add_option("--engine", engine, "counts or graph")->check(CLI::IsMember({"counts", "graph"}));
    sim->add_option("--replicas", replicas, "independent replicas")->capture_default_str();

    MarketArgs solve_m;
    bool allow_boundary = false;
    int h_max = 0, e_max = -1;
    auto* solve = app.add_subcommand("solve", "stationary distribution of the truncated CTMC");
    add_market(solve, solve_m);
    solve->add_option("--h-max", h_max, "H truncation (0: automatic)");
    solve->add_option("--e-max", e_max, "E truncation (-1: automatic)");
    solve->add_flag("--allow-boundary-mass", allow_boundary, "report rather than fail on boundary mass");

    MarketArgs th_m;
    auto* theory = app.add_subcommand("theory", "limiting constants and thresholds");
    add_market(theory, th_m);

    std::string exp_name;
    auto* exp = app.add_subcommand("experiment", "run a named experiment grid");
    exp->add_option("name", exp_name, "experiment name")->check(CLI::IsMember(hem::experiment_names()));

    MarketArgs cp_m;
    std::string which;
    auto* couple = app.add_subcommand("couple", "run a coupled pair and count dominance violations");
    couple->add_option("which", which, "chain or bilateral-e")->required()->check(CLI::IsMember({"chain", "bilateral-e"}));
    add_market(couple, cp_m);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? OK : CONFIG;
    }

    auto controls = [&] {
        hem::RunControls rc;
        rc.seed = seed;
        rc.arrivals = arrivals > 0 ? arrivals : 1'000'000;
        if (quick) rc.arrivals = std::max<std::int64_t>(rc.arrivals / 20, 40);
        return rc;
    };

    try {
        if (*sim) {
            const auto p = hem::validate_params(sim_m.params());
            const auto policy = hem::parse_policy(sim_m.policy);
            auto rc = controls();
            rc.replicas = replicas;
            hem::validate_controls(rc);
            std::vector<hem::ResultRow> rows;
            const bool graph = engine == "graph" || policy == hem::Policy::MAX_CHAIN;
            for (int i = 0; i < rc.replicas; ++i) {
                hem::Rng rng(hem::replica_seed(rc.seed, static_cast<std::uint64_t>(i)));
                const hem::SimSummary s = graph ? hem::run_graph_replica(policy, p, rc, rng).little
                                                : hem::run_replica(policy, p, rc, rng);
                rows.push_back(row_of("simulate", graph ? "graph" : "counts", policy, p, rc, s));
            }
            write_rows(rows, out);
        } else if (*solve) {
            const auto p = hem::validate_params(solve_m.params());
            const auto policy = hem::parse_policy(solve_m.policy);
            auto trunc = hem::default_truncation(policy, p);
            if (h_max > 0) trunc.h_max = h_max;
            if (e_max >= 0) trunc.e_max = e_max;
            hem::SolveOptions opts;
            opts.allow_boundary_mass = allow_boundary;
            const auto dist = hem::solve_stationary(hem::query_for(policy, p), trunc, opts);
            const auto m = hem::stationary_moments(dist);
            print_kv("mean_h", m.mean_h);
            print_kv("mean_e", m.mean_e);
            print_kv("w_h", hem::little_law(m.mean_h, p.lambda_h));
            if (p.lambda_e > 0) print_kv("w_e", hem::little_law(m.mean_e, p.lambda_e));
            print_kv("h_max", trunc.h_max);
            print_kv("e_max", trunc.e_max);
            print_kv("residual", dist.residual);
            print_kv("boundary_mass", dist.boundary_mass);
            if (policy == hem::Policy::CHAIN_HAT)
                print_kv("chain_len", hem::expected_chain_length_stationary(p, trunc));
            else if (policy == hem::Policy::CHAIN)
                print_kv("chain_len", hem::expected_chain_length_chain(p, trunc));
        } else if (*theory) {
            const auto p = hem::validate_params(th_m.params());
            std::printf("regime=%s\n", hem::to_string(hem::regime(p)).c_str());
            print_kv("critical_ratio", hem::critical_ratio());
            if (hem::regime(p) == hem::Regime::BALANCED) return OK;
            print_limit("B_H", hem::limit_bilateral_h(p));
            const auto b = hem::bounds_bilateral_e(p);
            print_limit("B_E.lower", b.lower);
            print_limit("B_E.upper", b.upper);
            print_limit("B_E.heuristic", b.heuristic);
            if (p.lambda_e > 0) {
                print_limit("C.bound", hem::bound_chain(p));
                print_limit("C.heuristic", hem::heuristic_chain_constant(p));
                print_kv("chain_len_limit", hem::chain_length_limit(p));
                print_kv("competing_rate_threshold",
                         hem::competing_rate_threshold(p.lambda_h, p.lambda_e, p.p_e, p.d));
            }
        } else if (*exp) {
            hem::ExperimentSpec spec;
            if (!config.empty()) {
                spec = hem::load_config(config);
                if (!exp_name.empty() && exp_name != spec.name)
                    throw hem::ConfigError("config names '" + spec.name + "' but '" + exp_name + "' was requested", 0);
            } else if (!exp_name.empty()) {
                spec = hem::default_spec(exp_name);
            } else {
                throw hem::ConfigError("experiment needs a name or --config", 0);
            }
            spec.rc.seed = app.count("--seed") ? seed : spec.rc.seed;
            if (arrivals > 0) spec.rc.arrivals = arrivals;
            if (quick) spec.rc.arrivals = std::max<std::int64_t>(spec.rc.arrivals / 20, 40);
            if (!out.empty()) spec.output = out;
            const auto rows = hem::run_experiment(spec);
            write_rows(rows, spec.output);
        } else if (*couple) {
            const auto p = hem::validate_params(cp_m.params());
            const auto rc = controls();
            hem::Rng rng(hem::replica_seed(rc.seed, 0));
            const auto tr = which == "chain" ? hem::run_coupled_chain(p, rc, rng)
                                             : hem::run_coupled_bilateral_e(p, rc, rng);
            print_kv("violations", static_cast<double>(tr.violation_count));
            print_kv("case_a", static_cast<double>(tr.case_counts[0]));
            print_kv("case_b", static_cast<double>(tr.case_counts[1]));
            print_kv("case_c", static_cast<double>(tr.case_counts[2]));
            print_kv("first_mean_h", tr.first_summary.mean_h);
            print_kv("first_mean_e", tr.first_summary.mean_e);
            print_kv("second_mean_h", tr.second_summary.mean_h);
        }
    } catch (const hem::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return IO;
    } catch (const hem::ParamError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return CONFIG;
    } catch (const hem::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return NUMERIC;
    }
    return OK;
}
