#pragma once

#include "hem/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hem {

/// Config problem; `line` is 0 when the problem is not tied to a line.
class ConfigError : public ParamError {
public:
    ConfigError(const std::string& what, int line)
        : ParamError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::string>& experiment_names();

struct ExperimentSpec {
    std::string name;
    std::vector<double> lambda_h;
    std::vector<double> lambda_e;
    std::vector<double> p_h;
    std::vector<double> p_e;
    std::vector<int> d;
    std::vector<Policy> policies;
    RunControls rc;
    std::string output;
    // Market one of the merging experiment.
    double lambda_h1 = 1.0;
    double lambda_e1 = 1.3;
    std::int64_t search_budget = 10'000'000;

    std::size_t grid_size() const {
        return lambda_h.size() * lambda_e.size() * p_h.size() * p_e.size() * d.size();
    }
};

/// Parameters of the corresponding figure or table.
ExperimentSpec default_spec(const std::string& name);

/// Plain `key = value` lines, comma-separated lists, `#` comments. Keys not
/// given keep the defaults of the named experiment.
ExperimentSpec parse_config(const std::string& text);
ExperimentSpec load_config(const std::string& path);

struct ResultRow {
    std::string experiment;
    std::string policy;
    double lambda_h = 0.0;
    double lambda_e = 0.0;
    double p_h = 0.0;
    double p_e = 0.0;
    int d = 0;
    std::int64_t arrivals = 0;
    std::uint64_t seed = 0;
    std::optional<double> mean_h;
    std::optional<double> mean_e;
    std::optional<double> w_h;
    std::optional<double> w_e;
    std::optional<double> chain_len;
    std::optional<double> ci_half_width;
    std::optional<double> theory_value;
    std::string engine;  // counts | graph | ctmc
};

/// Runs every grid point, policy and replica; when spec.output is set and
/// an engine fails, the rows finished before it are written first.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

struct Table1Result {
    double lambda_e2 = 0.0;
    bool decided = true;  // false when noise stopped the bisection early
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    double threshold = 0.0;  // necessary condition
    double w_chain = 0.0;
    double w_bilateral = 0.0;  // at the returned lambda_e2
    int evaluations = 0;
};

/// Smallest lambda_e2 at which bilateral matching with lambda_e2 easy agents
/// serves H agents as well as chains with lambda_e1.
Table1Result table1_search(double lambda_h, double lambda_e1, double p_e, int d, double p_h,
                           const RunControls& rc);

extern const char* const kCsvHeader;
std::string format_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(const std::string& text);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);

}  // namespace hem
