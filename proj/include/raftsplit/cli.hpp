#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "raftsplit/chain.hpp"
#include "raftsplit/sim.hpp"

namespace raftsplit {

enum class OutputFormat { csv, json };

/// Everything a subcommand needs, assembled by the flag parser. With an
/// output path the table document goes to the file and a key = value
/// summary to stdout; with no path the document itself goes to stdout and
/// the summary to stderr, so piped output stays parseable.
struct RunConfig {
    ModelParams model;
    SimConfig sim;
    std::string output_path;
    OutputFormat format = OutputFormat::csv;
    double epsilon = 1e-9;
    std::int64_t step_cap = 5000000;
    double ks_threshold = 0.03;

    // sweep grids (single-timeout points)
    std::vector<int> sweep_nodes;
    std::vector<double> sweep_loss;
    std::vector<int> sweep_timeouts;
};

/// Subcommand bodies. Each returns the process exit code: 0 on success, 2
/// when compare's KS distance exceeds the threshold. Configuration errors
/// surface as std::invalid_argument (mapped to exit 1 by the CLI main),
/// computational failures — singular matrices, loss rate 0, all trials
/// censored — as std::domain_error (exit 3).
int cmd_analyze(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_compare(const RunConfig& config);
int cmd_sweep(const RunConfig& config);
int cmd_chain(const RunConfig& config);

/// "out.csv" -> "out_cdf.csv" (no extension: append "_cdf"); where the
/// simulate command puts the empirical CDF next to the per-trial table.
std::string derived_cdf_path(const std::string& out_path);

/// Flag-string parsers ("2,3", "0.1,0.2", "150:300"). Throw
/// std::invalid_argument on malformed input.
std::vector<int> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);
std::pair<double, double> parse_ms_range(const std::string& text);

} // namespace raftsplit
