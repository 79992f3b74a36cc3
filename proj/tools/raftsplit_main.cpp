#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "raftsplit/cli.hpp"

namespace {

using raftsplit::Fidelity;
using raftsplit::OutputFormat;
using raftsplit::RunConfig;

/// Raw flag values; list-shaped flags stay strings until the subcommand
/// decides how to interpret them.
struct Flags {
    std::string nodes;
    std::string loss;
    std::string timeout_steps;
    std::string timeout_range;
    double heartbeat_ms = 50.0;
    std::string latency = "0.5:10";
    std::string fidelity = "lockstep";
    std::int64_t trials = 10000;
    std::uint64_t seed = 1;
    std::int64_t max_steps = 1000000;
    double epsilon = 1e-9;
    std::int64_t step_cap = 5000000;
    double ks_threshold = 0.03;
    std::string format = "csv";
    std::string out;
    std::string config_path;
};

void add_model_flags(CLI::App* sub, Flags& f, bool with_range) {
    // presence is checked after the config-file merge, not by the parser,
    // so either source can provide these
    sub->add_option("--nodes", f.nodes, "Cluster size N (comma list for sweep)");
    sub->add_option("--loss", f.loss, "Per-message loss probability p (comma list for sweep)");
    sub->add_option("--timeout-steps", f.timeout_steps,
                    "Election timeouts in heartbeat steps, e.g. 3 or 2,3");
    if (with_range)
        sub->add_option("--timeout-range-ms", f.timeout_range,
                        "Election timeout range lo:hi in ms");
    sub->add_option("--heartbeat-ms", f.heartbeat_ms, "Heartbeat interval h in ms")
        ->capture_default_str();
}

void add_sim_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--latency-ms", f.latency, "One-way latency range lo:hi in ms")
        ->capture_default_str();
    sub->add_option("--fidelity", f.fidelity, "lockstep or timed")
        ->capture_default_str();
    sub->add_option("--trials", f.trials, "Number of trials")->capture_default_str();
    sub->add_option("--seed", f.seed, "Master seed")->capture_default_str();
    sub->add_option("--max-steps", f.max_steps, "Censoring horizon in heartbeat steps")
        ->capture_default_str();
}

void add_analysis_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--epsilon", f.epsilon, "Tail mass where the curve stops")
        ->capture_default_str();
    sub->add_option("--step-cap", f.step_cap, "Hard cap on evaluated steps")
        ->capture_default_str();
}

void add_output_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--format", f.format, "csv or json")->capture_default_str();
    sub->add_option("--out", f.out, "Output file (default: document on stdout)");
    sub->add_option("--config", f.config_path,
                    "Flat key=value file; explicit flags take precedence");
}

int parse_single_int(const std::string& text, const char* what) {
    const std::vector<int> values = raftsplit::parse_int_list(text);
    if (values.size() != 1)
        throw std::invalid_argument(std::string(what) + " takes a single value here");
    return values.front();
}

double parse_single_double(const std::string& text, const char* what) {
    const std::vector<double> values = raftsplit::parse_double_list(text);
    if (values.size() != 1)
        throw std::invalid_argument(std::string(what) + " takes a single value here");
    return values.front();
}

OutputFormat parse_format(const std::string& text) {
    if (text == "csv") return OutputFormat::csv;
    if (text == "json") return OutputFormat::json;
    throw std::invalid_argument("--format must be csv or json");
}

Fidelity parse_fidelity(const std::string& text) {
    if (text == "lockstep") return Fidelity::lockstep;
    if (text == "timed") return Fidelity::timed;
    throw std::invalid_argument("--fidelity must be lockstep or timed");
}

/// Resolve --timeout-steps / --timeout-range-ms into model steps and (when
/// the simulator is involved) a concrete range. A bare step list must be
/// consecutive before it can stand in for a contiguous range.
struct TimeoutSpec {
    std::vector<int> steps;
    std::pair<double, double> range{0.0, 0.0};
    bool have_range = false;
};

TimeoutSpec resolve_timeouts(const Flags& f, bool for_sim) {
    TimeoutSpec spec;
    const bool have_steps = !f.timeout_steps.empty();
    spec.have_range = !f.timeout_range.empty();
    if (!have_steps && !spec.have_range)
        throw std::invalid_argument("give --timeout-steps or --timeout-range-ms");

    if (spec.have_range) spec.range = raftsplit::parse_ms_range(f.timeout_range);
    if (have_steps) spec.steps = raftsplit::parse_int_list(f.timeout_steps);

    if (!have_steps) {
        const int lo = static_cast<int>(std::floor(spec.range.first / f.heartbeat_ms));
        const int hi = static_cast<int>(std::floor(spec.range.second / f.heartbeat_ms));
        if (lo < 1 || hi < lo)
            throw std::invalid_argument(
                "timeout range must cover at least one heartbeat interval");
        for (int k = lo; k <= hi; ++k) spec.steps.push_back(k);
    }

    if (for_sim && !spec.have_range) {
        for (std::size_t i = 1; i < spec.steps.size(); ++i)
            if (spec.steps[i] != spec.steps[i - 1] + 1)
                throw std::invalid_argument(
                    "simulation needs consecutive timeout steps (they mirror a "
                    "contiguous timeout range); give --timeout-range-ms instead");
        spec.range = {spec.steps.front() * f.heartbeat_ms,
                      spec.steps.back() * f.heartbeat_ms};
        spec.have_range = true;
    }
    return spec;
}

void require_node_and_loss(const Flags& f) {
    if (f.nodes.empty())
        throw std::invalid_argument("--nodes is required (flag or config file)");
    if (f.loss.empty())
        throw std::invalid_argument("--loss is required (flag or config file)");
}

RunConfig build_model_config(const Flags& f, bool for_sim) {
    require_node_and_loss(f);
    RunConfig rc;
    rc.model.n_nodes = parse_single_int(f.nodes, "--nodes");
    rc.model.loss_rate = parse_single_double(f.loss, "--loss");
    rc.model.heartbeat_interval_ms = f.heartbeat_ms;
    const TimeoutSpec spec = resolve_timeouts(f, for_sim);
    rc.model.timeout_steps = spec.steps;

    rc.sim.n_nodes = rc.model.n_nodes;
    rc.sim.loss_rate = rc.model.loss_rate;
    rc.sim.heartbeat_interval_ms = f.heartbeat_ms;
    if (spec.have_range) rc.sim.timeout_range_ms = spec.range;
    rc.sim.latency_range_ms = raftsplit::parse_ms_range(f.latency);
    rc.sim.fidelity = parse_fidelity(f.fidelity);
    rc.sim.trials = f.trials;
    rc.sim.master_seed = f.seed;
    rc.sim.max_steps = f.max_steps;

    rc.epsilon = f.epsilon;
    rc.step_cap = f.step_cap;
    rc.ks_threshold = f.ks_threshold;
    rc.format = parse_format(f.format);
    rc.output_path = f.out;
    return rc;
}

std::string strip(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_config_number(const std::string& value, const std::string& key,
                      T (*convert)(const std::string&, std::size_t*)) {
    std::size_t used = 0;
    T parsed{};
    try {
        parsed = convert(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size())
        throw std::invalid_argument("config key '" + key + "': bad value '" +
                                    value + "'");
    return parsed;
}

long long config_i64(const std::string& v, const std::string& k) {
    return parse_config_number<long long>(
        v, k, [](const std::string& s, std::size_t* u) { return std::stoll(s, u); });
}

unsigned long long config_u64(const std::string& v, const std::string& k) {
    return parse_config_number<unsigned long long>(
        v, k, [](const std::string& s, std::size_t* u) { return std::stoull(s, u); });
}

double config_f64(const std::string& v, const std::string& k) {
    return parse_config_number<double>(
        v, k, [](const std::string& s, std::size_t* u) { return std::stod(s, u); });
}

/// Flat key=value document; keys are the long flag names without the
/// leading dashes. Blank lines and #-comments are skipped. A key only
/// applies when its flag exists on the active subcommand and was not given
/// explicitly, so the command line always wins.
void apply_config_file(CLI::App* sub, Flags& f) {
    std::ifstream in(f.config_path);
    if (!in)
        throw std::invalid_argument("cannot read config file: " + f.config_path);

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = strip(line);
        if (text.empty() || text.front() == '#') continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        " is not key=value: '" + text + "'");
        const std::string key = strip(text.substr(0, eq));
        std::string value = strip(text.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key == "config")
            throw std::invalid_argument("config files cannot nest");

        const CLI::Option* option = sub->get_option_no_throw("--" + key);
        if (option == nullptr)
            throw std::invalid_argument("config key '" + key +
                                        "' does not apply to this command");
        if (option->count() > 0) continue;  // explicit flag takes precedence

        if (key == "nodes") f.nodes = value;
        else if (key == "loss") f.loss = value;
        else if (key == "timeout-steps") f.timeout_steps = value;
        else if (key == "timeout-range-ms") f.timeout_range = value;
        else if (key == "heartbeat-ms") f.heartbeat_ms = config_f64(value, key);
        else if (key == "latency-ms") f.latency = value;
        else if (key == "fidelity") f.fidelity = value;
        else if (key == "trials") f.trials = config_i64(value, key);
        else if (key == "seed") f.seed = config_u64(value, key);
        else if (key == "max-steps") f.max_steps = config_i64(value, key);
        else if (key == "epsilon") f.epsilon = config_f64(value, key);
        else if (key == "step-cap") f.step_cap = config_i64(value, key);
        else if (key == "ks-threshold") f.ks_threshold = config_f64(value, key);
        else if (key == "format") f.format = value;
        else if (key == "out") f.out = value;
        else
            throw std::invalid_argument("config key '" + key + "' is not supported");
    }
}

RunConfig build_sweep_config(const Flags& f) {
    require_node_and_loss(f);
    RunConfig rc;
    rc.sweep_nodes = raftsplit::parse_int_list(f.nodes);
    rc.sweep_loss = raftsplit::parse_double_list(f.loss);
    if (f.timeout_steps.empty())
        throw std::invalid_argument("sweep needs --timeout-steps");
    rc.sweep_timeouts = raftsplit::parse_int_list(f.timeout_steps);
    rc.model.heartbeat_interval_ms = f.heartbeat_ms;
    rc.epsilon = f.epsilon;
    rc.step_cap = f.step_cap;
    rc.format = parse_format(f.format);
    rc.output_path = f.out;
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Absorbing-chain model and discrete-event simulator for Raft "
        "leader-election stability under packet loss"};
    app.require_subcommand(1);

    Flags flags;

    CLI::App* analyze = app.add_subcommand(
        "analyze", "Per-step absorption and split-step distributions");
    add_model_flags(analyze, flags, /*with_range=*/true);
    add_analysis_flags(analyze, flags);
    add_output_flags(analyze, flags);

    CLI::App* simulate = app.add_subcommand(
        "simulate", "Seeded election trials with per-trial output");
    add_model_flags(simulate, flags, /*with_range=*/true);
    add_sim_flags(simulate, flags);
    add_output_flags(simulate, flags);

    CLI::App* compare = app.add_subcommand(
        "compare", "Overlay the analytical and simulated split CDFs");
    add_model_flags(compare, flags, /*with_range=*/true);
    add_sim_flags(compare, flags);
    add_analysis_flags(compare, flags);
    compare->add_option("--ks-threshold", flags.ks_threshold,
                        "Largest acceptable KS distance")
        ->capture_default_str();
    add_output_flags(compare, flags);

    CLI::App* sweep = app.add_subcommand(
        "sweep", "Split moments over a (nodes, timeout, loss) grid");
    add_model_flags(sweep, flags, /*with_range=*/false);
    add_analysis_flags(sweep, flags);
    add_output_flags(sweep, flags);

    CLI::App* chain_cmd = app.add_subcommand(
        "chain", "Dump the transition matrix blocks and their diagnostics");
    add_model_flags(chain_cmd, flags, /*with_range=*/true);
    add_output_flags(chain_cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        CLI::App* active = analyze->parsed()    ? analyze
                           : simulate->parsed() ? simulate
                           : compare->parsed()  ? compare
                           : sweep->parsed()    ? sweep
                                                : chain_cmd;
        if (!flags.config_path.empty()) apply_config_file(active, flags);

        if (analyze->parsed())
            return raftsplit::cmd_analyze(build_model_config(flags, false));
        if (simulate->parsed())
            return raftsplit::cmd_simulate(build_model_config(flags, true));
        if (compare->parsed())
            return raftsplit::cmd_compare(build_model_config(flags, true));
        if (sweep->parsed())
            return raftsplit::cmd_sweep(build_sweep_config(flags));
        if (chain_cmd->parsed())
            return raftsplit::cmd_chain(build_model_config(flags, false));
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
