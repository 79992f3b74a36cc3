#include "raftsplit/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "raftsplit/analysis.hpp"
#include "raftsplit/report.hpp"
#include "raftsplit/stats.hpp"

namespace raftsplit {

namespace {

constexpr double kTransienceTolerance = 1e-12;
constexpr std::size_t kTransienceMaxPower = std::size_t{1} << 50;

/// The summary always stays readable on a terminal: stdout when the
/// document went to a file, stderr when the document itself is on stdout.
std::ostream& summary_stream(const RunConfig& config) {
    return config.output_path.empty() ? std::cerr : std::cout;
}

void emit_csv_document(const std::string& content, const std::string& path) {
    if (path.empty())
        std::cout << content;
    else
        write_text_file(path, content);
}

void emit_json_document(const RunConfig& config, const nlohmann::json& doc) {
    const std::string content = doc.dump(2) + "\n";
    if (config.output_path.empty())
        std::cout << content;
    else
        write_text_file(config.output_path, content);
}

std::string fidelity_name(Fidelity f) {
    return f == Fidelity::lockstep ? "lockstep" : "timed";
}

nlohmann::json model_config_json(const ModelParams& model) {
    return {{"nodes", model.n_nodes},
            {"loss_rate", model.loss_rate},
            {"timeout_steps", model.timeout_steps},
            {"heartbeat_ms", model.heartbeat_interval_ms}};
}

nlohmann::json sim_config_json(const SimConfig& sim) {
    return {{"nodes", sim.n_nodes},
            {"loss_rate", sim.loss_rate},
            {"heartbeat_ms", sim.heartbeat_interval_ms},
            {"timeout_range_ms", {sim.timeout_range_ms.first, sim.timeout_range_ms.second}},
            {"latency_ms", {sim.latency_range_ms.first, sim.latency_range_ms.second}},
            {"fidelity", fidelity_name(sim.fidelity)},
            {"trials", sim.trials},
            {"seed", sim.master_seed},
            {"max_steps", sim.max_steps}};
}

/// Model and simulator describe the same physical scenario; reject any
/// drift before computing anything.
void check_model_sim_consistency(const RunConfig& config) {
    const ModelParams& m = config.model;
    const SimConfig& s = config.sim;
    if (m.n_nodes != s.n_nodes || m.loss_rate != s.loss_rate ||
        m.heartbeat_interval_ms != s.heartbeat_interval_ms)
        throw std::invalid_argument(
            "model and simulator disagree on nodes, loss rate, or heartbeat interval");
    if (m.timeout_steps != s.lockstep_timeout_steps())
        throw std::invalid_argument(
            "timeout steps and timeout range describe different timeout sets");
}

void append_matrix_rows(Table& table, const std::string& name, const Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            table.rows.push_back({name, static_cast<std::int64_t>(r),
                                  static_cast<std::int64_t>(c), m(r, c)});
}

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    if (!text.empty() && text.back() == sep) parts.push_back("");
    return parts;
}

} // namespace

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const std::string& part : split_on(text, ',')) {
        std::size_t used = 0;
        int value = 0;
        try {
            value = std::stoi(part, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("not an integer: '" + part + "'");
        }
        if (used != part.size())
            throw std::invalid_argument("not an integer: '" + part + "'");
        out.push_back(value);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const std::string& part : split_on(text, ',')) {
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(part, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("not a number: '" + part + "'");
        }
        if (used != part.size())
            throw std::invalid_argument("not a number: '" + part + "'");
        out.push_back(value);
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::pair<double, double> parse_ms_range(const std::string& text) {
    const std::vector<std::string> parts = split_on(text, ':');
    if (parts.size() != 2)
        throw std::invalid_argument("range must look like lo:hi, got '" + text + "'");
    const auto one = [](const std::string& part) {
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(part, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("not a number: '" + part + "'");
        }
        if (used != part.size())
            throw std::invalid_argument("not a number: '" + part + "'");
        return value;
    };
    return {one(parts[0]), one(parts[1])};
}

std::string derived_cdf_path(const std::string& out_path) {
    const std::size_t slash = out_path.find_last_of('/');
    const std::size_t dot = out_path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return out_path + "_cdf";
    return out_path.substr(0, dot) + "_cdf" + out_path.substr(dot);
}

int cmd_analyze(const RunConfig& config) {
    config.model.validate();
    const ModelEvaluation ev =
        evaluate_model(config.model, config.epsilon,
                       static_cast<std::size_t>(config.step_cap));

    Table table;
    table.columns = {"step", "absorption_prob", "split_cdf", "split_pdf",
                     "split_cdf_poisson"};
    for (std::size_t n = 0; n < ev.curve.values.size(); ++n)
        table.rows.push_back({static_cast<std::int64_t>(n), ev.curve.values[n],
                              ev.binomial.cdf[n], ev.binomial.pdf[n],
                              ev.poisson.cdf[n]});

    SummaryItems summary{
        {"mean_steps", ev.binomial.mean_steps},
        {"variance_steps", ev.binomial.variance_steps},
        {"mean_time_ms", ev.binomial.mean_steps * config.model.heartbeat_interval_ms},
        {"n11", ev.fm.expected_heartbeats},
        {"t_c", ev.fm.time_to_candidate_steps},
        {"t_in", ev.fm.mean_receipt_interval_steps},
        {"truncation_step", static_cast<std::int64_t>(ev.binomial.truncation_step)},
        {"truncated_tail_mass", ev.binomial.truncated_tail_mass},
        {"truncated", ev.binomial.capped},
    };

    if (config.format == OutputFormat::csv) {
        emit_csv_document(to_csv(table), config.output_path);
    } else {
        nlohmann::json doc{{"config", model_config_json(config.model)},
                           {"rows", table_to_json(table)},
                           {"summary", summary_to_json(summary)}};
        doc["config"]["epsilon"] = config.epsilon;
        doc["config"]["step_cap"] = config.step_cap;
        emit_json_document(config, doc);
    }
    summary_stream(config) << summary_to_text(summary);
    return 0;
}

int cmd_simulate(const RunConfig& config) {
    config.sim.validate();
    const std::vector<TrialOutcome> outcomes = run_batch(config.sim);

    Table trials;
    trials.columns = {"trial", "split_step", "split_time_ms", "censored", "seed"};
    for (std::size_t i = 0; i < outcomes.size(); ++i)
        trials.rows.push_back({static_cast<std::int64_t>(i), outcomes[i].split_step,
                               outcomes[i].split_time_ms, outcomes[i].censored,
                               outcomes[i].seed});

    const bool all_censored = std::all_of(
        outcomes.begin(), outcomes.end(),
        [](const TrialOutcome& out) { return out.censored; });

    if (all_censored) {
        // the per-trial table is still useful evidence, so write it before
        // reporting the degenerate batch
        SummaryItems summary{
            {"trials", static_cast<std::int64_t>(outcomes.size())},
            {"censored_count", static_cast<std::int64_t>(outcomes.size())},
            {"note", std::string("every trial was censored; no split distribution")},
        };
        if (config.format == OutputFormat::csv) {
            emit_csv_document(to_csv(trials), config.output_path);
        } else {
            nlohmann::json doc{{"config", sim_config_json(config.sim)},
                               {"rows", table_to_json(trials)},
                               {"summary", summary_to_json(summary)}};
            emit_json_document(config, doc);
        }
        summary_stream(config) << summary_to_text(summary);
        return 3;
    }

    const EmpiricalCdf cdf = empirical_cdf(outcomes);
    Table cdf_table;
    cdf_table.columns = {"step", "empirical_cdf"};
    for (std::size_t i = 0; i < cdf.steps.size(); ++i)
        cdf_table.rows.push_back({cdf.steps[i], cdf.probabilities[i]});

    const Summary stats = summarize(outcomes);
    const HeartbeatStats hb = empirical_heartbeat_stats(outcomes);
    SummaryItems summary{
        {"trials", stats.sample_count},
        {"censored_count", stats.censored_count},
        {"mean_steps", stats.mean},
        {"variance_steps", stats.variance},
    };
    for (const auto& [q, v] : stats.quantiles) {
        std::ostringstream key;
        key << "q" << static_cast<int>(std::lround(q * 100));
        summary.emplace_back(key.str(), v);
    }
    summary.emplace_back("mean_heartbeats", hb.mean_heartbeats);
    summary.emplace_back("mean_receipt_interval_steps", hb.mean_receipt_interval_steps);
    summary.emplace_back("zero_receipt_pairs", hb.zero_receipt_pairs);

    if (config.format == OutputFormat::csv) {
        emit_csv_document(to_csv(trials), config.output_path);
        if (config.output_path.empty()) {
            std::cout << '\n' << to_csv(cdf_table);
        } else {
            write_text_file(derived_cdf_path(config.output_path), to_csv(cdf_table));
        }
    } else {
        nlohmann::json doc{{"config", sim_config_json(config.sim)},
                           {"rows", table_to_json(trials)},
                           {"cdf", table_to_json(cdf_table)},
                           {"summary", summary_to_json(summary)}};
        emit_json_document(config, doc);
    }
    summary_stream(config) << summary_to_text(summary);
    return 0;
}

int cmd_compare(const RunConfig& config) {
    config.model.validate();
    config.sim.validate();
    check_model_sim_consistency(config);

    const ModelEvaluation ev =
        evaluate_model(config.model, config.epsilon,
                       static_cast<std::size_t>(config.step_cap));
    const std::vector<TrialOutcome> outcomes = run_batch(config.sim);
    const EmpiricalCdf cdf = empirical_cdf(outcomes);
    const Summary stats = summarize(outcomes);
    const double ks = ks_distance(ev.binomial, cdf);
    const bool pass = ks <= config.ks_threshold;

    const std::int64_t limit =
        std::min(static_cast<std::int64_t>(ev.binomial.truncation_step),
                 cdf.steps.back());
    Table table;
    table.columns = {"step", "analytical_cdf", "empirical_cdf"};
    std::size_t ei = 0;
    double evalue = 0.0;
    for (std::int64_t n = 0; n <= limit; ++n) {
        while (ei < cdf.steps.size() && cdf.steps[ei] <= n)
            evalue = cdf.probabilities[ei++];
        table.rows.push_back(
            {n, ev.binomial.cdf[static_cast<std::size_t>(n)], evalue});
    }

    SummaryItems summary{
        {"ks_distance", ks},
        {"ks_threshold", config.ks_threshold},
        {"ks_pass", pass},
        {"mean_steps_analytical", ev.binomial.mean_steps},
        {"mean_steps_empirical", stats.mean},
        {"trials", stats.sample_count},
        {"censored_count", stats.censored_count},
    };

    if (config.format == OutputFormat::csv) {
        emit_csv_document(to_csv(table), config.output_path);
    } else {
        nlohmann::json doc{{"config", sim_config_json(config.sim)},
                           {"rows", table_to_json(table)},
                           {"summary", summary_to_json(summary)}};
        doc["config"]["epsilon"] = config.epsilon;
        doc["config"]["ks_threshold"] = config.ks_threshold;
        emit_json_document(config, doc);
    }
    summary_stream(config) << summary_to_text(summary);
    return pass ? 0 : 2;
}

int cmd_sweep(const RunConfig& config) {
    if (config.sweep_nodes.empty() || config.sweep_loss.empty() ||
        config.sweep_timeouts.empty())
        throw std::invalid_argument(
            "sweep needs --nodes, --loss, and --timeout-steps grids");

    std::vector<int> nodes = config.sweep_nodes;
    std::vector<int> timeouts = config.sweep_timeouts;
    std::vector<double> losses = config.sweep_loss;
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::sort(timeouts.begin(), timeouts.end());
    timeouts.erase(std::unique(timeouts.begin(), timeouts.end()), timeouts.end());
    std::sort(losses.begin(), losses.end());
    losses.erase(std::unique(losses.begin(), losses.end()), losses.end());

    Table table;
    table.columns = {"nodes", "k",   "loss_rate", "mean_steps",
                     "variance_steps", "n11", "t_c",       "t_in"};
    std::vector<std::string> truncated_points;

    for (int n : nodes) {
        for (int k : timeouts) {
            for (double p : losses) {
                ModelParams point;
                point.n_nodes = n;
                point.loss_rate = p;
                point.timeout_steps = {k};
                point.heartbeat_interval_ms = config.model.heartbeat_interval_ms;
                point.validate();

                if (p == 0.0) {
                    // no losses: counters never expire, so the split moments
                    // and heartbeat count diverge; the receipt interval is
                    // exactly one step
                    table.rows.push_back({static_cast<std::int64_t>(n),
                                          static_cast<std::int64_t>(k), p,
                                          std::string("inf"), std::string("inf"),
                                          std::string("inf"), std::string("inf"),
                                          1.0});
                    continue;
                }

                const ModelEvaluation ev = evaluate_model(
                    point, config.epsilon, static_cast<std::size_t>(config.step_cap));
                table.rows.push_back({static_cast<std::int64_t>(n),
                                      static_cast<std::int64_t>(k), p,
                                      ev.binomial.mean_steps,
                                      ev.binomial.variance_steps,
                                      ev.fm.expected_heartbeats,
                                      ev.fm.time_to_candidate_steps,
                                      ev.fm.mean_receipt_interval_steps});
                if (ev.binomial.capped) {
                    std::ostringstream where;
                    where << "nodes=" << n << " k=" << k << " loss=" << format_double(p);
                    truncated_points.push_back(where.str());
                }
            }
        }
    }

    SummaryItems summary{
        {"grid_points", static_cast<std::int64_t>(table.rows.size())},
        {"truncated_points", static_cast<std::int64_t>(truncated_points.size())},
    };
    if (!truncated_points.empty()) {
        std::ostringstream list;
        for (std::size_t i = 0; i < truncated_points.size(); ++i) {
            if (i) list << "; ";
            list << truncated_points[i];
        }
        summary.emplace_back("truncated_list", list.str());
    }

    if (config.format == OutputFormat::csv) {
        emit_csv_document(to_csv(table), config.output_path);
    } else {
        nlohmann::json grid{{"nodes", nodes},
                            {"timeout_steps", timeouts},
                            {"loss_rates", losses},
                            {"heartbeat_ms", config.model.heartbeat_interval_ms},
                            {"epsilon", config.epsilon},
                            {"step_cap", config.step_cap}};
        nlohmann::json doc{{"config", grid},
                           {"rows", table_to_json(table)},
                           {"summary", summary_to_json(summary)}};
        emit_json_document(config, doc);
    }
    summary_stream(config) << summary_to_text(summary);
    return 0;
}

int cmd_chain(const RunConfig& config) {
    config.model.validate();
    const TransitionMatrix chain = build_chain(config.model);
    const double bound = spectral_radius_bound(chain.q_block);
    const bool transient =
        verify_transience(chain.q_block, kTransienceTolerance, kTransienceMaxPower);
    const bool fundamental_available = config.model.loss_rate > 0.0;

    Table table;
    table.columns = {"matrix", "row", "col", "value"};
    append_matrix_rows(table, "P", chain.full);
    append_matrix_rows(table, "Q", chain.q_block);
    append_matrix_rows(table, "R", chain.r_block);

    SummaryItems summary{
        {"transient_count", static_cast<std::int64_t>(chain.transient_count)},
        {"absorbing_count", static_cast<std::int64_t>(chain.absorbing_count)},
        {"spectral_radius_bound", bound},
        {"spectral_bound_below_1", bound < 1.0},
        {"transience_verified", transient},
        {"fundamental_available", fundamental_available},
    };

    nlohmann::json matrices{{"p", matrix_to_json(chain.full)},
                            {"q", matrix_to_json(chain.q_block)},
                            {"r", matrix_to_json(chain.r_block)}};
    if (fundamental_available) {
        const FundamentalMatrix fm = fundamental_matrix(chain);
        append_matrix_rows(table, "N", fm.n_matrix);
        matrices["n"] = matrix_to_json(fm.n_matrix);
        summary.emplace_back("n11", fm.expected_heartbeats);
        summary.emplace_back("t_c", fm.time_to_candidate_steps);
        summary.emplace_back("t_in", fm.mean_receipt_interval_steps);
    }

    if (config.format == OutputFormat::csv) {
        emit_csv_document(to_csv(table), config.output_path);
    } else {
        nlohmann::json doc{{"config", model_config_json(config.model)},
                           {"rows", table_to_json(table)},
                           {"matrices", matrices},
                           {"summary", summary_to_json(summary)}};
        emit_json_document(config, doc);
    }
    summary_stream(config) << summary_to_text(summary);
    return 0;
}

} // namespace raftsplit
