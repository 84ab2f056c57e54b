// Batch front end for the hawkes library: ingests event files, round-trips
// model specs, and wires every library operation to a subcommand that emits
// CSV artifacts plus a reproducible run manifest.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
// A goodness-of-fit rejection is a result, not an error, and exits 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "hawkes/analytics.hpp"
#include "hawkes/common.hpp"
#include "hawkes/estimate.hpp"
#include "hawkes/finance.hpp"
#include "hawkes/io.hpp"
#include "hawkes/model.hpp"
#include "hawkes/numerics.hpp"
#include "hawkes/simulate.hpp"

namespace {

using namespace hawkes;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Canonical command string for the manifest: subcommand name plus every
// parsed flag, sorted, so one invocation always hashes the same way.
std::string canonical_command(const CLI::App* sub) {
  std::vector<std::string> parts;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->count() == 0) continue;
    const std::string name = opt->get_name();
    if (name == "--help") continue;
    if (opt->get_expected_min() == 0) {
      parts.push_back(name);
      continue;
    }
    for (const std::string& value : opt->results())
      parts.push_back(name + "=" + value);
  }
  std::sort(parts.begin(), parts.end());
  std::string command = sub->get_name();
  for (const std::string& part : parts) command += " " + part;
  return command;
}

RunManifest start_manifest(const CLI::App* sub, std::uint64_t seed) {
  RunManifest manifest;
  manifest.command = canonical_command(sub);
  manifest.config_hash = fnv1a_64(manifest.command);
  manifest.seed = seed;
  manifest.version = library_version;
  return manifest;
}

std::string default_manifest_path(const std::string& manifest_flag,
                                  const std::string& primary_output) {
  return manifest_flag.empty() ? primary_output + ".manifest.json"
                               : manifest_flag;
}

// Shared ingestion flags for every subcommand that consumes an event file.
struct IngestFlags {
  std::string path;
  std::string format = "csv";
  double time_scale = 1.0;
  std::vector<std::string> labels;
  std::string tie = "stable";
  double jitter_amplitude = 0;
  std::uint64_t jitter_seed = 0;
  double session_start = kNaN;
  double session_end = kNaN;
  bool dedupe = false;
  double horizon = 0;
  int dim = 0;
};

void add_ingest_flags(CLI::App* sub, IngestFlags& f, bool with_path = true) {
  if (with_path)
    sub->add_option("--events", f.path, "Event file to ingest")
        ->required();
  sub->add_option("--format", f.format, "Event file format")
      ->check(CLI::IsMember({"csv", "ndjson"}))
      ->capture_default_str();
  sub->add_option("--time-scale", f.time_scale,
                  "Multiplier applied to every input timestamp")
      ->capture_default_str();
  sub->add_option("--label", f.labels,
                  "Component label mapping NAME=INDEX (repeatable)");
  sub->add_option("--tie", f.tie, "Tied-timestamp policy")
      ->check(CLI::IsMember({"stable", "jitter"}))
      ->capture_default_str();
  sub->add_option("--jitter-amplitude", f.jitter_amplitude,
                  "Perturbation bound for the jitter policy");
  sub->add_option("--jitter-seed", f.jitter_seed,
                  "Seed for the jitter draws");
  sub->add_option("--session-start", f.session_start,
                  "Keep events at or after this time and rebase the clock");
  sub->add_option("--session-end", f.session_end,
                  "Keep events strictly before this time");
  sub->add_flag("--dedupe-throttled", f.dedupe,
                "Drop repeated (time, component) rows from throttled feeds");
  sub->add_option("--horizon", f.horizon,
                  "Observation horizon (0 takes the last event time)");
  sub->add_option("--dim", f.dim,
                  "Component count (0 derives it from the data)");
}

IngestOptions to_ingest_options(const IngestFlags& f) {
  IngestOptions options;
  options.format =
      f.format == "csv" ? EventFormat::csv : EventFormat::ndjson;
  options.time_scale = f.time_scale;
  for (const std::string& pair : f.labels) {
    const auto eq = pair.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == pair.size())
      throw UsageError("--label expects NAME=INDEX, got '" + pair + "'");
    int index = 0;
    try {
      index = std::stoi(pair.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--label expects NAME=INDEX, got '" + pair + "'");
    }
    options.component_map[pair.substr(0, eq)] = index;
  }
  options.tie_policy =
      f.tie == "stable" ? TiePolicy::stable : TiePolicy::jitter;
  options.jitter_amplitude = f.jitter_amplitude;
  options.jitter_seed = f.jitter_seed;
  options.session_start = f.session_start;
  options.session_end = f.session_end;
  options.dedupe_throttled = f.dedupe;
  options.horizon = f.horizon;
  options.dim = f.dim;
  return options;
}

EventSequence load_events(const IngestFlags& f, const std::string& path,
                          RunManifest& manifest) {
  IngestReport report;
  const EventSequence events =
      read_events(path, to_ingest_options(f), &report);
  manifest.inputs.emplace_back(path, file_digest(path));
  std::cout << path << ": " << report.rows_read << " rows, "
            << report.events_kept << " events kept\n";
  for (const std::string& note : report.notes)
    std::cout << "  " << note << "\n";
  return events;
}

EventSequence load_events(const IngestFlags& f, RunManifest& manifest) {
  return load_events(f, f.path, manifest);
}

HawkesModel load_model(const std::string& path, RunManifest& manifest) {
  const HawkesModel model = read_model(path);
  manifest.inputs.emplace_back(path, file_digest(path));
  return model;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& warning : warnings)
    std::cout << "warning: " << warning << "\n";
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string model_path;
  double horizon = 0;
  double burn_in = 0;
  std::uint64_t seed = 0;
  std::string algorithm = "thinning";
  std::size_t max_events = 50'000'000;
  std::string out;
  std::string format = "csv";
  std::string genealogy;
  std::string manifest_path;
};

void run_simulate(const CLI::App* sub, const SimulateArgs& a) {
  RunManifest manifest = start_manifest(sub, a.seed);
  const HawkesModel model = load_model(a.model_path, manifest);

  SimConfig cfg;
  cfg.seed = a.seed;
  cfg.horizon = a.horizon;
  cfg.burn_in = a.burn_in;
  cfg.max_events = a.max_events;
  if (a.algorithm == "thinning") {
    cfg.algorithm = SimAlgorithm::thinning;
  } else if (a.algorithm == "time_change") {
    cfg.algorithm = SimAlgorithm::time_change;
  } else {
    cfg.algorithm = SimAlgorithm::cluster;
  }

  EventSequence events;
  if (!a.genealogy.empty()) {
    if (cfg.algorithm != SimAlgorithm::cluster)
      throw UsageError(
          "--genealogy requires --algorithm=cluster, which is the only "
          "construction that tracks ancestry");
    auto [ev, gen] = simulate_cluster(model, cfg);
    events = std::move(ev);
    write_genealogy_csv(a.genealogy, gen);
  } else {
    events = simulate(model, cfg);
  }

  write_events(a.out, events,
               a.format == "csv" ? EventFormat::csv : EventFormat::ndjson);
  manifest.outputs.push_back(a.out);
  if (!a.genealogy.empty()) manifest.outputs.push_back(a.genealogy);
  write_manifest(default_manifest_path(a.manifest_path, a.out), manifest);

  std::cout << "simulated " << events.size() << " events on [0, "
            << format_double17(events.horizon) << "]\n";
}

void register_simulate(CLI::App& app) {
  auto args = std::make_shared<SimulateArgs>();
  CLI::App* sub = app.add_subcommand(
      "simulate", "Simulate a model spec into an event file");
  sub->add_option("--model", args->model_path, "Model spec file")->required();
  sub->add_option("--horizon", args->horizon, "Simulation horizon")
      ->required()
      ->check(CLI::PositiveNumber);
  sub->add_option("--burn-in", args->burn_in,
                  "Warm-up span simulated and discarded before time 0");
  sub->add_option("--seed", args->seed, "Random seed")->capture_default_str();
  sub->add_option("--algorithm", args->algorithm, "Sampling construction")
      ->check(CLI::IsMember({"thinning", "time_change", "cluster"}))
      ->capture_default_str();
  sub->add_option("--max-events", args->max_events,
                  "Abort threshold for runaway configurations");
  sub->add_option("--out", args->out, "Output event file")->required();
  sub->add_option("--format", args->format, "Output event format")
      ->check(CLI::IsMember({"csv", "ndjson"}))
      ->capture_default_str();
  sub->add_option("--genealogy", args->genealogy,
                  "Also write index,parent_index,generation rows "
                  "(cluster algorithm only)");
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out>.manifest.json)");
  sub->callback([sub, args] { run_simulate(sub, *args); });
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  IngestFlags ingest;
  std::string method;
  std::string init_path;
  std::string out;
  std::string diagnostics;
  std::string manifest_path;
  bool fix_beta = false;
  double exclude_before = 0;
  int max_iterations = 0;
  double support = 0;
  int nodes = 24;
  int bins = 16;
  std::string grid = "linear";
  double bandwidth = 0;
  double l1 = 0;
  double bin_width = 1.0;
  std::vector<int> lags;
};

void run_fit(const CLI::App* sub, const FitArgs& a) {
  RunManifest manifest = start_manifest(sub, 0);
  const EventSequence events = load_events(a.ingest, manifest);

  FitOptions options;
  options.fix_beta = a.fix_beta;
  options.exclude_before = a.exclude_before;
  if (a.max_iterations > 0) {
    options.optimizer.max_iterations = a.max_iterations;
    options.em_max_iterations = a.max_iterations;
  }

  EstimationResult result;
  if (a.method == "mle" || a.method == "em") {
    if (a.init_path.empty())
      throw UsageError("--init is required for method '" + a.method + "'");
    const HawkesModel init = load_model(a.init_path, manifest);
    result = a.method == "mle" ? fit_mle(events, init, options)
                               : fit_em_parametric(events, init, options);
  } else if (a.method == "em_hist") {
    if (!(a.support > 0))
      throw UsageError("--support must be positive for method 'em_hist'");
    std::vector<double> edges(static_cast<std::size_t>(a.bins) + 1);
    for (int k = 0; k <= a.bins; ++k) edges[k] = a.support * k / a.bins;
    NonparametricEmOptions em;
    if (a.max_iterations > 0) em.max_iterations = a.max_iterations;
    result = fit_em_nonparametric(events, edges, em);
  } else if (a.method == "wh") {
    QuadratureConfig cfg;
    cfg.nodes = a.nodes;
    cfg.support = a.support;
    cfg.style = a.grid == "log" ? GridStyle::log : GridStyle::linear;
    cfg.bandwidth = a.bandwidth;
    result = fit_wiener_hopf(events, cfg);
  } else if (a.method == "contrast") {
    if (!(a.support > 0))
      throw UsageError("--support must be positive for method 'contrast'");
    ContrastOptions cfg;
    cfg.edges.resize(static_cast<std::size_t>(a.bins) + 1);
    for (int k = 0; k <= a.bins; ++k)
      cfg.edges[k] = a.support * k / a.bins;
    cfg.l1_penalty = a.l1;
    if (a.max_iterations > 0) cfg.max_iterations = a.max_iterations;
    result = fit_contrast(events, cfg);
  } else {
    MomentOptions cfg;
    cfg.bin_width = a.bin_width;
    if (!a.lags.empty()) cfg.lags = a.lags;
    result = fit_moments(events, cfg);
  }

  write_model(a.out, result.model);
  manifest.outputs.push_back(a.out);
  if (!a.diagnostics.empty()) {
    write_diagnostics_csv(a.diagnostics, result);
    manifest.outputs.push_back(a.diagnostics);
  }
  write_manifest(default_manifest_path(a.manifest_path, a.out), manifest);

  std::cout << "method " << a.method << ": "
            << (result.converged ? "converged" : "not converged") << " after "
            << result.iterations << " iterations, spectral radius "
            << format_double17(result.stability.spectral_radius) << "\n";
  print_warnings(result.warnings);
}

void register_fit(CLI::App& app) {
  auto args = std::make_shared<FitArgs>();
  CLI::App* sub =
      app.add_subcommand("fit", "Estimate a model from an event file");
  add_ingest_flags(sub, args->ingest);
  sub->add_option("--method", args->method, "Estimation method")
      ->check(CLI::IsMember(
          {"mle", "em", "em_hist", "wh", "contrast", "moments"}))
      ->required();
  sub->add_option("--init", args->init_path,
                  "Starting model spec (mle and em)");
  sub->add_option("--out", args->out, "Fitted model spec")->required();
  sub->add_option("--diagnostics", args->diagnostics,
                  "Optional iteration,objective,gradient_norm table");
  sub->add_flag("--fix-beta", args->fix_beta,
                "Hold decay parameters at their initial values");
  sub->add_option("--exclude-before", args->exclude_before,
                  "Use events before this time as history only");
  sub->add_option("--max-iterations", args->max_iterations,
                  "Iteration cap for the optimizer or EM loop");
  sub->add_option("--support", args->support,
                  "Lag support for wh, em_hist and contrast");
  sub->add_option("--nodes", args->nodes, "Quadrature nodes for wh")
      ->capture_default_str();
  sub->add_option("--bins", args->bins,
                  "Histogram bins for em_hist and contrast")
      ->capture_default_str();
  sub->add_option("--grid", args->grid, "Lag grid style for wh")
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();
  sub->add_option("--bandwidth", args->bandwidth,
                  "Smoothing bandwidth for wh (0 auto-selects)");
  sub->add_option("--l1", args->l1, "L1 penalty for contrast");
  sub->add_option("--bin-width", args->bin_width,
                  "Count bin width for moments")
      ->capture_default_str();
  sub->add_option("--lag", args->lags,
                  "Covariance lag multiples for moments (repeatable)");
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out>.manifest.json)");
  sub->callback([sub, args] { run_fit(sub, *args); });
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::string model_path;
  std::string out_prefix;
  double lag_max = 10;
  int lag_count = 50;
  std::string lag_grid = "linear";
  std::string manifest_path;
};

void run_stats(const CLI::App* sub, const StatsArgs& a) {
  RunManifest manifest = start_manifest(sub, 0);
  const HawkesModel model = load_model(a.model_path, manifest);
  const AnalyticsResult res = analyze(model);
  const int d = model.dim();

  const std::string lambda_path = a.out_prefix + ".lambda.csv";
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < d; ++i)
      rows.push_back({std::to_string(i),
                      format_double17(res.mean_intensity[i]),
                      format_double17(model.mu[i])});
    write_csv(lambda_path, {}, {"component", "intensity", "exogenous"}, rows);
  }

  const std::string causality_path = a.out_prefix + ".causality.csv";
  {
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        rows.push_back({"direct", std::to_string(i), std::to_string(j),
                        format_double17(res.causality.direct(i, j))});
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        rows.push_back({"oldest_ancestor", std::to_string(i),
                        std::to_string(j),
                        format_double17(res.causality.oldest_ancestor(i, j))});
    write_csv(causality_path, {}, {"attribution", "target", "source", "rate"},
              rows);
  }

  const std::string diffusion_path = a.out_prefix + ".diffusion.csv";
  {
    const Eigen::MatrixXd cov = res.diffusion * res.diffusion.transpose();
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        rows.push_back({std::to_string(i), std::to_string(j),
                        format_double17(res.diffusion(i, j)),
                        format_double17(cov(i, j))});
    write_csv(diffusion_path, {},
              {"row", "col", "g", "asymptotic_cov_rate"}, rows);
  }

  const std::string covariance_path = a.out_prefix + ".covariance.csv";
  {
    const double lo = a.lag_max / a.lag_count;
    std::vector<double> lags(static_cast<std::size_t>(a.lag_count));
    for (int k = 0; k < a.lag_count; ++k) {
      lags[k] = a.lag_grid == "log"
                    ? lo * std::pow(a.lag_max / lo,
                                    a.lag_count == 1
                                        ? 0.0
                                        : static_cast<double>(k) /
                                              (a.lag_count - 1))
                    : lo * (k + 1);
    }
    const CorrelationEstimate corr = correlation_time_domain(model, lags);
    std::vector<std::string> comments;
    for (int i = 0; i < d; ++i)
      comments.push_back("atom weight c_" + std::to_string(i) + "_" +
                         std::to_string(i) + " at lag 0: " +
                         format_double17(corr.atom[i]));
    for (const std::string& warning : corr.warnings)
      comments.push_back("warning: " + warning);
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        std::vector<double> col(corr.lags.size());
        for (std::size_t l = 0; l < corr.lags.size(); ++l)
          col[l] = corr.values[l](i, j);
        columns.emplace_back(
            "c_" + std::to_string(i) + "_" + std::to_string(j),
            std::move(col));
      }
    write_curve_csv(covariance_path, "lag", corr.lags, columns, comments);
  }

  manifest.outputs = {lambda_path, causality_path, diffusion_path,
                      covariance_path};
  write_manifest(default_manifest_path(a.manifest_path,
                                       a.out_prefix + ".stats"),
                 manifest);

  for (int i = 0; i < d; ++i)
    std::cout << "lambda[" << i << "] = "
              << format_double17(res.mean_intensity[i]) << "\n";
  print_warnings(res.warnings);
}

void register_stats(CLI::App& app) {
  auto args = std::make_shared<StatsArgs>();
  CLI::App* sub = app.add_subcommand(
      "stats", "Closed-form statistics of a model spec");
  sub->add_option("--model", args->model_path, "Model spec file")->required();
  sub->add_option("--out-prefix", args->out_prefix,
                  "Prefix for the lambda/causality/diffusion/covariance "
                  "tables")
      ->required();
  sub->add_option("--lag-max", args->lag_max,
                  "Largest covariance lag")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--lag-count", args->lag_count,
                  "Number of covariance lags")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--lag-grid", args->lag_grid, "Covariance lag spacing")
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out-prefix>.stats.manifest.json)");
  sub->callback([sub, args] { run_stats(sub, *args); });
}

// ---------------------------------------------------------------------------
// gof

struct GofArgs {
  IngestFlags ingest;
  std::string model_path;
  std::string out_prefix;
  std::string manifest_path;
};

void run_gof(const CLI::App* sub, const GofArgs& a) {
  RunManifest manifest = start_manifest(sub, 0);
  const EventSequence events = load_events(a.ingest, manifest);
  const HawkesModel model = load_model(a.model_path, manifest);

  const GoodnessOfFit gof = goodness_of_fit(model, events);
  const std::string residuals_path = a.out_prefix + ".residuals.csv";
  const std::string ks_path = a.out_prefix + ".ks.csv";
  write_residuals_csv(residuals_path, gof);
  write_ks_csv(ks_path, gof);
  manifest.outputs = {residuals_path, ks_path};
  write_manifest(default_manifest_path(a.manifest_path, a.out_prefix + ".gof"),
                 manifest);

  // A rejection is a reported result, not a failure of the run.
  std::cout << "pooled KS statistic "
            << format_double17(gof.pooled.statistic) << ", p-value "
            << format_double17(gof.pooled.p_value) << " (n = "
            << gof.pooled.sample_size << ")\n";
  for (std::size_t c = 0; c < gof.per_component.size(); ++c) {
    if (c < gof.skipped.size() && gof.skipped[c]) {
      std::cout << "component " << c << ": no events\n";
      continue;
    }
    std::cout << "component " << c << ": KS p-value "
              << format_double17(gof.per_component[c].p_value) << "\n";
  }
}

void register_gof(CLI::App& app) {
  auto args = std::make_shared<GofArgs>();
  CLI::App* sub = app.add_subcommand(
      "gof", "Time-change residual test of a model against an event file");
  add_ingest_flags(sub, args->ingest);
  sub->add_option("--model", args->model_path, "Model spec file")->required();
  sub->add_option("--out-prefix", args->out_prefix,
                  "Prefix for the residual and KS tables")
      ->required();
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out-prefix>.gof.manifest.json)");
  sub->callback([sub, args] { run_gof(sub, *args); });
}

// ---------------------------------------------------------------------------
// reflexivity

struct ReflexivityArgs {
  IngestFlags ingest;
  std::vector<std::string> methods;
  double window = 0;
  double support = 0;
  int nodes = 24;
  std::string grid = "log";
  std::size_t max_power_law_events = 4000;
  double threshold = 0.95;
  std::string out;
  std::string manifest_path;
};

void run_reflexivity(const CLI::App* sub, const ReflexivityArgs& a) {
  RunManifest manifest = start_manifest(sub, 0);
  const EventSequence events = load_events(a.ingest, manifest);

  std::vector<ReflexivityMethod> methods;
  const std::vector<std::string> requested =
      a.methods.empty()
          ? std::vector<std::string>{"variance_ratio", "mle_exponential",
                                     "mle_power_law", "wiener_hopf"}
          : a.methods;
  for (const std::string& name : requested) {
    if (name == "variance_ratio") {
      methods.push_back(ReflexivityMethod::variance_ratio);
    } else if (name == "mle_exponential") {
      methods.push_back(ReflexivityMethod::mle_exponential);
    } else if (name == "mle_power_law") {
      methods.push_back(ReflexivityMethod::mle_power_law);
    } else {
      methods.push_back(ReflexivityMethod::wiener_hopf);
    }
  }

  ReflexivityOptions options;
  options.window_length = a.window;
  options.support = a.support;
  options.nodes = a.nodes;
  options.grid_style = a.grid == "log" ? GridStyle::log : GridStyle::linear;
  options.power_law_max_events = a.max_power_law_events;
  options.criticality_threshold = a.threshold;

  const ReflexivityReport report =
      reflexivity_report(events, methods, options);
  write_reflexivity_csv(a.out, report);
  manifest.outputs.push_back(a.out);
  write_manifest(default_manifest_path(a.manifest_path, a.out), manifest);

  for (const ReflexivityEntry& entry : report.entries) {
    std::cout << entry.label << ": " << format_double17(entry.estimate);
    if (entry.band > 0)
      std::cout << " +- " << format_double17(entry.band);
    std::cout << "\n";
  }
  print_warnings(report.warnings);
}

void register_reflexivity(CLI::App& app) {
  auto args = std::make_shared<ReflexivityArgs>();
  CLI::App* sub = app.add_subcommand(
      "reflexivity",
      "Branching-ratio table for a one-dimensional event file");
  add_ingest_flags(sub, args->ingest);
  sub->add_option("--method", args->methods,
                  "Estimator to include (repeatable; default: all four)")
      ->check(CLI::IsMember({"variance_ratio", "mle_exponential",
                             "mle_power_law", "wiener_hopf"}));
  sub->add_option("--window", args->window,
                  "Variance-ratio window (0 auto-selects)");
  sub->add_option("--support", args->support,
                  "Wiener-Hopf lag support (0 auto-selects)");
  sub->add_option("--nodes", args->nodes, "Wiener-Hopf quadrature nodes")
      ->capture_default_str();
  sub->add_option("--grid", args->grid, "Wiener-Hopf lag grid style")
      ->check(CLI::IsMember({"linear", "log"}))
      ->capture_default_str();
  sub->add_option("--max-power-law-events", args->max_power_law_events,
                  "Record-length cap for the power-law likelihood")
      ->capture_default_str();
  sub->add_option("--criticality-threshold", args->threshold,
                  "Warn when an estimate reaches this level")
      ->capture_default_str();
  sub->add_option("--out", args->out, "Report table")->required();
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out>.manifest.json)");
  sub->callback([sub, args] { run_reflexivity(sub, *args); });
}

// ---------------------------------------------------------------------------
// signature / epps

struct PriceFlags {
  int up = 0;
  int down = 1;
  double initial = 0;
  double tick = 1.0;
  std::vector<double> scales;
};

void add_price_flags(CLI::App* sub, PriceFlags& f) {
  sub->add_option("--up", f.up, "Component of up moves")
      ->capture_default_str();
  sub->add_option("--down", f.down, "Component of down moves")
      ->capture_default_str();
  sub->add_option("--initial-price", f.initial, "Price level before time 0")
      ->capture_default_str();
  sub->add_option("--tick", f.tick, "Currency value of one tick")
      ->capture_default_str();
  sub->add_option("--scale", f.scales, "Sampling scale (repeatable)")
      ->required();
}

struct SignatureArgs {
  IngestFlags ingest;
  PriceFlags price;
  std::string out;
  std::string manifest_path;
};

void run_signature(const CLI::App* sub, const SignatureArgs& a) {
  RunManifest manifest = start_manifest(sub, 0);
  const EventSequence events = load_events(a.ingest, manifest);
  const PricePath path = price_from_events(events, a.price.up, a.price.down,
                                           a.price.initial, a.price.tick);
  const SignatureCurve curve = signature_plot(path, a.price.scales);
  write_curve_csv(a.out, "scale", curve.scales,
                  {{"value", curve.values}, {"std_error", curve.std_errors}});
  manifest.outputs.push_back(a.out);
  write_manifest(default_manifest_path(a.manifest_path, a.out), manifest);
  for (std::size_t k = 0; k < curve.scales.size(); ++k)
    std::cout << "C(" << format_double17(curve.scales[k]) << ") = "
              << format_double17(curve.values[k]) << "\n";
}

void register_signature(CLI::App& app) {
  auto args = std::make_shared<SignatureArgs>();
  CLI::App* sub = app.add_subcommand(
      "signature",
      "Scale dependence of the realized variance of an event-built price");
  add_ingest_flags(sub, args->ingest);
  add_price_flags(sub, args->price);
  sub->add_option("--out", args->out, "Curve table")->required();
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out>.manifest.json)");
  sub->callback([sub, args] { run_signature(sub, *args); });
}

struct EppsArgs {
  IngestFlags ingest;
  std::string events_a;
  std::string events_b;
  PriceFlags price;
  std::string out;
  std::string manifest_path;
};

void run_epps(const CLI::App* sub, const EppsArgs& a) {
  RunManifest manifest = start_manifest(sub, 0);
  const EventSequence ev_a = load_events(a.ingest, a.events_a, manifest);
  const EventSequence ev_b = load_events(a.ingest, a.events_b, manifest);
  const PricePath path_a = price_from_events(
      ev_a, a.price.up, a.price.down, a.price.initial, a.price.tick);
  const PricePath path_b = price_from_events(
      ev_b, a.price.up, a.price.down, a.price.initial, a.price.tick);
  const SignatureCurve curve = epps_covariation(path_a, path_b,
                                                a.price.scales);
  write_curve_csv(a.out, "scale", curve.scales,
                  {{"covariation", curve.values},
                   {"std_error", curve.std_errors}});
  manifest.outputs.push_back(a.out);
  write_manifest(default_manifest_path(a.manifest_path, a.out), manifest);
  for (std::size_t k = 0; k < curve.scales.size(); ++k)
    std::cout << "cov(" << format_double17(curve.scales[k]) << ") = "
              << format_double17(curve.values[k]) << "\n";
}

void register_epps(CLI::App& app) {
  auto args = std::make_shared<EppsArgs>();
  CLI::App* sub = app.add_subcommand(
      "epps", "Scale dependence of the covariation of two asset prices");
  add_ingest_flags(sub, args->ingest, false);
  sub->add_option("--events-a", args->events_a, "First asset's event file")
      ->required();
  sub->add_option("--events-b", args->events_b, "Second asset's event file")
      ->required();
  add_price_flags(sub, args->price);
  sub->add_option("--out", args->out, "Curve table")->required();
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: <out>.manifest.json)");
  sub->callback([sub, args] { run_epps(sub, *args); });
}

// ---------------------------------------------------------------------------
// impact

struct ImpactArgs {
  std::string config_path;
  double horizon = 0;
  int paths = 0;
  std::uint64_t seed = 0;
  std::vector<double> grid;
  std::string mc_out;
  double step = 0;
  std::string expected_out;
  std::string manifest_path;
};

void run_impact(const CLI::App* sub, const ImpactArgs& a) {
  if (a.mc_out.empty() && a.expected_out.empty())
    throw UsageError("nothing to do: pass --mc-out and/or --expected-out");
  if (!a.mc_out.empty() && a.paths <= 0)
    throw UsageError("--paths must be positive for the Monte Carlo curve");
  if (!a.expected_out.empty() && !(a.step > 0))
    throw UsageError("--step must be positive for the expected curve");

  RunManifest manifest = start_manifest(sub, a.seed);
  const HimSetup setup = read_him(a.config_path);
  manifest.inputs.emplace_back(a.config_path, file_digest(a.config_path));

  if (!a.expected_out.empty()) {
    const ExpectedImpact expected =
        him_expected_impact(setup.config, setup.meta, a.horizon, a.step);
    write_curve_csv(
        a.expected_out, "time", expected.times,
        {{"impact", expected.impact}, {"rate", expected.rate}},
        {"permanent impact: " + format_double17(expected.permanent)});
    manifest.outputs.push_back(a.expected_out);
    std::cout << "permanent impact "
              << format_double17(expected.permanent) << "\n";
  }
  if (!a.mc_out.empty()) {
    const ImpactCurve curve = him_impact_curve(
        setup.config, setup.meta, a.paths, a.seed, a.horizon, a.grid);
    write_curve_csv(a.mc_out, "time", curve.times,
                    {{"mean", curve.mean}, {"std_error", curve.std_error}},
                    {"paths: " + std::to_string(curve.paths)});
    manifest.outputs.push_back(a.mc_out);
    std::cout << "averaged " << curve.paths << " paired paths\n";
  }

  const std::string primary = a.mc_out.empty() ? a.expected_out : a.mc_out;
  write_manifest(default_manifest_path(a.manifest_path, primary), manifest);
}

void register_impact(CLI::App& app) {
  auto args = std::make_shared<ImpactArgs>();
  CLI::App* sub = app.add_subcommand(
      "impact", "Meta-order price impact of an impact setup file");
  sub->add_option("--config", args->config_path, "Impact setup file")
      ->required();
  sub->add_option("--horizon", args->horizon, "Curve horizon")
      ->required()
      ->check(CLI::PositiveNumber);
  sub->add_option("--paths", args->paths,
                  "Monte Carlo path count for --mc-out");
  sub->add_option("--seed", args->seed, "Random seed for --mc-out")
      ->capture_default_str();
  sub->add_option("--grid-point", args->grid,
                  "Monte Carlo sampling time (repeatable; default grid "
                  "covers execution and decay)");
  sub->add_option("--mc-out", args->mc_out, "Monte Carlo curve table");
  sub->add_option("--step", args->step,
                  "Time step of the deterministic expected curve");
  sub->add_option("--expected-out", args->expected_out,
                  "Deterministic expected-impact table");
  sub->add_option("--manifest", args->manifest_path,
                  "Manifest path (default: next to the primary output)");
  sub->callback([sub, args] { run_impact(sub, *args); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multivariate Hawkes toolkit: simulation, analytic statistics, "
      "estimation and market-activity applications.\n"
      "Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical "
      "error."};
  app.require_subcommand(1);

  register_simulate(app);
  register_fit(app);
  register_stats(app);
  register_gof(app);
  register_reflexivity(app);
  register_signature(app);
  register_epps(app);
  register_impact(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
