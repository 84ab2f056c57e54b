#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hawkes/common.hpp"
#include "hawkes/io.hpp"
#include "hawkes/numerics.hpp"
#include "hawkes/simulate.hpp"

using namespace hawkes;
namespace fs = std::filesystem;

namespace {

EventSequence sample_sequence() {
  EventSequence ev;
  ev.times = {0.25, 1.0, 1.0, 2.5, 2.5, 7.125};
  ev.components = {0, 0, 1, 1, 1, 0};
  ev.marks = {1.5, 0.25, 2.0, 1.0, 3.5, 0.125};
  ev.dim = 2;
  ev.horizon = 10.0;
  return ev;
}

HawkesModel all_family_model() {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Zero(3);
  model.mu << 0.1, 1.0 / 3.0, 0.7;
  model.kernels = KernelMatrix(3);
  model.kernels(0, 0) = ExponentialKernel{0.2, 1.7};
  model.kernels(0, 1) = PowerLawKernel{0.25, 0.9, 1.3};
  model.kernels(0, 2) = ZeroKernel{};
  model.kernels(1, 0) = SumExponentialKernel{{0.1, 0.05}, {1.0, 10.0 / 3.0}};
  model.kernels(1, 1) = PiecewiseConstantKernel{{0.0, 0.5, 2.0},
                                                {0.4, -0.125}};
  model.kernels(1, 2) = ExponentialKernel{0.05, 3.0};
  model.kernels(2, 0) = ZeroKernel{};
  model.kernels(2, 1) = ZeroKernel{};
  model.kernels(2, 2) = ExponentialKernel{0.3, 0.123456789012345678};
  model.transfer = Transfer::positive_part;
  model.mark_laws.resize(3);
  model.mark_laws[0] = MarkLaw{MarkLaw::Family::constant, 1.0, 0.0};
  model.mark_laws[1] = MarkLaw{MarkLaw::Family::uniform, 0.5, 1.5};
  model.mark_laws[2] = MarkLaw{MarkLaw::Family::lognormal, -0.1, 0.4};
  model.mark_impacts.assign(9, MarkImpact{1.0, 1.0});
  model.mark_impacts[1] = MarkImpact{0.5, 2.0};
  return model;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hawkes_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  return read_text_file(path.string());
}

// Runs the command-line binary inside `dir`; returns the exit code.
int run_cli(const fs::path& dir, const std::string& args) {
  const char* cli = std::getenv("HAWKES_CLI");
  REQUIRE_MESSAGE(cli != nullptr,
                  "HAWKES_CLI must point at the hawkes binary");
  const std::string cmd = "cd " + dir.string() + " && '" + cli + "' " + args +
                          " >> cli_stdout.txt 2>> cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("event files round-trip through both formats") {
  const fs::path dir = fresh_dir("roundtrip");
  const EventSequence ev = sample_sequence();

  for (EventFormat format : {EventFormat::csv, EventFormat::ndjson}) {
    const fs::path path =
        dir / (format == EventFormat::csv ? "ev.csv" : "ev.ndjson");
    write_events(path.string(), ev, format);
    IngestOptions options;
    options.format = format;
    options.horizon = ev.horizon;
    IngestReport report;
    const EventSequence back = read_events(path.string(), options, &report);
    REQUIRE(back.size() == ev.size());
    CHECK(back.times == ev.times);
    CHECK(back.components == ev.components);
    CHECK(back.marks == ev.marks);
    CHECK(back.dim == ev.dim);
    CHECK(back.horizon == ev.horizon);
    CHECK(report.rows_read == ev.size());
    CHECK(report.events_kept == ev.size());
    CHECK(report.dropped_session == 0);
    CHECK(report.adjusted_ties == 0);
  }

  // Unmarked sequences must not grow a mark column.
  EventSequence plain = ev;
  plain.marks.clear();
  write_events((dir / "plain.csv").string(), plain);
  CHECK(slurp(dir / "plain.csv").substr(0, 15) == "time,component\n");
}

TEST_CASE("component labels resolve through the map") {
  IngestOptions options;
  options.component_map = {{"up", 0}, {"down", 1}};
  options.horizon = 3.0;

  IngestReport report;
  const EventSequence ev = parse_events(
      "time,component\n0.5,up\n1.25,down\n2.0,up\n", options, &report);
  REQUIRE(ev.size() == 3);
  CHECK(ev.dim == 2);
  CHECK(ev.components == std::vector<int>{0, 1, 0});
  CHECK(ev.component_counts() == std::vector<std::size_t>{2, 1});

  // Every unknown label is listed, not just the first one hit.
  try {
    parse_events("time,component\n0.5,up\n1.0,ask\n2.0,bid\n", options);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("'ask'") != std::string::npos);
    CHECK(msg.find("'bid'") != std::string::npos);
    CHECK(msg.find("'up'") == std::string::npos);
  }

  IngestOptions gap;
  gap.component_map = {{"a", 0}, {"b", 2}};
  CHECK_THROWS_AS(parse_events("time,component\n1,a\n", gap), UsageError);
}

TEST_CASE("malformed rows report the offending line") {
  const auto line_of = [](const char* text, IngestOptions options = {}) {
    try {
      parse_events(text, options, nullptr, "in");
      return std::string("no error");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
  };

  CHECK(line_of("time,component\n1.0,0\nnot-a-number,1\n").find("in:3:") !=
        std::string::npos);
  CHECK(line_of("time,component\n1.0,0\n2.0\n").find("in:3:") !=
        std::string::npos);
  CHECK(line_of("time,component\n1.0,-2\n").find("in:2:") !=
        std::string::npos);
  CHECK(line_of("t,c\n1.0,0\n").find("header") != std::string::npos);
  CHECK(line_of("").find("header") != std::string::npos);

  IngestOptions nd;
  nd.format = EventFormat::ndjson;
  CHECK(line_of("{\"t\":1,\"c\":0}\n{broken\n", nd).find("in:2:") !=
        std::string::npos);
  CHECK(line_of("{\"c\":0}\n", nd).find("'t'") != std::string::npos);
  CHECK(line_of("{\"t\":1,\"c\":0}\n{\"t\":2,\"c\":0,\"m\":1}\n", nd)
            .find("in:2:") != std::string::npos);
}

TEST_CASE("session windows filter, rebase and account for every row") {
  IngestOptions options;
  options.session_start = 10.0;
  options.session_end = 20.0;
  options.time_scale = 0.5;  // input stamps are in half-seconds

  IngestReport report;
  const EventSequence ev = parse_events(
      "time,component\n10,0\n22,0\n30,0\n38,0\n41,0\n", options, &report);
  // Scaled times 5, 11, 15, 19, 20.5: the window [10, 20) keeps three.
  REQUIRE(ev.size() == 3);
  CHECK(ev.times == std::vector<double>{1.0, 5.0, 9.0});
  CHECK(report.rows_read == 5);
  CHECK(report.dropped_session == 2);
  CHECK(report.rows_read ==
        report.events_kept + report.dropped_session +
            report.dropped_duplicates);
  CHECK(ev.horizon == 9.0);

  IngestOptions declared = options;
  declared.horizon = 10.0;
  CHECK(parse_events("time,component\n10,0\n22,0\n30,0\n38,0\n41,0\n",
                     declared)
            .horizon == 10.0);
}

TEST_CASE("throttle dedupe keeps the first of each repeated row") {
  IngestOptions options;
  options.dedupe_throttled = true;
  IngestReport report;
  const EventSequence ev = parse_events(
      "time,component\n1.0,0\n1.0,0\n1.0,1\n2.0,0\n2.0,0\n2.0,0\n", options,
      &report);
  REQUIRE(ev.size() == 3);
  CHECK(report.dropped_duplicates == 3);
  CHECK(report.rows_read == 6);
  CHECK(ev.times == std::vector<double>{1.0, 1.0, 2.0});
  CHECK(ev.components == std::vector<int>{0, 1, 0});
}

TEST_CASE("tie jitter is deterministic and respects its amplitude") {
  const std::string text =
      "time,component\n1.0,0\n1.0,1\n1.0,0\n2.0,1\n2.0,0\n5.0,1\n";
  IngestOptions options;
  options.tie_policy = TiePolicy::jitter;
  options.jitter_amplitude = 0.125;
  options.jitter_seed = 42;

  IngestReport report;
  const EventSequence once = parse_events(text, options, &report);
  const EventSequence twice = parse_events(text, options);
  CHECK(once.times == twice.times);
  CHECK(report.adjusted_ties == 3);

  // First event of each tied group keeps its stamp; the rest stay inside
  // (t, t + amplitude) and the overall order survives.
  CHECK(once.times[0] == 1.0);
  CHECK(once.times[3] == 2.0);
  for (std::size_t k = 1; k < once.size(); ++k)
    CHECK(once.times[k] >= once.times[k - 1]);
  CHECK(once.times[1] > 1.0);
  CHECK(once.times[2] < 1.125);
  CHECK(once.times[4] > 2.0);
  CHECK(once.times[4] < 2.125);

  IngestOptions reseeded = options;
  reseeded.jitter_seed = 43;
  CHECK(parse_events(text, reseeded).times != once.times);

  IngestOptions wide = options;
  wide.jitter_amplitude = 1.0;  // equals the smallest gap
  CHECK_THROWS_AS(parse_events(text, wide), DataError);

  // The stable policy keeps ties, ordered by component.
  IngestOptions stable;
  const EventSequence kept = parse_events(text, stable);
  CHECK(kept.times == std::vector<double>{1.0, 1.0, 1.0, 2.0, 2.0, 5.0});
  CHECK(kept.components == std::vector<int>{0, 0, 1, 0, 1, 1});
}

TEST_CASE("model specs round-trip bit-exactly") {
  const HawkesModel model = all_family_model();
  const std::string text = serialize_model(model);
  const HawkesModel back = parse_model(text);
  CHECK(serialize_model(back) == text);

  CHECK(back.dim() == 3);
  CHECK(back.transfer == Transfer::positive_part);
  CHECK(back.mu[1] == model.mu[1]);
  CHECK(std::get<ExponentialKernel>(back.kernels(2, 2)).beta ==
        0.123456789012345678);
  CHECK(std::get<PiecewiseConstantKernel>(back.kernels(1, 1)).levels[1] ==
        -0.125);
  CHECK(back.mark_laws[2].family == MarkLaw::Family::lognormal);
  CHECK(back.impact(0, 1).exponent == 2.0);

  const fs::path dir = fresh_dir("modelspec");
  write_model((dir / "m.txt").string(), model);
  CHECK(serialize_model(read_model((dir / "m.txt").string())) == text);
}

TEST_CASE("hand-written model specs default omitted entries to zero") {
  const std::string text =
      "# comment\n"
      "hawkes-model v1\n"
      "dim 2\n"
      "mu 0 1.5\n"
      "mu 1 0.5\n"
      "\n"
      "kernel 0 1 exponential beta 2 alpha 0.25\n";
  const HawkesModel model = parse_model(text);
  CHECK(is_zero_kernel(model.kernels(0, 0)));
  CHECK(is_zero_kernel(model.kernels(1, 1)));
  CHECK(std::get<ExponentialKernel>(model.kernels(0, 1)).alpha == 0.25);
  CHECK(model.transfer == Transfer::identity);
}

TEST_CASE("model spec errors carry line numbers") {
  const auto error_of = [](const std::string& text) {
    try {
      parse_model(text, "spec");
      return std::string("no error");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
  };

  CHECK(error_of("dim 1\n").find("hawkes-model v1") != std::string::npos);
  CHECK(error_of("hawkes-model v1\nmu 0 1\n").find("missing 'dim'") !=
        std::string::npos);
  CHECK(error_of("hawkes-model v1\ndim 1\nmu 0 1\nmu 0 2\n")
            .find("spec:4:") != std::string::npos);
  CHECK(error_of("hawkes-model v1\ndim 1\nmu 0 1\nkernel 0 1 zero\n")
            .find("spec:4:") != std::string::npos);
  CHECK(error_of("hawkes-model v1\ndim 1\nmu 0 1\nkernel 0 0 cauchy\n")
            .find("unknown kernel family") != std::string::npos);
  CHECK(error_of("hawkes-model v1\ndim 1\nmu 0 1\n"
                 "kernel 0 0 exponential alpha 0.1\n")
            .find("missing key 'beta'") != std::string::npos);
  CHECK(error_of("hawkes-model v1\ndim 1\nmu 0 1\nfrequency 3\n")
            .find("unknown keyword") != std::string::npos);
  CHECK(error_of("hawkes-model v1\ndim 2\nmu 0 1\nkernel 0 0 zero\n")
            .find("missing 'mu 1'") != std::string::npos);
}

TEST_CASE("impact setups round-trip and validate") {
  HimSetup setup;
  setup.config.reversion = PowerLawKernel{0.4, 1.0, 0.5};
  setup.config.contrarian = 0.5;
  setup.config.baseline = 0.125;
  setup.config.impact_coeff = 2.0;
  setup.config.impact_exponent = 0.5;
  setup.meta.edges = {0.0, 4.0, 10.0};
  setup.meta.rates = {2.0, 0.5};

  const std::string text = serialize_him(setup);
  const HimSetup back = parse_him(text);
  CHECK(serialize_him(back) == text);
  CHECK(back.meta.rates == setup.meta.rates);
  CHECK(std::get<PowerLawKernel>(back.config.reversion).gamma == 0.5);

  CHECK_THROWS_AS(parse_him("hawkes-impact v1\ncontrarian 0.5\n"), DataError);
  CHECK_THROWS_AS(
      parse_him("hawkes-impact v1\n"
                "reversion exponential alpha 0.5 beta 1\n"
                "contrarian 1.5\nmeta_edges 0 1\nmeta_rates 1\n"),
      DataError);
}

TEST_CASE("manifests serialize deterministically without timestamps") {
  const fs::path dir = fresh_dir("manifest");
  write_text_file((dir / "in.csv").string(), "time,component\n1,0\n");

  RunManifest manifest;
  manifest.command = "fit --events=in.csv --method=mle";
  manifest.config_hash = fnv1a_64(manifest.command);
  manifest.seed = 7;
  manifest.inputs.emplace_back("in.csv",
                               file_digest((dir / "in.csv").string()));
  manifest.outputs = {"out.txt"};

  const std::string once = serialize_manifest(manifest);
  CHECK(serialize_manifest(manifest) == once);

  const nlohmann::json doc = nlohmann::json::parse(once);
  const std::vector<std::string> keys = {"command", "config_hash", "inputs",
                                         "outputs", "seed", "version"};
  REQUIRE(doc.is_object());
  CHECK(doc.size() == keys.size());
  for (const auto& key : keys) CHECK(doc.contains(key));
  CHECK(doc["seed"] == 7);
  CHECK(doc["version"] == library_version);
  CHECK(doc["inputs"][0]["path"] == "in.csv");

  // The digest follows the content, not the file metadata.
  const std::uint64_t digest = file_digest((dir / "in.csv").string());
  const std::string body = slurp(dir / "in.csv");
  CHECK(digest == fnv1a_64(body.data(), body.size()));
  write_text_file((dir / "in.csv").string(), "time,component\n2,0\n");
  CHECK(file_digest((dir / "in.csv").string()) != digest);
}

TEST_CASE("csv writers quote awkward fields and reject ragged rows") {
  const fs::path dir = fresh_dir("csv");
  const fs::path path = dir / "t.csv";
  write_csv(path.string(), {"note one"}, {"a", "b"},
            {{"plain", "with,comma"}, {"with \"quote\"", "x"}});
  const std::string text = slurp(path);
  CHECK(text == "# note one\na,b\nplain,\"with,comma\"\n"
                "\"with \"\"quote\"\"\",x\n");
  CHECK_THROWS_AS(write_csv(path.string(), {}, {"a", "b"}, {{"only"}}),
                  UsageError);
  CHECK_THROWS_AS(
      write_curve_csv(path.string(), "x", {1.0, 2.0}, {{"y", {1.0}}}),
      UsageError);

  Genealogy gen;
  gen.parent = {-1, 0, 0};
  gen.generation = {0, 1, 1};
  write_genealogy_csv((dir / "g.csv").string(), gen);
  CHECK(slurp(dir / "g.csv") ==
        "index,parent_index,generation\n0,-1,0\n1,0,1\n2,0,1\n");

  EstimationResult result;
  result.objective_trace = {-10.0, -8.5};
  result.gradient_norms = {3.0};
  write_diagnostics_csv((dir / "d.csv").string(), result);
  CHECK(slurp(dir / "d.csv") ==
        "iteration,objective,gradient_norm\n0,-10,3\n1,-8.5,\n");
}

// ---------------------------------------------------------------------------
// Subprocess tests of the command-line front end.

namespace {

std::string example_spec() {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(2, 1.0);
  model.kernels = KernelMatrix(2);
  model.kernels(0, 0) = ExponentialKernel{0.2, 1.5};
  model.kernels(0, 1) = ExponentialKernel{0.3, 1.5};
  model.kernels(1, 0) = ExponentialKernel{0.3, 1.5};
  model.kernels(1, 1) = ExponentialKernel{0.2, 1.5};
  return serialize_model(model);
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(field);
        field.clear();
      } else {
        field.push_back(c);
      }
    }
    fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

TEST_CASE("cli pipeline reproduces byte-identical artifacts") {
  const std::string pipeline[] = {
      "simulate --model model.txt --horizon 150 --seed 11 --out events.csv",
      "fit --events events.csv --horizon 150 --method em --init model.txt "
      "--out fitted.txt --diagnostics diag.csv",
      "gof --events events.csv --horizon 150 --model fitted.txt "
      "--out-prefix check",
  };
  const std::vector<std::string> artifacts = {
      "events.csv",         "events.csv.manifest.json",
      "fitted.txt",         "diag.csv",
      "fitted.txt.manifest.json", "check.residuals.csv",
      "check.ks.csv",       "check.gof.manifest.json",
  };

  fs::path runs[2];
  for (int r = 0; r < 2; ++r) {
    runs[r] = fresh_dir("pipeline" + std::to_string(r));
    write_text_file((runs[r] / "model.txt").string(), example_spec());
    for (const std::string& step : pipeline)
      REQUIRE(run_cli(runs[r], step) == 0);
  }
  for (const std::string& name : artifacts) {
    CAPTURE(name);
    const std::string a = slurp(runs[0] / name);
    CHECK(a == slurp(runs[1] / name));
    CHECK(!a.empty());
  }

  // A different seed must change the event stream, so the equality above is
  // not vacuous.
  REQUIRE(run_cli(runs[0],
                  "simulate --model model.txt --horizon 150 --seed 12 "
                  "--out events2.csv") == 0);
  CHECK(slurp(runs[0] / "events.csv") != slurp(runs[0] / "events2.csv"));

  // The fitted spec parses and stays inside the stationary region.
  const HawkesModel fitted =
      read_model((runs[0] / "fitted.txt").string());
  CHECK(stability(fitted.kernels).spectral_radius < 1.0);
}

TEST_CASE("cli exit codes follow the error taxonomy") {
  const fs::path dir = fresh_dir("exitcodes");
  write_text_file((dir / "model.txt").string(), example_spec());

  CHECK(run_cli(dir, "--help") == 0);
  CHECK(run_cli(dir, "simulate --help") == 0);
  CHECK(run_cli(dir, "frobnicate") == 1);
  CHECK(run_cli(dir, "simulate --model model.txt") == 1);  // missing flags
  CHECK(run_cli(dir, "fit --events none.csv --method mle --init model.txt "
                     "--out f.txt") == 2);
  CHECK(run_cli(dir, "simulate --model model.txt --horizon 10 "
                     "--algorithm time_change --genealogy g.csv "
                     "--out e.csv") == 1);

  // An unstable spec is a numerical failure, not a crash.
  HawkesModel runaway;
  runaway.mu = Eigen::VectorXd::Constant(1, 1.0);
  runaway.kernels = KernelMatrix(1);
  runaway.kernels(0, 0) = ExponentialKernel{1.2, 1.0};
  write_text_file((dir / "unstable.txt").string(), serialize_model(runaway));
  CHECK(run_cli(dir, "stats --model unstable.txt --out-prefix u") == 3);
}

TEST_CASE("cli stats emits the closed-form intensity tables") {
  const fs::path dir = fresh_dir("stats");
  write_text_file((dir / "model.txt").string(), example_spec());
  REQUIRE(run_cli(dir, "stats --model model.txt --out-prefix ex "
                       "--lag-max 5 --lag-count 10") == 0);

  const auto lambda = read_csv_rows(dir / "ex.lambda.csv");
  REQUIRE(lambda.size() == 3);  // header + one row per component
  CHECK(lambda[0] ==
        std::vector<std::string>{"component", "intensity", "exogenous"});
  for (int i = 1; i <= 2; ++i) {
    const double value = std::stod(lambda[i][1]);
    CHECK(value == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::stod(lambda[i][2]) == 1.0);
  }

  // Attribution tables add up to the mean intensity.
  const auto causality = read_csv_rows(dir / "ex.causality.csv");
  REQUIRE(causality.size() == 9);  // header + 2 tables x 4 entries
  double direct_row0 = 1.0;       // exogenous part
  for (std::size_t r = 1; r < causality.size(); ++r) {
    if (causality[r][0] == "direct" && causality[r][1] == "0")
      direct_row0 += std::stod(causality[r][3]);
  }
  CHECK(direct_row0 == doctest::Approx(2.0).epsilon(1e-9));

  const auto diffusion = read_csv_rows(dir / "ex.diffusion.csv");
  REQUIRE(diffusion.size() == 5);
  CHECK(std::stod(diffusion[1][3]) > 0.0);  // asymptotic variance rate

  CHECK(fs::exists(dir / "ex.covariance.csv"));
  CHECK(fs::exists(dir / "ex.stats.manifest.json"));
}

TEST_CASE("cli gof records a rejection without failing the run") {
  const fs::path dir = fresh_dir("gofreject");
  HawkesModel clustered;
  clustered.mu = Eigen::VectorXd::Constant(1, 0.3);
  clustered.kernels = KernelMatrix(1);
  clustered.kernels(0, 0) = ExponentialKernel{0.8, 2.0};
  write_text_file((dir / "true.txt").string(), serialize_model(clustered));

  HawkesModel poisson;
  poisson.mu = Eigen::VectorXd::Constant(1, 1.5);
  poisson.kernels = KernelMatrix(1);
  write_text_file((dir / "poisson.txt").string(), serialize_model(poisson));

  REQUIRE(run_cli(dir, "simulate --model true.txt --horizon 3000 --seed 5 "
                       "--burn-in 20 --out events.csv") == 0);
  REQUIRE(run_cli(dir, "gof --events events.csv --horizon 3000 "
                       "--model poisson.txt --out-prefix reject") == 0);

  const auto ks = read_csv_rows(dir / "reject.ks.csv");
  REQUIRE(ks.size() >= 2);
  REQUIRE(ks[1][0] == "pooled");
  CHECK(std::stod(ks[1][2]) < 1e-3);
}

TEST_CASE("cli reflexivity and signature emit their tables") {
  const fs::path dir = fresh_dir("finance");
  HawkesModel one_d;
  one_d.mu = Eigen::VectorXd::Constant(1, 1.0);
  one_d.kernels = KernelMatrix(1);
  one_d.kernels(0, 0) = ExponentialKernel{0.4, 2.0};
  write_text_file((dir / "m1.txt").string(), serialize_model(one_d));
  write_text_file((dir / "m2.txt").string(), example_spec());

  REQUIRE(run_cli(dir, "simulate --model m1.txt --horizon 800 --seed 9 "
                       "--out one.csv") == 0);
  REQUIRE(run_cli(dir, "reflexivity --events one.csv --horizon 800 "
                       "--method variance_ratio --method mle_exponential "
                       "--out refl.csv") == 0);
  const auto refl = read_csv_rows(dir / "refl.csv");
  REQUIRE(refl.size() == 3);
  CHECK(refl[1][0] == "variance_ratio");
  CHECK(refl[2][0] == "mle_exponential");
  const double mle = std::stod(refl[2][2]);
  CHECK(mle > 0.1);
  CHECK(mle < 0.7);

  REQUIRE(run_cli(dir, "simulate --model m2.txt --horizon 400 --seed 13 "
                       "--out two.csv") == 0);
  REQUIRE(run_cli(dir, "signature --events two.csv --horizon 400 "
                       "--scale 0.5 --scale 1 --scale 4 --out sig.csv") == 0);
  const auto sig = read_csv_rows(dir / "sig.csv");
  REQUIRE(sig.size() == 4);
  CHECK(sig[0] == std::vector<std::string>{"scale", "value", "std_error"});
  CHECK(std::stod(sig[1][1]) > 0.0);

  REQUIRE(run_cli(dir, "epps --events-a two.csv --events-b two.csv "
                       "--horizon 400 --scale 1 --scale 2 "
                       "--out epps.csv") == 0);
  const auto epps = read_csv_rows(dir / "epps.csv");
  REQUIRE(epps.size() == 3);
  // A path against itself realizes its own variance.
  CHECK(std::stod(epps[1][1]) > 0.0);
}

TEST_CASE("cli impact emits deterministic and sampled curves") {
  const fs::path dir = fresh_dir("impact");
  HimSetup setup;
  setup.config.reversion = ExponentialKernel{0.6, 2.0};
  setup.config.contrarian = 0.5;
  setup.config.baseline = 0.2;
  setup.meta.edges = {0.0, 4.0};
  setup.meta.rates = {2.0};
  write_him((dir / "him.txt").string(), setup);
  // Round-trips through the file the subcommand will read.
  CHECK(serialize_him(read_him((dir / "him.txt").string())) ==
        serialize_him(setup));

  REQUIRE(run_cli(dir, "impact --config him.txt --horizon 40 --step 0.05 "
                       "--expected-out expected.csv --paths 40 --seed 3 "
                       "--mc-out mc.csv") == 0);

  const std::string expected = slurp(dir / "expected.csv");
  CHECK(expected.find("# permanent impact: ") != std::string::npos);
  const auto exp_rows = read_csv_rows(dir / "expected.csv");
  REQUIRE(exp_rows.size() > 100);
  CHECK(exp_rows[0] == std::vector<std::string>{"time", "impact", "rate"});

  const auto mc_rows = read_csv_rows(dir / "mc.csv");
  REQUIRE(mc_rows.size() > 10);
  CHECK(mc_rows[0] == std::vector<std::string>{"time", "mean", "std_error"});
  CHECK(fs::exists(dir / "mc.csv.manifest.json"));

  CHECK(run_cli(dir, "impact --config him.txt --horizon 40") == 1);
}
