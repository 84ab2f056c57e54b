#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hawkes/estimate.hpp"
#include "hawkes/events.hpp"
#include "hawkes/finance.hpp"
#include "hawkes/model.hpp"

// File formats shared by the command-line front end and the tests.
//
// Event files.
//   CSV: UTF-8, dot decimal, mandatory header `time,component` or
//   `time,component,mark`; one event per row; lines starting with `#` are
//   comments. Components are either non-negative integers or textual labels
//   resolved through IngestOptions::component_map.
//   NDJSON: one object per line, `{"t": <time>, "c": <component>}` with an
//   optional `"m": <mark>`; `c` may be a number or a label string. Mark
//   presence must be consistent across rows.
//
// Model spec: a line-oriented key-value document. Canonical form (the one
// serialize_model emits, which round-trips bit-exactly):
//   hawkes-model v1
//   dim D
//   transfer identity|positive_part
//   mu <i> <value>                     (one line per component)
//   kernel <i> <j> zero
//   kernel <i> <j> exponential alpha <a> beta <b>
//   kernel <i> <j> sumexp alphas <a...> betas <b...>
//   kernel <i> <j> powerlaw alpha <a> beta <b> gamma <g>
//   kernel <i> <j> piecewise edges <e...> levels <l...>
//   mark_law <j> constant|uniform|exponential|lognormal a <a> b <b>
//   mark_impact <i> <j> coeff <c> exponent <e>
// Kernel entries omitted by hand-written specs default to zero; `#` comments
// and blank lines are ignored; mark lines only appear for marked models.
//
// Impact setup: same tokenizer, header line `hawkes-impact v1`, then
//   reversion <kernel tokens as above>
//   contrarian <C> / baseline <mu> / impact_coeff <k> / impact_exponent <a>
//   meta_edges <t...> / meta_rates <r...>
//
// Run manifest: a JSON object with keys command, config_hash, inputs
// (path + content digest), outputs, seed, version. Deliberately carries no
// timestamps or host data, so identical inputs reproduce identical bytes.

namespace hawkes {

enum class EventFormat { csv, ndjson };

// How duplicated timestamps are resolved on ingestion: `stable` keeps them
// (ordered by component, then input order), `jitter` perturbs every tied
// event after the first by a deterministic uniform draw in
// (0, jitter_amplitude).
enum class TiePolicy { stable, jitter };

struct IngestOptions {
  EventFormat format = EventFormat::csv;
  // Every input timestamp is multiplied by this factor first (1e-6 turns
  // integer microsecond stamps into seconds).
  double time_scale = 1.0;
  // Label -> component index. Indices must form 0..K-1. When empty, the
  // component field must already be a non-negative integer.
  std::map<std::string, int> component_map;
  TiePolicy tie_policy = TiePolicy::stable;
  // Required for the jitter policy; must stay below the smallest positive
  // gap between distinct timestamps so the perturbation cannot reorder
  // events.
  double jitter_amplitude = 0;
  std::uint64_t jitter_seed = 0;
  // Session window [start, end) applied after scaling; events outside are
  // dropped (and counted) and the clock is rebased to the session start.
  // NaN disables either bound.
  double session_start = std::numeric_limits<double>::quiet_NaN();
  double session_end = std::numeric_limits<double>::quiet_NaN();
  // Drop repeated (time, component) rows, keeping the first. Throttled feeds
  // emit such duplicates.
  bool dedupe_throttled = false;
  // Observation horizon; 0 takes the last (post-processing) event time.
  double horizon = 0;
  // Number of components; 0 derives it from the label map when present,
  // otherwise from the largest component index seen.
  int dim = 0;
};

// Ingestion accounting: rows_read always equals events_kept plus the two
// drop counters, so no row goes missing silently.
struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t events_kept = 0;
  std::size_t dropped_session = 0;
  std::size_t dropped_duplicates = 0;
  std::size_t adjusted_ties = 0;  // timestamps moved by the jitter policy
  std::vector<std::string> notes;
};

// Core of the reader, exposed for in-memory use; `origin` names the source
// in error messages (malformed rows report "origin:line: ...", unknown
// labels are collected and reported together).
EventSequence parse_events(const std::string& text,
                           const IngestOptions& options = {},
                           IngestReport* report = nullptr,
                           const std::string& origin = "events");

EventSequence read_events(const std::string& path,
                          const IngestOptions& options = {},
                          IngestReport* report = nullptr);

// Writers always emit numeric component indices and full-precision numbers;
// read_events(write_events(x)) reproduces x exactly.
void write_events(const std::string& path, const EventSequence& events,
                  EventFormat format = EventFormat::csv);

std::string serialize_model(const HawkesModel& model);
HawkesModel parse_model(const std::string& text,
                        const std::string& origin = "model spec");
HawkesModel read_model(const std::string& path);
void write_model(const std::string& path, const HawkesModel& model);

// Impact-run configuration: the price-model half and the execution schedule
// travel together because neither means much alone.
struct HimSetup {
  HimConfig config;
  MetaOrderProfile meta;
};

std::string serialize_him(const HimSetup& setup);
HimSetup parse_him(const std::string& text,
                   const std::string& origin = "impact config");
HimSetup read_him(const std::string& path);
void write_him(const std::string& path, const HimSetup& setup);

struct RunManifest {
  // Canonical command line: subcommand followed by the parsed flags in
  // sorted order. config_hash is the FNV-1a digest of this string.
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;  // path, digest
  std::vector<std::string> outputs;
};

// FNV-1a over the raw bytes of the file.
std::uint64_t file_digest(const std::string& path);

std::string serialize_manifest(const RunManifest& manifest);
void write_manifest(const std::string& path, const RunManifest& manifest);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Generic CSV writer all table artifacts funnel through: optional `# ...`
// comment lines, then the header, then the rows. Fields containing commas,
// quotes or newlines are quoted with doubled inner quotes.
void write_csv(const std::string& path,
               const std::vector<std::string>& comments,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Column-oriented convenience for curves: an x column plus named value
// columns, all of the same length.
void write_curve_csv(
    const std::string& path, const std::string& x_name,
    const std::vector<double>& x,
    const std::vector<std::pair<std::string, std::vector<double>>>& columns,
    const std::vector<std::string>& comments = {});

// `row,col,<value_name>` triplets in row-major order.
void write_matrix_csv(const std::string& path, const std::string& value_name,
                      const Eigen::MatrixXd& matrix,
                      const std::vector<std::string>& comments = {});

// `index,parent_index,generation`, aligned with the event order of the
// sequence the genealogy came from.
void write_genealogy_csv(const std::string& path, const Genealogy& genealogy);

// `iteration,objective,gradient_norm`; the gradient column is left empty for
// methods that do not track one.
void write_diagnostics_csv(const std::string& path,
                           const EstimationResult& result);

// `component,index,residual` increments in event order.
void write_residuals_csv(const std::string& path, const GoodnessOfFit& gof);

// `scope,statistic,p_value,sample_size` with one pooled row and one row per
// component; components without events carry empty statistics.
void write_ks_csv(const std::string& path, const GoodnessOfFit& gof);

// `method,label,estimate,band,notes`; report warnings become comment lines.
void write_reflexivity_csv(const std::string& path,
                           const ReflexivityReport& report);

}  // namespace hawkes
