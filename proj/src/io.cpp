#include "hawkes/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hawkes/common.hpp"
#include "hawkes/numerics.hpp"
#include "hawkes/rng.hpp"

namespace hawkes {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r";
  const auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail_at(const std::string& origin, std::size_t line,
                          const std::string& what) {
  throw DataError(origin + ":" + std::to_string(line) + ": " + what);
}

// Locale-independent full-token parses; anything trailing is an error.
double parse_number(const std::string& token, const std::string& origin,
                    std::size_t line) {
  double v = 0;
  const char* b = token.data();
  const char* e = b + token.size();
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e)
    fail_at(origin, line, "malformed number '" + token + "'");
  return v;
}

long parse_integer(const std::string& token, const std::string& origin,
                   std::size_t line) {
  long v = 0;
  const char* b = token.data();
  const char* e = b + token.size();
  const auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e)
    fail_at(origin, line, "malformed integer '" + token + "'");
  return v;
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

struct RawEvent {
  double time = 0;
  int component = 0;
  double mark = 0;
  std::size_t line = 0;
};

// Resolves a component field against the label map (or as a bare index) and
// collects misses so a single error can list every offender.
int resolve_component(const std::string& token, const IngestOptions& options,
                      std::set<std::string>& unknown,
                      const std::string& origin, std::size_t line) {
  if (!options.component_map.empty()) {
    const auto it = options.component_map.find(token);
    if (it == options.component_map.end()) {
      unknown.insert(token);
      return -1;
    }
    return it->second;
  }
  const long idx = parse_integer(token, origin, line);
  if (idx < 0) fail_at(origin, line, "negative component index");
  return static_cast<int>(idx);
}

struct ParsedRows {
  std::vector<RawEvent> rows;
  bool marked = false;
};

ParsedRows parse_csv_rows(const std::string& text,
                          const IngestOptions& options,
                          const std::string& origin,
                          std::set<std::string>& unknown) {
  ParsedRows out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split_csv_row(t);
    if (!have_header) {
      if (fields.size() == 2 && fields[0] == "time" &&
          fields[1] == "component") {
        out.marked = false;
      } else if (fields.size() == 3 && fields[0] == "time" &&
                 fields[1] == "component" && fields[2] == "mark") {
        out.marked = true;
      } else {
        fail_at(origin, lineno,
                "expected header 'time,component[,mark]', got '" + t + "'");
      }
      have_header = true;
      width = fields.size();
      continue;
    }
    if (fields.size() != width)
      fail_at(origin, lineno,
              "expected " + std::to_string(width) + " fields, got " +
                  std::to_string(fields.size()));
    RawEvent row;
    row.line = lineno;
    row.time = parse_number(fields[0], origin, lineno);
    row.component = resolve_component(fields[1], options, unknown, origin,
                                      lineno);
    if (out.marked) row.mark = parse_number(fields[2], origin, lineno);
    out.rows.push_back(row);
  }
  if (!have_header)
    throw DataError(origin + ": missing 'time,component[,mark]' header");
  return out;
}

ParsedRows parse_ndjson_rows(const std::string& text,
                             const IngestOptions& options,
                             const std::string& origin,
                             std::set<std::string>& unknown) {
  ParsedRows out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const nlohmann::json obj = nlohmann::json::parse(t, nullptr, false);
    if (obj.is_discarded() || !obj.is_object())
      fail_at(origin, lineno, "malformed JSON object");
    if (!obj.contains("t") || !obj["t"].is_number())
      fail_at(origin, lineno, "missing numeric field 't'");
    if (!obj.contains("c"))
      fail_at(origin, lineno, "missing field 'c'");
    RawEvent row;
    row.line = lineno;
    row.time = obj["t"].get<double>();
    if (obj["c"].is_string()) {
      row.component = resolve_component(obj["c"].get<std::string>(), options,
                                        unknown, origin, lineno);
    } else if (obj["c"].is_number_integer()) {
      const long idx = obj["c"].get<long>();
      if (!options.component_map.empty()) {
        // A declared label vocabulary makes bare indices ambiguous; route
        // them through the map like any other token.
        unknown.insert(std::to_string(idx));
        row.component = -1;
      } else {
        if (idx < 0) fail_at(origin, lineno, "negative component index");
        row.component = static_cast<int>(idx);
      }
    } else {
      fail_at(origin, lineno, "field 'c' must be an integer or a label");
    }
    const bool has_mark = obj.contains("m");
    if (has_mark && !obj["m"].is_number())
      fail_at(origin, lineno, "field 'm' must be a number");
    if (first) {
      out.marked = has_mark;
      first = false;
    } else if (has_mark != out.marked) {
      fail_at(origin, lineno, "field 'm' present on some rows but not all");
    }
    if (has_mark) row.mark = obj["m"].get<double>();
    out.rows.push_back(row);
  }
  return out;
}

void check_ingest_options(const IngestOptions& options) {
  if (!(options.time_scale > 0) || !std::isfinite(options.time_scale))
    throw UsageError("time scale must be positive and finite");
  if (options.horizon < 0 || !std::isfinite(options.horizon))
    throw UsageError("horizon must be non-negative and finite");
  if (options.dim < 0) throw UsageError("dimension must be non-negative");
  if (!options.component_map.empty()) {
    std::set<int> indices;
    for (const auto& [label, idx] : options.component_map) {
      if (idx < 0)
        throw UsageError("component map index for '" + label +
                         "' is negative");
      if (!indices.insert(idx).second)
        throw UsageError("component map assigns index " +
                         std::to_string(idx) + " twice");
    }
    if (*indices.begin() != 0 ||
        *indices.rbegin() != static_cast<int>(indices.size()) - 1)
      throw UsageError("component map indices must form 0..K-1");
  }
  if (options.tie_policy == TiePolicy::jitter &&
      (!(options.jitter_amplitude > 0) ||
       !std::isfinite(options.jitter_amplitude)))
    throw UsageError("jitter policy needs a positive finite amplitude");
  const bool has_start = !std::isnan(options.session_start);
  const bool has_end = !std::isnan(options.session_end);
  if (has_start && has_end && options.session_end <= options.session_start)
    throw UsageError("session end must exceed session start");
}

void append_note(IngestReport& report, std::size_t count,
                 const std::string& what) {
  if (count > 0)
    report.notes.push_back(std::to_string(count) + " " + what);
}

}  // namespace

EventSequence parse_events(const std::string& text,
                           const IngestOptions& options, IngestReport* report,
                           const std::string& origin) {
  check_ingest_options(options);
  std::set<std::string> unknown;
  ParsedRows parsed = options.format == EventFormat::csv
                          ? parse_csv_rows(text, options, origin, unknown)
                          : parse_ndjson_rows(text, options, origin, unknown);
  if (!unknown.empty()) {
    std::string msg = origin + ": unknown component labels:";
    for (const auto& label : unknown) msg += " '" + label + "'";
    throw DataError(msg);
  }

  IngestReport local;
  local.rows_read = parsed.rows.size();

  const bool has_start = !std::isnan(options.session_start);
  const bool has_end = !std::isnan(options.session_end);

  EventSequence events;
  events.times.reserve(parsed.rows.size());
  events.components.reserve(parsed.rows.size());
  if (parsed.marked) events.marks.reserve(parsed.rows.size());
  int max_component = -1;
  for (const RawEvent& row : parsed.rows) {
    double t = row.time * options.time_scale;
    if (!std::isfinite(t)) fail_at(origin, row.line, "non-finite time");
    if ((has_start && t < options.session_start) ||
        (has_end && t >= options.session_end)) {
      ++local.dropped_session;
      continue;
    }
    if (has_start) t -= options.session_start;
    if (t < 0)
      fail_at(origin, row.line, "negative time " + format_double17(t));
    if (options.horizon > 0 && t > options.horizon)
      fail_at(origin, row.line,
              "event time " + format_double17(t) +
                  " beyond the declared horizon " +
                  format_double17(options.horizon));
    if (parsed.marked && !std::isfinite(row.mark))
      fail_at(origin, row.line, "non-finite mark");
    events.times.push_back(t);
    events.components.push_back(row.component);
    if (parsed.marked) events.marks.push_back(row.mark);
    max_component = std::max(max_component, row.component);
  }

  events.sort_events();

  if (options.dedupe_throttled && events.size() > 1) {
    EventSequence deduped;
    deduped.times.reserve(events.size());
    deduped.components.reserve(events.size());
    if (events.marked()) deduped.marks.reserve(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
      if (k > 0 && events.times[k] == deduped.times.back() &&
          events.components[k] == deduped.components.back()) {
        ++local.dropped_duplicates;
        continue;
      }
      deduped.times.push_back(events.times[k]);
      deduped.components.push_back(events.components[k]);
      if (events.marked()) deduped.marks.push_back(events.marks[k]);
    }
    events.times = std::move(deduped.times);
    events.components = std::move(deduped.components);
    events.marks = std::move(deduped.marks);
  }

  if (options.tie_policy == TiePolicy::jitter && events.size() > 1) {
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < events.size(); ++k) {
      const double gap = events.times[k] - events.times[k - 1];
      if (gap > 0) min_gap = std::min(min_gap, gap);
    }
    if (options.jitter_amplitude >= min_gap)
      throw DataError(origin + ": jitter amplitude " +
                      format_double17(options.jitter_amplitude) +
                      " is not below the smallest inter-event gap " +
                      format_double17(min_gap));
    Rng rng(options.jitter_seed, 0x6a6974746572ULL);
    std::size_t k = 0;
    while (k < events.size()) {
      std::size_t end = k + 1;
      while (end < events.size() && events.times[end] == events.times[k])
        ++end;
      if (end - k > 1) {
        // First event keeps the stamp; the rest move by sorted draws so the
        // group stays ordered and the next distinct stamp stays ahead.
        std::vector<double> offsets(end - k - 1);
        for (double& u : offsets)
          u = rng.uniform() * options.jitter_amplitude;
        std::sort(offsets.begin(), offsets.end());
        for (std::size_t j = k + 1; j < end; ++j)
          events.times[j] += offsets[j - k - 1];
        local.adjusted_ties += end - k - 1;
      }
      k = end;
    }
  }

  int dim = max_component + 1;
  if (!options.component_map.empty())
    dim = std::max(dim, static_cast<int>(options.component_map.size()));
  if (options.dim > 0) {
    if (options.dim < dim)
      throw DataError(origin + ": component index " + std::to_string(dim - 1) +
                      " does not fit the declared dimension " +
                      std::to_string(options.dim));
    dim = options.dim;
  }
  events.dim = std::max(dim, 1);
  events.horizon = options.horizon > 0
                       ? options.horizon
                       : (events.size() ? events.times.back() : 0.0);
  events.validate();

  local.events_kept = events.size();
  append_note(local, local.dropped_session, "rows outside the session window");
  append_note(local, local.dropped_duplicates,
              "duplicate rows dropped by the throttle filter");
  append_note(local, local.adjusted_ties, "tied timestamps jittered");
  if (report) *report = std::move(local);
  return events;
}

EventSequence read_events(const std::string& path,
                          const IngestOptions& options, IngestReport* report) {
  return parse_events(read_text_file(path), options, report, path);
}

void write_events(const std::string& path, const EventSequence& events,
                  EventFormat format) {
  std::string out;
  if (format == EventFormat::csv) {
    out = events.marked() ? "time,component,mark\n" : "time,component\n";
    for (std::size_t k = 0; k < events.size(); ++k) {
      out += format_double17(events.times[k]);
      out += ',';
      out += std::to_string(events.components[k]);
      if (events.marked()) {
        out += ',';
        out += format_double17(events.marks[k]);
      }
      out += '\n';
    }
  } else {
    for (std::size_t k = 0; k < events.size(); ++k) {
      out += "{\"t\":" + format_double17(events.times[k]) +
             ",\"c\":" + std::to_string(events.components[k]);
      if (events.marked()) out += ",\"m\":" + format_double17(events.marks[k]);
      out += "}\n";
    }
  }
  write_text_file(path, out);
}

namespace {

const char* transfer_name(Transfer t) {
  return t == Transfer::identity ? "identity" : "positive_part";
}

const char* mark_family_name(MarkLaw::Family f) {
  switch (f) {
    case MarkLaw::Family::constant: return "constant";
    case MarkLaw::Family::uniform: return "uniform";
    case MarkLaw::Family::exponential: return "exponential";
    case MarkLaw::Family::lognormal: return "lognormal";
  }
  return "constant";
}

void append_list(std::string& out, const std::vector<double>& values) {
  for (double v : values) {
    out += ' ';
    out += format_double17(v);
  }
}

void append_kernel(std::string& out, const Kernel& kernel) {
  if (std::holds_alternative<ZeroKernel>(kernel)) {
    out += "zero";
  } else if (const auto* e = std::get_if<ExponentialKernel>(&kernel)) {
    out += "exponential alpha " + format_double17(e->alpha) + " beta " +
           format_double17(e->beta);
  } else if (const auto* s = std::get_if<SumExponentialKernel>(&kernel)) {
    out += "sumexp alphas";
    append_list(out, s->alphas);
    out += " betas";
    append_list(out, s->betas);
  } else if (const auto* p = std::get_if<PowerLawKernel>(&kernel)) {
    out += "powerlaw alpha " + format_double17(p->alpha) + " beta " +
           format_double17(p->beta) + " gamma " + format_double17(p->gamma);
  } else if (const auto* w = std::get_if<PiecewiseConstantKernel>(&kernel)) {
    out += "piecewise edges";
    append_list(out, w->edges);
    out += " levels";
    append_list(out, w->levels);
  }
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

// Reads keyword-tagged scalar parameters, e.g. "alpha 0.2 beta 1.5" against
// keys {alpha, beta}; every key must appear exactly once.
std::map<std::string, double> parse_keyed(
    const std::vector<std::string>& tokens, std::size_t start,
    const std::vector<std::string>& keys, const std::string& origin,
    std::size_t line) {
  std::map<std::string, double> out;
  std::size_t k = start;
  while (k < tokens.size()) {
    const std::string& key = tokens[k];
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      fail_at(origin, line, "unexpected token '" + key + "'");
    if (out.count(key)) fail_at(origin, line, "duplicate key '" + key + "'");
    if (k + 1 >= tokens.size())
      fail_at(origin, line, "missing value after '" + key + "'");
    out[key] = parse_number(tokens[k + 1], origin, line);
    k += 2;
  }
  for (const auto& key : keys)
    if (!out.count(key)) fail_at(origin, line, "missing key '" + key + "'");
  return out;
}

// Two keyword-introduced lists, e.g. "edges 0 1 2 levels 0.3 -0.1".
std::pair<std::vector<double>, std::vector<double>> parse_two_lists(
    const std::vector<std::string>& tokens, std::size_t start,
    const std::string& first_key, const std::string& second_key,
    const std::string& origin, std::size_t line) {
  if (start >= tokens.size() || tokens[start] != first_key)
    fail_at(origin, line, "expected '" + first_key + "' list");
  std::vector<double> first;
  std::size_t k = start + 1;
  while (k < tokens.size() && tokens[k] != second_key)
    first.push_back(parse_number(tokens[k++], origin, line));
  if (k >= tokens.size())
    fail_at(origin, line, "expected '" + second_key + "' list");
  std::vector<double> second;
  ++k;
  while (k < tokens.size())
    second.push_back(parse_number(tokens[k++], origin, line));
  if (first.empty() || second.empty())
    fail_at(origin, line, "empty parameter list");
  return {std::move(first), std::move(second)};
}

Kernel parse_kernel_tokens(const std::vector<std::string>& tokens,
                           std::size_t start, const std::string& origin,
                           std::size_t line) {
  if (start >= tokens.size())
    fail_at(origin, line, "missing kernel family");
  const std::string& family = tokens[start];
  if (family == "zero") {
    if (start + 1 != tokens.size())
      fail_at(origin, line, "zero kernel takes no parameters");
    return ZeroKernel{};
  }
  if (family == "exponential") {
    const auto p =
        parse_keyed(tokens, start + 1, {"alpha", "beta"}, origin, line);
    return ExponentialKernel{p.at("alpha"), p.at("beta")};
  }
  if (family == "powerlaw") {
    const auto p = parse_keyed(tokens, start + 1, {"alpha", "beta", "gamma"},
                               origin, line);
    return PowerLawKernel{p.at("alpha"), p.at("beta"), p.at("gamma")};
  }
  if (family == "sumexp") {
    auto [alphas, betas] =
        parse_two_lists(tokens, start + 1, "alphas", "betas", origin, line);
    return SumExponentialKernel{std::move(alphas), std::move(betas)};
  }
  if (family == "piecewise") {
    auto [edges, levels] =
        parse_two_lists(tokens, start + 1, "edges", "levels", origin, line);
    return PiecewiseConstantKernel{std::move(edges), std::move(levels)};
  }
  fail_at(origin, line, "unknown kernel family '" + family + "'");
}

int parse_index(const std::vector<std::string>& tokens, std::size_t pos,
                int dim, const std::string& origin, std::size_t line) {
  if (pos >= tokens.size()) fail_at(origin, line, "missing component index");
  const long idx = parse_integer(tokens[pos], origin, line);
  if (idx < 0 || idx >= dim)
    fail_at(origin, line,
            "component index " + std::to_string(idx) + " outside 0.." +
                std::to_string(dim - 1));
  return static_cast<int>(idx);
}

// Line scanner shared by the spec formats: yields (line number, tokens) for
// content lines, checks the magic header.
std::vector<std::pair<std::size_t, std::vector<std::string>>> spec_lines(
    const std::string& text, const std::string& magic,
    const std::string& origin) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_magic = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto tokens = tokenize(t);
    if (!have_magic) {
      if (tokens.size() != 2 || tokens[0] != magic || tokens[1] != "v1")
        fail_at(origin, lineno, "expected header '" + magic + " v1'");
      have_magic = true;
      continue;
    }
    out.emplace_back(lineno, std::move(tokens));
  }
  if (!have_magic)
    throw DataError(origin + ": missing '" + magic + " v1' header");
  return out;
}

}  // namespace

std::string serialize_model(const HawkesModel& model) {
  const int d = model.dim();
  std::string out = "hawkes-model v1\n";
  out += "dim " + std::to_string(d) + "\n";
  out += std::string("transfer ") + transfer_name(model.transfer) + "\n";
  for (int i = 0; i < d; ++i)
    out += "mu " + std::to_string(i) + " " + format_double17(model.mu[i]) +
           "\n";
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      out += "kernel " + std::to_string(i) + " " + std::to_string(j) + " ";
      append_kernel(out, model.kernels(i, j));
      out += "\n";
    }
  if (model.marked()) {
    for (int j = 0; j < d; ++j) {
      const MarkLaw& law = model.mark_laws[j];
      out += "mark_law " + std::to_string(j) + " " +
             mark_family_name(law.family) + " a " + format_double17(law.a) +
             " b " + format_double17(law.b) + "\n";
    }
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const MarkImpact& imp = model.impact(i, j);
        out += "mark_impact " + std::to_string(i) + " " + std::to_string(j) +
               " coeff " + format_double17(imp.coeff) + " exponent " +
               format_double17(imp.exponent) + "\n";
      }
  }
  return out;
}

HawkesModel parse_model(const std::string& text, const std::string& origin) {
  const auto lines = spec_lines(text, "hawkes-model", origin);

  int dim = 0;
  for (const auto& [lineno, tokens] : lines) {
    if (tokens[0] == "dim") {
      if (dim > 0) fail_at(origin, lineno, "duplicate 'dim' line");
      if (tokens.size() != 2) fail_at(origin, lineno, "expected 'dim D'");
      const long d = parse_integer(tokens[1], origin, lineno);
      if (d < 1) fail_at(origin, lineno, "dimension must be at least 1");
      dim = static_cast<int>(d);
    }
  }
  if (dim == 0) throw DataError(origin + ": missing 'dim' line");

  HawkesModel model;
  model.mu = Eigen::VectorXd::Zero(dim);
  model.kernels = KernelMatrix(dim);
  std::vector<bool> mu_set(dim, false);
  std::vector<bool> kernel_set(static_cast<std::size_t>(dim) * dim, false);
  std::vector<bool> law_set(dim, false);
  std::vector<MarkLaw> laws(dim);
  std::vector<MarkImpact> impacts(static_cast<std::size_t>(dim) * dim);
  bool any_mark = false;

  for (const auto& [lineno, tokens] : lines) {
    const std::string& key = tokens[0];
    if (key == "dim") continue;
    if (key == "transfer") {
      if (tokens.size() != 2)
        fail_at(origin, lineno, "expected 'transfer <name>'");
      if (tokens[1] == "identity") {
        model.transfer = Transfer::identity;
      } else if (tokens[1] == "positive_part") {
        model.transfer = Transfer::positive_part;
      } else {
        fail_at(origin, lineno, "unknown transfer '" + tokens[1] + "'");
      }
    } else if (key == "mu") {
      if (tokens.size() != 3) fail_at(origin, lineno, "expected 'mu i value'");
      const int i = parse_index(tokens, 1, dim, origin, lineno);
      if (mu_set[i]) fail_at(origin, lineno, "duplicate 'mu' entry");
      mu_set[i] = true;
      model.mu[i] = parse_number(tokens[2], origin, lineno);
    } else if (key == "kernel") {
      const int i = parse_index(tokens, 1, dim, origin, lineno);
      const int j = parse_index(tokens, 2, dim, origin, lineno);
      const std::size_t slot = static_cast<std::size_t>(i) * dim + j;
      if (kernel_set[slot]) fail_at(origin, lineno, "duplicate kernel entry");
      kernel_set[slot] = true;
      model.kernels(i, j) = parse_kernel_tokens(tokens, 3, origin, lineno);
    } else if (key == "mark_law") {
      any_mark = true;
      const int j = parse_index(tokens, 1, dim, origin, lineno);
      if (law_set[j]) fail_at(origin, lineno, "duplicate mark law");
      law_set[j] = true;
      if (tokens.size() < 3) fail_at(origin, lineno, "missing mark family");
      MarkLaw law;
      const std::string& family = tokens[2];
      if (family == "constant") {
        law.family = MarkLaw::Family::constant;
      } else if (family == "uniform") {
        law.family = MarkLaw::Family::uniform;
      } else if (family == "exponential") {
        law.family = MarkLaw::Family::exponential;
      } else if (family == "lognormal") {
        law.family = MarkLaw::Family::lognormal;
      } else {
        fail_at(origin, lineno, "unknown mark family '" + family + "'");
      }
      const auto p = parse_keyed(tokens, 3, {"a", "b"}, origin, lineno);
      law.a = p.at("a");
      law.b = p.at("b");
      laws[j] = law;
    } else if (key == "mark_impact") {
      any_mark = true;
      const int i = parse_index(tokens, 1, dim, origin, lineno);
      const int j = parse_index(tokens, 2, dim, origin, lineno);
      const auto p =
          parse_keyed(tokens, 3, {"coeff", "exponent"}, origin, lineno);
      impacts[static_cast<std::size_t>(i) * dim + j] =
          MarkImpact{p.at("coeff"), p.at("exponent")};
    } else {
      fail_at(origin, lineno, "unknown keyword '" + key + "'");
    }
  }

  for (int i = 0; i < dim; ++i)
    if (!mu_set[i])
      throw DataError(origin + ": missing 'mu " + std::to_string(i) +
                      "' line");
  if (any_mark) {
    for (int j = 0; j < dim; ++j)
      if (!law_set[j])
        throw DataError(origin + ": missing 'mark_law " + std::to_string(j) +
                        "' line");
    model.mark_laws = std::move(laws);
    model.mark_impacts = std::move(impacts);
  }
  model.validate();
  return model;
}

HawkesModel read_model(const std::string& path) {
  return parse_model(read_text_file(path), path);
}

void write_model(const std::string& path, const HawkesModel& model) {
  write_text_file(path, serialize_model(model));
}

std::string serialize_him(const HimSetup& setup) {
  std::string out = "hawkes-impact v1\n";
  out += "reversion ";
  append_kernel(out, setup.config.reversion);
  out += "\n";
  out += "contrarian " + format_double17(setup.config.contrarian) + "\n";
  out += "baseline " + format_double17(setup.config.baseline) + "\n";
  out += "impact_coeff " + format_double17(setup.config.impact_coeff) + "\n";
  out +=
      "impact_exponent " + format_double17(setup.config.impact_exponent) +
      "\n";
  out += "meta_edges";
  append_list(out, setup.meta.edges);
  out += "\nmeta_rates";
  append_list(out, setup.meta.rates);
  out += "\n";
  return out;
}

HimSetup parse_him(const std::string& text, const std::string& origin) {
  const auto lines = spec_lines(text, "hawkes-impact", origin);
  HimSetup setup;
  bool have_reversion = false;
  std::set<std::string> seen;
  for (const auto& [lineno, tokens] : lines) {
    const std::string& key = tokens[0];
    if (!seen.insert(key).second)
      fail_at(origin, lineno, "duplicate '" + key + "' line");
    if (key == "reversion") {
      setup.config.reversion = parse_kernel_tokens(tokens, 1, origin, lineno);
      have_reversion = true;
    } else if (key == "contrarian" || key == "baseline" ||
               key == "impact_coeff" || key == "impact_exponent") {
      if (tokens.size() != 2)
        fail_at(origin, lineno, "expected '" + key + " value'");
      const double v = parse_number(tokens[1], origin, lineno);
      if (key == "contrarian") setup.config.contrarian = v;
      if (key == "baseline") setup.config.baseline = v;
      if (key == "impact_coeff") setup.config.impact_coeff = v;
      if (key == "impact_exponent") setup.config.impact_exponent = v;
    } else if (key == "meta_edges" || key == "meta_rates") {
      std::vector<double> values;
      for (std::size_t k = 1; k < tokens.size(); ++k)
        values.push_back(parse_number(tokens[k], origin, lineno));
      if (key == "meta_edges") {
        setup.meta.edges = std::move(values);
      } else {
        setup.meta.rates = std::move(values);
      }
    } else {
      fail_at(origin, lineno, "unknown keyword '" + key + "'");
    }
  }
  if (!have_reversion) throw DataError(origin + ": missing 'reversion' line");
  setup.config.validate();
  setup.meta.validate();
  return setup;
}

HimSetup read_him(const std::string& path) {
  return parse_him(read_text_file(path), path);
}

void write_him(const std::string& path, const HimSetup& setup) {
  write_text_file(path, serialize_him(setup));
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t file_digest(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return fnv1a_64(bytes.data(), bytes.size());
}

std::string serialize_manifest(const RunManifest& manifest) {
  nlohmann::json doc;
  doc["command"] = manifest.command;
  doc["config_hash"] = hex64(manifest.config_hash);
  doc["seed"] = manifest.seed;
  doc["version"] =
      manifest.version.empty() ? library_version : manifest.version;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [path, digest] : manifest.inputs)
    inputs.push_back({{"digest", hex64(digest)}, {"path", path}});
  doc["inputs"] = inputs;
  doc["outputs"] = manifest.outputs;
  return doc.dump(2) + "\n";
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  write_text_file(path, serialize_manifest(manifest));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("cannot read file: " + path);
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out.good()) throw DataError("cannot write file: " + path);
}

namespace {

std::string csv_field(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

void write_csv(const std::string& path,
               const std::vector<std::string>& comments,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& comment : comments) out += "# " + comment + "\n";
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k) out += ',';
    out += csv_field(header[k]);
  }
  out += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw UsageError("csv row width does not match the header");
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += csv_field(row[k]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void write_curve_csv(
    const std::string& path, const std::string& x_name,
    const std::vector<double>& x,
    const std::vector<std::pair<std::string, std::vector<double>>>& columns,
    const std::vector<std::string>& comments) {
  std::vector<std::string> header{x_name};
  for (const auto& [name, values] : columns) {
    if (values.size() != x.size())
      throw UsageError("curve column '" + name +
                       "' does not match the grid length");
    header.push_back(name);
  }
  std::vector<std::vector<std::string>> rows;
  rows.reserve(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::vector<std::string> row{format_double17(x[k])};
    for (const auto& [name, values] : columns)
      row.push_back(format_double17(values[k]));
    rows.push_back(std::move(row));
  }
  write_csv(path, comments, header, rows);
}

void write_matrix_csv(const std::string& path, const std::string& value_name,
                      const Eigen::MatrixXd& matrix,
                      const std::vector<std::string>& comments) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(matrix.rows() * matrix.cols()));
  for (Eigen::Index i = 0; i < matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < matrix.cols(); ++j)
      rows.push_back({std::to_string(i), std::to_string(j),
                      format_double17(matrix(i, j))});
  write_csv(path, comments, {"row", "col", value_name}, rows);
}

void write_genealogy_csv(const std::string& path,
                         const Genealogy& genealogy) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(genealogy.parent.size());
  for (std::size_t k = 0; k < genealogy.parent.size(); ++k)
    rows.push_back({std::to_string(k), std::to_string(genealogy.parent[k]),
                    std::to_string(genealogy.generation[k])});
  write_csv(path, {}, {"index", "parent_index", "generation"}, rows);
}

void write_diagnostics_csv(const std::string& path,
                           const EstimationResult& result) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(result.objective_trace.size());
  for (std::size_t k = 0; k < result.objective_trace.size(); ++k) {
    std::string grad = k < result.gradient_norms.size()
                           ? format_double17(result.gradient_norms[k])
                           : std::string{};
    rows.push_back({std::to_string(k),
                    format_double17(result.objective_trace[k]),
                    std::move(grad)});
  }
  write_csv(path, {}, {"iteration", "objective", "gradient_norm"}, rows);
}

void write_residuals_csv(const std::string& path, const GoodnessOfFit& gof) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t c = 0; c < gof.residuals.size(); ++c)
    for (std::size_t k = 0; k < gof.residuals[c].size(); ++k)
      rows.push_back({std::to_string(c), std::to_string(k),
                      format_double17(gof.residuals[c][k])});
  write_csv(path, {}, {"component", "index", "residual"}, rows);
}

void write_ks_csv(const std::string& path, const GoodnessOfFit& gof) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"pooled", format_double17(gof.pooled.statistic),
                  format_double17(gof.pooled.p_value),
                  std::to_string(gof.pooled.sample_size)});
  for (std::size_t c = 0; c < gof.per_component.size(); ++c) {
    if (c < gof.skipped.size() && gof.skipped[c]) {
      rows.push_back({std::to_string(c), "", "", "0"});
      continue;
    }
    const KsResult& ks = gof.per_component[c];
    rows.push_back({std::to_string(c), format_double17(ks.statistic),
                    format_double17(ks.p_value),
                    std::to_string(ks.sample_size)});
  }
  write_csv(path, {}, {"scope", "statistic", "p_value", "sample_size"}, rows);
}

namespace {

const char* reflexivity_method_name(ReflexivityMethod m) {
  switch (m) {
    case ReflexivityMethod::variance_ratio: return "variance_ratio";
    case ReflexivityMethod::mle_exponential: return "mle_exponential";
    case ReflexivityMethod::mle_power_law: return "mle_power_law";
    case ReflexivityMethod::wiener_hopf: return "wiener_hopf";
  }
  return "variance_ratio";
}

}  // namespace

void write_reflexivity_csv(const std::string& path,
                           const ReflexivityReport& report) {
  std::vector<std::string> comments;
  for (const auto& warning : report.warnings)
    comments.push_back("warning: " + warning);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.entries.size());
  for (const auto& entry : report.entries) {
    std::string notes;
    for (std::size_t k = 0; k < entry.notes.size(); ++k) {
      if (k) notes += "; ";
      notes += entry.notes[k];
    }
    rows.push_back({reflexivity_method_name(entry.method), entry.label,
                    format_double17(entry.estimate),
                    format_double17(entry.band), std::move(notes)});
  }
  write_csv(path, comments, {"method", "label", "estimate", "band", "notes"},
            rows);
}

}  // namespace hawkes
