#include "hawkes/finance.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>
#include <variant>

#include "hawkes/common.hpp"
#include "hawkes/rng.hpp"

namespace hawkes {

namespace {

std::string format_value(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

double PricePath::level_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return levels[static_cast<std::size_t>(it - times.begin()) - 1];
}

void PricePath::validate() const {
  if (!(tick > 0) || !std::isfinite(tick)) {
    throw DataError("price path tick size must be positive and finite");
  }
  if (!(horizon > 0) || !std::isfinite(horizon)) {
    throw DataError("price path horizon must be positive and finite");
  }
  if (times.size() != levels.size()) {
    throw DataError("price path times and levels differ in length");
  }
  double prev_time = 0;
  double prev_level = initial;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] >= prev_time)) {
      throw DataError("price path times must be sorted and non-negative");
    }
    if (times[k] > horizon) {
      throw DataError("price path jump beyond the stated horizon");
    }
    if (std::abs(std::abs(levels[k] - prev_level) - 1.0) > 1e-9) {
      throw DataError("price path jumps must be exactly one tick");
    }
    prev_time = times[k];
    prev_level = levels[k];
  }
}

PricePath price_from_events(const std::vector<double>& up,
                            const std::vector<double>& down, double p0,
                            double tick, double horizon) {
  if (!std::is_sorted(up.begin(), up.end()) ||
      !std::is_sorted(down.begin(), down.end())) {
    throw DataError("price construction requires sorted event streams");
  }
  PricePath path;
  path.initial = p0;
  path.tick = tick;
  path.horizon = horizon;
  path.times.reserve(up.size() + down.size());
  path.levels.reserve(up.size() + down.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double level = p0;
  while (i < up.size() || j < down.size()) {
    // Up moves first on exact ties so merged output is deterministic.
    const bool take_up =
        j >= down.size() || (i < up.size() && up[i] <= down[j]);
    if (take_up) {
      level += 1.0;
      path.times.push_back(up[i++]);
    } else {
      level -= 1.0;
      path.times.push_back(down[j++]);
    }
    path.levels.push_back(level);
  }
  path.validate();
  return path;
}

PricePath price_from_events(const EventSequence& events, int up_component,
                            int down_component, double p0, double tick) {
  if (up_component < 0 || up_component >= events.dim || down_component < 0 ||
      down_component >= events.dim || up_component == down_component) {
    throw DataError("price construction needs two distinct valid components");
  }
  return price_from_events(events.component_times(up_component),
                           events.component_times(down_component), p0, tick,
                           events.horizon);
}

namespace {

void check_scales(const std::vector<double>& scales, double horizon) {
  if (scales.empty()) throw DataError("no sampling scales given");
  double max_scale = 0;
  for (double tau : scales) {
    if (!(tau > 0) || !std::isfinite(tau)) {
      throw DataError("sampling scales must be positive and finite");
    }
    max_scale = std::max(max_scale, tau);
  }
  if (max_scale > horizon) {
    throw DataError("sampling scale exceeds the record length");
  }
  if (horizon < 100.0 * max_scale) {
    throw DataError(
        "record must cover at least 100 times the largest sampling scale");
  }
}

// Prices (in currency) at 0, tau, 2 tau, ..., n tau via one forward walk.
std::vector<double> sample_regular(const PricePath& path, double tau,
                                   std::size_t n) {
  std::vector<double> out(n + 1);
  std::size_t idx = 0;
  double level = path.initial;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * tau;
    while (idx < path.times.size() && path.times[idx] <= t) {
      level = path.levels[idx];
      ++idx;
    }
    out[k] = level * path.tick;
  }
  return out;
}

}  // namespace

SignatureCurve signature_plot(const PricePath& path,
                              const std::vector<double>& scales) {
  path.validate();
  check_scales(scales, path.horizon);
  SignatureCurve curve;
  curve.scales = scales;
  const double span = path.horizon;
  for (double tau : scales) {
    const auto n = static_cast<std::size_t>(std::floor(span / tau));
    const std::vector<double> prices = sample_regular(path, tau, n);
    double sum = 0;
    double sum_sq = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double q = (prices[k + 1] - prices[k]) * (prices[k + 1] - prices[k]);
      sum += q;
      sum_sq += q * q;
    }
    curve.values.push_back(sum / span);
    const auto dn = static_cast<double>(n);
    const double var_q = n > 1 ? std::max(0.0, (sum_sq - sum * sum / dn) / (dn - 1.0)) : 0.0;
    curve.std_errors.push_back(std::sqrt(var_q * dn) / span);
  }
  return curve;
}

SignatureCurve epps_covariation(const PricePath& a, const PricePath& b,
                                const std::vector<double>& scales) {
  a.validate();
  b.validate();
  if (std::abs(a.horizon - b.horizon) >
      1e-9 * std::max(a.horizon, b.horizon)) {
    throw DataError("covariation requires records on a common clock");
  }
  check_scales(scales, a.horizon);
  SignatureCurve curve;
  curve.scales = scales;
  const double span = a.horizon;
  for (double tau : scales) {
    const auto n = static_cast<std::size_t>(std::floor(span / tau));
    const std::vector<double> pa = sample_regular(a, tau, n);
    const std::vector<double> pb = sample_regular(b, tau, n);
    double sum = 0;
    double sum_sq = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double q = (pa[k + 1] - pa[k]) * (pb[k + 1] - pb[k]);
      sum += q;
      sum_sq += q * q;
    }
    curve.values.push_back(sum / span);
    const auto dn = static_cast<double>(n);
    const double var_q = n > 1 ? std::max(0.0, (sum_sq - sum * sum / dn) / (dn - 1.0)) : 0.0;
    curve.std_errors.push_back(std::sqrt(var_q * dn) / span);
  }
  return curve;
}

namespace {

const char* method_label(ReflexivityMethod method) {
  switch (method) {
    case ReflexivityMethod::variance_ratio:
      return "variance-ratio";
    case ReflexivityMethod::mle_exponential:
      return "mle-exponential";
    case ReflexivityMethod::mle_power_law:
      return "mle-power-law";
    case ReflexivityMethod::wiener_hopf:
      return "wiener-hopf";
  }
  return "unknown";
}

double fitted_alpha_band(const EstimationResult& fit) {
  for (std::size_t k = 0; k < fit.parameter_names.size(); ++k) {
    if (fit.parameter_names[k] == "alpha[0,0]" &&
        fit.standard_errors.size() > static_cast<Eigen::Index>(k)) {
      return fit.standard_errors[static_cast<Eigen::Index>(k)];
    }
  }
  return 0;
}

}  // namespace

ReflexivityReport reflexivity_report(
    const EventSequence& events, const std::vector<ReflexivityMethod>& methods,
    const ReflexivityOptions& options) {
  events.validate();
  if (events.dim != 1) {
    throw DataError("reflexivity analysis expects a one-dimensional stream");
  }
  if (events.size() < 2) {
    throw DataError("reflexivity analysis needs at least two events");
  }
  if (methods.empty()) throw DataError("no reflexivity methods requested");

  const double span = events.horizon;
  const double rate = static_cast<double>(events.size()) / span;
  const double mean_gap = 1.0 / rate;

  ReflexivityReport report;
  for (ReflexivityMethod method : methods) {
    ReflexivityEntry entry;
    entry.method = method;
    entry.label = method_label(method);
    switch (method) {
      case ReflexivityMethod::variance_ratio: {
        const double window =
            options.window_length > 0 ? options.window_length : span / 1000.0;
        const BranchingRatioEstimate est =
            branching_ratio_estimate(events, window);
        entry.estimate = est.value;
        entry.band = est.standard_error;
        entry.notes = est.warnings;
        if (est.degenerate) {
          entry.notes.push_back("window counts were degenerate");
        }
        break;
      }
      case ReflexivityMethod::mle_exponential: {
        HawkesModel init;
        init.mu = Eigen::VectorXd::Constant(1, 0.5 * rate);
        init.kernels = KernelMatrix(1);
        init.kernels(0, 0) = ExponentialKernel{0.3, 1.0 / mean_gap};
        const EstimationResult fit = fit_mle(events, init);
        entry.estimate = kernel_integral(fit.model.kernels(0, 0));
        entry.band = fitted_alpha_band(fit);
        entry.notes = fit.warnings;
        entry.notes.push_back(
            "single-timescale exponential parametrization; known to "
            "underestimate the branching ratio when the true kernel decays "
            "slowly");
        break;
      }
      case ReflexivityMethod::mle_power_law: {
        EventSequence working = events;
        if (options.power_law_max_events > 0 &&
            events.size() > options.power_law_max_events) {
          const std::size_t keep = options.power_law_max_events;
          working.times.assign(events.times.begin(),
                               events.times.begin() +
                                   static_cast<std::ptrdiff_t>(keep));
          working.components.assign(events.components.begin(),
                                    events.components.begin() +
                                        static_cast<std::ptrdiff_t>(keep));
          working.horizon = working.times.back();
          std::ostringstream note;
          note << "record truncated to the first " << keep
               << " events for the power-law likelihood (cost is quadratic "
                  "in the event count)";
          entry.notes.push_back(note.str());
        }
        HawkesModel init;
        init.mu = Eigen::VectorXd::Constant(1, 0.5 * rate);
        init.kernels = KernelMatrix(1);
        init.kernels(0, 0) = PowerLawKernel{0.3 * 0.75, 1.0 / mean_gap, 0.75};
        const EstimationResult fit = fit_mle(working, init);
        entry.estimate = kernel_integral(fit.model.kernels(0, 0));
        entry.band = 0;
        for (const auto& warning : fit.warnings) entry.notes.push_back(warning);
        break;
      }
      case ReflexivityMethod::wiener_hopf: {
        QuadratureConfig quad;
        quad.nodes = options.nodes;
        quad.support = options.support > 0
                           ? options.support
                           : std::min(span / 20.0, 50.0 * mean_gap);
        quad.style = options.grid_style;
        const EstimationResult fit = fit_wiener_hopf(events, quad);
        entry.estimate = kernel_integral(fit.model.kernels(0, 0));
        entry.band = 0;
        entry.notes = fit.warnings;
        break;
      }
    }
    report.entries.push_back(std::move(entry));
  }

  double largest = 0;
  for (const auto& entry : report.entries) {
    largest = std::max(largest, entry.estimate);
  }
  if (largest >= options.criticality_threshold) {
    report.warnings.push_back(
        "branching-ratio estimate " + format_value(largest) +
        " is at or above " + format_value(options.criticality_threshold) +
        ": the stream operates close to criticality");
  }
  return report;
}

double MetaOrderProfile::rate_at(double t) const {
  if (t < edges.front() || t >= edges.back()) return 0;
  const auto it = std::upper_bound(edges.begin(), edges.end(), t);
  return rates[static_cast<std::size_t>(it - edges.begin()) - 1];
}

double MetaOrderProfile::execution_end() const { return edges.back(); }

void MetaOrderProfile::validate() const {
  if (edges.size() < 2 || rates.size() != edges.size() - 1) {
    throw DataError("meta-order schedule needs n+1 edges for n rate segments");
  }
  if (edges.front() != 0.0) {
    throw DataError("meta-order schedule must start at time 0");
  }
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    if (!(edges[k] < edges[k + 1]) || !std::isfinite(edges[k + 1])) {
      throw DataError("meta-order edges must be strictly increasing");
    }
  }
  for (double r : rates) {
    if (!(r >= 0) || !std::isfinite(r)) {
      throw DataError("meta-order trading rates must be non-negative");
    }
  }
}

void HimConfig::validate() const {
  validate_kernel(reversion);
  if (!is_nonnegative_kernel(reversion)) {
    throw DataError("mean-reversion kernel must be non-negative");
  }
  if (!(contrarian >= 0) || !(contrarian <= 1) || !std::isfinite(contrarian)) {
    throw DataError("contrarian ratio must lie in [0, 1]");
  }
  if (!(baseline >= 0) || !std::isfinite(baseline)) {
    throw DataError("baseline intensity must be non-negative and finite");
  }
  if (!(impact_coeff >= 0) || !std::isfinite(impact_coeff)) {
    throw DataError("impact coefficient must be non-negative and finite");
  }
  if (!(impact_exponent > 0) || !std::isfinite(impact_exponent)) {
    throw DataError("impact exponent must be positive and finite");
  }
  const double norm = l1_norm(reversion);
  if (norm >= 1.0) {
    throw StabilityError(
        "mean-reversion kernel norm " + format_value(norm) +
            " reaches the critical value 1; the price model is non-stationary",
        norm);
  }
}

namespace {

// Instantaneous impact applied to the trading rate; zero rate maps to zero
// regardless of the exponent so idle periods never inject intensity.
double impact_of_rate(const HimConfig& cfg, double rate) {
  if (rate <= 0) return 0;
  return cfg.impact_coeff * std::pow(rate, cfg.impact_exponent);
}

struct MetaChannels {
  std::vector<double> edges;
  std::vector<double> impact;      // f(r) per segment
  std::vector<double> suffix_max;  // max of impact from segment k on
  double total_mass = 0;           // integral of f(r)
  double peak = 0;
  double exec_end = 0;

  double impact_at(double t) const {
    if (t < edges.front() || t >= edges.back()) return 0;
    const auto it = std::upper_bound(edges.begin(), edges.end(), t);
    return impact[static_cast<std::size_t>(it - edges.begin()) - 1];
  }

  // Sampling for the trapezoid solver: interior schedule discontinuities
  // take the two-sided mean so the cumulative quadrature error stays second
  // order instead of picking up O(step) bias at each jump.
  double impact_at_node(double t) const {
    const double eps = 1e-9 * std::max(1.0, std::abs(t));
    for (std::size_t j = 0; j < edges.size(); ++j) {  // schedules are short
      if (std::abs(t - edges[j]) <= eps) {
        const double left = j > 0 ? impact[j - 1] : 0.0;
        const double right = j < impact.size() ? impact[j] : 0.0;
        return j == 0 ? right : 0.5 * (left + right);
      }
    }
    return impact_at(t);
  }

  double suffix_at(double t) const {
    if (t >= edges.back()) return 0;
    if (t < edges.front()) return suffix_max.empty() ? 0 : suffix_max[0];
    const auto it = std::upper_bound(edges.begin(), edges.end(), t);
    return suffix_max[static_cast<std::size_t>(it - edges.begin()) - 1];
  }
};

MetaChannels build_channels(const HimConfig& cfg,
                            const MetaOrderProfile& meta) {
  MetaChannels ch;
  ch.edges = meta.edges;
  ch.exec_end = meta.execution_end();
  ch.impact.resize(meta.rates.size());
  for (std::size_t k = 0; k < meta.rates.size(); ++k) {
    ch.impact[k] = impact_of_rate(cfg, meta.rates[k]);
    ch.total_mass += ch.impact[k] * (meta.edges[k + 1] - meta.edges[k]);
    ch.peak = std::max(ch.peak, ch.impact[k]);
  }
  ch.suffix_max = ch.impact;
  for (std::size_t k = ch.suffix_max.size(); k-- > 1;) {
    ch.suffix_max[k - 1] = std::max(ch.suffix_max[k - 1], ch.suffix_max[k]);
  }
  return ch;
}

// (reversion * f(r))(t), exact for the piecewise-constant schedule.
double convolved_impact(const Kernel& reversion, const MetaChannels& ch,
                        double t) {
  double sum = 0;
  for (std::size_t k = 0; k < ch.impact.size(); ++k) {
    if (ch.impact[k] == 0) continue;
    if (t <= ch.edges[k]) break;
    sum += ch.impact[k] *
           (integral_to(reversion, t - ch.edges[k]) -
            integral_to(reversion, t - ch.edges[k + 1]));
  }
  return sum;
}

// Upper envelope of the kernel on [lag, infinity): the kernel itself for the
// monotone families, a suffix max over levels for piecewise entries.
class KernelEnvelope {
 public:
  explicit KernelEnvelope(const Kernel& kernel) : kernel_(&kernel) {
    if (const auto* pw = std::get_if<PiecewiseConstantKernel>(&kernel)) {
      suffix_ = pw->levels;
      for (std::size_t k = suffix_.size(); k-- > 1;) {
        suffix_[k - 1] = std::max(suffix_[k - 1], suffix_[k]);
      }
      edges_ = &pw->edges;
    }
  }

  [[nodiscard]] bool monotone() const { return suffix_.empty(); }

  [[nodiscard]] double at(double lag) const {
    if (suffix_.empty()) {
      return lag <= 0 ? eval_at_zero_plus(*kernel_) : eval_kernel(*kernel_, lag);
    }
    if (lag >= edges_->back()) return 0;
    if (lag < edges_->front()) return suffix_[0];
    const auto it = std::upper_bound(edges_->begin(), edges_->end(), lag);
    return suffix_[static_cast<std::size_t>(it - edges_->begin()) - 1];
  }

 private:
  const Kernel* kernel_;
  std::vector<double> suffix_;
  const std::vector<double>* edges_ = nullptr;
};

struct HimPath {
  std::vector<double> times;
  std::vector<int> comps;  // 0 up, 1 down
};

// Ogata thinning for the constrained bivariate price model. The dominating
// rate combines the (non-increasing) history envelope, the baselines, the
// suffix max of the impulsive schedule and a bound on the contrarian
// convolution, so every piece is valid until the next accepted event.
HimPath simulate_him_path(const HimConfig& cfg, const MetaChannels* channels,
                          double reversion_norm, const KernelEnvelope& env,
                          double horizon, Rng& rng) {
  HimPath path;
  const double mu = cfg.baseline;
  const double contrarian_scale =
      (channels != nullptr && reversion_norm > 0 && cfg.contrarian > 0)
          ? cfg.contrarian / reversion_norm
          : 0.0;

  double now = 0;
  double env_up = 0;    // envelope of the history part of the up intensity
  double env_down = 0;  // and of the down intensity
  const double env_zero = env.at(0);
  constexpr std::size_t kMaxCandidates = 20'000'000;
  std::size_t candidates = 0;

  while (true) {
    double channel_bound = 0;
    if (channels != nullptr) {
      channel_bound += channels->suffix_at(now);
      if (contrarian_scale > 0) {
        if (env.monotone() && now >= channels->exec_end) {
          channel_bound +=
              contrarian_scale * convolved_impact(cfg.reversion, *channels, now);
        } else {
          channel_bound += cfg.contrarian * channels->peak;
        }
      }
    }
    const double bound = env_up + env_down + 2.0 * mu + channel_bound;
    if (!(bound > 0)) break;
    const double t = now + rng.exponential(bound);
    if (t >= horizon) break;
    if (++candidates > kMaxCandidates) {
      throw NumericalError(
          "impact simulation exceeded the candidate budget; the "
          "configuration is too active for the requested horizon");
    }

    double hist_up = 0;    // excitation of component 0 by past down moves
    double hist_down = 0;  // excitation of component 1 by past up moves
    for (std::size_t m = 0; m < path.times.size(); ++m) {
      const double v = eval_kernel(cfg.reversion, t - path.times[m]);
      if (path.comps[m] == 1) {
        hist_up += v;
      } else {
        hist_down += v;
      }
    }

    double lambda_up = mu + hist_up;
    double lambda_down = mu + hist_down;
    if (channels != nullptr) {
      lambda_up += channels->impact_at(t);
      if (contrarian_scale > 0) {
        lambda_down +=
            contrarian_scale * convolved_impact(cfg.reversion, *channels, t);
      }
    }

    const double u = rng.uniform() * bound;
    if (u < lambda_up) {
      path.times.push_back(t);
      path.comps.push_back(0);
      env_down = hist_down + env_zero;
      env_up = hist_up;
    } else if (u < lambda_up + lambda_down) {
      path.times.push_back(t);
      path.comps.push_back(1);
      env_up = hist_up + env_zero;
      env_down = hist_down;
    } else {
      env_up = hist_up;
      env_down = hist_down;
    }
    now = t;
  }
  return path;
}

std::vector<double> default_impact_grid(double exec_end, double horizon) {
  std::vector<double> grid;
  const int linear_points = 24;
  for (int k = 1; k <= linear_points; ++k) {
    grid.push_back(exec_end * static_cast<double>(k) / linear_points);
  }
  if (horizon > exec_end * 1.0001) {
    const int log_points = 24;
    const double lo = std::log(exec_end);
    const double hi = std::log(horizon);
    for (int k = 1; k <= log_points; ++k) {
      grid.push_back(std::exp(lo + (hi - lo) * static_cast<double>(k) /
                                       log_points));
    }
  }
  grid.back() = horizon;
  return grid;
}

}  // namespace

ImpactCurve him_impact_curve(const HimConfig& cfg,
                             const MetaOrderProfile& meta, int n_paths,
                             std::uint64_t seed, double horizon,
                             const std::vector<double>& grid) {
  cfg.validate();
  meta.validate();
  if (n_paths < 1) throw DataError("impact curve needs at least one path");
  if (!(horizon > 0) || !std::isfinite(horizon)) {
    throw DataError("impact horizon must be positive and finite");
  }
  if (horizon < meta.execution_end()) {
    throw DataError("impact horizon must cover the execution window");
  }

  std::vector<double> times =
      grid.empty() ? default_impact_grid(meta.execution_end(), horizon) : grid;
  if (!std::is_sorted(times.begin(), times.end())) {
    throw DataError("impact grid must be sorted");
  }
  for (double t : times) {
    if (!(t > 0) || t > horizon) {
      throw DataError("impact grid points must lie in (0, horizon]");
    }
  }

  const MetaChannels channels = build_channels(cfg, meta);
  const double norm = l1_norm(cfg.reversion);
  const KernelEnvelope env(cfg.reversion);
  const std::size_t n_grid = times.size();
  const auto paths = static_cast<std::size_t>(n_paths);

  // Per-path slots keep the reduction order fixed, so the result is
  // byte-identical no matter how many workers run.
  std::vector<double> diffs(paths * n_grid, 0.0);
  std::exception_ptr failure = nullptr;
  std::mutex failure_guard;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t p = next.fetch_add(1);
      if (p >= paths) break;
      try {
        Rng rng_with(seed, p);
        const HimPath with_meta = simulate_him_path(cfg, &channels, norm, env,
                                                    horizon, rng_with);
        Rng rng_without(seed, p);  // identical stream: paired baseline
        const HimPath without_meta =
            simulate_him_path(cfg, nullptr, norm, env, horizon, rng_without);
        std::size_t iw = 0;
        std::size_t ib = 0;
        double level_w = 0;
        double level_b = 0;
        for (std::size_t g = 0; g < n_grid; ++g) {
          const double t = times[g];
          while (iw < with_meta.times.size() && with_meta.times[iw] <= t) {
            level_w += with_meta.comps[iw] == 0 ? 1.0 : -1.0;
            ++iw;
          }
          while (ib < without_meta.times.size() &&
                 without_meta.times[ib] <= t) {
            level_b += without_meta.comps[ib] == 0 ? 1.0 : -1.0;
            ++ib;
          }
          diffs[p * n_grid + g] = level_w - level_b;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_guard);
        if (!failure) failure = std::current_exception();
        break;
      }
    }
  };

  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  const auto n_workers =
      std::min<std::size_t>(std::max(1u, hw), std::max<std::size_t>(1, paths));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ImpactCurve curve;
  curve.times = times;
  curve.paths = n_paths;
  curve.mean.resize(n_grid);
  curve.std_error.resize(n_grid);
  for (std::size_t g = 0; g < n_grid; ++g) {
    double sum = 0;
    for (std::size_t p = 0; p < paths; ++p) sum += diffs[p * n_grid + g];
    const double mean = sum / static_cast<double>(paths);
    double sq = 0;
    for (std::size_t p = 0; p < paths; ++p) {
      const double d = diffs[p * n_grid + g] - mean;
      sq += d * d;
    }
    curve.mean[g] = mean;
    curve.std_error[g] =
        paths > 1 ? std::sqrt(sq / (static_cast<double>(paths) *
                                    (static_cast<double>(paths) - 1.0)))
                  : 0.0;
  }
  return curve;
}

ExpectedImpact him_expected_impact(const HimConfig& cfg,
                                   const MetaOrderProfile& meta,
                                   double horizon, double step) {
  cfg.validate();
  meta.validate();
  if (!(horizon > 0) || !std::isfinite(horizon)) {
    throw DataError("impact horizon must be positive and finite");
  }
  if (!(step > 0) || !std::isfinite(step)) {
    throw DataError("grid step must be positive and finite");
  }
  const double raw_n = std::ceil(horizon / step - 1e-9);
  if (raw_n > 150000.0) {
    throw NumericalError(
        "expected-impact grid too fine for the horizon (the convolution "
        "solve costs the square of the step count); increase the step");
  }
  const auto n = static_cast<std::size_t>(raw_n);
  const double h = horizon / static_cast<double>(n);

  const MetaChannels channels = build_channels(cfg, meta);
  const double norm = l1_norm(cfg.reversion);
  const double contrarian_scale =
      (norm > 0 && cfg.contrarian > 0) ? cfg.contrarian / norm : 0.0;

  ExpectedImpact result;
  result.times.resize(n + 1);
  result.rate.resize(n + 1);
  result.impact.resize(n + 1);
  std::vector<double> phi(n + 1);
  std::vector<double> source(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * h;
    result.times[k] = t;
    phi[k] = eval_kernel(cfg.reversion, t);
    source[k] = channels.impact_at_node(t);
    if (contrarian_scale > 0) {
      source[k] -= contrarian_scale * convolved_impact(cfg.reversion, channels, t);
    }
  }

  // Trapezoid discretization of rate = source - reversion * rate; the value
  // at the current node appears under the integral, hence the implicit
  // denominator.
  result.rate[0] = source[0];
  const double implicit = 1.0 + 0.5 * h * phi[0];
  for (std::size_t k = 1; k <= n; ++k) {
    double conv = 0.5 * phi[k] * result.rate[0];
    for (std::size_t l = 1; l < k; ++l) {
      conv += phi[k - l] * result.rate[l];
    }
    result.rate[k] = (source[k] - h * conv) / implicit;
  }
  result.impact[0] = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    result.impact[k] =
        result.impact[k - 1] + 0.5 * h * (result.rate[k] + result.rate[k - 1]);
  }
  result.permanent = channels.total_mass * (1.0 - cfg.contrarian) / (1.0 + norm);
  return result;
}

}  // namespace hawkes
