#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hawkes/estimate.hpp"
#include "hawkes/events.hpp"
#include "hawkes/kernels.hpp"
#include "hawkes/model.hpp"

namespace hawkes {

// Piecewise-constant tick price built from up-move and down-move event
// streams: level after the k-th jump is initial + #up - #down so far, in
// ticks. Jumps are +-1 tick by construction; simultaneous up and down moves
// appear as two consecutive entries at the same timestamp.
struct PricePath {
  std::vector<double> times;   // jump times, ascending
  std::vector<double> levels;  // price in ticks after each jump
  double initial = 0;          // price in ticks before the first jump
  double tick = 1.0;           // currency per tick
  double horizon = 0;

  // Price in ticks at time t (right-continuous).
  [[nodiscard]] double level_at(double t) const;

  // Throws DataError on unsorted times, a jump other than +-1 tick, or times
  // outside [0, horizon].
  void validate() const;
};

PricePath price_from_events(const std::vector<double>& up,
                            const std::vector<double>& down, double p0,
                            double tick, double horizon);

// Same construction reading two components of an event sequence.
PricePath price_from_events(const EventSequence& events, int up_component,
                            int down_component, double p0, double tick);

// Mean squared price change per unit time as a function of the sampling
// scale: values[k] = (1/T) sum_i [P_{(i+1)tau} - P_{i tau}]^2 over the
// regular grid of step tau = scales[k], in currency^2 / time. std_errors are
// one-standard-error bands from the scatter of the squared increments.
struct SignatureCurve {
  std::vector<double> scales;
  std::vector<double> values;
  std::vector<double> std_errors;
};

// Requires every scale positive and the record at least 100 times the
// largest scale, so each point averages enough increments to mean something.
SignatureCurve signature_plot(const PricePath& path,
                              const std::vector<double>& scales);

// Realized covariance of tau-returns of two paths on a common clock, per
// unit time. Vanishes as tau -> 0 for processes that never co-jump and
// grows toward the long-run covariance of the pair.
SignatureCurve epps_covariation(const PricePath& a, const PricePath& b,
                                const std::vector<double>& scales);

enum class ReflexivityMethod {
  variance_ratio,
  mle_exponential,
  mle_power_law,
  wiener_hopf,
};

struct ReflexivityEntry {
  ReflexivityMethod method{};
  std::string label;
  double estimate = 0;  // branching ratio (fraction of endogenous events)
  double band = 0;      // one standard error; 0 when the method has none
  std::vector<std::string> notes;
};

struct ReflexivityOptions {
  // Variance-ratio window; 0 picks horizon / 1000.
  double window_length = 0;
  // Wiener-Hopf lag support; 0 picks min(horizon / 20, 50 mean gaps).
  double support = 0;
  int nodes = 24;
  GridStyle grid_style = GridStyle::log;
  // Power-law likelihood cost grows quadratically with the event count, so
  // records longer than this are truncated for that method (noted in the
  // entry). 0 disables the guard.
  std::size_t power_law_max_events = 4000;
  double criticality_threshold = 0.95;
};

struct ReflexivityReport {
  std::vector<ReflexivityEntry> entries;
  std::vector<std::string> warnings;
};

// Branching-ratio table for a one-dimensional stream: each requested method
// estimates the endogenous fraction with whatever error band it supports,
// side by side. Estimates at or above the criticality threshold raise a
// warning. The estimate is dimensionless, so results are invariant under a
// uniform time rescaling of the input (with window and support rescaled
// alike).
ReflexivityReport reflexivity_report(
    const EventSequence& events,
    const std::vector<ReflexivityMethod>& methods,
    const ReflexivityOptions& options = {});

// Execution schedule of a buying meta-order: piecewise-constant trading rate
// rates[k] >= 0 on [edges[k], edges[k+1]), zero outside [0, edges.back()].
struct MetaOrderProfile {
  std::vector<double> edges;  // ascending, edges.front() == 0
  std::vector<double> rates;  // size edges.size() - 1

  [[nodiscard]] double rate_at(double t) const;
  [[nodiscard]] double execution_end() const;
  void validate() const;
};

// Bivariate price model driven by a meta-order. Component 0 moves the price
// up, component 1 down, and the two excite each other through the
// mean-reversion kernel. The order's trading rate r(t) enters impulsively:
// f(r_t) = impact_coeff * r_t^impact_exponent adds to the up intensity
// directly, while the market's contrarian response adds
// contrarian * (reversion/||reversion||) convolved with f(r) to the down
// intensity, so the contrarian channel carries exactly `contrarian` times
// the mass of the reversion kernel.
struct HimConfig {
  Kernel reversion;            // cross-excitation between up and down moves
  double contrarian = 0;       // C in [0, 1]
  double baseline = 0;         // exogenous rate per component
  double impact_coeff = 1;     // k in f(v) = k v^a
  double impact_exponent = 1;  // a (default linear)

  // DataError on malformed fields; StabilityError when the reversion kernel
  // norm reaches 1.
  void validate() const;
};

struct ImpactCurve {
  std::vector<double> times;
  std::vector<double> mean;       // E[P_t] - P_0 in ticks
  std::vector<double> std_error;  // Monte Carlo band per grid point
  int paths = 0;
};

// Monte Carlo impact curve: n_paths pairs of simulations (with the
// meta-order and without) share one random stream per path, and the curve is
// the mean paired price difference with its standard error. The pairing
// cancels the baseline noise exactly where the trajectories have not yet
// diverged; with r identically 0 the difference is identically 0. An empty
// grid picks a default covering the execution window linearly and the decay
// logarithmically.
ImpactCurve him_impact_curve(const HimConfig& cfg,
                             const MetaOrderProfile& meta, int n_paths,
                             std::uint64_t seed, double horizon,
                             const std::vector<double>& grid = {});

// Deterministic expectation of the same curve: the mean jump-rate imbalance
// x = dE[P_t]/dt solves the renewal-type equation x = S - reversion * x,
// S(t) = f(r_t) - (C/||reversion||)(reversion * f(r))(t), discretized by the
// trapezoid rule on a uniform grid of the given step (cost is quadratic in
// the step count). `permanent` is the closed-form t -> infinity limit
// integral(f(r)) (1 - C) / (1 + ||reversion||), which the curve approaches:
// exactly 0 at C = 1, a positive plateau at C = 0.
struct ExpectedImpact {
  std::vector<double> times;
  std::vector<double> impact;  // E[P_t] - P_0 in ticks
  std::vector<double> rate;    // dE[P_t]/dt
  double permanent = 0;
};

ExpectedImpact him_expected_impact(const HimConfig& cfg,
                                   const MetaOrderProfile& meta,
                                   double horizon, double step);

}  // namespace hawkes
