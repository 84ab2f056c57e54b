#pragma once

#include <cstdint>
#include <utility>

#include "hawkes/events.hpp"
#include "hawkes/model.hpp"

namespace hawkes {

enum class SimAlgorithm { thinning, time_change, cluster };

struct SimConfig {
  std::uint64_t seed = 0;
  double horizon = 0;
  // Events on [0, burn_in) are simulated, then dropped and the clock rebased,
  // so the retained window starts close to stationarity. Size it at >= 20x
  // the slowest kernel's effective support.
  double burn_in = 0;
  SimAlgorithm algorithm = SimAlgorithm::thinning;
  // Hard cap guarding against explosive configurations; exceeding it raises
  // NumericalError with the count reached.
  std::size_t max_events = 50'000'000;
  // History truncation for thinning with decaying kernels: contributions
  // whose remaining kernel mass is below this fraction of the norm are
  // dropped from the intensity scan.
  double truncation_tail = 1e-6;

  void validate() const;
};

// Ogata thinning. Exact for identity transfer with the provided (monotone
// decreasing) kernel families; the positive-part transfer is sampled with the
// linear positive-parts intensity as the dominating envelope, so piecewise
// kernels with negative lobes are admissible here. Marked models draw one
// mark per event and apply the multiplicative boost. Single sequential pass;
// ensembles should vary SimConfig::seed.
EventSequence simulate_thinning(const HawkesModel& model, const SimConfig& cfg);

// Exact inversion of the compensator between events, one closed-form
// candidate per exponential state plus one per baseline (the smallest
// candidate wins). Restricted to exponential and sum-of-exponentials kernels
// under the identity transfer; anything else raises DataError.
EventSequence simulate_time_change(const HawkesModel& model,
                                   const SimConfig& cfg);

// Branching (cluster) construction: Poisson immigrants, then each event
// spawns children with inhomogeneous rate given by the kernel row, sampled by
// closed-form inverse CDFs truncated at the horizon. Requires a stable model,
// identity transfer, non-negative kernels. The genealogy refers to events of
// the returned (time-sorted) sequence; burn-in is rejected here because
// cropping would orphan retained children (use simulate(), which discards the
// genealogy, when a stationary window matters).
std::pair<EventSequence, Genealogy> simulate_cluster(const HawkesModel& model,
                                                     const SimConfig& cfg);

// Thinning specialization for marked models (factorized kernels with
// multiplicative mark boosts); raises DataError when the model has no mark
// laws. Provided as a named entry point; simulate_thinning accepts marked
// models too.
EventSequence simulate_marked(const HawkesModel& model, const SimConfig& cfg);

// Dispatch on cfg.algorithm; cluster output drops the genealogy. Burn-in is
// handled here for every algorithm by simulating [0, burn_in + horizon) and
// rebasing.
EventSequence simulate(const HawkesModel& model, const SimConfig& cfg);

}  // namespace hawkes
