#include "hawkes/events.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hawkes/common.hpp"

namespace hawkes {

void EventSequence::validate() const {
  if (components.size() != times.size()) {
    throw DataError("event sequence: times and components differ in length");
  }
  if (!marks.empty() && marks.size() != times.size()) {
    throw DataError("event sequence: marks present but length mismatched");
  }
  if (dim <= 0) throw DataError("event sequence: dimension must be positive");
  if (!(horizon > 0) && !times.empty()) {
    throw DataError("event sequence: horizon must be positive");
  }
  for (std::size_t m = 0; m < times.size(); ++m) {
    const double t = times[m];
    if (!std::isfinite(t) || t < 0 || t > horizon) {
      throw DataError("event sequence: time outside [0, horizon] at index " +
                      std::to_string(m));
    }
    if (components[m] < 0 || components[m] >= dim) {
      throw DataError("event sequence: component out of range at index " +
                      std::to_string(m));
    }
    if (m > 0) {
      if (t < times[m - 1]) {
        throw DataError("event sequence: times decrease at index " +
                        std::to_string(m));
      }
      if (t == times[m - 1] && components[m] < components[m - 1]) {
        throw DataError(
            "event sequence: tie not ordered by component at index " +
            std::to_string(m));
      }
    }
  }
}

std::vector<double> EventSequence::component_times(int component) const {
  std::vector<double> out;
  for (std::size_t m = 0; m < times.size(); ++m) {
    if (components[m] == component) out.push_back(times[m]);
  }
  return out;
}

std::vector<std::size_t> EventSequence::component_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(dim), 0);
  for (int c : components) ++counts[static_cast<std::size_t>(c)];
  return counts;
}

void EventSequence::sort_events() {
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [this](std::size_t a, std::size_t b) {
                     if (times[a] != times[b]) return times[a] < times[b];
                     return components[a] < components[b];
                   });
  EventSequence sorted;
  sorted.times.reserve(times.size());
  sorted.components.reserve(times.size());
  if (marked()) sorted.marks.reserve(times.size());
  for (std::size_t idx : order) {
    sorted.times.push_back(times[idx]);
    sorted.components.push_back(components[idx]);
    if (marked()) sorted.marks.push_back(marks[idx]);
  }
  times = std::move(sorted.times);
  components = std::move(sorted.components);
  marks = std::move(sorted.marks);
}

}  // namespace hawkes
