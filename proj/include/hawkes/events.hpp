#pragma once

#include <cstdint>
#include <vector>

namespace hawkes {

// A realization of the counting process: parallel arrays sorted by time,
// ties broken by component index then insertion order.
struct EventSequence {
  std::vector<double> times;
  std::vector<int> components;
  std::vector<double> marks;  // empty when unmarked, else same length
  double horizon = 0;
  int dim = 1;

  [[nodiscard]] std::size_t size() const { return times.size(); }
  [[nodiscard]] bool marked() const { return !marks.empty(); }

  // Throws DataError on unsorted times, out-of-range components, times
  // outside [0, horizon], or mismatched array lengths.
  void validate() const;

  [[nodiscard]] std::vector<double> component_times(int component) const;
  [[nodiscard]] std::vector<std::size_t> component_counts() const;

  // Stable sort by (time, component), preserving insertion order on full
  // ties; used after merging independently generated streams.
  void sort_events();
};

// Cluster bookkeeping parallel to an EventSequence: parent event index
// (-1 for immigrants) and generation (0 for immigrants).
struct Genealogy {
  std::vector<std::int64_t> parent;
  std::vector<int> generation;
};

}  // namespace hawkes
