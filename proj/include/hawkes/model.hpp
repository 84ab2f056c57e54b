#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hawkes/kernels.hpp"
#include "hawkes/rng.hpp"

namespace hawkes {

// Intensity transfer: identity keeps the linear model; positive_part clamps
// lambda at 0 so kernels with negative lobes stay admissible.
enum class Transfer { identity, positive_part };

// Per-event mark distribution. Parameter meaning by family:
//   constant:   value a
//   uniform:    support [a, b], a >= 0
//   exponential: mean a
//   lognormal:  log-mean a, log-sd b
struct MarkLaw {
  enum class Family { constant, uniform, exponential, lognormal };
  Family family = Family::constant;
  double a = 1.0;
  double b = 0.0;

  void validate() const;
  // E[xi^nu], closed form per family.
  [[nodiscard]] double moment(double nu) const;
  double sample(Rng& rng) const;
};

// Multiplicative mark boost chi(xi) = coeff * xi^exponent applied to one
// kernel-matrix entry.
struct MarkImpact {
  double coeff = 1.0;
  double exponent = 1.0;
};

struct HawkesModel {
  Eigen::VectorXd mu;
  KernelMatrix kernels;
  Transfer transfer = Transfer::identity;
  // Either both empty (unmarked) or laws sized D and impacts sized D x D
  // (row-major, impact of source j's marks on target i at [i * D + j]).
  std::vector<MarkLaw> mark_laws;
  std::vector<MarkImpact> mark_impacts;

  [[nodiscard]] int dim() const { return static_cast<int>(mu.size()); }
  [[nodiscard]] bool marked() const { return !mark_laws.empty(); }
  [[nodiscard]] const MarkImpact& impact(int i, int j) const {
    return mark_impacts[static_cast<std::size_t>(i) * dim() + j];
  }

  void validate() const;

  // E[chi^{ij}(xi^j)] for source component j's mark law; 1 when unmarked.
  [[nodiscard]] double mean_mark_boost(int i, int j) const;

  // Signed branching matrix K^{ij} = (integral of phi^{ij}) * E[chi^{ij}];
  // with non-negative kernels this is what both the mean intensity and the
  // stability analysis use.
  [[nodiscard]] Eigen::MatrixXd branching_matrix() const;
  // Same with absolute-value integrals, for stability of signed kernels.
  [[nodiscard]] Eigen::MatrixXd branching_matrix_abs() const;

  // Largest kernel effective support across entries (simulation truncation
  // and burn-in sizing).
  [[nodiscard]] double max_effective_support(double tail = 1e-6) const;
};

}  // namespace hawkes
