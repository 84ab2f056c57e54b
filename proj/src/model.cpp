#include "hawkes/model.hpp"

#include <cmath>

#include "hawkes/common.hpp"

namespace hawkes {

void MarkLaw::validate() const {
  switch (family) {
    case Family::constant:
      if (!(a > 0) || !std::isfinite(a)) {
        throw DataError("constant mark law requires a positive value");
      }
      break;
    case Family::uniform:
      if (!(0 <= a && a < b) || !std::isfinite(b)) {
        throw DataError("uniform mark law requires 0 <= a < b");
      }
      break;
    case Family::exponential:
      if (!(a > 0) || !std::isfinite(a)) {
        throw DataError("exponential mark law requires a positive mean");
      }
      break;
    case Family::lognormal:
      if (!std::isfinite(a) || !(b >= 0) || !std::isfinite(b)) {
        throw DataError("lognormal mark law requires finite log-mean and "
                        "non-negative log-sd");
      }
      break;
  }
}

double MarkLaw::moment(double nu) const {
  switch (family) {
    case Family::constant:
      return std::pow(a, nu);
    case Family::uniform:
      if (nu == -1.0) return std::log(b / a) / (b - a);  // a > 0 enforced
      return (std::pow(b, nu + 1.0) - std::pow(a, nu + 1.0)) /
             ((b - a) * (nu + 1.0));
    case Family::exponential:
      return std::pow(a, nu) * std::tgamma(1.0 + nu);
    case Family::lognormal:
      return std::exp(nu * a + 0.5 * nu * nu * b * b);
  }
  return 1.0;
}

double MarkLaw::sample(Rng& rng) const {
  switch (family) {
    case Family::constant:
      return a;
    case Family::uniform:
      return rng.uniform(a, b);
    case Family::exponential:
      return a * rng.exponential(1.0);
    case Family::lognormal:
      return std::exp(a + b * rng.normal());
  }
  return a;
}

void HawkesModel::validate() const {
  const int d = dim();
  if (d <= 0) throw DataError("model dimension must be positive");
  if (kernels.dim() != d) {
    throw DataError("kernel matrix dimension does not match baseline vector");
  }
  for (int i = 0; i < d; ++i) {
    if (!(mu[i] >= 0) || !std::isfinite(mu[i])) {
      throw DataError("baseline intensities must be non-negative and finite");
    }
  }
  kernels.validate();
  if (transfer == Transfer::identity) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (!is_nonnegative_kernel(kernels(i, j))) {
          throw DataError("identity transfer requires non-negative kernels; "
                          "use the positive-part transfer for negative lobes");
        }
      }
    }
  }
  if (marked()) {
    if (static_cast<int>(mark_laws.size()) != d ||
        static_cast<int>(mark_impacts.size()) != d * d) {
      throw DataError("marked model needs one mark law per component and a "
                      "full D x D impact table");
    }
    for (const MarkLaw& law : mark_laws) law.validate();
    for (const MarkImpact& imp : mark_impacts) {
      if (!std::isfinite(imp.coeff) || !std::isfinite(imp.exponent) ||
          imp.coeff < 0) {
        throw DataError("mark impact requires finite parameters, coeff >= 0");
      }
    }
  }
}

double HawkesModel::mean_mark_boost(int i, int j) const {
  if (!marked()) return 1.0;
  const MarkImpact& imp = impact(i, j);
  return imp.coeff * mark_laws[j].moment(imp.exponent);
}

Eigen::MatrixXd HawkesModel::branching_matrix() const {
  const int d = dim();
  Eigen::MatrixXd k(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      k(i, j) = kernel_integral(kernels(i, j)) * mean_mark_boost(i, j);
    }
  }
  return k;
}

Eigen::MatrixXd HawkesModel::branching_matrix_abs() const {
  const int d = dim();
  Eigen::MatrixXd k(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      k(i, j) = l1_norm(kernels(i, j)) * mean_mark_boost(i, j);
    }
  }
  return k;
}

double HawkesModel::max_effective_support(double tail) const {
  double support = 0;
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!is_zero_kernel(kernels(i, j))) {
        support = std::max(support, effective_support(kernels(i, j), tail));
      }
    }
  }
  return support;
}

}  // namespace hawkes
