#include "hawkes/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "hawkes/common.hpp"
#include "hawkes/numerics.hpp"

namespace hawkes {

namespace {

bool finite_positive(double x) { return std::isfinite(x) && x > 0; }

struct Validator {
  void operator()(const ZeroKernel&) const {}
  void operator()(const ExponentialKernel& k) const {
    if (!finite_positive(k.alpha) || !finite_positive(k.beta)) {
      throw DataError("exponential kernel requires alpha > 0 and beta > 0");
    }
  }
  void operator()(const SumExponentialKernel& k) const {
    if (k.alphas.empty() || k.alphas.size() != k.betas.size()) {
      throw DataError("sum-of-exponentials kernel needs matching, non-empty "
                      "alpha and beta lists");
    }
    for (std::size_t i = 0; i < k.alphas.size(); ++i) {
      if (!finite_positive(k.alphas[i]) || !finite_positive(k.betas[i])) {
        throw DataError(
            "sum-of-exponentials kernel requires alpha_k > 0 and beta_k > 0");
      }
    }
  }
  void operator()(const PowerLawKernel& k) const {
    if (!finite_positive(k.alpha) || !finite_positive(k.beta)) {
      throw DataError("power-law kernel requires alpha > 0 and beta > 0");
    }
    if (!std::isfinite(k.gamma) || k.gamma <= 0) {
      throw DataError("power-law kernel with gamma <= 0 is not integrable");
    }
  }
  void operator()(const PiecewiseConstantKernel& k) const {
    if (k.edges.size() < 2 || k.levels.size() != k.edges.size() - 1) {
      throw DataError("piecewise kernel needs n+1 edges for n levels");
    }
    if (k.edges.front() < 0) {
      throw DataError("piecewise kernel edges must start at or after 0");
    }
    for (std::size_t i = 0; i + 1 < k.edges.size(); ++i) {
      if (!(k.edges[i] < k.edges[i + 1])) {
        throw DataError("piecewise kernel edges must be strictly increasing");
      }
    }
    for (double level : k.levels) {
      if (!std::isfinite(level)) {
        throw DataError("piecewise kernel levels must be finite");
      }
    }
  }
};

// Laplace transform of the regularized power law by quadrature along the ray
// t = r * d, d = -conj(z)/|z|. On that ray e^{zt} = e^{-|z| r}, the factor
// (1 + beta t)^{-1-gamma} stays on the principal branch (Re(1 + beta r d) >=
// 1), and the sector swept between the positive real axis and the ray is
// free of singularities, so the rotation is exact for Re z <= 0.
std::complex<double> power_law_laplace(const PowerLawKernel& k,
                                       std::complex<double> z) {
  const double mod = std::abs(z);
  const std::complex<double> d = -std::conj(z) / mod;

  // Outer cutoff: whichever of the exponential decay and the power tail
  // brings the remainder below ~1e-12 of the norm first.
  const double r_exp = 45.0 / mod;
  const double r_pow = (std::pow(10.0, 12.0 / k.gamma) - 1.0) / k.beta;
  const double r_hi = std::min(r_exp, r_pow);

  const double r_first = std::min(1.0 / k.beta, 1.0 / mod) / 4.0;
  const QuadratureRule& rule = gauss_legendre(20);
  const double ratio = std::pow(10.0, 0.25);

  std::complex<double> total = 0;
  double a = 0;
  double b = std::min(r_first, r_hi);
  for (;;) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    std::complex<double> panel = 0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double r = mid + half * rule.nodes[q];
      const std::complex<double> base = 1.0 + k.beta * r * d;
      const std::complex<double> value =
          std::pow(base, std::complex<double>(-1.0 - k.gamma)) *
          std::exp(-mod * r);
      panel += rule.weights[q] * value;
    }
    total += half * panel;
    if (b >= r_hi) break;
    a = b;
    b = std::min(b * ratio, r_hi);
  }
  return k.alpha * k.beta * total * d;
}

}  // namespace

void validate_kernel(const Kernel& kernel) {
  std::visit(Validator{}, kernel);
}

double eval_kernel(const Kernel& kernel, double t) {
  if (t < 0) return 0;
  return std::visit(
      [t](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return k.alpha * k.beta * std::exp(-k.beta * t);
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          double sum = 0;
          for (std::size_t i = 0; i < k.alphas.size(); ++i) {
            sum += k.alphas[i] * k.betas[i] * std::exp(-k.betas[i] * t);
          }
          return sum;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          return k.alpha * k.beta *
                 std::pow(1.0 + k.beta * t, -1.0 - k.gamma);
        } else {
          if (t < k.edges.front() || t >= k.edges.back()) return 0;
          const auto it =
              std::upper_bound(k.edges.begin(), k.edges.end(), t);
          return k.levels[static_cast<std::size_t>(it - k.edges.begin()) - 1];
        }
      },
      kernel);
}

double l1_norm(const Kernel& kernel) {
  return std::visit(
      [](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return k.alpha;
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          double sum = 0;
          for (double a : k.alphas) sum += a;
          return sum;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          if (k.gamma <= 0) {
            throw DataError(
                "power-law kernel with gamma <= 0 is not integrable");
          }
          return k.alpha / k.gamma;
        } else {
          double sum = 0;
          for (std::size_t i = 0; i < k.levels.size(); ++i) {
            sum += std::fabs(k.levels[i]) * (k.edges[i + 1] - k.edges[i]);
          }
          return sum;
        }
      },
      kernel);
}

double kernel_integral(const Kernel& kernel) {
  if (const auto* pw = std::get_if<PiecewiseConstantKernel>(&kernel)) {
    double sum = 0;
    for (std::size_t i = 0; i < pw->levels.size(); ++i) {
      sum += pw->levels[i] * (pw->edges[i + 1] - pw->edges[i]);
    }
    return sum;
  }
  return l1_norm(kernel);  // remaining families are non-negative
}

double integral_to(const Kernel& kernel, double t) {
  if (t <= 0) return 0;
  return std::visit(
      [t](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return k.alpha * -std::expm1(-k.beta * t);
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          double sum = 0;
          for (std::size_t i = 0; i < k.alphas.size(); ++i) {
            sum += k.alphas[i] * -std::expm1(-k.betas[i] * t);
          }
          return sum;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          return k.alpha / k.gamma *
                 (1.0 - std::pow(1.0 + k.beta * t, -k.gamma));
        } else {
          double sum = 0;
          for (std::size_t i = 0; i < k.levels.size(); ++i) {
            const double a = k.edges[i];
            if (t <= a) break;
            const double b = std::min(t, k.edges[i + 1]);
            sum += k.levels[i] * (b - a);
          }
          return sum;
        }
      },
      kernel);
}

double double_integral_to(const Kernel& kernel, double t) {
  if (t <= 0) return 0;
  return std::visit(
      [t](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return k.alpha * (t + std::expm1(-k.beta * t) / k.beta);
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          double sum = 0;
          for (std::size_t i = 0; i < k.alphas.size(); ++i) {
            sum += k.alphas[i] * (t + std::expm1(-k.betas[i] * t) / k.betas[i]);
          }
          return sum;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          if (k.gamma == 1.0) {
            return k.alpha * (t - std::log1p(k.beta * t) / k.beta);
          }
          const double head =
              (std::pow(1.0 + k.beta * t, 1.0 - k.gamma) - 1.0) /
              (k.beta * (1.0 - k.gamma));
          return k.alpha / k.gamma * (t - head);
        } else {
          // F(u) = integral_to(u) is piecewise linear; accumulate exactly.
          double acc = 0;
          double f_at = 0;   // F at segment start
          double prev = 0;   // segment start time
          for (std::size_t i = 0; i < k.levels.size() && prev < t; ++i) {
            const double a = k.edges[i];
            const double gap = std::min(t, a) - prev;
            if (gap > 0) {  // flat stretch before this segment
              acc += f_at * gap;
              prev += gap;
            }
            if (prev >= t) break;
            const double b = std::min(t, k.edges[i + 1]);
            if (b > a) {
              const double w = b - a;
              acc += f_at * w + 0.5 * k.levels[i] * w * w;
              f_at += k.levels[i] * w;
              prev = b;
            }
          }
          if (t > prev) acc += f_at * (t - prev);
          return acc;
        }
      },
      kernel);
}

std::complex<double> laplace(const Kernel& kernel, std::complex<double> z) {
  return std::visit(
      [z](const auto& k) -> std::complex<double> {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          if (z.real() >= k.beta) {
            throw DomainError(
                "exponential Laplace transform diverges for Re z >= beta");
          }
          return k.alpha / (1.0 - z / k.beta);
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          std::complex<double> sum = 0;
          for (std::size_t i = 0; i < k.alphas.size(); ++i) {
            if (z.real() >= k.betas[i]) {
              throw DomainError(
                  "exponential Laplace transform diverges for Re z >= beta");
            }
            sum += k.alphas[i] / (1.0 - z / k.betas[i]);
          }
          return sum;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          if (z == 0.0) return k.alpha / k.gamma;
          if (z.real() > 0) {
            throw DomainError(
                "power-law Laplace transform requires Re z <= 0");
          }
          return power_law_laplace(k, z);
        } else {
          if (z == 0.0) return kernel_integral(Kernel(k));
          std::complex<double> sum = 0;
          for (std::size_t i = 0; i < k.levels.size(); ++i) {
            const std::complex<double> ea = std::exp(z * k.edges[i]);
            const std::complex<double> eb = std::exp(z * k.edges[i + 1]);
            sum += k.levels[i] * (eb - ea) / z;
          }
          return sum;
        }
      },
      kernel);
}

double effective_support(const Kernel& kernel, double tail_fraction) {
  return std::visit(
      [tail_fraction](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return std::log(1.0 / tail_fraction) / k.beta;
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          double total = 0;
          for (double a : k.alphas) total += a;
          const double n = static_cast<double>(k.alphas.size());
          double hi = 0;
          for (std::size_t i = 0; i < k.alphas.size(); ++i) {
            hi = std::max(hi, std::log(n * k.alphas[i] /
                                       (tail_fraction * total)) /
                                  k.betas[i]);
          }
          double lo = 0;
          for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            double tail = 0;
            for (std::size_t i = 0; i < k.alphas.size(); ++i) {
              tail += k.alphas[i] * std::exp(-k.betas[i] * mid);
            }
            (tail > tail_fraction * total ? lo : hi) = mid;
          }
          return hi;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          return (std::pow(tail_fraction, -1.0 / k.gamma) - 1.0) / k.beta;
        } else {
          return k.edges.back();
        }
      },
      kernel);
}

bool is_zero_kernel(const Kernel& kernel) {
  return std::holds_alternative<ZeroKernel>(kernel);
}

bool is_nonnegative_kernel(const Kernel& kernel) {
  if (const auto* pw = std::get_if<PiecewiseConstantKernel>(&kernel)) {
    for (double level : pw->levels) {
      if (level < 0) return false;
    }
  }
  return true;
}

double eval_at_zero_plus(const Kernel& kernel) {
  return std::visit(
      [](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ZeroKernel>) {
          return 0;
        } else if constexpr (std::is_same_v<T, ExponentialKernel>) {
          return k.alpha * k.beta;
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          double sum = 0;
          for (std::size_t i = 0; i < k.alphas.size(); ++i) {
            sum += k.alphas[i] * k.betas[i];
          }
          return sum;
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          return k.alpha * k.beta;
        } else {
          return k.edges.front() == 0 ? k.levels.front() : 0.0;
        }
      },
      kernel);
}

void KernelMatrix::validate() const {
  if (dim_ <= 0) throw DataError("kernel matrix dimension must be positive");
  for (const Kernel& k : entries_) validate_kernel(k);
}

StabilityReport stability_of_matrix(const Eigen::MatrixXd& norms) {
  const auto n = norms.rows();
  StabilityReport report;
  report.norm_matrix = norms;

  Eigen::VectorXd x = Eigen::VectorXd::Ones(n);
  double radius = 0;
  double prev = -1;
  bool converged = false;
  constexpr int kMaxIterations = 10000;
  for (int it = 0; it < kMaxIterations; ++it) {
    Eigen::VectorXd y = norms * x;
    const double norm_y = y.norm();
    report.iterations = it + 1;
    if (norm_y == 0) {
      radius = 0;
      converged = true;
      break;
    }
    radius = norm_y / x.norm();
    x = y / norm_y;
    if (std::fabs(radius - prev) <= 1e-12 * std::max(1.0, radius)) {
      converged = true;
      break;
    }
    prev = radius;
  }

  if (!converged) {
    // Periodic norm structure makes the iteration oscillate; fall back to a
    // dense eigendecomposition.
    Eigen::EigenSolver<Eigen::MatrixXd> solver(norms);
    radius = solver.eigenvalues().cwiseAbs().maxCoeff();
    report.used_power_iteration = false;
  }

  report.spectral_radius = radius;
  report.stable = radius < 1.0;
  return report;
}

StabilityReport stability(const KernelMatrix& km) {
  const int d = km.dim();
  Eigen::MatrixXd norms(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      norms(i, j) = l1_norm(km(i, j));
    }
  }
  return stability_of_matrix(norms);
}

}  // namespace hawkes
