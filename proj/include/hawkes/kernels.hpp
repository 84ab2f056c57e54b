#pragma once

#include <complex>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace hawkes {

// Kernel families. All kernels are causal: phi(t) = 0 for t < 0.

struct ZeroKernel {};

// phi(t) = alpha * beta * exp(-beta t); L1 norm alpha.
struct ExponentialKernel {
  double alpha = 0;
  double beta = 1;
};

// phi(t) = sum_k alpha_k * beta_k * exp(-beta_k t).
struct SumExponentialKernel {
  std::vector<double> alphas;
  std::vector<double> betas;
};

// Regularized power law phi(t) = alpha * beta * (1 + beta t)^(-1-gamma);
// L1 norm alpha / gamma, so a 1x1 model is stable iff alpha < gamma.
struct PowerLawKernel {
  double alpha = 0;
  double beta = 1;
  double gamma = 1;
};

// Constant level levels[k] on [edges[k], edges[k+1]); 0 outside
// [edges.front(), edges.back()). Levels may be negative; such kernels are
// only admissible under the positive-part transfer.
struct PiecewiseConstantKernel {
  std::vector<double> edges;   // strictly increasing, edges.front() >= 0
  std::vector<double> levels;  // size edges.size() - 1
};

using Kernel = std::variant<ZeroKernel, ExponentialKernel,
                            SumExponentialKernel, PowerLawKernel,
                            PiecewiseConstantKernel>;

// Throws DataError when parameters violate the family constraints
// (non-positive rates, gamma <= 0, unsorted edges, ...).
void validate_kernel(const Kernel& kernel);

double eval_kernel(const Kernel& kernel, double t);

// integral of |phi| over [0, inf); what stability analysis uses.
double l1_norm(const Kernel& kernel);

// Signed integral over [0, inf) == laplace(kernel, 0).
double kernel_integral(const Kernel& kernel);

// Signed integral over [0, t].
double integral_to(const Kernel& kernel, double t);

// Signed double integral: int_0^t int_0^u phi(s) ds du.
double double_integral_to(const Kernel& kernel, double t);

// Laplace transform phihat(z) = int_0^inf phi(t) e^{zt} dt. Exponential and
// piecewise families use closed forms; the power law is integrated
// numerically along a rotated ray where the integrand decays. Throws
// DomainError outside the convergence region (power law needs Re z <= 0,
// exponential needs Re z < min beta).
std::complex<double> laplace(const Kernel& kernel, std::complex<double> z);

// Time beyond which the remaining |mass| is below tail_fraction of the total.
// Simulators use this to truncate history scans. Infinite-support heavy
// tails return honestly large values; callers clamp to their horizons.
double effective_support(const Kernel& kernel, double tail_fraction = 1e-6);

bool is_zero_kernel(const Kernel& kernel);
bool is_nonnegative_kernel(const Kernel& kernel);

// Value at 0+ (used by implicit Volterra steps and thinning envelopes).
double eval_at_zero_plus(const Kernel& kernel);

// Square matrix of kernels; entry (i, j) is the effect of source component j
// on target component i.
class KernelMatrix {
 public:
  KernelMatrix() = default;
  explicit KernelMatrix(int dim) : dim_(dim), entries_(dim * dim) {}

  [[nodiscard]] int dim() const { return dim_; }
  Kernel& operator()(int i, int j) { return entries_[i * dim_ + j]; }
  const Kernel& operator()(int i, int j) const {
    return entries_[i * dim_ + j];
  }

  void validate() const;

 private:
  int dim_ = 0;
  std::vector<Kernel> entries_;
};

struct StabilityReport {
  Eigen::MatrixXd norm_matrix;  // entry-wise L1 norms (absolute values)
  double spectral_radius = 0;
  bool stable = false;
  bool used_power_iteration = true;  // false when the dense fallback ran
  int iterations = 0;
};

// Spectral radius of the L1-norm matrix by power iteration (all-ones start,
// tolerance 1e-12, at most 10000 iterations) with a dense eigensolver
// fallback for non-convergent cases (e.g. purely periodic norm structure).
StabilityReport stability(const KernelMatrix& km);

// Same analysis applied directly to a non-negative matrix.
StabilityReport stability_of_matrix(const Eigen::MatrixXd& norms);

}  // namespace hawkes
