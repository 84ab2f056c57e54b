#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hawkes {

// Nodes and weights for n-point Gauss-Legendre quadrature on [-1, 1].
// Computed once by Newton iteration on the Legendre recurrence; results are
// cached per n.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const QuadratureRule& gauss_legendre(int n);

// Integrate f over [a, b] with a fixed-order rule.
double integrate(const std::function<double(double)>& f, double a, double b,
                 int order = 32);

// In-place radix-2 FFT. The length of a must be a power of two; inverse
// applies the conjugate transform and divides by the length.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

// Sample autocovariance c[k] = sum_{t<n-k} (x_t - m)(x_{t+k} - m) / (n - k)
// for k = 0..max_lag, computed through a zero-padded FFT so long series with
// many lags stay O(n log n). With subtract_mean false, m = 0 and the input is
// treated as already centred (the mode used for pooled ensemble residuals).
std::vector<double> autocovariance(const std::vector<double>& x,
                                   std::size_t max_lag, bool subtract_mean);

// Kolmogorov distribution tail Q(x) = P(sup|B(t)| > x) for the Brownian
// bridge, evaluated from whichever of the two standard series converges
// faster at x.
double kolmogorov_tail(double x);

struct KsResult {
  double statistic = 0;      // sup-norm distance D
  double p_value = 0;        // tail probability with finite-n correction
  std::size_t sample_size = 0;
};

// One-sample KS against a continuous CDF. Uses the Stephens small-sample
// correction D * (sqrt(n) + 0.12 + 0.11 / sqrt(n)).
KsResult ks_test_one_sample(std::vector<double> sample,
                            const std::function<double(double)>& cdf);

// Two-sample KS with effective size n*m/(n+m).
KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b);

struct OptimizerConfig {
  int max_iterations = 400;
  double gradient_tolerance = 1e-7;
  double step_tolerance = 1e-12;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
};

// BFGS with a strong-Wolfe line search. The objective returns the value and
// fills the gradient. Deterministic: no randomization anywhere.
OptimizerResult minimize_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const OptimizerConfig& config = {});

// FNV-1a 64-bit hash, used for config digests in run manifests.
std::uint64_t fnv1a_64(const void* data, std::size_t size);
std::uint64_t fnv1a_64(const std::string& s);

// Shortest-round-trip decimal formatting (%.17g) so emitted artifacts are
// byte-identical across runs.
std::string format_double17(double v);

}  // namespace hawkes
