#include "hawkes/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <stdexcept>

#include "hawkes/common.hpp"

namespace hawkes {

namespace {

QuadratureRule compute_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Tricomi initial guess for the i-th root of P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::map<int, QuadratureRule> cache;
  static std::mutex cache_mutex;
  std::lock_guard<std::mutex> lock(cache_mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 int order) {
  const QuadratureRule& rule = gauss_legendre(order);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0;
  for (int i = 0; i < order; ++i) {
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  }
  return half * sum;
}

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("fft_radix2 requires a power-of-two length");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = sign * 2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& value : a) value *= scale;
  }
}

std::vector<double> autocovariance(const std::vector<double>& x,
                                   std::size_t max_lag, bool subtract_mean) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("autocovariance of an empty series");
  if (max_lag >= n) {
    throw std::invalid_argument("autocovariance lag must be below the length");
  }
  double mean = 0.0;
  if (subtract_mean) {
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
  }
  std::size_t padded = 1;
  while (padded < n + max_lag + 1) padded <<= 1;
  std::vector<std::complex<double>> buf(padded, std::complex<double>(0, 0));
  for (std::size_t t = 0; t < n; ++t) buf[t] = x[t] - mean;
  fft_radix2(buf, false);
  for (auto& value : buf) value *= std::conj(value);
  fft_radix2(buf, true);
  std::vector<double> out(max_lag + 1);
  for (std::size_t k = 0; k <= max_lag; ++k) {
    out[k] = buf[k].real() / static_cast<double>(n - k);
  }
  return out;
}

double kolmogorov_tail(double x) {
  if (x <= 0) return 1.0;
  if (x < 1.18) {
    // Jacobi-theta form, fast for small x.
    const double y = std::exp(-M_PI * M_PI / (8.0 * x * x));
    const double series =
        y + std::pow(y, 9.0) + std::pow(y, 25.0) + std::pow(y, 49.0);
    return 1.0 - std::sqrt(2.0 * M_PI) / x * series;
  }
  // Alternating series, fast for large x.
  const double y = std::exp(-2.0 * x * x);
  double sum = 0;
  double sign = 1.0;
  for (int k = 1; k <= 16; ++k) {
    const double term = std::pow(y, static_cast<double>(k) * k);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-18) break;
  }
  return 2.0 * sum;
}

KsResult ks_test_one_sample(std::vector<double> sample,
                            const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DataError("ks_test_one_sample: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  KsResult result;
  result.statistic = d;
  result.sample_size = sample.size();
  const double root_n = std::sqrt(n);
  result.p_value = kolmogorov_tail(d * (root_n + 0.12 + 0.11 / root_n));
  return result;
}

KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) {
    throw DataError("ks_test_two_sample: empty sample");
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  KsResult result;
  result.statistic = d;
  result.sample_size = a.size() + b.size();
  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  result.p_value = kolmogorov_tail(d * (root + 0.12 + 0.11 / root));
  return result;
}

namespace {

// Strong-Wolfe line search (Nocedal & Wright alg. 3.5/3.6). phi(t) is the
// objective along x + t*p; returns an accepted step or 0 on failure.
class LineSearch {
 public:
  LineSearch(const std::function<double(const Eigen::VectorXd&,
                                        Eigen::VectorXd&)>& f,
             const Eigen::VectorXd& x, const Eigen::VectorXd& p)
      : f_(f), x_(x), p_(p), grad_(x.size()) {}

  double phi(double t, double& dphi) {
    value_ = f_(x_ + t * p_, grad_);
    dphi = grad_.dot(p_);
    return value_;
  }

  double value_ = 0;
  Eigen::VectorXd grad_;

 private:
  const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& p_;
};

constexpr double kWolfeC1 = 1e-4;
constexpr double kWolfeC2 = 0.9;

double zoom(LineSearch& ls, double lo, double hi, double phi_lo, double phi0,
            double dphi0, double* out_phi) {
  double dphi = 0;
  for (int iter = 0; iter < 50; ++iter) {
    const double t = 0.5 * (lo + hi);
    const double phi_t = ls.phi(t, dphi);
    if (phi_t > phi0 + kWolfeC1 * t * dphi0 || phi_t >= phi_lo) {
      hi = t;
    } else {
      if (std::fabs(dphi) <= -kWolfeC2 * dphi0) {
        *out_phi = phi_t;
        return t;
      }
      if (dphi * (hi - lo) >= 0) hi = lo;
      lo = t;
      phi_lo = phi_t;
    }
    if (std::fabs(hi - lo) < 1e-16) break;
  }
  // Fall back to the best bracketed point.
  *out_phi = ls.phi(lo, dphi);
  return lo;
}

}  // namespace

OptimizerResult minimize_bfgs(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  const auto n = x0.size();
  OptimizerResult result;
  result.x = x0;
  result.gradient.resize(n);
  result.value = f(result.x, result.gradient);

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    result.iterations = iter;
    if (result.gradient.norm() <= config.gradient_tolerance) {
      result.converged = true;
      return result;
    }
    Eigen::VectorXd p = -h_inv * result.gradient;
    double dphi0 = p.dot(result.gradient);
    if (dphi0 >= 0) {
      // Curvature update went bad; restart from steepest descent.
      h_inv.setIdentity();
      p = -result.gradient;
      dphi0 = p.dot(result.gradient);
    }

    LineSearch ls(f, result.x, p);
    const double phi0 = result.value;
    double t_prev = 0;
    double phi_prev = phi0;
    double t = 1.0;
    double t_accept = 0;
    double phi_accept = phi0;
    for (int k = 0; k < 30; ++k) {
      double dphi = 0;
      const double phi_t = ls.phi(t, dphi);
      if (phi_t > phi0 + kWolfeC1 * t * dphi0 || (k > 0 && phi_t >= phi_prev)) {
        t_accept = zoom(ls, t_prev, t, phi_prev, phi0, dphi0, &phi_accept);
        break;
      }
      if (std::fabs(dphi) <= -kWolfeC2 * dphi0) {
        t_accept = t;
        phi_accept = phi_t;
        break;
      }
      if (dphi >= 0) {
        t_accept = zoom(ls, t, t_prev, phi_t, phi0, dphi0, &phi_accept);
        break;
      }
      t_prev = t;
      phi_prev = phi_t;
      t *= 2.5;
    }
    if (t_accept <= 0) {
      // Line search failed; gradient is as good as it gets here.
      return result;
    }

    const Eigen::VectorXd x_new = result.x + t_accept * p;
    Eigen::VectorXd grad_new(n);
    const double value_new = f(x_new, grad_new);

    const Eigen::VectorXd s = x_new - result.x;
    const Eigen::VectorXd y = grad_new - result.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
      h_inv = (identity - rho * s * y.transpose()) * h_inv *
                  (identity - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }

    const double step = s.norm();
    result.x = x_new;
    result.value = value_new;
    result.gradient = grad_new;
    if (step < config.step_tolerance * (1.0 + result.x.norm())) {
      result.converged = result.gradient.norm() <= 1e3 * config.gradient_tolerance;
      return result;
    }
  }
  result.iterations = config.max_iterations;
  return result;
}

std::uint64_t fnv1a_64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a_64(const std::string& s) {
  return fnv1a_64(s.data(), s.size());
}

std::string format_double17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace hawkes
