#include "hawkes/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "hawkes/common.hpp"
#include "hawkes/numerics.hpp"

namespace hawkes {

namespace {

using cd = std::complex<double>;

void require_linear(const HawkesModel& model, const char* op) {
  if (model.transfer != Transfer::identity) {
    throw DataError(std::string(op) +
                    ": moment formulas hold for the identity transfer only; "
                    "positive-part models must be studied by simulation");
  }
}

// Crossover scale below which a near-critical power-law kernel relaxes in its
// intermediate-asymptotics regime rather than exponentially. Reported as a
// diagnostic in stability errors.
std::string power_law_crossover_note(const HawkesModel& model) {
  for (int i = 0; i < model.dim(); ++i) {
    for (int j = 0; j < model.dim(); ++j) {
      const auto* pl = std::get_if<PowerLawKernel>(&model.kernels(i, j));
      if (pl == nullptr || pl->gamma >= 1.0) continue;
      const double norm = pl->alpha / pl->gamma;
      if (norm >= 1.0 || norm <= 0.0) continue;
      const double ratio = pl->gamma / pl->alpha - 1.0;
      const double scale =
          std::pow(std::tgamma(1.0 - pl->gamma) / ratio, 1.0 / pl->gamma) /
          pl->beta;
      std::ostringstream os;
      os << "; power-law relaxation stays in its intermediate-asymptotics "
            "regime below t ~ "
         << scale << " (entry " << i << "," << j << ")";
      return os.str();
    }
  }
  return "";
}

Eigen::MatrixXcd kernel_transform(const HawkesModel& model, cd z) {
  const int d = model.dim();
  Eigen::MatrixXcd out(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      out(i, j) = laplace(model.kernels(i, j), z) * model.mean_mark_boost(i, j);
    }
  }
  return out;
}

Eigen::MatrixXcd resolvent_from_transform(const Eigen::MatrixXcd& phat) {
  const int d = static_cast<int>(phat.rows());
  Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(d, d) - phat;
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(lhs);
  if (!lu.isInvertible()) {
    throw NumericalError(
        "I - Phihat(z) is numerically singular; the model is effectively "
        "critical at this frequency");
  }
  return lu.solve(Eigen::MatrixXcd::Identity(d, d)) -
         Eigen::MatrixXcd::Identity(d, d);
}

// ---------------------------------------------------------------------------
// Oscillatory inversion of the covariance transform.
//
// c_smooth(t) = (1/pi) Re int_0^inf (chat(i w) - Sigma) e^{-i w t} dw  (t >= 0)
//
// The transform minus the atom is interpolated panel-wise by a degree-12
// Legendre expansion on a geometric frequency grid; the oscillatory factor is
// then integrated exactly through the moments
//   int_{-1}^{1} P_k(x) e^{-iqx} dx = 2 (-i)^k j_k(q)
// with j_k the spherical Bessel functions. Panel sizes track the smoothness
// scale of the transform (proportional to the distance from w = 0, capped for
// piecewise-constant kernels whose transforms oscillate at fixed period), so
// heavy-tailed kernels that need cutoffs many decades above the base frequency
// still cost only a logarithmic number of panels.
// ---------------------------------------------------------------------------

constexpr int kFilonDegree = 12;   // Legendre expansion order per panel
constexpr int kFilonNodes = 16;    // Gauss-Legendre samples per panel

// j_0 .. j_kmax at q >= 0.
void spherical_bessel(int kmax, double q, double* out) {
  if (q < 0.5) {
    // Power series: j_k(q) = q^k/(2k+1)!! sum_m (-q^2/2)^m / (m! prod(2k+3..))
    double dfact = 1.0;  // (2k+1)!!
    for (int k = 0; k <= kmax; ++k) {
      if (k > 0) dfact *= 2 * k + 1;
      double term = (k == 0) ? 1.0 : std::pow(q, k) / dfact;
      double sum = term;
      for (int m = 1; m <= 8; ++m) {
        term *= -(q * q / 2.0) / (m * (2.0 * k + 2.0 * m + 1.0));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      }
      out[k] = sum;
    }
    return;
  }
  const double j0 = std::sin(q) / q;
  const double j1 = j0 / q - std::cos(q) / q;
  if (q >= kmax + 2.0) {
    out[0] = j0;
    if (kmax >= 1) out[1] = j1;
    for (int k = 1; k < kmax; ++k) {
      out[k + 1] = (2.0 * k + 1.0) / q * out[k] - out[k - 1];
    }
    return;
  }
  // Downward recurrence (stable for orders above q), normalized against
  // whichever of j0, j1 is away from a zero.
  const int start = kmax + 20;
  std::vector<double> tmp(start + 2, 0.0);
  tmp[start + 1] = 0.0;
  tmp[start] = 1e-280;
  for (int k = start; k >= 1; --k) {
    tmp[k - 1] = (2.0 * k + 1.0) / q * tmp[k] - tmp[k + 1];
  }
  const double scale =
      (std::abs(j0) >= std::abs(j1)) ? j0 / tmp[0] : j1 / tmp[1];
  for (int k = 0; k <= kmax; ++k) out[k] = tmp[k] * scale;
}

struct FilonTables {
  // Gauss nodes/weights on [-1,1] and Legendre values P_k(node).
  std::vector<double> nodes, weights;
  double legendre[kFilonNodes][kFilonDegree + 1];
  FilonTables() {
    const QuadratureRule& rule = gauss_legendre(kFilonNodes);
    nodes = rule.nodes;
    weights = rule.weights;
    for (int qn = 0; qn < kFilonNodes; ++qn) {
      const double x = nodes[qn];
      legendre[qn][0] = 1.0;
      legendre[qn][1] = x;
      for (int k = 1; k < kFilonDegree; ++k) {
        legendre[qn][k + 1] =
            ((2.0 * k + 1.0) * x * legendre[qn][k] - k * legendre[qn][k - 1]) /
            (k + 1.0);
      }
    }
  }
};

const FilonTables& filon_tables() {
  static const FilonTables tables;
  return tables;
}

// chat(i w) - Sigma with one complex LU per frequency, using
// Psihat(-i w) = conj(Psihat(i w)) for real kernels.
class CovarianceTransform {
 public:
  CovarianceTransform(const HawkesModel& model, const Eigen::VectorXd& lambda)
      : model_(model), sigma_(lambda.asDiagonal()) {}

  Eigen::MatrixXcd operator()(double omega) const {
    const int d = model_.dim();
    const Eigen::MatrixXcd psi =
        resolvent_from_transform(kernel_transform(model_, cd(0.0, omega)));
    const Eigen::MatrixXcd left =
        Eigen::MatrixXcd::Identity(d, d) + psi.conjugate();
    const Eigen::MatrixXcd right =
        (Eigen::MatrixXcd::Identity(d, d) + psi).transpose();
    return left * sigma_.cast<cd>() * right - sigma_.cast<cd>();
  }

 private:
  const HawkesModel& model_;
  Eigen::MatrixXd sigma_;
};

struct InversionResult {
  std::map<double, Eigen::MatrixXd> values;  // |lag| -> c(|lag|)
  double cutoff = 0;
  int evaluations = 0;
};

InversionResult invert_covariance(const HawkesModel& model,
                                  const Eigen::VectorXd& lambda,
                                  const StabilityReport& stability_report,
                                  const std::vector<double>& abs_lags) {
  const int d = model.dim();
  const CovarianceTransform transform(model, lambda);
  InversionResult result;

  const Eigen::MatrixXcd f0 = transform(0.0);
  const Eigen::MatrixXd sigma = lambda.asDiagonal();
  const double ref = (f0 + sigma.cast<cd>()).norm();
  if (f0.norm() <= 1e-14 * std::max(ref, 1e-300)) {
    for (double t : abs_lags) result.values[t] = Eigen::MatrixXd::Zero(d, d);
    return result;
  }

  // Panel layout: geometric growth from a base frequency far below every
  // relaxation scale, width-capped when piecewise-constant kernels make the
  // transform oscillate at fixed period.
  double max_lag = 0;
  for (double t : abs_lags) max_lag = std::max(max_lag, t);
  const double relax =
      model.max_effective_support(1e-3) /
      std::max(1.0 - stability_report.spectral_radius, 1e-6);
  const double t_big = std::max({max_lag, relax, 1e-12});
  const double omega_lo = 1e-3 / t_big;
  double width_cap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const auto* pw = std::get_if<PiecewiseConstantKernel>(&model.kernels(i, j));
      if (pw != nullptr && pw->edges.back() > 0) {
        width_cap = std::min(width_cap, 8.0 / pw->edges.back());
      }
    }
  }

  const FilonTables& tab = filon_tables();
  const cd minus_i_pow[4] = {cd(1, 0), cd(0, -1), cd(-1, 0), cd(0, 1)};

  std::map<double, Eigen::MatrixXcd> accum;
  for (double t : abs_lags) accum[t] = Eigen::MatrixXcd::Zero(d, d);

  const double eps = 1e-6;
  const int max_panels = 1000000;
  int consecutive_small = 0;
  double lo = 0.0, hi = omega_lo;
  int panel = 0;
  for (; panel < max_panels; ++panel) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);

    Eigen::MatrixXcd fvals[kFilonNodes];
    for (int qn = 0; qn < kFilonNodes; ++qn) {
      fvals[qn] = transform(mid + half * tab.nodes[qn]);
    }
    result.evaluations += kFilonNodes;

    Eigen::MatrixXcd coeff[kFilonDegree + 1];
    for (int k = 0; k <= kFilonDegree; ++k) {
      coeff[k] = Eigen::MatrixXcd::Zero(d, d);
      for (int qn = 0; qn < kFilonNodes; ++qn) {
        coeff[k] += (tab.weights[qn] * tab.legendre[qn][k]) * fvals[qn];
      }
      coeff[k] *= (2.0 * k + 1.0) / 2.0;
    }

    double bessel[kFilonDegree + 1];
    for (auto& [t, acc] : accum) {
      const double q = half * t;
      spherical_bessel(kFilonDegree, q, bessel);
      const cd phase = std::polar(half, -mid * t);
      Eigen::MatrixXcd panel_sum = Eigen::MatrixXcd::Zero(d, d);
      for (int k = 0; k <= kFilonDegree; ++k) {
        panel_sum += (minus_i_pow[k % 4] * (2.0 * bessel[k])) * coeff[k];
      }
      acc += phase * panel_sum;
    }

    if (fvals[kFilonNodes - 1].norm() <= eps * ref) {
      if (++consecutive_small >= 4 && panel >= 6) {
        result.cutoff = hi;
        break;
      }
    } else {
      consecutive_small = 0;
    }

    lo = hi;
    hi = std::min(lo * 1.7, lo + width_cap);
    if (!std::isfinite(hi) || hi > 1e15) break;
  }
  if (result.cutoff == 0) {
    throw NumericalError(
        "covariance inversion could not reach the frequency-cutoff criterion "
        "within the panel budget; the model is too close to criticality for "
        "the configured resolution");
  }

  for (auto& [t, acc] : accum) {
    result.values[t] = acc.real() / M_PI;
  }
  return result;
}

// Closed-form exponential covariances. In one dimension with phi = a b
// e^{-bt} the smooth part is Lambda (b/2) a(2-a)/(1-a) e^{-(1-a)b|t|}; the
// symmetric bivariate common-beta model diagonalizes into the two modes
// a_pm = a_s +/- a_c with the same scalar formula per mode.
struct SymmetricExponential {
  double mu = 0, alpha_self = 0, alpha_cross = 0, beta = 0;
  int dim = 1;
};

double mode_amplitude(double lambda0, double beta, double a) {
  if (a == 0.0) return 0.0;
  return lambda0 * (beta / 2.0) * a * (2.0 - a) / (1.0 - a);
}

double mode_decay(double beta, double a) { return (1.0 - a) * beta; }

bool match_exp_entry(const Kernel& k, double* alpha, double* beta) {
  if (std::holds_alternative<ZeroKernel>(k)) {
    *alpha = 0;
    return true;
  }
  const auto* e = std::get_if<ExponentialKernel>(&k);
  if (e == nullptr) return false;
  *alpha = e->alpha;
  if (*beta == 0) {
    *beta = e->beta;
    return true;
  }
  return e->beta == *beta;
}

bool detect_symmetric_exponential(const HawkesModel& model,
                                  SymmetricExponential* out) {
  if (model.marked()) return false;
  const int d = model.dim();
  if (d == 1) {
    double alpha = 0, beta = 0;
    if (!match_exp_entry(model.kernels(0, 0), &alpha, &beta)) return false;
    out->mu = model.mu(0);
    out->alpha_self = alpha;
    out->alpha_cross = 0;
    out->beta = beta;
    out->dim = 1;
    return true;
  }
  if (d != 2) return false;
  if (model.mu(0) != model.mu(1)) return false;
  double beta = 0;
  double a00 = 0, a11 = 0, a01 = 0, a10 = 0;
  if (!match_exp_entry(model.kernels(0, 0), &a00, &beta)) return false;
  if (!match_exp_entry(model.kernels(1, 1), &a11, &beta)) return false;
  if (!match_exp_entry(model.kernels(0, 1), &a01, &beta)) return false;
  if (!match_exp_entry(model.kernels(1, 0), &a10, &beta)) return false;
  if (a00 != a11 || a01 != a10) return false;
  out->mu = model.mu(0);
  out->alpha_self = a00;
  out->alpha_cross = a01;
  out->beta = beta;
  out->dim = 2;
  return true;
}

}  // namespace

StabilityReport require_stable(const HawkesModel& model) {
  model.validate();
  StabilityReport report = stability_of_matrix(model.branching_matrix_abs());
  if (report.spectral_radius > 1.0 - 1e-6) {
    std::ostringstream os;
    os << (report.stable ? "model is within 1e-6 of criticality"
                         : "model is unstable")
       << " (spectral radius " << report.spectral_radius << ")"
       << power_law_crossover_note(model);
    throw StabilityError(os.str(), report.spectral_radius);
  }
  return report;
}

Eigen::VectorXd mean_intensity(const HawkesModel& model) {
  require_linear(model, "mean_intensity");
  require_stable(model);
  const int d = model.dim();
  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(d, d) - model.branching_matrix();
  return lhs.partialPivLu().solve(model.mu);
}

Eigen::MatrixXcd kernel_laplace_matrix(const HawkesModel& model, cd z) {
  model.validate();
  return kernel_transform(model, z);
}

Eigen::MatrixXcd resolvent_laplace(const HawkesModel& model, cd z) {
  model.validate();
  return resolvent_from_transform(kernel_transform(model, z));
}

Eigen::MatrixXcd correlation_laplace(const HawkesModel& model, cd z) {
  require_linear(model, "correlation_laplace");
  require_stable(model);
  const Eigen::VectorXd lambda = mean_intensity(model);
  const int d = model.dim();
  const Eigen::MatrixXcd sigma = lambda.cast<cd>().asDiagonal();
  const Eigen::MatrixXcd psi_minus =
      resolvent_from_transform(kernel_transform(model, -z));
  const Eigen::MatrixXcd psi_plus =
      resolvent_from_transform(kernel_transform(model, z));
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(d, d);
  return (eye + psi_minus) * sigma * (eye + psi_plus).transpose();
}

CorrelationEstimate correlation_time_domain(const HawkesModel& model,
                                            const std::vector<double>& lags) {
  require_linear(model, "correlation_time_domain");
  const StabilityReport report = require_stable(model);
  if (lags.empty()) {
    throw DataError("correlation_time_domain: empty lag grid");
  }
  for (double t : lags) {
    if (!std::isfinite(t)) {
      throw DataError("correlation_time_domain: non-finite lag");
    }
  }
  const int d = model.dim();
  const Eigen::VectorXd lambda = mean_intensity(model);

  CorrelationEstimate est;
  est.lags = lags;
  est.atom = lambda;
  bool long_range = false;
  for (int i = 0; i < d && !long_range; ++i) {
    for (int j = 0; j < d && !long_range; ++j) {
      const auto* pl = std::get_if<PowerLawKernel>(&model.kernels(i, j));
      long_range = pl != nullptr && pl->gamma < 0.5;
    }
  }
  if (long_range) {
    est.warnings.push_back(
        "power-law entry with gamma < 1/2: covariances are long-range and "
        "lag truncation converges slowly");
  }

  SymmetricExponential sym;
  if (detect_symmetric_exponential(model, &sym)) {
    est.closed_form = true;
    const double a_plus = sym.alpha_self + sym.alpha_cross;
    const double a_minus = sym.alpha_self - sym.alpha_cross;
    const double lambda0 = lambda(0);
    for (double t : lags) {
      const double u = std::abs(t);
      Eigen::MatrixXd c(d, d);
      if (sym.dim == 1) {
        c(0, 0) = mode_amplitude(lambda0, sym.beta, a_plus) *
                  std::exp(-mode_decay(sym.beta, a_plus) * u);
      } else {
        const double cp = mode_amplitude(lambda0, sym.beta, a_plus) *
                          std::exp(-mode_decay(sym.beta, a_plus) * u);
        const double cm = mode_amplitude(lambda0, sym.beta, a_minus) *
                          std::exp(-mode_decay(sym.beta, a_minus) * u);
        c(0, 0) = c(1, 1) = 0.5 * (cp + cm);
        c(0, 1) = c(1, 0) = 0.5 * (cp - cm);
      }
      est.values.push_back(c);
    }
    return est;
  }

  std::vector<double> abs_lags;
  abs_lags.reserve(lags.size());
  for (double t : lags) abs_lags.push_back(std::abs(t));
  std::sort(abs_lags.begin(), abs_lags.end());
  abs_lags.erase(std::unique(abs_lags.begin(), abs_lags.end()),
                 abs_lags.end());

  InversionResult inv = invert_covariance(model, lambda, report, abs_lags);
  est.frequency_cutoff = inv.cutoff;
  est.frequency_evaluations = inv.evaluations;
  for (double t : lags) {
    const Eigen::MatrixXd& m = inv.values.at(std::abs(t));
    est.values.push_back(t >= 0 ? m : Eigen::MatrixXd(m.transpose()));
  }
  return est;
}

CausalityTables causality_rates(const HawkesModel& model) {
  require_linear(model, "causality_rates");
  require_stable(model);
  const int d = model.dim();
  const Eigen::VectorXd lambda = mean_intensity(model);
  const Eigen::MatrixXd k = model.branching_matrix();

  CausalityTables tables;
  tables.exogenous = model.mu;
  tables.direct = k * lambda.asDiagonal();
  const Eigen::MatrixXd psi0 =
      (Eigen::MatrixXd::Identity(d, d) - k).partialPivLu().solve(
          Eigen::MatrixXd::Identity(d, d)) -
      Eigen::MatrixXd::Identity(d, d);
  tables.oldest_ancestor = psi0 * model.mu.asDiagonal();
  return tables;
}

namespace {

bool exact_prediction_applies(const HawkesModel& model) {
  for (int i = 0; i < model.dim(); ++i) {
    for (int j = 0; j < model.dim(); ++j) {
      const Kernel& k = model.kernels(i, j);
      if (!std::holds_alternative<ZeroKernel>(k) &&
          !std::holds_alternative<ExponentialKernel>(k) &&
          !std::holds_alternative<SumExponentialKernel>(k)) {
        return false;
      }
    }
  }
  return true;
}

double realized_boost(const HawkesModel& model, int i, int j, double mark) {
  if (!model.marked()) return 1.0;
  const MarkImpact& imp = model.impact(i, j);
  return imp.coeff * std::pow(mark, imp.exponent);
}

// Exponential-family prediction: the conditional expectation of the intensity
// solves a linear ODE in the per-term excitation states
//   m_{ijk}' = -b_{ijk} m_{ijk} + a_{ijk} b_{ijk} boost_{ij} n_j(t),
//   n_j(t) = mu_j + sum_{j'k'} m_{j j' k'},
// integrated exactly with a matrix exponential on the augmented system.
IntensityPath predict_exact(const HawkesModel& model,
                            const EventSequence& history, double s,
                            const std::vector<double>& grid) {
  const int d = model.dim();
  struct State {
    int target, source;
    double alpha, beta, boost;
  };
  std::vector<State> states;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Kernel& k = model.kernels(i, j);
      const double boost = model.mean_mark_boost(i, j);
      if (const auto* e = std::get_if<ExponentialKernel>(&k)) {
        states.push_back({i, j, e->alpha, e->beta, boost});
      } else if (const auto* se = std::get_if<SumExponentialKernel>(&k)) {
        for (std::size_t t = 0; t < se->alphas.size(); ++t) {
          states.push_back({i, j, se->alphas[t], se->betas[t], boost});
        }
      }
    }
  }
  const int n = static_cast<int>(states.size());

  Eigen::VectorXd y(n + 1);
  for (int r = 0; r < n; ++r) {
    const State& st = states[r];
    double acc = 0;
    for (std::size_t m = 0; m < history.size(); ++m) {
      if (history.times[m] > s || history.components[m] != st.source) continue;
      const double chi =
          model.marked()
              ? realized_boost(model, st.target, st.source, history.marks[m])
              : 1.0;
      acc += chi * st.alpha * st.beta * std::exp(-st.beta * (s - history.times[m]));
    }
    y(r) = acc;
  }
  y(n) = 1.0;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int r = 0; r < n; ++r) {
    const State& st = states[r];
    a(r, r) -= st.beta;
    const double gain = st.alpha * st.beta * st.boost;
    for (int c = 0; c < n; ++c) {
      if (states[c].target == st.source) a(r, c) += gain;
    }
    a(r, n) += gain * model.mu(st.source);
  }

  IntensityPath path;
  path.times = grid;
  double prev = s;
  for (double t : grid) {
    if (t > prev) {
      const Eigen::MatrixXd step = (a * (t - prev)).exp();
      y = step * y;
      prev = t;
    }
    Eigen::VectorXd lam = model.mu;
    for (int r = 0; r < n; ++r) lam(states[r].target) += y(r);
    path.values.push_back(lam.cwiseMax(0.0));
  }
  return path;
}

// General kernels: implicit trapezoid stepping of the renewal equation
//   n(t) = mu + sum_{t_m <= s} Phi(t - t_m) chi_m
//            + int_s^t Phi(t - u) [mean boost] n(u) du
// on an internal uniform grid, then linear interpolation onto the request.
IntensityPath predict_renewal(const HawkesModel& model,
                              const EventSequence& history, double s,
                              const std::vector<double>& grid) {
  const int d = model.dim();
  const double span = grid.back() - s;
  double h = model.max_effective_support(1e-3) / 400.0;
  if (span > 0) {
    h = std::min(h, span / 1000.0);
    h = std::max(h, span / 8000.0);
  } else {
    h = 1.0;
  }
  const int n_steps = std::max(1, static_cast<int>(std::ceil(span / h)));
  h = span > 0 ? span / n_steps : 1.0;

  std::vector<Eigen::MatrixXd> phi(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) {
    phi[k].resize(d, d);
    const double t = (k == 0) ? 0.0 : k * h;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const double v = (k == 0) ? eval_at_zero_plus(model.kernels(i, j))
                                  : eval_kernel(model.kernels(i, j), t);
        phi[k](i, j) = v * model.mean_mark_boost(i, j);
      }
    }
  }

  auto history_term = [&](double t) {
    Eigen::VectorXd out = model.mu;
    for (std::size_t m = 0; m < history.size(); ++m) {
      if (history.times[m] > s) continue;
      const int j = history.components[m];
      const double lag = t - history.times[m];
      for (int i = 0; i < d; ++i) {
        const double chi =
            model.marked() ? realized_boost(model, i, j, history.marks[m])
                           : 1.0;
        out(i) += chi * eval_kernel(model.kernels(i, j), lag);
      }
    }
    return out;
  };

  std::vector<Eigen::VectorXd> n_vals(n_steps + 1);
  n_vals[0] = history_term(s);
  const Eigen::MatrixXd lhs =
      Eigen::MatrixXd::Identity(d, d) - (h / 2.0) * phi[0];
  const Eigen::PartialPivLU<Eigen::MatrixXd> lhs_lu(lhs);
  for (int i = 1; i <= n_steps; ++i) {
    Eigen::VectorXd rhs = history_term(s + i * h);
    rhs += (h / 2.0) * (phi[i] * n_vals[0]);
    for (int j = 1; j < i; ++j) rhs += h * (phi[i - j] * n_vals[j]);
    n_vals[i] = lhs_lu.solve(rhs);
  }

  IntensityPath path;
  path.times = grid;
  for (double t : grid) {
    Eigen::VectorXd v;
    if (span <= 0) {
      v = n_vals[0];
    } else {
      const double u = (t - s) / h;
      const int i0 = std::min(static_cast<int>(u), n_steps - 1);
      const double w = u - i0;
      v = (1.0 - w) * n_vals[i0] + w * n_vals[i0 + 1];
    }
    path.values.push_back(v.cwiseMax(0.0));
  }
  return path;
}

}  // namespace

IntensityPath predict_intensity(const HawkesModel& model,
                                const EventSequence& history, double s,
                                const std::vector<double>& horizon_grid) {
  require_linear(model, "predict_intensity");
  require_stable(model);
  if (!std::isfinite(s)) throw DataError("predict_intensity: non-finite s");
  history.validate();
  if (model.marked() && history.size() > 0 && !history.marked()) {
    throw DataError("predict_intensity: marked model requires marked history");
  }
  for (std::size_t m = 0; m < history.size(); ++m) {
    if (history.times[m] > s) {
      throw DataError(
          "predict_intensity: history extends past the conditioning time");
    }
  }
  if (horizon_grid.empty()) {
    throw DataError("predict_intensity: empty horizon grid");
  }
  double prev = s;
  for (double t : horizon_grid) {
    if (!std::isfinite(t) || t < prev) {
      throw DataError(
          "predict_intensity: horizon grid must be ascending and start at or "
          "after s");
    }
    prev = t;
  }

  if (exact_prediction_applies(model)) {
    return predict_exact(model, history, s, horizon_grid);
  }
  return predict_renewal(model, history, s, horizon_grid);
}

DiffusionResult diffusion_coefficients(const HawkesModel& model) {
  require_linear(model, "diffusion_coefficients");
  require_stable(model);
  const int d = model.dim();
  const Eigen::VectorXd lambda = mean_intensity(model);
  const Eigen::MatrixXd k = model.branching_matrix();
  const Eigen::MatrixXd inv =
      (Eigen::MatrixXd::Identity(d, d) - k)
          .partialPivLu()
          .solve(Eigen::MatrixXd::Identity(d, d));

  DiffusionResult result;
  result.matrix = inv * lambda.cwiseSqrt().asDiagonal();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const auto* pl = std::get_if<PowerLawKernel>(&model.kernels(i, j));
      if (pl != nullptr && pl->gamma <= 0.5) {
        std::ostringstream os;
        os << "power-law entry (" << i << "," << j << ") has gamma <= 1/2; "
           << "int t^{1/2} phi diverges and the diffusive normalization "
              "converges slowly";
        result.warnings.push_back(os.str());
      }
    }
  }
  return result;
}

AnalyticsResult analyze(const HawkesModel& model) {
  require_linear(model, "analyze");
  AnalyticsResult out;
  out.stability = require_stable(model);
  out.mean_intensity = mean_intensity(model);
  const int d = model.dim();
  const Eigen::MatrixXd k = model.branching_matrix();
  out.resolvent_norms =
      (Eigen::MatrixXd::Identity(d, d) - k)
          .partialPivLu()
          .solve(Eigen::MatrixXd::Identity(d, d)) -
      Eigen::MatrixXd::Identity(d, d);
  DiffusionResult diff = diffusion_coefficients(model);
  out.diffusion = diff.matrix;
  out.warnings = diff.warnings;
  out.causality = causality_rates(model);
  if (out.stability.spectral_radius >= 0.95) {
    std::ostringstream os;
    os << "spectral radius " << out.stability.spectral_radius
       << " is close to criticality; stationary formulas converge slowly";
    out.warnings.push_back(os.str());
  }
  return out;
}

}  // namespace hawkes
