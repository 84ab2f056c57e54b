#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hawkes/events.hpp"
#include "hawkes/kernels.hpp"
#include "hawkes/model.hpp"

namespace hawkes {

// Stationary mean intensity: solves (I - K) Lambda = mu with the signed
// branching matrix K. Throws StabilityError (with the offending radius) for
// unstable or near-critical models.
Eigen::VectorXd mean_intensity(const HawkesModel& model);

// Checks stability and the near-criticality guard (radius must stay below
// 1 - 1e-6); returns the report, throws StabilityError otherwise. The error
// message carries the power-law intermediate-asymptotics crossover scale as
// a diagnostic when applicable.
StabilityReport require_stable(const HawkesModel& model);

// Kernel matrix transform Phihat(z), entry-wise Laplace transforms times the
// mark-boost expectations.
Eigen::MatrixXcd kernel_laplace_matrix(const HawkesModel& model,
                                       std::complex<double> z);

// Resolvent Psihat(z) = (I - Phihat(z))^{-1} - I. Throws NumericalError when
// I - Phihat(z) is numerically singular (near-criticality on the axis).
Eigen::MatrixXcd resolvent_laplace(const HawkesModel& model,
                                   std::complex<double> z);

// Covariance-density transform chat(z) = (I + Psihat(-z)) Sigma
// (I + Psihat(z))^T with Sigma = diag(Lambda) (unitary jumps).
Eigen::MatrixXcd correlation_laplace(const HawkesModel& model,
                                     std::complex<double> z);

// Lagged covariance densities with the t = 0 atom separated out. The lag
// grid covers the requested non-negative lags and their mirror images;
// values[l] is the D x D matrix c(lags[l]).
struct CorrelationEstimate {
  std::vector<double> lags;
  std::vector<Eigen::MatrixXd> values;
  Eigen::VectorXd atom;      // diagonal atom weights, Lambda_i
  bool closed_form = false;  // analytic exponential path taken
  double frequency_cutoff = 0;   // numeric path: integration cutoff used
  int frequency_evaluations = 0; // numeric path: transform evaluations spent
  std::vector<std::string> warnings;
};

// Uses the exact exponential closed form for 1D single-exponential models
// and symmetric bivariate common-beta exponential models; otherwise inverts
// chat numerically from the imaginary axis (atom subtracted, panel-wise
// polynomial x oscillatory quadrature).
CorrelationEstimate correlation_time_domain(const HawkesModel& model,
                                            const std::vector<double>& lags);

// Event-rate attribution. Rows sum to Lambda in both decompositions:
// exogenous[i] + sum_j direct(i,j) == exogenous[i] + sum_j
// oldest_ancestor(i,j) == Lambda[i].
struct CausalityTables {
  Eigen::VectorXd exogenous;        // mu
  Eigen::MatrixXd direct;           // Khat(0)^{ij} Lambda^j
  Eigen::MatrixXd oldest_ancestor;  // Psihat(0)^{ij} mu^j
};

CausalityTables causality_rates(const HawkesModel& model);

struct IntensityPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
};

// E[lambda_t | F_s] on the horizon grid (all entries > s). Exponential and
// sum-of-exponentials models are solved exactly as an augmented linear ODE
// (matrix exponential); other families step the renewal equation with an
// implicit trapezoid rule on the grid.
IntensityPath predict_intensity(const HawkesModel& model,
                                const EventSequence& history, double s,
                                const std::vector<double>& horizon_grid);

struct DiffusionResult {
  // G = (I + Psihat(0)) diag(Lambda)^{1/2}; asymptotically
  // Cov(N_T) / T -> G G^T, so Var(v . N_T)/T -> |G^T v|^2.
  Eigen::MatrixXd matrix;
  std::vector<std::string> warnings;
};

DiffusionResult diffusion_coefficients(const HawkesModel& model);

// Bundle used by the stats command.
struct AnalyticsResult {
  Eigen::VectorXd mean_intensity;
  Eigen::MatrixXd resolvent_norms;  // Psihat(0)
  Eigen::MatrixXd diffusion;
  CausalityTables causality;
  StabilityReport stability;
  std::vector<std::string> warnings;
};

AnalyticsResult analyze(const HawkesModel& model);

}  // namespace hawkes
