#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hawkes/events.hpp"
#include "hawkes/model.hpp"
#include "hawkes/numerics.hpp"

namespace hawkes {

// Exact log-likelihood: sum of log-intensities at events minus the
// compensator over [0, T]. Exponential-family entries use an O(M) state
// recursion; other kernels fall back to a truncated history scan. A
// non-positive intensity at some event yields value -infinity and the index
// of the offending event.
struct LogLikelihood {
  double value = 0;
  std::ptrdiff_t zero_intensity_event = -1;
};
LogLikelihood log_likelihood_detail(const HawkesModel& model,
                                    const EventSequence& events);
double log_likelihood(const HawkesModel& model, const EventSequence& events);

struct FitOptions {
  // Hold beta (and gamma) parameters at their initial values; only baselines
  // and kernel amplitudes move.
  bool fix_beta = false;
  // Events before this time enter the history but are excluded from the
  // objective sums, which suppresses the start-of-record bias. Left at 0 the
  // full window counts.
  double exclude_before = 0;
  OptimizerConfig optimizer{};
  int em_max_iterations = 500;
  double em_tolerance = 1e-8;
  bool compute_standard_errors = true;
};

struct EstimationResult {
  HawkesModel model;
  // Objective per iteration: log-likelihood for MLE/EM (non-decreasing for
  // EM), negative contrast for the least-squares paths.
  std::vector<double> objective_trace;
  // Gradient norms parallel to objective_trace, recorded by the methods that
  // drive a gradient-based optimizer; empty for the others.
  std::vector<double> gradient_norms;
  bool converged = false;
  int iterations = 0;
  StabilityReport stability;
  // Observed-information standard errors in the order of parameter_names;
  // empty when not computed or not available for the method.
  Eigen::VectorXd standard_errors;
  std::vector<std::string> parameter_names;
  std::vector<std::string> warnings;
};

// Maximum likelihood over the parametric families present in `init` (zero
// entries stay zero; exponential, sum-of-exponentials and power-law entries
// contribute their parameters). Quasi-Newton ascent on log-reparameterized
// parameters, analytic gradients for exponential families, central
// differences for the power law, soft barrier against the stability boundary.
EstimationResult fit_mle(const EventSequence& events, const HawkesModel& init,
                         const FitOptions& options = {});

// Expectation-maximization for exponential-kernel models. The E-step
// attributes each event to the baseline or to a candidate ancestor; the
// M-step updates are exact for the finite-horizon likelihood, so the
// objective trace is non-decreasing.
EstimationResult fit_em_parametric(const EventSequence& events,
                                   const HawkesModel& init,
                                   const FitOptions& options = {});

struct NonparametricEmOptions {
  int max_iterations = 200;
  double tolerance = 1e-8;
  // Optional ridge toward flat neighboring levels (0 disables smoothing).
  double l2_penalty = 0;
};

// Histogram EM for one-dimensional data: the kernel is re-estimated each
// iteration as an expected-offspring histogram on the given lag grid, which
// keeps it non-negative by construction.
EstimationResult fit_em_nonparametric(const EventSequence& events,
                                      const std::vector<double>& lag_edges,
                                      const NonparametricEmOptions& options = {});

enum class GridStyle { linear, log };

struct QuadratureConfig {
  int nodes = 64;
  double support = 0;  // upper lag bound; must be positive
  GridStyle style = GridStyle::linear;
  // Density-estimation bandwidth; 0 selects a Silverman-style rule from the
  // pair-lag sample.
  double bandwidth = 0;

  void validate() const;
};

// Smoothed estimate of the conditional intensity matrix
// g^{ij}(t) = E[dN^i_t | event of j at 0]/dt - Lambda^i for t > 0, from
// event-pair lags (Epanechnikov smoothing, boundary corrected, trigger count
// adjusted for the horizon edge).
struct ConditionalIntensityEstimate {
  std::vector<double> grid;
  std::vector<Eigen::MatrixXd> values;
  double bandwidth = 0;
  Eigen::VectorXd lambda;
  std::vector<std::string> warnings;
};
ConditionalIntensityEstimate estimate_conditional_intensity(
    const EventSequence& events, const QuadratureConfig& cfg);

// Non-parametric kernel recovery: estimate g, discretize the integral
// equation g = phi + phi * g on quadrature nodes (negative lags folded back
// through the rate ratios), solve the dense system per target component, and
// recover mu from the fitted branching matrix. Returns piecewise-constant
// kernels on the node grid.
EstimationResult fit_wiener_hopf(const EventSequence& events,
                                 const QuadratureConfig& cfg);

struct ContrastOptions {
  // Shared piecewise-constant basis edges for every kernel entry; first edge
  // at 0.
  std::vector<double> edges;
  double l1_penalty = 0;
  int max_iterations = 4000;
  double tolerance = 1e-12;
};

// Least-squares (empirical contrast) fit over a piecewise-constant basis.
// The objective is quadratic, solved by normal equations with an exact Gram
// matrix; a positive l1_penalty switches to proximal-gradient iterations.
// Negative levels are admissible, which is what permits inhibitory lobes.
EstimationResult fit_contrast(const EventSequence& events,
                              const ContrastOptions& options);

// Binned second-order summary used by the method of moments. For
// one-dimensional data the count variance and lag covariances are recorded
// directly; bivariate symmetric data records them for the sum and difference
// modes.
struct MomentSummary {
  double bin_width = 1.0;
  int dim = 1;
  double mean_rate = 0;
  double variance = 0;
  std::vector<double> covariances;        // lag h, 2h, ... (1D)
  double var_plus = 0, var_minus = 0;     // bivariate modes
  std::vector<double> cov_plus, cov_minus;
  std::vector<int> lags;                  // lag multiples recorded
};
MomentSummary moment_summary(const EventSequence& events, double bin_width,
                             const std::vector<int>& lags);

struct MomentOptions {
  double bin_width = 1.0;
  std::vector<int> lags = {1, 2};
  int jackknife_blocks = 20;
};

// Closed-form inversion of the exponential-model moment relations (1D, or
// symmetric bivariate via the mode decomposition); with more than two lag
// conditions the closed-form seed is refined by weighted least squares.
EstimationResult fit_moments_from_summary(const MomentSummary& summary);

// Moment fit from data plus jackknife standard errors over contiguous
// blocks.
EstimationResult fit_moments(const EventSequence& events,
                             const MomentOptions& options = {});

struct BranchingRatioEstimate {
  double value = 0;
  double standard_error = 0;  // leave-one-window-out jackknife
  int windows = 0;
  bool degenerate = false;  // zero count variance (e.g. periodic input)
  std::vector<std::string> warnings;
};

// Model-free branching ratio from windowed counts: 1 - sqrt(mean/variance),
// clamped to [0, 1]. One-dimensional data only.
BranchingRatioEstimate branching_ratio_estimate(const EventSequence& events,
                                                double window_length);

struct GoodnessOfFit {
  std::vector<std::vector<double>> residuals;  // per component increments
  KsResult pooled;
  std::vector<KsResult> per_component;
  std::vector<bool> skipped;  // components without events
};

// Time-change residuals: compensator increments between consecutive events
// of each component, tested against the unit exponential law.
GoodnessOfFit goodness_of_fit(const HawkesModel& model,
                              const EventSequence& events);

}  // namespace hawkes
