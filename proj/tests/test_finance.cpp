#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hawkes/analytics.hpp"
#include "hawkes/common.hpp"
#include "hawkes/finance.hpp"
#include "hawkes/rng.hpp"
#include "hawkes/simulate.hpp"

using namespace hawkes;

namespace {

HawkesModel poisson_2d(double mu) {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(2, mu);
  model.kernels = KernelMatrix(2);
  return model;
}

// Up/down price model: optional self excitation alpha_s and cross
// (mean-reverting) excitation alpha_c, one shared timescale.
HawkesModel bivariate_price_model(double mu0, double alpha_s, double alpha_c,
                                  double beta) {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(2, mu0);
  model.kernels = KernelMatrix(2);
  if (alpha_s > 0) {
    model.kernels(0, 0) = ExponentialKernel{alpha_s, beta};
    model.kernels(1, 1) = ExponentialKernel{alpha_s, beta};
  }
  if (alpha_c > 0) {
    model.kernels(0, 1) = ExponentialKernel{alpha_c, beta};
    model.kernels(1, 0) = ExponentialKernel{alpha_c, beta};
  }
  return model;
}

EventSequence draw(const HawkesModel& model, double horizon,
                   std::uint64_t seed, double burn = 0,
                   SimAlgorithm algo = SimAlgorithm::thinning) {
  SimConfig cfg;
  cfg.seed = seed;
  cfg.horizon = horizon;
  cfg.burn_in = burn;
  cfg.algorithm = algo;
  return simulate(model, cfg);
}

double mode_variance_rate(const HawkesModel& model,
                          const Eigen::VectorXd& va,
                          const Eigen::VectorXd& vb) {
  const DiffusionResult diffusion = diffusion_coefficients(model);
  return va.dot(diffusion.matrix * diffusion.matrix.transpose() * vb);
}

}  // namespace

TEST_CASE("price construction merges streams and conserves counts") {
  const PricePath flat = price_from_events(std::vector<double>{},
                                           std::vector<double>{}, 10.0, 0.5,
                                           100.0);
  CHECK(flat.times.empty());
  CHECK(flat.level_at(0.0) == 10.0);
  CHECK(flat.level_at(99.0) == 10.0);

  const PricePath path =
      price_from_events({1.0, 2.0, 5.0}, {3.0}, 4.0, 1.0, 10.0);
  REQUIRE(path.times.size() == 4);
  CHECK(path.levels.back() == 4.0 + 2.0);
  CHECK(path.level_at(0.5) == 4.0);
  CHECK(path.level_at(2.5) == 6.0);
  CHECK(path.level_at(3.0) == 5.0);
  CHECK(path.level_at(10.0) == 6.0);

  CHECK_THROWS_AS(price_from_events({2.0, 1.0}, {}, 0.0, 1.0, 10.0),
                  DataError);
  CHECK_THROWS_AS(price_from_events({}, {5.0, 4.0}, 0.0, 1.0, 10.0),
                  DataError);

  PricePath broken = path;
  broken.levels[1] = 9.0;  // two-tick jump
  CHECK_THROWS_AS(broken.validate(), DataError);
}

TEST_CASE("price path from a simulation matches the cumulative-sum oracle") {
  const HawkesModel model = bivariate_price_model(0.8, 0.1, 0.25, 1.5);
  const EventSequence events = draw(model, 500.0, 321);
  REQUIRE(events.size() > 100);
  const PricePath path = price_from_events(events, 0, 1, 100.0, 1.0);

  Rng probe(9);
  for (int k = 0; k < 300; ++k) {
    const double t = probe.uniform() * 500.0;
    double level = 100.0;
    for (std::size_t m = 0; m < events.size(); ++m) {
      if (events.times[m] > t) break;
      level += events.components[m] == 0 ? 1.0 : -1.0;
    }
    CHECK(path.level_at(t) == level);
  }
  const auto counts = events.component_counts();
  CHECK(path.levels.back() ==
        100.0 + static_cast<double>(counts[0]) - static_cast<double>(counts[1]));

  CHECK_THROWS_AS(price_from_events(events, 0, 0, 0.0, 1.0), DataError);
  CHECK_THROWS_AS(price_from_events(events, 0, 5, 0.0, 1.0), DataError);
}

TEST_CASE("signature plot is flat for independent Poisson jumps") {
  const EventSequence events = draw(poisson_2d(1.0), 20000.0, 41);
  const PricePath path = price_from_events(events, 0, 1, 0.0, 0.5);
  const std::vector<double> scales{0.5, 2.0, 8.0, 32.0};
  const SignatureCurve curve = signature_plot(path, scales);

  const double expected = 2.0 * 0.25;  // total rate times tick^2
  for (std::size_t k = 0; k < scales.size(); ++k) {
    CHECK(std::abs(curve.values[k] - expected) <
          3.0 * curve.std_errors[k] + 1e-12);
  }
}

TEST_CASE("mean-reverting signature decreases and matches closed forms") {
  // No self excitation, cross excitation 0.3 at unit rate: the closed-form
  // curve is 2 Lambda0 at tau -> 0 decaying to the diffusive level.
  const HawkesModel model = bivariate_price_model(1.0, 0.0, 0.3, 1.0);
  const EventSequence events = draw(model, 100000.0, 4242, 50.0);
  const PricePath path = price_from_events(events, 0, 1, 0.0, 1.0);
  const std::vector<double> scales{0.1, 1.0, 10.0, 100.0};
  const SignatureCurve curve = signature_plot(path, scales);

  const std::vector<double> frozen{2.7845003272620156, 2.3433943205755008,
                                   1.7803496248615267, 1.6995903504779244};
  for (std::size_t k = 0; k < scales.size(); ++k) {
    const double tolerance =
        std::max(4.0 * curve.std_errors[k], 0.03 * frozen[k]);
    CHECK(std::abs(curve.values[k] - frozen[k]) < tolerance);
  }
  CHECK(curve.values[0] > curve.values[1]);
  CHECK(curve.values[1] > curve.values[2]);
  CHECK(curve.values[2] > curve.values[3]);
  CHECK(curve.values[0] / curve.values[3] > 1.3);

  // Large-scale limit against the diffusion coefficients of the model.
  Eigen::VectorXd v(2);
  v << 1.0, -1.0;
  const double diffusive = mode_variance_rate(model, v, v);
  CHECK(diffusive == doctest::Approx(1.6906170752324598).epsilon(1e-9));
  CHECK(std::abs(curve.values[3] - diffusive) < 0.10 * diffusive);
}

TEST_CASE("signature plot rejects malformed scale grids") {
  const PricePath path = price_from_events({1.0}, {2.0}, 0.0, 1.0, 50.0);
  CHECK_THROWS_AS(signature_plot(path, {}), DataError);
  CHECK_THROWS_AS(signature_plot(path, {0.0}), DataError);
  CHECK_THROWS_AS(signature_plot(path, {60.0}), DataError);   // beyond record
  CHECK_THROWS_AS(signature_plot(path, {1.0}), DataError);    // < 100 samples
  CHECK_NOTHROW(signature_plot(path, {0.5}));
}

TEST_CASE("covariation of independent assets stays at zero") {
  const EventSequence a = draw(poisson_2d(1.0), 20000.0, 61);
  const EventSequence b = draw(poisson_2d(1.0), 20000.0, 62);
  const PricePath pa = price_from_events(a, 0, 1, 0.0, 1.0);
  const PricePath pb = price_from_events(b, 0, 1, 0.0, 1.0);
  const std::vector<double> scales{0.5, 2.0, 10.0, 50.0};
  const SignatureCurve curve = epps_covariation(pa, pb, scales);
  for (std::size_t k = 0; k < scales.size(); ++k) {
    CHECK(std::abs(curve.values[k]) < 4.0 * curve.std_errors[k] + 1e-9);
  }

  PricePath shorter = pb;
  shorter.horizon = 15000.0;
  CHECK_THROWS_AS(epps_covariation(pa, shorter, scales), DataError);
}

TEST_CASE("cross-excited assets build covariation toward the diffusion level") {
  // Two assets, four components (A-up, A-down, B-up, B-down); up moves of
  // one asset excite up moves of the other and likewise for down moves.
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(4, 1.0);
  model.kernels = KernelMatrix(4);
  model.kernels(0, 2) = ExponentialKernel{0.2, 2.0};
  model.kernels(2, 0) = ExponentialKernel{0.2, 2.0};
  model.kernels(1, 3) = ExponentialKernel{0.2, 2.0};
  model.kernels(3, 1) = ExponentialKernel{0.2, 2.0};

  const EventSequence events = draw(model, 30000.0, 77, 20.0);
  const PricePath pa = price_from_events(events, 0, 1, 0.0, 1.0);
  const PricePath pb = price_from_events(events, 2, 3, 0.0, 1.0);
  const std::vector<double> scales{0.1, 0.5, 2.0, 8.0, 64.0};
  const SignatureCurve curve = epps_covariation(pa, pb, scales);

  Eigen::VectorXd va = Eigen::VectorXd::Zero(4);
  Eigen::VectorXd vb = Eigen::VectorXd::Zero(4);
  va(0) = 1.0;
  va(1) = -1.0;
  vb(2) = 1.0;
  vb(3) = -1.0;
  const double plateau = mode_variance_rate(model, va, vb);
  REQUIRE(plateau > 0.1);

  const std::size_t last = scales.size() - 1;
  CHECK(curve.values[0] + 4.0 * curve.std_errors[0] <
        curve.values[last] - 4.0 * curve.std_errors[last]);
  CHECK(curve.values[0] < 0.45 * plateau);
  CHECK(std::abs(curve.values[last] - plateau) <
        std::max(0.10 * plateau, 4.0 * curve.std_errors[last]));
}

TEST_CASE("reflexivity report is near zero on a Poisson stream") {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(1, 2.0);
  model.kernels = KernelMatrix(1);
  const EventSequence events = draw(model, 20000.0, 91);

  ReflexivityOptions options;
  options.power_law_max_events = 1000;
  const ReflexivityReport report = reflexivity_report(
      events,
      {ReflexivityMethod::variance_ratio, ReflexivityMethod::mle_exponential,
       ReflexivityMethod::mle_power_law, ReflexivityMethod::wiener_hopf},
      options);
  REQUIRE(report.entries.size() == 4);
  CHECK(report.entries[0].estimate < 0.06);
  CHECK(report.entries[1].estimate < 0.09);
  CHECK(report.entries[2].estimate < 0.15);
  CHECK(std::abs(report.entries[3].estimate) < 0.08);
  CHECK(report.warnings.empty());

  bool truncated_note = false;
  for (const auto& note : report.entries[2].notes) {
    if (note.find("truncated") != std::string::npos) truncated_note = true;
  }
  CHECK(truncated_note);
}

TEST_CASE("variance-ratio and kernel-norm estimates agree on long memory") {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(1, 0.3);
  model.kernels = KernelMatrix(1);
  model.kernels(0, 0) = PowerLawKernel{1.35, 1.0, 1.5};  // norm 0.9
  const EventSequence events =
      draw(model, 5000.0, 1013, 200.0, SimAlgorithm::cluster);
  REQUIRE(events.size() > 5000);

  ReflexivityOptions options;
  options.window_length = 50.0;
  options.support = 20.0;
  const ReflexivityReport report = reflexivity_report(
      events,
      {ReflexivityMethod::variance_ratio, ReflexivityMethod::wiener_hopf,
       ReflexivityMethod::mle_exponential},
      options);
  REQUIRE(report.entries.size() == 3);
  const double vr = report.entries[0].estimate;
  const double wh = report.entries[1].estimate;
  const double expo = report.entries[2].estimate;
  CHECK(vr > 0.6);
  CHECK(vr < 1.0);
  CHECK(wh > 0.6);
  CHECK(wh < 1.0);
  CHECK(std::abs(vr - wh) < 0.1);

  // The exponential parametrization misses the slow tail; its bias note must
  // be part of the output.
  bool bias_note = false;
  for (const auto& note : report.entries[2].notes) {
    if (note.find("underestimate") != std::string::npos) bias_note = true;
  }
  CHECK(bias_note);
  CHECK(expo < wh + 0.05);
}

TEST_CASE("power-law likelihood recovers a long-memory branching ratio") {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(1, 0.3);
  model.kernels = KernelMatrix(1);
  model.kernels(0, 0) = PowerLawKernel{1.35, 1.0, 1.5};
  const EventSequence events =
      draw(model, 400.0, 515, 200.0, SimAlgorithm::cluster);
  REQUIRE(events.size() > 400);

  const ReflexivityReport report =
      reflexivity_report(events, {ReflexivityMethod::mle_power_law});
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].estimate > 0.6);
  CHECK(report.entries[0].estimate < 1.05);
}

TEST_CASE("near-critical streams raise the criticality flag") {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(1, 0.05);
  model.kernels = KernelMatrix(1);
  model.kernels(0, 0) = ExponentialKernel{0.99, 5.0};
  const EventSequence events = draw(model, 20000.0, 47, 500.0);

  ReflexivityOptions options;
  options.window_length = 20.0;
  const ReflexivityReport report = reflexivity_report(
      events, {ReflexivityMethod::variance_ratio}, options);
  CHECK(report.entries[0].estimate > 0.9);
  REQUIRE_FALSE(report.warnings.empty());
  CHECK(report.warnings[0].find("criticality") != std::string::npos);
}

TEST_CASE("reflexivity estimates survive a uniform time rescaling") {
  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(1, 0.3);
  model.kernels = KernelMatrix(1);
  model.kernels(0, 0) = PowerLawKernel{1.05, 1.0, 1.5};  // norm 0.7
  const EventSequence events =
      draw(model, 200.0, 99, 100.0, SimAlgorithm::cluster);
  REQUIRE(events.size() > 120);

  const double scale = 7.0;
  EventSequence scaled = events;
  for (double& t : scaled.times) t *= scale;
  scaled.horizon = events.horizon * scale;

  const std::vector<ReflexivityMethod> methods{
      ReflexivityMethod::variance_ratio, ReflexivityMethod::mle_exponential,
      ReflexivityMethod::mle_power_law, ReflexivityMethod::wiener_hopf};
  ReflexivityOptions base;
  base.window_length = 10.0;
  base.support = 8.0;
  base.nodes = 16;
  ReflexivityOptions stretched = base;
  stretched.window_length = base.window_length * scale;
  stretched.support = base.support * scale;

  const ReflexivityReport r1 = reflexivity_report(events, methods, base);
  const ReflexivityReport r2 = reflexivity_report(scaled, methods, stretched);
  REQUIRE(r1.entries.size() == r2.entries.size());
  CHECK(r1.entries[0].estimate == doctest::Approx(r2.entries[0].estimate).epsilon(1e-12));
  CHECK(r1.entries[1].estimate == doctest::Approx(r2.entries[1].estimate).epsilon(1e-5));
  CHECK(r1.entries[2].estimate == doctest::Approx(r2.entries[2].estimate).epsilon(1e-5));
  CHECK(r1.entries[3].estimate == doctest::Approx(r2.entries[3].estimate).epsilon(1e-7));
}

TEST_CASE("reflexivity input validation") {
  const EventSequence twod = draw(poisson_2d(1.0), 100.0, 3);
  CHECK_THROWS_AS(
      reflexivity_report(twod, {ReflexivityMethod::variance_ratio}),
      DataError);

  HawkesModel model;
  model.mu = Eigen::VectorXd::Constant(1, 1.0);
  model.kernels = KernelMatrix(1);
  const EventSequence events = draw(model, 500.0, 5);
  CHECK_THROWS_AS(reflexivity_report(events, {}), DataError);

  EventSequence tiny;
  tiny.times = {1.0};
  tiny.components = {0};
  tiny.horizon = 2.0;
  tiny.dim = 1;
  CHECK_THROWS_AS(
      reflexivity_report(tiny, {ReflexivityMethod::variance_ratio}),
      DataError);
}

TEST_CASE("expected impact solves the renewal equation to frozen values") {
  HimConfig cfg;
  cfg.reversion = PowerLawKernel{0.4, 1.0, 0.5};
  cfg.contrarian = 1.0;
  cfg.baseline = 0.3;  // never enters the mean response
  MetaOrderProfile meta;
  meta.edges = {0.0, 10.0};
  meta.rates = {1.0};

  const ExpectedImpact curve = him_expected_impact(cfg, meta, 120.0, 0.025);
  CHECK(curve.permanent == 0.0);
  const auto at = [&](double t) {
    const auto k = static_cast<std::size_t>(std::llround(t / 0.025));
    return curve.impact[k];
  };
  CHECK(at(5.0) == doctest::Approx(2.1118391080869574).epsilon(1e-7));
  CHECK(at(10.0) == doctest::Approx(3.1449200630719969).epsilon(1e-7));
  CHECK(at(20.0) == doctest::Approx(1.4631370028186765).epsilon(1e-7));
  CHECK(at(100.0) == doctest::Approx(0.57068181328606804).epsilon(1e-7));

  HimConfig keep = cfg;
  keep.contrarian = 0.0;
  const ExpectedImpact flat = him_expected_impact(keep, meta, 40.0, 0.05);
  CHECK(flat.permanent == doctest::Approx(10.0 / 1.8).epsilon(1e-12));

  CHECK_THROWS_AS(him_expected_impact(cfg, meta, 600.0, 1e-4),
                  NumericalError);
}

TEST_CASE("expected impact decays with the kernel tail exponents") {
  HimConfig cfg;
  cfg.reversion = PowerLawKernel{0.4, 1.0, 0.5};
  cfg.contrarian = 1.0;
  MetaOrderProfile meta;
  meta.edges = {0.0, 10.0};
  meta.rates = {1.0};

  const ExpectedImpact curve = him_expected_impact(cfg, meta, 600.0, 0.025);
  double sxx_rate = 0, sxy_rate = 0, sxx_lvl = 0, sxy_lvl = 0, sx = 0, sy_rate = 0,
         sy_lvl = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const double t = curve.times[k];
    if (t < 50.0 || t > 500.0) continue;
    const double lx = std::log(t);
    const double yr = std::log(std::abs(curve.rate[k]));
    const double yl = std::log(std::abs(curve.impact[k] - curve.permanent));
    sx += lx;
    sy_rate += yr;
    sy_lvl += yl;
    sxx_rate += lx * lx;
    sxy_rate += lx * yr;
    sxx_lvl += lx * lx;
    sxy_lvl += lx * yl;
    ++n;
  }
  const double dn = static_cast<double>(n);
  const double slope_rate = (sxy_rate - sx * sy_rate / dn) / (sxx_rate - sx * sx / dn);
  const double slope_lvl = (sxy_lvl - sx * sy_lvl / dn) / (sxx_lvl - sx * sx / dn);
  // The jump-rate imbalance carries the steep tail; the level integrates it.
  CHECK(std::abs(slope_rate - (-1.5)) < 0.3);
  CHECK(std::abs(slope_lvl - (-0.5)) < 0.3);
}

TEST_CASE("impact curve is exactly zero without trading") {
  HimConfig cfg;
  cfg.reversion = PowerLawKernel{0.4, 1.0, 0.5};
  cfg.contrarian = 0.5;
  cfg.baseline = 0.3;
  MetaOrderProfile meta;
  meta.edges = {0.0, 2.0};
  meta.rates = {0.0};

  const ImpactCurve curve = him_impact_curve(cfg, meta, 40, 11, 10.0);
  for (std::size_t k = 0; k < curve.mean.size(); ++k) {
    CHECK(curve.mean[k] == 0.0);
    CHECK(curve.std_error[k] == 0.0);
  }
}

TEST_CASE("Monte Carlo impact tracks the deterministic expectation") {
  HimConfig cfg;
  cfg.reversion = PowerLawKernel{0.4, 1.0, 0.5};
  cfg.contrarian = 0.5;
  cfg.baseline = 0.1;
  MetaOrderProfile meta;
  meta.edges = {0.0, 5.0};
  meta.rates = {1.0};

  const std::vector<double> grid{2.5, 5.0, 10.0, 20.0};
  const ImpactCurve mc = him_impact_curve(cfg, meta, 3000, 171, 20.0, grid);
  const ExpectedImpact truth = him_expected_impact(cfg, meta, 20.0, 0.0025);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto k = static_cast<std::size_t>(std::llround(grid[g] / 0.0025));
    CHECK(std::abs(mc.mean[g] - truth.impact[k]) <
          4.0 * mc.std_error[g] + 0.02);
    CHECK(mc.std_error[g] > 0.0);
  }
  CHECK(mc.paths == 3000);

  // Same seed reruns bit-identically; a different seed does not.
  const ImpactCurve again = him_impact_curve(cfg, meta, 3000, 171, 20.0, grid);
  CHECK(again.mean == mc.mean);
  CHECK(again.std_error == mc.std_error);
  const ImpactCurve other = him_impact_curve(cfg, meta, 3000, 172, 20.0, grid);
  CHECK(other.mean != mc.mean);
}

TEST_CASE("contrarian limits: full reaction kills the plateau, none keeps it") {
  HimConfig cfg;
  cfg.reversion = ExponentialKernel{0.6, 2.0};
  cfg.baseline = 0.3;
  cfg.impact_coeff = 0.5;
  MetaOrderProfile meta;
  meta.edges = {0.0, 4.0};
  meta.rates = {2.0};

  std::vector<double> grid;
  for (int k = 1; k <= 8; ++k) grid.push_back(0.5 * k);
  for (double t : {6.0, 10.0, 20.0, 40.0}) grid.push_back(t);

  cfg.contrarian = 1.0;
  const ImpactCurve contrarian = him_impact_curve(cfg, meta, 4000, 202, 40.0, grid);
  const std::size_t last = grid.size() - 1;
  CHECK(std::abs(contrarian.mean[last]) < 3.0 * contrarian.std_error[last]);

  cfg.contrarian = 0.0;
  const ImpactCurve persistent = him_impact_curve(cfg, meta, 4000, 203, 40.0, grid);
  const double plateau = 4.0 * 1.0 * (1.0 - 0.0) / (1.0 + 0.6);
  CHECK(persistent.mean[last] > 3.0 * persistent.std_error[last]);
  CHECK(std::abs(persistent.mean[last] - plateau) <
        std::max(4.0 * persistent.std_error[last], 0.1 * plateau));

  // Monotone rise through the execution window, judged at band resolution.
  for (std::size_t k = 0; k + 1 < 8; ++k) {
    CHECK(persistent.mean[k + 1] >
          persistent.mean[k] -
              3.0 * (persistent.std_error[k] + persistent.std_error[k + 1]));
  }
}

TEST_CASE("impact model rejects unstable or malformed configurations") {
  MetaOrderProfile meta;
  meta.edges = {0.0, 2.0};
  meta.rates = {1.0};

  HimConfig cfg;
  cfg.reversion = ExponentialKernel{1.2, 1.0};
  CHECK_THROWS_AS(him_impact_curve(cfg, meta, 10, 1, 10.0), StabilityError);

  cfg.reversion = ExponentialKernel{0.5, 1.0};
  cfg.contrarian = 1.5;
  CHECK_THROWS_AS(him_impact_curve(cfg, meta, 10, 1, 10.0), DataError);
  cfg.contrarian = 0.5;

  CHECK_THROWS_AS(him_impact_curve(cfg, meta, 0, 1, 10.0), DataError);
  CHECK_THROWS_AS(him_impact_curve(cfg, meta, 10, 1, 1.0), DataError);
  CHECK_THROWS_AS(him_impact_curve(cfg, meta, 10, 1, 10.0, {3.0, 2.0}),
                  DataError);
  CHECK_THROWS_AS(him_impact_curve(cfg, meta, 10, 1, 10.0, {5.0, 12.0}),
                  DataError);

  MetaOrderProfile bad;
  bad.edges = {1.0, 2.0};
  bad.rates = {1.0};
  CHECK_THROWS_AS(him_impact_curve(cfg, bad, 10, 1, 10.0), DataError);
  bad.edges = {0.0, 2.0};
  bad.rates = {-1.0};
  CHECK_THROWS_AS(him_impact_curve(cfg, bad, 10, 1, 10.0), DataError);
  bad.rates = {1.0, 2.0};
  CHECK_THROWS_AS(him_impact_curve(cfg, bad, 10, 1, 10.0), DataError);
}
