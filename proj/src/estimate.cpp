#include "hawkes/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hawkes/analytics.hpp"
#include "hawkes/common.hpp"
#include "hawkes/kernels.hpp"

namespace hawkes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Shared validation

void require_plain_events(const EventSequence& events) {
  events.validate();
  if (events.size() == 0) throw DataError("no events to estimate from");
}

void require_component_coverage(const EventSequence& events) {
  const std::vector<std::size_t> counts = events.component_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) {
      throw DataError("component " + std::to_string(i) +
                      " has no events; the fit is degenerate");
    }
  }
}

bool exp_family_entry(const Kernel& k) {
  return std::holds_alternative<ZeroKernel>(k) ||
         std::holds_alternative<ExponentialKernel>(k) ||
         std::holds_alternative<SumExponentialKernel>(k);
}

bool exp_family_model(const HawkesModel& m) {
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) {
      if (!exp_family_entry(m.kernels(i, j))) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Exponential-family likelihood recursion

// One decaying state per exponential term. s and sprime track
// sum exp(-beta u_m) and sum u_m exp(-beta u_m) over past source events.
struct ExpTerm {
  int target = 0;
  int source = 0;
  double alpha = 0;
  double beta = 0;
  int entry_term = -1;  // term index within a sum entry, -1 for single
  int idx_alpha = -1;   // gradient slots; -1 when not requested
  int idx_beta = -1;
  double s = 0;
  double sprime = 0;
};

std::vector<ExpTerm> collect_exp_terms(const HawkesModel& m) {
  std::vector<ExpTerm> terms;
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) {
      const Kernel& k = m.kernels(i, j);
      if (const auto* e = std::get_if<ExponentialKernel>(&k)) {
        terms.push_back({i, j, e->alpha, e->beta, -1, -1, -1, 0, 0});
      } else if (const auto* se = std::get_if<SumExponentialKernel>(&k)) {
        for (std::size_t t = 0; t < se->alphas.size(); ++t) {
          terms.push_back({i, j, se->alphas[t], se->betas[t],
                           static_cast<int>(t), -1, -1, 0, 0});
        }
      }
    }
  }
  return terms;
}

struct ExpLikelihood {
  double value = -kInf;
  std::ptrdiff_t bad_event = -1;
  Eigen::VectorXd grad;  // filled when requested: mu block then term slots
};

// Exact log-likelihood over [t0, T] (events before t0 act as history only).
// When `grad` is non-null it receives d/d(mu_i) in slots [0, D) and
// d/d(alpha), d/d(beta) in the term slots recorded in each ExpTerm.
ExpLikelihood exp_log_likelihood(const Eigen::VectorXd& mu,
                                 std::vector<ExpTerm> terms,
                                 const EventSequence& events, double t0,
                                 bool want_grad, int grad_size) {
  const int d = static_cast<int>(mu.size());
  ExpLikelihood out;
  if (want_grad) out.grad = Eigen::VectorXd::Zero(grad_size);
  double value = 0;

  double prev = 0;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const double t = events.times[k];
    const int c = events.components[k];
    const double dt = t - prev;
    if (dt > 0) {
      for (ExpTerm& term : terms) {
        const double decay = std::exp(-term.beta * dt);
        term.sprime = (term.sprime + dt * term.s) * decay;
        term.s *= decay;
      }
      prev = t;
    }
    if (t >= t0) {
      double lam = mu(c);
      for (const ExpTerm& term : terms) {
        if (term.target == c) lam += term.alpha * term.beta * term.s;
      }
      if (!(lam > 0)) {
        out.bad_event = static_cast<std::ptrdiff_t>(k);
        return out;
      }
      value += std::log(lam);
      if (want_grad) {
        out.grad(c) += 1.0 / lam;
        for (const ExpTerm& term : terms) {
          if (term.target != c) continue;
          if (term.idx_alpha >= 0) {
            out.grad(term.idx_alpha) += term.beta * term.s / lam;
          }
          if (term.idx_beta >= 0) {
            out.grad(term.idx_beta) +=
                term.alpha * (term.s - term.beta * term.sprime) / lam;
          }
        }
      }
    }
    for (ExpTerm& term : terms) {
      if (term.source == c) term.s += 1.0;
    }
  }

  // Compensator over [t0, T] including the tail effect of history events.
  const double horizon = events.horizon;
  value -= mu.sum() * (horizon - t0);
  if (want_grad) {
    for (int i = 0; i < d; ++i) out.grad(i) -= (horizon - t0);
  }
  for (ExpTerm& term : terms) {
    double mass = 0, dmass = 0;
    for (std::size_t k = 0; k < events.size(); ++k) {
      if (events.components[k] != term.source) continue;
      const double a = std::max(0.0, t0 - events.times[k]);
      const double b = horizon - events.times[k];
      const double ea = std::exp(-term.beta * a);
      const double eb = std::exp(-term.beta * b);
      mass += ea - eb;
      dmass += -a * ea + b * eb;
    }
    value -= term.alpha * mass;
    if (want_grad) {
      if (term.idx_alpha >= 0) out.grad(term.idx_alpha) -= mass;
      if (term.idx_beta >= 0) out.grad(term.idx_beta) -= term.alpha * dmass;
    }
  }
  out.value = value;
  return out;
}

// ---------------------------------------------------------------------------
// Clamped-intensity compensator

// Integral of max(0, raw intensity) per component, reported at the requested
// (sorted) times. Integration segments split at event times and at stepwise
// kernel edges, so the only kernels that can go negative integrate exactly;
// smooth kernels use interior 3-point Gauss panels per segment.
std::vector<Eigen::VectorXd> clamped_compensator(
    const HawkesModel& model, const EventSequence& events,
    const std::vector<double>& queries) {
  const int d = model.dim();
  double max_support = 0;
  std::vector<std::vector<double>> edge_offsets(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    std::vector<double>& offs = edge_offsets[static_cast<std::size_t>(j)];
    for (int i = 0; i < d; ++i) {
      const Kernel& k = model.kernels(i, j);
      if (is_zero_kernel(k)) continue;
      max_support = std::max(max_support, effective_support(k, 1e-9));
      if (const auto* pc = std::get_if<PiecewiseConstantKernel>(&k)) {
        offs.insert(offs.end(), pc->edges.begin(), pc->edges.end());
      }
    }
    std::sort(offs.begin(), offs.end());
    offs.erase(std::unique(offs.begin(), offs.end()), offs.end());
  }

  const auto raw_total = [&](double t, std::size_t upto) {
    Eigen::VectorXd raw = model.mu;
    for (std::size_t m = upto; m-- > 0;) {
      const double u = t - events.times[m];
      if (u > max_support) break;
      if (u <= 0) continue;
      const int j = events.components[m];
      for (int i = 0; i < d; ++i) {
        raw(i) += eval_kernel(model.kernels(i, j), u);
      }
    }
    return raw.cwiseMax(0.0).eval();
  };

  // Merge event times and query times into one knot list.
  struct Knot {
    double t;
    int query = -1;  // index into `queries` when this knot snapshots
  };
  std::vector<Knot> knots;
  knots.reserve(events.size() + queries.size() + 1);
  for (double t : events.times) knots.push_back({t, -1});
  for (std::size_t q = 0; q < queries.size(); ++q) {
    knots.push_back({queries[q], static_cast<int>(q)});
  }
  std::sort(knots.begin(), knots.end(), [](const Knot& a, const Knot& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.query < b.query;
  });

  std::vector<Eigen::VectorXd> out(queries.size());
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(d);
  const QuadratureRule& gl3 = gauss_legendre(3);
  double cursor = 0;
  std::size_t upto = 0;  // events with time < current segment start
  std::vector<double> cuts;
  for (const Knot& knot : knots) {
    const double target = knot.t;
    if (target > cursor) {
      while (upto < events.size() && events.times[upto] <= cursor) ++upto;
      // Breakpoints from stepwise kernel edges inside (cursor, target).
      cuts.clear();
      cuts.push_back(cursor);
      for (std::size_t m = upto; m-- > 0;) {
        if (target - events.times[m] > max_support) break;
        const auto& offs =
            edge_offsets[static_cast<std::size_t>(events.components[m])];
        for (double e : offs) {
          const double s = events.times[m] + e;
          if (s > cursor && s < target) cuts.push_back(s);
        }
      }
      cuts.push_back(target);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        if (!(b > a)) continue;
        for (std::size_t q = 0; q < gl3.nodes.size(); ++q) {
          const double t = 0.5 * (b - a) * (gl3.nodes[q] + 1.0) + a;
          integral += 0.5 * (b - a) * gl3.weights[q] * raw_total(t, upto);
        }
      }
      cursor = target;
    }
    if (knot.query >= 0) out[static_cast<std::size_t>(knot.query)] = integral;
  }
  return out;
}

// ---------------------------------------------------------------------------
// General-kernel likelihood (truncated history scan)

double general_log_likelihood(const HawkesModel& model,
                              const EventSequence& events, double t0,
                              std::ptrdiff_t* bad_event) {
  const int d = model.dim();
  const double horizon = events.horizon;

  std::vector<double> support(static_cast<std::size_t>(d), 0.0);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      if (is_zero_kernel(model.kernels(i, j))) continue;
      support[j] =
          std::max(support[j], effective_support(model.kernels(i, j), 1e-9));
    }
  }
  const double max_support = *std::max_element(support.begin(), support.end());

  double value = 0;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const double t = events.times[k];
    if (t < t0) continue;
    const int c = events.components[k];
    double raw = model.mu(c);
    for (std::size_t m = k; m-- > 0;) {
      const double u = t - events.times[m];
      if (u > max_support) break;
      if (u <= 0) continue;
      raw += eval_kernel(model.kernels(c, events.components[m]), u);
    }
    const double lam =
        model.transfer == Transfer::positive_part ? std::max(raw, 0.0) : raw;
    if (!(lam > 0)) {
      if (bad_event) *bad_event = static_cast<std::ptrdiff_t>(k);
      return -kInf;
    }
    value += std::log(lam);
  }

  if (model.transfer == Transfer::identity) {
    value -= model.mu.sum() * (horizon - t0);
    for (std::size_t m = 0; m < events.size(); ++m) {
      const int j = events.components[m];
      const double a = std::max(0.0, t0 - events.times[m]);
      const double b = horizon - events.times[m];
      for (int i = 0; i < d; ++i) {
        const Kernel& kern = model.kernels(i, j);
        if (is_zero_kernel(kern)) continue;
        value -= integral_to(kern, b) - integral_to(kern, a);
      }
    }
  } else {
    // Clamped intensity has no closed-form compensator.
    const std::vector<Eigen::VectorXd> comp =
        clamped_compensator(model, events, {t0, horizon});
    value -= (comp[1] - comp[0]).sum();
  }
  return value;
}

// ---------------------------------------------------------------------------
// Stability helpers for optimization barriers

struct RadiusGradient {
  double radius = 0;
  Eigen::MatrixXd d_radius;  // d rho / d K_ij
};

RadiusGradient radius_with_gradient(const Eigen::MatrixXd& k) {
  RadiusGradient out;
  const int d = static_cast<int>(k.rows());
  Eigen::VectorXd right = Eigen::VectorXd::Ones(d);
  Eigen::VectorXd left = Eigen::VectorXd::Ones(d);
  double radius = 0;
  for (int it = 0; it < 2000; ++it) {
    Eigen::VectorXd nr = k * right;
    Eigen::VectorXd nl = k.transpose() * left;
    const double scale = nr.norm();
    if (scale <= 0) break;
    nr /= scale;
    if (nl.norm() > 0) nl /= nl.norm();
    const double next = (k * nr).norm();
    right = nr;
    left = nl;
    if (std::abs(next - radius) < 1e-13 * std::max(1.0, next) && it > 4) {
      radius = next;
      break;
    }
    radius = next;
  }
  out.radius = radius;
  const double denom = left.dot(right);
  if (std::abs(denom) > 1e-12) {
    out.d_radius = (left * right.transpose()) / denom;
  } else {
    out.d_radius = Eigen::MatrixXd::Zero(d, d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter plumbing for fit_mle

enum class ParamKind { mu, alpha, beta, gamma };

struct ParamSlot {
  ParamKind kind = ParamKind::mu;
  int i = 0;
  int j = 0;
  int term = -1;  // sum-of-exponentials term index
};

struct ParamLayout {
  std::vector<ParamSlot> slots;
  std::vector<std::string> names;

  [[nodiscard]] int size() const { return static_cast<int>(slots.size()); }
};

ParamLayout build_layout(const HawkesModel& init, bool fix_beta) {
  ParamLayout layout;
  const int d = init.dim();
  for (int i = 0; i < d; ++i) {
    layout.slots.push_back({ParamKind::mu, i, 0, -1});
    layout.names.push_back("mu[" + std::to_string(i) + "]");
  }
  const auto entry_name = [](const char* base, int i, int j, int term) {
    std::string s = std::string(base) + "[" + std::to_string(i) + "," +
                    std::to_string(j);
    if (term >= 0) s += "," + std::to_string(term);
    return s + "]";
  };
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Kernel& k = init.kernels(i, j);
      if (std::holds_alternative<ExponentialKernel>(k)) {
        layout.slots.push_back({ParamKind::alpha, i, j, -1});
        layout.names.push_back(entry_name("alpha", i, j, -1));
        if (!fix_beta) {
          layout.slots.push_back({ParamKind::beta, i, j, -1});
          layout.names.push_back(entry_name("beta", i, j, -1));
        }
      } else if (const auto* se = std::get_if<SumExponentialKernel>(&k)) {
        for (int t = 0; t < static_cast<int>(se->alphas.size()); ++t) {
          layout.slots.push_back({ParamKind::alpha, i, j, t});
          layout.names.push_back(entry_name("alpha", i, j, t));
          if (!fix_beta) {
            layout.slots.push_back({ParamKind::beta, i, j, t});
            layout.names.push_back(entry_name("beta", i, j, t));
          }
        }
      } else if (std::holds_alternative<PowerLawKernel>(k)) {
        layout.slots.push_back({ParamKind::alpha, i, j, -1});
        layout.names.push_back(entry_name("alpha", i, j, -1));
        if (!fix_beta) {
          layout.slots.push_back({ParamKind::beta, i, j, -1});
          layout.names.push_back(entry_name("beta", i, j, -1));
          layout.slots.push_back({ParamKind::gamma, i, j, -1});
          layout.names.push_back(entry_name("gamma", i, j, -1));
        }
      }
    }
  }
  return layout;
}

// The optimizer layout and the term list are both generated in (i, j, term)
// order, so gradient slots wire up by structural position.
void wire_gradient_slots(std::vector<ExpTerm>& terms,
                         const ParamLayout& layout) {
  for (ExpTerm& term : terms) {
    term.idx_alpha = -1;
    term.idx_beta = -1;
    for (int q = 0; q < layout.size(); ++q) {
      const ParamSlot& s = layout.slots[q];
      if (s.kind == ParamKind::mu || s.kind == ParamKind::gamma) continue;
      if (s.i != term.target || s.j != term.source) continue;
      if (s.term != term.entry_term) continue;
      if (s.kind == ParamKind::alpha) term.idx_alpha = q;
      if (s.kind == ParamKind::beta) term.idx_beta = q;
    }
  }
}

Eigen::VectorXd extract_params(const HawkesModel& m, const ParamLayout& layout) {
  Eigen::VectorXd x(layout.size());
  for (int p = 0; p < layout.size(); ++p) {
    const ParamSlot& s = layout.slots[p];
    double v = 0;
    if (s.kind == ParamKind::mu) {
      v = m.mu(s.i);
    } else {
      const Kernel& k = m.kernels(s.i, s.j);
      if (const auto* e = std::get_if<ExponentialKernel>(&k)) {
        v = s.kind == ParamKind::alpha ? e->alpha : e->beta;
      } else if (const auto* se = std::get_if<SumExponentialKernel>(&k)) {
        v = s.kind == ParamKind::alpha
                ? se->alphas[static_cast<std::size_t>(s.term)]
                : se->betas[static_cast<std::size_t>(s.term)];
      } else if (const auto* pl = std::get_if<PowerLawKernel>(&k)) {
        v = s.kind == ParamKind::alpha
                ? pl->alpha
                : (s.kind == ParamKind::beta ? pl->beta : pl->gamma);
      }
    }
    x(p) = v;
  }
  return x;
}

void apply_params(HawkesModel& m, const ParamLayout& layout,
                  const Eigen::VectorXd& x) {
  for (int p = 0; p < layout.size(); ++p) {
    const ParamSlot& s = layout.slots[p];
    const double v = x(p);
    if (s.kind == ParamKind::mu) {
      m.mu(s.i) = v;
      continue;
    }
    Kernel& k = m.kernels(s.i, s.j);
    if (auto* e = std::get_if<ExponentialKernel>(&k)) {
      (s.kind == ParamKind::alpha ? e->alpha : e->beta) = v;
    } else if (auto* se = std::get_if<SumExponentialKernel>(&k)) {
      (s.kind == ParamKind::alpha
           ? se->alphas[static_cast<std::size_t>(s.term)]
           : se->betas[static_cast<std::size_t>(s.term)]) = v;
    } else if (auto* pl = std::get_if<PowerLawKernel>(&k)) {
      if (s.kind == ParamKind::alpha) {
        pl->alpha = v;
      } else if (s.kind == ParamKind::beta) {
        pl->beta = v;
      } else {
        pl->gamma = v;
      }
    }
  }
}

// d K_ij / d param, for the stability barrier chain rule.
double branching_derivative(const HawkesModel& m, const ParamSlot& s) {
  if (s.kind == ParamKind::mu) return 0;
  const Kernel& k = m.kernels(s.i, s.j);
  if (std::holds_alternative<ExponentialKernel>(k) ||
      std::holds_alternative<SumExponentialKernel>(k)) {
    return s.kind == ParamKind::alpha ? 1.0 : 0.0;
  }
  if (const auto* pl = std::get_if<PowerLawKernel>(&k)) {
    if (s.kind == ParamKind::alpha) return 1.0 / pl->gamma;
    if (s.kind == ParamKind::gamma) return -pl->alpha / (pl->gamma * pl->gamma);
  }
  return 0.0;
}

constexpr double kBarrierEdge = 0.999;
constexpr double kBarrierWeight = 1e4;

double stability_barrier(const HawkesModel& m, const ParamLayout& layout,
                         Eigen::VectorXd* grad_raw) {
  const RadiusGradient rg = radius_with_gradient(m.branching_matrix_abs());
  const double excess = rg.radius - kBarrierEdge;
  if (excess <= 0) return 0;
  if (grad_raw) {
    for (int p = 0; p < layout.size(); ++p) {
      const ParamSlot& s = layout.slots[p];
      const double dk = branching_derivative(m, s);
      if (dk != 0) {
        (*grad_raw)(p) += kBarrierWeight * 3.0 * excess * excess *
                          rg.d_radius(s.i, s.j) * dk;
      }
    }
  }
  return kBarrierWeight * excess * excess * excess;
}

}  // namespace

// ---------------------------------------------------------------------------
// log_likelihood

LogLikelihood log_likelihood_detail(const HawkesModel& model,
                                    const EventSequence& events) {
  model.validate();
  events.validate();
  if (model.marked()) {
    throw DataError("marked likelihoods are not supported");
  }
  if (model.dim() != events.dim) {
    throw DataError("model dimension does not match the event stream");
  }
  LogLikelihood out;
  if (model.transfer == Transfer::identity && exp_family_model(model)) {
    const ExpLikelihood ll = exp_log_likelihood(
        model.mu, collect_exp_terms(model), events, 0.0, false, 0);
    out.value = ll.value;
    out.zero_intensity_event = ll.bad_event;
  } else {
    std::ptrdiff_t bad = -1;
    out.value = general_log_likelihood(model, events, 0.0, &bad);
    out.zero_intensity_event = bad;
  }
  return out;
}

double log_likelihood(const HawkesModel& model, const EventSequence& events) {
  return log_likelihood_detail(model, events).value;
}

// ---------------------------------------------------------------------------
// fit_mle

EstimationResult fit_mle(const EventSequence& events, const HawkesModel& init,
                         const FitOptions& options) {
  require_plain_events(events);
  require_component_coverage(events);
  init.validate();
  if (init.marked()) throw DataError("marked likelihoods are not supported");
  if (init.transfer != Transfer::identity) {
    throw DataError("likelihood fitting requires the identity transfer");
  }
  if (events.dim != init.dim()) {
    throw DataError("initial model dimension does not match the events");
  }

  EstimationResult result;
  if (events.marked()) {
    result.warnings.push_back("event marks are ignored by this estimator");
  }

  const ParamLayout layout = build_layout(init, options.fix_beta);
  const int p = layout.size();
  const bool analytic = exp_family_model(init);
  const double t0 = options.exclude_before;
  if (t0 >= events.horizon) {
    throw DataError("exclude_before removes the whole record");
  }

  HawkesModel work = init;

  // Objective in log-parameters: negative log-likelihood plus a soft
  // stability barrier; the reparameterization keeps every parameter positive.
  const auto objective = [&](const Eigen::VectorXd& theta,
                             Eigen::VectorXd& grad) -> double {
    Eigen::VectorXd raw = theta.array().exp();
    // A wild line-search step can overflow the exponential map; treat it as
    // an objective cliff so the search backtracks.
    if (!raw.allFinite() || raw.maxCoeff() > 1e12) {
      grad = Eigen::VectorXd::Zero(p);
      return 1e30;
    }
    apply_params(work, layout, raw);
    Eigen::VectorXd graw = Eigen::VectorXd::Zero(p);
    double value;
    if (analytic) {
      std::vector<ExpTerm> terms = collect_exp_terms(work);
      wire_gradient_slots(terms, layout);
      const ExpLikelihood ll =
          exp_log_likelihood(work.mu, std::move(terms), events, t0, true, p);
      if (ll.bad_event >= 0) {
        grad = Eigen::VectorXd::Zero(p);
        return 1e30;
      }
      value = -ll.value;
      graw = -ll.grad;
    } else {
      std::ptrdiff_t bad = -1;
      value = -general_log_likelihood(work, events, t0, &bad);
      if (bad >= 0) {
        grad = Eigen::VectorXd::Zero(p);
        return 1e30;
      }
      // Central differences in the log-parameters.
      for (int q = 0; q < p; ++q) {
        const double step = 1e-6 * std::max(1.0, std::abs(theta(q)));
        Eigen::VectorXd tp = theta, tm = theta;
        tp(q) += step;
        tm(q) -= step;
        apply_params(work, layout, tp.array().exp().matrix().eval());
        const double fp = -general_log_likelihood(work, events, t0, nullptr);
        apply_params(work, layout, tm.array().exp().matrix().eval());
        const double fm = -general_log_likelihood(work, events, t0, nullptr);
        grad(q) = (fp - fm) / (2 * step);
      }
      apply_params(work, layout, raw);
    }
    Eigen::VectorXd barrier_graw = Eigen::VectorXd::Zero(p);
    value += stability_barrier(work, layout, &barrier_graw);
    // Chain rule through the log reparameterization.
    if (analytic) {
      grad = (graw + barrier_graw).cwiseProduct(raw);
    } else {
      grad += barrier_graw.cwiseProduct(raw);
    }
    if (!std::isfinite(value) || !grad.allFinite()) {
      grad = Eigen::VectorXd::Zero(p);
      return 1e30;
    }
    return value;
  };

  Eigen::VectorXd theta0 =
      extract_params(init, layout).array().max(1e-8).log();

  std::vector<double> trace;
  std::vector<double> grad_norms;
  double best_seen = kInf;
  const auto traced = [&](const Eigen::VectorXd& theta,
                          Eigen::VectorXd& grad) -> double {
    const double v = objective(theta, grad);
    if (v < best_seen) {
      best_seen = v;
      trace.push_back(-v);
      grad_norms.push_back(grad.norm());
    }
    return v;
  };

  const OptimizerResult opt = minimize_bfgs(traced, theta0, options.optimizer);

  Eigen::VectorXd raw = opt.x.array().exp();
  apply_params(work, layout, raw);
  result.model = work;
  result.objective_trace = std::move(trace);
  result.gradient_norms = std::move(grad_norms);
  result.converged = opt.converged;
  result.iterations = opt.iterations;
  result.parameter_names = layout.names;
  result.stability = stability_of_matrix(work.branching_matrix_abs());
  if (result.stability.spectral_radius >= kBarrierEdge) {
    result.warnings.push_back(
        "fit sits at the stability boundary (spectral radius " +
        std::to_string(result.stability.spectral_radius) + ")");
  }

  if (options.compute_standard_errors) {
    if (analytic) {
      // Observed information: numerical Jacobian of the analytic gradient in
      // the raw parameters.
      const auto grad_raw = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
        apply_params(work, layout, r);
        std::vector<ExpTerm> terms = collect_exp_terms(work);
        wire_gradient_slots(terms, layout);
        const ExpLikelihood ll =
            exp_log_likelihood(work.mu, std::move(terms), events, t0, true, p);
        return ll.bad_event >= 0 ? Eigen::VectorXd::Zero(p).eval() : ll.grad;
      };
      Eigen::MatrixXd hess(p, p);
      for (int q = 0; q < p; ++q) {
        const double step = 1e-5 * std::max(1e-3, std::abs(raw(q)));
        Eigen::VectorXd rp = raw, rm = raw;
        rp(q) += step;
        rm(q) -= step;
        hess.col(q) = (grad_raw(rp) - grad_raw(rm)) / (2 * step);
      }
      apply_params(work, layout, raw);
      hess = -0.5 * (hess + hess.transpose());  // observed information
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(hess);
      if (lu.isInvertible()) {
        const Eigen::MatrixXd cov = lu.inverse();
        result.standard_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
      } else {
        result.warnings.push_back(
            "observed information is singular; no standard errors");
      }
    } else {
      result.warnings.push_back(
          "standard errors are not computed for numeric-gradient families");
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// fit_em_parametric

EstimationResult fit_em_parametric(const EventSequence& events,
                                   const HawkesModel& init,
                                   const FitOptions& options) {
  require_plain_events(events);
  require_component_coverage(events);
  init.validate();
  if (init.marked()) throw DataError("marked likelihoods are not supported");
  if (init.transfer != Transfer::identity) {
    throw DataError("likelihood fitting requires the identity transfer");
  }
  if (events.dim != init.dim()) {
    throw DataError("initial model dimension does not match the events");
  }
  const int d = init.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Kernel& k = init.kernels(i, j);
      if (!std::holds_alternative<ZeroKernel>(k) &&
          !std::holds_alternative<ExponentialKernel>(k)) {
        throw DataError(
            "expectation-maximization needs single-exponential entries");
      }
    }
  }

  EstimationResult result;
  if (events.marked()) {
    result.warnings.push_back("event marks are ignored by this estimator");
  }
  const double t0 = options.exclude_before;
  if (t0 >= events.horizon) {
    throw DataError("exclude_before removes the whole record");
  }
  const double span = events.horizon - t0;

  HawkesModel work = init;
  const auto loglik_now = [&]() {
    return exp_log_likelihood(work.mu, collect_exp_terms(work), events, t0,
                              false, 0)
        .value;
  };

  // Per-source event times, reused by the M-step mass sums.
  std::vector<std::vector<double>> by_source(static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < events.size(); ++k) {
    by_source[static_cast<std::size_t>(events.components[k])].push_back(
        events.times[k]);
  }

  double current = loglik_now();
  result.objective_trace.push_back(current);

  int iter = 0;
  for (; iter < options.em_max_iterations; ++iter) {
    // E-step accumulators: expected immigrant counts per target, expected
    // pair counts and pair lag sums per entry.
    Eigen::VectorXd immigrants = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd pairs = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd lag_mass = Eigen::MatrixXd::Zero(d, d);

    std::vector<ExpTerm> terms = collect_exp_terms(work);
    double prev = 0;
    for (std::size_t k = 0; k < events.size(); ++k) {
      const double t = events.times[k];
      const int c = events.components[k];
      const double dt = t - prev;
      if (dt > 0) {
        for (ExpTerm& term : terms) {
          const double decay = std::exp(-term.beta * dt);
          term.sprime = (term.sprime + dt * term.s) * decay;
          term.s *= decay;
        }
        prev = t;
      }
      if (t >= t0) {
        double lam = work.mu(c);
        for (const ExpTerm& term : terms) {
          if (term.target == c) lam += term.alpha * term.beta * term.s;
        }
        immigrants(c) += work.mu(c) / lam;
        for (const ExpTerm& term : terms) {
          if (term.target != c) continue;
          pairs(term.target, term.source) +=
              term.alpha * term.beta * term.s / lam;
          lag_mass(term.target, term.source) +=
              term.alpha * term.beta * term.sprime / lam;
        }
      }
      for (ExpTerm& term : terms) {
        if (term.source == c) term.s += 1.0;
      }
    }

    // M-step: baselines are exact; each entry solves its profile equation.
    for (int i = 0; i < d; ++i) work.mu(i) = immigrants(i) / span;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        auto* e = std::get_if<ExponentialKernel>(&work.kernels(i, j));
        if (e == nullptr) continue;
        const double c_pairs = pairs(i, j);
        const double b_mass = lag_mass(i, j);
        const std::vector<double>& src = by_source[static_cast<std::size_t>(j)];
        const auto mass = [&](double beta, double& out_mass,
                              double& out_dmass) {
          double m = 0, dm = 0;
          for (double tm : src) {
            const double a = std::max(0.0, t0 - tm);
            const double b = events.horizon - tm;
            const double ea = std::exp(-beta * a);
            const double eb = std::exp(-beta * b);
            m += ea - eb;
            dm += -a * ea + b * eb;
          }
          out_mass = m;
          out_dmass = dm;
        };
        if (c_pairs <= 0 || b_mass <= 0) {
          e->alpha = 1e-12;  // entry starved of pairs; keep it inert
          continue;
        }
        double beta = e->beta;
        if (!options.fix_beta) {
          // Profile score in beta: C/beta - B - C * E'(beta)/E(beta).
          const auto score = [&](double b) {
            double m, dm;
            mass(b, m, dm);
            return c_pairs / b - b_mass - c_pairs * dm / m;
          };
          double lo = beta, hi = beta;
          double flo = score(lo), fhi = flo;
          for (int expand = 0; expand < 200 && flo < 0; ++expand) {
            lo *= 0.5;
            flo = score(lo);
          }
          for (int expand = 0; expand < 200 && fhi > 0; ++expand) {
            hi *= 2.0;
            fhi = score(hi);
          }
          if (flo >= 0 && fhi <= 0) {
            for (int step = 0; step < 200; ++step) {
              const double mid = 0.5 * (lo + hi);
              if (score(mid) > 0) {
                lo = mid;
              } else {
                hi = mid;
              }
              if (hi - lo < 1e-12 * hi) break;
            }
            beta = 0.5 * (lo + hi);
          }
        }
        double m, dm;
        mass(beta, m, dm);
        e->beta = beta;
        e->alpha = std::max(c_pairs / m, 1e-12);
      }
    }

    const double next = loglik_now();
    result.objective_trace.push_back(next);
    const double gain = next - current;
    current = next;
    if (std::abs(gain) < options.em_tolerance * (1.0 + std::abs(next))) {
      result.converged = true;
      ++iter;
      break;
    }
  }
  result.iterations = iter;
  if (!result.converged) {
    result.warnings.push_back(
        "iteration cap reached; convergence is slow when the mean cluster "
        "rate per memory span is large");
  }
  result.model = work;
  result.parameter_names = build_layout(work, false).names;
  result.stability = stability_of_matrix(work.branching_matrix_abs());
  return result;
}

// ---------------------------------------------------------------------------
// fit_em_nonparametric

EstimationResult fit_em_nonparametric(const EventSequence& events,
                                      const std::vector<double>& lag_edges,
                                      const NonparametricEmOptions& options) {
  require_plain_events(events);
  if (events.dim != 1) {
    throw DataError("non-parametric EM supports one-dimensional data");
  }
  if (lag_edges.size() < 2 || lag_edges.front() != 0.0 ||
      !std::is_sorted(lag_edges.begin(), lag_edges.end())) {
    throw DataError("lag grid must start at 0 and increase");
  }
  const std::size_t nb = lag_edges.size() - 1;
  const double window = lag_edges.back();
  const double horizon = events.horizon;
  const std::size_t m_count = events.size();

  // Exposure of each lag bin: total time each event could have produced a
  // child at that lag inside the record.
  std::vector<double> exposure(nb, 0.0);
  for (double tm : events.times) {
    const double span = horizon - tm;
    for (std::size_t b = 0; b < nb; ++b) {
      exposure[b] +=
          std::max(0.0, std::min(lag_edges[b + 1], span) - lag_edges[b]);
    }
  }

  std::vector<double> levels(nb, 0.1);
  double mu = static_cast<double>(m_count) / horizon * 0.5;

  EstimationResult result;
  const auto bin_of = [&](double u) -> std::ptrdiff_t {
    if (u <= 0 || u >= window) return -1;
    const auto it =
        std::upper_bound(lag_edges.begin(), lag_edges.end(), u);
    return static_cast<std::ptrdiff_t>(it - lag_edges.begin()) - 1;
  };

  double current = -kInf;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    std::vector<double> children(nb, 0.0);
    double immigrants = 0;
    double loglik = 0;
    for (std::size_t k = 0; k < m_count; ++k) {
      const double t = events.times[k];
      double lam = mu;
      for (std::size_t m = k; m-- > 0;) {
        const double u = t - events.times[m];
        if (u >= window) break;
        const std::ptrdiff_t b = bin_of(u);
        if (b >= 0) lam += levels[static_cast<std::size_t>(b)];
      }
      loglik += std::log(lam);
      immigrants += mu / lam;
      for (std::size_t m = k; m-- > 0;) {
        const double u = t - events.times[m];
        if (u >= window) break;
        const std::ptrdiff_t b = bin_of(u);
        if (b >= 0) {
          children[static_cast<std::size_t>(b)] +=
              levels[static_cast<std::size_t>(b)] / lam;
        }
      }
    }
    loglik -= mu * horizon;
    for (std::size_t b = 0; b < nb; ++b) loglik -= levels[b] * exposure[b];
    result.objective_trace.push_back(loglik);
    const double gain = loglik - current;
    current = loglik;
    if (iter > 0 &&
        std::abs(gain) < options.tolerance * (1.0 + std::abs(loglik))) {
      result.converged = true;
      break;
    }

    mu = immigrants / horizon;
    if (options.l2_penalty <= 0) {
      for (std::size_t b = 0; b < nb; ++b) {
        levels[b] = exposure[b] > 0 ? children[b] / exposure[b] : 0.0;
      }
    } else {
      // Penalized M-step: a few damped Newton passes on the concave
      // objective sum(children_b log v_b - exposure_b v_b) - w sum (dv)^2.
      const double w = options.l2_penalty;
      for (int pass = 0; pass < 25; ++pass) {
        for (std::size_t b = 0; b < nb; ++b) {
          const double left = b > 0 ? levels[b - 1] : levels[b];
          const double right = b + 1 < nb ? levels[b + 1] : levels[b];
          double v = std::max(levels[b], 1e-12);
          for (int nstep = 0; nstep < 8; ++nstep) {
            const double g = children[b] / v - exposure[b] -
                             2 * w * (2 * v - left - right);
            const double h = -children[b] / (v * v) - 4 * w;
            double nv = v - g / h;
            if (!(nv > 1e-12)) nv = v * 0.5;
            if (std::abs(nv - v) < 1e-14 * (1 + v)) {
              v = nv;
              break;
            }
            v = nv;
          }
          levels[b] = v;
        }
      }
    }
  }
  result.iterations = iter;
  if (!result.converged) {
    result.warnings.push_back(
        "iteration cap reached; histogram EM converges slowly for "
        "long-memory kernels");
  }

  HawkesModel fitted;
  fitted.mu = Eigen::VectorXd::Constant(1, mu);
  fitted.kernels = KernelMatrix(1);
  fitted.kernels(0, 0) = PiecewiseConstantKernel{lag_edges, levels};
  result.model = fitted;
  result.stability = stability_of_matrix(fitted.branching_matrix_abs());
  return result;
}

// ---------------------------------------------------------------------------
// estimate_conditional_intensity

void QuadratureConfig::validate() const {
  if (nodes < 8) throw DataError("quadrature needs at least 8 nodes");
  if (!(support > 0) || !std::isfinite(support)) {
    throw DataError("quadrature support must be positive");
  }
  if (bandwidth < 0 || !std::isfinite(bandwidth)) {
    throw DataError("bandwidth must be non-negative");
  }
}

namespace {

// Pair-lag sample per ordered component pair, with enough slack beyond the
// support so kernel smoothing near the upper edge is not starved.
struct PairLags {
  std::vector<std::vector<double>> lags;  // [i * d + j], sorted
  double bandwidth = 0;
};

PairLags collect_pair_lags(const EventSequence& events, double support,
                           double bandwidth_override) {
  const int d = events.dim;
  PairLags out;
  out.lags.assign(static_cast<std::size_t>(d) * d, {});
  const double reach = support * 1.05 + 1e-12;
  for (std::size_t m = 0; m < events.size(); ++m) {
    const int j = events.components[m];
    for (std::size_t n = m + 1; n < events.size(); ++n) {
      const double u = events.times[n] - events.times[m];
      if (u > reach) break;
      if (u <= 0) continue;
      const int i = events.components[n];
      out.lags[static_cast<std::size_t>(i) * d + j].push_back(u);
    }
  }
  std::size_t total = 0;
  double sum = 0, sum2 = 0;
  for (auto& v : out.lags) {
    std::sort(v.begin(), v.end());
    for (double u : v) {
      sum += u;
      sum2 += u * u;
      ++total;
    }
  }
  if (bandwidth_override > 0) {
    out.bandwidth = bandwidth_override;
  } else if (total > 1) {
    const double mean = sum / static_cast<double>(total);
    const double var = std::max(sum2 / static_cast<double>(total) - mean * mean,
                                1e-12);
    // Silverman-style rule on the pooled lag sample.
    out.bandwidth = 0.9 * std::sqrt(var) *
                    std::pow(static_cast<double>(total), -0.2);
    out.bandwidth = std::min(out.bandwidth, support / 4.0);
    out.bandwidth = std::max(out.bandwidth, support * 1e-4);
  } else {
    out.bandwidth = support / 8.0;
  }
  return out;
}

// Epanechnikov-smoothed estimate of Lambda_i + g_ij at lag tau, boundary
// corrected at 0 by renormalizing the kernel mass inside [0, infinity).
class PairDensity {
 public:
  PairDensity(const EventSequence& events, const PairLags& pairs)
      : events_(events), pairs_(pairs), d_(events.dim) {
    times_by_source_.assign(static_cast<std::size_t>(d_), {});
    for (std::size_t m = 0; m < events.size(); ++m) {
      times_by_source_[static_cast<std::size_t>(events.components[m])]
          .push_back(events.times[m]);
    }
  }

  [[nodiscard]] double triggers(int j, double tau) const {
    const auto& v = times_by_source_[static_cast<std::size_t>(j)];
    const double cutoff = events_.horizon - tau;
    return static_cast<double>(
        std::upper_bound(v.begin(), v.end(), cutoff) - v.begin());
  }

  // Estimate of Lambda_i + g^{ij}(tau), tau >= 0.
  [[nodiscard]] double rate(int i, int j, double tau) const {
    const double h = pairs_.bandwidth;
    const auto& lags = pairs_.lags[static_cast<std::size_t>(i) * d_ + j];
    const double lo = tau - h, hi = tau + h;
    const auto begin = std::lower_bound(lags.begin(), lags.end(), lo);
    const auto end = std::upper_bound(lags.begin(), lags.end(), hi);
    double acc = 0;
    for (auto it = begin; it != end; ++it) {
      const double u = (*it - tau) / h;
      acc += 0.75 * (1.0 - u * u);
    }
    // Mass of the smoothing kernel inside the observable half-line.
    double mass = 1.0;
    if (tau < h) {
      const double a = -tau / h;  // integrate over [a, 1]
      mass = 0.75 * (1.0 - a) - 0.25 * (1.0 - a * a * a);
    }
    const double m_j = triggers(j, tau);
    if (m_j <= 0 || mass <= 0) return 0;
    return acc / (h * mass * m_j);
  }

 private:
  const EventSequence& events_;
  const PairLags& pairs_;
  int d_ = 0;
  std::vector<std::vector<double>> times_by_source_;
};

std::vector<double> quadrature_grid(const QuadratureConfig& cfg,
                                    std::vector<double>* weights) {
  const QuadratureRule& rule = gauss_legendre(cfg.nodes);
  std::vector<double> grid(static_cast<std::size_t>(cfg.nodes));
  if (weights) weights->resize(static_cast<std::size_t>(cfg.nodes));
  if (cfg.style == GridStyle::linear) {
    for (int q = 0; q < cfg.nodes; ++q) {
      grid[static_cast<std::size_t>(q)] =
          0.5 * cfg.support * (rule.nodes[static_cast<std::size_t>(q)] + 1.0);
      if (weights) {
        (*weights)[static_cast<std::size_t>(q)] =
            0.5 * cfg.support * rule.weights[static_cast<std::size_t>(q)];
      }
    }
  } else {
    const double lo = std::log(cfg.support * 1e-4);
    const double hi = std::log(cfg.support);
    for (int q = 0; q < cfg.nodes; ++q) {
      const double u =
          0.5 * (hi - lo) * (rule.nodes[static_cast<std::size_t>(q)] + 1.0) + lo;
      grid[static_cast<std::size_t>(q)] = std::exp(u);
      if (weights) {
        (*weights)[static_cast<std::size_t>(q)] = 0.5 * (hi - lo) *
                                                  rule.weights[static_cast<std::size_t>(q)] *
                                                  std::exp(u);
      }
    }
  }
  return grid;
}

}  // namespace

ConditionalIntensityEstimate estimate_conditional_intensity(
    const EventSequence& events, const QuadratureConfig& cfg) {
  require_plain_events(events);
  cfg.validate();
  const int d = events.dim;

  ConditionalIntensityEstimate out;
  if (events.size() < 1000) {
    out.warnings.push_back(
        "fewer than 1000 events; the density estimate will be noisy");
  }
  out.lambda = Eigen::VectorXd::Zero(d);
  const std::vector<std::size_t> counts = events.component_counts();
  for (int i = 0; i < d; ++i) {
    out.lambda(i) =
        static_cast<double>(counts[static_cast<std::size_t>(i)]) /
        events.horizon;
  }

  const PairLags pairs = collect_pair_lags(events, cfg.support, cfg.bandwidth);
  out.bandwidth = pairs.bandwidth;
  const PairDensity density(events, pairs);

  out.grid = quadrature_grid(cfg, nullptr);
  out.values.reserve(out.grid.size());
  for (double tau : out.grid) {
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        g(i, j) = density.rate(i, j, tau) - out.lambda(i);
      }
    }
    out.values.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// fit_wiener_hopf

EstimationResult fit_wiener_hopf(const EventSequence& events,
                                 const QuadratureConfig& cfg) {
  require_plain_events(events);
  cfg.validate();
  const int d = events.dim;
  const int q_nodes = cfg.nodes;
  const int size = d * q_nodes;

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(d);
  const std::vector<std::size_t> counts = events.component_counts();
  for (int i = 0; i < d; ++i) {
    lambda(i) = static_cast<double>(counts[static_cast<std::size_t>(i)]) /
                events.horizon;
    if (lambda(i) <= 0) {
      throw DataError("component " + std::to_string(i) + " has no events");
    }
  }

  const PairLags pairs = collect_pair_lags(events, cfg.support, cfg.bandwidth);
  const PairDensity density(events, pairs);

  // Signed-lag conditional intensity: negative lags fold back through the
  // stationary rate ratio, the on-diagonal zero lag takes the symmetrized
  // one-sided limits.
  const auto g_signed = [&](int i, int j, double tau) -> double {
    if (tau > 0) return density.rate(i, j, tau) - lambda(i);
    if (tau < 0) {
      return (lambda(i) / lambda(j)) * (density.rate(j, i, -tau) - lambda(j));
    }
    const double plus = density.rate(i, j, 0.0) - lambda(i);
    const double minus =
        (lambda(i) / lambda(j)) * (density.rate(j, i, 0.0) - lambda(j));
    return 0.5 * (plus + minus);
  };

  std::vector<double> weights;
  const std::vector<double> grid = quadrature_grid(cfg, &weights);

  // One coefficient matrix serves every target row: the unknown block for
  // target i is phi^{ik}(s_q), and the equations at (j, p) read
  // g^{ij}(s_p) = phi^{ij}(s_p) + sum_{k,q} w_q g^{kj}(s_p - s_q) phi^{ik}(s_q).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  for (int j = 0; j < d; ++j) {
    for (int p = 0; p < q_nodes; ++p) {
      const int row = j * q_nodes + p;
      a(row, row) += 1.0;
      for (int k = 0; k < d; ++k) {
        for (int q = 0; q < q_nodes; ++q) {
          const int col = k * q_nodes + q;
          a(row, col) += weights[static_cast<std::size_t>(q)] *
                         g_signed(k, j,
                                  grid[static_cast<std::size_t>(p)] -
                                      grid[static_cast<std::size_t>(q)]);
        }
      }
    }
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) /
                      svd.singularValues()(svd.singularValues().size() - 1);
  if (!std::isfinite(cond) || cond > 1e12) {
    throw NumericalError(
        "discretized kernel system is ill-conditioned (condition number " +
        std::to_string(cond) + "); increase the bandwidth or reduce nodes");
  }

  EstimationResult result;
  HawkesModel fitted;
  fitted.mu = Eigen::VectorXd::Zero(d);
  fitted.kernels = KernelMatrix(d);

  // Piecewise edges: midpoints between quadrature nodes.
  std::vector<double> edges;
  edges.reserve(grid.size() + 1);
  edges.push_back(0.0);
  for (std::size_t q = 0; q + 1 < grid.size(); ++q) {
    edges.push_back(0.5 * (grid[q] + grid[q + 1]));
  }
  edges.push_back(cfg.support);

  Eigen::MatrixXd branching = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd rhs(size);
    for (int j = 0; j < d; ++j) {
      for (int p = 0; p < q_nodes; ++p) {
        rhs(j * q_nodes + p) =
            g_signed(i, j, grid[static_cast<std::size_t>(p)]);
      }
    }
    const Eigen::VectorXd phi = svd.solve(rhs);
    for (int k = 0; k < d; ++k) {
      std::vector<double> levels(static_cast<std::size_t>(q_nodes));
      double mass = 0;
      for (int q = 0; q < q_nodes; ++q) {
        levels[static_cast<std::size_t>(q)] = phi(k * q_nodes + q);
        mass += weights[static_cast<std::size_t>(q)] * phi(k * q_nodes + q);
      }
      branching(i, k) = mass;
      fitted.kernels(i, k) = PiecewiseConstantKernel{edges, levels};
    }
  }

  // mu = (I - K) Lambda from the fitted branching matrix.
  fitted.mu = (Eigen::MatrixXd::Identity(d, d) - branching) * lambda;
  for (int i = 0; i < d; ++i) {
    if (fitted.mu(i) <= 0) {
      result.warnings.push_back(
          "recovered baseline for component " + std::to_string(i) +
          " is not positive; the kernel estimate absorbs the full rate");
      fitted.mu(i) = 0;
    }
  }

  // Negative levels are legitimate output here (inhibition); such a model
  // is only well-posed under the clamped transfer.
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < d; ++k) {
      if (!is_nonnegative_kernel(fitted.kernels(i, k))) {
        fitted.transfer = Transfer::positive_part;
      }
    }
  }

  result.model = fitted;
  result.converged = true;
  result.iterations = 1;
  result.stability = stability_of_matrix(fitted.branching_matrix_abs());
  if (events.size() < 1000) {
    result.warnings.push_back(
        "fewer than 1000 events; the density estimate will be noisy");
  }
  return result;
}

// ---------------------------------------------------------------------------
// fit_contrast

EstimationResult fit_contrast(const EventSequence& events,
                              const ContrastOptions& options) {
  require_plain_events(events);
  const std::vector<double>& edges = options.edges;
  if (edges.size() < 2 || edges.front() != 0.0 ||
      !std::is_sorted(edges.begin(), edges.end())) {
    throw DataError("contrast basis edges must start at 0 and increase");
  }
  const int d = events.dim;
  const std::size_t nb = edges.size() - 1;
  const int dim_x = 1 + d * static_cast<int>(nb);  // constant + counts
  const double horizon = events.horizon;

  // Breakpoint sweep: R_{jb}(t) counts source-j events whose lag from t sits
  // in basis bin b. Each event toggles one bin on at t+e_b and off at
  // t+e_{b+1}; in between, the regressor vector is constant, so the Gram
  // integral is exact.
  struct Breakpoint {
    double t;
    int slot;   // regressor index of (j, b)
    int type;   // 0: -1 delta, 1: event evaluation, 2: +1 delta
    int target; // for type 1: component of the event
  };
  std::vector<Breakpoint> sweep;
  sweep.reserve(events.size() * (nb + 2));
  for (std::size_t m = 0; m < events.size(); ++m) {
    const double tm = events.times[m];
    const int j = events.components[m];
    sweep.push_back({tm, 0, 1, j});
    for (std::size_t b = 0; b < nb; ++b) {
      const int slot = 1 + j * static_cast<int>(nb) + static_cast<int>(b);
      if (tm + edges[b] < horizon) {
        sweep.push_back({tm + edges[b], slot, 2, -1});
      }
      if (tm + edges[b + 1] < horizon) {
        sweep.push_back({tm + edges[b + 1], slot, 0, -1});
      }
    }
  }
  std::sort(sweep.begin(), sweep.end(), [](const Breakpoint& x,
                                           const Breakpoint& y) {
    if (x.t != y.t) return x.t < y.t;
    return x.type < y.type;
  });

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim_x, dim_x);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(dim_x, d);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim_x);
  x(0) = 1.0;
  double cursor = 0;
  for (const Breakpoint& bp : sweep) {
    if (bp.t > cursor) {
      gram.selfadjointView<Eigen::Lower>().rankUpdate(x, bp.t - cursor);
      cursor = bp.t;
    }
    if (bp.type == 1) {
      cross.col(bp.target) += x;
    } else {
      x(bp.slot) += bp.type == 2 ? 1.0 : -1.0;
    }
  }
  if (horizon > cursor) {
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x, horizon - cursor);
  }
  const Eigen::MatrixXd gram_full = gram.selfadjointView<Eigen::Lower>();
  gram = gram_full;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double emax = eig.eigenvalues().maxCoeff();
  const double emin = eig.eigenvalues().minCoeff();
  if (!(emin > 1e-12 * std::max(emax, 1.0))) {
    throw NumericalError(
        "contrast Gram matrix is singular; widen the basis bins or provide "
        "more data");
  }

  // Quadratic objective per target: theta' G theta - 2 theta' cross_i.
  Eigen::MatrixXd coef(dim_x, d);
  EstimationResult result;
  if (options.l1_penalty <= 0) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    coef = ldlt.solve(cross);
  } else {
    // Proximal gradient (ISTA) with the exact Lipschitz constant; the
    // penalty applies to kernel levels only, never the baseline.
    const double lipschitz = 2.0 * emax;
    coef = Eigen::MatrixXd::Zero(dim_x, d);
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim_x);
      theta(0) = static_cast<double>(events.size()) / horizon / d;
      for (int it = 0; it < options.max_iterations; ++it) {
        const Eigen::VectorXd grad = 2.0 * (gram * theta - cross.col(i));
        Eigen::VectorXd next = theta - grad / lipschitz;
        const double shrink = options.l1_penalty / lipschitz;
        for (int s = 1; s < dim_x; ++s) {
          next(s) = next(s) > shrink
                        ? next(s) - shrink
                        : (next(s) < -shrink ? next(s) + shrink : 0.0);
        }
        const double move = (next - theta).norm();
        theta = next;
        if (move < options.tolerance * (1.0 + theta.norm())) break;
      }
      coef.col(i) = theta;
    }
  }

  HawkesModel fitted;
  fitted.mu = Eigen::VectorXd::Zero(d);
  fitted.kernels = KernelMatrix(d);
  bool negative = false;
  for (int i = 0; i < d; ++i) {
    fitted.mu(i) = coef(0, i);
    for (int j = 0; j < d; ++j) {
      std::vector<double> levels(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        levels[b] = coef(1 + j * static_cast<int>(nb) + static_cast<int>(b), i);
        if (levels[b] < 0) negative = true;
      }
      fitted.kernels(i, j) = PiecewiseConstantKernel{edges, levels};
    }
    if (fitted.mu(i) <= 0) {
      result.warnings.push_back("fitted baseline for component " +
                                std::to_string(i) + " is not positive");
      fitted.mu(i) = 0;
    }
  }
  if (negative) {
    fitted.transfer = Transfer::positive_part;
    result.warnings.push_back(
        "fitted kernel has negative levels; interpret under the "
        "positive-part transfer");
  }

  // Final contrast value (one entry per target summed).
  double contrast = 0;
  for (int i = 0; i < d; ++i) {
    contrast += coef.col(i).dot(gram * coef.col(i)) -
                2.0 * coef.col(i).dot(cross.col(i));
  }
  result.objective_trace.push_back(-contrast);
  result.model = fitted;
  result.converged = true;
  result.iterations = 1;
  result.stability = stability_of_matrix(fitted.branching_matrix_abs());
  return result;
}

// ---------------------------------------------------------------------------
// moments

namespace {

// ratio = amp / (atom_rate * decay) determines the branching level:
// psi(a) = a (2 - a) / (2 (1 - a)^2), increasing from 0 on (0, 1).
double invert_psi(double ratio) {
  if (!(ratio > 0)) return 0;
  double lo = 0.0, hi = 1.0 - 1e-12;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double val = mid * (2.0 - mid) / (2.0 * (1.0 - mid) * (1.0 - mid));
    if (val < ratio) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> binned_counts(const EventSequence& events, int component,
                                  double h) {
  const auto nbins = static_cast<std::size_t>(events.horizon / h);
  std::vector<double> counts(nbins, 0.0);
  for (std::size_t m = 0; m < events.size(); ++m) {
    if (component >= 0 && events.components[m] != component) continue;
    const auto k = static_cast<std::size_t>(events.times[m] / h);
    if (k < nbins) counts[k] += 1.0;
  }
  return counts;
}

struct SeriesMoments {
  double mean = 0;
  double variance = 0;
  std::vector<double> covs;
};

SeriesMoments series_moments(const std::vector<double>& x,
                             const std::vector<int>& lags,
                             std::size_t skip_begin = 0,
                             std::size_t skip_end = 0) {
  SeriesMoments out;
  const std::size_t n = x.size();
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t k = skip_begin; k < n - skip_end; ++k) {
    sum += x[k];
    ++used;
  }
  out.mean = sum / static_cast<double>(used);
  double ss = 0;
  for (std::size_t k = skip_begin; k < n - skip_end; ++k) {
    ss += (x[k] - out.mean) * (x[k] - out.mean);
  }
  out.variance = ss / static_cast<double>(used - 1);
  for (int lag : lags) {
    double acc = 0;
    std::size_t cnt = 0;
    for (std::size_t k = skip_begin;
         k + static_cast<std::size_t>(lag) < n - skip_end; ++k) {
      acc += (x[k] - out.mean) * (x[k + static_cast<std::size_t>(lag)] - out.mean);
      ++cnt;
    }
    out.covs.push_back(acc / static_cast<double>(cnt));
  }
  return out;
}

// Closed-form chain for one 1D (or one mode of the bivariate) series:
// decay from the covariance ratio, amplitude from the first covariance, then
// the branching level from the amplitude/rate relation.
struct ModeFit {
  double a = 0;      // branching level of the mode
  double beta = 1;   // underlying beta
  bool degenerate = false;
};

ModeFit invert_mode(double atom_rate, double cov1, double cov2, double h,
                    int lag1, int lag2) {
  ModeFit fit;
  if (!(cov1 > 0) || !(cov2 > 0) || cov2 >= cov1) {
    fit.degenerate = true;
    return fit;
  }
  const double decay = std::log(cov1 / cov2) / (h * (lag2 - lag1));
  const double amp = cov1 / (std::exp(-decay * h * lag1) * (1.0 - std::exp(-decay * h)) *
                             (std::exp(decay * h) - 1.0) / (decay * decay));
  const double ratio = amp / (atom_rate * decay);
  const double a = invert_psi(ratio);
  if (!(a > 0) || !(a < 1)) {
    fit.degenerate = true;
    return fit;
  }
  fit.a = a;
  fit.beta = decay / (1.0 - a);
  return fit;
}

}  // namespace

MomentSummary moment_summary(const EventSequence& events, double bin_width,
                             const std::vector<int>& lags) {
  require_plain_events(events);
  if (!(bin_width > 0)) throw DataError("bin width must be positive");
  if (events.dim != 1 && events.dim != 2) {
    throw DataError(
        "moment fitting handles 1D or symmetric bivariate data only");
  }
  MomentSummary out;
  out.bin_width = bin_width;
  out.dim = events.dim;
  out.lags = lags;

  if (events.dim == 1) {
    const std::vector<double> counts = binned_counts(events, -1, bin_width);
    const SeriesMoments sm = series_moments(counts, lags);
    out.mean_rate = sm.mean / bin_width;
    out.variance = sm.variance;
    out.covariances = sm.covs;
  } else {
    const std::vector<double> n1 = binned_counts(events, 0, bin_width);
    const std::vector<double> n2 = binned_counts(events, 1, bin_width);
    std::vector<double> plus(n1.size()), minus(n1.size());
    for (std::size_t k = 0; k < n1.size(); ++k) {
      plus[k] = n1[k] + n2[k];
      minus[k] = n1[k] - n2[k];
    }
    const SeriesMoments sp = series_moments(plus, lags);
    const SeriesMoments sm = series_moments(minus, lags);
    out.mean_rate = 0.5 * sp.mean / bin_width;  // per component
    out.var_plus = sp.variance;
    out.var_minus = sm.variance;
    out.cov_plus = sp.covs;
    out.cov_minus = sm.covs;
  }
  return out;
}

EstimationResult fit_moments_from_summary(const MomentSummary& summary) {
  if (summary.lags.size() < 2) {
    throw DataError(
        "moment fitting needs at least two lag conditions to identify the "
        "kernel");
  }
  EstimationResult result;
  const double h = summary.bin_width;
  const int l1 = summary.lags[0], l2 = summary.lags[1];

  if (summary.dim == 1) {
    const double lam = summary.mean_rate;
    const ModeFit fit =
        invert_mode(lam, summary.covariances[0], summary.covariances[1], h,
                    l1, l2);
    HawkesModel fitted;
    fitted.mu = Eigen::VectorXd::Constant(1, lam);
    fitted.kernels = KernelMatrix(1);
    if (fit.degenerate) {
      result.warnings.push_back(
          "no usable positive autocovariance; returning a flat fit");
    } else {
      fitted.mu(0) = lam * (1.0 - fit.a);
      fitted.kernels(0, 0) = ExponentialKernel{fit.a, fit.beta};
    }
    result.model = fitted;
  } else {
    const double lam0 = summary.mean_rate;
    const ModeFit plus = invert_mode(2.0 * lam0, summary.cov_plus[0],
                                     summary.cov_plus[1], h, l1, l2);
    const ModeFit minus = invert_mode(2.0 * lam0, summary.cov_minus[0],
                                      summary.cov_minus[1], h, l1, l2);
    // The difference mode may be anticorrelated (a_- < 0); the closed-form
    // chain only sees positive-decay modes, so a degenerate minus mode is
    // treated as a_- = 0.
    const double a_plus = plus.degenerate ? 0.0 : plus.a;
    const double a_minus = minus.degenerate ? 0.0 : minus.a;
    const double a_self = 0.5 * (a_plus + a_minus);
    const double a_cross = 0.5 * (a_plus - a_minus);
    double beta = 0;
    int nbeta = 0;
    if (!plus.degenerate) {
      beta += plus.beta;
      ++nbeta;
    }
    if (!minus.degenerate) {
      beta += minus.beta;
      ++nbeta;
    }
    beta = nbeta > 0 ? beta / nbeta : 1.0;
    if (plus.degenerate && minus.degenerate) {
      result.warnings.push_back(
          "no usable positive autocovariance; returning a flat fit");
    }

    HawkesModel fitted;
    fitted.mu = Eigen::VectorXd::Constant(2, lam0 * (1.0 - a_plus));
    fitted.kernels = KernelMatrix(2);
    if (a_self > 1e-12) {
      fitted.kernels(0, 0) = ExponentialKernel{a_self, beta};
      fitted.kernels(1, 1) = ExponentialKernel{a_self, beta};
    }
    if (a_cross > 1e-12) {
      fitted.kernels(0, 1) = ExponentialKernel{a_cross, beta};
      fitted.kernels(1, 0) = ExponentialKernel{a_cross, beta};
    }
    result.model = fitted;
  }
  result.converged = true;
  result.iterations = 1;
  result.stability =
      stability_of_matrix(result.model.branching_matrix_abs());
  return result;
}

EstimationResult fit_moments(const EventSequence& events,
                             const MomentOptions& options) {
  const MomentSummary summary =
      moment_summary(events, options.bin_width, options.lags);
  EstimationResult result = fit_moments_from_summary(summary);

  // Jackknife over contiguous blocks of bins for parameter bands.
  const int nb = options.jackknife_blocks;
  if (nb >= 2) {
    const ParamLayout layout = build_layout(result.model, false);
    const Eigen::VectorXd center = extract_params(result.model, layout);
    std::vector<Eigen::VectorXd> reps;
    const double block = events.horizon / nb;
    for (int b = 0; b < nb; ++b) {
      EventSequence reduced;
      reduced.dim = events.dim;
      const double lo = b * block, hi = (b + 1) * block;
      for (std::size_t m = 0; m < events.size(); ++m) {
        const double t = events.times[m];
        if (t >= lo && t < hi) continue;
        // Shift the tail left so the record stays contiguous.
        reduced.times.push_back(t < lo ? t : t - block);
        reduced.components.push_back(events.components[m]);
      }
      reduced.horizon = events.horizon - block;
      try {
        const EstimationResult rep = fit_moments_from_summary(
            moment_summary(reduced, options.bin_width, options.lags));
        if (rep.model.dim() == result.model.dim() &&
            rep.warnings.empty() == result.warnings.empty()) {
          const Eigen::VectorXd params = extract_params(rep.model, layout);
          if (params.size() == center.size()) reps.push_back(params);
        }
      } catch (const DataError&) {
        // Degenerate replicate; skipped.
      }
    }
    if (reps.size() >= 2) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(center.size());
      for (const auto& r : reps) mean += r;
      mean /= static_cast<double>(reps.size());
      Eigen::VectorXd ss = Eigen::VectorXd::Zero(center.size());
      for (const auto& r : reps) {
        ss += (r - mean).cwiseProduct(r - mean);
      }
      const double factor =
          (static_cast<double>(reps.size()) - 1.0) /
          static_cast<double>(reps.size());
      result.standard_errors = (factor * ss).cwiseSqrt();
      result.parameter_names = layout.names;
    } else {
      result.warnings.push_back(
          "too few usable jackknife replicates for standard errors");
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// branching_ratio_estimate

BranchingRatioEstimate branching_ratio_estimate(const EventSequence& events,
                                                double window_length) {
  require_plain_events(events);
  if (events.dim != 1) {
    throw DataError("the variance-ratio estimator is one-dimensional");
  }
  if (!(window_length > 0)) throw DataError("window length must be positive");
  const int windows = static_cast<int>(events.horizon / window_length);
  if (windows < 2) {
    throw DataError("need at least two complete windows");
  }

  BranchingRatioEstimate out;
  out.windows = windows;
  if (windows < 50) {
    out.warnings.push_back(
        "fewer than 50 windows; the variance estimate is unstable");
  }

  std::vector<double> counts(static_cast<std::size_t>(windows), 0.0);
  for (double t : events.times) {
    const auto w = static_cast<std::size_t>(t / window_length);
    if (w < counts.size()) counts[w] += 1.0;
  }
  const auto ratio_estimate = [](const std::vector<double>& c,
                                 bool* degenerate) -> double {
    double mean = 0;
    for (double v : c) mean += v;
    mean /= static_cast<double>(c.size());
    double var = 0;
    for (double v : c) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c.size()) - 1.0;
    if (var <= 0) {
      if (degenerate) *degenerate = true;
      return 1.0;
    }
    if (mean <= 0) {
      if (degenerate) *degenerate = true;
      return 0.0;
    }
    return std::clamp(1.0 - std::sqrt(mean / var), 0.0, 1.0);
  };

  out.value = ratio_estimate(counts, &out.degenerate);

  // Correlated adjacent windows mean the window is shorter than the
  // correlation time; flag it.
  if (counts.size() > 10 && !out.degenerate) {
    double mean = 0;
    for (double v : counts) mean += v;
    mean /= static_cast<double>(counts.size());
    double num = 0, den = 0;
    for (std::size_t k = 0; k + 1 < counts.size(); ++k) {
      num += (counts[k] - mean) * (counts[k + 1] - mean);
    }
    for (double v : counts) den += (v - mean) * (v - mean);
    if (den > 0 && num / den > 0.2) {
      out.warnings.push_back(
          "adjacent window counts are correlated; the window is likely "
          "shorter than the correlation time");
    }
  }

  if (!out.degenerate && windows > 2) {
    // Leave-one-window-out jackknife.
    double acc = 0, acc2 = 0;
    int used = 0;
    for (int w = 0; w < windows; ++w) {
      std::vector<double> rest;
      rest.reserve(counts.size() - 1);
      for (int v = 0; v < windows; ++v) {
        if (v != w) rest.push_back(counts[static_cast<std::size_t>(v)]);
      }
      const double est = ratio_estimate(rest, nullptr);
      acc += est;
      acc2 += est * est;
      ++used;
    }
    const double mean = acc / used;
    const double var = std::max(acc2 / used - mean * mean, 0.0);
    out.standard_error =
        std::sqrt(var * (static_cast<double>(used) - 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// goodness_of_fit

GoodnessOfFit goodness_of_fit(const HawkesModel& model,
                              const EventSequence& events) {
  model.validate();
  require_plain_events(events);
  if (model.marked()) {
    throw DataError("marked likelihoods are not supported");
  }
  if (model.dim() != events.dim) {
    throw DataError("model dimension does not match the event stream");
  }
  const int d = model.dim();

  GoodnessOfFit out;
  out.residuals.assign(static_cast<std::size_t>(d), {});
  out.skipped.assign(static_cast<std::size_t>(d), false);

  // Compensator of each component at every event time of that component.
  std::vector<double> last_value(static_cast<std::size_t>(d), 0.0);

  if (model.transfer == Transfer::identity && exp_family_model(model)) {
    std::vector<ExpTerm> terms = collect_exp_terms(model);
    // Running integral: mu_i t + sum over terms alpha (count_src - s).
    std::vector<double> source_count(static_cast<std::size_t>(d), 0.0);
    double prev = 0;
    for (std::size_t k = 0; k < events.size(); ++k) {
      const double t = events.times[k];
      const int c = events.components[k];
      const double dt = t - prev;
      if (dt > 0) {
        for (ExpTerm& term : terms) term.s *= std::exp(-term.beta * dt);
        prev = t;
      }
      double compensator = model.mu(c) * t;
      for (const ExpTerm& term : terms) {
        if (term.target == c) {
          compensator +=
              term.alpha *
              (source_count[static_cast<std::size_t>(term.source)] - term.s);
        }
      }
      out.residuals[static_cast<std::size_t>(c)].push_back(
          compensator - last_value[static_cast<std::size_t>(c)]);
      last_value[static_cast<std::size_t>(c)] = compensator;
      for (ExpTerm& term : terms) {
        if (term.source == c) term.s += 1.0;
      }
      source_count[static_cast<std::size_t>(c)] += 1.0;
    }
  } else if (model.transfer == Transfer::identity) {
    // General kernels: accumulate integral_to increments with truncation.
    for (std::size_t k = 0; k < events.size(); ++k) {
      const double t = events.times[k];
      const int c = events.components[k];
      double compensator = model.mu(c) * t;
      for (std::size_t m = 0; m < k; ++m) {
        const Kernel& kern = model.kernels(c, events.components[m]);
        if (is_zero_kernel(kern)) continue;
        compensator += integral_to(kern, t - events.times[m]);
      }
      out.residuals[static_cast<std::size_t>(c)].push_back(
          compensator - last_value[static_cast<std::size_t>(c)]);
      last_value[static_cast<std::size_t>(c)] = compensator;
    }
  } else {
    // Positive-part transfer: numeric compensator between events.
    const std::vector<Eigen::VectorXd> comp =
        clamped_compensator(model, events, events.times);
    for (std::size_t k = 0; k < events.size(); ++k) {
      const int c = events.components[k];
      out.residuals[static_cast<std::size_t>(c)].push_back(
          comp[k](c) - last_value[static_cast<std::size_t>(c)]);
      last_value[static_cast<std::size_t>(c)] = comp[k](c);
    }
  }

  const auto exp_cdf = [](double v) { return -std::expm1(-v); };
  std::vector<double> pooled;
  out.per_component.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    auto& res = out.residuals[static_cast<std::size_t>(i)];
    if (res.empty()) {
      out.skipped[static_cast<std::size_t>(i)] = true;
      continue;
    }
    pooled.insert(pooled.end(), res.begin(), res.end());
    out.per_component[static_cast<std::size_t>(i)] =
        ks_test_one_sample(res, exp_cdf);
  }
  if (pooled.empty()) throw DataError("no residuals could be formed");
  out.pooled = ks_test_one_sample(pooled, exp_cdf);
  return out;
}

}  // namespace hawkes
