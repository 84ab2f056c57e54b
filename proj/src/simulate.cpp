#include "hawkes/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hawkes/common.hpp"
#include "hawkes/kernels.hpp"
#include "hawkes/rng.hpp"

namespace hawkes {

void SimConfig::validate() const {
  if (!std::isfinite(horizon) || horizon <= 0) {
    throw DataError("simulation horizon must be positive and finite");
  }
  if (!std::isfinite(burn_in) || burn_in < 0) {
    throw DataError("burn-in must be non-negative and finite");
  }
  if (max_events == 0) {
    throw DataError("event cap must be positive");
  }
  if (!(truncation_tail > 0) || truncation_tail > 0.1) {
    throw DataError("history truncation tail must lie in (0, 0.1]");
  }
}

namespace {

constexpr double kTinyRate = 1e-300;

[[noreturn]] void throw_explosion(const HawkesModel& model, std::size_t count) {
  std::string msg =
      "event cap exceeded after " + std::to_string(count) + " events";
  const StabilityReport rep = stability_of_matrix(model.branching_matrix_abs());
  if (!rep.stable) {
    msg += "; effective branching spectral radius " +
           std::to_string(rep.spectral_radius) +
           " >= 1, so the configuration is explosive";
  }
  throw NumericalError(msg);
}

double mark_boost(const HawkesModel& model, int i, int j, double xi) {
  if (!model.marked()) return 1.0;
  const MarkImpact& imp = model.impact(i, j);
  if (imp.exponent == 0.0) return imp.coeff;
  if (imp.exponent == 1.0) return imp.coeff * xi;
  return imp.coeff * std::pow(xi, imp.exponent);
}

bool exponential_family_entry(const Kernel& k) {
  return std::holds_alternative<ZeroKernel>(k) ||
         std::holds_alternative<ExponentialKernel>(k) ||
         std::holds_alternative<SumExponentialKernel>(k);
}

bool exponential_family_only(const HawkesModel& model) {
  const int d = model.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!exponential_family_entry(model.kernels(i, j))) return false;
    }
  }
  return true;
}

// One decaying exponential term of the intensity: contributes y to component
// `target`, decays at rate beta, and jumps by weight (times the mark boost)
// at every event of component `source`.
struct ExpState {
  int target = 0;
  int source = 0;
  double weight = 0;
  double beta = 0;
  double y = 0;
};

std::vector<ExpState> build_exp_states(const HawkesModel& model) {
  std::vector<ExpState> states;
  const int d = model.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Kernel& k = model.kernels(i, j);
      if (const auto* e = std::get_if<ExponentialKernel>(&k)) {
        states.push_back({i, j, e->alpha * e->beta, e->beta, 0.0});
      } else if (const auto* s = std::get_if<SumExponentialKernel>(&k)) {
        for (std::size_t m = 0; m < s->alphas.size(); ++m) {
          states.push_back({i, j, s->alphas[m] * s->betas[m], s->betas[m], 0.0});
        }
      }
    }
  }
  return states;
}

// Dominating kernel for the thinning bound: must be non-increasing and sit
// above the (positive part of the) kernel. Every closed-form family already
// qualifies; piecewise tables are replaced by the running maximum of their
// clamped levels from the right.
Kernel envelope_kernel(const Kernel& k) {
  if (const auto* pc = std::get_if<PiecewiseConstantKernel>(&k)) {
    PiecewiseConstantKernel env = *pc;
    double running = 0;
    for (std::size_t idx = env.levels.size(); idx-- > 0;) {
      running = std::max(running, std::max(env.levels[idx], 0.0));
      env.levels[idx] = running;
    }
    return env;
  }
  return k;
}

// Per-source event history for the general thinning path. `head` advances as
// events age beyond the truncation window, so scans only touch live events.
struct SourceHistory {
  std::vector<double> times;
  std::vector<double> boosts;  // [event * D + target], marked models only
  std::size_t head = 0;
  double support = std::numeric_limits<double>::infinity();
};

EventSequence thinning_core(const HawkesModel& model, const SimConfig& cfg,
                            double total_horizon) {
  const int d = model.dim();
  Rng rng(cfg.seed);
  EventSequence out;
  out.dim = d;
  out.horizon = total_horizon;

  const double mu_total = model.mu.sum();
  std::vector<double> lam(static_cast<std::size_t>(d), 0.0);

  const bool fast = model.transfer == Transfer::identity &&
                    exponential_family_only(model);

  // Fast path state (exponential families): everything needed to evaluate
  // the intensity is carried by the decaying terms.
  std::vector<ExpState> states = fast ? build_exp_states(model)
                                      : std::vector<ExpState>{};

  // General path state: envelopes and truncated per-source histories.
  std::vector<Kernel> envelopes;
  std::vector<SourceHistory> history;
  bool needs_envelope = false;
  if (!fast) {
    envelopes.reserve(static_cast<std::size_t>(d) * d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        envelopes.push_back(envelope_kernel(model.kernels(i, j)));
        if (std::holds_alternative<PiecewiseConstantKernel>(
                model.kernels(i, j))) {
          needs_envelope = true;
        }
      }
    }
    needs_envelope = needs_envelope || model.transfer == Transfer::positive_part;
    history.resize(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      double support = 0;
      for (int i = 0; i < d; ++i) {
        if (is_zero_kernel(model.kernels(i, j))) continue;
        support = std::max(
            support, effective_support(model.kernels(i, j), cfg.truncation_tail));
      }
      history[j].support = support;
    }
  }

  const auto intensity_at = [&](double t) {
    double total = 0;
    if (fast) {
      for (int i = 0; i < d; ++i) lam[i] = model.mu(i);
      for (const ExpState& s : states) lam[s.target] += s.y;
    } else {
      for (int j = 0; j < d; ++j) {
        SourceHistory& h = history[j];
        while (h.head < h.times.size() && t - h.times[h.head] > h.support) {
          ++h.head;
        }
      }
      for (int i = 0; i < d; ++i) {
        double raw = model.mu(i);
        for (int j = 0; j < d; ++j) {
          const Kernel& k = model.kernels(i, j);
          if (is_zero_kernel(k)) continue;
          const SourceHistory& h = history[j];
          for (std::size_t m = h.head; m < h.times.size(); ++m) {
            const double value = eval_kernel(k, t - h.times[m]);
            raw += out.marked() ? value * h.boosts[m * d + i] : value;
          }
        }
        lam[i] = model.transfer == Transfer::positive_part ? std::max(raw, 0.0)
                                                           : raw;
      }
    }
    for (int i = 0; i < d; ++i) total += lam[i];
    return total;
  };

  // Upper bound for the intensity on the interval ahead of t: positive parts
  // only, each entry replaced by its non-increasing envelope.
  const auto envelope_total_at = [&](double t) {
    double total = mu_total;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        const Kernel& env = envelopes[static_cast<std::size_t>(i) * d + j];
        if (is_zero_kernel(env)) continue;
        const SourceHistory& h = history[j];
        for (std::size_t m = h.head; m < h.times.size(); ++m) {
          const double value = eval_kernel(env, t - h.times[m]);
          total += out.marked() ? value * h.boosts[m * d + i] : value;
        }
      }
    }
    return total;
  };

  if (model.marked()) out.marks.reserve(1024);

  double t = 0;
  double bound = mu_total;
  while (bound > kTinyRate) {
    const double dt = rng.exponential(bound);
    const double tc = t + dt;
    if (!(tc < total_horizon)) break;

    if (fast) {
      for (ExpState& s : states) s.y *= std::exp(-s.beta * (tc - t));
    }
    const double lam_total = intensity_at(tc);
    const double w = rng.uniform() * bound;
    t = tc;

    if (w <= lam_total) {
      int comp = d - 1;
      double acc = 0;
      for (int i = 0; i < d; ++i) {
        acc += lam[i];
        if (w <= acc) {
          comp = i;
          break;
        }
      }
      double xi = 1.0;
      if (model.marked()) {
        xi = model.mark_laws[static_cast<std::size_t>(comp)].sample(rng);
        out.marks.push_back(xi);
      }
      out.times.push_back(tc);
      out.components.push_back(comp);
      if (out.size() > cfg.max_events) throw_explosion(model, out.size());

      if (fast) {
        for (ExpState& s : states) {
          if (s.source == comp) {
            s.y += s.weight * mark_boost(model, s.target, comp, xi);
          }
        }
        bound = intensity_at(tc);
      } else {
        SourceHistory& h = history[static_cast<std::size_t>(comp)];
        h.times.push_back(tc);
        if (model.marked()) {
          for (int i = 0; i < d; ++i) {
            h.boosts.push_back(mark_boost(model, i, comp, xi));
          }
        }
        bound = envelope_total_at(tc);
      }
    } else {
      // Rejected candidate: tighten the bound at the current clock.
      bound = (fast || !needs_envelope) ? lam_total : envelope_total_at(tc);
    }
  }
  return out;
}

EventSequence time_change_core(const HawkesModel& model, const SimConfig& cfg,
                               double total_horizon) {
  const int d = model.dim();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!exponential_family_entry(model.kernels(i, j))) {
        throw DataError(
            "time-change sampling supports exponential and "
            "sum-of-exponentials kernels only");
      }
    }
  }
  if (model.transfer != Transfer::identity) {
    throw DataError("time-change sampling requires the identity transfer");
  }

  Rng rng(cfg.seed);
  EventSequence out;
  out.dim = d;
  out.horizon = total_horizon;

  std::vector<ExpState> states = build_exp_states(model);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  double t = 0;
  for (;;) {
    // The intensity splits into a constant baseline plus one decaying term
    // per state; each piece is an independent inhomogeneous Poisson stream
    // whose first arrival has a closed-form inverse compensator. The earliest
    // candidate wins, and every piece is redrawn after each event.
    double best_dt = kInf;
    int best_comp = -1;
    for (int i = 0; i < d; ++i) {
      if (model.mu(i) <= 0) continue;
      const double dt = rng.exponential(model.mu(i));
      if (dt < best_dt) {
        best_dt = dt;
        best_comp = i;
      }
    }
    for (const ExpState& s : states) {
      if (s.y <= kTinyRate) continue;
      // Total remaining mass y/beta is finite, so the piece may never fire.
      const double shift = 1.0 + s.beta * std::log(rng.uniform()) / s.y;
      if (shift <= 0) continue;
      const double dt = -std::log(shift) / s.beta;
      if (dt < best_dt) {
        best_dt = dt;
        best_comp = s.target;
      }
    }
    if (best_comp < 0) break;
    const double tc = t + best_dt;
    if (!(tc < total_horizon)) break;

    for (ExpState& s : states) s.y *= std::exp(-s.beta * best_dt);
    double xi = 1.0;
    if (model.marked()) {
      xi = model.mark_laws[static_cast<std::size_t>(best_comp)].sample(rng);
      out.marks.push_back(xi);
    }
    out.times.push_back(tc);
    out.components.push_back(best_comp);
    if (out.size() > cfg.max_events) throw_explosion(model, out.size());
    for (ExpState& s : states) {
      if (s.source == best_comp) {
        s.y += s.weight * mark_boost(model, s.target, best_comp, xi);
      }
    }
    t = tc;
  }
  return out;
}

// Draws an offspring delay on [0, limit] with density proportional to the
// kernel, by inverting the truncated CDF in closed form.
double sample_kernel_delay(const Kernel& kernel, double limit, Rng& rng) {
  const double v = rng.uniform();
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, ExponentialKernel>) {
          const double mass = -std::expm1(-k.beta * limit);
          return -std::log1p(-v * mass) / k.beta;
        } else if constexpr (std::is_same_v<T, SumExponentialKernel>) {
          const std::size_t n = k.alphas.size();
          double total = 0;
          for (std::size_t m = 0; m < n; ++m) {
            total += k.alphas[m] * -std::expm1(-k.betas[m] * limit);
          }
          double pick = rng.uniform() * total;
          std::size_t term = n - 1;
          for (std::size_t m = 0; m < n; ++m) {
            pick -= k.alphas[m] * -std::expm1(-k.betas[m] * limit);
            if (pick <= 0) {
              term = m;
              break;
            }
          }
          const double mass = -std::expm1(-k.betas[term] * limit);
          return -std::log1p(-v * mass) / k.betas[term];
        } else if constexpr (std::is_same_v<T, PowerLawKernel>) {
          // CDF 1 - (1 + beta u)^(-gamma), truncated at the limit.
          const double mass = -std::expm1(-k.gamma * std::log1p(k.beta * limit));
          const double expo = -std::log1p(-v * mass) / k.gamma;
          return std::expm1(expo) / k.beta;
        } else if constexpr (std::is_same_v<T, PiecewiseConstantKernel>) {
          const std::size_t n = k.levels.size();
          double total = 0;
          for (std::size_t m = 0; m < n && k.edges[m] < limit; ++m) {
            total += k.levels[m] * (std::min(k.edges[m + 1], limit) - k.edges[m]);
          }
          double pick = v * total;
          for (std::size_t m = 0; m < n && k.edges[m] < limit; ++m) {
            const double width = std::min(k.edges[m + 1], limit) - k.edges[m];
            const double area = k.levels[m] * width;
            if (pick <= area && k.levels[m] > 0) {
              return k.edges[m] + pick / k.levels[m];
            }
            pick -= area;
          }
          return std::min(k.edges[n], limit);  // float fallthrough
        } else {
          return limit;  // zero kernel: never reached, mass is 0
        }
      },
      kernel);
}

struct ClusterNode {
  double t = 0;
  int comp = 0;
  double mark = 1.0;
  std::int64_t parent = -1;
  int gen = 0;
};

std::pair<EventSequence, Genealogy> cluster_core(const HawkesModel& model,
                                                 const SimConfig& cfg,
                                                 double total_horizon) {
  const int d = model.dim();
  if (model.transfer != Transfer::identity) {
    throw DataError("cluster sampling requires the identity transfer");
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!is_nonnegative_kernel(model.kernels(i, j))) {
        throw DataError("cluster sampling requires non-negative kernels");
      }
    }
  }
  const StabilityReport rep = stability_of_matrix(model.branching_matrix_abs());
  if (!(rep.spectral_radius < 1.0)) {
    throw StabilityError(
        "cluster sampling needs a subcritical model; branching spectral "
        "radius is " + std::to_string(rep.spectral_radius),
        rep.spectral_radius);
  }

  Rng rng(cfg.seed);
  std::vector<ClusterNode> nodes;

  // Immigrant layer: one homogeneous Poisson stream per component.
  for (int j = 0; j < d; ++j) {
    if (model.mu(j) <= 0) continue;
    double t = rng.exponential(model.mu(j));
    while (t < total_horizon) {
      ClusterNode node;
      node.t = t;
      node.comp = j;
      if (model.marked()) {
        node.mark = model.mark_laws[static_cast<std::size_t>(j)].sample(rng);
      }
      nodes.push_back(node);
      if (nodes.size() > cfg.max_events) throw_explosion(model, nodes.size());
      t += rng.exponential(model.mu(j));
    }
  }

  // Breadth-first offspring generation. Children beyond the horizon are
  // never needed (Poisson streams restricted to [0, T] stay exact), so each
  // brood is drawn from the kernel truncated at the remaining span.
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    const ClusterNode parent = nodes[q];
    const double span = total_horizon - parent.t;
    for (int i = 0; i < d; ++i) {
      const Kernel& k = model.kernels(i, parent.comp);
      if (is_zero_kernel(k)) continue;
      const double mean = integral_to(k, span) *
                          mark_boost(model, i, parent.comp, parent.mark);
      const std::uint64_t brood = rng.poisson(mean);
      for (std::uint64_t c = 0; c < brood; ++c) {
        ClusterNode child;
        child.t = parent.t + sample_kernel_delay(k, span, rng);
        child.comp = i;
        child.parent = static_cast<std::int64_t>(q);
        child.gen = parent.gen + 1;
        if (model.marked()) {
          child.mark = model.mark_laws[static_cast<std::size_t>(i)].sample(rng);
        }
        nodes.push_back(child);
        if (nodes.size() > cfg.max_events) throw_explosion(model, nodes.size());
      }
    }
  }

  // Merge into time order and remap parent indices through the permutation.
  std::vector<std::size_t> order(nodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (nodes[a].t != nodes[b].t) return nodes[a].t < nodes[b].t;
                     return nodes[a].comp < nodes[b].comp;
                   });
  std::vector<std::int64_t> position(nodes.size());
  for (std::size_t p = 0; p < order.size(); ++p) {
    position[order[p]] = static_cast<std::int64_t>(p);
  }

  EventSequence out;
  out.dim = d;
  out.horizon = total_horizon;
  out.times.reserve(nodes.size());
  out.components.reserve(nodes.size());
  if (model.marked()) out.marks.reserve(nodes.size());
  Genealogy gen;
  gen.parent.reserve(nodes.size());
  gen.generation.reserve(nodes.size());
  for (std::size_t p = 0; p < order.size(); ++p) {
    const ClusterNode& node = nodes[order[p]];
    out.times.push_back(node.t);
    out.components.push_back(node.comp);
    if (model.marked()) out.marks.push_back(node.mark);
    gen.parent.push_back(node.parent < 0 ? -1 : position[node.parent]);
    gen.generation.push_back(node.gen);
  }
  return {std::move(out), std::move(gen)};
}

// Drops the warm-up window and rebases the clock so the retained piece starts
// at 0 with horizon cfg.horizon.
EventSequence crop_burn_in(EventSequence&& seq, const SimConfig& cfg) {
  if (cfg.burn_in == 0) {
    seq.horizon = cfg.horizon;
    return std::move(seq);
  }
  EventSequence out;
  out.dim = seq.dim;
  out.horizon = cfg.horizon;
  const auto first = std::lower_bound(seq.times.begin(), seq.times.end(),
                                      cfg.burn_in);
  const std::size_t start =
      static_cast<std::size_t>(first - seq.times.begin());
  out.times.reserve(seq.size() - start);
  out.components.reserve(seq.size() - start);
  if (seq.marked()) out.marks.reserve(seq.size() - start);
  for (std::size_t m = start; m < seq.size(); ++m) {
    out.times.push_back(seq.times[m] - cfg.burn_in);
    out.components.push_back(seq.components[m]);
    if (seq.marked()) out.marks.push_back(seq.marks[m]);
  }
  return out;
}

}  // namespace

EventSequence simulate_thinning(const HawkesModel& model, const SimConfig& cfg) {
  model.validate();
  cfg.validate();
  return crop_burn_in(thinning_core(model, cfg, cfg.burn_in + cfg.horizon), cfg);
}

EventSequence simulate_time_change(const HawkesModel& model,
                                   const SimConfig& cfg) {
  model.validate();
  cfg.validate();
  return crop_burn_in(time_change_core(model, cfg, cfg.burn_in + cfg.horizon),
                      cfg);
}

std::pair<EventSequence, Genealogy> simulate_cluster(const HawkesModel& model,
                                                     const SimConfig& cfg) {
  model.validate();
  cfg.validate();
  if (cfg.burn_in != 0) {
    throw DataError(
        "cluster sampling with genealogy does not support burn-in: cropping "
        "would orphan retained children; use simulate() when only the event "
        "stream is needed");
  }
  return cluster_core(model, cfg, cfg.horizon);
}

EventSequence simulate_marked(const HawkesModel& model, const SimConfig& cfg) {
  if (!model.marked()) {
    throw DataError("simulate_marked needs a model with mark laws");
  }
  return simulate_thinning(model, cfg);
}

EventSequence simulate(const HawkesModel& model, const SimConfig& cfg) {
  switch (cfg.algorithm) {
    case SimAlgorithm::thinning:
      return simulate_thinning(model, cfg);
    case SimAlgorithm::time_change:
      return simulate_time_change(model, cfg);
    case SimAlgorithm::cluster: {
      model.validate();
      cfg.validate();
      EventSequence seq =
          cluster_core(model, cfg, cfg.burn_in + cfg.horizon).first;
      return crop_burn_in(std::move(seq), cfg);
    }
  }
  throw UsageError("unknown simulation algorithm");
}

}  // namespace hawkes
