#include "iontrap/voltage_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/log.hpp"

namespace iontrap {

using Eigen::VectorXd;

TrapSiteModel::TrapSiteModel(const TrapLayout& layout, const Species& sp,
                             std::vector<Eigen::Vector3d> site_guesses, int axis,
                             std::vector<std::string> knob_ids,
                             std::vector<double> baseline)
    : layout_(&layout), species_(sp), seeds_(std::move(site_guesses)),
      axis_(axis), baseline_(std::move(baseline)) {
  if (axis_ < 0 || axis_ > 2) throw ConfigError("axis must be 0, 1 or 2");
  const auto ids = layout.dc_electrode_ids();
  if (baseline_.empty()) baseline_.assign(ids.size(), 0.0);
  if (baseline_.size() != ids.size())
    throw ConfigError("baseline length does not match DC electrode count");
  for (const auto& id : knob_ids) {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end())
      throw ConfigError("unknown DC electrode id '" + id + "'");
    knobs_.push_back(static_cast<int>(it - ids.begin()));
  }
}

std::vector<double> TrapSiteModel::full_dc(const VectorXd& volts) const {
  if (volts.size() != static_cast<int>(knobs_.size()))
    throw ConfigError("voltage vector length does not match knob count");
  std::vector<double> dc = baseline_;
  for (size_t k = 0; k < knobs_.size(); ++k) dc[knobs_[k]] = volts[k];
  return dc;
}

VectorXd TrapSiteModel::site_frequencies(const VectorXd& volts) {
  const TrapField field(*layout_, species_, full_dc(volts));
  VectorXd omega(seeds_.size());
  for (size_t s = 0; s < seeds_.size(); ++s) {
    try {
      const Eigen::Vector3d minimum = find_minimum(field, seeds_[s]);
      seeds_[s] = minimum;
      const SecularTriple triple = secular_frequencies(field, minimum, species_);
      // Principal axes stay near the global frame; pick by axis alignment.
      int best = 0;
      double best_align = -1.0;
      for (int k = 0; k < 3; ++k) {
        const double align = std::abs(triple.axes(axis_, k));
        if (align > best_align) {
          best_align = align;
          best = k;
        }
      }
      omega[s] = triple.omega[best];
    } catch (const SearchError& e) {
      throw InfeasibleVoltageError(static_cast<int>(s),
                                   "site " + std::to_string(s) +
                                       " lost its minimum: " + e.what());
    } catch (const NotATrapError& e) {
      throw InfeasibleVoltageError(static_cast<int>(s),
                                   "site " + std::to_string(s) +
                                       " is not confining: " + e.what());
    }
  }
  return omega;
}

std::vector<SecularTriple> TrapSiteModel::site_triples(const VectorXd& volts) {
  const TrapField field(*layout_, species_, full_dc(volts));
  std::vector<SecularTriple> triples;
  for (size_t s = 0; s < seeds_.size(); ++s) {
    const Eigen::Vector3d minimum = find_minimum(field, seeds_[s]);
    seeds_[s] = minimum;
    triples.push_back(secular_frequencies(field, minimum, species_));
  }
  return triples;
}

std::unique_ptr<SiteFrequencyModel> TrapSiteModel::clone() const {
  return std::make_unique<TrapSiteModel>(*this);
}

std::optional<double> TrapSiteModel::min_trap_depth_mev(const VectorXd& volts) {
  const TrapField field(*layout_, species_, full_dc(volts));
  double depth = 1e300;
  for (size_t s = 0; s < seeds_.size(); ++s) {
    const Eigen::Vector3d minimum = find_minimum(field, seeds_[s]);
    depth = std::min(depth, trap_depth(field, minimum, species_).depth_mev);
  }
  return depth;
}

VoltageBounds VoltageBounds::uniform(int n, double lo, double hi) {
  VoltageBounds b;
  b.lo = VectorXd::Constant(n, lo);
  b.hi = VectorXd::Constant(n, hi);
  return b;
}

VoltageBounds default_bounds(const TrapLayout& layout,
                             const std::vector<std::string>& knob_ids) {
  VoltageBounds b;
  const int n = static_cast<int>(knob_ids.size());
  b.lo = VectorXd::Zero(n);
  b.hi = VectorXd::Zero(n);
  for (int k = 0; k < n; ++k) {
    const int idx = layout.index_of(knob_ids[k]);
    if (idx < 0) throw ConfigError("unknown electrode id '" + knob_ids[k] + "'");
    const ElectrodeRole role = layout.electrodes()[idx].role;
    b.lo[k] = 0.0;
    b.hi[k] = role == ElectrodeRole::DcCentral ? 6.0 : 12.0;
  }
  return b;
}

double loss(SiteFrequencyModel& model, const VectorXd& volts,
            const VectorXd& targets, const VectorXd& weights) {
  const VectorXd omega = model.site_frequencies(volts);
  if (omega.size() != targets.size() || omega.size() != weights.size())
    throw ConfigError("targets/weights length does not match site count");
  return (weights.array() * (omega - targets).array().square()).sum();
}

VectorXd loss_gradient(SiteFrequencyModel& model, const VectorXd& volts,
                       const VectorXd& targets, const VectorXd& weights,
                       double step, int threads) {
  const int n = static_cast<int>(volts.size());
  VectorXd g(n);

  auto probe_pair = [&](SiteFrequencyModel& m, int k) {
    VectorXd vp = volts, vm = volts;
    vp[k] += step;
    vm[k] -= step;
    bool plus_ok = true, minus_ok = true;
    double lp = 0.0, lm = 0.0;
    try {
      lp = loss(m, vp, targets, weights);
    } catch (const InfeasibleVoltageError&) {
      plus_ok = false;
    }
    try {
      lm = loss(m, vm, targets, weights);
    } catch (const InfeasibleVoltageError&) {
      minus_ok = false;
    }
    if (plus_ok && minus_ok) return (lp - lm) / (2.0 * step);
    const double l0 = loss(m, volts, targets, weights);
    if (plus_ok) {
      log::warn("electrode %d: one-sided gradient (minus probe infeasible)", k);
      return (lp - l0) / step;
    }
    if (minus_ok) {
      log::warn("electrode %d: one-sided gradient (plus probe infeasible)", k);
      return (l0 - lm) / step;
    }
    throw InfeasibleVoltageError(-1, "both probes infeasible for electrode " +
                                         std::to_string(k));
  };

  if (threads <= 1 || n == 1) {
    for (int k = 0; k < n; ++k) g[k] = probe_pair(model, k);
    return g;
  }

  const int workers = std::min(threads, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        auto local = model.clone();
        for (int k = w; k < n; k += workers) g[k] = probe_pair(*local, k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return g;
}

AdamState AdamState::init(int n, double lr) {
  AdamState s;
  s.m = VectorXd::Zero(n);
  s.v = VectorXd::Zero(n);
  s.lr = lr;
  return s;
}

void adam_step(AdamState& state, const VectorXd& gradient, VectorXd& volts,
               const VoltageBounds& bounds) {
  if (gradient.size() != volts.size() || state.m.size() != volts.size())
    throw ConfigError("adam state dimensions do not match");
  state.step += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * gradient;
  state.v =
      state.beta2 * state.v.array().matrix() +
      (1.0 - state.beta2) * gradient.array().square().matrix();
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  const VectorXd mhat = state.m / c1;
  const VectorXd vhat = state.v / c2;
  volts -= state.lr *
           (mhat.array() / (vhat.array().sqrt() + state.eps)).matrix();
  volts = volts.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
}

OptimizeResult optimize(SiteFrequencyModel& model, const VectorXd& targets,
                        const VectorXd& weights, const VectorXd& initial_volts,
                        const VoltageBounds& bounds, const OptimizerConfig& cfg) {
  OptimizeResult out;
  VectorXd volts = initial_volts.cwiseMax(bounds.lo).cwiseMin(bounds.hi);
  AdamState adam = AdamState::init(static_cast<int>(volts.size()), cfg.lr);

  auto max_error_hz = [&](const VectorXd& omega) {
    return ((omega - targets).cwiseAbs() / (2.0 * constants::kPi)).maxCoeff();
  };
  auto penalized_loss = [&](const VectorXd& v) {
    double l = loss(model, v, targets, weights);
    if (cfg.depth_penalty_weight > 0.0) {
      const auto depth = model.min_trap_depth_mev(v);
      if (depth && *depth < cfg.depth_floor_mev) {
        const double d = cfg.depth_floor_mev - *depth;
        l += cfg.depth_penalty_weight * d * d;
      }
    }
    return l;
  };

  VectorXd omega = model.site_frequencies(volts);
  double best_loss = (weights.array() * (omega - targets).array().square()).sum();
  VectorXd best_volts = volts;
  VectorXd best_omega = omega;
  double err = max_error_hz(omega);
  out.history.push_back({best_loss, err, volts, omega});

  if (err < cfg.tolerance_hz) {
    out.converged = true;
  } else {
    int plateau = 0;
    double plateau_ref = best_loss;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
      VectorXd g;
      try {
        g = loss_gradient(model, volts, targets, weights, cfg.gradient_step,
                          cfg.threads);
      } catch (const InfeasibleVoltageError&) {
        out.stalled = true;
        break;
      }
      adam.lr = std::max(adam.lr, cfg.lr_min);
      adam_step(adam, g, volts, bounds);

      double l;
      try {
        l = penalized_loss(volts);
      } catch (const InfeasibleVoltageError&) {
        volts = best_volts; // back off to the best feasible point
        adam.lr *= cfg.lr_decay;
        continue;
      }
      omega = model.site_frequencies(volts);
      err = max_error_hz(omega);
      out.history.push_back({l, err, volts, omega});
      if (l < best_loss) {
        best_loss = l;
        best_volts = volts;
        best_omega = omega;
      }
      if (err < cfg.tolerance_hz) {
        out.converged = true;
        best_volts = volts;
        best_omega = omega;
        break;
      }

      if (l > plateau_ref * (1.0 - 1e-4)) {
        if (++plateau >= cfg.plateau_patience) {
          adam.lr = std::max(adam.lr * cfg.lr_decay, cfg.lr_min);
          plateau = 0;
          plateau_ref = best_loss;
        }
      } else {
        plateau = 0;
        plateau_ref = l;
      }

      if (cfg.progress) cfg.progress(iter, l, err);

      const int w = cfg.stall_window;
      if (static_cast<int>(out.history.size()) > w) {
        const double then = out.history[out.history.size() - 1 - w].loss;
        const double now = out.history.back().loss;
        if (then - now < cfg.stall_rel * std::max(then, 1e-300) &&
            adam.lr <= cfg.lr_min * 1.0001) {
          out.stalled = true;
          break;
        }
      }
      log::debug("iter %d, loss %.6e, max_site_error_hz %.3f, lr %.2e", iter, l,
                 err, adam.lr);
    }
  }

  out.volts = best_volts;
  out.site_omega = best_omega;
  out.bounds_ok = ((best_volts.array() >= bounds.lo.array() - 1e-12) &&
                   (best_volts.array() <= bounds.hi.array() + 1e-12))
                      .all();
  out.min_depth_mev = model.min_trap_depth_mev(best_volts);
  if (out.min_depth_mev) out.depth_ok = *out.min_depth_mev >= cfg.depth_floor_mev;
  if (!out.converged && !out.stalled) out.stalled = true;
  return out;
}

SensitivityTable sensitivity_report(const TrapLayout& layout, const Species& sp,
                                    const std::vector<Eigen::Vector3d>& site_guesses,
                                    double probe_voltage) {
  SensitivityTable table;
  table.probe_voltage = probe_voltage;
  table.electrode_ids = layout.dc_electrode_ids();
  const size_t n_dc = table.electrode_ids.size();
  const size_t n_sites = site_guesses.size();

  std::vector<double> grounded(n_dc, 0.0);
  const TrapField base_field(layout, sp, grounded);
  std::vector<SecularTriple> base(n_sites);
  for (size_t s = 0; s < n_sites; ++s) {
    const auto minimum = find_minimum(base_field, site_guesses[s]);
    base[s] = secular_frequencies(base_field, minimum, sp);
  }

  table.entries.assign(n_dc, std::vector<SensitivityEntry>(n_sites));
  for (size_t e = 0; e < n_dc; ++e) {
    std::vector<double> dc(n_dc, 0.0);
    dc[e] = probe_voltage;
    const TrapField field(layout, sp, dc);
    for (size_t s = 0; s < n_sites; ++s) {
      SensitivityEntry& entry = table.entries[e][s];
      try {
        const auto minimum = find_minimum(field, base[s].minimum);
        const auto triple = secular_frequencies(field, minimum, sp);
        entry.percent = 100.0 *
                        (triple.omega - base[s].omega).cwiseQuotient(base[s].omega);
      } catch (const std::runtime_error&) {
        entry.feasible = false;
      }
    }
  }
  return table;
}

} // namespace iontrap
