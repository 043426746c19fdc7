#include "iontrap/gate_engine.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "iontrap/errors.hpp"
#include "iontrap/log.hpp"

namespace iontrap {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using std::complex;

namespace {

const complex<double> kI(0.0, 1.0);

// (e^z - 1)/z with a series branch for small arguments.
complex<double> phi1(complex<double> z) {
  if (std::abs(z) < 1e-4) {
    return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0)));
  }
  return (std::exp(z) - 1.0) / z;
}

// int_0^B e^{i kappa u} du
complex<double> e0(double kappa, double b) {
  return b * phi1(kI * kappa * b);
}

// int_a^b e^{i kappa t} dt
complex<double> interval_e(double kappa, double a, double b) {
  return std::exp(kI * kappa * a) * e0(kappa, b - a);
}

// Moment integrals M_k = int_0^B u^k e^{i p u} du, k = 0..4.
std::array<complex<double>, 5> moments(double p, double b) {
  std::array<complex<double>, 5> m;
  if (std::abs(p) * b < 0.5) {
    for (int k = 0; k <= 4; ++k) {
      complex<double> sum = 0.0;
      complex<double> term = std::pow(b, k + 1);
      for (int j = 0; j <= 24; ++j) {
        sum += term / double(k + j + 1);
        term *= kI * p * b / double(j + 1);
      }
      m[k] = sum;
    }
    return m;
  }
  const complex<double> eipb = std::exp(kI * p * b);
  m[0] = e0(p, b);
  double bk = 1.0;
  for (int k = 1; k <= 4; ++k) {
    bk *= b;
    m[k] = (bk * eipb - double(k) * m[k - 1]) / (kI * p);
  }
  return m;
}

// W = int_0^B e^{i p u} int_0^u e^{i q s} ds du
complex<double> nested_w(double p, double q, double b) {
  if (std::abs(q) * b < 1e-5) {
    const auto m = moments(p, b);
    const complex<double> iq = kI * q;
    return m[1] + iq * (m[2] / 2.0 + iq * (m[3] / 6.0 + iq * m[4] / 24.0));
  }
  return (e0(p + q, b) - e0(p, b)) / (kI * q);
}

// T = int_a^b e^{i p t2} int_a^{t2} e^{i q t1} dt1 dt2
complex<double> triangle_t(double p, double q, double a, double b) {
  return std::exp(kI * (p + q) * a) * nested_w(p, q, b - a);
}

} // namespace

double GateConfig::effective_wavevector() const {
  const double scale =
      wavevector_scale > 0.0 ? wavevector_scale : 2.0 * std::cos(beam_angle);
  return scale * 2.0 * constants::kPi / wavelength;
}

MatrixXd lamb_dicke(const ModeSpectrum& spectrum, const std::vector<Species>& ions,
                    const GateConfig& cfg) {
  const int n_ions = static_cast<int>(spectrum.b.rows());
  const int n_modes = static_cast<int>(spectrum.b.cols());
  if (static_cast<int>(ions.size()) != n_ions)
    throw ConfigError("species list does not match spectrum rows");
  const double dk = cfg.effective_wavevector();
  MatrixXd eta(n_ions, n_modes);
  for (int m = 0; m < n_modes; ++m) {
    if (!(spectrum.omega[m] > 0.0))
      throw ConfigError("Lamb-Dicke factors need positive mode frequencies");
    for (int i = 0; i < n_ions; ++i) {
      eta(i, m) = dk * spectrum.b(i, m) *
                  std::sqrt(constants::kHbar /
                            (2.0 * ions[i].mass * spectrum.omega[m]));
    }
  }
  const double worst = eta.cwiseAbs().maxCoeff();
  if (worst > 0.3)
    log::warn("Lamb-Dicke parameter %.3f exceeds 0.3; expansion marginal", worst);
  return eta;
}

complex<double> sin_exp_integral(double mu, double nu, double a, double b) {
  return (interval_e(nu + mu, a, b) - interval_e(nu - mu, a, b)) / (2.0 * kI);
}

double sine_triangle_integral(double mu, double omega, double a, double b) {
  complex<double> sum = 0.0;
  for (int s2 = -1; s2 <= 1; s2 += 2)
    for (int s1 = -1; s1 <= 1; s1 += 2)
      for (int sw = -1; sw <= 1; sw += 2) {
        const double p = s2 * mu + sw * omega;
        const double q = s1 * mu - sw * omega;
        sum += double(s2 * s1 * sw) * triangle_t(p, q, a, b);
      }
  return (kI / 8.0 * sum).real();
}

double DriftModel::gamma_rad_s2() const {
  const double per_second = rate_per_min / 60.0;
  return angular ? per_second : 2.0 * constants::kPi * per_second;
}

MatrixXd apply_drift(const VectorXd& omega_m, const DriftModel& drift,
                     int n_segments, double t_p) {
  const double gamma = drift.gamma_rad_s2();
  MatrixXd out(omega_m.size(), n_segments);
  for (int s = 0; s < n_segments; ++s) {
    const double t_mid = (s + 0.5) * t_p;
    for (int m = 0; m < omega_m.size(); ++m)
      out(m, s) = omega_m[m] + gamma * t_mid;
  }
  return out;
}

VectorXcd alpha_per_mode(const VectorXd& omega_s, double mu, double t_p,
                         const MatrixXd& omega_intervals) {
  const int n_seg = static_cast<int>(omega_s.size());
  if (omega_intervals.cols() != n_seg)
    throw ConfigError("interval frequencies do not match segment count");
  VectorXcd a = VectorXcd::Zero(omega_intervals.rows());
  for (int m = 0; m < a.size(); ++m)
    for (int s = 0; s < n_seg; ++s)
      a[m] += omega_s[s] *
              sin_exp_integral(mu, omega_intervals(m, s), s * t_p, (s + 1) * t_p);
  return a;
}

MatrixXcd alpha(const VectorXd& omega_s, double mu, double t_p,
                const MatrixXd& eta, const MatrixXd& omega_intervals) {
  const VectorXcd per_mode = alpha_per_mode(omega_s, mu, t_p, omega_intervals);
  MatrixXcd a(eta.rows(), eta.cols());
  for (int i = 0; i < eta.rows(); ++i)
    for (int m = 0; m < eta.cols(); ++m)
      a(i, m) = kI * eta(i, m) * per_mode[m];
  return a;
}

MatrixXd gamma_tensor(double mu, double t_p, int n_segments,
                      const MatrixXd& omega_intervals,
                      const VectorXd& eta_products) {
  if (omega_intervals.rows() != eta_products.size())
    throw ConfigError("eta products do not match mode count");
  if (omega_intervals.cols() != n_segments)
    throw ConfigError("interval frequencies do not match segment count");
  MatrixXd g = MatrixXd::Zero(n_segments, n_segments);
  for (int r = 0; r < n_segments; ++r) {
    const double a2 = r * t_p, b2 = (r + 1) * t_p;
    for (int s = 0; s <= r; ++s) {
      double cell = 0.0;
      if (r == s) {
        for (int m = 0; m < eta_products.size(); ++m)
          cell += eta_products[m] *
                  sine_triangle_integral(mu, omega_intervals(m, r), a2, b2);
      } else {
        const double a1 = s * t_p, b1 = (s + 1) * t_p;
        for (int m = 0; m < eta_products.size(); ++m) {
          const complex<double> outer =
              sin_exp_integral(mu, omega_intervals(m, r), a2, b2);
          const complex<double> inner =
              sin_exp_integral(mu, omega_intervals(m, s), a1, b1);
          cell += eta_products[m] * (outer * std::conj(inner)).imag();
        }
      }
      g(r, s) = 2.0 * cell;
    }
  }
  return g;
}

namespace {

VectorXd eta_pair_products(const MatrixXd& eta) {
  if (eta.rows() != 2)
    throw ConfigError("gate engine expects a two-row eta matrix (one ion pair)");
  return (eta.row(0).array() * eta.row(1).array()).transpose();
}

// The lower-triangular tensor already holds each (r,s) pair once.
double quad_form(const MatrixXd& gamma_lower, const VectorXd& omega_s) {
  return omega_s.dot(gamma_lower * omega_s);
}

} // namespace

PulseSolution solve_pulse(const GateConfig& cfg, const VectorXd& segment_omegas,
                          const MatrixXd& segment_eta) {
  const int n_seg = cfg.n_segments;
  if (n_seg < 3 || n_seg % 2 == 0)
    throw ConfigError("segment count must be odd and at least 3");
  const int n_modes = static_cast<int>(segment_omegas.size());
  if (2 * n_modes >= n_seg)
    throw GateInfeasibleError(
        "not enough segments for the decoupling constraints; increase them");
  const double t_p = cfg.segment_time();

  // Static (undrifted) per-interval frequencies for synthesis.
  MatrixXd omega_iv(n_modes, n_seg);
  for (int m = 0; m < n_modes; ++m) omega_iv.row(m).setConstant(segment_omegas[m]);

  MatrixXd constraints(2 * n_modes, n_seg);
  for (int m = 0; m < n_modes; ++m)
    for (int s = 0; s < n_seg; ++s) {
      const complex<double> is =
          sin_exp_integral(cfg.mu, segment_omegas[m], s * t_p, (s + 1) * t_p);
      constraints(2 * m, s) = is.real();
      constraints(2 * m + 1, s) = is.imag();
    }

  Eigen::JacobiSVD<MatrixXd> svd(constraints, Eigen::ComputeFullV);
  const double smax = svd.singularValues().maxCoeff();
  int rank = 0;
  for (int k = 0; k < svd.singularValues().size(); ++k)
    if (svd.singularValues()[k] > 1e-12 * smax) ++rank;
  const int null_dim = n_seg - rank;
  if (null_dim < 1)
    throw GateInfeasibleError("decoupling constraints admit no pulse null space");
  const MatrixXd null_basis = svd.matrixV().rightCols(null_dim);

  const VectorXd products = eta_pair_products(segment_eta);
  const MatrixXd gamma = gamma_tensor(cfg.mu, t_p, n_seg, omega_iv, products);

  auto scaled_solution = [&](const VectorXd& direction) -> std::pair<bool, VectorXd> {
    const double chi_dir = quad_form(gamma, direction);
    if (!(chi_dir > 1e-30)) return {false, VectorXd()};
    const double c = std::sqrt(constants::kPi / 4.0 / chi_dir);
    return {true, c * direction};
  };

  VectorXd best;
  double best_norm = 1e300;
  if (null_dim == 1) {
    auto [ok, sol] = scaled_solution(null_basis.col(0));
    if (!ok)
      throw GateInfeasibleError(
          "geometric phase has the wrong sign at this detuning");
    best = sol;
  } else {
    const MatrixXd restricted =
        null_basis.transpose() *
        (0.5 * (gamma + gamma.transpose())) * null_basis;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(restricted);
    std::vector<VectorXd> candidates;
    for (int k = 0; k < null_dim; ++k)
      if (es.eigenvalues()[k] > 0.0)
        candidates.push_back(null_basis * es.eigenvectors().col(k));
    std::uint64_t rng = 0x6a09e667f3bcc909ULL;
    auto next01 = [&rng] {
      rng ^= rng >> 12;
      rng ^= rng << 25;
      rng ^= rng >> 27;
      return (rng * 0x2545F4914F6CDD1DULL >> 11) * 1.1102230246251565e-16;
    };
    for (int trial = 0; trial < 256; ++trial) {
      VectorXd y(null_dim);
      for (int k = 0; k < null_dim; ++k) y[k] = 2.0 * next01() - 1.0;
      if (y.norm() < 1e-12) continue;
      candidates.push_back(null_basis * y.normalized());
    }
    for (const auto& cand : candidates) {
      auto [ok, sol] = scaled_solution(cand);
      if (!ok) continue;
      const double norm = sol.cwiseAbs().maxCoeff();
      if (norm < best_norm) {
        best_norm = norm;
        best = sol;
      }
    }
    if (best.size() == 0)
      throw GateInfeasibleError(
          "geometric phase has the wrong sign at this detuning");
  }

  // Canonical overall sign: largest-magnitude segment positive.
  int imax = 0;
  best.cwiseAbs().maxCoeff(&imax);
  if (best[imax] < 0.0) best = -best;

  PulseSolution sol;
  sol.omega_s = best;
  sol.mu = cfg.mu;
  sol.t_g = cfg.t_g;
  sol.chi = quad_form(gamma, best);
  const VectorXcd per_mode = alpha_per_mode(best, cfg.mu, t_p, omega_iv);
  sol.residual_alpha = VectorXd(n_modes);
  for (int m = 0; m < n_modes; ++m)
    sol.residual_alpha[m] =
        segment_eta.col(m).cwiseAbs().maxCoeff() * std::abs(per_mode[m]);
  sol.max_rabi = best.cwiseAbs().maxCoeff();
  sol.cap_ok = sol.max_rabi <= cfg.rabi_cap;
  if (!sol.cap_ok)
    log::info("pulse exceeds the Rabi cap: %.3f MHz",
              sol.max_rabi / (2.0 * constants::kPi * 1e6));
  return sol;
}

namespace {

double thermal_beta(double omega, const ThermalState& th) {
  if (th.n_bar_c <= 0.0) return 1.0;
  const double arg = omega / (2.0 * th.omega_c) * std::log1p(1.0 / th.n_bar_c);
  return 1.0 / std::tanh(arg);
}

} // namespace

FidelityResult fidelity(const PulseSolution& pulse, const VectorXd& full_omegas,
                        const MatrixXd& full_eta, const ThermalState& thermal,
                        const DriftModel& drift) {
  if (full_eta.rows() != 2)
    throw ConfigError("fidelity expects a two-row eta matrix (one ion pair)");
  const int n_seg = static_cast<int>(pulse.omega_s.size());
  const double t_p = pulse.t_g / n_seg;
  const MatrixXd omega_iv = apply_drift(full_omegas, drift, n_seg, t_p);

  FidelityResult out;
  out.alpha = alpha(pulse.omega_s, pulse.mu, t_p, full_eta, omega_iv);
  out.beta = VectorXd(full_omegas.size());
  for (int m = 0; m < full_omegas.size(); ++m)
    out.beta[m] = thermal_beta(full_omegas[m], thermal);

  const MatrixXd gamma = gamma_tensor(pulse.mu, t_p, n_seg, omega_iv,
                                      eta_pair_products(full_eta));
  out.chi = pulse.omega_s.dot(gamma * pulse.omega_s);
  out.delta_chi = constants::kPi / 4.0 - out.chi;

  double sum_i = 0.0, sum_j = 0.0, sum_p = 0.0, sum_m = 0.0;
  for (int m = 0; m < full_omegas.size(); ++m) {
    const complex<double> ai = out.alpha(0, m);
    const complex<double> aj = out.alpha(1, m);
    sum_i += std::norm(ai) * out.beta[m];
    sum_j += std::norm(aj) * out.beta[m];
    sum_p += std::norm(ai + aj) * out.beta[m];
    sum_m += std::norm(ai - aj) * out.beta[m];
  }
  out.gamma_i = std::exp(-2.0 * sum_i);
  out.gamma_j = std::exp(-2.0 * sum_j);
  out.gamma_plus = std::exp(-2.0 * sum_p);
  out.gamma_minus = std::exp(-2.0 * sum_m);
  out.fidelity = (2.0 + 2.0 * (out.gamma_i + out.gamma_j) *
                            std::cos(2.0 * out.delta_chi) +
                  out.gamma_plus + out.gamma_minus) /
                 8.0;
  return out;
}

std::vector<SweepPoint> detuning_sweep(const GateConfig& base,
                                       const VectorXd& segment_omegas,
                                       const MatrixXd& segment_eta,
                                       const VectorXd& full_omegas,
                                       const MatrixXd& full_eta,
                                       const ThermalState& thermal,
                                       const DriftModel& drift,
                                       const SweepParams& params) {
  if (!(params.step > 0.0)) throw ConfigError("sweep step must be positive");
  const long n_points =
      static_cast<long>(std::floor((params.mu_hi - params.mu_lo) / params.step +
                                   1e-9)) + 1;
  std::vector<SweepPoint> sweep(n_points);

  PulseSolution reference;
  bool have_reference = false;
  if (!params.resolve) {
    GateConfig cfg = base;
    cfg.mu = 0.5 * (params.mu_lo + params.mu_hi);
    reference = solve_pulse(cfg, segment_omegas, segment_eta);
    have_reference = true;
  }

  auto eval_point = [&](long k) {
    SweepPoint pt;
    pt.mu = params.mu_lo + k * params.step;
    try {
      PulseSolution sol;
      if (have_reference) {
        sol = reference;
        sol.mu = pt.mu;
      } else {
        GateConfig cfg = base;
        cfg.mu = pt.mu;
        sol = solve_pulse(cfg, segment_omegas, segment_eta);
      }
      const FidelityResult fid =
          fidelity(sol, full_omegas, full_eta, thermal, drift);
      pt.infidelity = 1.0 - fid.fidelity;
      pt.max_rabi = sol.max_rabi;
      pt.feasible = sol.cap_ok;
    } catch (const GateInfeasibleError&) {
      pt.infidelity = std::numeric_limits<double>::quiet_NaN();
      pt.max_rabi = std::numeric_limits<double>::quiet_NaN();
      pt.feasible = false;
    }
    sweep[k] = pt;
  };

  const int workers = std::max(1, params.threads);
  if (workers == 1) {
    for (long k = 0; k < n_points; ++k) eval_point(k);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (long k = w; k < n_points; k += workers) eval_point(k);
      });
    for (auto& th : pool) th.join();
  }
  return sweep;
}

void PulseSolution::write_json(const std::string& path,
                               const std::string& meta_line) const {
  nlohmann::json j;
  if (!meta_line.empty()) j["meta"] = meta_line;
  j["t_g_s"] = t_g;
  j["mu_hz"] = mu / (2.0 * constants::kPi);
  j["omega_s_hz"] = nlohmann::json::array();
  for (int s = 0; s < omega_s.size(); ++s)
    j["omega_s_hz"].push_back(omega_s[s] / (2.0 * constants::kPi));
  j["chi"] = chi;
  j["cap_ok"] = cap_ok;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write pulse file: " + path);
  out << j.dump(2) << "\n";
}

void write_sweep_csv(const std::string& path, const std::vector<SweepPoint>& sweep,
                     const std::string& meta_line) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write sweep file: " + path);
  if (!meta_line.empty()) out << meta_line << '\n';
  out << "mu_hz,infidelity,max_rabi_hz,feasible\n";
  out.precision(12);
  for (const auto& pt : sweep) {
    out << pt.mu / (2.0 * constants::kPi) << ',' << pt.infidelity << ','
        << pt.max_rabi / (2.0 * constants::kPi) << ',' << (pt.feasible ? 1 : 0)
        << '\n';
  }
}

} // namespace iontrap
