#include "iontrap/electrode_field.hpp"

#include <cmath>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/log.hpp"

namespace iontrap {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

constexpr double kTwoPi = 2.0 * constants::kPi;

// One corner term of the gapless-plane rectangle formula and its
// derivatives in the shifted coordinates X = xc - x, Y = yc - y.
struct CornerTerm {
  double f, fX, fY, fz, fXX, fYY, fXY, fXz, fYz;
};

CornerTerm corner_term(double X, double Y, double z) {
  const double X2 = X * X, Y2 = Y * Y, z2 = z * z;
  const double R2 = z2 + X2 + Y2;
  const double R = std::sqrt(R2);
  const double zX = z2 + X2;
  const double zY = z2 + Y2;

  CornerTerm t;
  t.f = std::atan2(X * Y, z * R);
  t.fX = z * Y / (R * zX);
  t.fY = z * X / (R * zY);
  t.fz = -X * Y * (R2 + z2) / (R * zX * zY);
  t.fXX = -z * X * Y * (zX + 2.0 * R2) / (R2 * R * zX * zX);
  t.fYY = -z * X * Y * (zY + 2.0 * R2) / (R2 * R * zY * zY);
  t.fXY = z / (R2 * R);
  t.fXz = Y * ((X2 + Y2) * zX - 2.0 * z2 * R2) / (R2 * R * zX * zX);
  t.fYz = X * ((X2 + Y2) * zY - 2.0 * z2 * R2) / (R2 * R * zY * zY);
  return t;
}

void require_above_plane(const Vector3d& p) {
  if (!(p.z() > 0.0))
    throw FieldDomainError("electrode potential is defined only for z > 0");
}

struct CornerSigns {
  double X, Y, s;
};

std::array<CornerSigns, 4> corner_set(const Electrode& e, const Vector3d& p) {
  const double Xa = e.corner_a.x() - p.x();
  const double Xb = e.corner_b.x() - p.x();
  const double Ya = e.corner_a.y() - p.y();
  const double Yb = e.corner_b.y() - p.y();
  return {{{Xb, Yb, 1.0}, {Xa, Yb, -1.0}, {Xb, Ya, -1.0}, {Xa, Ya, 1.0}}};
}

} // namespace

double rect_potential(const Electrode& e, double volts, const Vector3d& p) {
  require_above_plane(p);
  double sum = 0.0;
  for (const auto& c : corner_set(e, p))
    sum += c.s * corner_term(c.X, c.Y, p.z()).f;
  return volts / kTwoPi * sum;
}

Vector3d rect_gradient(const Electrode& e, double volts, const Vector3d& p) {
  require_above_plane(p);
  Vector3d g = Vector3d::Zero();
  for (const auto& c : corner_set(e, p)) {
    const CornerTerm t = corner_term(c.X, c.Y, p.z());
    g.x() -= c.s * t.fX;
    g.y() -= c.s * t.fY;
    g.z() += c.s * t.fz;
  }
  return volts / kTwoPi * g;
}

Matrix3d rect_hessian(const Electrode& e, double volts, const Vector3d& p) {
  require_above_plane(p);
  double hxx = 0, hyy = 0, hxy = 0, hxz = 0, hyz = 0;
  for (const auto& c : corner_set(e, p)) {
    const CornerTerm t = corner_term(c.X, c.Y, p.z());
    hxx += c.s * t.fXX;
    hyy += c.s * t.fYY;
    hxy += c.s * t.fXY;
    hxz -= c.s * t.fXz;
    hyz -= c.s * t.fYz;
  }
  Matrix3d h;
  // Each corner term is harmonic, so hzz follows from the trace.
  h << hxx, hxy, hxz,
       hxy, hyy, hyz,
       hxz, hyz, -(hxx + hyy);
  return volts / kTwoPi * h;
}

double PotentialField::derivative_step(const Vector3d& p) const {
  return std::max(1e-9, 1e-6 * std::abs(p.z()));
}

Vector3d PotentialField::gradient(const Vector3d& p) const {
  const double h = derivative_step(p);
  Vector3d g;
  for (int k = 0; k < 3; ++k) {
    Vector3d dp = Vector3d::Zero();
    dp[k] = h;
    const double d1 = (value(p + dp) - value(p - dp)) / (2.0 * h);
    dp[k] = 0.5 * h;
    const double d2 = (value(p + dp) - value(p - dp)) / h;
    g[k] = (4.0 * d2 - d1) / 3.0;
  }
  return g;
}

Matrix3d PotentialField::hessian(const Vector3d& p) const {
  const double h = derivative_step(p);
  Matrix3d m;
  for (int k = 0; k < 3; ++k) {
    Vector3d dp = Vector3d::Zero();
    dp[k] = h;
    const Vector3d d1 = (gradient(p + dp) - gradient(p - dp)) / (2.0 * h);
    dp[k] = 0.5 * h;
    const Vector3d d2 = (gradient(p + dp) - gradient(p - dp)) / h;
    m.col(k) = (4.0 * d2 - d1) / 3.0;
  }
  return 0.5 * (m + m.transpose());
}

double total_static_potential(const TrapLayout& layout,
                              const std::vector<double>& dc_volts,
                              const Vector3d& p) {
  const auto& dc = layout.dc_indices();
  if (dc_volts.size() != dc.size())
    throw ConfigError("voltage vector length does not match DC electrode count");
  double phi = 0.0;
  for (size_t k = 0; k < dc.size(); ++k) {
    if (dc_volts[k] == 0.0) continue;
    phi += rect_potential(layout.electrodes()[dc[k]], dc_volts[k], p);
  }
  return phi;
}

Vector3d total_static_gradient(const TrapLayout& layout,
                               const std::vector<double>& dc_volts,
                               const Vector3d& p) {
  const auto& dc = layout.dc_indices();
  if (dc_volts.size() != dc.size())
    throw ConfigError("voltage vector length does not match DC electrode count");
  Vector3d g = Vector3d::Zero();
  for (size_t k = 0; k < dc.size(); ++k) {
    if (dc_volts[k] == 0.0) continue;
    g += rect_gradient(layout.electrodes()[dc[k]], dc_volts[k], p);
  }
  return g;
}

double rf_instantaneous_potential(const TrapLayout& layout, const RfDrive& drive,
                                  double t, const Vector3d& p) {
  double amp = 0.0;
  for (int i : layout.rf_indices()) {
    const auto& e = layout.electrodes()[i];
    amp += drive.phase_sign(e.role) * rect_potential(e, drive.v_rf, p);
  }
  return amp * std::cos(drive.omega_rf * t);
}

double pseudopotential_ev(const TrapLayout& layout, const RfDrive& drive,
                          const Species& sp, const Vector3d& p) {
  Vector3d g = Vector3d::Zero();
  for (int i : layout.rf_indices()) {
    const auto& e = layout.electrodes()[i];
    g += drive.phase_sign(e.role) * rect_gradient(e, drive.v_rf, p);
  }
  if (layout.rf_indices().empty()) return 0.0;
  const double z2e = sp.charge * static_cast<double>(sp.charge) *
                     constants::kElementaryCharge;
  return z2e * g.squaredNorm() /
         (4.0 * sp.mass * drive.omega_rf * drive.omega_rf);
}

TrapField::TrapField(const TrapLayout& layout, const Species& sp,
                     std::vector<double> dc_volts)
    : layout_(&layout), species_(sp), dc_volts_(std::move(dc_volts)) {
  if (dc_volts_.size() != layout.dc_indices().size())
    throw ConfigError("voltage vector length does not match DC electrode count");
  if (layout.rf_indices().empty()) {
    pseudo_scale_ = 0.0;
  } else {
    pseudo_scale_ = sp.charge * constants::kElementaryCharge /
                    (4.0 * sp.mass * layout.drive().omega_rf *
                     layout.drive().omega_rf);
  }
}

void TrapField::set_dc_volts(std::vector<double> v) {
  if (v.size() != dc_volts_.size())
    throw ConfigError("voltage vector length does not match DC electrode count");
  dc_volts_ = std::move(v);
}

double TrapField::rf_amplitude(const Vector3d& p) const {
  double amp = 0.0;
  for (int i : layout_->rf_indices()) {
    const auto& e = layout_->electrodes()[i];
    amp += layout_->drive().phase_sign(e.role) *
           rect_potential(e, layout_->drive().v_rf, p);
  }
  return amp;
}

Vector3d TrapField::rf_amplitude_gradient(const Vector3d& p) const {
  Vector3d g = Vector3d::Zero();
  for (int i : layout_->rf_indices()) {
    const auto& e = layout_->electrodes()[i];
    g += layout_->drive().phase_sign(e.role) *
         rect_gradient(e, layout_->drive().v_rf, p);
  }
  return g;
}

Matrix3d TrapField::rf_amplitude_hessian(const Vector3d& p) const {
  Matrix3d h = Matrix3d::Zero();
  for (int i : layout_->rf_indices()) {
    const auto& e = layout_->electrodes()[i];
    h += layout_->drive().phase_sign(e.role) *
         rect_hessian(e, layout_->drive().v_rf, p);
  }
  return h;
}

double TrapField::pseudopotential_volts(const Vector3d& p) const {
  if (pseudo_scale_ == 0.0) return 0.0;
  return pseudo_scale_ * rf_amplitude_gradient(p).squaredNorm();
}

double TrapField::dc_potential(const Vector3d& p) const {
  return total_static_potential(*layout_, dc_volts_, p);
}

Vector3d TrapField::dc_gradient(const Vector3d& p) const {
  return total_static_gradient(*layout_, dc_volts_, p);
}

double TrapField::value(const Vector3d& p) const {
  return pseudopotential_volts(p) + dc_potential(p);
}

Vector3d TrapField::gradient(const Vector3d& p) const {
  Vector3d g = dc_gradient(p);
  if (pseudo_scale_ != 0.0)
    g += 2.0 * pseudo_scale_ * rf_amplitude_hessian(p) * rf_amplitude_gradient(p);
  return g;
}

Vector3d find_minimum(const PotentialField& field, const Vector3d& guess,
                      const MinimumSearchOptions& opts) {
  Vector3d x = guess;
  double fx = field.value(x);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const Vector3d g = field.gradient(x);
    const Matrix3d h = field.hessian(x);
    const double length = std::max(std::abs(x.z()), 1e-6);
    const double scale = h.norm() * length;

    if (g.norm() <= opts.gradient_tolerance * scale || g.norm() < 1e-300) {
      Eigen::SelfAdjointEigenSolver<Matrix3d> es(h);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw NotATrapError("stationary point has an indefinite hessian");
      return x;
    }

    Eigen::SelfAdjointEigenSolver<Matrix3d> es(h);
    Vector3d step;
    if (es.eigenvalues().minCoeff() > 0.0) {
      step = -es.eigenvectors() *
             (es.eigenvectors().transpose() * g).cwiseQuotient(es.eigenvalues());
    } else {
      // Fall back to scaled steepest descent outside the convex basin.
      const double curvature = es.eigenvalues().cwiseAbs().maxCoeff();
      step = -g / std::max(curvature, 1e-300);
    }
    const double cap = opts.max_step > 0.0 ? opts.max_step : 0.3 * length;
    if (step.norm() > cap) step *= cap / step.norm();

    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 48; ++ls) {
      const Vector3d trial = x + t * step;
      double ft;
      try {
        ft = field.value(trial);
      } catch (const FieldDomainError&) {
        t *= 0.5;
        continue;
      }
      if (std::isfinite(ft) && ft <= fx + 1e-4 * t * g.dot(step)) {
        x = trial;
        fx = ft;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved)
      throw SearchError("minimum search stalled: no descent step found");
  }
  throw SearchError("minimum search did not converge");
}

SecularTriple secular_frequencies(const PotentialField& field,
                                  const Vector3d& minimum, const Species& sp) {
  const Matrix3d h = field.hessian(minimum);
  Eigen::SelfAdjointEigenSolver<Matrix3d> es(h);
  SecularTriple out;
  out.minimum = minimum;
  const double qe = sp.charge * constants::kElementaryCharge;
  for (int k = 0; k < 3; ++k) {
    const double lambda = es.eigenvalues()[k];
    if (lambda <= 0.0)
      throw NotATrapError("confining field has an escape direction");
    out.omega[k] = std::sqrt(qe * lambda / sp.mass);
    Vector3d axis = es.eigenvectors().col(k);
    int imax = 0;
    axis.cwiseAbs().maxCoeff(&imax);
    if (axis[imax] < 0.0) axis = -axis;
    out.axes.col(k) = axis;
  }
  return out;
}

namespace {

// Minimizes the field over the plane orthogonal to `axis` through `p`.
Vector3d transverse_minimize(const PotentialField& field, const Vector3d& p,
                             const Vector3d& axis, double max_shift) {
  Vector3d v = axis.unitOrthogonal();
  Vector3d w = axis.cross(v);
  Vector3d x = p;
  for (int iter = 0; iter < 12; ++iter) {
    Vector3d g3;
    Matrix3d h3;
    try {
      g3 = field.gradient(x);
      h3 = field.hessian(x);
    } catch (const FieldDomainError&) {
      return x;
    }
    Eigen::Vector2d g(g3.dot(v), g3.dot(w));
    Eigen::Matrix2d h;
    h << v.dot(h3 * v), v.dot(h3 * w), w.dot(h3 * v), w.dot(h3 * w);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(h);
    if (es.eigenvalues().minCoeff() <= 0.0) break;
    Eigen::Vector2d d = -h.ldlt().solve(g);
    if (d.norm() > max_shift) d *= max_shift / d.norm();
    const Vector3d next = x + d.x() * v + d.y() * w;
    if ((next - p).dot(v) * (next - p).dot(v) +
            (next - p).dot(w) * (next - p).dot(w) >
        4.0 * max_shift * max_shift)
      break;
    x = next;
    if (d.norm() < 1e-13) break;
  }
  return x;
}

struct PathBarrier {
  bool found_saddle = false;
  double barrier = -1e300;
  Vector3d where = Vector3d::Zero();
};

PathBarrier walk_barrier(const PotentialField& field, const Vector3d& start,
                         double f0, const Vector3d& axis, double range,
                         double step, bool reminimize) {
  PathBarrier out;
  Vector3d x = start;
  double fmax = f0;
  Vector3d pmax = start;
  const int n = std::max(2, static_cast<int>(range / step));
  for (int k = 1; k <= n; ++k) {
    Vector3d probe = x + step * axis;
    if (reminimize)
      probe = transverse_minimize(field, probe, axis, 4.0 * step);
    double f;
    try {
      f = field.value(probe);
    } catch (const FieldDomainError&) {
      break;
    }
    if (!std::isfinite(f)) break;
    x = probe;
    if (f > fmax) {
      fmax = f;
      pmax = probe;
    } else if (fmax > f0 && f < fmax - 0.05 * (fmax - f0)) {
      out.found_saddle = true;
      break;
    }
  }
  out.barrier = fmax;
  out.where = pmax;
  return out;
}

} // namespace

TrapDepthResult trap_depth(const PotentialField& field, const Vector3d& minimum,
                           const Species& sp, const TrapDepthOptions& opts) {
  const double f0 = field.value(minimum);
  const Vector3d u = opts.escape_axis.normalized();

  std::array<PathBarrier, 3> paths;
  paths[0] = walk_barrier(field, minimum, f0, u, opts.lateral_range, opts.step, true);
  paths[1] = walk_barrier(field, minimum, f0, -u, opts.lateral_range, opts.step, true);
  paths[2] = walk_barrier(field, minimum, f0, Vector3d::UnitZ(),
                          opts.vertical_range, opts.step, false);

  TrapDepthResult out;
  double best = 1e300;
  for (const auto& pb : paths) {
    const double depth = pb.barrier - f0;
    if (depth < best) {
      best = depth;
      out.bounded_by_box = !pb.found_saddle;
      out.saddle = pb.where;
    }
  }
  out.depth_mev = best * sp.charge * 1e3;
  return out;
}

StabilityQ stability_q(double omega_sec, const RfDrive& drive) {
  StabilityQ s;
  s.q = 2.0 * std::sqrt(2.0) * omega_sec / drive.omega_rf;
  s.stable = s.q < 0.908;
  return s;
}

double lifetime_estimate(double pressure_pa, double temperature_k,
                         double cross_section_m2, double bg_mass_kg) {
  const double kt = constants::kBoltzmann * temperature_k;
  return kt * std::log(2.0) / (pressure_pa * cross_section_m2) *
         std::sqrt(constants::kPi * bg_mass_kg / (8.0 * kt));
}

AnharmonicFit anharmonic_fit(const PotentialField& field,
                             const Vector3d& minimum, const Species& sp,
                             const AnharmonicFitOptions& opts) {
  const Vector3d axis = opts.axis.normalized();
  const int n = opts.samples;
  const double w = opts.window;
  const double f0 = field.value(minimum);

  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) {
    const double t = -1.0 + 2.0 * i / (n - 1); // s / w
    const double s = t * w;
    design(i, 0) = t * t;
    design(i, 1) = t * t * t;
    design(i, 2) = t * t * t * t;
    rhs(i) = field.value(minimum + s * axis) - f0;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Vector3d c = svd.solve(rhs);
  const double cond =
      svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);

  AnharmonicFit fit;
  fit.kappa2 = c(0) / (w * w);
  fit.kappa3 = c(1) / (w * w * w);
  fit.kappa4 = c(2) / (w * w * w * w);
  if (!(fit.kappa2 > 0.0))
    throw FitError("axial expansion has non-positive curvature");

  const double resid = (design * c - rhs).cwiseAbs().maxCoeff();
  fit.residual_rel = resid / std::abs(c(0));
  if (fit.residual_rel > opts.max_residual_rel)
    throw FitError("quartic fit residual " + std::to_string(fit.residual_rel) +
                   " exceeds tolerance (condition number " +
                   std::to_string(cond) + "); shrink the window");

  // Coefficients below the fit noise floor are reported as absent.
  const double floor3 = 1e-10 * std::abs(c(0));
  if (std::abs(c(1)) > floor3) fit.lambda3 = fit.kappa2 / std::abs(fit.kappa3);
  if (std::abs(c(2)) > floor3) fit.lambda4 = std::sqrt(fit.kappa2 / std::abs(fit.kappa4));

  fit.char_length =
      std::cbrt(sp.charge * constants::kElementaryCharge /
                (8.0 * constants::kPi * constants::kVacuumPermittivity * fit.kappa2));
  fit.alpha = fit.char_length * fit.char_length * fit.kappa4 / fit.kappa2;
  return fit;
}

} // namespace iontrap
