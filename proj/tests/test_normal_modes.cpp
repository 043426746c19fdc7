#include <doctest.h>

#include <cmath>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/layout_builder.hpp"
#include "iontrap/normal_modes.hpp"

#include "oracles.hpp"

using namespace iontrap;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

constexpr double kTwoPi = 2.0 * constants::kPi;

SecularTriple make_site(const Vector3d& omega, const Vector3d& minimum) {
  SecularTriple t;
  t.omega = omega;
  t.axes = Eigen::Matrix3d::Identity();
  t.minimum = minimum;
  return t;
}

// Coulomb energy of a charge configuration (test-side definition).
double coulomb_energy(const std::vector<Vector3d>& pos,
                      const std::vector<double>& q) {
  double e = 0.0;
  for (size_t i = 0; i < pos.size(); ++i)
    for (size_t j = i + 1; j < pos.size(); ++j)
      e += constants::kCoulomb * q[i] * q[j] / (pos[i] - pos[j]).norm();
  return e;
}

// Grounded per-site data on the example layout, cached across tests.
struct GroundedCa {
  std::vector<SecularTriple> triples;
  std::vector<Vector3d> positions;
};

const GroundedCa& grounded_ca() {
  static const GroundedCa data = [] {
    GroundedCa d;
    const ExampleLayoutParams params;
    static const TrapLayout layout = build_example_layout(params);
    const Species ca = Species::ca40();
    const TrapField field(layout, ca,
                          std::vector<double>(layout.dc_indices().size(), 0.0));
    for (int s = 1; s <= 10; ++s) {
      const Vector3d m = find_minimum(field, site_guess(params, s));
      d.positions.push_back(m);
      d.triples.push_back(secular_frequencies(field, m, ca));
    }
    return d;
  }();
  return data;
}

} // namespace

TEST_CASE("coulomb hessian") {
  const double e = constants::kElementaryCharge;

  SUBCASE("single ion gives a zero matrix") {
    const MatrixXd h = coulomb_hessian({Vector3d(0, 0, 0)}, {e});
    CHECK(h.norm() == 0.0);
  }

  SUBCASE("two ions on the z axis") {
    const double d = 7e-6;
    const MatrixXd h =
        coulomb_hessian({Vector3d(0, 0, 0), Vector3d(0, 0, d)}, {e, e});
    const double k = constants::kCoulomb * e * e / (d * d * d);
    CHECK(h(2, 2) == doctest::Approx(2.0 * k).epsilon(1e-12));
    CHECK(h(0, 0) == doctest::Approx(-k).epsilon(1e-12));
    CHECK(h(1, 1) == doctest::Approx(-k).epsilon(1e-12));
    CHECK(h(2, 5) == doctest::Approx(-2.0 * k).epsilon(1e-12));

    // Against the finite-difference hessian of the Coulomb energy.
    const std::vector<double> q{e, e};
    auto energy = [&](const VectorXd& x) {
      std::vector<Vector3d> pos{{x[0], x[1], x[2]}, {x[3], x[4], x[5]}};
      return coulomb_energy(pos, q);
    };
    VectorXd x0(6);
    x0 << 0, 0, 0, 0, 0, d;
    const MatrixXd h_fd = oracles::fd_hessian_nd(energy, x0, 3e-8);
    CHECK((h - h_fd).norm() <= 1e-7 * h.norm());
  }

  SUBCASE("uniform translations are null vectors") {
    const std::vector<Vector3d> pos{{0, 0, 0}, {5e-6, 1e-6, 0}, {9e-6, -2e-6, 1e-6}};
    const MatrixXd h = coulomb_hessian(pos, {e, e, 2 * e});
    for (int axis = 0; axis < 3; ++axis) {
      VectorXd t = VectorXd::Zero(9);
      for (int i = 0; i < 3; ++i) t[3 * i + axis] = 1.0;
      CHECK((h * t).norm() <= 1e-12 * h.norm());
    }
  }

  SUBCASE("coincident ions rejected") {
    CHECK_THROWS_AS(coulomb_hessian({Vector3d(0, 0, 0), Vector3d(0, 0, 0)}, {e, e}),
                    ConfigError);
  }
}

TEST_CASE("assemble and diagonalize") {
  const Species ca = Species::ca40();
  const double f = 1.5e6;
  const Vector3d omega(kTwoPi * f, kTwoPi * 2.3e6, kTwoPi * 3.1e6);

  SUBCASE("non-interacting limit returns the site frequencies") {
    const std::vector<Vector3d> pos{{0, 0, 0}, {1.0, 0, 0}}; // 1 m apart
    const auto set = assemble_hessian({make_site(omega, pos[0]),
                                       make_site(omega, pos[1])},
                                      pos, {ca, ca});
    for (int axis = 0; axis < 3; ++axis) {
      const ModeSpectrum spec = diagonalize(set.axis[axis],
                                            static_cast<ModeAxis>(axis));
      for (int m = 0; m < 2; ++m)
        CHECK(spec.omega[m] == doctest::Approx(omega[axis]).epsilon(1e-12));
    }
  }

  SUBCASE("equal pair in one well: axial modes {w, sqrt(3) w}") {
    const double w = kTwoPi * f;
    const double kq2 = constants::kCoulomb * ca.charge_coulomb() *
                       ca.charge_coulomb();
    const double d = std::cbrt(2.0 * kq2 / (ca.mass * w * w));
    const std::vector<Vector3d> pos{{-d / 2, 0, 0}, {d / 2, 0, 0}};
    const auto set = assemble_hessian(
        {make_site(omega, pos[0]), make_site(omega, pos[1])}, pos, {ca, ca});
    const ModeSpectrum spec = diagonalize(set.axis[0], ModeAxis::X);
    CHECK(spec.omega[0] == doctest::Approx(w).epsilon(1e-10));
    CHECK(spec.omega[1] == doctest::Approx(std::sqrt(3.0) * w).epsilon(1e-10));
  }

  SUBCASE("mixed-mass pair matches the finite-difference hessian") {
    const Species be = Species::be9();
    const double w = kTwoPi * 1.1e6;
    const Vector3d omega_site(w, kTwoPi * 2.0e6, kTwoPi * 2.6e6);
    // Equilibrium of two unequal ions in identical per-ion wells centred at
    // the origin: solve the 1D force balance numerically.
    const double kq2 = constants::kCoulomb * ca.charge_coulomb() *
                       be.charge_coulomb();
    // Force balance m_i w^2 x_i = +/- kq2 / s^2 has the closed-form
    // separation s^3 = kq2 (1/m_ca + 1/m_be) / w^2.
    const double s =
        std::cbrt(kq2 * (1.0 / ca.mass + 1.0 / be.mass) / (w * w));
    const double x_ca = -kq2 / (ca.mass * w * w * s * s);
    const double x_be = kq2 / (be.mass * w * w * s * s);
    const std::vector<Vector3d> pos{{x_ca, 0, 0}, {x_be, 0, 0}};
    const std::vector<Species> ions{ca, be};
    const auto set = assemble_hessian(
        {make_site(omega_site, pos[0]), make_site(omega_site, pos[1])}, pos,
        ions);

    auto energy = [&](const VectorXd& x) {
      std::vector<Vector3d> p{{x[0], x[1], x[2]}, {x[3], x[4], x[5]}};
      double u = coulomb_energy(p, {ca.charge_coulomb(), be.charge_coulomb()});
      for (int i = 0; i < 2; ++i) {
        const Vector3d dd = p[i] - Vector3d(0, 0, 0);
        const double m = ions[i].mass;
        u += 0.5 * m *
             (omega_site.array().square() * dd.array().square()).sum();
      }
      return u;
    };
    VectorXd x0(6);
    x0 << x_ca, 0, 0, x_be, 0, 0;
    MatrixXd h_fd = oracles::fd_hessian_nd(energy, x0, 5e-10);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        h_fd.block<3, 3>(3 * i, 3 * j) /= std::sqrt(ions[i].mass * ions[j].mass);
    CHECK((set.full - h_fd).norm() <= 1e-8 * set.full.norm());
  }

  SUBCASE("diagonal matrix gives identity eigenvectors") {
    MatrixXd h = Eigen::Vector3d(1.0, 4.0, 9.0).asDiagonal();
    const ModeSpectrum spec = diagonalize(h, ModeAxis::Full3N);
    CHECK((spec.b.cwiseAbs() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
    CHECK(spec.omega[0] == doctest::Approx(1.0));
    CHECK(spec.omega[2] == doctest::Approx(3.0));
  }

  SUBCASE("textbook 2x2") {
    MatrixXd h(2, 2);
    h << 2, -1, -1, 2;
    const ModeSpectrum spec = diagonalize(h, ModeAxis::X);
    CHECK(spec.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(spec.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-14));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(spec.b(0, 0)) - r) < 1e-12);
    CHECK(spec.b(0, 0) * spec.b(1, 0) > 0.0);  // in phase
    CHECK(spec.b(0, 1) * spec.b(1, 1) < 0.0);  // out of phase
  }

  SUBCASE("random symmetric 30x30 residuals and reconstruction") {
    oracles::Rng rng(99);
    MatrixXd h(30, 30);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j <= i; ++j) {
        h(i, j) = rng.uniform(-1, 1);
        h(j, i) = h(i, j);
      }
    const ModeSpectrum spec = diagonalize(h, ModeAxis::Full3N);
    for (int m = 0; m < 30; ++m) {
      const VectorXd r = h * spec.b.col(m) - spec.eigenvalues[m] * spec.b.col(m);
      CHECK(r.norm() < 1e-9);
    }
    CHECK((spec.b.transpose() * spec.b - MatrixXd::Identity(30, 30)).norm() <
          1e-10);
    MatrixXd rec = spec.b * spec.eigenvalues.asDiagonal() * spec.b.transpose();
    CHECK((h - rec).norm() < 1e-9 * h.norm());
  }

  SUBCASE("asymmetric input is a contract violation") {
    MatrixXd h(2, 2);
    h << 1, 2, 0, 1;
    CHECK_THROWS_AS(diagonalize(h, ModeAxis::X), ConfigError);
  }

  SUBCASE("negative eigenvalues are reported as instability") {
    MatrixXd h(2, 2);
    h << -1, 0, 0, 4;
    const ModeSpectrum spec = diagonalize(h, ModeAxis::X);
    REQUIRE(spec.unstable.size() == 1);
    CHECK(spec.unstable[0] == 0);
    CHECK_FALSE(spec.stable());
  }

  SUBCASE("COM mode of identical coupled sites keeps the site frequency") {
    // Row sums of the Coulomb part vanish, so the uniform vector is exact.
    const double w = kTwoPi * 2e6;
    std::vector<Vector3d> pos;
    std::vector<SecularTriple> sites;
    for (int i = 0; i < 6; ++i) {
      pos.push_back({i * 28e-6, 0, 0});
      sites.push_back(make_site({w, 1.7 * w, 2.4 * w}, pos.back()));
    }
    const auto set = assemble_hessian(sites, pos, std::vector<Species>(6, ca));
    for (int axis = 0; axis < 3; ++axis) {
      const ModeSpectrum spec = diagonalize(set.axis[axis],
                                            static_cast<ModeAxis>(axis));
      double best = 1e300;
      int com = -1;
      for (int m = 0; m < 6; ++m) {
        const double dev =
            (spec.b.col(m).cwiseAbs() -
             VectorXd::Constant(6, 1.0 / std::sqrt(6.0))).norm();
        if (dev < best) {
          best = dev;
          com = m;
        }
      }
      const double site_w = sites[0].omega[axis];
      CHECK(spec.omega[com] == doctest::Approx(site_w).epsilon(1e-10));
    }
  }

  SUBCASE("mass scaling with consistently rescaled Coulomb terms") {
    // m -> c m with d -> d c^(-1/3) scales the Coulomb hessian by c, leaving
    // the per-axis mass-weighted matrix invariant.
    const double c = 3.7;
    const double w = kTwoPi * 2e6;
    const Vector3d ow(w, 1.3 * w, 1.9 * w);
    std::vector<Vector3d> pos1, pos2;
    std::vector<SecularTriple> s1, s2;
    Species heavy = ca;
    heavy.mass *= c;
    const double scale = std::cbrt(1.0 / c);
    for (int i = 0; i < 4; ++i) {
      pos1.push_back({i * 20e-6, 0, 0});
      pos2.push_back({i * 20e-6 * scale, 0, 0});
      s1.push_back(make_site(ow, pos1.back()));
      s2.push_back(make_site(ow, pos2.back()));
    }
    const auto a = assemble_hessian(s1, pos1, std::vector<Species>(4, ca));
    const auto b = assemble_hessian(s2, pos2, std::vector<Species>(4, heavy));
    for (int axis = 0; axis < 3; ++axis)
      CHECK((a.axis[axis] - b.axis[axis]).norm() <= 1e-12 * a.axis[axis].norm());
  }
}

TEST_CASE("interaction matrix") {
  SUBCASE("COM and stretch of an equal pair") {
    MatrixXd h(2, 2);
    h << 2, -0.1, -0.1, 2;
    const ModeSpectrum spec = diagonalize(h, ModeAxis::Z);
    const MatrixXd m = interaction_matrix(spec);
    for (int c = 0; c < 2; ++c) {
      CHECK(m.cwiseAbs().col(c).maxCoeff() == doctest::Approx(1.0));
    }
    // One column is (1, 1), the other (1, -1) up to ordering.
    const bool col0_com = m(0, 0) * m(1, 0) > 0;
    const int com = col0_com ? 0 : 1;
    const int stretch = 1 - com;
    CHECK(m(0, com) == doctest::Approx(1.0));
    CHECK(m(1, com) == doctest::Approx(1.0));
    CHECK(std::abs(m(0, stretch)) == doctest::Approx(1.0));
    CHECK(m(0, stretch) * m(1, stretch) < 0.0);
  }

  SUBCASE("grounded Ca crystal pairs ions (i, 11-i)") {
    const auto& data = grounded_ca();
    const auto set = assemble_hessian(
        data.triples, data.positions,
        std::vector<Species>(data.positions.size(), Species::ca40()));
    const ModeSpectrum spec = diagonalize(set.axis[2], ModeAxis::Z);
    REQUIRE(spec.stable());
    const MatrixXd m = interaction_matrix(spec);
    int paired = 0;
    for (int c = 0; c < m.cols(); ++c) {
      // Top-two participants of each mode should be a mirror pair (0-based
      // ions i and 9-i).
      int i1 = -1, i2 = -1;
      double v1 = -1, v2 = -1;
      for (int i = 0; i < m.rows(); ++i) {
        const double v = std::abs(m(i, c));
        if (v > v1) {
          v2 = v1; i2 = i1;
          v1 = v; i1 = i;
        } else if (v > v2) {
          v2 = v; i2 = i;
        }
      }
      if (i1 + i2 == 9 && v2 > 0.5) ++paired;
    }
    CHECK(paired == m.cols());
  }
}

TEST_CASE("coupling strength and resonance") {
  const Species ca = Species::ca40();

  SUBCASE("symmetric in the ion pair") {
    const Species be = Species::be9();
    const double a = coupling_strength(ca, be, kTwoPi * 1e6, kTwoPi * 2e6, 28e-6);
    const double b = coupling_strength(be, ca, kTwoPi * 2e6, kTwoPi * 1e6, 28e-6);
    CHECK(a == doctest::Approx(b).epsilon(1e-15));
  }

  SUBCASE("monotone decrease in distance, frequency and mass") {
    const double base = coupling_strength(ca, ca, kTwoPi * 1e6, kTwoPi * 1e6, 28e-6);
    CHECK(coupling_strength(ca, ca, kTwoPi * 1e6, kTwoPi * 1e6, 30e-6) < base);
    CHECK(coupling_strength(ca, ca, kTwoPi * 2e6, kTwoPi * 1e6, 28e-6) < base);
    Species heavy = ca;
    heavy.mass *= 2;
    CHECK(coupling_strength(heavy, ca, kTwoPi * 1e6, kTwoPi * 1e6, 28e-6) < base);
  }

  SUBCASE("radial eigen-splitting of two synthetic wells equals Omega_I") {
    const double d = 28e-6;
    for (double f : {1e6, 3e6, 10e6}) {
      const double w = kTwoPi * f;
      const Vector3d omega(0.36 * w, 0.63 * w, w); // z is the radial test axis
      const std::vector<Vector3d> pos{{0, 0, 0}, {d, 0, 0}};
      const auto set = assemble_hessian(
          {make_site(omega, pos[0]), make_site(omega, pos[1])}, pos, {ca, ca});
      const ModeSpectrum spec = diagonalize(set.axis[2], ModeAxis::Z);
      const double split = spec.omega[1] - spec.omega[0];
      const double oi = coupling_strength(ca, ca, w, w, d);
      CHECK(split == doctest::Approx(oi).epsilon(0.01));
    }
  }

  SUBCASE("Be axial pinned-pair separation lands near 1.8 kHz") {
    ExampleLayoutParams params;
    params.v_rf = 85.0;
    params.omega_rf_hz = 240e6;
    const TrapLayout layout = build_example_layout(params);
    const Species be = Species::be9();
    const TrapField field(layout, be,
                          std::vector<double>(layout.dc_indices().size(), 0.0));
    const Vector3d m5 = find_minimum(field, site_guess(params, 5));
    const Vector3d m6 = find_minimum(field, site_guess(params, 6));
    const SecularTriple t5 = secular_frequencies(field, m5, be);
    const double d = (m6 - m5).norm();
    const double oi = coupling_strength(be, be, t5.omega[0], t5.omega[0], d);
    // Axial splitting of a resonant pair is 2 Omega_I.
    const double df = 2.0 * oi / kTwoPi;
    CHECK(df == doctest::Approx(1800.0).epsilon(0.25));
  }

  SUBCASE("resonance flag") {
    const double oi = kTwoPi * 30.0;
    CHECK(resonance_detuning(kTwoPi * 1e6, kTwoPi * 1e6, oi).coupled);
    CHECK(resonance_detuning(kTwoPi * 1e6, kTwoPi * 1e6, oi).delta_minus == 0.0);
    const auto far = resonance_detuning(kTwoPi * 1e6 + 100.0 * oi, kTwoPi * 1e6, oi);
    CHECK_FALSE(far.coupled);
    CHECK(far.delta_minus == doctest::Approx(50.0 * oi));
  }

  SUBCASE("grounded Ca pair detunings overlap the published band") {
    const auto& data = grounded_ca();
    std::vector<double> f5;
    for (int i = 0; i < 5; ++i) f5.push_back(data.triples[i].omega[2] / kTwoPi);
    // Mirror pairs are exactly degenerate; distinct pair frequencies differ
    // by 0.02 .. 0.25 MHz on the reconstructed geometry.
    for (int i = 0; i + 1 < 5; ++i) {
      const double diff = std::abs(f5[i] - f5[i + 1]);
      CHECK(diff > 0.015e6);
      CHECK(diff < 0.3e6);
    }
    for (int i = 0; i < 5; ++i) {
      const double mirror = std::abs(data.triples[i].omega[2] -
                                     data.triples[9 - i].omega[2]) / kTwoPi;
      CHECK(mirror < 1.0); // Hz
    }
  }
}

TEST_CASE("segment detection") {
  SUBCASE("block-diagonal eigenvectors recover the blocks") {
    MatrixXd b = MatrixXd::Zero(4, 4);
    b.block<2, 2>(0, 0) << 0.8, 0.6, -0.6, 0.8;
    b.block<2, 2>(2, 2) << 1.0 / std::sqrt(2), 1.0 / std::sqrt(2),
        1.0 / std::sqrt(2), -1.0 / std::sqrt(2);
    ModeSpectrum spec;
    spec.axis = ModeAxis::Z;
    spec.b = b;
    spec.omega = VectorXd::Ones(4);
    spec.eigenvalues = VectorXd::Ones(4);
    const SegmentPartition part = detect_segments(spec);
    REQUIRE(part.segments.size() == 2);
    CHECK(part.segments[0].ions == std::vector<int>{0, 1});
    CHECK(part.segments[0].modes == std::vector<int>{0, 1});
    CHECK(part.segments[1].ions == std::vector<int>{2, 3});
  }

  SUBCASE("identity eigenvectors give singleton segments") {
    ModeSpectrum spec;
    spec.axis = ModeAxis::Z;
    spec.b = MatrixXd::Identity(5, 5);
    spec.omega = VectorXd::Ones(5);
    spec.eigenvalues = VectorXd::Ones(5);
    const SegmentPartition part = detect_segments(spec);
    CHECK(part.segments.size() == 5);
    for (const auto& s : part.segments) {
      CHECK(s.ions.size() == 1);
      CHECK(s.modes.size() == 1);
    }
  }

  SUBCASE("pinned central pair separates from the rest") {
    // Site frequencies with ions 5 and 6 (1-based) detuned upward, as the
    // DC pinning configuration produces.
    const Species ca = Species::ca40();
    const double w = kTwoPi * 27e6;
    std::vector<Vector3d> pos;
    std::vector<SecularTriple> sites;
    for (int i = 0; i < 10; ++i) {
      pos.push_back({i * 28e-6, 0, 0});
      const double wi = (i == 4 || i == 5) ? 1.08 * w : w;
      sites.push_back(make_site({0.36 * wi, 0.63 * wi, wi}, pos.back()));
    }
    const auto set = assemble_hessian(sites, pos, std::vector<Species>(10, ca));
    const ModeSpectrum spec = diagonalize(set.axis[2], ModeAxis::Z);
    const SegmentPartition part = detect_segments(spec, 1e-4);
    bool found = false;
    for (const auto& s : part.segments)
      if (s.ions == std::vector<int>{4, 5}) {
        found = true;
        CHECK(s.modes.size() == 2);
      }
    CHECK(found);
  }

  SUBCASE("output is always a partition") {
    oracles::Rng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 3 + static_cast<int>(rng.uniform() * 8);
      MatrixXd h(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
          h(i, j) = rng.uniform(-1, 1);
          h(j, i) = h(i, j);
        }
      const ModeSpectrum spec = diagonalize(h, ModeAxis::Full3N);
      const SegmentPartition part = detect_segments(spec, rng.uniform(1e-5, 0.5));
      std::vector<int> ion_seen(n, 0), mode_seen(n, 0);
      for (const auto& s : part.segments) {
        for (int i : s.ions) ion_seen[i] += 1;
        for (int m : s.modes) mode_seen[m] += 1;
      }
      for (int i = 0; i < n; ++i) {
        CHECK(ion_seen[i] == 1);
        CHECK(mode_seen[i] == 1);
      }
    }
  }
}

TEST_CASE("anharmonic jacobian") {
  SUBCASE("harmonic two-ion limit has eigenvalues 1 and 3") {
    AnharmonicChain chain;
    const double u = std::cbrt(0.25);
    chain.u = Eigen::Vector2d(-u, u);
    chain.well_center = Eigen::Vector2d(0, 0);
    chain.kappa2_ratio = Eigen::Vector2d(1, 1);
    chain.alpha = Eigen::Vector2d(0, 0);
    const VectorXd eq = solve_anharmonic_equilibrium(chain, chain.u);
    CHECK((eq - chain.u).norm() < 1e-10);
    const ModeSpectrum spec = anharmonic_modes(chain, 1.0);
    CHECK(spec.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spec.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-12));
  }

  SUBCASE("matches the finite-difference hessian of the chain energy") {
    AnharmonicChain chain;
    chain.u = Eigen::Vector4d(-20.2, -19.1, 18.9, 20.3);
    chain.well_center = Eigen::Vector4d(-19.6, -19.6, 19.6, 19.6);
    chain.kappa2_ratio = Eigen::Vector4d(1.0, 1.0, 0.97, 0.97);
    chain.alpha = Eigen::Vector4d(-0.012, -0.012, -0.017, -0.017);
    const VectorXd eq = solve_anharmonic_equilibrium(chain, chain.u);
    AnharmonicChain at_eq = chain;
    at_eq.u = eq;
    const MatrixXd a = anharmonic_jacobian(at_eq);
    auto energy = [&](const VectorXd& u) { return anharmonic_energy(chain, u); };
    const MatrixXd h_fd = 0.5 * oracles::fd_hessian_nd(energy, eq, 1e-3);
    CHECK((a - h_fd).norm() <= 1e-8 * a.norm());
  }

  SUBCASE("duplicate positions are rejected") {
    AnharmonicChain chain;
    chain.u = Eigen::Vector2d(1.0, 1.0);
    chain.well_center = Eigen::Vector2d(0, 0);
    chain.kappa2_ratio = Eigen::Vector2d(1, 1);
    chain.alpha = Eigen::Vector2d(0, 0);
    CHECK_THROWS_AS(anharmonic_jacobian(chain), ConfigError);
  }
}
