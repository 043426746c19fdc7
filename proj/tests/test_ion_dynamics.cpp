#include <doctest.h>

#include <cmath>
#include <limits>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"
#include "iontrap/ion_dynamics.hpp"
#include "iontrap/layout_builder.hpp"

#include "oracles.hpp"
#include "test_fields.hpp"

using namespace iontrap;
using Eigen::Vector3d;

namespace {

constexpr double kTwoPi = 2.0 * constants::kPi;

double total_energy(const testfields::StaticTimeField& field,
                    const std::vector<Species>& ions, const IonState& st) {
  double e = 0.0;
  for (size_t i = 0; i < ions.size(); ++i) {
    e += ions[i].charge_coulomb() * field.value(st.positions[i], 0.0);
    e += 0.5 * ions[i].mass * st.velocities[i].squaredNorm();
  }
  for (size_t i = 0; i < ions.size(); ++i)
    for (size_t j = i + 1; j < ions.size(); ++j)
      e += constants::kCoulomb * ions[i].charge_coulomb() *
           ions[j].charge_coulomb() /
           (st.positions[i] - st.positions[j]).norm();
  return e;
}

} // namespace

TEST_CASE("forces") {
  const Species ca = Species::ca40();

  SUBCASE("zero at the minimum of a static well") {
    const auto field = testfields::harmonic_well(ca, {kTwoPi * 1e6, kTwoPi * 1e6,
                                                      kTwoPi * 2e6});
    const auto f = compute_forces(field, {ca}, {Vector3d::Zero()}, 0.0);
    CHECK(f[0].norm() < 1e-25);
  }

  SUBCASE("pairwise Coulomb force") {
    const testfields::StaticTimeField empty(
        [](const Vector3d&) { return 0.0; },
        [](const Vector3d&) { return Vector3d::Zero(); });
    const double d = 5e-6;
    const auto f = compute_forces(empty, {ca, ca},
                                  {Vector3d(0, 0, 0), Vector3d(d, 0, 0)}, 0.0);
    const double expected = constants::kCoulomb *
                            ca.charge_coulomb() * ca.charge_coulomb() / (d * d);
    CHECK(f[0].x() == doctest::Approx(-expected).epsilon(1e-12));
    CHECK(f[1].x() == doctest::Approx(expected).epsilon(1e-12));
    CHECK((f[0] + f[1]).norm() < 1e-30);
  }

  SUBCASE("matches the negative energy gradient for three ions") {
    const auto field = testfields::harmonic_well(
        ca, {kTwoPi * 0.8e6, kTwoPi * 1.9e6, kTwoPi * 2.4e6});
    std::vector<Vector3d> pos = {{-4.3e-6, 0.4e-6, -0.2e-6},
                                 {0.5e-6, -0.3e-6, 0.6e-6},
                                 {4.9e-6, 0.2e-6, -0.5e-6}};
    const std::vector<Species> ions(3, ca);
    const auto f = compute_forces(field, ions, pos, 0.0);

    auto energy = [&](int ion, const Vector3d& p) {
      auto moved = pos;
      moved[ion] = p;
      IonState st;
      st.positions = moved;
      st.velocities.assign(3, Vector3d::Zero());
      return total_energy(field, ions, st);
    };
    for (int i = 0; i < 3; ++i) {
      const Vector3d g = oracles::fd_gradient(
          [&](const Vector3d& p) { return energy(i, p); }, pos[i], 1e-9);
      CHECK((f[i] + g).norm() <= 1e-7 * g.norm());
    }
  }

  SUBCASE("near collision raises") {
    const testfields::StaticTimeField empty(
        [](const Vector3d&) { return 0.0; },
        [](const Vector3d&) { return Vector3d::Zero(); });
    CHECK_THROWS_AS(
        compute_forces(empty, {ca, ca},
                       {Vector3d(0, 0, 0), Vector3d(5e-10, 0, 0)}, 0.0),
        NearCollisionError);
  }
}

TEST_CASE("verlet integrator") {
  const Species ca = Species::ca40();
  const double f0 = 1e6;
  const auto well = testfields::harmonic_well(
      ca, {kTwoPi * f0, kTwoPi * f0, kTwoPi * f0});

  SUBCASE("energy conservation without damping") {
    SimConfig cfg;
    cfg.dt = 1.0 / (200.0 * f0);
    IonState init;
    init.positions = {Vector3d(2e-6, 1e-6, -1.5e-6)};
    init.velocities = {Vector3d::Zero()};
    LangevinIntegrator integ(well, {ca}, init, cfg);

    double e_start = 0.0, e_end = 0.0;
    const int window = 1000;
    for (int k = 0; k < window; ++k) {
      integ.step();
      e_start += total_energy(well, {ca}, integ.state());
    }
    for (long k = window; k < 100000; ++k) integ.step();
    for (int k = 0; k < window; ++k) {
      integ.step();
      e_end += total_energy(well, {ca}, integ.state());
    }
    CHECK(std::abs(e_end - e_start) / std::abs(e_start) < 1e-6);
  }

  SUBCASE("overdamped ion settles at the field minimum") {
    SimConfig cfg;
    cfg.dt = 1.0 / (100.0 * f0);
    cfg.damping = ca.mass * kTwoPi * f0 * 0.8;
    IonState init;
    init.positions = {Vector3d(3e-6, -2e-6, 1e-6)};
    init.velocities = {Vector3d::Zero()};
    LangevinIntegrator integ(well, {ca}, init, cfg);
    integ.run(40000);
    CHECK(integ.state().positions[0].norm() < 1e-12);
  }

  SUBCASE("harmonic trajectory against the closed form") {
    const double amplitude = 2e-6;
    const double period = 1.0 / f0;

    auto max_error = [&](double dt_fraction, long n_periods) {
      SimConfig cfg;
      cfg.dt = period / dt_fraction;
      IonState init;
      init.positions = {Vector3d(amplitude, 0, 0)};
      init.velocities = {Vector3d::Zero()};
      LangevinIntegrator integ(well, {ca}, init, cfg);
      double worst = 0.0;
      const long steps = static_cast<long>(n_periods * dt_fraction);
      for (long k = 0; k < steps; ++k) {
        integ.step();
        const double expected =
            amplitude * std::cos(kTwoPi * f0 * integ.state().t);
        worst = std::max(worst,
                         std::abs(integ.state().positions[0].x() - expected));
      }
      return worst / amplitude;
    };

    // Leapfrog phase dispersion (omega dt)^2/24 accumulates linearly; at
    // T/1000 over 100 periods the bound is 2 pi^2 / 60 * 1e-2 ~ 1.1e-3.
    CHECK(max_error(1000, 100) < 1.5e-3);
    // A step of T/4000 brings the same run under 1e-4.
    CHECK(max_error(4000, 100) < 1e-4);
  }

  SUBCASE("divergent state raises with the step index") {
    SimConfig cfg;
    cfg.dt = 1e3; // absurd step makes the oscillator blow up
    cfg.box_halfwidth = std::numeric_limits<double>::infinity();
    cfg.z_floor = -std::numeric_limits<double>::infinity();
    IonState init;
    init.positions = {Vector3d(1e-6, 0, 0)};
    init.velocities = {Vector3d::Zero()};
    LangevinIntegrator integ(well, {ca}, init, cfg);
    CHECK_THROWS_AS(integ.run(100000), IntegrationError);
  }

  SUBCASE("identical seeds give bit-identical trajectories") {
    SimConfig cfg;
    cfg.dt = 1.0 / (100.0 * f0);
    cfg.damping = ca.mass * 1e5;
    cfg.noise_temperature = 0.5e-3;
    cfg.rng_seed = 777;
    IonState init;
    init.positions = {Vector3d(1e-6, 0, 0)};
    init.velocities = {Vector3d::Zero()};
    const Trajectory a = simulate_trajectory(well, {ca}, init, cfg, 7);
    const Trajectory b = simulate_trajectory(well, {ca}, init, cfg, 7);
    REQUIRE(a.positions.size() == b.positions.size());
    for (size_t s = 0; s < a.positions.size(); ++s)
      CHECK(a.positions[s][0] == b.positions[s][0]);
  }

  SUBCASE("kinetic energy thermalizes to the configured temperature") {
    SimConfig cfg;
    cfg.dt = 1.0 / (60.0 * f0);
    cfg.damping = ca.mass * 2e5;
    cfg.noise_temperature = 0.5e-3;
    cfg.rng_seed = 20240;
    IonState init;
    init.positions = {Vector3d::Zero()};
    init.velocities = {Vector3d::Zero()};
    LangevinIntegrator integ(well, {ca}, init, cfg);
    integ.run(50000); // thermalization
    double ke_sum = 0.0;
    const long samples = 1200000;
    for (long k = 0; k < samples; ++k) {
      integ.step();
      ke_sum += 0.5 * ca.mass * integ.state().velocities[0].squaredNorm();
    }
    const double ke_per_axis = ke_sum / samples / 3.0;
    const double expected = 0.5 * constants::kBoltzmann * cfg.noise_temperature;
    CHECK(ke_per_axis == doctest::Approx(expected).epsilon(0.10));
  }
}

TEST_CASE("equilibrium extraction") {
  const Species ca = Species::ca40();
  const double f0 = 1.2e6;
  const auto well = testfields::harmonic_well(
      ca, {kTwoPi * f0, kTwoPi * 2.2e6, kTwoPi * 2.9e6});

  SUBCASE("single ion relaxes to the minimum") {
    SimConfig cfg;
    cfg.dt = 1.0 / (80.0 * f0);
    cfg.damping = ca.mass * kTwoPi * f0 / 8.0;
    const EquilibriumResult eq =
        run_equilibrium(well, {ca}, {Vector3d(2e-6, 1e-6, -1e-6)}, cfg);
    CHECK(eq.positions[0].norm() < 10e-9);
    CHECK(eq.residual < 1e-9);
  }

  SUBCASE("two-ion separation matches the closed form and minimization") {
    SimConfig cfg;
    cfg.dt = 1.0 / (80.0 * f0);
    cfg.damping = ca.mass * kTwoPi * f0 / 8.0;
    const std::vector<Species> ions(2, ca);
    const EquilibriumResult eq = run_equilibrium(
        well, ions,
        {Vector3d(-2.0e-6, 0.2e-6, 0), Vector3d(2.0e-6, -0.2e-6, 0)}, cfg);

    const double kq2 = constants::kCoulomb * ca.charge_coulomb() *
                       ca.charge_coulomb();
    const double omega = kTwoPi * f0;
    const double d_analytic =
        std::cbrt(2.0 * kq2 / (ca.mass * omega * omega));
    const double d_sim = (eq.positions[0] - eq.positions[1]).norm();
    CHECK(d_sim == doctest::Approx(d_analytic).epsilon(1e-5));

    // Direct energy minimization oracle along the weak axis.
    auto chain_energy = [&](double u) {
      return 2.0 * 0.5 * ca.mass * omega * omega * u * u + kq2 / (2.0 * u);
    };
    double lo = 0.2 * d_analytic, hi = 2.0 * d_analytic;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (chain_energy(m1 / 2.0) < chain_energy(m2 / 2.0))
        hi = m2;
      else
        lo = m1;
    }
    CHECK(d_sim == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-5));
  }

  SUBCASE("ion loss raises with the ion id") {
    const testfields::StaticTimeField drop(
        [](const Vector3d& p) { return 1e3 * p.z(); },
        [](const Vector3d&) { return Vector3d(0, 0, 1e3); });
    SimConfig cfg;
    cfg.dt = 1e-9;
    cfg.z_floor = 0.0;
    IonState init;
    init.positions = {Vector3d(0, 0, 5e-6)};
    init.velocities = {Vector3d::Zero()};
    LangevinIntegrator integ(drop, {ca}, init, cfg);
    try {
      integ.run(100000);
      FAIL("expected loss");
    } catch (const IonLossEvent& e) {
      CHECK(e.ion_index == 0);
      CHECK(e.time_s > 0.0);
    }
  }
}

TEST_CASE("trajectory spectrum") {
  SUBCASE("synthetic tone") {
    const double fs = 100e6, f = 1e6;
    std::vector<double> series(1 << 15);
    for (size_t k = 0; k < series.size(); ++k)
      series[k] = std::cos(kTwoPi * f * k / fs);
    const SpectrumPeak peak = spectrum_peak(series, fs);
    CHECK(std::abs(peak.frequency_hz - f) < 1e3);
  }

  SUBCASE("noise alone is ambiguous") {
    oracles::Rng rng(5);
    std::vector<double> series(4096);
    for (auto& v : series) v = rng.uniform(-1, 1);
    CHECK_THROWS_AS(spectrum_peak(series, 1e6), AmbiguousSpectrumError);
  }

  SUBCASE("rf quadrupole secular peak and micromotion sidebands") {
    const Species ca = Species::ca40();
    const double omega_rf = kTwoPi * 10e6;
    const double q = 0.1;
    const testfields::QuadrupoleRf rf(ca, q, omega_rf);

    SimConfig cfg;
    cfg.dt = (kTwoPi / omega_rf) / 50.0;
    cfg.n_steps = 1 << 19;
    IonState init;
    init.positions = {Vector3d(0.5e-6, 0, 0)};
    init.velocities = {Vector3d::Zero()};
    const Trajectory traj = simulate_trajectory(rf, {ca}, init, cfg);
    const auto series = axis_series(traj, 0, 0);
    const double fs = 1.0 / cfg.dt;

    const SpectrumPeak peak = spectrum_peak(series, fs);
    const double f_first_order = q * omega_rf / (4.0 * constants::kPi * std::sqrt(2.0));
    CHECK(std::abs(peak.frequency_hz - f_first_order) / f_first_order < 0.01);

    const double f_floquet =
        oracles::mathieu_secular_frequency(q, omega_rf) / kTwoPi;
    CHECK(std::abs(peak.frequency_hz - f_floquet) / f_floquet < 2e-3);

    // Micromotion sidebands at Omega +/- omega_sec.
    const double f_rf = omega_rf / kTwoPi;
    for (const double target : {f_rf - peak.frequency_hz, f_rf + peak.frequency_hz}) {
      const SpectrumPeak side = spectrum_peak_near(series, fs, target, 50e3);
      CHECK(std::abs(side.frequency_hz - target) < 5e3);
      CHECK(side.magnitude > 0.01 * peak.magnitude);
    }
  }
}
