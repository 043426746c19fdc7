#pragma once

#include <stdexcept>
#include <string>

namespace iontrap {

// Bad input files, mismatched vector lengths, invalid parameter blocks.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluation outside the validity domain of a formula (e.g. z <= 0).
struct FieldDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Minimum search did not converge or landed on a non-minimum.
struct SearchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hessian at a candidate point has a non-positive eigenvalue.
struct NotATrapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An ion left the trapping region during dynamics.
struct IonLossEvent : std::runtime_error {
  IonLossEvent(int ion, double time, const std::string& what)
      : std::runtime_error(what), ion_index(ion), time_s(time) {}
  int ion_index;
  double time_s;
};

// Two ions approached closer than the supported separation.
struct NearCollisionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Integration produced non-finite state.
struct IntegrationError : std::runtime_error {
  IntegrationError(long step, const std::string& what)
      : std::runtime_error(what), step_index(step) {}
  long step_index;
};

// No dominant spectral peak found.
struct AmbiguousSpectrumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A voltage set for which a requested site minimum does not exist.
struct InfeasibleVoltageError : std::runtime_error {
  InfeasibleVoltageError(int site, const std::string& what)
      : std::runtime_error(what), site_index(site) {}
  int site_index;
};

// Pulse synthesis cannot satisfy the gate constraints.
struct GateInfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace iontrap
