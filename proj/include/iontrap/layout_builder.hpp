#pragma once

#include <Eigen/Dense>
#include <vector>

#include "iontrap/geometry.hpp"

namespace iontrap {

// Multi-well surface trap: a long RF+ strip with square notches at fixed
// pitch, each notch holding an RF- ring around a central DC electrode, with
// DC rails along both sides. Dimensions are gapless-model widths (physical
// electrodes extended to gap midlines).
struct ExampleLayoutParams {
  int n_sites = 12;
  double pitch = 28e-6;        // well-to-well distance, m
  double strip_width = 48e-6;  // RF+ strip width (y), m
  double notch = 18e-6;        // notch side, m
  double dc_core = 6.5e-6;     // central DC electrode side, m
  double side_width = 24e-6;   // side DC rail width (y), m
  double margin = 33e-6;       // RF+ strip overhang beyond outer notches, m
  double v_rf = 80.0;          // volts (0-to-peak)
  double omega_rf_hz = 110e6;  // drive frequency, Hz
};

TrapLayout build_example_layout(const ExampleLayoutParams& params = {});

// Notch center x coordinate for site i (0-based; sites 0 and n-1 are the
// endcap sites that normally hold no ion).
double site_center_x(const ExampleLayoutParams& params, int site);

// Starting point above site i for minimum searches.
Eigen::Vector3d site_guess(const ExampleLayoutParams& params, int site,
                           double height = 20e-6);

} // namespace iontrap
