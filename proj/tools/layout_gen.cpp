#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>

#include "iontrap/constants.hpp"
#include "iontrap/electrode_field.hpp"
#include "iontrap/layout_builder.hpp"
#include "iontrap/log.hpp"

using namespace iontrap;

namespace {

// Single-well diagnostics for geometry tuning.
void report(const ExampleLayoutParams& params, const Species& sp) {
  const TrapLayout layout = build_example_layout(params);
  std::vector<double> grounded(layout.dc_indices().size(), 0.0);
  const TrapField field(layout, sp, grounded);
  const int mid = params.n_sites / 2;
  try {
    const auto minimum = find_minimum(field, site_guess(params, mid, 12e-6));
    const auto triple = secular_frequencies(field, minimum, sp);
    const auto depth = trap_depth(field, minimum, sp);
    const auto q = stability_q(triple.omega.maxCoeff(), layout.drive());
    std::printf(
        "%-6s height %6.2f um  f = (%6.2f, %6.2f, %6.2f) MHz  depth %6.1f meV"
        "  q %.3f%s\n",
        sp.label.c_str(), minimum.z() * 1e6,
        triple.omega[0] / (2e6 * constants::kPi),
        triple.omega[1] / (2e6 * constants::kPi),
        triple.omega[2] / (2e6 * constants::kPi), depth.depth_mev, q.q,
        q.stable ? "" : " UNSTABLE");
  } catch (const std::exception& e) {
    std::printf("%-6s no well: %s\n", sp.label.c_str(), e.what());
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Example multi-well layout generator"};
  std::string out_dir = "data";
  ExampleLayoutParams params;
  double strip_um = params.strip_width * 1e6;
  double notch_um = params.notch * 1e6;
  double core_um = params.dc_core * 1e6;
  bool scan = false;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--strip-width-um", strip_um, "RF strip width");
  app.add_option("--notch-um", notch_um, "notch side");
  app.add_option("--dc-core-um", core_um, "central DC electrode side");
  app.add_flag("--scan", scan, "print well diagnostics instead of writing files");
  CLI11_PARSE(app, argc, argv);

  params.strip_width = strip_um * 1e-6;
  params.notch = notch_um * 1e-6;
  params.dc_core = core_um * 1e-6;

  if (scan) {
    report(params, Species::ca40());
    ExampleLayoutParams be = params;
    be.v_rf = 85.0;
    be.omega_rf_hz = 240e6;
    report(be, Species::be9());
    return 0;
  }

  std::filesystem::create_directories(out_dir);
  const TrapLayout ca_layout = build_example_layout(params);
  ca_layout.save(out_dir + "/example_layout.json");
  ExampleLayoutParams be = params;
  be.v_rf = 85.0;
  be.omega_rf_hz = 240e6;
  build_example_layout(be).save(out_dir + "/example_layout_be.json");
  save_species(Species::ca40(), out_dir + "/species_ca.json");
  save_species(Species::be9(), out_dir + "/species_be.json");
  std::printf("layout written to %s\n", out_dir.c_str());
  return 0;
}
