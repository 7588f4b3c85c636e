// Command-line front end. Exit codes: 0 success, 2 config error, 3 numerical
// failure.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "bellstab/commands.hpp"

namespace {

struct GlobalFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> fock_dim;
  std::optional<double> dt_ns;
  std::optional<int> workers;
  bool plot = false;
};

bellstab::RunConfig resolve(const GlobalFlags& f) {
  bellstab::RunConfig c = f.config_path.empty() ? bellstab::RunConfig{} : bellstab::load_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.output_dir = *f.out;
  if (f.fock_dim) c.system.fock_dim = *f.fock_dim;
  if (f.dt_ns) c.integrator.dt = *f.dt_ns * 1e-3;
  if (f.workers) c.workers = *f.workers;
  return c;
}

void print(const bellstab::Json& summary) { std::cout << summary.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bell-state stabilization simulator: driven-dissipative, measurement-based and nested feedback"};
  app.require_subcommand(1);
  GlobalFlags f;
  app.add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Random seed");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--fock-dim", f.fock_dim, "Cavity Fock-space dimension");
  app.add_option("--dt-ns", f.dt_ns, "Integrator step in ns");
  app.add_option("--workers", f.workers, "Worker threads (default: available cores)");
  app.add_flag("--plot", f.plot, "Also write SVG plots");

  std::string scheme_nfp = "mb";
  std::string scheme_sweep = "mb";
  auto* dd_curve = app.add_subcommand("dd-curve", "DD fidelity versus stabilization time");
  auto* mb_curve = app.add_subcommand("mb-curve", "MB fidelity versus correction steps and transition matrix");
  auto* nfp = app.add_subcommand("nfp", "Nested feedback statistics and trajectories");
  nfp->add_option("--scheme", scheme_nfp, "dd or mb")->check(CLI::IsMember({"dd", "mb"}));
  auto* sweep = app.add_subcommand("threshold-sweep", "Herald threshold sweep and outcome histograms");
  sweep->add_option("--scheme", scheme_sweep, "dd or mb")->check(CLI::IsMember({"dd", "mb"}));
  auto* prospects = app.add_subcommand("prospects", "Steady-state fidelities for improved parameters");
  auto* calibrate = app.add_subcommand("calibrate", "Measurement calibration surface and Z-correction sweep");
  auto* show = app.add_subcommand("print-config", "Print the resolved configuration");
  for (auto* sub : {dd_curve, mb_curve, nfp, sweep, prospects, calibrate, show}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const bellstab::RunConfig cfg = resolve(f);
    const bellstab::CommandOptions opt{f.plot};
    if (*show) {
      cfg.validate();
      std::cout << bellstab::config_to_json(cfg).dump(2) << "\n";
    } else if (*dd_curve) {
      print(bellstab::cmd_dd_curve(cfg, opt));
    } else if (*mb_curve) {
      print(bellstab::cmd_mb_curve(cfg, opt));
    } else if (*nfp) {
      print(bellstab::cmd_nfp(cfg, bellstab::parse_scheme(scheme_nfp), opt));
    } else if (*sweep) {
      print(bellstab::cmd_threshold_sweep(cfg, bellstab::parse_scheme(scheme_sweep), opt));
    } else if (*prospects) {
      print(bellstab::cmd_prospects(cfg, opt));
    } else if (*calibrate) {
      print(bellstab::cmd_calibrate(cfg, opt));
    }
  } catch (const bellstab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bellstab::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
