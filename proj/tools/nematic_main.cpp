#include <CLI11.hpp>
#include <iostream>

#include "nematic/errors.hpp"
#include "nematic/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"nematic: structure-preserving finite element solver for nematic electrolytes"};

  std::string config_path, experiment, out_dir;
  int n = -1;
  double dt = -1.0, tmax = -1.0;
  std::string stabilization, certify;

  app.add_option("--config", config_path, "run configuration file (key = value)");
  app.add_option("--experiment", experiment, "named experiment preset");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--n", n, "mesh subdivisions per side");
  app.add_option("--dt", dt, "time step");
  app.add_option("--tmax", tmax, "time horizon");
  app.add_option("--stabilization", stabilization, "on/off")
      ->check(CLI::IsMember({"on", "off"}));
  app.add_option("--certify", certify, "on/off")->check(CLI::IsMember({"on", "off"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (config_path.empty() && experiment.empty()) {
    std::cerr << "error: either --config or --experiment is required\n";
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    nematic::ExperimentConfig cfg;
    if (!config_path.empty())
      cfg = nematic::load_config(config_path);
    else
      cfg = nematic::experiment_catalogue(experiment);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (n > 0) cfg.n = n;
    if (dt > 0) cfg.dt = dt;
    if (tmax > 0) cfg.tmax = tmax;
    if (!stabilization.empty()) cfg.stabilization = stabilization == "on";
    if (!certify.empty()) cfg.certify = certify == "on";
    if (cfg.vtk_every == 0) cfg.vtk_every = std::max(1, cfg.n_steps() / 10);
    cfg.validate();

    nematic::RunSummary summary = nematic::run_experiment(cfg);
    std::cout << "completed " << summary.steps_completed << " steps to t = "
              << summary.final_time << "\n"
              << "energy " << summary.energy_initial << " -> " << summary.energy_final << "\n"
              << "max |energy residual|      " << summary.max_energy_residual << "\n"
              << "max ||d|-1|                " << summary.max_norm_violation << "\n"
              << "charge range               [" << summary.min_charge << ", "
              << summary.max_charge << "]\n"
              << "max charge mass drift      " << summary.max_charge_mass_drift << "\n"
              << "max |(div v, q)|           " << summary.max_divergence_inf << "\n";
    if (summary.any_audit_run)
      std::cout << "charge system M-matrix     " << (summary.all_audits_passed ? "pass" : "FAIL")
                << "\n";
    if (!summary.ok()) {
      std::cerr << "error: " << summary.error << "\n";
      return 2;
    }
    return 0;
  } catch (const nematic::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nematic::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nematic::UnknownExperiment& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
