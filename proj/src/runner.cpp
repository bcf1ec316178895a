#include "nematic/runner.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nematic/assembly.hpp"
#include "nematic/io.hpp"

namespace nematic {

StepCertificate initial_certificate(const DiscreteState& s0, const TriMesh& mesh,
                                    const PhysParams& params) {
  StepCertificate c;
  c.t = s0.t;
  c.step_index = 0;
  c.energy_before = c.energy_after = total_energy(s0, mesh, params);
  for (int z = 0; z < mesh.n_nodes(); ++z)
    c.max_norm_violation = std::max(c.max_norm_violation, std::abs(s0.d.values[z].norm() - 1.0));
  c.min_charge = std::min(s0.n_plus.values.minCoeff(), s0.n_minus.values.minCoeff());
  c.max_charge = std::max(s0.n_plus.values.maxCoeff(), s0.n_minus.values.maxCoeff());
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(mesh.n_nodes());
  c.charge_mass_plus = mass_lumped_inner(mesh, s0.n_plus.values, ones);
  c.charge_mass_minus = mass_lumped_inner(mesh, s0.n_minus.values, ones);
  return c;
}

RunSummary run_experiment(const ExperimentConfig& cfg, Trajectory* trajectory_out,
                          bool write_outputs) {
  cfg.validate();
  RunSummary summary;

  TriMesh mesh = TriMesh::structured(cfg.n, cfg.box(), cfg.pattern, cfg.dim);
  PhysParams params = cfg.phys_params();
  for (const std::string& w : params.validate(cfg.dim, mesh.h_max()))
    std::cerr << "warning: " << w << "\n";
  FixedPointConfig fp = cfg.fixed_point();
  InitialData init = cfg.initial_data();

  namespace fs = std::filesystem;
  if (write_outputs) {
    fs::create_directories(cfg.out_dir);
    save_config(cfg, cfg.out_dir + "/config.echo");
  }

  DiscreteState s0 = initialize_state(mesh, params, init);
  std::vector<StepCertificate> certs;
  certs.push_back(initial_certificate(s0, mesh, params));
  summary.energy_initial = certs.front().energy_after;

  const int n_steps = cfg.n_steps();
  if (write_outputs && cfg.vtk_every > 0)
    write_vtk(s0, mesh, cfg.out_dir + "/state_000000.vtk");

  SchemeWorkspace ws(mesh, params);
  DiscreteState state = s0;
  Trajectory traj;
  traj.states.push_back(s0);
  const double e_scale = std::max(summary.energy_initial, 1.0);
  double prev_energy = summary.energy_initial;
  double mass0_p = certs.front().charge_mass_plus;
  double mass0_m = certs.front().charge_mass_minus;
  double mass_scale = std::max({std::abs(mass0_p), std::abs(mass0_m), 1e-30});

  for (int s = 1; s <= n_steps; ++s) {
    try {
      auto [next, cert] = ws.step(state, fp);
      state = std::move(next);
      certs.push_back(cert);
      if (trajectory_out) traj.states.push_back(state);

      summary.steps_completed = s;
      summary.final_time = state.t;
      summary.max_energy_residual = std::max(summary.max_energy_residual,
                                             std::abs(cert.energy_residual));
      summary.max_norm_violation = std::max(summary.max_norm_violation, cert.max_norm_violation);
      summary.min_charge = std::min(summary.min_charge, cert.min_charge);
      summary.max_charge = std::max(summary.max_charge, cert.max_charge);
      summary.max_divergence_inf = std::max(summary.max_divergence_inf, cert.divergence_inf);
      if (cert.audits_valid) {
        summary.any_audit_run = true;
        if (!cert.audit_plus.pass || !cert.audit_minus.pass) summary.all_audits_passed = false;
      }
      if (params.electro_active()) {
        summary.max_charge_mass_drift =
            std::max({summary.max_charge_mass_drift,
                      std::abs(cert.charge_mass_plus - mass0_p) / mass_scale,
                      std::abs(cert.charge_mass_minus - mass0_m) / mass_scale});
      }
      if (cert.energy_after > prev_energy + 1e-8 * e_scale) summary.energy_monotone = false;
      prev_energy = cert.energy_after;

      if (write_outputs && cfg.vtk_every > 0 && (s % cfg.vtk_every == 0 || s == n_steps)) {
        char name[64];
        std::snprintf(name, sizeof(name), "/state_%06d.vtk", s);
        write_vtk(state, mesh, cfg.out_dir + name);
      }
    } catch (const std::exception& e) {
      summary.error = e.what();
      break;
    }
  }
  summary.energy_final = prev_energy;

  if (write_outputs) {
    write_timeseries(certs, cfg.out_dir + "/timeseries.csv");
    std::ofstream inv(cfg.out_dir + "/invariants.txt");
    inv.precision(17);
    inv << "steps_completed " << summary.steps_completed << "\n"
        << "final_time " << summary.final_time << "\n"
        << "energy_initial " << summary.energy_initial << "\n"
        << "energy_final " << summary.energy_final << "\n"
        << "max_energy_residual " << summary.max_energy_residual << "\n"
        << "energy_monotone " << (summary.energy_monotone ? 1 : 0) << "\n"
        << "max_director_norm_violation " << summary.max_norm_violation << "\n"
        << "min_charge " << summary.min_charge << "\n"
        << "max_charge " << summary.max_charge << "\n"
        << "max_charge_mass_drift " << summary.max_charge_mass_drift << "\n"
        << "max_divergence_inf " << summary.max_divergence_inf << "\n"
        << "m_matrix_all_passed " << (summary.any_audit_run ? (summary.all_audits_passed ? 1 : 0) : -1)
        << "\n";
    if (!summary.error.empty()) inv << "error " << summary.error << "\n";
  }

  traj.certificates = certs;
  if (!summary.error.empty()) traj.error = summary.error;
  if (trajectory_out) *trajectory_out = std::move(traj);
  return summary;
}

}  // namespace nematic
