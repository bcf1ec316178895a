#pragma once

#include <string>

#include "nematic/certificates.hpp"
#include "nematic/config.hpp"
#include "nematic/scheme.hpp"

namespace nematic {

struct RunSummary {
  int steps_completed = 0;
  double final_time = 0.0;
  double energy_initial = 0.0;
  double energy_final = 0.0;
  double max_energy_residual = 0.0;
  double max_norm_violation = 0.0;
  double min_charge = 0.0;
  double max_charge = 1.0;
  double max_charge_mass_drift = 0.0;  // relative
  double max_divergence_inf = 0.0;
  bool all_audits_passed = true;
  bool any_audit_run = false;
  bool energy_monotone = true;
  std::string error;
  bool ok() const { return error.empty(); }
};

/// Runs a configured experiment: writes the config echo, the certificate
/// time series, periodic VTK snapshots, and returns the invariant summary.
/// `keep_states` retains the full trajectory in memory for analysis.
RunSummary run_experiment(const ExperimentConfig& cfg, Trajectory* trajectory_out = nullptr,
                          bool write_outputs = true);

/// Step-0 pseudo-certificate holding the initial energy and invariants.
StepCertificate initial_certificate(const DiscreteState& s0, const TriMesh& mesh,
                                    const PhysParams& params);

}  // namespace nematic
