#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "nematic/fields.hpp"
#include "nematic/mesh.hpp"
#include "nematic/sparse.hpp"

namespace nematic {

/// Model constants and discretization controls.
struct PhysParams {
  double nu = 1.0;          // viscosity
  double A = 0.01;          // elastic constant
  double eps_perp = 0.1;    // perpendicular permittivity (0 disables the electro block)
  double eps_a = 10.0;      // permittivity anisotropy
  double lambda_npp = 1.0;  // charge <-> flow coupling
  double mu_phi = 0.25;     // potential / charge diffusion scale
  double nu_el = 1.0;       // elastic <-> flow coupling
  double alpha = 1.0;       // velocity stabilization exponent
  double beta = 1.0;        // director stabilization exponent
  bool stabilization_on = false;
  bool truncation_on = false;
  double truncation_c2 = 1.0;
  DirectorBc director_bc = DirectorBc::neumann;
  double k = 5e-4;  // time step
  double T = 0.1;   // horizon

  // uniform applied field E0(t); empty means none
  std::function<Eigen::Vector3d(double)> applied_field;
  bool has_applied_field() const { return static_cast<bool>(applied_field); }
  Eigen::Vector3d applied_field_at(double t) const {
    return applied_field ? applied_field(t) : Eigen::Vector3d::Zero();
  }

  // sub-solve freezes (stationary studies)
  bool freeze_velocity = false;
  bool freeze_director = false;
  bool freeze_charges = false;
  bool freeze_potential = false;

  bool electro_active() const { return eps_perp > 0.0; }
  /// throws ValidationError on inconsistent values; returns warnings
  std::vector<std::string> validate(int dim, double h) const;
  double truncation_gamma(int dim, double h) const;
};

/// One time level of the coupled unknowns.
struct DiscreteState {
  VelocityField v;
  ScalarField p;  // pressure, zero lumped mean
  DirectorField d;
  std::vector<Eigen::Vector3d> q;  // variational derivative of the elastic energy
  ScalarField n_plus;
  ScalarField n_minus;
  ScalarField phi;  // zero lumped mean
  double t = 0.0;
  int step_index = 0;
};

/// Per-step record of the certified quantities.
struct StepCertificate {
  double t = 0.0;
  int step_index = 0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  // itemized dissipation (already multiplied by k) and numerical damping
  double diss_viscous = 0.0;
  double diss_director = 0.0;
  double diss_charge_field = 0.0;
  double diss_charge_l2 = 0.0;
  double damp_velocity = 0.0;
  double damp_velocity_grad = 0.0;
  double damp_potential = 0.0;
  double damp_director_field = 0.0;
  double stab_velocity_increment = 0.0;
  double stab_director_increment = 0.0;
  double dissipation_sum = 0.0;
  double energy_residual = 0.0;
  double max_norm_violation = 0.0;  // max | |d(z)| - 1 |
  double min_charge = 0.0;
  double max_charge = 0.0;
  double charge_mass_plus = 0.0;
  double charge_mass_minus = 0.0;
  double divergence_inf = 0.0;
  MMatrixAudit audit_plus;
  MMatrixAudit audit_minus;
  bool audits_valid = false;
  int fixed_point_iters = 0;
  bool applied_field_active = false;
  bool frozen = false;
};

/// Nodal initial data; evaluated at mesh nodes by initialize_state.
struct InitialData {
  std::function<Eigen::Vector3d(const Eigen::Vector3d&)> director;
  Eigen::Vector3d director_fallback = Eigen::Vector3d(0, 0, 1);
  bool has_fallback = true;
  std::function<double(const Eigen::Vector3d&)> n_plus;
  std::function<double(const Eigen::Vector3d&)> n_minus;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&)> velocity;
  bool project_velocity = true;
};

/// Normalizes the director, checks charge compatibility, solves for the
/// initial potential and evaluates the initial variational derivative.
DiscreteState initialize_state(const TriMesh& mesh, const PhysParams& params,
                               const InitialData& init);

struct InvariantViolation {
  std::string what;
  int node = -1;
  double magnitude = 0.0;
};

struct InvariantReport {
  double max_norm_violation = 0.0;
  double min_charge = 0.0;
  double max_charge = 0.0;
  double charge_net_mass = 0.0;  // sum m_z (n+ - n-)
  double phi_mean = 0.0;
  double pressure_mean = 0.0;
  bool max_principle_strict = false;  // whether the bound is asserted, not just monitored
  std::vector<InvariantViolation> violations;
  bool clean() const { return violations.empty(); }
};

InvariantReport check_invariants(const DiscreteState& state, const TriMesh& mesh,
                                 const PhysParams& params);

}  // namespace nematic
