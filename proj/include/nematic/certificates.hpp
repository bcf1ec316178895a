#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nematic/mesh.hpp"
#include "nematic/state.hpp"

namespace nematic {

/// E = 1/2 ||v||^2 + A/2 ||grad d||^2 + mu_phi/2 int |grad phi|^2_{eps(d)}
double total_energy(const DiscreteState& state, const TriMesh& mesh, const PhysParams& params);

struct EnergyLawTerms {
  double energy_before = 0.0;
  double energy_after = 0.0;
  // dissipation, already multiplied by k
  double diss_viscous = 0.0;
  double diss_director = 0.0;
  double diss_charge_field = 0.0;
  double diss_charge_l2 = 0.0;
  // numerical damping, already multiplied by k^2/2
  double damp_velocity = 0.0;
  double damp_velocity_grad = 0.0;
  double damp_potential = 0.0;
  double damp_director_field = 0.0;
  // increments of the stabilization energies
  double stab_velocity_increment = 0.0;
  double stab_director_increment = 0.0;
  double dissipation_sum = 0.0;
  /// E_new - E_prev + dissipation + damping + stabilization increments
  double residual = 0.0;
};

/// Per-step energy balance of the scheme; the residual vanishes for a
/// converged step without applied field.
EnergyLawTerms energy_law_residual(const DiscreteState& prev, const DiscreteState& next,
                                   const TriMesh& mesh, const PhysParams& params);

/// Smooth comparison trajectory; absent callables mean identically zero
/// fields. Space/time derivatives fall back to central differences.
struct ReferenceTrajectory {
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, double)> velocity;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, double)> director;
  std::function<double(const Eigen::Vector3d&, double)> phi;
  std::function<double(const Eigen::Vector3d&, double)> n_plus;
  std::function<double(const Eigen::Vector3d&, double)> n_minus;
  /// optional: variational derivative; otherwise -A lap(d) - mu eps_a gphi (Pd . gphi)
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, double)> q;
  double fd_space = 1e-5;
  double fd_time = 1e-5;

  Eigen::Vector3d velocity_at(const Eigen::Vector3d& x, double t) const;
  Eigen::Vector3d director_at(const Eigen::Vector3d& x, double t) const;
  double phi_at(const Eigen::Vector3d& x, double t) const;
  double n_plus_at(const Eigen::Vector3d& x, double t) const;
  double n_minus_at(const Eigen::Vector3d& x, double t) const;
  Eigen::Vector3d q_at(const Eigen::Vector3d& x, double t, const PhysParams& params,
                       int dim) const;
  Eigen::Vector3d grad_phi_at(const Eigen::Vector3d& x, double t, int dim) const;
  Eigen::Matrix3d grad_director_at(const Eigen::Vector3d& x, double t, int dim) const;
  Eigen::Matrix3d grad_velocity_at(const Eigen::Vector3d& x, double t, int dim) const;
};

/// Piecewise-P1 evaluators over a stored discrete trajectory (linear
/// interpolation in time, nodal P1 + bubble in space).
ReferenceTrajectory make_reference_from_run(const TriMesh& mesh,
                                            const std::vector<DiscreteState>& states);

/// R(u | ref) = 1/2 ||grad(d - d~)||^2 + 1/2 ||v - v~||^2
///            + 1/2 int |grad(phi - phi~)|^2_{eps(d)}
/// with the reference sampled nodally on the mesh.
double relative_energy(const DiscreteState& state, const ReferenceTrajectory& ref,
                       const TriMesh& mesh, const PhysParams& params);

struct RelativeDissipation {
  double continuous = 0.0;  // d x q distance in L2, current-level directors
  double lumped = 0.0;      // midpoint directors, lumped norms
};

RelativeDissipation relative_dissipation(const DiscreteState& state, const DiscreteState& prev,
                                         const ReferenceTrajectory& ref, const TriMesh& mesh,
                                         const PhysParams& params);

struct RegularityWeights {
  double K1 = 0.0;
  double K2 = 0.0;
  double Kd = 0.0;
  std::map<std::string, double> items;
};

/// Regularity measures of the reference at time levels t and t - k.
RegularityWeights regularity_weights(const ReferenceTrajectory& ref, double t, double k,
                                     const TriMesh& mesh, const PhysParams& params,
                                     double C = 1.0);

struct GronwallReport {
  std::vector<double> omega;      // omega^j, j = 1..J
  bool hypothesis_ok = false;
  int first_hypothesis_violation = -1;
  double conclusion_lhs = 0.0;
  double conclusion_rhs = 0.0;
  bool conclusion_ok = false;
};

/// Discrete Gronwall bookkeeping: verifies the difference inequality
/// d_t y^j + f^j <= g1^j y^j + g2^j y^{j-1} and the telescoped conclusion for
/// a non-negative, non-increasing test weight phi.
GronwallReport gronwall_accumulate(const std::vector<double>& y, const std::vector<double>& f,
                                   const std::vector<double>& g1, const std::vector<double>& g2,
                                   double k, const std::function<double(double)>& phi);

/// The scheme's five forms evaluated at the reference and paired with P1
/// probe fields (a: velocity-like, c: director-like, e+/e-: scalars).
double residual_operator_Ad(const ReferenceTrajectory& ref, double t, double k,
                            const TriMesh& mesh, const PhysParams& params,
                            const Eigen::VectorXd& probe_a,
                            const std::vector<Eigen::Vector3d>& probe_c,
                            const Eigen::VectorXd& probe_ep, const Eigen::VectorXd& probe_em);

}  // namespace nematic
