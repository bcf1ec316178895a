#include "nematic/state.hpp"

#include <cmath>

#include "nematic/assembly.hpp"
#include "nematic/errors.hpp"
#include "nematic/scheme.hpp"
#include "nematic/solvers.hpp"

namespace nematic {

std::vector<std::string> PhysParams::validate(int dim, double h) const {
  std::vector<std::string> warnings;
  if (!(nu > 0.0)) throw ValidationError("physics.nu", "viscosity must be positive");
  if (eps_perp < 0.0) throw ValidationError("physics.eps_perp", "must be >= 0");
  if (eps_a < 0.0) throw ValidationError("physics.eps_a", "must be >= 0");
  if (A < 0.0) throw ValidationError("physics.A", "must be >= 0");
  if (lambda_npp < 0.0) throw ValidationError("physics.lambda_npp", "must be >= 0");
  if (mu_phi < 0.0) throw ValidationError("physics.mu_phi", "must be >= 0");
  if (nu_el < 0.0) throw ValidationError("physics.nu_el", "must be >= 0");
  if (!(k > 0.0)) throw ValidationError("time.dt", "time step must be positive");
  if (!(T > 0.0)) throw ValidationError("time.tmax", "horizon must be positive");
  if (stabilization_on) {
    double alpha_hi = 6.0 / dim - 1.0;
    double beta_lo = 2.0 - 2.0 * dim / 3.0;
    double beta_hi = (4.0 - dim) * (4.0 - dim) / dim;
    if (!(alpha > 0.0 && alpha < alpha_hi))
      throw ValidationError("physics.alpha", "needs 0 < alpha < " + std::to_string(alpha_hi));
    if (!(beta > beta_lo && beta < beta_hi))
      throw ValidationError("physics.beta", "needs " + std::to_string(beta_lo) + " < beta < " +
                                                std::to_string(beta_hi));
  }
  if (truncation_on && !(truncation_c2 > 0.0))
    throw ValidationError("physics.truncation_c2", "must be positive");
  // admissible step size k <= C h^{d/2} with C = 1
  double bound = std::pow(h, 0.5 * dim);
  if (k > bound)
    warnings.push_back("step size k = " + std::to_string(k) + " exceeds h^(d/2) = " +
                       std::to_string(bound) + "; maximum principle only monitored");
  return warnings;
}

double PhysParams::truncation_gamma(int dim, double h) const {
  return 0.5 * truncation_c2 * std::pow(h, 0.5 * dim);
}

DiscreteState initialize_state(const TriMesh& mesh, const PhysParams& params,
                               const InitialData& init) {
  const int L = mesh.n_nodes();
  const int dim = mesh.dim();
  DiscreteState s;
  s.t = 0.0;
  s.step_index = 0;

  // director: nodal normalization with fallback at zeros
  s.d = DirectorField::zeros(L, params.director_bc);
  for (int z = 0; z < L; ++z) {
    Eigen::Vector3d dz = init.director ? init.director(mesh.node(z)) : Eigen::Vector3d(0, 0, 1);
    double norm = dz.norm();
    if (norm < 1e-14) {
      if (!init.has_fallback) throw UnnormalizableDirector(z);
      s.d.values[z] = init.director_fallback.normalized();
    } else {
      s.d.values[z] = dz / norm;
    }
  }

  // charges, clamped to [0,1]
  s.n_plus = ScalarField::zeros(L);
  s.n_minus = ScalarField::zeros(L);
  for (int z = 0; z < L; ++z) {
    double np = init.n_plus ? init.n_plus(mesh.node(z)) : 0.0;
    double nm = init.n_minus ? init.n_minus(mesh.node(z)) : 0.0;
    if (np < -1e-10 || np > 1.0 + 1e-10)
      throw ValidationError("initial.n_plus", "value " + std::to_string(np) + " outside [0,1]");
    if (nm < -1e-10 || nm > 1.0 + 1e-10)
      throw ValidationError("initial.n_minus", "value " + std::to_string(nm) + " outside [0,1]");
    s.n_plus.values[z] = std::clamp(np, 0.0, 1.0);
    s.n_minus.values[z] = std::clamp(nm, 0.0, 1.0);
  }
  double mass_p = mass_lumped_inner(mesh, s.n_plus.values, Eigen::VectorXd::Ones(L));
  double mass_m = mass_lumped_inner(mesh, s.n_minus.values, Eigen::VectorXd::Ones(L));
  double net = mass_p - mass_m;
  if (std::abs(net) > 1e-10 * mesh.total_volume()) {
    // small quadrature imbalance (mesh without mirror symmetry): rescale the
    // minority species so the discrete compatibility condition holds exactly
    if (mass_m > 0.0 && mass_p > 0.0 && std::abs(net) <= 0.01 * std::max(mass_p, mass_m)) {
      s.n_minus.values *= mass_p / mass_m;
      if (s.n_minus.values.maxCoeff() > 1.0 + 1e-10)
        throw IncompatibleCharges(net);
      s.n_minus.values = s.n_minus.values.cwiseMin(1.0);
    } else {
      throw IncompatibleCharges(net);
    }
  }

  // velocity, optionally projected onto the discretely divergence-free space
  s.v = VelocityField::zeros(L, mesh.n_elements(), dim);
  bool nonzero_v = false;
  if (init.velocity) {
    for (int z = 0; z < L; ++z) {
      if (mesh.on_boundary(z)) continue;
      Eigen::Vector3d vz = init.velocity(mesh.node(z));
      for (int c = 0; c < dim; ++c) s.v.nodal[z * dim + c] = vz[c];
      if (vz.head(dim).norm() > 0.0) nonzero_v = true;
    }
  }

  s.p = ScalarField::zeros(L, ScalarSpace::mean_zero);
  s.phi = ScalarField::zeros(L, ScalarSpace::mean_zero);

  SchemeWorkspace ws(mesh, params);
  if (nonzero_v && init.project_velocity) s.v = ws.project_divergence_free(s.v);

  // initial potential and variational derivative
  if (params.electro_active()) s.phi = ws.solve_potential(s.d, s.n_plus, s.n_minus, nullptr);
  s.q = ws.evaluate_q(s.d, s.d, s.phi, params.applied_field_at(0.0));
  return s;
}

InvariantReport check_invariants(const DiscreteState& state, const TriMesh& mesh,
                                 const PhysParams& params) {
  InvariantReport rep;
  const int L = mesh.n_nodes();
  const double vol = mesh.total_volume();

  int worst_norm_node = -1;
  for (int z = 0; z < L; ++z) {
    double dev = std::abs(state.d.values[z].norm() - 1.0);
    if (dev > rep.max_norm_violation) {
      rep.max_norm_violation = dev;
      worst_norm_node = z;
    }
  }
  if (rep.max_norm_violation > 1e-8)
    rep.violations.push_back({"director norm deviates from 1", worst_norm_node,
                              rep.max_norm_violation});

  rep.min_charge = std::min(state.n_plus.values.minCoeff(), state.n_minus.values.minCoeff());
  rep.max_charge = std::max(state.n_plus.values.maxCoeff(), state.n_minus.values.maxCoeff());

  AdmissibilityReport adm = check_mesh_admissibility(mesh);
  double a3_bound = std::pow(mesh.h_max(), 0.5 * mesh.dim());
  rep.max_principle_strict =
      params.stabilization_on && adm.admissible && params.k <= a3_bound && params.electro_active();
  if (rep.max_principle_strict) {
    if (rep.min_charge < -1e-10) {
      int node = 0;
      double worst = 0.0;
      for (int z = 0; z < L; ++z) {
        double m = std::min(state.n_plus.values[z], state.n_minus.values[z]);
        if (m < worst) {
          worst = m;
          node = z;
        }
      }
      rep.violations.push_back({"charge below 0", node, -rep.min_charge});
    }
    if (rep.max_charge > 1.0 + 1e-10) {
      int node = 0;
      double worst = 1.0;
      for (int z = 0; z < L; ++z) {
        double m = std::max(state.n_plus.values[z], state.n_minus.values[z]);
        if (m > worst) {
          worst = m;
          node = z;
        }
      }
      rep.violations.push_back({"charge above 1", node, rep.max_charge - 1.0});
    }
  }

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(L);
  rep.charge_net_mass = mass_lumped_inner(mesh, state.n_plus.values, ones) -
                        mass_lumped_inner(mesh, state.n_minus.values, ones);
  if (std::abs(rep.charge_net_mass) > 1e-10 * vol)
    rep.violations.push_back({"net charge mass nonzero", -1, std::abs(rep.charge_net_mass)});

  rep.phi_mean = mass_lumped_inner(mesh, state.phi.values, ones);
  if (std::abs(rep.phi_mean) > 1e-10 * vol)
    rep.violations.push_back({"potential mean nonzero", -1, std::abs(rep.phi_mean)});
  rep.pressure_mean = mass_lumped_inner(mesh, state.p.values, ones);

  return rep;
}

}  // namespace nematic
