#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nematic/fields.hpp"
#include "nematic/mesh.hpp"
#include "nematic/solvers.hpp"
#include "nematic/state.hpp"

namespace nematic {

enum class SubSolve { potential, charges, director, velocity };

struct FixedPointConfig {
  double tol_fp = 1e-9;       // joint l-infinity increment
  int max_outer_iters = 200;
  double newton_tol = 1e-12;  // l-infinity of the nodal director residual
  int newton_max_iters = 30;
  double linear_tol = 1e-14;      // relative, all Krylov solves
  double divergence_tol = 1e-13;  // absolute, velocity constraint
  std::vector<SubSolve> ordering = {SubSolve::potential, SubSolve::charges, SubSolve::director,
                                    SubSolve::velocity};
  void validate() const;
};

/// Smooth non-increasing cutoff: 1 on [0, 1/gamma], 0 on [2/gamma, inf),
/// C^1 cubic blend in between. gamma <= 0 disables the cutoff.
double truncation_phi_gamma(double s, double gamma);

/// Per-run caches: constant matrices of the MINI saddle system (with the
/// bubble statically condensed), the isotropic stiffness, and the director
/// coupling operator. Immutable mesh/params references must outlive it.
class SchemeWorkspace {
 public:
  SchemeWorkspace(const TriMesh& mesh, const PhysParams& params);
  ~SchemeWorkspace();

  std::pair<DiscreteState, StepCertificate> step(const DiscreteState& prev,
                                                 const FixedPointConfig& fp);

  ScalarField solve_potential(const DirectorField& d, const ScalarField& n_plus,
                              const ScalarField& n_minus, const ScalarField* warm_start);
  std::pair<DirectorField, std::vector<Eigen::Vector3d>> solve_director(
      const DirectorField& d_prev, const VelocityField& v, const ScalarField& phi,
      const Eigen::Vector3d& applied_field, const FixedPointConfig& fp);
  /// nodal elimination of the variational derivative from the midpoint field
  std::vector<Eigen::Vector3d> evaluate_q(const DirectorField& d_prev, const DirectorField& d_new,
                                          const ScalarField& phi,
                                          const Eigen::Vector3d& applied_field) const;
  VelocityField project_divergence_free(const VelocityField& v);

  const SparseMatrix& isotropic_stiffness() const;
  const TriMesh& mesh() const;
  const PhysParams& params() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// One time step (convenience wrapper; run() reuses one workspace).
std::pair<DiscreteState, StepCertificate> step(const DiscreteState& prev, const TriMesh& mesh,
                                               const PhysParams& params,
                                               const FixedPointConfig& fp);

/// Midpoint-implicit director solve for given velocity and potential.
/// Returns the new director and the eliminated variational derivative.
std::pair<DirectorField, std::vector<Eigen::Vector3d>> director_newton(
    const DirectorField& d_prev, const VelocityField& v, const ScalarField& phi,
    const TriMesh& mesh, const PhysParams& params, const FixedPointConfig& fp,
    const Eigen::Vector3d& applied_field = Eigen::Vector3d::Zero());

struct Trajectory {
  std::vector<DiscreteState> states;            // states[0] is the initial state
  std::vector<StepCertificate> certificates;    // one per completed step
  std::optional<std::string> error;             // set when a step aborted the run
};

using StepObserver = std::function<void(const DiscreteState&, const StepCertificate&)>;

/// n_steps sequential steps from freshly initialized data. On a step failure
/// the partial trajectory is returned with `error` set.
Trajectory run(const TriMesh& mesh, const PhysParams& params, const FixedPointConfig& fp,
               const InitialData& init, int n_steps, const StepObserver& on_step = {},
               bool keep_states = true);

}  // namespace nematic
