#pragma once

#include <string>
#include <vector>

#include "nematic/mesh.hpp"
#include "nematic/scheme.hpp"
#include "nematic/state.hpp"

namespace nematic {

enum class DirectorInit { constant, defect_pair };
enum class ChargeInit { constant, gaussian_dipole };
enum class VelocityInit { zero, rotation };
enum class AppliedFieldMode { none, constant, cosine };

/// Fully resolved run description; round-trips through the key=value format.
struct ExperimentConfig {
  std::string experiment = "custom";

  // mesh
  int dim = 2;
  int n = 16;
  MeshPattern pattern = MeshPattern::crisscross;
  Eigen::Vector3d box_min = Eigen::Vector3d(-0.5, -0.5, -0.5);
  Eigen::Vector3d box_max = Eigen::Vector3d(0.5, 0.5, 0.5);

  // physics (defaults as in the experiment section)
  double nu = 1.0;
  double A = 0.01;
  double eps_perp = 0.1;
  double eps_a = 10.0;
  double lambda_npp = 1.0;
  double mu_phi = 0.25;
  double nu_el = 1.0;
  double alpha = -1.0;  // < 0 means dimension default (1.0 in 2d, 0.5 in 3d)
  double beta = -1.0;   // < 0 means dimension default (1.0 in 2d, 0.25 in 3d)
  bool stabilization = false;
  bool truncation = false;
  double truncation_c2 = 1.0;
  std::string director_bc = "neumann";

  AppliedFieldMode field_mode = AppliedFieldMode::none;
  Eigen::Vector3d field_amplitude = Eigen::Vector3d::Zero();
  double field_frequency = 0.0;  // cosine mode: E0(t) = amplitude * cos(freq pi t)

  // initial data
  DirectorInit d0_mode = DirectorInit::constant;
  Eigen::Vector3d d0_value = Eigen::Vector3d(0, 0, 1);
  ChargeInit n0_mode = ChargeInit::constant;
  double n0_value = 0.0;
  double n0_width = 25.0;        // gaussian exponent
  double n0_offset = 0.2;        // dipole centers at (+-offset, 0, 0)
  VelocityInit v0_mode = VelocityInit::zero;
  double v0_scale = 0.0;

  bool freeze_velocity = false;
  bool freeze_director = false;
  bool freeze_charges = false;
  bool freeze_potential = false;

  // time
  double dt = 5e-4;
  double tmax = 0.1;

  // fixed point
  double fp_tol = 1e-9;
  int fp_max_iters = 200;
  double newton_tol = 1e-12;
  int newton_max_iters = 30;
  double linear_tol = 1e-14;
  double divergence_tol = 1e-13;

  // output
  std::string out_dir = "out";
  int vtk_every = 0;  // 0 disables snapshots
  bool certify = true;

  Box box() const;
  PhysParams phys_params() const;
  FixedPointConfig fixed_point() const;
  InitialData initial_data() const;
  int n_steps() const;
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(std::istream& in);
void save_config(const ExperimentConfig& cfg, const std::string& path);
std::string config_to_string(const ExperimentConfig& cfg);

/// Presets of the published experiments (see README for the table).
ExperimentConfig experiment_catalogue(const std::string& name);
std::vector<std::string> experiment_names();

}  // namespace nematic
