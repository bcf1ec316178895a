#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nematic {

enum class ScalarSpace { free, mean_zero };
enum class DirectorBc { dirichlet, neumann };

/// P1 nodal coefficients of a scalar unknown.
struct ScalarField {
  Eigen::VectorXd values;
  ScalarSpace space = ScalarSpace::free;

  static ScalarField zeros(int n, ScalarSpace s = ScalarSpace::free) {
    return {Eigen::VectorXd::Zero(n), s};
  }
};

/// P1 nodal 3-vectors; the director always lives in R^3 regardless of the
/// spatial dimension.
struct DirectorField {
  std::vector<Eigen::Vector3d> values;
  DirectorBc bc = DirectorBc::neumann;

  static DirectorField zeros(int n, DirectorBc bc = DirectorBc::neumann) {
    return {std::vector<Eigen::Vector3d>(n, Eigen::Vector3d::Zero()), bc};
  }
};

/// MINI velocity: nodal P1 part (node-major, `dim` components per node,
/// Dirichlet rows kept at zero) plus one bubble coefficient per element.
struct VelocityField {
  Eigen::VectorXd nodal;   // size n_nodes * dim
  Eigen::VectorXd bubble;  // size n_elements * dim

  static VelocityField zeros(int n_nodes, int n_elements, int dim) {
    return {Eigen::VectorXd::Zero(n_nodes * dim), Eigen::VectorXd::Zero(n_elements * dim)};
  }
  Eigen::VectorXd node_value(int z, int dim) const { return nodal.segment(z * dim, dim); }
};

}  // namespace nematic
