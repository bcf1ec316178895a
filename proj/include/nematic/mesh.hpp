#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace nematic {

enum class MeshPattern { crisscross, union_jack, tet_split };

MeshPattern parse_mesh_pattern(const std::string& name);
std::string mesh_pattern_name(MeshPattern p);

struct Box {
  Eigen::Vector3d lo = Eigen::Vector3d(-0.5, -0.5, -0.5);
  Eigen::Vector3d hi = Eigen::Vector3d(0.5, 0.5, 0.5);
};

struct AdmissibilityReport {
  int dim = 0;
  // dim == 2: opposite-angle sums over interior edges
  double max_opposite_angle_sum = 0.0;
  // dim == 3: dihedral angles
  double max_dihedral_angle = 0.0;
  double theta_margin = 0.0;  // pi - max sum (2d), pi/2 - max dihedral (3d)
  bool strongly_acute = false;
  bool delaunay = false;  // dim 2 only
  bool borderline = false;
  // algebraic surrogate: off-diagonals of the isotropic stiffness matrix
  double max_stiffness_offdiag = 0.0;
  bool algebraic_ok = false;
  bool admissible = false;
  std::string summary() const;
};

/// Conforming simplicial mesh of a box with per-element P1 geometry and
/// nodal lumped masses precomputed.
class TriMesh {
 public:
  static TriMesh structured(int n_per_side, const Box& box, MeshPattern pattern, int dim);
  static TriMesh from_arrays(int dim, std::vector<Eigen::Vector3d> nodes,
                             std::vector<std::array<int, 4>> elements);

  int dim() const { return dim_; }
  int n_nodes() const { return static_cast<int>(nodes_.size()); }
  int n_elements() const { return static_cast<int>(elements_.size()); }
  int nodes_per_element() const { return dim_ + 1; }

  const Eigen::Vector3d& node(int i) const { return nodes_[i]; }
  const std::vector<Eigen::Vector3d>& nodes() const { return nodes_; }
  const std::array<int, 4>& element(int e) const { return elements_[e]; }
  double volume(int e) const { return volume_[e]; }
  /// constant gradient of local basis function `i` on element `e`
  const Eigen::Vector3d& grad(int e, int i) const { return grad_[e][i]; }
  const Eigen::VectorXd& lumped_mass() const { return lumped_mass_; }
  bool on_boundary(int node) const { return boundary_flag_[node] != 0; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }

  double total_volume() const { return total_volume_; }
  double h_max() const { return h_max_; }
  double min_inradius() const { return min_inradius_; }
  double quasi_uniformity_ratio() const { return h_max_ / min_inradius_; }

  /// elements incident to each node, in ascending element order
  const std::vector<std::vector<int>>& node_elements() const { return node_elements_; }
  /// node adjacency (sorted, no self), shared with assembly sparsity
  const std::vector<std::vector<int>>& node_neighbors() const { return node_neighbors_; }

 private:
  TriMesh() = default;
  void finalize();

  int dim_ = 0;
  std::vector<Eigen::Vector3d> nodes_;
  std::vector<std::array<int, 4>> elements_;
  std::vector<double> volume_;
  std::vector<std::array<Eigen::Vector3d, 4>> grad_;
  Eigen::VectorXd lumped_mass_;
  std::vector<char> boundary_flag_;
  std::vector<int> boundary_nodes_;
  std::vector<std::vector<int>> node_elements_;
  std::vector<std::vector<int>> node_neighbors_;
  double total_volume_ = 0.0;
  double h_max_ = 0.0;
  double min_inradius_ = 0.0;
};

AdmissibilityReport check_mesh_admissibility(const TriMesh& mesh);

/// m_z = sum_{K : z in K} |K| / (d+1); recomputed from scratch
Eigen::VectorXd lumped_masses(const TriMesh& mesh);

}  // namespace nematic
