#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nematic/fields.hpp"
#include "nematic/mesh.hpp"
#include "nematic/sparse.hpp"

namespace nematic {

/// Dielectric tensor eps_perp I + eps_a (P d)(P d)^T where P projects the
/// 3-vector director onto the first `dim` spatial components.
Eigen::MatrixXd epsilon_of_d(const Eigen::Vector3d& d, double eps_perp, double eps_a, int dim);

/// coeff * (eps(d) grad phi_i, grad phi_j); the per-element integral of
/// eps(d) is evaluated exactly (edge-midpoint rule in 2d, 4-point rule in 3d).
SparseMatrix assemble_stiffness_aniso(const TriMesh& mesh, const DirectorField& d, double eps_perp,
                                      double eps_a, double coeff);

/// isotropic special case, coeff * (grad phi_i, grad phi_j)
SparseMatrix assemble_isotropic_stiffness(const TriMesh& mesh, double coeff);

/// Entries -(w v phi_col, grad phi_row) for a MINI velocity, where w is an
/// optional pointwise truncation weight of the nodal field `trunc_of` (w = 1
/// when absent). Exact quadrature for the bubble-augmented integrand.
SparseMatrix assemble_convection_charge(const TriMesh& mesh, const VelocityField& v,
                                        const ScalarField* trunc_of = nullptr,
                                        double trunc_gamma = 0.0);

/// Entries sign * (w eps(d) phi_col gradPhi, grad phi_row); gradPhi is the
/// elementwise gradient of `phi` shifted by the applied field -E0.
SparseMatrix assemble_drift_charge(const TriMesh& mesh, const DirectorField& d,
                                   const ScalarField& phi, double eps_perp, double eps_a, int sign,
                                   const Eigen::Vector3d& applied_field = Eigen::Vector3d::Zero(),
                                   const ScalarField* trunc_of = nullptr, double trunc_gamma = 0.0);

/// Volume-weighted nodal average of the piecewise-constant director gradient
/// (the lumped-mass L2 projection onto continuous P1). Entry (z) is a 3 x 3
/// matrix whose first `dim` columns hold the spatial derivatives.
std::vector<Eigen::Matrix3d> lumped_l2_project_gradient(const TriMesh& mesh,
                                                        const DirectorField& d);

/// Nodal vector Laplacian: -(lumped mass)^{-1} (S field) componentwise.
/// `stiffness` must be the isotropic stiffness with unit coefficient.
std::vector<Eigen::Vector3d> discrete_laplacian(const TriMesh& mesh,
                                                const std::vector<Eigen::Vector3d>& field,
                                                const SparseMatrix& stiffness);
Eigen::VectorXd discrete_laplacian(const TriMesh& mesh, const Eigen::VectorXd& field,
                                   const SparseMatrix& stiffness);

/// sum_z m_z f(z) g(z)
double mass_lumped_inner(const TriMesh& mesh, const Eigen::VectorXd& f, const Eigen::VectorXd& g);
double mass_lumped_inner(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& f,
                         const std::vector<Eigen::Vector3d>& g);

/// elementwise gradient of a P1 scalar field
std::vector<Eigen::Vector3d> element_gradients(const TriMesh& mesh, const Eigen::VectorXd& field);

/// MINI velocity evaluated at a barycentric point of element e
Eigen::Vector3d velocity_at(const TriMesh& mesh, const VelocityField& v, int e,
                            const std::array<double, 4>& bary);
/// spatial gradient (dim x dim, row = component) of a MINI velocity at a
/// barycentric point of element e
Eigen::Matrix3d velocity_gradient_at(const TriMesh& mesh, const VelocityField& v, int e,
                                     const std::array<double, 4>& bary);

/// bubble value at a barycentric point ((d+1)^(d+1) prod lambda)
double bubble_value(int dim, const std::array<double, 4>& bary);
Eigen::Vector3d bubble_gradient(const TriMesh& mesh, int e, const std::array<double, 4>& bary);

/// consistent L2 and H1 products of MINI velocities (exact closed forms)
double mini_mass_product(const TriMesh& mesh, const VelocityField& a, const VelocityField& b);
double mini_grad_product(const TriMesh& mesh, const VelocityField& a, const VelocityField& b);

/// sum_K |K| |grad d|_F^2
double director_grad_sq(const TriMesh& mesh, const DirectorField& d);

/// int |grad f|^2_{eps(d)} for a P1 scalar f
double eps_weighted_grad_sq(const TriMesh& mesh, const DirectorField& d,
                            const Eigen::VectorXd& f, double eps_perp, double eps_a);

}  // namespace nematic
