#include "nematic/assembly.hpp"

#include <cmath>
#include <stdexcept>

#include "nematic/quadrature.hpp"
#include "nematic/scheme.hpp"

namespace nematic {

Eigen::MatrixXd epsilon_of_d(const Eigen::Vector3d& d, double eps_perp, double eps_a, int dim) {
  Eigen::VectorXd pd = d.head(dim);
  Eigen::MatrixXd eps = eps_perp * Eigen::MatrixXd::Identity(dim, dim);
  eps += eps_a * pd * pd.transpose();
  return eps;
}

namespace {

inline Eigen::Vector3d bary_point(const TriMesh& mesh, int e, const std::array<double, 4>& b) {
  const auto& el = mesh.element(e);
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  for (int a = 0; a <= mesh.dim(); ++a) x += b[a] * mesh.node(el[a]);
  return x;
}

inline Eigen::Matrix3d eps3(const Eigen::Vector3d& d, double eps_perp, double eps_a, int dim) {
  Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
  Eigen::Vector3d pd = Eigen::Vector3d::Zero();
  pd.head(dim) = d.head(dim);
  for (int c = 0; c < dim; ++c) e(c, c) = eps_perp;
  e += eps_a * pd * pd.transpose();
  return e;
}

}  // namespace

double bubble_value(int dim, const std::array<double, 4>& b) {
  double scale = dim == 2 ? 27.0 : 256.0;
  double v = scale;
  for (int a = 0; a <= dim; ++a) v *= b[a];
  return v;
}

Eigen::Vector3d bubble_gradient(const TriMesh& mesh, int e, const std::array<double, 4>& b) {
  const int d = mesh.dim();
  double scale = d == 2 ? 27.0 : 256.0;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  for (int i = 0; i <= d; ++i) {
    double prod = scale;
    for (int j = 0; j <= d; ++j)
      if (j != i) prod *= b[j];
    g += prod * mesh.grad(e, i);
  }
  return g;
}

Eigen::Vector3d velocity_at(const TriMesh& mesh, const VelocityField& v, int e,
                            const std::array<double, 4>& b) {
  const int d = mesh.dim();
  const auto& el = mesh.element(e);
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  for (int a = 0; a <= d; ++a)
    for (int c = 0; c < d; ++c) out[c] += b[a] * v.nodal[el[a] * d + c];
  double bub = bubble_value(d, b);
  for (int c = 0; c < d; ++c) out[c] += bub * v.bubble[e * d + c];
  return out;
}

Eigen::Matrix3d velocity_gradient_at(const TriMesh& mesh, const VelocityField& v, int e,
                                     const std::array<double, 4>& b) {
  const int d = mesh.dim();
  const auto& el = mesh.element(e);
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();  // g(c, k) = d v_c / d x_k
  for (int a = 0; a <= d; ++a)
    for (int c = 0; c < d; ++c) g.row(c) += v.nodal[el[a] * d + c] * mesh.grad(e, a).transpose();
  Eigen::Vector3d gb = bubble_gradient(mesh, e, b);
  for (int c = 0; c < d; ++c) g.row(c) += v.bubble[e * d + c] * gb.transpose();
  return g;
}

SparseMatrix assemble_stiffness_aniso(const TriMesh& mesh, const DirectorField& d, double eps_perp,
                                      double eps_a, double coeff) {
  const int dim = mesh.dim();
  const QuadRule& rule = simplex_quadrature(dim, 2);
  CsrBuilder builder(mesh.n_nodes(), mesh.n_nodes());
  builder.reserve(static_cast<std::size_t>(mesh.n_elements()) * (dim + 1) * (dim + 1));
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    // exact element average of eps(d) for P1 d
    Eigen::Matrix3d eps_bar = Eigen::Matrix3d::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Eigen::Vector3d dq = Eigen::Vector3d::Zero();
      for (int a = 0; a <= dim; ++a) dq += rule.bary[q][a] * d.values[el[a]];
      eps_bar += rule.weights[q] * eps3(dq, eps_perp, eps_a, dim);
    }
    eps_bar *= mesh.volume(e);
    for (int a = 0; a <= dim; ++a)
      for (int b = 0; b <= dim; ++b) {
        double v = coeff * mesh.grad(e, a).dot(eps_bar * mesh.grad(e, b));
        builder.add(el[a], el[b], v);
      }
  }
  return builder.build();
}

SparseMatrix assemble_isotropic_stiffness(const TriMesh& mesh, double coeff) {
  const int dim = mesh.dim();
  CsrBuilder builder(mesh.n_nodes(), mesh.n_nodes());
  builder.reserve(static_cast<std::size_t>(mesh.n_elements()) * (dim + 1) * (dim + 1));
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    for (int a = 0; a <= dim; ++a)
      for (int b = 0; b <= dim; ++b)
        builder.add(el[a], el[b], coeff * mesh.volume(e) * mesh.grad(e, a).dot(mesh.grad(e, b)));
  }
  return builder.build();
}

SparseMatrix assemble_convection_charge(const TriMesh& mesh, const VelocityField& v,
                                        const ScalarField* trunc_of, double trunc_gamma) {
  const int dim = mesh.dim();
  // bubble degree + P1 trial
  const QuadRule& rule = simplex_quadrature(dim, dim + 2);
  CsrBuilder builder(mesh.n_nodes(), mesh.n_nodes());
  builder.reserve(static_cast<std::size_t>(mesh.n_elements()) * (dim + 1) * (dim + 1));
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Eigen::Vector3d vq = velocity_at(mesh, v, e, rule.bary[q]);
      double weight = rule.weights[q] * mesh.volume(e);
      if (trunc_of) {
        double nq = 0.0;
        for (int a = 0; a <= dim; ++a) nq += rule.bary[q][a] * trunc_of->values[el[a]];
        weight *= truncation_phi_gamma(std::abs(nq), trunc_gamma);
      }
      for (int row = 0; row <= dim; ++row) {
        double vdotg = vq.dot(mesh.grad(e, row));
        for (int col = 0; col <= dim; ++col)
          builder.add(el[row], el[col], -weight * rule.bary[q][col] * vdotg);
      }
    }
  }
  return builder.build();
}

SparseMatrix assemble_drift_charge(const TriMesh& mesh, const DirectorField& d,
                                   const ScalarField& phi, double eps_perp, double eps_a, int sign,
                                   const Eigen::Vector3d& applied_field,
                                   const ScalarField* trunc_of, double trunc_gamma) {
  const int dim = mesh.dim();
  const QuadRule& rule = simplex_quadrature(dim, 4);
  std::vector<Eigen::Vector3d> grad_phi = element_gradients(mesh, phi.values);
  CsrBuilder builder(mesh.n_nodes(), mesh.n_nodes());
  builder.reserve(static_cast<std::size_t>(mesh.n_elements()) * (dim + 1) * (dim + 1));
  const double s = sign >= 0 ? 1.0 : -1.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    Eigen::Vector3d gphi = grad_phi[e] - applied_field;
    if (dim == 2) gphi[2] = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Eigen::Vector3d dq = Eigen::Vector3d::Zero();
      for (int a = 0; a <= dim; ++a) dq += rule.bary[q][a] * d.values[el[a]];
      Eigen::Vector3d flux = eps3(dq, eps_perp, eps_a, dim) * gphi;
      double weight = rule.weights[q] * mesh.volume(e);
      if (trunc_of) {
        double nq = 0.0;
        for (int a = 0; a <= dim; ++a) nq += rule.bary[q][a] * trunc_of->values[el[a]];
        weight *= truncation_phi_gamma(std::abs(nq), trunc_gamma);
      }
      for (int row = 0; row <= dim; ++row) {
        double fdotg = flux.dot(mesh.grad(e, row));
        for (int col = 0; col <= dim; ++col)
          builder.add(el[row], el[col], s * weight * rule.bary[q][col] * fdotg);
      }
    }
  }
  return builder.build();
}

std::vector<Eigen::Matrix3d> lumped_l2_project_gradient(const TriMesh& mesh,
                                                        const DirectorField& d) {
  const int dim = mesh.dim();
  std::vector<Eigen::Matrix3d> out(mesh.n_nodes(), Eigen::Matrix3d::Zero());
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();  // g(c, k) = d d_c / d x_k
    for (int a = 0; a <= dim; ++a) g += d.values[el[a]] * mesh.grad(e, a).transpose();
    for (int a = 0; a <= dim; ++a) {
      out[el[a]] += mesh.volume(e) * g;
      wsum[el[a]] += mesh.volume(e);
    }
  }
  for (int z = 0; z < mesh.n_nodes(); ++z) out[z] /= wsum[z];
  return out;
}

std::vector<Eigen::Vector3d> discrete_laplacian(const TriMesh& mesh,
                                                const std::vector<Eigen::Vector3d>& field,
                                                const SparseMatrix& S) {
  std::vector<Eigen::Vector3d> out(mesh.n_nodes(), Eigen::Vector3d::Zero());
  const auto& m = mesh.lumped_mass();
  for (int i = 0; i < S.n_rows(); ++i) {
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    for (int k = S.row_begin(i); k < S.row_end(i); ++k) s += S.value(k) * field[S.col(k)];
    out[i] = -s / m[i];
  }
  return out;
}

Eigen::VectorXd discrete_laplacian(const TriMesh& mesh, const Eigen::VectorXd& field,
                                   const SparseMatrix& S) {
  Eigen::VectorXd out = S.apply(field);
  out.array() /= -mesh.lumped_mass().array();
  return out;
}

double mass_lumped_inner(const TriMesh& mesh, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
  if (f.size() != g.size() || f.size() != mesh.n_nodes())
    throw std::invalid_argument("mass_lumped_inner: dimension mismatch");
  return (mesh.lumped_mass().array() * f.array() * g.array()).sum();
}

double mass_lumped_inner(const TriMesh& mesh, const std::vector<Eigen::Vector3d>& f,
                         const std::vector<Eigen::Vector3d>& g) {
  if (f.size() != g.size() || static_cast<int>(f.size()) != mesh.n_nodes())
    throw std::invalid_argument("mass_lumped_inner: dimension mismatch");
  double s = 0.0;
  for (int z = 0; z < mesh.n_nodes(); ++z) s += mesh.lumped_mass()[z] * f[z].dot(g[z]);
  return s;
}

std::vector<Eigen::Vector3d> element_gradients(const TriMesh& mesh, const Eigen::VectorXd& field) {
  std::vector<Eigen::Vector3d> g(mesh.n_elements(), Eigen::Vector3d::Zero());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    for (int a = 0; a <= mesh.dim(); ++a) g[e] += field[el[a]] * mesh.grad(e, a);
  }
  return g;
}

double mini_mass_product(const TriMesh& mesh, const VelocityField& a, const VelocityField& b) {
  const int dim = mesh.dim();
  const double norm = dim == 2 ? 27.0 : 256.0;
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    double vol = mesh.volume(e);
    std::array<int, 4> exp_bb{}, exp_pb{};
    for (int i = 0; i <= dim; ++i) {
      exp_bb[i] = 2;
      exp_pb[i] = 1;
    }
    exp_pb[0] = 2;
    double m_bb = norm * norm * integrate_barycentric_monomial(dim, exp_bb, vol);
    double m_pb = norm * integrate_barycentric_monomial(dim, exp_pb, vol);
    for (int c = 0; c < dim; ++c) {
      double sum_a = 0.0, sum_b = 0.0;
      for (int i = 0; i <= dim; ++i) {
        sum_a += a.nodal[el[i] * dim + c];
        sum_b += b.nodal[el[i] * dim + c];
      }
      for (int i = 0; i <= dim; ++i)
        for (int j = 0; j <= dim; ++j)
          total += vol * (i == j ? 2.0 : 1.0) / ((dim + 1) * (dim + 2)) *
                   a.nodal[el[i] * dim + c] * b.nodal[el[j] * dim + c];
      double ba = a.bubble[e * dim + c], bb = b.bubble[e * dim + c];
      total += m_pb * (sum_a * bb + sum_b * ba) + m_bb * ba * bb;
    }
  }
  return total;
}

double mini_grad_product(const TriMesh& mesh, const VelocityField& a, const VelocityField& b) {
  const int dim = mesh.dim();
  const double norm = dim == 2 ? 27.0 : 256.0;
  const double cbb = dim == 2 ? 1.0 / 180.0 : 1.0 / 15120.0;
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    double vol = mesh.volume(e);
    double sum_g2 = 0.0;
    for (int i = 0; i <= dim; ++i) sum_g2 += mesh.grad(e, i).squaredNorm();
    double s_bb = norm * norm * vol * sum_g2 * cbb;
    for (int c = 0; c < dim; ++c) {
      for (int i = 0; i <= dim; ++i)
        for (int j = 0; j <= dim; ++j)
          total += vol * mesh.grad(e, i).dot(mesh.grad(e, j)) * a.nodal[el[i] * dim + c] *
                   b.nodal[el[j] * dim + c];
      total += s_bb * a.bubble[e * dim + c] * b.bubble[e * dim + c];
    }
  }
  return total;
}

double director_grad_sq(const TriMesh& mesh, const DirectorField& d) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
    for (int a = 0; a <= mesh.dim(); ++a) g += d.values[el[a]] * mesh.grad(e, a).transpose();
    total += mesh.volume(e) * g.squaredNorm();
  }
  return total;
}

double eps_weighted_grad_sq(const TriMesh& mesh, const DirectorField& d, const Eigen::VectorXd& f,
                            double eps_perp, double eps_a) {
  const int dim = mesh.dim();
  const QuadRule& rule = simplex_quadrature(dim, 2);
  std::vector<Eigen::Vector3d> gf = element_gradients(mesh, f);
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto& el = mesh.element(e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Eigen::Vector3d dq = Eigen::Vector3d::Zero();
      for (int a = 0; a <= dim; ++a) dq += rule.bary[q][a] * d.values[el[a]];
      total += rule.weights[q] * mesh.volume(e) * gf[e].dot(eps3(dq, eps_perp, eps_a, dim) * gf[e]);
    }
  }
  return total;
}

}  // namespace nematic
