#include "nematic/scheme.hpp"

#include <cmath>

#include "nematic/assembly.hpp"
#include "nematic/certificates.hpp"
#include "nematic/errors.hpp"
#include "nematic/quadrature.hpp"

namespace nematic {

void FixedPointConfig::validate() const {
  if (!(tol_fp > 0.0)) throw ValidationError("fixed_point.tol", "must be positive");
  if (!(newton_tol > 0.0)) throw ValidationError("fixed_point.newton_tol", "must be positive");
  if (!(linear_tol > 0.0)) throw ValidationError("fixed_point.linear_tol", "must be positive");
  if (max_outer_iters < 1) throw ValidationError("fixed_point.max_iters", "must be >= 1");
  if (newton_max_iters < 1) throw ValidationError("fixed_point.newton_max_iters", "must be >= 1");
  if (ordering.size() != 4) throw ValidationError("fixed_point.ordering", "needs all four sub-solves");
}

double truncation_phi_gamma(double s, double gamma) {
  if (gamma <= 0.0) return 1.0;
  double t = gamma * s;
  if (t <= 1.0) return 1.0;
  if (t >= 2.0) return 0.0;
  double u = t - 1.0;
  return 1.0 - 3.0 * u * u + 2.0 * u * u * u;
}

namespace {

inline Eigen::Vector3d pad3(const Eigen::Vector3d& v, int dim) {
  Eigen::Vector3d out = v;
  if (dim == 2) out[2] = 0.0;
  return out;
}

}  // namespace

struct SchemeWorkspace::Impl {
  const TriMesh& mesh;
  PhysParams params;
  int dim;
  int L;  // nodes
  int E;  // elements
  int nv; // velocity dofs (nodal part)

  SparseMatrix S_iso;          // isotropic stiffness, coeff 1
  SparseMatrix W_director;     // A * S (+ h^beta S M^-1 S), the q operator
  double h_alpha = 0.0;        // h^alpha (0 when stabilization off)
  double h_beta = 0.0;

  // per-element MINI constants
  Eigen::VectorXd a_bb;     // bubble diagonal of the momentum matrix
  Eigen::VectorXd m_pb;     // vertex-bubble mass entry (same for every vertex)
  Eigen::VectorXd m_bb;     // bubble-bubble mass
  Eigen::VectorXd int_b;    // \int_K b

  SparseMatrix A_hat;       // condensed momentum matrix (SPD, Dirichlet rows = identity)
  SparseMatrix B_tilde;     // condensed divergence coupling (L x nv)
  SparseMatrix C_stab;      // pressure stabilization from the condensation
  std::unique_ptr<Ic0> A_hat_ic0;

  // projection onto the discretely divergence-free space (mass-only blocks)
  SparseMatrix A_proj, B_proj, C_proj;
  Eigen::VectorXd aproj_bb;
  bool have_projection = false;

  std::vector<char> dirichlet_dof;  // velocity dofs on the boundary

  Impl(const TriMesh& mesh_, const PhysParams& params_) : mesh(mesh_), params(params_) {
    dim = mesh.dim();
    L = mesh.n_nodes();
    E = mesh.n_elements();
    nv = L * dim;
    params.validate(dim, mesh.h_max());

    S_iso = assemble_isotropic_stiffness(mesh, 1.0);

    if (params.stabilization_on) {
      h_alpha = std::pow(mesh.h_max(), params.alpha);
      h_beta = std::pow(mesh.h_max(), params.beta);
    }

    W_director = S_iso;
    W_director.scale(params.A);
    if (h_beta > 0.0) {
      Eigen::VectorXd inv_m = mesh.lumped_mass().cwiseInverse();
      SparseMatrix SMS = S_iso.multiply(S_iso.row_scaled(inv_m));
      W_director = W_director.add_scaled(SMS, h_beta);
    }

    dirichlet_dof.assign(nv, 0);
    for (int z = 0; z < L; ++z)
      if (mesh.on_boundary(z))
        for (int c = 0; c < dim; ++c) dirichlet_dof[z * dim + c] = 1;

    build_mini_blocks();
  }

  double mass_pp(int e, int a, int b) const {
    double vol = mesh.volume(e);
    return vol * (a == b ? 2.0 : 1.0) / ((dim + 1) * (dim + 2));
  }

  void build_mini_blocks() {
    a_bb.resize(E);
    m_pb.resize(E);
    m_bb.resize(E);
    int_b.resize(E);
    const double norm = dim == 2 ? 27.0 : 256.0;
    const double k = params.k;
    const double visc = params.nu + h_alpha / k;

    for (int e = 0; e < E; ++e) {
      double vol = mesh.volume(e);
      std::array<int, 4> exp_b{}, exp_bb{}, exp_pb{};
      for (int a = 0; a <= dim; ++a) {
        exp_b[a] = 1;
        exp_bb[a] = 2;
        exp_pb[a] = 1;
      }
      exp_pb[0] = 2;
      int_b[e] = norm * integrate_barycentric_monomial(dim, exp_b, vol);
      m_bb[e] = norm * norm * integrate_barycentric_monomial(dim, exp_bb, vol);
      m_pb[e] = norm * integrate_barycentric_monomial(dim, exp_pb, vol);
      double sum_g2 = 0.0;
      for (int a = 0; a <= dim; ++a) sum_g2 += mesh.grad(e, a).squaredNorm();
      double s_bb = norm * norm * vol * sum_g2 * (dim == 2 ? 1.0 / 180.0 : 1.0 / 15120.0);
      a_bb[e] = m_bb[e] / k + visc * s_bb;
    }

    CsrBuilder ab(nv, nv);
    CsrBuilder bb(L, nv);
    CsrBuilder cb(L, L);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      double vol = mesh.volume(e);
      double cond = (m_pb[e] / k) * (m_pb[e] / k) / a_bb[e];
      double c_e = int_b[e] * int_b[e] / a_bb[e];
      for (int a = 0; a <= dim; ++a) {
        for (int b = 0; b <= dim; ++b) {
          double s_ab = vol * mesh.grad(e, a).dot(mesh.grad(e, b));
          double val = mass_pp(e, a, b) / k + visc * s_ab - cond;
          for (int c = 0; c < dim; ++c) {
            int ia = el[a] * dim + c, ib = el[b] * dim + c;
            if (!dirichlet_dof[ia] && !dirichlet_dof[ib]) ab.add(ia, ib, val);
          }
          // divergence coupling: rows are pressure nodes (a), columns velocity
          for (int c = 0; c < dim; ++c) {
            int ib = el[b] * dim + c;
            if (dirichlet_dof[ib]) continue;
            double v = mesh.grad(e, b)[c] * vol / (dim + 1) +
                       int_b[e] * (m_pb[e] / (k * a_bb[e])) * mesh.grad(e, a)[c];
            bb.add(el[a], ib, v);
          }
          cb.add(el[a], el[b],
                 c_e * mesh.grad(e, a).head(3).dot(mesh.grad(e, b).head(3)));
        }
      }
    }
    for (int i = 0; i < nv; ++i)
      if (dirichlet_dof[i]) ab.add(i, i, 1.0);
    A_hat = ab.build();
    B_tilde = bb.build();
    C_stab = cb.build();
    A_hat_ic0 = std::make_unique<Ic0>(A_hat);
  }

  void build_projection_blocks() {
    if (have_projection) return;
    aproj_bb = m_bb;
    CsrBuilder ab(nv, nv);
    CsrBuilder bb(L, nv);
    CsrBuilder cb(L, L);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      double vol = mesh.volume(e);
      double cond = m_pb[e] * m_pb[e] / m_bb[e];
      double c_e = int_b[e] * int_b[e] / m_bb[e];
      for (int a = 0; a <= dim; ++a)
        for (int b = 0; b <= dim; ++b) {
          double val = mass_pp(e, a, b) - cond;
          for (int c = 0; c < dim; ++c) {
            int ia = el[a] * dim + c, ib = el[b] * dim + c;
            if (!dirichlet_dof[ia] && !dirichlet_dof[ib]) ab.add(ia, ib, val);
          }
          for (int c = 0; c < dim; ++c) {
            int ib = el[b] * dim + c;
            if (dirichlet_dof[ib]) continue;
            double v = mesh.grad(e, b)[c] * vol / (dim + 1) +
                       int_b[e] * (m_pb[e] / m_bb[e]) * mesh.grad(e, a)[c];
            bb.add(el[a], ib, v);
          }
          cb.add(el[a], el[b], c_e * mesh.grad(e, a).dot(mesh.grad(e, b)));
        }
    }
    for (int i = 0; i < nv; ++i)
      if (dirichlet_dof[i]) ab.add(i, i, 1.0);
    A_proj = ab.build();
    B_proj = bb.build();
    C_proj = cb.build();
    have_projection = true;
  }

  // ---- right-hand sides -------------------------------------------------

  /// consistent MINI mass applied to (nodal, bubble), node rows only
  void apply_mass(const VelocityField& v, Eigen::VectorXd& out_p, Eigen::VectorXd& out_b) const {
    out_p.setZero(nv);
    out_b.setZero(E * dim);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      for (int c = 0; c < dim; ++c) {
        double sum_nodal = 0.0;
        for (int a = 0; a <= dim; ++a) sum_nodal += v.nodal[el[a] * dim + c];
        for (int a = 0; a <= dim; ++a) {
          double s = 0.0;
          for (int b = 0; b <= dim; ++b) s += mass_pp(e, a, b) * v.nodal[el[b] * dim + c];
          out_p[el[a] * dim + c] += s + m_pb[e] * v.bubble[e * dim + c];
        }
        out_b[e * dim + c] += m_pb[e] * sum_nodal + m_bb[e] * v.bubble[e * dim + c];
      }
    }
  }

  /// P1 stiffness applied to the nodal part (bubble block is diagonal)
  void apply_grad_grad(const VelocityField& v, Eigen::VectorXd& out_p,
                       Eigen::VectorXd& out_b) const {
    out_p.setZero(nv);
    out_b.setZero(E * dim);
    const double norm = dim == 2 ? 27.0 : 256.0;
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      double vol = mesh.volume(e);
      double sum_g2 = 0.0;
      for (int a = 0; a <= dim; ++a) sum_g2 += mesh.grad(e, a).squaredNorm();
      double s_bb = norm * norm * vol * sum_g2 * (dim == 2 ? 1.0 / 180.0 : 1.0 / 15120.0);
      for (int c = 0; c < dim; ++c) {
        for (int a = 0; a <= dim; ++a) {
          double s = 0.0;
          for (int b = 0; b <= dim; ++b)
            s += vol * mesh.grad(e, a).dot(mesh.grad(e, b)) * v.nodal[el[b] * dim + c];
          out_p[el[a] * dim + c] += s;
        }
        out_b[e * dim + c] += s_bb * v.bubble[e * dim + c];
      }
    }
  }

  /// skew-symmetrized transport  1/2 [((u.grad)w, a) - ((u.grad)a, w)]
  void add_convection(const VelocityField& u, const VelocityField& w, double coeff,
                      Eigen::VectorXd& out_p, Eigen::VectorXd& out_b) const {
    const QuadRule& rule = simplex_quadrature(dim, dim == 2 ? 6 : 4);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& bq = rule.bary[q];
        double wgt = coeff * rule.weights[q] * mesh.volume(e);
        Eigen::Vector3d uq = velocity_at(mesh, u, e, bq);
        Eigen::Vector3d wq = velocity_at(mesh, w, e, bq);
        Eigen::Matrix3d gw = velocity_gradient_at(mesh, w, e, bq);
        Eigen::Vector3d conv = gw * uq;  // (u . grad) w
        Eigen::Vector3d gb = bubble_gradient(mesh, e, bq);
        double bubble = bubble_value(dim, bq);
        double u_dot_gb = uq.dot(gb);
        for (int a = 0; a <= dim; ++a) {
          double phi = bq[a];
          double u_dot_gphi = uq.dot(mesh.grad(e, a));
          for (int c = 0; c < dim; ++c)
            out_p[el[a] * dim + c] += 0.5 * wgt * (conv[c] * phi - u_dot_gphi * wq[c]);
        }
        for (int c = 0; c < dim; ++c)
          out_b[e * dim + c] += 0.5 * wgt * (conv[c] * bubble - u_dot_gb * wq[c]);
      }
    }
  }

  /// lambda_npp ((n+ - n-) gradPhiTilde, a)
  void add_electric_force(const ScalarField& np, const ScalarField& nm, const ScalarField& phi,
                          const Eigen::Vector3d& applied, double coeff, Eigen::VectorXd& out_p,
                          Eigen::VectorXd& out_b) const {
    if (coeff == 0.0) return;
    const QuadRule& rule = simplex_quadrature(dim, dim == 2 ? 4 : 5);
    std::vector<Eigen::Vector3d> gphi = element_gradients(mesh, phi.values);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      Eigen::Vector3d g = pad3(gphi[e] - applied, dim);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& bq = rule.bary[q];
        double diff = 0.0;
        for (int a = 0; a <= dim; ++a) diff += bq[a] * (np.values[el[a]] - nm.values[el[a]]);
        double wgt = coeff * rule.weights[q] * mesh.volume(e) * diff;
        double bubble = bubble_value(dim, bq);
        for (int a = 0; a <= dim; ++a)
          for (int c = 0; c < dim; ++c) out_p[el[a] * dim + c] += wgt * bq[a] * g[c];
        for (int c = 0; c < dim; ++c) out_b[e * dim + c] += wgt * bubble * g[c];
      }
    }
  }

  /// nu_el (G^T [d_half x (d_half x q)], a)_h , nodal rows only
  void add_elastic_force(const std::vector<Eigen::Matrix3d>& G, const DirectorField& d_prev,
                         const DirectorField& d_new, const std::vector<Eigen::Vector3d>& q,
                         double coeff, Eigen::VectorXd& out_p) const {
    if (coeff == 0.0) return;
    for (int z = 0; z < L; ++z) {
      if (mesh.on_boundary(z)) continue;
      Eigen::Vector3d mid = 0.5 * (d_prev.values[z] + d_new.values[z]);
      Eigen::Vector3d x = mid.dot(q[z]) * mid - mid.squaredNorm() * q[z];
      Eigen::Vector3d f = G[z].transpose() * x;
      for (int c = 0; c < dim; ++c)
        out_p[z * dim + c] += coeff * mesh.lumped_mass()[z] * f[c];
    }
  }

  Eigen::VectorXd director_source(const ScalarField& phi, const DirectorField& d_prev,
                                  const Eigen::Vector3d& applied) const {
    // int gradPhiTilde (P d_prev . gradPhiTilde) phi_z, one 3-vector per node
    Eigen::VectorXd out = Eigen::VectorXd::Zero(3 * L);
    if (!params.electro_active() || params.eps_a == 0.0) return out;
    const QuadRule& rule = simplex_quadrature(dim, 2);
    std::vector<Eigen::Vector3d> gphi = element_gradients(mesh, phi.values);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      Eigen::Vector3d g = pad3(gphi[e] - applied, dim);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& bq = rule.bary[q];
        Eigen::Vector3d dq = Eigen::Vector3d::Zero();
        for (int a = 0; a <= dim; ++a) dq += bq[a] * d_prev.values[el[a]];
        double ddotg = dq.head(dim).dot(g.head(dim));
        double wgt = rule.weights[q] * mesh.volume(e) * ddotg;
        for (int a = 0; a <= dim; ++a)
          for (int c = 0; c < 3; ++c) out[el[a] * 3 + c] += wgt * bq[a] * g[c];
      }
    }
    return out;
  }

  std::vector<Eigen::Vector3d> eliminate_q(const DirectorField& d_prev, const DirectorField& d_new,
                                           const Eigen::VectorXd& source) const {
    std::vector<Eigen::Vector3d> q(L, Eigen::Vector3d::Zero());
    std::vector<Eigen::Vector3d> mid(L);
    for (int z = 0; z < L; ++z) mid[z] = 0.5 * (d_prev.values[z] + d_new.values[z]);
    const bool dirichlet = params.director_bc == DirectorBc::dirichlet;
    for (int z = 0; z < L; ++z) {
      if (dirichlet && mesh.on_boundary(z)) continue;  // q vanishes on the boundary
      Eigen::Vector3d s = Eigen::Vector3d::Zero();
      for (int k = W_director.row_begin(z); k < W_director.row_end(z); ++k)
        s += W_director.value(k) * mid[W_director.col(k)];
      s -= params.mu_phi * params.eps_a * source.segment<3>(3 * z);
      q[z] = s / mesh.lumped_mass()[z];
    }
    return q;
  }

  // ---- director Newton ---------------------------------------------------

  struct DirectorSolve {
    DirectorField d;
    std::vector<Eigen::Vector3d> q;
    int newton_iters = 0;
  };

  DirectorSolve solve_director(const DirectorField& d_prev, const VelocityField& v,
                               const ScalarField& phi, const Eigen::Vector3d& applied,
                               const std::vector<Eigen::Matrix3d>& G,
                               const FixedPointConfig& fp) const {
    const bool dirichlet = params.director_bc == DirectorBc::dirichlet;
    const double k = params.k;
    Eigen::VectorXd source = director_source(phi, d_prev, applied);

    std::vector<Eigen::Vector3d> Gv(L);
    for (int z = 0; z < L; ++z) {
      Eigen::Vector3d vz = Eigen::Vector3d::Zero();
      for (int c = 0; c < dim; ++c) vz[c] = v.nodal[z * dim + c];
      Gv[z] = params.nu_el * (G[z] * vz);
    }

    DirectorField d_new = d_prev;
    auto residual = [&](const DirectorField& dn, std::vector<Eigen::Vector3d>& q_out,
                        std::vector<Eigen::Vector3d>& F) {
      q_out = eliminate_q(d_prev, dn, source);
      F.assign(L, Eigen::Vector3d::Zero());
      double norm = 0.0;
      for (int z = 0; z < L; ++z) {
        if (dirichlet && mesh.on_boundary(z)) continue;
        Eigen::Vector3d mid = 0.5 * (d_prev.values[z] + dn.values[z]);
        Eigen::Vector3d w = Gv[z] + q_out[z];
        F[z] = (dn.values[z] - d_prev.values[z]) / k + mid.squaredNorm() * w - mid.dot(w) * mid;
        norm = std::max(norm, F[z].lpNorm<Eigen::Infinity>());
      }
      return norm;
    };

    std::vector<Eigen::Vector3d> q, F;
    double res = residual(d_new, q, F);
    int it = 0;
    for (; it < fp.newton_max_iters && res > fp.newton_tol; ++it) {
      // Jacobian in 3x3 blocks on the sparsity of the q operator
      CsrBuilder jb(3 * L, 3 * L);
      for (int z = 0; z < L; ++z) {
        if (dirichlet && mesh.on_boundary(z)) {
          for (int c = 0; c < 3; ++c) jb.add(3 * z + c, 3 * z + c, 1.0);
          continue;
        }
        Eigen::Vector3d mid = 0.5 * (d_prev.values[z] + d_new.values[z]);
        Eigen::Vector3d w = Gv[z] + q[z];
        Eigen::Matrix3d nodal = (1.0 / k) * Eigen::Matrix3d::Identity() + w * mid.transpose() -
                                0.5 * mid.dot(w) * Eigen::Matrix3d::Identity() -
                                0.5 * mid * w.transpose();
        Eigen::Matrix3d qdir = mid.squaredNorm() * Eigen::Matrix3d::Identity() -
                               mid * mid.transpose();
        for (int kk = W_director.row_begin(z); kk < W_director.row_end(z); ++kk) {
          int zp = W_director.col(kk);
          if (dirichlet && mesh.on_boundary(zp)) continue;
          Eigen::Matrix3d block =
              (W_director.value(kk) / (2.0 * mesh.lumped_mass()[z])) * qdir;
          if (zp == z) block += nodal;
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
              if (block(r, c) != 0.0) jb.add(3 * z + r, 3 * zp + c, block(r, c));
        }
      }
      SparseMatrix J = jb.build();
      Eigen::VectorXd rhs(3 * L);
      for (int z = 0; z < L; ++z) rhs.segment<3>(3 * z) = -F[z];
      SolveResult lin = solve_nonsymmetric(J, rhs, fp.linear_tol);

      double scale = 1.0;
      bool accepted = false;
      for (int damp = 0; damp <= 8; ++damp) {
        DirectorField trial = d_new;
        for (int z = 0; z < L; ++z) trial.values[z] += scale * lin.x.segment<3>(3 * z);
        std::vector<Eigen::Vector3d> q_trial, F_trial;
        double res_trial = residual(trial, q_trial, F_trial);
        if (res_trial < res || res_trial <= fp.newton_tol) {
          d_new = trial;
          q = std::move(q_trial);
          F = std::move(F_trial);
          res = res_trial;
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
      if (!accepted) throw NewtonDiverged(it + 1, res);
    }
    if (res > fp.newton_tol) throw NewtonDiverged(it, res);
    return {std::move(d_new), std::move(q), it};
  }

  // ---- charges + potential ----------------------------------------------

  ScalarField potential(const DirectorField& d, const ScalarField& np, const ScalarField& nm,
                        const ScalarField* warm, double lin_tol) const {
    ScalarField phi = ScalarField::zeros(L, ScalarSpace::mean_zero);
    if (!params.electro_active()) return phi;
    SparseMatrix K = assemble_stiffness_aniso(mesh, d, params.eps_perp, params.eps_a,
                                              params.mu_phi);
    Eigen::VectorXd rhs = mesh.lumped_mass().cwiseProduct(np.values - nm.values);
    SpdOptions opts;
    opts.weights = &mesh.lumped_mass();
    if (warm && warm->values.size() == L) opts.x0 = &warm->values;
    SolveResult res = solve_spd(K, rhs, lin_tol, Nullspace::constants, opts);
    phi.values = res.x;
    return phi;
  }

  struct ChargeSolve {
    ScalarField n_plus, n_minus;
    MMatrixAudit audit_plus, audit_minus;
  };

  ChargeSolve charges(const DiscreteState& prev, const VelocityField& v, const DirectorField& d,
                      const ScalarField& phi, const Eigen::Vector3d& applied,
                      const ScalarField& np_iter, const ScalarField& nm_iter,
                      double lin_tol) const {
    const double k = params.k;
    double gamma = params.truncation_on ? params.truncation_gamma(dim, mesh.h_max()) : 0.0;
    const ScalarField* trunc_p = params.truncation_on ? &np_iter : nullptr;
    const ScalarField* trunc_m = params.truncation_on ? &nm_iter : nullptr;

    SparseMatrix Kd = assemble_stiffness_aniso(mesh, d, params.eps_perp, params.eps_a,
                                               params.mu_phi);
    SparseMatrix M_over_k = SparseMatrix::diagonal(mesh.lumped_mass() / k);

    ChargeSolve out;
    for (int sign = 0; sign < 2; ++sign) {
      const ScalarField& n_prev = sign == 0 ? prev.n_plus : prev.n_minus;
      const ScalarField& n_warm = sign == 0 ? np_iter : nm_iter;
      const ScalarField* trunc = sign == 0 ? trunc_p : trunc_m;
      SparseMatrix B = M_over_k.add_scaled(Kd, 1.0);
      if (params.lambda_npp != 0.0) {
        SparseMatrix C1 = assemble_convection_charge(mesh, v, trunc, gamma);
        B = B.add_scaled(C1, params.lambda_npp);
      }
      SparseMatrix C2 = assemble_drift_charge(mesh, d, phi, params.eps_perp, params.eps_a,
                                              sign == 0 ? +1 : -1, applied, trunc, gamma);
      B = B.add_scaled(C2, 1.0);

      Eigen::VectorXd rhs = mesh.lumped_mass().cwiseProduct(n_prev.values) / k;
      NonsymOptions opts;
      if (n_warm.values.size() == L) opts.x0 = &n_warm.values;
      SolveResult res = solve_nonsymmetric(B, rhs, lin_tol, opts);
      double audit_tol = 1e-12 * B.diagonal_vector().cwiseAbs().maxCoeff();
      if (sign == 0) {
        out.n_plus = {res.x, ScalarSpace::free};
        out.audit_plus = audit_m_matrix(B, audit_tol);
      } else {
        out.n_minus = {res.x, ScalarSpace::free};
        out.audit_minus = audit_m_matrix(B, audit_tol);
      }
    }
    return out;
  }

  // ---- velocity ----------------------------------------------------------

  struct VelocitySolve {
    VelocityField v;
    ScalarField p;
    double divergence_inf = 0.0;
  };

  VelocitySolve velocity(const DiscreteState& prev, const VelocityField& v_iter,
                         const ScalarField& np, const ScalarField& nm, const ScalarField& phi,
                         const DirectorField& d_new, const std::vector<Eigen::Vector3d>& q,
                         const std::vector<Eigen::Matrix3d>& G, const Eigen::Vector3d& applied,
                         const ScalarField& p_warm, const FixedPointConfig& fp) const {
    const double k = params.k;
    Eigen::VectorXd f_p, f_b, t_p, t_b;
    apply_mass(prev.v, f_p, f_b);
    f_p /= k;
    f_b /= k;
    if (h_alpha > 0.0) {
      apply_grad_grad(prev.v, t_p, t_b);
      f_p += (h_alpha / k) * t_p;
      f_b += (h_alpha / k) * t_b;
    }
    t_p.setZero(nv);
    t_b.setZero(E * dim);
    add_convection(prev.v, v_iter, -1.0, t_p, t_b);
    add_electric_force(np, nm, phi, applied, -params.lambda_npp, t_p, t_b);
    add_elastic_force(G, prev.d, d_new, q, -params.nu_el, t_p);
    f_p += t_p;
    f_b += t_b;

    // condense the bubble right-hand side
    Eigen::VectorXd f_hat = f_p;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(L);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      for (int c = 0; c < dim; ++c) {
        double fb = f_b[e * dim + c] / a_bb[e];
        for (int a = 0; a <= dim; ++a) {
          f_hat[el[a] * dim + c] -= (m_pb[e] / k) * fb;
          g[el[a]] += int_b[e] * mesh.grad(e, a)[c] * fb;
        }
      }
    }
    for (int i = 0; i < nv; ++i)
      if (dirichlet_dof[i]) f_hat[i] = 0.0;

    SaddleOptions opts;
    opts.C = &C_stab;
    opts.g = &g;
    opts.pressure_weights = &mesh.lumped_mass();
    opts.inner_tol = fp.linear_tol;
    opts.cached_ic0 = A_hat_ic0.get();
    if (p_warm.values.size() == L) opts.p0 = &p_warm.values;
    SaddleResult res = solve_saddle(A_hat, B_tilde, f_hat, fp.divergence_tol, opts);

    VelocitySolve out;
    out.v = VelocityField::zeros(L, E, dim);
    out.v.nodal = res.u;
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      for (int c = 0; c < dim; ++c) {
        double sum_u = 0.0, gp = 0.0;
        for (int a = 0; a <= dim; ++a) {
          sum_u += res.u[el[a] * dim + c];
          gp += mesh.grad(e, a)[c] * res.p[el[a]];
        }
        out.v.bubble[e * dim + c] =
            (f_b[e * dim + c] - (m_pb[e] / k) * sum_u + int_b[e] * gp) / a_bb[e];
      }
    }
    out.p = {res.p, ScalarSpace::mean_zero};
    out.divergence_inf = divergence_inf(out.v);
    return out;
  }

  double divergence_inf(const VelocityField& v) const {
    Eigen::VectorXd div = Eigen::VectorXd::Zero(L);
    for (int e = 0; e < E; ++e) {
      const auto& el = mesh.element(e);
      double div_p1 = 0.0;
      for (int a = 0; a <= dim; ++a)
        for (int c = 0; c < dim; ++c) div_p1 += v.nodal[el[a] * dim + c] * mesh.grad(e, a)[c];
      for (int a = 0; a <= dim; ++a) {
        double s = div_p1 * mesh.volume(e) / (dim + 1);
        for (int c = 0; c < dim; ++c)
          s -= int_b[e] * mesh.grad(e, a)[c] * v.bubble[e * dim + c];
        div[el[a]] += s;
      }
    }
    return div.lpNorm<Eigen::Infinity>();
  }
};

SchemeWorkspace::SchemeWorkspace(const TriMesh& mesh, const PhysParams& params)
    : impl_(std::make_unique<Impl>(mesh, params)) {}
SchemeWorkspace::~SchemeWorkspace() = default;

const SparseMatrix& SchemeWorkspace::isotropic_stiffness() const { return impl_->S_iso; }
const TriMesh& SchemeWorkspace::mesh() const { return impl_->mesh; }
const PhysParams& SchemeWorkspace::params() const { return impl_->params; }

ScalarField SchemeWorkspace::solve_potential(const DirectorField& d, const ScalarField& np,
                                             const ScalarField& nm, const ScalarField* warm) {
  return impl_->potential(d, np, nm, warm, 1e-14);
}

std::vector<Eigen::Vector3d> SchemeWorkspace::evaluate_q(const DirectorField& d_prev,
                                                         const DirectorField& d_new,
                                                         const ScalarField& phi,
                                                         const Eigen::Vector3d& applied) const {
  return impl_->eliminate_q(d_prev, d_new, impl_->director_source(phi, d_prev, applied));
}

std::pair<DirectorField, std::vector<Eigen::Vector3d>> SchemeWorkspace::solve_director(
    const DirectorField& d_prev, const VelocityField& v, const ScalarField& phi,
    const Eigen::Vector3d& applied, const FixedPointConfig& fp) {
  std::vector<Eigen::Matrix3d> G = lumped_l2_project_gradient(impl_->mesh, d_prev);
  auto ds = impl_->solve_director(d_prev, v, phi, applied, G, fp);
  return {std::move(ds.d), std::move(ds.q)};
}

VelocityField SchemeWorkspace::project_divergence_free(const VelocityField& v) {
  Impl& w = *impl_;
  w.build_projection_blocks();
  Eigen::VectorXd f_p, f_b;
  w.apply_mass(v, f_p, f_b);
  Eigen::VectorXd f_hat = f_p;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.L);
  for (int e = 0; e < w.E; ++e) {
    const auto& el = w.mesh.element(e);
    for (int c = 0; c < w.dim; ++c) {
      double fb = f_b[e * w.dim + c] / w.aproj_bb[e];
      for (int a = 0; a <= w.dim; ++a) {
        f_hat[el[a] * w.dim + c] -= w.m_pb[e] * fb;
        g[el[a]] += w.int_b[e] * w.mesh.grad(e, a)[c] * fb;
      }
    }
  }
  for (int i = 0; i < w.nv; ++i)
    if (w.dirichlet_dof[i]) f_hat[i] = 0.0;

  SaddleOptions opts;
  opts.C = &w.C_proj;
  opts.g = &g;
  opts.pressure_weights = &w.mesh.lumped_mass();
  SaddleResult res = solve_saddle(w.A_proj, w.B_proj, f_hat, 1e-13, opts);
  VelocityField out = VelocityField::zeros(w.L, w.E, w.dim);
  out.nodal = res.u;
  for (int e = 0; e < w.E; ++e) {
    const auto& el = w.mesh.element(e);
    for (int c = 0; c < w.dim; ++c) {
      double sum_u = 0.0, gp = 0.0;
      for (int a = 0; a <= w.dim; ++a) {
        sum_u += res.u[el[a] * w.dim + c];
        gp += w.mesh.grad(e, a)[c] * res.p[el[a]];
      }
      out.bubble[e * w.dim + c] =
          (f_b[e * w.dim + c] - w.m_pb[e] * sum_u + w.int_b[e] * gp) / w.aproj_bb[e];
    }
  }
  return out;
}

std::pair<DiscreteState, StepCertificate> SchemeWorkspace::step(const DiscreteState& prev,
                                                                const FixedPointConfig& fp) {
  fp.validate();
  Impl& w = *impl_;
  const PhysParams& params = w.params;
  const double t_new = prev.t + params.k;
  const Eigen::Vector3d applied = params.applied_field_at(t_new);
  const bool electro = params.electro_active();

  std::vector<Eigen::Matrix3d> G = lumped_l2_project_gradient(w.mesh, prev.d);

  DiscreteState cur = prev;
  StepCertificate cert;
  cert.t = t_new;
  cert.step_index = prev.step_index + 1;
  cert.applied_field_active = params.has_applied_field();
  cert.frozen = params.freeze_velocity || params.freeze_director || params.freeze_charges ||
                params.freeze_potential;

  double increment = 0.0;
  int outer = 0;
  double div_inf = 0.0;
  bool converged = false;
  for (outer = 1; outer <= fp.max_outer_iters; ++outer) {
    increment = 0.0;
    for (SubSolve sub : fp.ordering) {
      switch (sub) {
        case SubSolve::potential: {
          if (!electro || params.freeze_potential) break;
          ScalarField phi = w.potential(cur.d, cur.n_plus, cur.n_minus, &cur.phi, fp.linear_tol);
          increment = std::max(increment, (phi.values - cur.phi.values).lpNorm<Eigen::Infinity>());
          cur.phi = std::move(phi);
          break;
        }
        case SubSolve::charges: {
          if (!electro || params.freeze_charges) break;
          Impl::ChargeSolve cs = w.charges(prev, cur.v, cur.d, cur.phi, applied, cur.n_plus,
                                           cur.n_minus, fp.linear_tol);
          increment = std::max(increment,
                               (cs.n_plus.values - cur.n_plus.values).lpNorm<Eigen::Infinity>());
          increment = std::max(increment,
                               (cs.n_minus.values - cur.n_minus.values).lpNorm<Eigen::Infinity>());
          cur.n_plus = std::move(cs.n_plus);
          cur.n_minus = std::move(cs.n_minus);
          cert.audit_plus = cs.audit_plus;
          cert.audit_minus = cs.audit_minus;
          cert.audits_valid = true;
          break;
        }
        case SubSolve::director: {
          if (params.freeze_director) {
            cur.q = w.eliminate_q(prev.d, cur.d, w.director_source(cur.phi, prev.d, applied));
            break;
          }
          Impl::DirectorSolve ds = w.solve_director(prev.d, cur.v, cur.phi, applied, G, fp);
          for (int z = 0; z < w.L; ++z) {
            increment = std::max(increment, (ds.d.values[z] - cur.d.values[z]).lpNorm<Eigen::Infinity>());
            increment = std::max(increment, (ds.q[z] - cur.q[z]).lpNorm<Eigen::Infinity>());
          }
          cur.d = std::move(ds.d);
          cur.q = std::move(ds.q);
          break;
        }
        case SubSolve::velocity: {
          if (params.freeze_velocity) break;
          Impl::VelocitySolve vs = w.velocity(prev, cur.v, cur.n_plus, cur.n_minus, cur.phi,
                                              cur.d, cur.q, G, applied, cur.p, fp);
          increment = std::max(increment, (vs.v.nodal - cur.v.nodal).lpNorm<Eigen::Infinity>());
          cur.v = std::move(vs.v);
          cur.p = std::move(vs.p);
          div_inf = vs.divergence_inf;
          break;
        }
      }
    }
    if (increment <= fp.tol_fp) {
      converged = true;
      break;
    }
  }
  if (!converged) throw FixedPointDiverged(fp.max_outer_iters, increment);

  cur.t = t_new;
  cur.step_index = prev.step_index + 1;

  cert.fixed_point_iters = outer;
  cert.divergence_inf = div_inf;
  EnergyLawTerms terms = energy_law_residual(prev, cur, w.mesh, params);
  cert.energy_before = terms.energy_before;
  cert.energy_after = terms.energy_after;
  cert.diss_viscous = terms.diss_viscous;
  cert.diss_director = terms.diss_director;
  cert.diss_charge_field = terms.diss_charge_field;
  cert.diss_charge_l2 = terms.diss_charge_l2;
  cert.damp_velocity = terms.damp_velocity;
  cert.damp_velocity_grad = terms.damp_velocity_grad;
  cert.damp_potential = terms.damp_potential;
  cert.damp_director_field = terms.damp_director_field;
  cert.stab_velocity_increment = terms.stab_velocity_increment;
  cert.stab_director_increment = terms.stab_director_increment;
  cert.dissipation_sum = terms.dissipation_sum;
  cert.energy_residual = terms.residual;

  cert.max_norm_violation = 0.0;
  for (int z = 0; z < w.L; ++z)
    cert.max_norm_violation =
        std::max(cert.max_norm_violation, std::abs(cur.d.values[z].norm() - 1.0));
  cert.min_charge = std::min(cur.n_plus.values.minCoeff(), cur.n_minus.values.minCoeff());
  cert.max_charge = std::max(cur.n_plus.values.maxCoeff(), cur.n_minus.values.maxCoeff());
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(w.L);
  cert.charge_mass_plus = mass_lumped_inner(w.mesh, cur.n_plus.values, ones);
  cert.charge_mass_minus = mass_lumped_inner(w.mesh, cur.n_minus.values, ones);

  return {std::move(cur), std::move(cert)};
}

std::pair<DiscreteState, StepCertificate> step(const DiscreteState& prev, const TriMesh& mesh,
                                               const PhysParams& params,
                                               const FixedPointConfig& fp) {
  SchemeWorkspace ws(mesh, params);
  return ws.step(prev, fp);
}

std::pair<DirectorField, std::vector<Eigen::Vector3d>> director_newton(
    const DirectorField& d_prev, const VelocityField& v, const ScalarField& phi,
    const TriMesh& mesh, const PhysParams& params, const FixedPointConfig& fp,
    const Eigen::Vector3d& applied) {
  SchemeWorkspace ws(mesh, params);
  return ws.solve_director(d_prev, v, phi, applied, fp);
}

Trajectory run(const TriMesh& mesh, const PhysParams& params, const FixedPointConfig& fp,
               const InitialData& init, int n_steps, const StepObserver& on_step,
               bool keep_states) {
  Trajectory traj;
  DiscreteState state = initialize_state(mesh, params, init);
  traj.states.push_back(state);
  SchemeWorkspace ws(mesh, params);
  for (int s = 0; s < n_steps; ++s) {
    try {
      auto [next, cert] = ws.step(state, fp);
      state = std::move(next);
      traj.certificates.push_back(cert);
      if (on_step) on_step(state, cert);
      if (keep_states) traj.states.push_back(state);
    } catch (const std::exception& e) {
      traj.error = e.what();
      break;
    }
  }
  if (!keep_states && traj.states.size() == 1 && !traj.certificates.empty())
    traj.states.push_back(state);  // keep at least the final state
  return traj;
}

}  // namespace nematic
