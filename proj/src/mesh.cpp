#include "nematic/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nematic/errors.hpp"
#include "nematic/sparse.hpp"
#include "nematic/assembly.hpp"

namespace nematic {

MeshPattern parse_mesh_pattern(const std::string& name) {
  if (name == "crisscross") return MeshPattern::crisscross;
  if (name == "union_jack") return MeshPattern::union_jack;
  if (name == "tet_split") return MeshPattern::tet_split;
  throw ValidationError("mesh.pattern", "unknown pattern '" + name + "'");
}

std::string mesh_pattern_name(MeshPattern p) {
  switch (p) {
    case MeshPattern::crisscross: return "crisscross";
    case MeshPattern::union_jack: return "union_jack";
    case MeshPattern::tet_split: return "tet_split";
  }
  return "?";
}

std::string AdmissibilityReport::summary() const {
  std::ostringstream os;
  os << (admissible ? "admissible" : "not admissible");
  if (borderline) os << " (borderline)";
  if (dim == 2)
    os << ", max opposite-angle sum = " << max_opposite_angle_sum << " rad";
  else
    os << ", max dihedral angle = " << max_dihedral_angle << " rad";
  os << ", max isotropic stiffness off-diagonal = " << max_stiffness_offdiag;
  return os.str();
}

TriMesh TriMesh::structured(int n, const Box& box, MeshPattern pattern, int dim) {
  if (n < 1) throw ValidationError("mesh.n", "n_per_side must be >= 1");
  if (dim != 2 && dim != 3) throw ValidationError("mesh.dim", "dim must be 2 or 3");
  for (int c = 0; c < dim; ++c)
    if (!(box.hi[c] > box.lo[c])) throw ValidationError("mesh.box", "degenerate box");

  TriMesh m;
  m.dim_ = dim;

  if (dim == 2) {
    if (pattern != MeshPattern::crisscross && pattern != MeshPattern::union_jack &&
        pattern != MeshPattern::tet_split)
      throw ValidationError("mesh.pattern", "unsupported pattern/dimension combination");
    const double hx = (box.hi[0] - box.lo[0]) / n;
    const double hy = (box.hi[1] - box.lo[1]) / n;
    // corner nodes, lexicographic by grid index
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        m.nodes_.emplace_back(box.lo[0] + i * hx, box.lo[1] + j * hy, 0.0);
    auto corner = [n](int i, int j) { return j * (n + 1) + i; };
    if (pattern == MeshPattern::crisscross) {
      const int nc = (n + 1) * (n + 1);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          m.nodes_.emplace_back(box.lo[0] + (i + 0.5) * hx, box.lo[1] + (j + 0.5) * hy, 0.0);
      auto center = [n, nc](int i, int j) { return nc + j * n + i; };
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          int v00 = corner(i, j), v10 = corner(i + 1, j);
          int v11 = corner(i + 1, j + 1), v01 = corner(i, j + 1);
          int c = center(i, j);
          m.elements_.push_back({v00, v10, c, -1});
          m.elements_.push_back({v10, v11, c, -1});
          m.elements_.push_back({v11, v01, c, -1});
          m.elements_.push_back({v01, v00, c, -1});
        }
    } else {
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          int v00 = corner(i, j), v10 = corner(i + 1, j);
          int v11 = corner(i + 1, j + 1), v01 = corner(i, j + 1);
          bool ne_diagonal = (pattern == MeshPattern::tet_split) || ((i + j) % 2 == 0);
          if (ne_diagonal) {
            m.elements_.push_back({v00, v10, v11, -1});
            m.elements_.push_back({v00, v11, v01, -1});
          } else {
            m.elements_.push_back({v10, v11, v01, -1});
            m.elements_.push_back({v10, v01, v00, -1});
          }
        }
    }
  } else {
    if (pattern != MeshPattern::tet_split)
      throw ValidationError("mesh.pattern", "unsupported pattern/dimension combination");
    const double hx = (box.hi[0] - box.lo[0]) / n;
    const double hy = (box.hi[1] - box.lo[1]) / n;
    const double hz = (box.hi[2] - box.lo[2]) / n;
    for (int k = 0; k <= n; ++k)
      for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
          m.nodes_.emplace_back(box.lo[0] + i * hx, box.lo[1] + j * hy, box.lo[2] + k * hz);
    auto vid = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };
    // Kuhn split: one tet per permutation of the axes, walking from the
    // low corner to the high corner of each cube.
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          for (const auto& p : perms) {
            int c[3] = {i, j, k};
            std::array<int, 4> tet{};
            tet[0] = vid(c[0], c[1], c[2]);
            for (int s = 0; s < 3; ++s) {
              c[p[s]] += 1;
              tet[s + 1] = vid(c[0], c[1], c[2]);
            }
            // odd permutations produce negatively oriented tets
            Eigen::Vector3d e1 = m.nodes_[tet[1]] - m.nodes_[tet[0]];
            Eigen::Vector3d e2 = m.nodes_[tet[2]] - m.nodes_[tet[0]];
            Eigen::Vector3d e3 = m.nodes_[tet[3]] - m.nodes_[tet[0]];
            if (e1.cross(e2).dot(e3) < 0.0) std::swap(tet[2], tet[3]);
            m.elements_.push_back(tet);
          }
        }
  }

  m.finalize();
  return m;
}

TriMesh TriMesh::from_arrays(int dim, std::vector<Eigen::Vector3d> nodes,
                             std::vector<std::array<int, 4>> elements) {
  if (dim != 2 && dim != 3) throw ValidationError("mesh.dim", "dim must be 2 or 3");
  TriMesh m;
  m.dim_ = dim;
  m.nodes_ = std::move(nodes);
  m.elements_ = std::move(elements);
  m.finalize();
  return m;
}

void TriMesh::finalize() {
  const int d = dim_;
  const int npe = d + 1;
  const int L = n_nodes();
  volume_.resize(elements_.size());
  grad_.resize(elements_.size());
  total_volume_ = 0.0;
  h_max_ = 0.0;
  min_inradius_ = std::numeric_limits<double>::max();

  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& el = elements_[e];
    Eigen::Matrix3d E = Eigen::Matrix3d::Identity();
    for (int c = 0; c < d; ++c) E.col(c).head(3) = nodes_[el[c + 1]] - nodes_[el[0]];
    double det;
    if (d == 2)
      det = E(0, 0) * E(1, 1) - E(0, 1) * E(1, 0);
    else
      det = E.determinant();
    double vol = det / (d == 2 ? 2.0 : 6.0);
    if (!(vol > 0.0))
      throw ValidationError("mesh.elements", "element " + std::to_string(e) +
                                                 " has non-positive volume " + std::to_string(vol));
    volume_[e] = vol;
    total_volume_ += vol;

    // gradients: rows of E^{-T} for local nodes 1..d, node 0 closes the sum
    Eigen::Matrix3d Einv = E.inverse();
    Eigen::Vector3d g0 = Eigen::Vector3d::Zero();
    for (int c = 0; c < d; ++c) {
      Eigen::Vector3d g = Eigen::Vector3d::Zero();
      g.head(3) = Einv.row(c).transpose();
      if (d == 2) g[2] = 0.0;
      grad_[e][c + 1] = g;
      g0 -= g;
    }
    grad_[e][0] = g0;
    if (d == 2) grad_[e][3] = Eigen::Vector3d::Zero();

    double diam = 0.0, surf = 0.0;
    for (int a = 0; a < npe; ++a)
      for (int b = a + 1; b < npe; ++b)
        diam = std::max(diam, (nodes_[el[a]] - nodes_[el[b]]).norm());
    if (d == 2) {
      for (int a = 0; a < 3; ++a)
        surf += (nodes_[el[(a + 1) % 3]] - nodes_[el[a]]).norm();
    } else {
      for (int f = 0; f < 4; ++f) {
        int i0 = el[(f + 1) % 4], i1 = el[(f + 2) % 4], i2 = el[(f + 3) % 4];
        surf += 0.5 * ((nodes_[i1] - nodes_[i0]).cross(nodes_[i2] - nodes_[i0])).norm();
      }
    }
    h_max_ = std::max(h_max_, diam);
    min_inradius_ = std::min(min_inradius_, d * vol / surf);
  }

  // conformity: every interior facet shared by exactly two elements
  std::map<std::array<int, 3>, int> facet_count;
  auto facet_key = [d](const std::array<int, 4>& el, int skip) {
    std::array<int, 3> f{-1, -1, -1};
    int idx = 0;
    for (int a = 0; a <= d; ++a)
      if (a != skip) f[idx++] = el[a];
    std::sort(f.begin(), f.begin() + d);
    return f;
  };
  for (const auto& el : elements_)
    for (int a = 0; a <= d; ++a) facet_count[facet_key(el, a)] += 1;
  boundary_flag_.assign(L, 0);
  for (const auto& [facet, count] : facet_count) {
    if (count > 2)
      throw ValidationError("mesh.elements", "non-conforming mesh: facet shared by " +
                                                 std::to_string(count) + " elements");
    if (count == 1)
      for (int a = 0; a < d; ++a) boundary_flag_[facet[a]] = 1;
  }
  for (int z = 0; z < L; ++z)
    if (boundary_flag_[z]) boundary_nodes_.push_back(z);

  lumped_mass_.setZero(L);
  node_elements_.assign(L, {});
  for (std::size_t e = 0; e < elements_.size(); ++e)
    for (int a = 0; a <= d; ++a) {
      lumped_mass_[elements_[e][a]] += volume_[e] / npe;
      node_elements_[elements_[e][a]].push_back(static_cast<int>(e));
    }
  for (int z = 0; z < L; ++z)
    if (!(lumped_mass_[z] > 0.0))
      throw ValidationError("mesh.nodes", "node " + std::to_string(z) + " has no incident element");

  node_neighbors_.assign(L, {});
  for (const auto& el : elements_)
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b)
        if (a != b) node_neighbors_[el[a]].push_back(el[b]);
  for (auto& nb : node_neighbors_) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
}

Eigen::VectorXd lumped_masses(const TriMesh& mesh) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.n_nodes());
  for (int e = 0; e < mesh.n_elements(); ++e)
    for (int a = 0; a <= mesh.dim(); ++a)
      m[mesh.element(e)[a]] += mesh.volume(e) / (mesh.dim() + 1);
  return m;
}

namespace {

double angle_at(const TriMesh& mesh, int apex, int a, int b) {
  Eigen::Vector3d u = mesh.node(a) - mesh.node(apex);
  Eigen::Vector3d v = mesh.node(b) - mesh.node(apex);
  return std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
}

}  // namespace

AdmissibilityReport check_mesh_admissibility(const TriMesh& mesh) {
  AdmissibilityReport rep;
  rep.dim = mesh.dim();
  const double tol = 1e-9;

  if (mesh.dim() == 2) {
    // collect for every interior edge the angle opposite to it in each
    // adjacent triangle
    std::map<std::pair<int, int>, std::vector<double>> opposite;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const auto& el = mesh.element(e);
      for (int a = 0; a < 3; ++a) {
        int i = el[(a + 1) % 3], j = el[(a + 2) % 3];
        auto key = std::minmax(i, j);
        opposite[{key.first, key.second}].push_back(angle_at(mesh, el[a], i, j));
      }
    }
    double max_sum = 0.0;
    for (const auto& [edge, angles] : opposite)
      if (angles.size() == 2) max_sum = std::max(max_sum, angles[0] + angles[1]);
    rep.max_opposite_angle_sum = max_sum;
    rep.theta_margin = M_PI - max_sum;
    rep.strongly_acute = rep.theta_margin > tol;
    rep.delaunay = max_sum <= M_PI + tol;
    rep.borderline = std::abs(max_sum - M_PI) <= tol;
    rep.admissible = rep.delaunay;
  } else {
    double max_dihedral = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      const auto& el = mesh.element(e);
      // dihedral angle along each of the 6 edges, via the normals of the two
      // faces meeting there
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
          int others[2], idx = 0;
          for (int c = 0; c < 4; ++c)
            if (c != a && c != b) others[idx++] = c;
          Eigen::Vector3d pa = mesh.node(el[a]), pb = mesh.node(el[b]);
          Eigen::Vector3d pc = mesh.node(el[others[0]]), pd = mesh.node(el[others[1]]);
          Eigen::Vector3d n1 = (pb - pa).cross(pc - pa);
          Eigen::Vector3d n2 = (pb - pa).cross(pd - pa);
          double ang = std::acos(std::clamp(n1.dot(n2) / (n1.norm() * n2.norm()), -1.0, 1.0));
          max_dihedral = std::max(max_dihedral, ang);
        }
    }
    rep.max_dihedral_angle = max_dihedral;
    rep.theta_margin = 0.5 * M_PI - max_dihedral;
    rep.strongly_acute = rep.theta_margin > tol;
    rep.borderline = std::abs(max_dihedral - 0.5 * M_PI) <= tol;
    rep.admissible = rep.strongly_acute;
  }

  // algebraic surrogate: the isotropic P1 stiffness matrix must have
  // non-positive off-diagonal entries
  SparseMatrix S = assemble_isotropic_stiffness(mesh, 1.0);
  double max_off = -std::numeric_limits<double>::max();
  for (int i = 0; i < S.n_rows(); ++i)
    for (int kk = S.row_begin(i); kk < S.row_end(i); ++kk)
      if (S.col(kk) != i) max_off = std::max(max_off, S.value(kk));
  rep.max_stiffness_offdiag = max_off;
  rep.algebraic_ok = max_off <= 1e-13;
  return rep;
}

}  // namespace nematic
