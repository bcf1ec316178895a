#include "nematic/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nematic/errors.hpp"

namespace nematic {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_header_and_grid(std::ostream& os, const TriMesh& mesh) {
  os << "# vtk DataFile Version 3.0\n";
  os << "nematic electrolyte state\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.n_nodes() << " double\n";
  for (int z = 0; z < mesh.n_nodes(); ++z) {
    const auto& x = mesh.node(z);
    os << fmt(x[0]) << " " << fmt(x[1]) << " " << fmt(x[2]) << "\n";
  }
  const int npe = mesh.nodes_per_element();
  os << "CELLS " << mesh.n_elements() << " " << mesh.n_elements() * (npe + 1) << "\n";
  for (int e = 0; e < mesh.n_elements(); ++e) {
    os << npe;
    for (int a = 0; a < npe; ++a) os << " " << mesh.element(e)[a];
    os << "\n";
  }
  os << "CELL_TYPES " << mesh.n_elements() << "\n";
  const int cell_type = mesh.dim() == 2 ? 5 : 10;
  for (int e = 0; e < mesh.n_elements(); ++e) os << cell_type << "\n";
}

}  // namespace

void write_vtk(const DiscreteState& state, const TriMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path);
  write_header_and_grid(os, mesh);

  const int L = mesh.n_nodes();
  const int dim = mesh.dim();
  os << "POINT_DATA " << L << "\n";

  os << "VECTORS velocity double\n";
  for (int z = 0; z < L; ++z) {
    double vx = state.v.nodal[z * dim + 0];
    double vy = dim > 1 ? state.v.nodal[z * dim + 1] : 0.0;
    double vz = dim > 2 ? state.v.nodal[z * dim + 2] : 0.0;
    os << fmt(vx) << " " << fmt(vy) << " " << fmt(vz) << "\n";
  }
  os << "VECTORS director double\n";
  for (int z = 0; z < L; ++z) {
    const auto& d = state.d.values[z];
    os << fmt(d[0]) << " " << fmt(d[1]) << " " << fmt(d[2]) << "\n";
  }
  os << "VECTORS q double\n";
  for (int z = 0; z < L; ++z) {
    const auto& q = state.q[z];
    os << fmt(q[0]) << " " << fmt(q[1]) << " " << fmt(q[2]) << "\n";
  }
  auto scalars = [&](const char* name, const Eigen::VectorXd& v) {
    os << "SCALARS " << name << " double 1\n";
    os << "LOOKUP_TABLE default\n";
    for (int z = 0; z < L; ++z) os << fmt(v[z]) << "\n";
  };
  scalars("n_plus", state.n_plus.values);
  scalars("n_minus", state.n_minus.values);
  scalars("phi", state.phi.values);
  scalars("pressure", state.p.values);
  if (!os) throw IoError("failed writing " + path);
}

void write_vtk_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path);
  write_header_and_grid(os, mesh);
  if (!os) throw IoError("failed writing " + path);
}

std::string timeseries_header() {
  return "step,t,E,diss_viscous,diss_director,diss_charge_field,diss_charge_l2,"
         "damp_velocity,damp_velocity_grad,damp_potential,damp_director_field,"
         "stab_velocity_increment,stab_director_increment,energy_residual,"
         "max_director_norm_dev,min_charge,max_charge,charge_mass_plus,charge_mass_minus,"
         "divergence_inf,mmatrix_plus,mmatrix_minus,fp_iters";
}

std::string timeseries_row(const StepCertificate& c) {
  std::ostringstream os;
  os << c.step_index << "," << fmt(c.t) << "," << fmt(c.energy_after) << ","
     << fmt(c.diss_viscous) << "," << fmt(c.diss_director) << "," << fmt(c.diss_charge_field)
     << "," << fmt(c.diss_charge_l2) << "," << fmt(c.damp_velocity) << ","
     << fmt(c.damp_velocity_grad) << "," << fmt(c.damp_potential) << ","
     << fmt(c.damp_director_field) << "," << fmt(c.stab_velocity_increment) << ","
     << fmt(c.stab_director_increment) << "," << fmt(c.energy_residual) << ","
     << fmt(c.max_norm_violation) << "," << fmt(c.min_charge) << "," << fmt(c.max_charge) << ","
     << fmt(c.charge_mass_plus) << "," << fmt(c.charge_mass_minus) << ","
     << fmt(c.divergence_inf) << "," << (c.audits_valid ? (c.audit_plus.pass ? 1 : 0) : -1) << ","
     << (c.audits_valid ? (c.audit_minus.pass ? 1 : 0) : -1) << "," << c.fixed_point_iters;
  return os.str();
}

void write_timeseries(const std::vector<StepCertificate>& certs, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path);
  os << timeseries_header() << "\n";
  for (const auto& c : certs) os << timeseries_row(c) << "\n";
  if (!os) throw IoError("failed writing " + path);
}

}  // namespace nematic
