#pragma once

#include <string>
#include <vector>

#include "nematic/mesh.hpp"
#include "nematic/state.hpp"

namespace nematic {

/// Legacy ASCII VTK (version 3.0) unstructured grid with the point data
/// arrays velocity, director, q, n_plus, n_minus, phi, pressure. Values are
/// printed with 17 significant digits.
void write_vtk(const DiscreteState& state, const TriMesh& mesh, const std::string& path);

/// Mesh-only dump (geometry and connectivity).
void write_vtk_mesh(const TriMesh& mesh, const std::string& path);

/// Fixed-header CSV, one row per certificate.
void write_timeseries(const std::vector<StepCertificate>& certs, const std::string& path);
std::string timeseries_header();
std::string timeseries_row(const StepCertificate& cert);

}  // namespace nematic
