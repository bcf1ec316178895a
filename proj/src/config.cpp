#include "nematic/config.hpp"

#include <cmath>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "nematic/errors.hpp"

namespace nematic {

Box ExperimentConfig::box() const {
  Box b;
  b.lo = box_min;
  b.hi = box_max;
  if (dim == 2) {
    b.lo[2] = 0.0;
    b.hi[2] = 0.0;
  }
  return b;
}

PhysParams ExperimentConfig::phys_params() const {
  PhysParams p;
  p.nu = nu;
  p.A = A;
  p.eps_perp = eps_perp;
  p.eps_a = eps_a;
  p.lambda_npp = lambda_npp;
  p.mu_phi = mu_phi;
  p.nu_el = nu_el;
  p.alpha = alpha > 0 ? alpha : (dim == 2 ? 1.0 : 0.5);
  p.beta = beta > 0 ? beta : (dim == 2 ? 1.0 : 0.25);
  p.stabilization_on = stabilization;
  p.truncation_on = truncation;
  p.truncation_c2 = truncation_c2;
  if (director_bc == "neumann")
    p.director_bc = DirectorBc::neumann;
  else if (director_bc == "dirichlet")
    p.director_bc = DirectorBc::dirichlet;
  else
    throw ValidationError("physics.director_bc", "must be neumann or dirichlet");
  p.k = dt;
  p.T = tmax;
  if (field_mode == AppliedFieldMode::constant) {
    Eigen::Vector3d amp = field_amplitude;
    p.applied_field = [amp](double) { return amp; };
  } else if (field_mode == AppliedFieldMode::cosine) {
    Eigen::Vector3d amp = field_amplitude;
    double freq = field_frequency;
    p.applied_field = [amp, freq](double t) {
      return (amp * std::cos(freq * M_PI * t)).eval();
    };
  }
  p.freeze_velocity = freeze_velocity;
  p.freeze_director = freeze_director;
  p.freeze_charges = freeze_charges;
  p.freeze_potential = freeze_potential;
  return p;
}

FixedPointConfig ExperimentConfig::fixed_point() const {
  FixedPointConfig fp;
  fp.tol_fp = fp_tol;
  fp.max_outer_iters = fp_max_iters;
  fp.newton_tol = newton_tol;
  fp.newton_max_iters = newton_max_iters;
  fp.linear_tol = linear_tol;
  fp.divergence_tol = divergence_tol;
  return fp;
}

InitialData ExperimentConfig::initial_data() const {
  InitialData init;
  if (d0_mode == DirectorInit::constant) {
    Eigen::Vector3d v = d0_value;
    init.director = [v](const Eigen::Vector3d&) { return v; };
  } else {
    init.director = [](const Eigen::Vector3d& x) {
      return Eigen::Vector3d(4.0 * x[0] * x[0] + 4.0 * x[1] * x[1] - 0.25, 2.0 * x[1], 0.0);
    };
  }
  init.director_fallback = Eigen::Vector3d(0, 0, 1);
  init.has_fallback = true;

  if (n0_mode == ChargeInit::constant) {
    double v = n0_value;
    init.n_plus = [v](const Eigen::Vector3d&) { return v; };
    init.n_minus = [v](const Eigen::Vector3d&) { return v; };
  } else {
    double w = n0_width, off = n0_offset;
    init.n_plus = [w, off](const Eigen::Vector3d& x) {
      return std::exp(-w * (x - Eigen::Vector3d(off, 0, 0)).squaredNorm());
    };
    init.n_minus = [w, off](const Eigen::Vector3d& x) {
      return std::exp(-w * (x + Eigen::Vector3d(off, 0, 0)).squaredNorm());
    };
  }

  if (v0_mode == VelocityInit::rotation) {
    double s = v0_scale;
    init.velocity = [s](const Eigen::Vector3d& x) {
      return Eigen::Vector3d(-s * x[1], s * x[0], 0.0);
    };
  }
  return init;
}

int ExperimentConfig::n_steps() const {
  return static_cast<int>(std::llround(std::floor(tmax / dt + 1e-9)));
}

void ExperimentConfig::validate() const {
  if (dim != 2 && dim != 3) throw ValidationError("mesh.dim", "must be 2 or 3");
  if (n < 1) throw ValidationError("mesh.n", "must be >= 1");
  if (!(dt > 0)) throw ValidationError("time.dt", "must be positive");
  if (!(tmax > 0)) throw ValidationError("time.tmax", "must be positive");
  for (int c = 0; c < dim; ++c)
    if (!(box_max[c] > box_min[c])) throw ValidationError("mesh.box", "degenerate box");
  phys_params();   // throws on bad enum values
  fixed_point().validate();
  if (n0_mode == ChargeInit::constant && (n0_value < 0.0 || n0_value > 1.0))
    throw ValidationError("initial.n0_value", "must lie in [0,1]");
}

// ---- key=value (de)serialization -------------------------------------------

namespace {

std::string vec_to_string(const Eigen::Vector3d& v) {
  std::ostringstream os;
  os.precision(17);
  os << v[0] << " " << v[1] << " " << v[2];
  return os.str();
}

Eigen::Vector3d parse_vec(const std::string& s, const std::string& key) {
  std::istringstream is(s);
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  if (!(is >> v[0] >> v[1])) throw ValidationError(key, "expected 2 or 3 numbers");
  is >> v[2];
  return v;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ValidationError(key, "expected on/off");
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw ValidationError(key, "expected a number, got '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (...) {
    throw ValidationError(key, "expected an integer, got '" + s + "'");
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_key(ExperimentConfig& c, const std::string& key, const std::string& val) {
  if (key == "experiment") c.experiment = val;
  else if (key == "mesh.dim") c.dim = parse_int(val, key);
  else if (key == "mesh.n") c.n = parse_int(val, key);
  else if (key == "mesh.pattern") c.pattern = parse_mesh_pattern(val);
  else if (key == "mesh.box_min") c.box_min = parse_vec(val, key);
  else if (key == "mesh.box_max") c.box_max = parse_vec(val, key);
  else if (key == "physics.nu") c.nu = parse_double(val, key);
  else if (key == "physics.A") c.A = parse_double(val, key);
  else if (key == "physics.eps_perp") c.eps_perp = parse_double(val, key);
  else if (key == "physics.eps_a") c.eps_a = parse_double(val, key);
  else if (key == "physics.lambda_npp") c.lambda_npp = parse_double(val, key);
  else if (key == "physics.mu_phi") c.mu_phi = parse_double(val, key);
  else if (key == "physics.nu_el") c.nu_el = parse_double(val, key);
  else if (key == "physics.alpha") c.alpha = parse_double(val, key);
  else if (key == "physics.beta") c.beta = parse_double(val, key);
  else if (key == "physics.stabilization") c.stabilization = parse_bool(val, key);
  else if (key == "physics.truncation") c.truncation = parse_bool(val, key);
  else if (key == "physics.truncation_c2") c.truncation_c2 = parse_double(val, key);
  else if (key == "physics.director_bc") c.director_bc = val;
  else if (key == "physics.applied_field_mode") {
    if (val == "none") c.field_mode = AppliedFieldMode::none;
    else if (val == "constant") c.field_mode = AppliedFieldMode::constant;
    else if (val == "cosine") c.field_mode = AppliedFieldMode::cosine;
    else throw ValidationError(key, "expected none/constant/cosine");
  }
  else if (key == "physics.applied_field_amplitude") c.field_amplitude = parse_vec(val, key);
  else if (key == "physics.applied_field_frequency") c.field_frequency = parse_double(val, key);
  else if (key == "initial.d0_mode") {
    if (val == "constant") c.d0_mode = DirectorInit::constant;
    else if (val == "defect_pair") c.d0_mode = DirectorInit::defect_pair;
    else throw ValidationError(key, "expected constant/defect_pair");
  }
  else if (key == "initial.d0_value") c.d0_value = parse_vec(val, key);
  else if (key == "initial.n0_mode") {
    if (val == "constant") c.n0_mode = ChargeInit::constant;
    else if (val == "gaussian_dipole") c.n0_mode = ChargeInit::gaussian_dipole;
    else throw ValidationError(key, "expected constant/gaussian_dipole");
  }
  else if (key == "initial.n0_value") c.n0_value = parse_double(val, key);
  else if (key == "initial.n0_width") c.n0_width = parse_double(val, key);
  else if (key == "initial.n0_offset") c.n0_offset = parse_double(val, key);
  else if (key == "initial.v0_mode") {
    if (val == "zero") c.v0_mode = VelocityInit::zero;
    else if (val == "rotation") c.v0_mode = VelocityInit::rotation;
    else throw ValidationError(key, "expected zero/rotation");
  }
  else if (key == "initial.v0_scale") c.v0_scale = parse_double(val, key);
  else if (key == "freeze.velocity") c.freeze_velocity = parse_bool(val, key);
  else if (key == "freeze.director") c.freeze_director = parse_bool(val, key);
  else if (key == "freeze.charges") c.freeze_charges = parse_bool(val, key);
  else if (key == "freeze.potential") c.freeze_potential = parse_bool(val, key);
  else if (key == "time.dt") c.dt = parse_double(val, key);
  else if (key == "time.tmax") c.tmax = parse_double(val, key);
  else if (key == "fixed_point.tol") c.fp_tol = parse_double(val, key);
  else if (key == "fixed_point.max_iters") c.fp_max_iters = parse_int(val, key);
  else if (key == "fixed_point.newton_tol") c.newton_tol = parse_double(val, key);
  else if (key == "fixed_point.newton_max_iters") c.newton_max_iters = parse_int(val, key);
  else if (key == "fixed_point.linear_tol") c.linear_tol = parse_double(val, key);
  else if (key == "fixed_point.divergence_tol") c.divergence_tol = parse_double(val, key);
  else if (key == "output.dir") c.out_dir = val;
  else if (key == "output.vtk_every") c.vtk_every = parse_int(val, key);
  else if (key == "output.certify") c.certify = parse_bool(val, key);
  else throw ValidationError(key, "unknown key");
}

ExperimentConfig parse_config_text(std::istream& in) {
  ExperimentConfig cfg;
  bool have_experiment = false;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (full == "experiment") {
      have_experiment = true;
      if (val != "custom") {
        ExperimentConfig preset = experiment_catalogue(val);
        // later keys override the preset
        preset.experiment = val;
        cfg = preset;
        continue;
      }
      cfg.experiment = "custom";
      continue;
    }
    apply_key(cfg, full, val);
  }
  if (!have_experiment) throw ValidationError("experiment", "missing");
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  return parse_config_text(in);
}

std::string config_to_string(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "experiment = " << c.experiment << "\n\n";
  os << "[mesh]\n";
  os << "dim = " << c.dim << "\n";
  os << "n = " << c.n << "\n";
  os << "pattern = " << mesh_pattern_name(c.pattern) << "\n";
  os << "box_min = " << vec_to_string(c.box_min) << "\n";
  os << "box_max = " << vec_to_string(c.box_max) << "\n\n";
  os << "[physics]\n";
  os << "nu = " << c.nu << "\n";
  os << "A = " << c.A << "\n";
  os << "eps_perp = " << c.eps_perp << "\n";
  os << "eps_a = " << c.eps_a << "\n";
  os << "lambda_npp = " << c.lambda_npp << "\n";
  os << "mu_phi = " << c.mu_phi << "\n";
  os << "nu_el = " << c.nu_el << "\n";
  os << "alpha = " << c.alpha << "\n";
  os << "beta = " << c.beta << "\n";
  os << "stabilization = " << (c.stabilization ? "on" : "off") << "\n";
  os << "truncation = " << (c.truncation ? "on" : "off") << "\n";
  os << "truncation_c2 = " << c.truncation_c2 << "\n";
  os << "director_bc = " << c.director_bc << "\n";
  os << "applied_field_mode = "
     << (c.field_mode == AppliedFieldMode::none
             ? "none"
             : (c.field_mode == AppliedFieldMode::constant ? "constant" : "cosine"))
     << "\n";
  os << "applied_field_amplitude = " << vec_to_string(c.field_amplitude) << "\n";
  os << "applied_field_frequency = " << c.field_frequency << "\n\n";
  os << "[initial]\n";
  os << "d0_mode = " << (c.d0_mode == DirectorInit::constant ? "constant" : "defect_pair") << "\n";
  os << "d0_value = " << vec_to_string(c.d0_value) << "\n";
  os << "n0_mode = " << (c.n0_mode == ChargeInit::constant ? "constant" : "gaussian_dipole")
     << "\n";
  os << "n0_value = " << c.n0_value << "\n";
  os << "n0_width = " << c.n0_width << "\n";
  os << "n0_offset = " << c.n0_offset << "\n";
  os << "v0_mode = " << (c.v0_mode == VelocityInit::zero ? "zero" : "rotation") << "\n";
  os << "v0_scale = " << c.v0_scale << "\n\n";
  os << "[freeze]\n";
  os << "velocity = " << (c.freeze_velocity ? "on" : "off") << "\n";
  os << "director = " << (c.freeze_director ? "on" : "off") << "\n";
  os << "charges = " << (c.freeze_charges ? "on" : "off") << "\n";
  os << "potential = " << (c.freeze_potential ? "on" : "off") << "\n\n";
  os << "[time]\n";
  os << "dt = " << c.dt << "\n";
  os << "tmax = " << c.tmax << "\n\n";
  os << "[fixed_point]\n";
  os << "tol = " << c.fp_tol << "\n";
  os << "max_iters = " << c.fp_max_iters << "\n";
  os << "newton_tol = " << c.newton_tol << "\n";
  os << "newton_max_iters = " << c.newton_max_iters << "\n";
  os << "linear_tol = " << c.linear_tol << "\n";
  os << "divergence_tol = " << c.divergence_tol << "\n\n";
  os << "[output]\n";
  os << "dir = " << c.out_dir << "\n";
  os << "vtk_every = " << c.vtk_every << "\n";
  os << "certify = " << (c.certify ? "on" : "off") << "\n";
  return os.str();
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file " + path);
  // the echo intentionally spells the experiment as custom so a reload
  // reproduces exactly the resolved values rather than the preset
  ExperimentConfig copy = cfg;
  copy.experiment = "custom";
  out << config_to_string(copy);
  if (!out) throw IoError("failed writing " + path);
}

// ---- catalogue --------------------------------------------------------------

std::vector<std::string> experiment_names() {
  return {"defect_flow",   "velocity_flow",      "dipole_static",    "aniso_diffusion",
          "aniso_diffusion_2d", "applied_field", "director_velocity", "oscillating_field"};
}

ExperimentConfig experiment_catalogue(const std::string& name) {
  ExperimentConfig c;
  c.experiment = name;
  if (name == "defect_flow") {
    // defect-driven flow: pure director/velocity coupling in 2d
    c.dim = 2;
    c.n = 16;
    c.A = 1.0;
    c.nu = 1.0;
    c.nu_el = 0.25;
    c.lambda_npp = 0.0;
    c.eps_a = 0.0;
    c.eps_perp = 0.0;
    c.dt = 5e-4;
    c.tmax = 0.1;
    c.d0_mode = DirectorInit::defect_pair;
    c.n0_mode = ChargeInit::constant;
    c.n0_value = 0.0;
  } else if (name == "velocity_flow") {
    // rigid rotation advects the defect pair
    c = experiment_catalogue("defect_flow");
    c.experiment = name;
    c.A = 0.1;
    c.nu_el = 1.0;
    c.v0_mode = VelocityInit::rotation;
    c.v0_scale = 10.0;
    c.tmax = 0.25;
  } else if (name == "dipole_static") {
    // stationary dipole: only potential and momentum evolve
    c.dim = 3;
    c.pattern = MeshPattern::tet_split;
    c.n = 8;  // reduced default; the published run used n = 32
    c.nu = 1.0;
    c.A = 0.1;
    c.lambda_npp = 100.0;
    c.nu_el = 1.0;
    c.mu_phi = 0.25;
    c.eps_perp = 0.1;
    c.eps_a = 100.0;
    c.dt = 5e-4;
    c.tmax = 5e-3;
    c.d0_mode = DirectorInit::constant;
    c.d0_value = Eigen::Vector3d(0, 0, 1);
    c.n0_mode = ChargeInit::gaussian_dipole;
    c.n0_width = 50.0;
    c.n0_offset = 0.2;
    c.freeze_director = true;
    c.freeze_charges = true;
  } else if (name == "aniso_diffusion") {
    // director-aligned diffusion of a charge dipole
    c.dim = 3;
    c.pattern = MeshPattern::tet_split;
    c.n = 8;  // reduced default; the published run used n = 16
    c.nu = 1.0;
    c.A = 0.1;
    c.lambda_npp = 100.0;
    c.nu_el = 1.0;
    c.mu_phi = 0.125;
    c.eps_perp = 0.1;
    c.eps_a = 100.0;
    c.dt = 2.5e-4;
    c.tmax = 0.045;
    c.d0_mode = DirectorInit::constant;
    c.d0_value = Eigen::Vector3d(0, 1, 1) / std::sqrt(2.0);
    c.n0_mode = ChargeInit::gaussian_dipole;
    c.n0_width = 25.0;
    c.n0_offset = 0.2;
  } else if (name == "aniso_diffusion_2d") {
    // planar variant: the diagonal in-plane director plays the role of the
    // out-of-axis orientation of the 3d run
    c = experiment_catalogue("aniso_diffusion");
    c.experiment = name;
    c.dim = 2;
    c.pattern = MeshPattern::crisscross;
    c.n = 16;
    c.d0_value = Eigen::Vector3d(1, 1, 0) / std::sqrt(2.0);
  } else if (name == "applied_field") {
    c.dim = 3;
    c.pattern = MeshPattern::tet_split;
    c.n = 8;  // reduced default; the published run used n = 16
    c.nu = 1.0;
    c.A = 0.1;
    c.lambda_npp = 1000.0;
    c.nu_el = 1.0;
    c.mu_phi = 1.0;
    c.eps_perp = 0.1;
    c.eps_a = 10.0;
    c.dt = 1e-3;
    c.tmax = 0.03;
    c.d0_mode = DirectorInit::constant;
    c.d0_value = Eigen::Vector3d(1, 1, 1) / std::sqrt(3.0);
    c.n0_mode = ChargeInit::constant;
    c.n0_value = 0.5;
    c.field_mode = AppliedFieldMode::constant;
    c.field_amplitude = Eigen::Vector3d(0.4, 0, 0);
  } else if (name == "director_velocity") {
    c = experiment_catalogue("applied_field");
    c.experiment = name;
    c.field_amplitude = Eigen::Vector3d(1, 0, 0);
    c.d0_value = Eigen::Vector3d(1, 0, 1) / std::sqrt(2.0);
    c.tmax = 0.04;
  } else if (name == "oscillating_field") {
    c = experiment_catalogue("director_velocity");
    c.experiment = name;
    c.field_mode = AppliedFieldMode::cosine;
    c.field_amplitude = Eigen::Vector3d(1, 0, 0);
    c.field_frequency = 35.0;
    c.tmax = 0.15;
  } else {
    throw UnknownExperiment(name);
  }
  return c;
}

}  // namespace nematic
