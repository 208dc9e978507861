// SPDX-License-Identifier: Apache-2.0
#include "amtopo/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace amtopo {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& path, const std::string& why) {
  throw ConfigError("config key '" + path + "': " + why);
}

double to_double(const std::string& path, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) bad_key(path, "expected a number, got '" + v + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_key(path, "expected a number, got '" + v + "'");
  }
}

long to_long(const std::string& path, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) bad_key(path, "expected an integer, got '" + v + "'");
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_key(path, "expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& path, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_key(path, "expected true/false, got '" + v + "'");
}

std::vector<double> to_numbers(const std::string& path, const std::string& v) {
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_double(path, tok));
  if (out.empty()) bad_key(path, "expected at least one number");
  return out;
}

Vector to_vector(const std::string& path, const std::string& v) {
  const std::vector<double> n = to_numbers(path, v);
  return Eigen::Map<const Vector>(n.data(), static_cast<Index>(n.size()));
}

IntVector to_int_vector(const std::string& path, const std::string& v) {
  const std::vector<double> n = to_numbers(path, v);
  IntVector out(static_cast<Index>(n.size()));
  for (std::size_t i = 0; i < n.size(); ++i) {
    out[static_cast<Index>(i)] = static_cast<int>(n[i]);
    if (out[static_cast<Index>(i)] != n[i]) bad_key(path, "expected integers");
  }
  return out;
}

std::vector<Lame> to_lame_pairs(const std::string& path, const std::string& v) {
  const std::vector<double> n = to_numbers(path, v);
  if (n.size() % 2 != 0) bad_key(path, "expected lambda/mu pairs");
  std::vector<Lame> out;
  for (std::size_t i = 0; i < n.size(); i += 2) out.push_back(Lame{n[i], n[i + 1]});
  return out;
}

/// Boxes are given as per-axis lo/hi pairs, several boxes separated by ';'.
std::vector<Box> to_boxes(const std::string& path, const std::string& v) {
  std::vector<Box> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, ';')) {
    part = trim(part);
    if (part.empty()) continue;
    const std::vector<double> n = to_numbers(path, part);
    if (n.size() % 2 != 0 || n.empty()) bad_key(path, "expected lo/hi pairs per axis");
    const Index d = static_cast<Index>(n.size() / 2);
    Box b;
    b.lo = Vector(d);
    b.hi = Vector(d);
    for (Index a = 0; a < d; ++a) {
      b.lo[a] = n[2 * a];
      b.hi[a] = n[2 * a + 1];
    }
    out.push_back(b);
  }
  if (out.empty()) bad_key(path, "expected at least one box");
  return out;
}

void set_key(ProblemConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value) {
  const std::string path = section + "." + key;
  if (section == "mesh") {
    if (key == "extents") cfg.extents = to_vector(path, value);
    else if (key == "divisions") cfg.divisions = to_int_vector(path, value);
    else if (key == "layers") cfg.layers = static_cast<int>(to_long(path, value));
    else if (key == "build_axis") cfg.build_axis = static_cast<int>(to_long(path, value));
    else bad_key(path, "unknown key");
  } else if (section == "phase") {
    if (key == "scalar") cfg.scalar = to_bool(path, value);
    else if (key == "phases") cfg.phases = static_cast<int>(to_long(path, value));
    else if (key == "mass") cfg.mass = to_vector(path, value);
    else if (key == "epsilon") cfg.epsilon = to_double(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "materials") {
    if (key == "lame") cfg.material = to_lame_pairs(path, value);
    else if (key == "ersatz") {
      const auto p = to_lame_pairs(path, value);
      if (p.size() != 1) bad_key(path, "expected exactly one pair");
      cfg.ersatz = p[0];
    } else if (key == "build_lame") cfg.build_material = to_lame_pairs(path, value);
    else if (key == "hardening") {
      const auto n = to_numbers(path, value);
      cfg.hardening = n;
    } else bad_key(path, "unknown key");
  } else if (section == "forces") {
    if (key == "g") cfg.traction = to_vector(path, value);
    else if (key == "f") cfg.body_const = to_vector(path, value);
    else if (key == "f_material") cfg.body_material = to_vector(path, value);
    else if (key == "fc_material") cfg.gravity_material = to_vector(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "boundary") {
    if (key == "dirichlet") cfg.dirichlet = to_boxes(path, value);
    else if (key == "neumann") cfg.neumann = to_boxes(path, value);
    else if (key == "plate") cfg.plate = to_boxes(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "cost") {
    if (key == "beta1") cfg.beta1 = to_double(path, value);
    else if (key == "beta2") cfg.beta2 = to_double(path, value);
    else if (key == "weights") cfg.weights = value;
    else if (key == "weight_table") cfg.weight_table = to_vector(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "vmpt") {
    if (key == "metric") cfg.metric = value;
    else if (key == "tol") cfg.tol = to_double(path, value);
    else if (key == "k_max") cfg.k_max = static_cast<int>(to_long(path, value));
    else if (key == "tau") cfg.tau = to_double(path, value);
    else if (key == "sigma") cfg.sigma = to_double(path, value);
    else if (key == "lambda0") cfg.lambda0 = to_double(path, value);
    else if (key == "lambda_min") cfg.lambda_min = to_double(path, value);
    else if (key == "lambda_max") cfg.lambda_max = to_double(path, value);
    else if (key == "lambda_c") cfg.lambda_c = to_double(path, value);
    else if (key == "nested") cfg.nested = to_bool(path, value);
    else if (key == "m0") cfg.m0 = static_cast<int>(to_long(path, value));
    else if (key == "khat") cfg.khat = static_cast<int>(to_long(path, value));
    else if (key == "growth") cfg.growth = static_cast<int>(to_long(path, value));
    else if (key == "noise") cfg.noise = to_double(path, value);
    else bad_key(path, "unknown key");
  } else if (section == "output") {
    if (key == "dir") cfg.out_dir = value;
    else if (key == "stride") cfg.stride = static_cast<int>(to_long(path, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_long(path, value));
    else if (key == "threads") cfg.threads = static_cast<int>(to_long(path, value));
    else bad_key(path, "unknown key");
  } else {
    bad_key(path, "unknown section");
  }
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_vec(const Vector& v) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) out += " ";
    out += fmt_num(v[i]);
  }
  return out;
}

std::string fmt_boxes(const std::vector<Box>& boxes) {
  std::string out;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    if (b) out += " ; ";
    for (Index a = 0; a < boxes[b].lo.size(); ++a) {
      if (a) out += " ";
      out += fmt_num(boxes[b].lo[a]) + " " + fmt_num(boxes[b].hi[a]);
    }
  }
  return out;
}

std::string fmt_lame(const std::vector<Lame>& pairs) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += " ";
    out += fmt_num(pairs[i].lambda) + " " + fmt_num(pairs[i].mu);
  }
  return out;
}

}  // namespace

void ProblemConfig::validate() const {
  if (extents.size() == 0) throw ConfigError("missing required key 'mesh.extents'");
  if (divisions.size() == 0) throw ConfigError("missing required key 'mesh.divisions'");
  if (mass.size() == 0) throw ConfigError("missing required key 'phase.mass'");
  if (dirichlet.empty()) throw ConfigError("missing required key 'boundary.dirichlet'");
  const int d = dim();
  if (d < 2 || d > 3) throw ConfigError("config key 'mesh.extents': need 2 or 3 entries");
  if (divisions.size() != d) throw ConfigError("config key 'mesh.divisions': size mismatch");
  if (phases < 2) throw ConfigError("config key 'phase.phases': need at least 2");
  if (scalar && phases != 2)
    throw ConfigError("config key 'phase.scalar': the scalar form needs exactly 2 phases");
  if (scalar) {
    if (mass.size() != 1) throw ConfigError("config key 'phase.mass': one entry expected");
    if (mass[0] < -1.0 || mass[0] > 1.0)
      throw ConfigError("config key 'phase.mass': must lie in [-1, 1]");
  } else {
    if (mass.size() != phases)
      throw ConfigError("config key 'phase.mass': one entry per phase expected");
    if (std::abs(mass.sum() - 1.0) > 1e-12)
      throw ConfigError("config key 'phase.mass': entries must sum to 1");
    if (mass.minCoeff() < 0.0) throw ConfigError("config key 'phase.mass': entries must be >= 0");
  }
  if (!(epsilon > 0.0)) throw ConfigError("config key 'phase.epsilon': must be positive");
  if (static_cast<int>(material.size()) != phases - 1)
    throw ConfigError("config key 'materials.lame': one pair per material phase expected");
  if (!build_material.empty() && static_cast<int>(build_material.size()) != phases - 1)
    throw ConfigError("config key 'materials.build_lame': one pair per material phase expected");
  if (weights != "w1" && weights != "w2" && weights != "w3" && weights != "wnorm" &&
      weights != "table")
    throw ConfigError("config key 'cost.weights': expected w1, w2, w3, wnorm or table");
  if (weights == "table" && weight_table.size() != layers)
    throw ConfigError("config key 'cost.weight_table': one entry per layer expected");
  parse_metric(metric);  // throws on unknown names
  for (const auto& boxes : {dirichlet, neumann, plate})
    for (const Box& b : boxes)
      if (b.lo.size() != d) throw ConfigError("boundary boxes must match the mesh dimension");
  mesh_spec(*this).validate();
}

ProblemConfig parse_config(const std::string& text) {
  ProblemConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside of any section");
    set_key(cfg, section, key, value);
  }
  // default construction-stage pairs: the final-use table
  if (cfg.build_material.empty()) cfg.build_material = cfg.material;
  cfg.validate();
  return cfg;
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ProblemConfig& cfg) {
  std::ostringstream os;
  os << "[mesh]\n";
  os << "extents = " << fmt_vec(cfg.extents) << "\n";
  os << "divisions =";
  for (Index i = 0; i < cfg.divisions.size(); ++i) os << " " << cfg.divisions[i];
  os << "\n";
  os << "layers = " << cfg.layers << "\n";
  os << "build_axis = " << cfg.build_axis << "\n";
  os << "\n[phase]\n";
  os << "scalar = " << (cfg.scalar ? "true" : "false") << "\n";
  os << "phases = " << cfg.phases << "\n";
  os << "mass = " << fmt_vec(cfg.mass) << "\n";
  os << "epsilon = " << fmt_num(cfg.epsilon) << "\n";
  os << "\n[materials]\n";
  os << "lame = " << fmt_lame(cfg.material) << "\n";
  os << "ersatz = " << fmt_num(cfg.ersatz.lambda) << " " << fmt_num(cfg.ersatz.mu) << "\n";
  os << "build_lame = " << fmt_lame(cfg.build_material) << "\n";
  if (!cfg.hardening.empty()) {
    os << "hardening =";
    for (double v : cfg.hardening) os << " " << fmt_num(v);
    os << "\n";
  }
  os << "\n[forces]\n";
  if (cfg.traction.size()) os << "g = " << fmt_vec(cfg.traction) << "\n";
  if (cfg.body_const.size()) os << "f = " << fmt_vec(cfg.body_const) << "\n";
  if (cfg.body_material.size()) os << "f_material = " << fmt_vec(cfg.body_material) << "\n";
  if (cfg.gravity_material.size())
    os << "fc_material = " << fmt_vec(cfg.gravity_material) << "\n";
  os << "\n[boundary]\n";
  os << "dirichlet = " << fmt_boxes(cfg.dirichlet) << "\n";
  if (!cfg.neumann.empty()) os << "neumann = " << fmt_boxes(cfg.neumann) << "\n";
  if (!cfg.plate.empty()) os << "plate = " << fmt_boxes(cfg.plate) << "\n";
  os << "\n[cost]\n";
  os << "beta1 = " << fmt_num(cfg.beta1) << "\n";
  os << "beta2 = " << fmt_num(cfg.beta2) << "\n";
  os << "weights = " << cfg.weights << "\n";
  if (cfg.weight_table.size()) os << "weight_table = " << fmt_vec(cfg.weight_table) << "\n";
  os << "\n[vmpt]\n";
  os << "metric = " << cfg.metric << "\n";
  os << "tol = " << fmt_num(cfg.tol) << "\n";
  os << "k_max = " << cfg.k_max << "\n";
  os << "tau = " << fmt_num(cfg.tau) << "\n";
  os << "sigma = " << fmt_num(cfg.sigma) << "\n";
  os << "lambda0 = " << fmt_num(cfg.lambda0) << "\n";
  os << "lambda_min = " << fmt_num(cfg.lambda_min) << "\n";
  os << "lambda_max = " << fmt_num(cfg.lambda_max) << "\n";
  os << "lambda_c = " << fmt_num(cfg.lambda_c) << "\n";
  os << "nested = " << (cfg.nested ? "true" : "false") << "\n";
  os << "m0 = " << cfg.m0 << "\n";
  os << "khat = " << cfg.khat << "\n";
  os << "growth = " << cfg.growth << "\n";
  os << "noise = " << fmt_num(cfg.noise) << "\n";
  os << "\n[output]\n";
  os << "dir = " << cfg.out_dir << "\n";
  os << "stride = " << cfg.stride << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "threads = " << cfg.threads << "\n";
  return os.str();
}

void apply_override(ProblemConfig& cfg, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override '" + key + "': expected section.key");
  set_key(cfg, key.substr(0, dot), key.substr(dot + 1), trim(value));
  if (cfg.build_material.empty()) cfg.build_material = cfg.material;
}

MeshSpec mesh_spec(const ProblemConfig& cfg) {
  MeshSpec spec;
  spec.extents = cfg.extents;
  spec.divisions = cfg.divisions;
  spec.layers = cfg.layers;
  spec.build_axis = cfg.build_axis;
  return spec;
}

VMPTConfig vmpt_config(const ProblemConfig& cfg) {
  VMPTConfig v;
  v.tau = cfg.tau;
  v.sigma = cfg.sigma;
  v.lambda0 = cfg.lambda0;
  v.lambda_min = cfg.lambda_min;
  v.lambda_max = cfg.lambda_max;
  v.lambda_c = cfg.lambda_c;
  v.metric = parse_metric(cfg.metric);
  v.tol = cfg.tol;
  v.k_max = cfg.k_max;
  v.threads = cfg.threads;
  v.nest_m0 = cfg.m0;
  v.nest_khat = cfg.khat_effective();
  v.nest_growth = cfg.growth;
  v.seed = cfg.seed;
  v.noise_sigma = cfg.noise;
  return v;
}

Problem make_problem_at(const ProblemConfig& cfg, const IntVector& divisions, int layers) {
  cfg.validate();
  const int d = cfg.dim();
  MeshSpec spec = mesh_spec(cfg);
  spec.divisions = divisions;
  spec.layers = layers;

  BoundaryRules rules;
  rules.dirichlet = cfg.dirichlet;
  rules.neumann = cfg.neumann;
  rules.plate = cfg.plate;
  Mesh mesh = build_mesh(spec, rules);

  DesignSpace space;
  space.n_nodes = mesh.n_nodes();
  space.scalar = cfg.scalar;
  space.comps = cfg.scalar ? 1 : cfg.phases;
  space.target_mass = cfg.mass;

  const double soft_l = cfg.epsilon * cfg.epsilon * cfg.ersatz.lambda;
  const double soft_m = cfg.epsilon * cfg.epsilon * cfg.ersatz.mu;
  MaterialSet mat;
  mat.final_use = cfg.material;
  mat.final_use.push_back(Lame{soft_l, soft_m});
  const std::vector<Lame>& build = cfg.build_material;
  const std::size_t depths = std::max<std::size_t>(1, cfg.hardening.size());
  for (std::size_t t = 0; t < depths; ++t) {
    std::vector<Lame> table = build;
    if (!cfg.hardening.empty()) table[0] = Lame{cfg.hardening[t], cfg.hardening[t]};
    table.push_back(Lame{soft_l, soft_m});
    mat.build_by_depth.push_back(table);
  }

  const int np = cfg.phases;
  ForceSpec forces;
  forces.body = AffineForce::none(d, np);
  if (cfg.body_const.size()) forces.body.base += cfg.body_const;
  if (cfg.body_material.size()) {
    forces.body.base += cfg.body_material;
    forces.body.coupling.col(np - 1) -= cfg.body_material;
  }
  forces.traction = AffineForce::none(d, np);
  if (cfg.traction.size()) forces.traction.base = cfg.traction;
  forces.gravity = AffineForce::none(d, np);
  if (cfg.gravity_material.size()) forces.gravity = material_weight(d, np, cfg.gravity_material);

  WeightScheme ws;
  if (cfg.weights == "w1") ws.kind = WeightKind::PerHeight;
  else if (cfg.weights == "w2") ws.kind = WeightKind::Uniform;
  else if (cfg.weights == "w3") ws.kind = WeightKind::TopLayer;
  else if (cfg.weights == "wnorm") ws.kind = WeightKind::Normalized;
  else {
    ws.kind = WeightKind::Table;
    ws.table = cfg.weight_table;
  }

  return build_problem(std::move(mesh), space, mat, forces, ws, cfg.beta1, cfg.beta2,
                       cfg.epsilon);
}

Problem make_problem(const ProblemConfig& cfg) {
  return make_problem_at(cfg, cfg.divisions, cfg.layers);
}

std::string history_csv_header() {
  return "k,level,j,E,E_scalar,F,W,lambda,alpha,backtracks,stop_measure,v_h1,pdas_iters,"
         "minres_iters\n";
}

std::string history_csv_row(const IterationRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.12g,%.12g,%d,%ld\n",
                r.k, r.level, r.j, r.E, r.E_scalar, r.F, r.W, r.lambda, r.alpha, r.backtracks,
                r.stop_measure, r.v_h1, r.pdas_iters, r.minres_iters);
  return buf;
}

}  // namespace amtopo
