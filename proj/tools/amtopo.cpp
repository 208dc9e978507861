// SPDX-License-Identifier: Apache-2.0
// Command-line front end: optimize, verify, sweep and evaluate.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "amtopo/config.hpp"
#include "amtopo/verify.hpp"
#include "amtopo/vtk.hpp"

namespace fs = std::filesystem;
using namespace amtopo;

namespace {

struct CommonFlags {
  std::string out;
  int threads = 0;
  long seed = -1;
  std::string metric;
  bool nested = false;
  bool unnested = false;
  bool png = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--out", f.out, "output directory (overrides the config)");
  cmd->add_option("--threads", f.threads, "worker threads for the layer solves");
  cmd->add_option("--seed", f.seed, "random seed (overrides the config)");
  cmd->add_option("--metric", f.metric, "inner product: a1, a2 or a3");
  cmd->add_flag("--nested", f.nested, "force the nested continuation");
  cmd->add_flag("--unnested", f.unnested, "solve directly at the final level");
  cmd->add_option("--set", f.sets, "override a config key, e.g. --set cost.beta1=96")
      ->take_all();
  cmd->add_flag("--png", f.png, "also rasterize the final design as a PNG heatmap (2d)");
}

ProblemConfig configure(const std::string& path, const CommonFlags& f) {
  ProblemConfig cfg = load_config(path);
  for (const std::string& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.threads > 0) cfg.threads = f.threads;
  if (const char* env = std::getenv("AMTOPO_THREADS"); env && f.threads == 0)
    cfg.threads = std::max(1, std::atoi(env));
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (!f.metric.empty()) cfg.metric = f.metric;
  if (f.nested) cfg.nested = true;
  if (f.unnested) cfg.nested = false;
  cfg.validate();
  return cfg;
}

std::vector<VtkField> design_fields(const Problem& prob, const Vector& phi) {
  std::vector<VtkField> fields;
  if (prob.space.scalar) {
    fields.push_back({"phi", prob.space.view(phi)});
  } else {
    const Matrix v = prob.space.view(phi);
    for (int c = 0; c < prob.space.comps; ++c)
      fields.push_back({"phi_" + std::to_string(c), v.row(c)});
  }
  return fields;
}

void write_summary(const fs::path& dir, const ProblemConfig& cfg, const RunResult& run) {
  std::ofstream os(dir / "summary.txt");
  os.precision(12);
  os << "converged " << (run.converged ? 1 : 0) << "\n";
  os << "iterations " << run.iterations << "\n";
  os << "mean_pdas " << run.mean_pdas << "\n";
  os << "wall_seconds " << run.wall_seconds << "\n";
  os << "j " << run.cost.j << "\n";
  os << "E " << run.cost.E << "\n";
  os << "E_scalar " << run.cost.E_scalar << "\n";
  os << "F " << run.cost.F << "\n";
  os << "W " << run.cost.W << "\n";
  os << "beta1 " << cfg.beta1 << "\n";
  os << "beta2 " << cfg.beta2 << "\n";
  os << "max_feasibility_violation " << run.max_feasibility_violation << "\n";
  os << "max_mass_violation " << run.max_mass_violation << "\n";
  os << "monotone " << (run.monotone ? 1 : 0) << "\n";
}

RunResult optimize(const ProblemConfig& cfg, const fs::path& dir, bool png = false) {
  fs::create_directories(dir);
  std::ofstream history(dir / "history.csv");
  std::ofstream timing(dir / "timing.csv");
  history << history_csv_header();
  timing << "k,wall_ms\n";

  RunHooks hooks;
  hooks.checkpoint_stride = cfg.stride;
  hooks.on_iteration = [&](const IterationRecord& rec) {
    history << history_csv_row(rec);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%.3f\n", rec.k, rec.wall_ms);
    timing << buf;
  };
  hooks.on_checkpoint = [&](int k, const Problem& prob, const Vector& phi) {
    char name[64];
    std::snprintf(name, sizeof(name), "phi_%06d.vtk", k);
    write_vtk(prob.mesh, design_fields(prob, phi), (dir / name).string());
  };

  VMPTConfig vc = vmpt_config(cfg);
  RunResult run;
  Problem final_problem = make_problem(cfg);
  if (cfg.nested) {
    const auto make = [&](const IntVector& div, int layers) {
      return make_problem_at(cfg, div, layers);
    };
    run = nested_run(make, mesh_spec(cfg), vc, &hooks);
  } else {
    Vector phi0 = initialize(final_problem, vc);
    run = vmpt_run(final_problem, vc, phi0, &hooks);
  }

  // final design and displacement written at the target resolution
  State st = evaluate(final_problem, run.phi, {cfg.threads, false});
  std::vector<VtkField> fields = design_fields(final_problem, run.phi);
  fields.push_back({"u", st.ms.displacement(final_problem.mesh)});
  write_vtk(final_problem.mesh, fields, (dir / "final.vtk").string());
  if (png && final_problem.mesh.dim == 2)
    write_png_heatmap(final_problem.mesh, final_problem.space.fractions(run.phi),
                      (dir / "final.png").string());
  write_summary(dir, cfg, run);
  {
    std::ofstream os(dir / "config.cfg");
    os << dump_config(cfg);
  }
  return run;
}

int cmd_run(const std::string& config_path, const CommonFlags& flags) {
  ProblemConfig cfg = configure(config_path, flags);
  RunResult run = optimize(cfg, cfg.out_dir, flags.png);
  std::printf("%s after %d iterations: j = %.9g (E_scalar %.6g, F %.6g, W %.6g), %.1fs\n",
              run.converged ? "converged" : "stopped", run.iterations, run.cost.j,
              run.cost.E_scalar, run.cost.F, run.cost.W, run.wall_seconds);
  return run.converged ? 0 : 1;
}

int cmd_verify(const std::string& config_path, const CommonFlags& flags) {
  ProblemConfig cfg = configure(config_path, flags);
  fs::create_directories(cfg.out_dir);

  // inequality checks run on a deliberately tiny slice family
  ProblemConfig tiny = cfg;
  tiny.divisions = IntVector(cfg.dim());
  const int per_axis = cfg.dim() == 2 ? 8 : 4;
  for (int a = 0; a < cfg.dim(); ++a) tiny.divisions[a] = per_axis;
  tiny.layers = 4;
  Mesh mesh = build_mesh(mesh_spec(tiny), BoundaryRules{{cfg.dirichlet}, {}, {cfg.plate}});
  VerificationReport rep = verify_inequalities(mesh, cfg.material.at(0));

  // derivative audit on the configured problem at a smooth interior design
  Problem prob = make_problem(cfg);
  Vector phi(prob.space.size());
  if (prob.space.scalar) {
    for (Index i = 0; i < prob.space.n_nodes; ++i) {
      const double x = prob.mesh.nodes(0, i), y = prob.mesh.nodes(1, i);
      phi[i] = cfg.mass[0] + 0.3 * std::sin(1.7 * x) * std::cos(2.3 * y);
    }
  } else {
    Matrix v = cfg.mass.replicate(1, prob.space.n_nodes);
    for (Index i = 0; i < prob.space.n_nodes; ++i) {
      const double x = prob.mesh.nodes(0, i);
      const double bump = 0.1 * std::sin(2.1 * x);
      v(0, i) += bump;
      v(prob.space.comps - 1, i) -= bump;
    }
    phi = prob.space.flatten(v);
  }
  Rng rng(cfg.seed);
  std::vector<Vector> dirs;
  for (int t = 0; t < 3; ++t) {
    Vector z(prob.space.size());
    for (Index i = 0; i < z.size(); ++i) z[i] = rng.next_normal();
    Matrix zv = prob.space.view(z);
    for (int c = 0; c < prob.space.comps; ++c)
      zv.row(c).array() -=
          prob.mesh.lumped_mass.dot(zv.row(c).transpose()) / prob.mesh.domain_volume();
    dirs.push_back(prob.space.flatten(zv));
  }
  GradientAudit audit = gradient_audit(prob, phi, dirs);

  const std::string text = rep.text() + "\n" + audit.text();
  std::cout << text;
  std::ofstream(fs::path(cfg.out_dir) / "verify.txt") << text;
  std::ofstream(fs::path(cfg.out_dir) / "verify.kv")
      << rep.key_values() << audit.key_values();
  const bool ok = rep.pass && audit.best_total <= 1e-5;
  std::printf("verification %s\n", ok ? "passed" : "FAILED");
  return ok ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& param, const CommonFlags& flags) {
  const auto eq = param.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--param expects key=v1,v2,..., got '" + param + "'");
  const std::string key = param.substr(0, eq);
  std::vector<std::string> values;
  {
    std::stringstream ss(param.substr(eq + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(tok);
  }
  if (values.empty()) throw ConfigError("--param needs at least one value");

  ProblemConfig base = configure(config_path, flags);
  fs::create_directories(base.out_dir);
  std::ofstream sweep(fs::path(base.out_dir) / "sweep.csv");
  sweep << "param,value,j,E,E_scalar,F,W,iterations,wall_seconds\n";

  for (const std::string& v : values) {
    ProblemConfig cfg = base;
    apply_override(cfg, key, v);
    cfg.out_dir = (fs::path(base.out_dir) / (key + "=" + v)).string();
    RunResult run = optimize(cfg, cfg.out_dir);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.3f\n",
                  key.c_str(), v.c_str(), run.cost.j, run.cost.E, run.cost.E_scalar,
                  run.cost.F, run.cost.W, run.iterations, run.wall_seconds);
    sweep << buf;
    std::printf("%s = %s: j = %.9g, W = %.6g, F = %.6g (%d iterations)\n", key.c_str(),
                v.c_str(), run.cost.j, run.cost.W, run.cost.F, run.iterations);
  }
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& field_path,
             const CommonFlags& flags) {
  ProblemConfig cfg = configure(config_path, flags);
  Problem prob = make_problem(cfg);
  VtkData data = read_vtk(field_path);
  if (data.n_points != prob.mesh.n_nodes())
    throw ConfigError("field file has " + std::to_string(data.n_points) +
                      " points, the mesh has " + std::to_string(prob.mesh.n_nodes()));

  Vector phi(prob.space.size());
  if (prob.space.scalar) {
    const auto it = data.point_data.find("phi");
    if (it == data.point_data.end()) throw ConfigError("field file lacks SCALARS 'phi'");
    phi = it->second.row(0).transpose();
  } else {
    Matrix v(prob.space.comps, prob.space.n_nodes);
    for (int c = 0; c < prob.space.comps; ++c) {
      const auto it = data.point_data.find("phi_" + std::to_string(c));
      if (it == data.point_data.end())
        throw ConfigError("field file lacks SCALARS 'phi_" + std::to_string(c) + "'");
      v.row(c) = it->second.row(0);
    }
    phi = prob.space.flatten(v);
  }

  State st = evaluate(prob, phi, {cfg.threads, false});
  std::printf("j = %.12g\nE = %.12g\nE_scalar = %.12g\nF = %.12g\nW = %.12g\n", st.cost.j,
              st.cost.E, st.cost.E_scalar, st.cost.F, st.cost.W);
  fs::create_directories(cfg.out_dir);
  std::ofstream os(fs::path(cfg.out_dir) / "eval.kv");
  os.precision(17);
  os << "j=" << st.cost.j << "\nE=" << st.cost.E << "\nE_scalar=" << st.cost.E_scalar
     << "\nF=" << st.cost.F << "\nW=" << st.cost.W << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-material topology optimization with layer-by-layer overhang penalties"};
  app.require_subcommand(1);

  std::string config_path, field_path, param;
  CommonFlags flags;

  CLI::App* run = app.add_subcommand("run", "optimize a configuration");
  run->add_option("config", config_path, "configuration file")->required();
  add_common(run, flags);

  CLI::App* verify = app.add_subcommand("verify", "inequality checks and derivative audit");
  verify->add_option("config", config_path, "configuration file")->required();
  add_common(verify, flags);

  CLI::App* sweep = app.add_subcommand("sweep", "parameter study");
  sweep->add_option("config", config_path, "configuration file")->required();
  sweep->add_option("--param", param, "key=v1,v2,... to sweep")->required();
  add_common(sweep, flags);

  CLI::App* eval = app.add_subcommand("eval", "cost breakdown of a stored design");
  eval->add_option("config", config_path, "configuration file")->required();
  eval->add_option("field", field_path, "VTK file with the design")->required();
  add_common(eval, flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, flags);
    if (verify->parsed()) return cmd_verify(config_path, flags);
    if (sweep->parsed()) return cmd_sweep(config_path, param, flags);
    if (eval->parsed()) return cmd_eval(config_path, field_path, flags);
  } catch (const ConfigError& ex) {
    std::fprintf(stderr, "configuration error: %s\n", ex.what());
    return 2;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
