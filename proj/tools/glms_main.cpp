// glms: sparsify/solve generalized linear models from the command line.
//
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 audit failure.

#include <chrono>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "glms/errors.hpp"
#include "glms/io.hpp"
#include "glms/solve.hpp"
#include "glms/sparsify.hpp"
#include "glms/weights.hpp"

namespace {

using glms::JValue;
using Params = std::map<std::string, std::string>;

double p_num(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw glms::config_error("missing parameter: " + key);
  try {
    return std::stod(it->second);
  } catch (...) {
    throw glms::config_error("bad numeric parameter: " + key);
  }
}

double p_num_or(const Params& p, const std::string& key, double dflt) {
  return p.count(key) ? p_num(p, key) : dflt;
}

long long p_int(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw glms::config_error("missing parameter: " + key);
  try {
    return std::stoll(it->second);
  } catch (...) {
    throw glms::config_error("bad integer parameter: " + key);
  }
}

long long p_int_or(const Params& p, const std::string& key, long long dflt) {
  return p.count(key) ? p_int(p, key) : dflt;
}

std::string p_str(const Params& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw glms::config_error("missing parameter: " + key);
  return it->second;
}

std::string p_str_or(const Params& p, const std::string& key,
                     const std::string& dflt) {
  return p.count(key) ? p.at(key) : dflt;
}

struct CommandIO {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, double> timings_ms;
};

class StageTimer {
 public:
  StageTimer(CommandIO& io, std::string name)
      : io_(io), name_(std::move(name)), t0_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const auto t1 = std::chrono::steady_clock::now();
    io_.timings_ms[name_] =
        std::chrono::duration<double, std::milli>(t1 - t0_).count();
  }

 private:
  CommandIO& io_;
  std::string name_;
  std::chrono::steady_clock::time_point t0_;
};

glms::ProblemInstance load_from_params(const Params& p, CommandIO& io) {
  const std::string matrix = p_str(p, "matrix");
  const std::string shift = p_str_or(p, "shift", "");
  io.inputs.push_back(matrix);
  if (!shift.empty()) io.inputs.push_back(shift);
  return glms::load_instance(matrix, shift, p_str(p, "loss"));
}

int cmd_sparsify(const Params& p, CommandIO& io) {
  glms::ProblemInstance inst = load_from_params(p, io);
  glms::SparsifyConfig cfg;
  cfg.eps = p_num(p, "eps");
  cfg.smin = p_num(p, "smin");
  cfg.smax = p_num(p, "smax");
  cfg.seed = (uint64_t)p_int(p, "seed");
  cfg.bootstrap_rounds = int(p_int_or(p, "rounds", 1));
  cfg.budget_scale = p_num_or(p, "budget-scale", 1.0);
  cfg.audit = p_int_or(p, "audit", 1) != 0;
  cfg.threads = int(p_int_or(p, "threads", 1));
  if (p.count("budget")) cfg.budget_override = std::size_t(p_int(p, "budget"));

  glms::SparsifiedModel model;
  {
    StageTimer t(io, "sparsify");
    if (p_int_or(p, "globalize", 0) != 0) {
      model = glms::sparsify(inst, cfg);
      model = glms::huber_globalize(std::move(model), inst, cfg);
    } else {
      model = glms::sparsify(inst, cfg);
    }
  }
  const std::string out = p_str(p, "out");
  glms::write_text(out, glms::model_to_json(model).dump(2));
  io.outputs.push_back(out);
  std::printf("sparsify: m=%d support=%zu M=%zu tau_l1=%.6g doublings=%d\n",
              inst.m(), model.support(), model.sample_count, model.tau_l1,
              model.budget_doublings);
  return 0;
}

int cmd_audit(const Params& p, CommandIO& io) {
  glms::ProblemInstance inst = load_from_params(p, io);
  const std::string model_path = p_str(p, "model");
  io.inputs.push_back(model_path);
  glms::SparsifiedModel model = glms::model_from_json(glms::read_text(model_path));
  glms::AuditReport rep;
  {
    StageTimer t(io, "audit");
    rep = glms::audit_sparsifier(inst, model, int(p_int_or(p, "dirs", 0)),
                                 int(p_int_or(p, "scales", 24)),
                                 (uint64_t)p_int(p, "seed"),
                                 int(p_int_or(p, "threads", 1)));
  }
  if (p.count("out")) {
    glms::write_text(p.at("out"), glms::audit_to_json(rep).dump(2));
    io.outputs.push_back(p.at("out"));
  }
  std::printf("audit: max_rel_err=%.6g (target eps=%.6g) c_xi=%.4g dirs=%d\n",
              rep.max_rel_err, model.eps, rep.c_xi, rep.dirs_used);
  if (rep.max_rel_err > model.eps)
    throw glms::audit_error("audit: relative error exceeds the model tolerance");
  return 0;
}

int cmd_weights(const Params& p, CommandIO& io) {
  glms::ProblemInstance inst = load_from_params(p, io);
  if (inst.shifted()) inst = glms::lift_shift(inst);
  const int jmin = int(p_int(p, "jmin"));
  const int jmax = int(p_int(p, "jmax"));
  const uint64_t seed = (uint64_t)p_int(p, "seed");
  glms::WeightScheme scheme;
  {
    StageTimer t(io, "weights");
    const double smax = std::ldexp(1.0, jmax);
    const double delta_pert = p_num_or(p, "delta-pert", 1e-6);
    glms::InitialWeights iw =
        glms::initial_weights(inst.A, inst.family, smax, 0.5, delta_pert, seed);
    scheme = glms::find_weights(inst.A, iw.perturbed, jmin, jmax, iw.w0, iw.beta,
                                0.1, seed + 1);
  }
  const std::string out = p_str(p, "out");
  glms::write_text(out, glms::scheme_to_json(scheme).dump(2));
  io.outputs.push_back(out);
  std::printf("weights: scales=%d alpha=%.6g tau_l1=%.6g\n", scheme.scales(),
              scheme.alpha, scheme.score_l1);
  return 0;
}

int cmd_certify(const Params& p, CommandIO& io) {
  glms::LossFamily fam = glms::loss_from_json(p_str(p, "loss"));
  glms::PropertyCertificate cert =
      glms::certify_properties(fam, int(p_int_or(p, "term", 0)));
  JValue j = JValue::object();
  auto put = [&](const char* name, const glms::PropertyCheck& c) {
    JValue e = JValue::object();
    e.set("pass", JValue::boolean(c.pass));
    e.set("worst_ratio", JValue::num(c.worst_ratio));
    e.set("witness_z", JValue::num(c.witness_z));
    e.set("witness_aux", JValue::num(c.witness_aux));
    j.set(name, std::move(e));
  };
  put("auto_lipschitz", cert.auto_lipschitz);
  put("lower_homog", cert.lower_homog);
  put("symmetric", cert.symmetric);
  put("monotone", cert.monotone);
  put("upper_homog", cert.upper_homog);
  put("deriv_consistency", cert.deriv_consistency);
  j.set("pass", JValue::boolean(cert.pass));
  if (p.count("out")) {
    glms::write_text(p.at("out"), j.dump(2));
    io.outputs.push_back(p.at("out"));
  }
  std::printf("certify-loss: %s\n", cert.pass ? "PASS" : "FAIL");
  if (!cert.pass) throw glms::audit_error("loss certification failed");
  return 0;
}

int cmd_solve(const Params& p, CommandIO& io) {
  const std::string matrix = p_str(p, "matrix");
  io.inputs.push_back(matrix);
  glms::RowMatrix a_mat = glms::read_matrix(matrix);
  std::vector<double> b;
  if (p.count("rhs")) {
    io.inputs.push_back(p.at("rhs"));
    b = glms::read_vector_csv(p.at("rhs"));
    if (int(b.size()) != a_mat.rows())
      throw glms::config_error("rhs length does not match matrix rows");
  }
  glms::SolveOptions opt;
  opt.seed = (uint64_t)p_int(p, "seed");
  opt.threads = int(p_int_or(p, "threads", 1));
  const double eps = p_num(p, "eps");
  const std::string loss = p_str(p, "loss");

  glms::SolveReport rep;
  {
    StageTimer t(io, "solve");
    if (loss == "lp") {
      rep = glms::solve_lp(a_mat, b, p_num(p, "p"), eps, opt);
    } else if (loss == "huber") {
      rep = glms::solve_huber(a_mat, b, eps, opt);
    } else {
      glms::ProblemInstance inst{a_mat, b, glms::loss_from_json(loss)};
      std::vector<double> x0(a_mat.cols(), 0.0);
      const double gamma = std::max(inst.value(x0), 1e-300);
      rep = glms::solve_glm(inst, x0, gamma, eps * gamma, opt);
    }
  }
  const std::string out = p_str(p, "report");
  glms::write_text(out, glms::solve_report_to_json(rep).dump(2));
  io.outputs.push_back(out);
  std::printf("solve: value=%.12g gap=%.6g iterations=%d\n", rep.value,
              rep.gap_cert, rep.iterations);
  return 0;
}

int cmd_solve_dual(const Params& p, CommandIO& io) {
  const std::string matrix = p_str(p, "matrix");
  io.inputs.push_back(matrix);
  glms::RowMatrix a_mat = glms::read_matrix(matrix);
  const std::string cpath = p_str(p, "c");
  io.inputs.push_back(cpath);
  std::vector<double> c = glms::read_vector_csv(cpath);
  glms::SolveOptions opt;
  opt.seed = (uint64_t)p_int(p, "seed");
  opt.threads = int(p_int_or(p, "threads", 1));
  glms::DualReport rep;
  {
    StageTimer t(io, "solve-dual");
    rep = glms::solve_lp_dual(a_mat, c, p_num(p, "q"), p_num(p, "eps"), opt);
  }
  const std::string out = p_str(p, "report");
  glms::write_text(out, glms::dual_report_to_json(rep).dump(2));
  io.outputs.push_back(out);
  std::printf("solve-dual: norm_qq=%.12g feas_rel=%.3g\n", rep.norm_qq,
              rep.feas_rel);
  return 0;
}

int cmd_gen(const Params& p, CommandIO& io) {
  glms::GenSpec spec;
  spec.kind = p_str(p, "kind");
  spec.m = int(p_int(p, "m"));
  spec.n = int(p_int(p, "n"));
  spec.seed = (uint64_t)p_int(p, "seed");
  spec.out_prefix = p_str(p, "out-prefix");
  glms::GenResult res;
  {
    StageTimer t(io, "gen");
    res = glms::generate_instance(spec);
  }
  io.outputs.push_back(res.matrix_path);
  if (!res.shift_path.empty()) io.outputs.push_back(res.shift_path);
  io.outputs.push_back(res.truth_path);
  std::printf("gen: wrote %s\n", res.matrix_path.c_str());
  return 0;
}

int dispatch(const std::string& cmd, const Params& p, CommandIO& io) {
  if (cmd == "sparsify") return cmd_sparsify(p, io);
  if (cmd == "audit") return cmd_audit(p, io);
  if (cmd == "weights") return cmd_weights(p, io);
  if (cmd == "certify-loss") return cmd_certify(p, io);
  if (cmd == "solve") return cmd_solve(p, io);
  if (cmd == "solve-dual") return cmd_solve_dual(p, io);
  if (cmd == "gen") return cmd_gen(p, io);
  throw glms::config_error("unknown command: " + cmd);
}

void write_manifest(const std::string& path, const std::string& cmd,
                    const Params& p, const CommandIO& io) {
  glms::RunManifest m;
  m.command = cmd;
  m.version = glms::kVersion;
  m.params = p;
  for (const std::string& in : io.inputs)
    m.inputs.emplace_back(in, glms::fnv64_file(in));
  m.outputs = io.outputs;
  m.timings_ms = io.timings_ms;
  glms::write_text(path, glms::manifest_to_json(m).dump(2));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GLM sparsification and regression toolkit"};
  app.require_subcommand(1);

  int threads = 1;
  std::string manifest_out;
  app.add_option("--threads", threads, "worker threads (outputs are identical)");

  Params p;
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option_function<std::string>(
        "--manifest", [&](const std::string& v) { manifest_out = v; },
        "write a re-runnable manifest here");
  };
  auto opt_str = [&](CLI::App* sub, const char* name, const char* help,
                     bool required = false) {
    auto* o = sub->add_option_function<std::string>(
        std::string("--") + name,
        [&p, name](const std::string& v) { p[name] = v; }, help);
    if (required) o->required();
    return o;
  };

  CLI::App* sp = app.add_subcommand("sparsify", "compress an objective");
  opt_str(sp, "matrix", "matrix file (.mtx/.mm or csv)", true);
  opt_str(sp, "shift", "per-term shift vector (csv)");
  opt_str(sp, "loss", "loss family json", true);
  opt_str(sp, "eps", "target relative accuracy", true);
  opt_str(sp, "smin", "lower end of the value range", true);
  opt_str(sp, "smax", "upper end of the value range", true);
  opt_str(sp, "seed", "sampling seed (required for reproducibility)", true);
  opt_str(sp, "out", "output model json", true);
  opt_str(sp, "rounds", "bootstrap rounds (default 1)");
  opt_str(sp, "budget", "sample budget override");
  opt_str(sp, "budget-scale", "budget constant C_M (default 1)");
  opt_str(sp, "audit", "audit-driven doubling, 1 or 0 (default 1)");
  opt_str(sp, "globalize", "promote a unit-huber model to all of R^n (1/0)");
  add_manifest(sp);

  CLI::App* au = app.add_subcommand("audit", "audit a sparsified model");
  opt_str(au, "matrix", "matrix file", true);
  opt_str(au, "shift", "shift vector (csv)");
  opt_str(au, "loss", "loss family json", true);
  opt_str(au, "model", "model json", true);
  opt_str(au, "seed", "audit seed", true);
  opt_str(au, "dirs", "direction count (default 64+n+m capped at 256)");
  opt_str(au, "scales", "value targets per direction (default 24)");
  opt_str(au, "out", "audit report json");
  add_manifest(au);

  CLI::App* wg = app.add_subcommand("weights", "compute a multiscale weight scheme");
  opt_str(wg, "matrix", "matrix file", true);
  opt_str(wg, "shift", "shift vector (csv)");
  opt_str(wg, "loss", "loss family json", true);
  opt_str(wg, "jmin", "smallest dyadic scale exponent", true);
  opt_str(wg, "jmax", "largest dyadic scale exponent", true);
  opt_str(wg, "seed", "seed", true);
  opt_str(wg, "out", "output scheme json", true);
  opt_str(wg, "delta-pert", "initial-weight perturbation (default 1e-6)");
  add_manifest(wg);

  CLI::App* cl = app.add_subcommand("certify-loss", "check loss growth properties");
  opt_str(cl, "loss", "loss family json", true);
  opt_str(cl, "term", "term index (default 0)");
  opt_str(cl, "out", "certificate json");
  add_manifest(cl);

  CLI::App* so = app.add_subcommand("solve", "minimize a GLM objective");
  opt_str(so, "matrix", "matrix file", true);
  opt_str(so, "rhs", "right-hand side (csv)");
  opt_str(so, "loss", "'lp', 'huber', or a loss family json", true);
  opt_str(so, "p", "exponent for --loss lp");
  opt_str(so, "eps", "relative accuracy", true);
  opt_str(so, "seed", "seed", true);
  opt_str(so, "report", "output report json", true);
  add_manifest(so);

  CLI::App* sd = app.add_subcommand("solve-dual", "min ||y||_q^q s.t. A^T y = c");
  opt_str(sd, "matrix", "matrix file", true);
  opt_str(sd, "c", "constraint vector (csv)", true);
  opt_str(sd, "q", "dual exponent in [2, inf)", true);
  opt_str(sd, "eps", "relative accuracy", true);
  opt_str(sd, "seed", "seed", true);
  opt_str(sd, "report", "output report json", true);
  add_manifest(sd);

  CLI::App* ge = app.add_subcommand("gen", "generate a test instance");
  opt_str(ge, "kind",
          "gaussian | scale-separated | near-duplicate | outlier-regression",
          true);
  opt_str(ge, "m", "rows", true);
  opt_str(ge, "n", "columns", true);
  opt_str(ge, "seed", "seed", true);
  opt_str(ge, "out-prefix", "output path prefix", true);
  add_manifest(ge);

  CLI::App* rr = app.add_subcommand("rerun", "re-run a recorded manifest");
  std::string rerun_path;
  rr->add_option("--manifest", rerun_path, "manifest json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::string cmd;
    if (rr->parsed()) {
      glms::RunManifest m = glms::manifest_from_json(glms::read_text(rerun_path));
      cmd = m.command;
      p = m.params;
      if (threads > 1) p["threads"] = std::to_string(threads);
    } else {
      cmd = app.get_subcommands().front()->get_name();
      if (threads > 1) p["threads"] = std::to_string(threads);
    }
    CommandIO io;
    const int rc = dispatch(cmd, p, io);
    if (!manifest_out.empty() && !rr->parsed())
      write_manifest(manifest_out, cmd, p, io);
    return rc;
  } catch (const glms::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const glms::audit_error& e) {
    std::fprintf(stderr, "audit failure: %s\n", e.what());
    return 4;
  } catch (const glms::numeric_error& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  }
}
