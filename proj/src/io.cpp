#include "glms/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "glms/errors.hpp"
#include "glms/rng.hpp"

namespace glms {

const char* kVersion = "0.1.0";

// --- JValue -------------------------------------------------------------

JValue JValue::object() {
  JValue v;
  v.kind_ = Kind::object;
  return v;
}
JValue JValue::array() {
  JValue v;
  v.kind_ = Kind::array;
  return v;
}
JValue JValue::str(std::string s) {
  JValue v;
  v.kind_ = Kind::string;
  v.s_ = std::move(s);
  return v;
}
JValue JValue::num(double d) {
  JValue v;
  v.kind_ = Kind::number;
  v.d_ = d;
  return v;
}
JValue JValue::integer(long long i) {
  JValue v;
  v.kind_ = Kind::integer;
  v.i_ = i;
  return v;
}
JValue JValue::boolean(bool b) {
  JValue v;
  v.kind_ = Kind::boolean;
  v.b_ = b;
  return v;
}

JValue& JValue::set(const std::string& key, JValue v) {
  if (kind_ != Kind::object) throw config_error("json: set on non-object");
  members_.emplace_back(key, std::move(v));
  return *this;
}

JValue& JValue::push(JValue v) {
  if (kind_ != Kind::array) throw config_error("json: push on non-array");
  items_.push_back(std::move(v));
  return *this;
}

namespace {

void escape_to(std::string& out, const std::string& s) {
  out += '"';
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += '"';
}

// 17 significant digits: enough for exact double round trips
void number_to(std::string& out, double d) {
  if (std::isnan(d)) {
    out += "null";
    return;
  }
  if (std::isinf(d)) {
    out += d > 0 ? "1e999" : "-1e999";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  out += buf;
}

}  // namespace

void JValue::dump_to(std::string& out, int indent, int depth) const {
  const std::string pad = indent > 0 ? std::string(std::size_t(indent) * (depth + 1), ' ') : "";
  const std::string pad_close = indent > 0 ? std::string(std::size_t(indent) * depth, ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (kind_) {
    case Kind::null: out += "null"; break;
    case Kind::boolean: out += b_ ? "true" : "false"; break;
    case Kind::integer: out += std::to_string(i_); break;
    case Kind::number: number_to(out, d_); break;
    case Kind::string: escape_to(out, s_); break;
    case Kind::array: {
      if (items_.empty()) {
        out += "[]";
        break;
      }
      out += '[';
      out += nl;
      for (std::size_t k = 0; k < items_.size(); ++k) {
        out += pad;
        items_[k].dump_to(out, indent, depth + 1);
        if (k + 1 < items_.size()) out += ',';
        out += nl;
      }
      out += pad_close;
      out += ']';
      break;
    }
    case Kind::object: {
      if (members_.empty()) {
        out += "{}";
        break;
      }
      out += '{';
      out += nl;
      for (std::size_t k = 0; k < members_.size(); ++k) {
        out += pad;
        escape_to(out, members_[k].first);
        out += indent > 0 ? ": " : ":";
        members_[k].second.dump_to(out, indent, depth + 1);
        if (k + 1 < members_.size()) out += ',';
        out += nl;
      }
      out += pad_close;
      out += '}';
      break;
    }
  }
}

std::string JValue::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  if (indent > 0) out += '\n';
  return out;
}

JValue to_json(const std::vector<double>& v) {
  JValue a = JValue::array();
  for (double x : v) a.push(JValue::num(x));
  return a;
}

JValue to_json(const std::vector<int>& v) {
  JValue a = JValue::array();
  for (int x : v) a.push(JValue::integer(x));
  return a;
}

// --- files ----------------------------------------------------------------

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write file: " + path);
  out << text;
}

uint64_t fnv64_file(const std::string& path) {
  const std::string t = read_text(path);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : t) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         std::equal(suf.rbegin(), suf.rend(), s.rbegin(),
                    [](char a, char b) { return std::tolower(a) == std::tolower(b); });
}

RowMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open matrix file: " + path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("%%MatrixMarket", 0) != 0)
    throw config_error(path + ": missing MatrixMarket banner");
  std::istringstream hs(header);
  std::string tag, object, format, field, symmetry;
  hs >> tag >> object >> format >> field >> symmetry;
  if (object != "matrix" || (format != "coordinate" && format != "array") ||
      field != "real")
    throw config_error(path + ": unsupported MatrixMarket type");
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw config_error(path + ": unsupported MatrixMarket symmetry");

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream sz(line);
  int m = 0, n = 0;
  long long nnz = 0;
  if (format == "coordinate") {
    if (!(sz >> m >> n >> nnz)) throw config_error(path + ": bad size line");
  } else {
    if (!(sz >> m >> n)) throw config_error(path + ": bad size line");
  }
  if (m < 1 || n < 1) throw config_error(path + ": bad dimensions");
  std::vector<double> data(std::size_t(m) * n, 0.0);
  if (format == "coordinate") {
    for (long long k = 0; k < nnz; ++k) {
      int i = 0, j = 0;
      double v = 0;
      if (!(in >> i >> j >> v)) throw config_error(path + ": truncated entries");
      if (i < 1 || i > m || j < 1 || j > n)
        throw config_error(path + ": entry out of range");
      data[std::size_t(i - 1) * n + (j - 1)] = v;
      if (symmetric && i != j) data[std::size_t(j - 1) * n + (i - 1)] = v;
    }
  } else {
    // array format stores column-major
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) {
        double v = 0;
        if (!(in >> v)) throw config_error(path + ": truncated entries");
        data[std::size_t(i) * n + j] = v;
      }
  }
  return RowMatrix(m, n, std::move(data));
}

RowMatrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open matrix file: " + path);
  std::vector<double> data;
  int n = -1, m = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty()) continue;
    if (n < 0) n = int(row.size());
    if (int(row.size()) != n)
      throw config_error(path + ": ragged csv rows");
    data.insert(data.end(), row.begin(), row.end());
    ++m;
  }
  if (m == 0) throw config_error(path + ": empty matrix");
  return RowMatrix(m, n, std::move(data));
}

}  // namespace

RowMatrix read_matrix(const std::string& path) {
  if (has_suffix(path, ".mtx") || has_suffix(path, ".mm"))
    return read_matrix_market(path);
  return read_matrix_csv(path);
}

std::vector<double> read_vector_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open vector file: " + path);
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x;
    while (ls >> x) v.push_back(x);
  }
  return v;
}

void write_matrix_mm(const std::string& path, const RowMatrix& a_mat) {
  std::string out = "%%MatrixMarket matrix array real general\n";
  out += std::to_string(a_mat.rows()) + " " + std::to_string(a_mat.cols()) + "\n";
  char buf[40];
  for (int j = 0; j < a_mat.cols(); ++j)
    for (int i = 0; i < a_mat.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", a_mat.row_ptr(i)[j]);
      out += buf;
    }
  write_text(path, out);
}

void write_vector_csv(const std::string& path, const std::vector<double>& v) {
  std::string out;
  char buf[40];
  for (double x : v) {
    std::snprintf(buf, sizeof buf, "%.17g\n", x);
    out += buf;
  }
  write_text(path, out);
}

ProblemInstance load_instance(const std::string& matrix_path,
                              const std::string& shift_path,
                              const std::string& loss_json) {
  ProblemInstance inst;
  inst.A = read_matrix(matrix_path);
  if (!shift_path.empty()) {
    inst.b = read_vector_csv(shift_path);
    if (int(inst.b.size()) != inst.A.rows())
      throw config_error("shift vector length does not match matrix rows");
  }
  inst.family = loss_from_json(loss_json);
  inst.validate();
  return inst;
}

// --- loss json --------------------------------------------------------------

LossFamily loss_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw config_error(std::string("loss json: ") + e.what());
  }
  const std::string kind = j.value("kind", "");
  std::vector<double> thresholds;
  if (j.contains("thresholds")) {
    if (j["thresholds"].is_number()) {
      thresholds.push_back(j["thresholds"].get<double>());
    } else {
      for (const auto& t : j["thresholds"]) thresholds.push_back(t.get<double>());
    }
  }
  if (kind == "power") return LossFamily::power(j.at("p").get<double>());
  if (kind == "gamma")
    return LossFamily::gamma(j.at("p").get<double>(), std::move(thresholds));
  if (kind == "huber") return LossFamily::huber(std::move(thresholds));
  if (kind == "tukey-proxy")
    return LossFamily::tukey_proxy(j.at("eta").get<double>());
  if (kind == "tukey") return LossFamily::tukey();
  if (kind == "custom")
    throw config_error("custom losses are constructed through the library API");
  throw config_error("loss json: unknown kind '" + kind + "'");
}

JValue loss_to_json(const LossFamily& fam) {
  JValue j = JValue::object();
  j.set("kind", JValue::str(loss_kind_name(fam.kind())));
  if (fam.kind() == LossKind::power || fam.kind() == LossKind::gamma ||
      fam.kind() == LossKind::huber)
    j.set("p", JValue::num(fam.p()));
  if (!fam.thresholds().empty()) j.set("thresholds", to_json(fam.thresholds()));
  if (fam.kind() == LossKind::tukey_proxy) j.set("eta", JValue::num(fam.eta()));
  const LossConstants& k = fam.constants();
  JValue c = JValue::object();
  c.set("L", JValue::num(k.L));
  c.set("theta", JValue::num(k.theta));
  c.set("c", JValue::num(k.c));
  c.set("u", JValue::num(k.u));
  c.set("C", JValue::num(k.C));
  c.set("K", JValue::num(k.K));
  j.set("constants", std::move(c));
  return j;
}

// --- scheme json -------------------------------------------------------------

JValue scheme_to_json(const WeightScheme& s) {
  JValue j = JValue::object();
  j.set("jmin", JValue::integer(s.jmin));
  j.set("jmax", JValue::integer(s.jmax));
  j.set("alpha", JValue::num(s.alpha));
  JValue w = JValue::array();
  for (const auto& wj : s.weights) w.push(to_json(wj));
  j.set("weights", std::move(w));
  j.set("scores", to_json(s.score));
  j.set("per_scale_gap", to_json(s.per_scale_gap));
  j.set("smooth_factor", JValue::num(s.smooth_factor));
  return j;
}

WeightScheme scheme_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  WeightScheme s;
  s.jmin = j.at("jmin").get<int>();
  s.jmax = j.at("jmax").get<int>();
  s.alpha = j.at("alpha").get<double>();
  for (const auto& wj : j.at("weights"))
    s.weights.push_back(wj.get<std::vector<double>>());
  s.score = j.at("scores").get<std::vector<double>>();
  if (j.contains("per_scale_gap"))
    s.per_scale_gap = j["per_scale_gap"].get<std::vector<double>>();
  if (j.contains("smooth_factor")) s.smooth_factor = j["smooth_factor"].get<double>();
  s.score_l1 = 0.0;
  for (double v : s.score) s.score_l1 += v;
  if (int(s.weights.size()) != s.scales())
    throw config_error("scheme json: scale count mismatch");
  return s;
}

// --- model json ---------------------------------------------------------------

JValue model_to_json(const SparsifiedModel& m) {
  JValue j = JValue::object();
  j.set("indices", to_json(m.indices));
  j.set("weights", to_json(m.weights));
  j.set("smin", JValue::num(m.smin));
  j.set("smax", JValue::num(m.smax));
  j.set("eps", JValue::num(m.eps));
  j.set("seed", JValue::integer((long long)m.seed));
  if (m.global) j.set("global", JValue::boolean(true));
  if (m.x_norm_bound > 0.0) j.set("x_norm_bound", JValue::num(m.x_norm_bound));
  JValue st = JValue::object();
  st.set("M", JValue::integer((long long)m.sample_count));
  st.set("support", JValue::integer((long long)m.support()));
  st.set("tau_l1", JValue::num(m.tau_l1));
  st.set("scheme_alpha", JValue::num(m.scheme_alpha));
  st.set("rho_hash", JValue::integer((long long)m.rho_hash));
  st.set("budget_doublings", JValue::integer(m.budget_doublings));
  j.set("stats", std::move(st));
  return j;
}

SparsifiedModel model_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SparsifiedModel m;
  m.indices = j.at("indices").get<std::vector<int>>();
  m.weights = j.at("weights").get<std::vector<double>>();
  m.smin = j.at("smin").get<double>();
  m.smax = j.at("smax").get<double>();
  m.eps = j.at("eps").get<double>();
  m.seed = j.at("seed").get<uint64_t>();
  m.global = j.value("global", false);
  m.x_norm_bound = j.value("x_norm_bound", 0.0);
  if (j.contains("stats")) {
    const auto& st = j["stats"];
    m.sample_count = st.value("M", 0ull);
    m.tau_l1 = st.value("tau_l1", 0.0);
    m.scheme_alpha = st.value("scheme_alpha", 1.0);
    m.rho_hash = st.value("rho_hash", 0ll);
    m.budget_doublings = st.value("budget_doublings", 0);
  }
  if (m.indices.size() != m.weights.size())
    throw config_error("model json: index/weight length mismatch");
  return m;
}

JValue audit_to_json(const AuditReport& r) {
  JValue j = JValue::object();
  j.set("max_rel_err", JValue::num(r.max_rel_err));
  j.set("worst_x", to_json(r.worst_x));
  j.set("worst_value", JValue::num(r.worst_value));
  j.set("scale_targets", to_json(r.scale_targets));
  j.set("scale_max_err", to_json(r.scale_max_err));
  j.set("sens_sum", to_json(r.sens_sum));
  j.set("c_xi", JValue::num(r.c_xi));
  j.set("dirs_used", JValue::integer(r.dirs_used));
  return j;
}

JValue solve_report_to_json(const SolveReport& r) {
  JValue j = JValue::object();
  j.set("x", to_json(r.x));
  j.set("value", JValue::num(r.value));
  j.set("gap_cert", JValue::num(r.gap_cert));
  j.set("f_lower", JValue::num(r.f_lower));
  j.set("iterations", JValue::integer(r.iterations));
  j.set("hit_iteration_cap", JValue::boolean(r.hit_iteration_cap));
  JValue cfg = JValue::object();
  cfg.set("alpha", JValue::num(r.config.alpha));
  cfg.set("theta", JValue::num(r.config.theta));
  cfg.set("eta", JValue::num(r.config.eta));
  cfg.set("tau", JValue::integer(r.config.tau));
  cfg.set("gamma", JValue::num(r.config.gamma_bound));
  cfg.set("delta", JValue::num(r.config.delta));
  j.set("config", std::move(cfg));
  JValue tr = JValue::array();
  for (const TraceEntry& t : r.trace) {
    JValue e = JValue::object();
    e.set("iter", JValue::integer(t.iter));
    e.set("f", JValue::num(t.f));
    e.set("accepted", JValue::boolean(t.accepted));
    e.set("gap", JValue::num(t.gap));
    e.set("gamma_tilde", JValue::num(t.gamma_tilde));
    e.set("step", JValue::num(t.step));
    e.set("support", JValue::integer((long long)t.support));
    e.set("oracle_iters", JValue::integer(t.oracle_iters));
    if (t.dense_fallback) e.set("dense_fallback", JValue::boolean(true));
    tr.push(std::move(e));
  }
  j.set("trace", std::move(tr));
  return j;
}

JValue dual_report_to_json(const DualReport& r) {
  JValue j = JValue::object();
  j.set("y", to_json(r.y));
  j.set("norm_qq", JValue::num(r.norm_qq));
  j.set("feas_rel", JValue::num(r.feas_rel));
  j.set("eps0", JValue::num(r.eps0));
  j.set("penalty", JValue::num(r.penalty));
  j.set("primal_value", JValue::num(r.primal.value));
  j.set("primal_iterations", JValue::integer(r.primal.iterations));
  return j;
}

// --- generators -----------------------------------------------------------

GenResult generate_instance(const GenSpec& spec) {
  if (spec.m < 2 || spec.n < 1) throw config_error("gen: need m >= 2, n >= 1");
  if (spec.out_prefix.empty()) throw config_error("gen: output prefix required");
  SplitRng rng = SplitRng(spec.seed).split(0x67656e72ull);
  const int m = spec.m, n = spec.n;
  std::vector<double> data(std::size_t(m) * n);
  JValue truth = JValue::object();
  truth.set("kind", JValue::str(spec.kind));
  truth.set("m", JValue::integer(m));
  truth.set("n", JValue::integer(n));
  truth.set("seed", JValue::integer((long long)spec.seed));

  GenResult res;
  res.matrix_path = spec.out_prefix + ".mtx";
  res.truth_path = spec.out_prefix + "_truth.json";

  if (spec.kind == "gaussian") {
    for (double& v : data) v = rng.next_gaussian();
  } else if (spec.kind == "scale-separated") {
    // bands of rows at well-separated norm scales
    const int bands = 4;
    for (int i = 0; i < m; ++i) {
      const double scale = std::pow(10.0, 2.0 * (i * bands / m));
      for (int j = 0; j < n; ++j)
        data[std::size_t(i) * n + j] = scale * rng.next_gaussian();
    }
    truth.set("bands", JValue::integer(4));
  } else if (spec.kind == "near-duplicate") {
    for (int i = 0; i + 1 < m; i += 2) {
      for (int j = 0; j < n; ++j) {
        const double v = rng.next_gaussian();
        data[std::size_t(i) * n + j] = v;
        data[std::size_t(i + 1) * n + j] = v * (1.0 + 1e-6 * rng.next_gaussian());
      }
    }
    if (m % 2)
      for (int j = 0; j < n; ++j)
        data[std::size_t(m - 1) * n + j] = rng.next_gaussian();
  } else if (spec.kind == "outlier-regression") {
    for (double& v : data) v = rng.next_gaussian();
    std::vector<double> x0(n), b(m);
    for (double& v : x0) v = rng.next_gaussian();
    std::vector<int> mask;
    for (int i = 0; i < m; ++i) {
      double dot = 0;
      for (int j = 0; j < n; ++j) dot += data[std::size_t(i) * n + j] * x0[j];
      b[i] = dot + 0.01 * rng.next_gaussian();
      if (rng.next_double() < 0.1) {
        b[i] += (rng.next_double() < 0.5 ? -1.0 : 1.0) * (5.0 + 45.0 * rng.next_double());
        mask.push_back(i);
      }
    }
    res.shift_path = spec.out_prefix + "_b.csv";
    write_vector_csv(res.shift_path, b);
    truth.set("x0", to_json(x0));
    truth.set("outliers", to_json(mask));
  } else {
    throw config_error("gen: unknown kind '" + spec.kind + "'");
  }

  RowMatrix a_mat(m, n, std::move(data));
  if (a_mat.has_zero_row()) throw numeric_error("gen: produced a zero row");
  write_matrix_mm(res.matrix_path, a_mat);
  write_text(res.truth_path, truth.dump(2));
  return res;
}

// --- manifests --------------------------------------------------------------

JValue manifest_to_json(const RunManifest& m) {
  JValue j = JValue::object();
  j.set("command", JValue::str(m.command));
  j.set("version", JValue::str(m.version));
  JValue p = JValue::object();
  for (const auto& [k, v] : m.params) p.set(k, JValue::str(v));
  j.set("params", std::move(p));
  JValue ins = JValue::array();
  for (const auto& [path, hash] : m.inputs) {
    JValue e = JValue::object();
    e.set("path", JValue::str(path));
    e.set("fnv64", JValue::integer((long long)hash));
    ins.push(std::move(e));
  }
  j.set("inputs", std::move(ins));
  JValue outs = JValue::array();
  for (const std::string& o : m.outputs) outs.push(JValue::str(o));
  j.set("outputs", std::move(outs));
  JValue t = JValue::object();
  for (const auto& [k, v] : m.timings_ms) t.set(k, JValue::num(v));
  j.set("timings_ms", std::move(t));
  return j;
}

RunManifest manifest_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.version = j.value("version", "");
  for (const auto& [k, v] : j.at("params").items())
    m.params[k] = v.get<std::string>();
  if (j.contains("inputs"))
    for (const auto& e : j["inputs"])
      m.inputs.emplace_back(e.at("path").get<std::string>(),
                            (uint64_t)e.value("fnv64", 0ll));
  if (j.contains("outputs"))
    for (const auto& o : j["outputs"]) m.outputs.push_back(o.get<std::string>());
  return m;
}

}  // namespace glms
