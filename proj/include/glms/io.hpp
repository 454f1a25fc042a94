#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "glms/instance.hpp"
#include "glms/solve.hpp"
#include "glms/sparsify.hpp"
#include "glms/weights.hpp"

namespace glms {

// Minimal ordered JSON value with byte-stable output: keys keep insertion
// order and doubles print as %.17g, so identical data always serializes to
// identical bytes.
class JValue {
 public:
  JValue() = default;
  static JValue object();
  static JValue array();
  static JValue str(std::string s);
  static JValue num(double v);
  static JValue integer(long long v);
  static JValue boolean(bool v);

  JValue& set(const std::string& key, JValue v);  // object
  JValue& push(JValue v);                         // array

  std::string dump(int indent = 0) const;

 private:
  enum class Kind { null, object, array, string, number, integer, boolean };
  Kind kind_ = Kind::null;
  std::string s_;
  double d_ = 0.0;
  long long i_ = 0;
  bool b_ = false;
  std::vector<std::pair<std::string, JValue>> members_;
  std::vector<JValue> items_;
  void dump_to(std::string& out, int indent, int depth) const;
};

JValue to_json(const std::vector<double>& v);
JValue to_json(const std::vector<int>& v);

// --- file ingestion ---------------------------------------------------

// MatrixMarket (coordinate or array) or CSV, picked by extension (.mtx/.mm
// vs anything else).
RowMatrix read_matrix(const std::string& path);
std::vector<double> read_vector_csv(const std::string& path);
void write_matrix_mm(const std::string& path, const RowMatrix& a_mat);
void write_vector_csv(const std::string& path, const std::vector<double>& v);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
uint64_t fnv64_file(const std::string& path);

ProblemInstance load_instance(const std::string& matrix_path,
                              const std::string& shift_path,
                              const std::string& loss_json);

// --- serialization ----------------------------------------------------

LossFamily loss_from_json(const std::string& text);
JValue loss_to_json(const LossFamily& fam);

JValue scheme_to_json(const WeightScheme& s);
WeightScheme scheme_from_json(const std::string& text);

JValue model_to_json(const SparsifiedModel& m);
SparsifiedModel model_from_json(const std::string& text);

JValue audit_to_json(const AuditReport& r);
JValue solve_report_to_json(const SolveReport& r);
JValue dual_report_to_json(const DualReport& r);

// --- instance generators ----------------------------------------------

struct GenSpec {
  std::string kind;  // gaussian | scale-separated | near-duplicate | outlier-regression
  int m = 100;
  int n = 5;
  uint64_t seed = 0;
  std::string out_prefix;
};

struct GenResult {
  std::string matrix_path;
  std::string shift_path;  // empty unless the generator plants shifts
  std::string truth_path;
};

GenResult generate_instance(const GenSpec& spec);

// --- run manifests ------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string version;
  std::map<std::string, std::string> params;  // ordered, re-runnable
  std::vector<std::pair<std::string, uint64_t>> inputs;  // path, content hash
  std::vector<std::string> outputs;
  std::map<std::string, double> timings_ms;
};

JValue manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

extern const char* kVersion;

}  // namespace glms
