#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmv/coeff.hpp"
#include "mmv/monotone.hpp"
#include "mmv/noise.hpp"
#include "mmv/solver.hpp"
#include "mmv/types.hpp"

namespace mmv {

/// Flat keyed config text: `key = value` lines, `#` comments, dotted sections.
/// Values: scalars, `a,b,c` vectors, `a,b;c,d` matrices, `mark:mass` atom rows.
class ConfigMap {
public:
  static ConfigMap parse(const std::string& text);
  static ConfigMap parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);  // CLI overrides
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Vec get_vec(const std::string& key, int expected_dim) const;
  Vec get_vec(const std::string& key, int expected_dim, const Vec& fallback) const;
  Mat get_mat(const std::string& key, int rows, int cols) const;
  std::vector<double> get_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  /// Keys never read back (typo detection at validation time).
  std::vector<std::string> unused_keys() const;

  /// FNV-1a hash of the canonical sorted key=value form.
  uint64_t canonical_hash() const;
  std::string canonical_text() const;

private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
  };
  std::map<std::string, Entry> entries_;
  const Entry& at(const std::string& key) const;
};

enum class StudyKind { simulate, picard, cascade, coupled, diagnose };

struct StudySpec {
  StudyKind kind = StudyKind::simulate;
  PicardOptions picard;
  std::vector<int> cascade_levels{2, 4, 8, 16};
  double cascade_halfwidth = 2.0;
  Vec coupled_x0_a, coupled_x0_b;
  int diagnose_pairs = 50;
  double diagnose_radius = 2.0;
  double diagnose_rho = 0.5;
  std::vector<double> diagnose_deltas{0.2, 0.1, 0.05, 0.02};
};

/// A fully validated scenario: parsed config plus constructed objects.
struct Scenario {
  std::string name;
  int dim = 1;
  uint64_t seed = 1;
  std::vector<uint64_t> seeds;  // optional multi-seed studies
  MonotoneOperator op = MonotoneOperator::zero(1);
  CoefficientKernel kernel =
      CoefficientKernel::linear(Mat::Zero(1, 1), Mat::Zero(1, 1), Vec::Zero(1),
                                Mat::Zero(1, 1), 1.0);
  LevyConfig levy = LevyConfig::none();
  SchemeConfig scheme;
  StudySpec study;
  int trajectory_particles = 100;
  bool dump_noise = false;
  uint64_t config_hash = 0;
  std::string canonical_config;
};

/// Build and validate a scenario from parsed config. Throws ConfigError with
/// the offending key (and valid catalog ids for unknown ids).
Scenario build_scenario(const ConfigMap& cfg);

}  // namespace mmv
