#include "mmv/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mmv/rng.hpp"

namespace mmv {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& key) {
  const std::string t = trim(s);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse number from '" + t + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

ConfigMap ConfigMap::parse(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config parse error at line " + std::to_string(lineno) +
                        ", column 1: expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config parse error at line " + std::to_string(lineno) + ": empty key");
    cfg.entries_[key] = Entry{value, lineno, false};
  }
  return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  entries_[key] = Entry{trim(value), 0, false};
}

bool ConfigMap::has(const std::string& key) const { return entries_.count(key) > 0; }

const ConfigMap::Entry& ConfigMap::at(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required config key '" + key + "'");
  it->second.used = true;
  return it->second;
}

std::string ConfigMap::get_string(const std::string& key) const { return at(key).value; }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? at(key).value : fallback;
}

double ConfigMap::get_double(const std::string& key) const {
  return parse_double(at(key).value, key);
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int ConfigMap::get_int(const std::string& key) const {
  const double v = get_double(key);
  if (std::abs(v - std::lround(v)) > 1e-9)
    throw ConfigError("config key '" + key + "': expected an integer");
  return static_cast<int>(std::lround(v));
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = at(key).value;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean");
}

Vec ConfigMap::get_vec(const std::string& key, int expected_dim) const {
  const auto parts = split(at(key).value, ',');
  Vec v(static_cast<int>(parts.size()));
  for (size_t i = 0; i < parts.size(); ++i) v[i] = parse_double(parts[i], key);
  if (expected_dim > 0 && v.size() != expected_dim) {
    if (v.size() == 1) return Vec(Vec::Constant(expected_dim, v[0]));  // scalar broadcast
    throw ConfigError("config key '" + key + "': expected " + std::to_string(expected_dim) +
                      " components");
  }
  return v;
}

Vec ConfigMap::get_vec(const std::string& key, int expected_dim, const Vec& fallback) const {
  return has(key) ? get_vec(key, expected_dim) : fallback;
}

Mat ConfigMap::get_mat(const std::string& key, int rows, int cols) const {
  const std::string raw = at(key).value;
  const auto row_parts = split(raw, ';');
  if (row_parts.size() == 1 && split(raw, ',').size() == 1) {
    // scalar shorthand: s means s * I
    return Mat(parse_double(raw, key) * Mat::Identity(rows, cols));
  }
  Mat m(rows, cols);
  if (static_cast<int>(row_parts.size()) != rows)
    throw ConfigError("config key '" + key + "': expected " + std::to_string(rows) + " rows");
  for (int r = 0; r < rows; ++r) {
    const auto cells = split(row_parts[r], ',');
    if (static_cast<int>(cells.size()) != cols)
      throw ConfigError("config key '" + key + "': expected " + std::to_string(cols) + " columns");
    for (int c = 0; c < cols; ++c) m(r, c) = parse_double(cells[c], key);
  }
  return m;
}

std::vector<double> ConfigMap::get_list(const std::string& key) const {
  const auto parts = split(at(key).value, ',');
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(parse_double(p, key));
  return out;
}

std::vector<int> ConfigMap::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (double v : get_list(key)) out.push_back(static_cast<int>(std::lround(v)));
  return out;
}

std::vector<std::string> ConfigMap::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (!e.used) out.push_back(k);
  return out;
}

std::string ConfigMap::canonical_text() const {
  std::ostringstream os;
  for (const auto& [k, e] : entries_) os << k << " = " << e.value << "\n";
  return os.str();
}

uint64_t ConfigMap::canonical_hash() const { return fnv1a64(canonical_text()); }

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void unknown_id(const std::string& key, const std::string& got,
                             const std::string& valid) {
  throw ConfigError("config key '" + key + "': unknown catalog id '" + got + "' (valid: " + valid +
                    ")");
}

ConvexDomain build_domain(const ConfigMap& cfg, int dim) {
  const std::string type = cfg.get_string("operator.domain.type", "whole_space");
  if (type == "whole_space") return ConvexDomain::whole_space(dim);
  if (type == "box")
    return ConvexDomain::box(cfg.get_vec("operator.domain.lower", dim),
                             cfg.get_vec("operator.domain.upper", dim));
  if (type == "ball")
    return ConvexDomain::ball(cfg.get_vec("operator.domain.center", dim),
                              cfg.get_double("operator.domain.radius"));
  if (type == "halfspaces") {
    const auto rows = split(cfg.get_string("operator.domain.normals"), ';');
    std::vector<Vec> normals;
    for (const auto& r : rows) {
      const auto cells = split(r, ',');
      Vec n(dim);
      if (static_cast<int>(cells.size()) != dim)
        throw ConfigError("operator.domain.normals: each row needs dimension components");
      for (int i = 0; i < dim; ++i) n[i] = parse_double(cells[i], "operator.domain.normals");
      normals.push_back(n);
    }
    const auto offs = cfg.get_list("operator.domain.offsets");
    return ConvexDomain::halfspace_intersection(normals, offs,
                                                cfg.get_vec("operator.domain.witness", dim));
  }
  unknown_id("operator.domain.type", type, "whole_space, box, ball, halfspaces");
}

MonotoneOperator build_operator(const ConfigMap& cfg, int dim) {
  const std::string type = cfg.get_string("operator.type", "zero");
  if (type == "zero") return MonotoneOperator::zero(dim);
  if (type == "normal_cone") return MonotoneOperator::normal_cone(build_domain(cfg, dim));
  if (type == "linear") return MonotoneOperator::linear(cfg.get_mat("operator.matrix", dim, dim));
  if (type == "sum")
    return MonotoneOperator::sum(build_domain(cfg, dim), cfg.get_mat("operator.matrix", dim, dim));
  unknown_id("operator.type", type, "zero, normal_cone, linear, sum");
}

ModulusKind parse_modulus(const ConfigMap& cfg, const std::string& key, ModulusKind fallback) {
  const std::string v = cfg.get_string(key, "");
  if (v.empty()) return fallback;
  if (v == "linear") return ModulusKind::linear;
  if (v == "log_osgood") return ModulusKind::log_osgood;
  unknown_id(key, v, "linear, log_osgood");
}

CoefficientKernel build_kernel(const ConfigMap& cfg, int dim) {
  const std::string dtype = cfg.get_string("kernel.drift.type", "none");
  StateVecField drift = StateVecField::affine(Mat::Zero(dim, dim), Vec::Zero(dim));
  Mat b2 = Mat::Zero(dim, dim);
  ModulusKind rho_default = ModulusKind::linear;
  if (dtype == "none") {
    // zero drift
  } else if (dtype == "linear") {
    drift = StateVecField::affine(cfg.get_mat("kernel.drift.b1", dim, dim),
                                  cfg.get_vec("kernel.drift.c", dim, Vec::Zero(dim)));
    b2 = cfg.get_mat("kernel.drift.b2", dim, dim);
  } else if (dtype == "attraction") {
    const double kappa = cfg.get_double("kernel.drift.kappa");
    drift = StateVecField::affine(-kappa * Mat::Identity(dim, dim), Vec::Zero(dim));
    b2 = kappa * Mat::Identity(dim, dim);
  } else if (dtype == "osgood") {
    drift = StateVecField::osgood(dim, cfg.get_double("kernel.drift.amp", 1.0));
    b2 = cfg.get_double("kernel.drift.kappa", 0.0) * Mat::Identity(dim, dim);
    rho_default = ModulusKind::log_osgood;
  } else {
    unknown_id("kernel.drift.type", dtype, "none, linear, attraction, osgood");
  }

  const std::string stype = cfg.get_string("kernel.diffusion.type", "none");
  StateMatField diff = StateMatField::affine(Mat::Zero(dim, dim), 0.0);
  double s2 = 0.0;
  if (stype == "none") {
  } else if (stype == "constant") {
    diff = StateMatField::affine(cfg.get_mat("kernel.diffusion.s0", dim, dim), 0.0);
  } else if (stype == "linear") {
    diff = StateMatField::affine(cfg.get_mat("kernel.diffusion.s0", dim, dim),
                                 cfg.get_double("kernel.diffusion.s1", 0.0));
    s2 = cfg.get_double("kernel.diffusion.s2", 0.0);
  } else {
    unknown_id("kernel.diffusion.type", stype, "none, constant, linear");
  }

  const std::string jtype = cfg.get_string("kernel.jump.type", "none");
  std::optional<JumpPart> jump;
  if (jtype == "scaled_mark") {
    JumpPart jp;
    jp.gain_state = StateScalarField::affine(cfg.get_double("kernel.jump.g0", 1.0),
                                             cfg.get_vec("kernel.jump.g1", dim, Vec::Zero(dim)));
    jp.gain_measure = cfg.get_vec("kernel.jump.g2", dim, Vec::Zero(dim));
    const int mark_dim = cfg.get_int("levy.mark_dimension", dim);
    jp.mark_map = cfg.has("kernel.jump.mark_map")
                      ? cfg.get_mat("kernel.jump.mark_map", dim, mark_dim)
                      : Mat(Mat::Identity(dim, mark_dim));
    jump = std::move(jp);
  } else if (jtype != "none") {
    unknown_id("kernel.jump.type", jtype, "none, scaled_mark");
  }

  return CoefficientKernel(dim, std::move(drift), std::move(b2), std::move(diff), s2,
                           std::move(jump), cfg.get_double("kernel.l1", 5.0),
                           parse_modulus(cfg, "kernel.rho", rho_default),
                           parse_modulus(cfg, "kernel.phi", ModulusKind::linear),
                           cfg.get_double("kernel.l2", 0.0));
}

LevyConfig build_levy(const ConfigMap& cfg, int dim) {
  const std::string type = cfg.get_string("levy.type", "none");
  const double cutoff = cfg.get_double("levy.small_cutoff", 1.0);
  if (type == "none") return LevyConfig::none(cfg.get_int("levy.mark_dimension", dim));
  if (type == "discrete") {
    const auto rows = split(cfg.get_string("levy.atoms"), ';');
    std::vector<Vec> atoms;
    std::vector<double> masses;
    for (const auto& r : rows) {
      const auto parts = split(r, ':');
      if (parts.size() != 2) throw ConfigError("levy.atoms: expected 'mark:mass' rows");
      const auto cells = split(parts[0], ',');
      Vec z(static_cast<int>(cells.size()));
      for (size_t i = 0; i < cells.size(); ++i) z[i] = parse_double(cells[i], "levy.atoms");
      atoms.push_back(z);
      masses.push_back(parse_double(parts[1], "levy.atoms"));
    }
    return LevyConfig::discrete(std::move(atoms), std::move(masses), cutoff);
  }
  if (type == "annulus")
    return LevyConfig::uniform_annulus(cfg.get_int("levy.mark_dimension", dim),
                                       cfg.get_double("levy.r_min"), cfg.get_double("levy.r_max"),
                                       cfg.get_double("levy.mass"), cutoff);
  unknown_id("levy.type", type, "none, discrete, annulus");
}

InitialLaw build_initial(const ConfigMap& cfg, int dim) {
  InitialLaw law;
  const std::string type = cfg.get_string("initial.type", "point");
  if (type == "point") {
    law.kind = InitialLaw::Kind::point;
    law.point = cfg.get_vec("initial.point", dim, Vec::Zero(dim));
  } else if (type == "uniform_box") {
    law.kind = InitialLaw::Kind::uniform_box;
    law.lower = cfg.get_vec("initial.lower", dim);
    law.upper = cfg.get_vec("initial.upper", dim);
    for (int i = 0; i < dim; ++i)
      if (!(law.lower[i] <= law.upper[i])) throw ConfigError("initial: lower must be <= upper");
  } else if (type == "gaussian") {
    law.kind = InitialLaw::Kind::gaussian;
    law.mean = cfg.get_vec("initial.mean", dim, Vec::Zero(dim));
    law.stddev = cfg.get_double("initial.stddev", 1.0);
  } else {
    unknown_id("initial.type", type, "point, uniform_box, gaussian");
  }
  return law;
}

void precheck_h4(const Scenario& sc) {
  if (!sc.kernel.has_jump() || !sc.levy.active() || !sc.scheme.enforce_h4) return;
  if (sc.op.domain().is_whole_space()) return;
  const auto xs = sample_domain_points(sc.op.domain(), 24, 4.0, 9001);
  const auto ys = sample_domain_points(sc.op.domain(), 8, 4.0, 9002);
  std::vector<Vec> marks;
  for (const auto& [z, w] : sc.levy.integration_nodes()) {
    marks.push_back(z);
    if (marks.size() >= 16) break;
  }
  CounterStream st(9003, 0, 0, channel::sampler);
  for (int i = 0; i < 8; ++i) marks.push_back(sc.levy.sample_mark(st));
  for (const auto& x : xs)
    for (const auto& y : ys)
      for (const auto& z : marks) {
        const Vec post = x + sc.kernel.jump(x, y, z);
        if (sc.op.domain().distance(post) > 1e-9) {
          std::ostringstream os;
          os << "(H4) pre-check failed: x + G(x,y,z) leaves the domain for x = [";
          for (int a = 0; a < sc.dim; ++a) os << (a ? ", " : "") << x[a];
          os << "], z = [";
          for (int a = 0; a < z.size(); ++a) os << (a ? ", " : "") << z[a];
          os << "]";
          throw ConfigError(os.str());
        }
      }
}

}  // namespace

Scenario build_scenario(const ConfigMap& cfg) {
  Scenario sc;
  sc.name = cfg.get_string("name", "scenario");
  sc.dim = cfg.get_int("dimension", 1);
  if (sc.dim < 1 || sc.dim > kMaxDim)
    throw ConfigError("dimension: must be between 1 and " + std::to_string(kMaxDim));
  sc.seed = static_cast<uint64_t>(cfg.get_double("seed", 1));
  if (cfg.has("seeds"))
    for (double s : cfg.get_list("seeds")) sc.seeds.push_back(static_cast<uint64_t>(s));
  else
    sc.seeds.push_back(sc.seed);

  sc.op = build_operator(cfg, sc.dim);
  sc.kernel = build_kernel(cfg, sc.dim);
  sc.levy = build_levy(cfg, sc.dim);

  if (sc.kernel.has_jump() && !sc.levy.active())
    throw ConfigError("kernel.jump configured but levy measure has zero mass");
  if (sc.kernel.has_jump() && sc.levy.mark_dim() != sc.kernel.mark_dim())
    throw ConfigError("levy.mark_dimension does not match the jump mark map");

  sc.scheme.h = cfg.get_double("scheme.h", 0.01);
  sc.scheme.particles = cfg.get_int("scheme.particles", 1000);
  if (sc.scheme.particles < 1) throw ConfigError("scheme.particles: must be >= 1");
  if (!(sc.scheme.h > 0.0 && sc.scheme.h <= 1.0)) throw ConfigError("scheme.h: must be in (0,1]");
  const std::string law_mode = cfg.get_string("scheme.law_mode", "interacting");
  if (law_mode == "interacting")
    sc.scheme.law_mode = LawMode::interacting;
  else if (law_mode == "frozen")
    sc.scheme.law_mode = LawMode::frozen;
  else
    unknown_id("scheme.law_mode", law_mode, "interacting, frozen");
  sc.scheme.enforce_h4 = cfg.get_bool("scheme.enforce_h4", true);
  sc.scheme.workers = cfg.get_int("scheme.workers", 1);
  sc.scheme.initial = build_initial(cfg, sc.dim);
  sc.scheme.snapshot_stride = cfg.get_int("output.snapshot_stride", 1);
  sc.scheme.record_step_stats = cfg.get_bool("output.step_stats", true);
  sc.trajectory_particles = cfg.get_int("output.trajectory_particles", 100);
  sc.dump_noise = cfg.get_bool("output.dump_noise", false);

  const std::string study = cfg.get_string("study.type", "simulate");
  if (study == "simulate") {
    sc.study.kind = StudyKind::simulate;
  } else if (study == "picard") {
    sc.study.kind = StudyKind::picard;
    sc.study.picard.max_iters = cfg.get_int("study.picard.max_iters", 15);
    sc.study.picard.w2_tol = cfg.get_double("study.picard.w2_tol", 1e-3);
  } else if (study == "cascade") {
    sc.study.kind = StudyKind::cascade;
    if (cfg.has("study.cascade.levels")) sc.study.cascade_levels = cfg.get_int_list("study.cascade.levels");
    sc.study.cascade_halfwidth = cfg.get_double("study.cascade.halfwidth", 2.0);
  } else if (study == "coupled") {
    sc.study.kind = StudyKind::coupled;
    sc.study.coupled_x0_a = cfg.get_vec("study.coupled.x0_a", sc.dim);
    sc.study.coupled_x0_b = cfg.get_vec("study.coupled.x0_b", sc.dim);
  } else if (study == "diagnose") {
    sc.study.kind = StudyKind::diagnose;
    sc.study.diagnose_pairs = cfg.get_int("study.diagnose.pairs", 50);
    sc.study.diagnose_radius = cfg.get_double("study.diagnose.radius", 2.0);
    sc.study.diagnose_rho = cfg.get_double("study.diagnose.rho", 0.5);
    if (cfg.has("study.diagnose.deltas")) sc.study.diagnose_deltas = cfg.get_list("study.diagnose.deltas");
  } else {
    unknown_id("study.type", study, "simulate, picard, cascade, coupled, diagnose");
  }

  sc.config_hash = cfg.canonical_hash();
  sc.canonical_config = cfg.canonical_text();
  precheck_h4(sc);
  return sc;
}

}  // namespace mmv
