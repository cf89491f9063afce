#include "mmv/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mmv {

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write file: " + path);
  out << content;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << fmt_g17(row[i]);
    os << "\n";
  }
  write_text_file(path, os.str());
}

void write_law_csv(const std::string& path, const SolutionEnsemble& ens,
                   const std::vector<double>* w2_prev) {
  std::vector<std::string> header{"t"};
  for (int a = 0; a < ens.dim; ++a) header.push_back("mean_" + std::to_string(a));
  header.push_back("second_moment");
  header.push_back("w2_prev_iterate");
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < ens.law_summary.size(); ++k) {
    const auto& r = ens.law_summary[k];
    std::vector<double> row{r.t};
    for (int a = 0; a < ens.dim; ++a) row.push_back(r.mean[a]);
    row.push_back(r.l2);
    row.push_back(w2_prev && k < w2_prev->size() ? (*w2_prev)[k] : 0.0);
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_trajectory_csv(const std::string& path, const SolutionEnsemble& ens,
                          int max_particles) {
  std::vector<std::string> header{"particle", "t"};
  for (int a = 0; a < ens.dim; ++a) header.push_back("x_" + std::to_string(a));
  header.push_back("k_tv_running");
  const int np = std::min(max_particles, ens.particles);
  std::vector<std::vector<double>> rows;
  const int m = ens.steps();
  for (int p = 0; p < np; ++p) {
    double ktv = 0.0;
    int next_stat_step = 0;
    for (size_t si = 0; si < ens.snapshot_steps.size(); ++si) {
      const int k = ens.snapshot_steps[si];
      if (ens.has_step_stats) {
        for (; next_stat_step < k; ++next_stat_step)
          ktv += ens.s5[static_cast<size_t>(p) * m + next_stat_step];
      }
      std::vector<double> row{static_cast<double>(p), ens.grid[k]};
      for (int a = 0; a < ens.dim; ++a)
        row.push_back(ens.snapshots[si][static_cast<size_t>(p) * ens.dim + a]);
      row.push_back(ktv);
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

void write_noise_csv(const std::string& path, const NoiseEnsemble& noise) {
  std::ostringstream os;
  os << "particle,kind,step_or_time";
  for (int a = 0; a < noise.dim; ++a) os << ",v_" << a;
  os << "\n";
  const int steps = static_cast<int>(noise.grid.size()) - 1;
  for (size_t p = 0; p < noise.paths.size(); ++p) {
    for (int k = 0; k < steps; ++k) {
      os << p << ",dW," << fmt_g17(noise.grid[k]);
      for (int a = 0; a < noise.dim; ++a)
        os << "," << fmt_g17(noise.paths[p].brownian[static_cast<size_t>(k) * noise.dim + a]);
      os << "\n";
    }
    for (const auto& j : noise.paths[p].jumps) {
      os << p << ",jump," << fmt_g17(j.time);
      for (int a = 0; a < j.mark.size(); ++a) os << "," << fmt_g17(j.mark[a]);
      for (int a = static_cast<int>(j.mark.size()); a < noise.dim; ++a) os << ",0";
      os << "\n";
    }
  }
  write_text_file(path, os.str());
}

nlohmann::json manifest_json(const Scenario& sc, uint64_t seed,
                             const std::vector<std::string>& artifacts,
                             const SolutionEnsemble* ens, bool converged_flag,
                             bool has_convergence) {
  nlohmann::json j;
  j["scenario"] = sc.name;
  j["version"] = kVersion;
  j["seed"] = seed;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(sc.config_hash));
  j["config_hash"] = hash;
  j["dimension"] = sc.dim;
  j["particles"] = sc.scheme.particles;
  j["step"] = sc.scheme.h;
  j["artifacts"] = artifacts;
  nlohmann::json flags;
  if (ens) {
    flags["projected_initial_count"] = ens->projected_initial_count;
    flags["max_domain_distance"] = ens->max_domain_distance;
    flags["max_jump_constraint_action"] = ens->max_jump_dk;
    flags["jump_events"] = ens->jump_events.size();
  }
  if (has_convergence) flags["converged"] = converged_flag;
  j["flags"] = flags;
  return j;
}

std::vector<Vec> read_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open cloud file: " + path);
  std::vector<Vec> points;
  std::string line;
  int dim = -1;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> cells;
    std::string cur;
    bool numeric = true;
    auto flush = [&]() {
      if (cur.empty()) return;
      try {
        size_t pos = 0;
        cells.push_back(std::stod(cur, &pos));
        if (pos != cur.size()) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      cur.clear();
    };
    for (char c : line) {
      if (c == ',')
        flush();
      else if (c != '\r' && c != ' ')
        cur += c;
    }
    flush();
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw UsageError("cloud CSV: non-numeric row in " + path);
    }
    first = false;
    if (cells.empty()) continue;
    if (dim < 0) dim = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != dim)
      throw UsageError("cloud CSV: inconsistent row width in " + path);
    Vec v(dim);
    for (int a = 0; a < dim; ++a) v[a] = cells[a];
    points.push_back(v);
  }
  if (points.empty()) throw UsageError("cloud CSV: no points in " + path);
  return points;
}

}  // namespace mmv
