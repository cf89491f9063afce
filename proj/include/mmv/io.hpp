#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mmv/diagnostics.hpp"
#include "mmv/scenario.hpp"
#include "mmv/solver.hpp"

namespace mmv {

inline constexpr const char* kVersion = "1.0.0";

/// 17 significant digits; round-trips doubles exactly.
std::string fmt_g17(double v);

void write_text_file(const std::string& path, const std::string& content);

/// CSV with a header row; every cell printed with fmt_g17.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// Law-flow summary: t, mean components, second moment, and (for Picard runs)
/// the per-time W2 distance to the previous iterate.
void write_law_csv(const std::string& path, const SolutionEnsemble& ens,
                   const std::vector<double>* w2_prev = nullptr);

/// Trajectories of the first `max_particles` particles at snapshot times:
/// particle, t, state components, running ||K||.
void write_trajectory_csv(const std::string& path, const SolutionEnsemble& ens, int max_particles);

void write_noise_csv(const std::string& path, const NoiseEnsemble& noise);

nlohmann::json manifest_json(const Scenario& sc, uint64_t seed,
                             const std::vector<std::string>& artifacts,
                             const SolutionEnsemble* ens, bool converged_flag, bool has_convergence);

/// Point cloud from CSV (optional header; one point per row).
std::vector<Vec> read_cloud_csv(const std::string& path);

}  // namespace mmv
