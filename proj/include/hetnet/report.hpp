#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetnet/net_model.hpp"

namespace hetnet {

enum class SolveStatus { Converged, MaxIterations, Infeasible };

std::string to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);

/// One ADMM iteration: f^min(w) and the four stopping-rule terms
/// (K consensus, v/w consensus, noise-copy error, relative objective change).
struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  std::array<double, 4> residuals{};

  double metric() const;
};

/// Outcome of either solver. The S-WMMSE-only fields stay empty for ADMM runs.
struct SolveReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  BeamformerSet beamformers;
  double total_power = 0.0;
  std::vector<int> active_set;
  std::vector<IterationRecord> history;

  std::optional<double> sum_rate;
  std::vector<double> alpha;
  std::vector<double> user_rates;
  std::vector<int> cluster_sizes;
  std::vector<double> objective_trace;
  std::vector<std::string> flags;
};

nlohmann::json to_json(const SolveReport& report, bool include_beamformers = false);
SolveReport report_from_json(const nlohmann::json& j);

}  // namespace hetnet
