#include "hetnet/report.hpp"

#include <algorithm>

namespace hetnet {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::MaxIterations:
      return "max_iterations";
    case SolveStatus::Infeasible:
      return "infeasible";
  }
  return "unknown";
}

SolveStatus solve_status_from_string(const std::string& s) {
  if (s == "converged") return SolveStatus::Converged;
  if (s == "max_iterations") return SolveStatus::MaxIterations;
  if (s == "infeasible") return SolveStatus::Infeasible;
  throw InvalidArgument("unknown solve status '" + s + "'");
}

double IterationRecord::metric() const { return *std::max_element(residuals.begin(), residuals.end()); }

nlohmann::json to_json(const SolveReport& report, bool include_beamformers) {
  using nlohmann::json;
  json history = json::array();
  for (const auto& rec : report.history) {
    history.push_back({{"iter", rec.iter},
                       {"objective", rec.objective},
                       {"residuals", rec.residuals}});
  }
  json out = {{"final",
               {{"status", to_string(report.status)},
                {"iterations", report.iterations},
                {"total_power", report.total_power},
                {"active_set", report.active_set}}},
              {"history", std::move(history)}};
  if (report.sum_rate) {
    out["final"]["sum_rate"] = *report.sum_rate;
    out["final"]["alpha"] = report.alpha;
    out["final"]["user_rates"] = report.user_rates;
    out["final"]["cluster_sizes"] = report.cluster_sizes;
    out["objective_trace"] = report.objective_trace;
  }
  if (!report.flags.empty()) out["final"]["flags"] = report.flags;
  if (include_beamformers) out["beamformers"] = to_json(report.beamformers);
  return out;
}

SolveReport report_from_json(const nlohmann::json& j) {
  SolveReport r;
  const auto& fin = j.at("final");
  r.status = solve_status_from_string(fin.at("status").get<std::string>());
  r.iterations = fin.at("iterations").get<int>();
  r.total_power = fin.at("total_power").get<double>();
  r.active_set = fin.at("active_set").get<std::vector<int>>();
  for (const auto& rec : j.at("history")) {
    IterationRecord ir;
    ir.iter = rec.at("iter").get<int>();
    ir.objective = rec.at("objective").get<double>();
    ir.residuals = rec.at("residuals").get<std::array<double, 4>>();
    r.history.push_back(ir);
  }
  if (fin.contains("sum_rate")) {
    r.sum_rate = fin.at("sum_rate").get<double>();
    r.alpha = fin.at("alpha").get<std::vector<double>>();
    r.user_rates = fin.at("user_rates").get<std::vector<double>>();
    r.cluster_sizes = fin.at("cluster_sizes").get<std::vector<int>>();
    r.objective_trace = j.value("objective_trace", std::vector<double>{});
  }
  if (fin.contains("flags")) r.flags = fin.at("flags").get<std::vector<std::string>>();
  if (j.contains("beamformers")) r.beamformers = beamformers_from_json(j.at("beamformers"));
  return r;
}

}  // namespace hetnet
