#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "hetnet/admm_power.hpp"
#include "hetnet/net_model.hpp"
#include "hetnet/swmmse.hpp"

namespace hetnet {

enum class Mode { PowerMin, Selection, SumRate, SumRateClustered };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
bool is_power_mode(Mode m);

enum class Baseline { AllOn, Random50, Random70 };
std::string to_string(Baseline b);
Baseline baseline_from_string(const std::string& s);

struct ExperimentSpec {
  Mode mode = Mode::PowerMin;
  int cells = 1;
  int bs_per_cell = 4;
  int users_per_cell = 2;
  int tx_antennas = 1;
  int rx_antennas = 1;
  /// Power modes: 1/sigma^2. Sum-rate modes: per-cell total budget P^tot (sigma^2 = 1).
  double snr_db = 10.0;
  double tau_db = 15.0;
  double center_budget_db = 10.0;
  double other_budget_db = 5.0;

  AdmmConfig admm;
  double beta0 = 1.0;
  SwmmseConfig swmmse;
  double mu = 1.0;
  double lambda = 0.25;
  int reweight_rounds = 6;

  std::uint64_t seed = 1;
  int realizations = 1;
  std::vector<Baseline> baselines;
  int threads = 1;
  bool timing = false;

  void validate() const;
  NetworkParams network_params() const;
};

/// Named configurations of the two simulation setups.
ExperimentSpec preset(const std::string& name);
std::vector<std::string> preset_names();

struct ResultRow {
  std::string mode;
  int cells = 0;
  std::uint64_t seed = 0;
  int realization = 0;
  std::string status;
  int iters = 0;
  int active_bs = 0;
  double total_power_w = 0.0;
  double sum_rate_nats = 0.0;
  double runtime_ms = 0.0;

  bool operator==(const ResultRow&) const = default;
};

/// Main solver row first, then one row per baseline, for realization `index`.
std::vector<ResultRow> run_realization(const ExperimentSpec& spec, int index);

/// Random subset with round(fraction * Q) BSs per cell, the center BS always on.
std::vector<int> random_selection(const IndexLayout& layout, double fraction, std::uint64_t seed);

struct ExperimentResult {
  std::vector<ResultRow> rows;
  bool interrupted = false;
  bool any_infeasible = false;
};

/// Runs every realization (seed + index) and streams rows in realization
/// order to `sink` when non-null. Stops early once `stop` becomes true.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream* sink = nullptr,
                                const std::atomic<bool>* stop = nullptr);

std::string csv_header();
std::string csv_line(const ResultRow& row);
void emit_csv(const std::vector<ResultRow>& rows, std::ostream& out);
void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
std::vector<ResultRow> parse_csv(std::istream& in);
std::vector<ResultRow> parse_csv(const std::string& text);

/// Per row mode: counts and mean/std of active BSs, power (feasible only) and rate.
nlohmann::json summarize(const ExperimentSpec& spec, const std::vector<ResultRow>& rows);
nlohmann::json to_json(const ExperimentSpec& spec);

}  // namespace hetnet
