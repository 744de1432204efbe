#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hetnet/experiment.hpp"
#include "hetnet/oracle.hpp"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

template <class T>
void override_if(const CLI::Option* opt, T& dst, const T& src) {
  if (opt->count() > 0) dst = src;
}

int run_graph(const std::string& path, int cap) {
  std::ifstream in(path);
  if (!in) throw hetnet::Error("cannot open '" + path + "'");
  const hetnet::Graph g = hetnet::parse_edge_list(in);
  const hetnet::ActiveSetResult act = hetnet::min_active_set(hetnet::vertex_cover_instance(g), cap);
  nlohmann::json j;
  j["vertices"] = g.vertices;
  j["edges"] = g.edges.size();
  j["min_vertex_cover"] = hetnet::min_vertex_cover(g, cap);
  j["min_dominating_set"] = hetnet::min_dominating_set(g, cap);
  j["min_active_set"] = act.feasible ? nlohmann::json(act.size) : nlohmann::json(nullptr);
  std::vector<int> witness;
  for (int q : act.witness) witness.push_back(q + 1);
  j["active_set_witness"] = witness;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace hetnet;

  CLI::App app{"Joint base-station activation and beamforming experiments"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.set_version_flag("--version", "hetnet 1.0.0");

  ExperimentSpec d;
  std::string preset_name;
  std::string mode = to_string(d.mode);
  std::vector<std::string> baselines;
  std::string out_path, summary_path;
  double rho = d.admm.rho, tol = d.admm.eps_tol;
  int max_iters = d.admm.max_iters;
  bool list_presets = false;

  auto* o_preset = app.add_option("--preset", preset_name, "Start from a named configuration");
  app.add_flag("--list-presets", list_presets, "Print the preset names and exit");
  auto* o_mode = app.add_option("--mode", mode, "power-min | selection | sumrate | sumrate-clustered");
  auto* o_cells = app.add_option("--cells", d.cells, "Number of cells K");
  auto* o_bs = app.add_option("--bs-per-cell", d.bs_per_cell, "Base stations per cell Q");
  auto* o_users = app.add_option("--users", d.users_per_cell, "Users per cell I");
  auto* o_mtx = app.add_option("--antennas-tx", d.tx_antennas, "Transmit antennas per BS M");
  auto* o_nrx = app.add_option("--antennas-rx", d.rx_antennas, "Receive antennas per user N");
  auto* o_snr = app.add_option("--snr-db", d.snr_db,
                               "Power modes: 1/sigma^2 in dB. Sum-rate modes: per-cell total power in dB");
  auto* o_tau = app.add_option("--tau-db", d.tau_db, "SINR target in dB (power modes)");
  auto* o_pc = app.add_option("--center-budget-db", d.center_budget_db, "Center BS budget in dB (power modes)");
  auto* o_po = app.add_option("--other-budget-db", d.other_budget_db, "Other BS budget in dB (power modes)");
  auto* o_rho = app.add_option("--rho", rho, "ADMM penalty parameter");
  auto* o_tol = app.add_option("--tol", tol, "ADMM stopping tolerance");
  auto* o_iters = app.add_option("--max-iters", max_iters, "ADMM iteration cap; unconverged runs are reported infeasible");
  auto* o_beta = app.add_option("--beta", d.beta0, "Selection penalty beta0 (selection mode)");
  auto* o_mu = app.add_option("--mu", d.mu, "Activation penalty (sum-rate modes)");
  auto* o_lambda = app.add_option("--lambda", d.lambda, "Clustering penalty (sumrate-clustered)");
  auto* o_seed = app.add_option("--seed", d.seed, "Base seed; realization r uses seed + r");
  auto* o_real = app.add_option("--realizations", d.realizations, "Number of channel realizations");
  auto* o_rw = app.add_option("--reweight-rounds", d.reweight_rounds, "Reweighting rounds");
  auto* o_base = app.add_option("--baseline", baselines, "all-on | random50 | random70 (repeatable)");
  auto* o_thr = app.add_option("--threads", d.threads, "Realizations solved in parallel");
  auto* o_timing = app.add_flag("--timing", d.timing, "Record wall-clock runtime per row");
  app.add_option("--out", out_path, "CSV output file (default: stdout)");
  app.add_option("--summary", summary_path, "JSON summary output file");

  auto* graph_cmd = app.add_subcommand("graph", "Exact cover / active-set sizes of an edge-list graph");
  std::string graph_path;
  int graph_cap = kDefaultOracleCap;
  graph_cmd->add_option("file", graph_path, "Edge list: vertex count, then one 1-based 'u v' pair per line")
      ->required();
  graph_cmd->add_option("--cap", graph_cap, "Largest vertex count accepted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (list_presets) {
      for (const auto& n : preset_names()) std::cout << n << '\n';
      return 0;
    }
    if (*graph_cmd) return run_graph(graph_path, graph_cap);

    ExperimentSpec spec = o_preset->count() > 0 ? preset(preset_name) : ExperimentSpec{};
    if (o_mode->count() > 0) spec.mode = mode_from_string(mode);
    override_if(o_cells, spec.cells, d.cells);
    override_if(o_bs, spec.bs_per_cell, d.bs_per_cell);
    override_if(o_users, spec.users_per_cell, d.users_per_cell);
    override_if(o_mtx, spec.tx_antennas, d.tx_antennas);
    override_if(o_nrx, spec.rx_antennas, d.rx_antennas);
    override_if(o_snr, spec.snr_db, d.snr_db);
    override_if(o_tau, spec.tau_db, d.tau_db);
    override_if(o_pc, spec.center_budget_db, d.center_budget_db);
    override_if(o_po, spec.other_budget_db, d.other_budget_db);
    override_if(o_rho, spec.admm.rho, rho);
    override_if(o_tol, spec.admm.eps_tol, tol);
    override_if(o_iters, spec.admm.max_iters, max_iters);
    override_if(o_iters, spec.admm.infeasible_iter_cap, max_iters);
    override_if(o_beta, spec.beta0, d.beta0);
    override_if(o_mu, spec.mu, d.mu);
    override_if(o_lambda, spec.lambda, d.lambda);
    override_if(o_seed, spec.seed, d.seed);
    override_if(o_real, spec.realizations, d.realizations);
    override_if(o_rw, spec.reweight_rounds, d.reweight_rounds);
    override_if(o_thr, spec.threads, d.threads);
    override_if(o_timing, spec.timing, d.timing);
    if (o_base->count() > 0) {
      spec.baselines.clear();
      for (const auto& b : baselines) spec.baselines.push_back(baseline_from_string(b));
    }
    spec.validate();

    std::ofstream file;
    std::ostream* sink = &std::cout;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw Error("cannot open '" + out_path + "' for writing");
      sink = &file;
    }
    *sink << csv_header() << '\n';

    std::signal(SIGINT, on_sigint);
    const ExperimentResult res = run_experiment(spec, sink, &g_stop);

    if (!summary_path.empty()) {
      nlohmann::json j;
      j["spec"] = to_json(spec);
      j["summary"] = summarize(spec, res.rows)["groups"];
      j["interrupted"] = res.interrupted;
      std::ofstream s(summary_path);
      if (!s) throw Error("cannot open '" + summary_path + "' for writing");
      s << j.dump(2) << '\n';
    }
    if (res.interrupted) {
      std::cerr << "interrupted after " << res.rows.size() << " rows\n";
      return 1;
    }
    return res.any_infeasible ? 2 : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
