#include "hetnet/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "parallel.hpp"

namespace hetnet {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::PowerMin:
      return "power-min";
    case Mode::Selection:
      return "selection";
    case Mode::SumRate:
      return "sumrate";
    case Mode::SumRateClustered:
      return "sumrate-clustered";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::PowerMin, Mode::Selection, Mode::SumRate, Mode::SumRateClustered})
    if (to_string(m) == s) return m;
  throw ConfigInvalid("unknown mode '" + s + "'");
}

bool is_power_mode(Mode m) { return m == Mode::PowerMin || m == Mode::Selection; }

std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::AllOn:
      return "all-on";
    case Baseline::Random50:
      return "random50";
    case Baseline::Random70:
      return "random70";
  }
  return "unknown";
}

Baseline baseline_from_string(const std::string& s) {
  for (Baseline b : {Baseline::AllOn, Baseline::Random50, Baseline::Random70})
    if (to_string(b) == s) return b;
  throw ConfigInvalid("unknown baseline '" + s + "'");
}

void ExperimentSpec::validate() const {
  if (cells < 1 || bs_per_cell < 1 || users_per_cell < 1) throw ConfigInvalid("network sizes must be >= 1");
  if (tx_antennas < 1 || rx_antennas < 1) throw ConfigInvalid("antenna counts must be >= 1");
  if (realizations < 1) throw ConfigInvalid("realizations must be >= 1");
  if (threads < 1) throw ConfigInvalid("threads must be >= 1");
  if (reweight_rounds < 1) throw ConfigInvalid("reweight_rounds must be >= 1");
  if (!std::isfinite(snr_db) || !std::isfinite(tau_db)) throw ConfigInvalid("snr and tau must be finite");
  if (is_power_mode(mode) && rx_antennas != 1) throw ConfigInvalid("power modes need single-antenna users");
  if (!(beta0 >= 0.0) || !(mu >= 0.0) || !(lambda >= 0.0)) throw ConfigInvalid("penalties must be non-negative");
  AdmmConfig a = admm;
  a.beta.clear();
  a.validate(cells * bs_per_cell);
  SwmmseConfig s = swmmse;
  s.mu.clear();
  s.lambda.clear();
  s.validate(IndexLayout{});
}

NetworkParams ExperimentSpec::network_params() const {
  NetworkParams p;
  p.cells = cells;
  p.bs_per_cell = bs_per_cell;
  p.users_per_cell = users_per_cell;
  p.tx_antennas = tx_antennas;
  p.rx_antennas = rx_antennas;
  p.sinr_target_db = tau_db;
  if (is_power_mode(mode)) {
    p.noise_power = db_to_linear(-snr_db);
    p.center_bs_budget_db = center_budget_db;
    p.other_bs_budget_db = other_budget_db;
  } else {
    const double total = db_to_linear(snr_db);
    p.noise_power = 1.0;
    const double center = bs_per_cell > 1 ? total / 2.0 : total;
    p.center_bs_budget_db = 10.0 * std::log10(center);
    p.other_bs_budget_db = bs_per_cell > 1 ? 10.0 * std::log10(total / 2.0 / (bs_per_cell - 1)) : p.center_bs_budget_db;
  }
  return p;
}

ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  if (name == "powermin-large") {
    s.mode = Mode::Selection;
    s.cells = 4;
    s.users_per_cell = 10;
    s.bs_per_cell = 20;
    s.tx_antennas = 5;
    s.tau_db = 15.0;
    s.snr_db = 10.0;
    s.admm.rho = 5.0;
    s.admm.eps_tol = 1e-4;
    s.realizations = 100;
    s.baselines = {Baseline::AllOn, Baseline::Random70};
    return s;
  }
  if (name == "sumrate-large") {
    s.mode = Mode::SumRate;
    s.cells = 4;
    s.users_per_cell = 10;
    s.bs_per_cell = 10;
    s.tx_antennas = 4;
    s.rx_antennas = 2;
    s.snr_db = 10.0;
    s.mu = 1.5;
    s.lambda = 0.0;
    s.realizations = 100;
    s.baselines = {Baseline::AllOn, Baseline::Random50};
    return s;
  }
  throw ConfigInvalid("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"powermin-large", "sumrate-large"}; }

std::vector<int> random_selection(const IndexLayout& layout, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> out;
  for (int k = 0; k < layout.num_cells(); ++k) {
    const int Q = layout.bs_per_cell[k];
    const int keep = std::clamp(static_cast<int>(std::lround(fraction * Q)), 1, Q);
    std::vector<int> others;
    for (int q = 1; q < Q; ++q) others.push_back(q);
    // Partial Fisher-Yates with an explicit draw so the result does not depend
    // on the standard library's shuffle.
    for (int t = 0; t < keep - 1; ++t) {
      const auto span = static_cast<std::uint64_t>(others.size() - t);
      const int pick = t + static_cast<int>(rng() % span);
      std::swap(others[t], others[pick]);
    }
    std::vector<int> cell{0};
    cell.insert(cell.end(), others.begin(), others.begin() + (keep - 1));
    std::sort(cell.begin(), cell.end());
    for (int q : cell) out.push_back(layout.bs_offset(k) + q);
  }
  return out;
}

namespace {

constexpr std::uint64_t kBaselineSalt = 0x9e3779b97f4a7c15ULL;

ResultRow make_row(const std::string& mode, const ExperimentSpec& spec, int index, const SolveReport& rep,
                   const NetworkInstance& net, int iters, double ms) {
  ResultRow r;
  r.mode = mode;
  r.cells = spec.cells;
  r.seed = spec.seed;
  r.realization = index;
  r.status = to_string(rep.status);
  r.iters = iters;
  r.active_bs = static_cast<int>(rep.active_set.size());
  r.total_power_w = rep.total_power;
  r.sum_rate_nats = rep.sum_rate ? *rep.sum_rate : sum_rate(net, rep.beamformers);
  r.runtime_ms = spec.timing ? ms : 0.0;
  return r;
}

AdmmConfig admm_config(const ExperimentSpec& spec) {
  AdmmConfig c = spec.admm;
  c.beta.clear();
  c.theta = 1.0;
  c.reweight_rounds = spec.reweight_rounds;
  c.threads = 1;
  c.record_history = false;
  return c;
}

SwmmseConfig swmmse_config(const ExperimentSpec& spec, const IndexLayout& lay) {
  SwmmseConfig c = spec.swmmse;
  c.mu.assign(lay.num_bs(), spec.mu);
  if (spec.mode == Mode::SumRateClustered)
    c.lambda.assign(lay.num_cells(), spec.lambda);
  else
    c.lambda.clear();
  c.reweight_rounds = spec.reweight_rounds;
  c.threads = 1;
  return c;
}

}  // namespace

std::vector<ResultRow> run_realization(const ExperimentSpec& spec, int index) {
  using clock = std::chrono::steady_clock;
  const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(index);
  const NetworkInstance net = generate_network(spec.network_params(), seed);
  const auto& lay = net.layout();
  std::vector<ResultRow> rows;
  auto elapsed = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  auto t0 = clock::now();
  switch (spec.mode) {
    case Mode::PowerMin: {
      const SolveReport rep = admm_solve(net, admm_config(spec));
      rows.push_back(make_row(to_string(spec.mode), spec, index, rep, net, rep.iterations, elapsed(t0)));
      break;
    }
    case Mode::Selection: {
      AdmmConfig cfg = admm_config(spec);
      const AdmmConfig sel = selection_config(net, spec.beta0);
      cfg.beta = sel.beta;
      cfg.theta = sel.theta;
      const SelectionResult res = admm_select(net, cfg);
      int iters = res.debiased.iterations;
      for (const auto& r : res.rounds) iters += r.iterations;
      rows.push_back(make_row(to_string(spec.mode), spec, index, res.debiased, net, iters, elapsed(t0)));
      break;
    }
    case Mode::SumRate:
    case Mode::SumRateClustered: {
      const SwmmseSelection res = swmmse_select(net, swmmse_config(spec, lay));
      int iters = res.debiased.report.iterations;
      for (const auto& r : res.rounds) iters += r.report.iterations;
      rows.push_back(make_row(to_string(spec.mode), spec, index, res.debiased.report, net, iters, elapsed(t0)));
      break;
    }
  }

  for (Baseline b : spec.baselines) {
    t0 = clock::now();
    std::vector<int> set;
    if (b == Baseline::AllOn) {
      for (int q = 0; q < lay.num_bs(); ++q) set.push_back(q);
    } else {
      set = random_selection(lay, b == Baseline::Random50 ? 0.5 : 0.7, seed ^ kBaselineSalt);
    }
    SolveReport rep;
    if (is_power_mode(spec.mode)) {
      rep = debias(net, admm_config(spec), set);
    } else {
      SwmmseConfig cfg = swmmse_config(spec, lay);
      cfg.lambda.clear();
      rep = wmmse_on_support(net, cfg, set).report;
    }
    ResultRow row = make_row("baseline:" + to_string(b), spec, index, rep, net, rep.iterations, elapsed(t0));
    // A baseline's support is its selection, even where a solver left a BS idle.
    row.active_bs = static_cast<int>(set.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream* sink, const std::atomic<bool>* stop) {
  spec.validate();
  ExperimentResult out;
  const int chunk = std::max(spec.threads, 1);
  for (int start = 0; start < spec.realizations; start += chunk) {
    if (stop && stop->load()) {
      out.interrupted = true;
      break;
    }
    const int count = std::min(chunk, spec.realizations - start);
    std::vector<std::vector<ResultRow>> batch(count);
    detail::parallel_for(count, spec.threads, [&](int i) { batch[i] = run_realization(spec, start + i); });
    for (auto& rows : batch) {
      if (!rows.empty() && rows.front().status == to_string(SolveStatus::Infeasible)) out.any_infeasible = true;
      for (auto& r : rows) {
        if (sink) *sink << csv_line(r) << '\n';
        out.rows.push_back(std::move(r));
      }
    }
    if (sink) sink->flush();
  }
  return out;
}

std::string csv_header() {
  return "mode,cells,seed,realization,status,iters,active_bs,total_power_w,sum_rate_nats,runtime_ms";
}

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string csv_line(const ResultRow& r) {
  std::ostringstream s;
  s << r.mode << ',' << r.cells << ',' << r.seed << ',' << r.realization << ',' << r.status << ',' << r.iters << ','
    << r.active_bs << ',' << fmt_double(r.total_power_w) << ',' << fmt_double(r.sum_rate_nats) << ','
    << fmt_double(r.runtime_ms);
  return s.str();
}

void emit_csv(const std::vector<ResultRow>& rows, std::ostream& out) {
  out << csv_header() << '\n';
  for (const auto& r : rows) out << csv_line(r) << '\n';
}

void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  emit_csv(rows, out);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != csv_header()) throw InvalidArgument("CSV header mismatch");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw InvalidArgument("CSV row needs 10 fields: " + line);
    try {
      ResultRow r;
      r.mode = f[0];
      r.cells = std::stoi(f[1]);
      r.seed = std::stoull(f[2]);
      r.realization = std::stoi(f[3]);
      r.status = f[4];
      r.iters = std::stoi(f[5]);
      r.active_bs = std::stoi(f[6]);
      r.total_power_w = std::stod(f[7]);
      r.sum_rate_nats = std::stod(f[8]);
      r.runtime_ms = std::stod(f[9]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InvalidArgument("malformed CSV row: " + line);
    }
  }
  return rows;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

nlohmann::json summarize(const ExperimentSpec& spec, const std::vector<ResultRow>& rows) {
  struct Acc {
    int n = 0;
    int infeasible = 0;
    std::vector<double> active, power, rate, iters;
  };
  std::map<std::string, Acc> groups;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!groups.count(r.mode)) order.push_back(r.mode);
    Acc& a = groups[r.mode];
    ++a.n;
    const bool bad = r.status == to_string(SolveStatus::Infeasible);
    if (bad) ++a.infeasible;
    a.active.push_back(r.active_bs);
    a.rate.push_back(r.sum_rate_nats);
    a.iters.push_back(r.iters);
    if (!bad) a.power.push_back(r.total_power_w);
  }
  auto stats = [](const std::vector<double>& xs) {
    nlohmann::json j = {{"count", xs.size()}};
    if (xs.empty()) return j;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    j["mean"] = mean;
    j["std"] = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
    return j;
  };
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& name : order) {
    const Acc& a = groups[name];
    groups_json.push_back({{"mode", name},
                           {"realizations", a.n},
                           {"infeasible", a.infeasible},
                           {"active_bs", stats(a.active)},
                           {"total_power_w", stats(a.power)},
                           {"sum_rate_nats", stats(a.rate)},
                           {"iters", stats(a.iters)}});
  }
  return {{"spec", to_json(spec)}, {"groups", groups_json}};
}

nlohmann::json to_json(const ExperimentSpec& s) {
  std::vector<std::string> baselines;
  for (Baseline b : s.baselines) baselines.push_back(to_string(b));
  return {{"mode", to_string(s.mode)},
          {"cells", s.cells},
          {"bs_per_cell", s.bs_per_cell},
          {"users", s.users_per_cell},
          {"antennas_tx", s.tx_antennas},
          {"antennas_rx", s.rx_antennas},
          {"snr_db", s.snr_db},
          {"tau_db", s.tau_db},
          {"rho", s.admm.rho},
          {"eps_tol", s.admm.eps_tol},
          {"beta", s.beta0},
          {"mu", s.mu},
          {"lambda", s.lambda},
          {"reweight_rounds", s.reweight_rounds},
          {"seed", s.seed},
          {"realizations", s.realizations},
          {"baselines", baselines}};
}

}  // namespace hetnet
