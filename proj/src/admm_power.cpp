#include "hetnet/admm_power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace hetnet {

void AdmmConfig::validate(int num_bs) const {
  if (!(rho > 0.0)) throw ConfigInvalid("rho must be positive");
  if (!(theta >= 0.0)) throw ConfigInvalid("theta must be non-negative");
  if (!(eps_tol > 0.0)) throw ConfigInvalid("eps_tol must be positive");
  if (max_iters < 1) throw ConfigInvalid("max_iters must be >= 1");
  if (infeasible_iter_cap < 1) throw ConfigInvalid("infeasible_iter_cap must be >= 1");
  if (!(reweight_eps > 0.0)) throw ConfigInvalid("reweight_eps must be positive");
  if (reweight_rounds < 1) throw ConfigInvalid("reweight_rounds must be >= 1");
  if (!beta.empty()) {
    if (static_cast<int>(beta.size()) != num_bs) throw ConfigInvalid("beta needs one entry per BS");
    for (double b : beta)
      if (!(b >= 0.0)) throw ConfigInvalid("beta entries must be non-negative");
  }
}

AdmmConfig power_min_config() {
  AdmmConfig cfg;
  cfg.beta.clear();
  cfg.theta = 1.0;
  return cfg;
}

AdmmConfig selection_config(const NetworkInstance& net, double beta0) {
  AdmmConfig cfg;
  cfg.beta.assign(net.power_budget.size(), beta0);
  double total = 0.0;
  for (double p : net.power_budget) total += p;
  cfg.theta = 1.0 / total;
  return cfg;
}

// ---------------------------------------------------------------------------
// Closed-form block solutions
// ---------------------------------------------------------------------------

ConeProjection project_sinr_cone(double tau, cdouble direct_target, const VectorXcd& cross_target,
                                 double kappa_target) {
  if (!(tau > 0.0)) throw InvalidArgument("SINR target must be positive");
  const double c = std::sqrt(tau);
  const double t0 = direct_target.real();
  const double s0 = std::sqrt(kappa_target * kappa_target + cross_target.squaredNorm());
  const double floor = c * s0;

  ConeProjection out;
  if (t0 >= floor) {
    out.direct = t0;
    out.cross = cross_target;
    out.kappa = kappa_target;
    return out;
  }
  out.gamma = 2.0 * (floor - t0) / (1.0 + tau);
  if (c * t0 + s0 <= 0.0) {
    // Target lies in the polar cone: the projection is the apex.
    out.cross = VectorXcd::Zero(cross_target.size());
    return out;
  }
  const double s_star = (c * t0 + s0) / (1.0 + tau);
  const double scale = s_star / s0;
  out.direct = c * s_star;
  out.cross = scale * cross_target;
  out.kappa = scale * kappa_target;
  return out;
}

VectorXcd shrink_to_power_ball(const VectorXcd& b, double beta, double rho, double budget) {
  const double nb = b.norm();
  if (rho * nb <= beta) return VectorXcd::Zero(b.size());
  VectorXcd w = b * ((rho * nb - beta) / (rho * nb));
  if (w.squaredNorm() <= budget) return w;
  return b * (std::sqrt(budget) / nb);
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

namespace {

VectorXcd gather_bs(const BeamformerSet& v, int bs) {
  const auto& lay = v.layout();
  const int cell = lay.cell_of_bs(bs);
  const int q = bs - lay.bs_offset(cell);
  const int first = lay.user_offset(cell);
  const int M = lay.tx_antennas;
  VectorXcd out(M * lay.users_per_cell[cell]);
  for (int i = 0; i < lay.users_per_cell[cell]; ++i) out.segment(i * M, M) = v.block(first + i, q);
  return out;
}

void scatter_bs(BeamformerSet& v, int bs, const VectorXcd& stack) {
  const auto& lay = v.layout();
  const int cell = lay.cell_of_bs(bs);
  const int q = bs - lay.bs_offset(cell);
  const int first = lay.user_offset(cell);
  const int M = lay.tx_antennas;
  for (int i = 0; i < lay.users_per_cell[cell]; ++i) v.block(first + i, q) = stack.segment(i * M, M);
}

}  // namespace

namespace {

NetworkInstance unit_noise(const NetworkInstance& net) {
  NetworkInstance out = net;
  const auto& lay = net.layout();
  for (int u = 0; u < lay.num_users(); ++u) {
    const double s = std::sqrt(net.noise_power[u]);
    for (int k = 0; k < lay.num_cells(); ++k) out.channels[u * lay.num_cells() + k] /= s;
    out.noise_power[u] = 1.0;
  }
  return out;
}

}  // namespace

AdmmSolver::AdmmSolver(const NetworkInstance& net, AdmmConfig config, std::vector<int> enabled_bs)
    : cfg_(std::move(config)) {
  net.validate();
  net_ = cfg_.normalize_noise ? unit_noise(net) : net;
  const auto& lay = net_.layout();
  if (lay.rx_antennas != 1) throw DimensionMismatch("the ADMM power solver needs single-antenna users");
  cfg_.validate(lay.num_bs());

  enabled_.assign(lay.num_bs(), enabled_bs.empty() ? 1 : 0);
  for (int b : enabled_bs) {
    if (b < 0 || b >= lay.num_bs()) throw DimensionMismatch("enabled BS index out of range");
    enabled_[b] = 1;
  }
  for (double s2 : net_.noise_power) sigma_.push_back(std::sqrt(s2));

  const int M = lay.tx_antennas;
  const int users = lay.num_users();
  const double shift = 1.0 + 2.0 * cfg_.theta / cfg_.rho;
  for (int k = 0; k < lay.num_cells(); ++k) {
    std::vector<int> rows;
    for (int q = 0; q < lay.bs_per_cell[k]; ++q) {
      if (!enabled_[lay.bs_offset(k) + q]) continue;
      for (int m = 0; m < M; ++m) rows.push_back(q * M + m);
    }
    MatrixXcd stack(static_cast<Eigen::Index>(rows.size()), users);
    for (int j = 0; j < users; ++j) {
      const auto& h = net_.channel(j, k);
      for (std::size_t r = 0; r < rows.size(); ++r) stack(static_cast<Eigen::Index>(r), j) = std::conj(h(0, rows[r]));
    }
    MatrixXcd system = shift * MatrixXcd::Identity(stack.rows(), stack.rows());
    system.noalias() += stack * stack.adjoint();
    factor_.emplace_back(system);
    rows_.push_back(std::move(rows));
    stack_.push_back(std::move(stack));
  }
}

AdmmState AdmmSolver::cold_start() const {
  const auto& lay = net_.layout();
  const int users = lay.num_users();
  AdmmState s;
  s.w = BeamformerSet::zeros(lay);
  s.v = BeamformerSet::zeros(lay);
  s.lambda = BeamformerSet::zeros(lay);
  s.K = MatrixXcd::Zero(users, users);
  s.mu = MatrixXcd::Zero(users, users);
  s.kappa = Eigen::Map<const VectorXd>(sigma_.data(), users);
  s.kappa_hat = s.kappa;
  s.delta = VectorXd::Zero(users);
  return s;
}

AdmmState AdmmSolver::warm_start(const BeamformerSet& v0) const {
  check_dimensions(net_, v0);
  AdmmState s = cold_start();
  s.v = v0;
  for (int b = 0; b < net_.layout().num_bs(); ++b)
    if (!enabled(b)) s.v.clear_bs(b);
  s.w = s.v;
  s.K = cross_gains(s.v);
  return s;
}

MatrixXcd AdmmSolver::cross_gains(const BeamformerSet& v) const {
  const auto& lay = net_.layout();
  const int users = lay.num_users();
  MatrixXcd G(users, users);
  for (int i = 0; i < users; ++i) {
    const int k = lay.cell_of_user(i);
    for (int j = 0; j < users; ++j) G(j, i) = (net_.channel(j, k) * v.user(i))(0);
  }
  return G;
}

void AdmmSolver::update_K_kappa(AdmmState& s, int user) const {
  const auto& lay = net_.layout();
  const int users = lay.num_users();
  VectorXcd targets(users);
  for (int j = 0; j < users; ++j) {
    const cdouble gain = (net_.channel(user, lay.cell_of_user(j)) * s.v.user(j))(0);
    targets(j) = gain - s.mu(user, j) / cfg_.rho;
  }
  VectorXcd cross(users - 1);
  for (int j = 0, c = 0; j < users; ++j)
    if (j != user) cross(c++) = targets(j);
  const double kappa_target = s.kappa_hat(user) - s.delta(user) / cfg_.rho;

  const ConeProjection p = project_sinr_cone(net_.sinr_target[user], targets(user), cross, kappa_target);
  for (int j = 0, c = 0; j < users; ++j) s.K(user, j) = (j == user) ? cdouble(p.direct, 0.0) : p.cross(c++);
  s.kappa(user) = p.kappa;
}

void AdmmSolver::update_w(AdmmState& s, int bs) const {
  const auto& lay = net_.layout();
  const int cell = lay.cell_of_bs(bs);
  if (!enabled(bs)) {
    scatter_bs(s.w, bs, VectorXcd::Zero(lay.tx_antennas * lay.users_per_cell[cell]));
    return;
  }
  const VectorXcd b = gather_bs(s.v, bs) - gather_bs(s.lambda, bs) / cfg_.rho;
  scatter_bs(s.w, bs, shrink_to_power_ball(b, cfg_.beta_at(bs), cfg_.rho, net_.power_budget[bs]));
}

void AdmmSolver::update_v(AdmmState& s, int cell) const {
  const auto& lay = net_.layout();
  const auto& rows = rows_[cell];
  const int first = lay.user_offset(cell);
  for (int i = first; i < first + lay.users_per_cell[cell]; ++i) {
    s.kappa_hat(i) = sigma_[i];
    VectorXcd& vi = s.v.user(i);
    vi.setZero();
    if (rows.empty()) continue;
    VectorXcd rhs = stack_[cell] * (cfg_.rho * s.K.col(i) + s.mu.col(i));
    const VectorXcd& wi = s.w.user(i);
    const VectorXcd& li = s.lambda.user(i);
    for (std::size_t r = 0; r < rows.size(); ++r)
      rhs(static_cast<Eigen::Index>(r)) += cfg_.rho * wi(rows[r]) + li(rows[r]);
    const VectorXcd x = factor_[cell].solve(rhs) / cfg_.rho;
    for (std::size_t r = 0; r < rows.size(); ++r) vi(rows[r]) = x(static_cast<Eigen::Index>(r));
  }
}

void AdmmSolver::update_duals(AdmmState& s) const {
  const auto& lay = net_.layout();
  s.mu += cfg_.rho * (s.K - cross_gains(s.v));
  for (int u = 0; u < lay.num_users(); ++u) s.lambda.user(u) += cfg_.rho * (s.w.user(u) - s.v.user(u));
  s.delta += cfg_.rho * (s.kappa - s.kappa_hat);
}

void AdmmSolver::update_block_a(AdmmState& s) const {
  const auto& lay = net_.layout();
  detail::parallel_for(lay.num_users(), cfg_.threads, [&](int u) { update_K_kappa(s, u); });
  detail::parallel_for(lay.num_bs(), cfg_.threads, [&](int b) { update_w(s, b); });
}

void AdmmSolver::update_block_b(AdmmState& s) const {
  detail::parallel_for(net_.layout().num_cells(), cfg_.threads, [&](int k) { update_v(s, k); });
}

void AdmmSolver::step(AdmmState& s) const {
  update_block_a(s);
  update_block_b(s);
  update_duals(s);
  ++s.iteration;
}

double AdmmSolver::objective(const BeamformerSet& w) const {
  double f = 0.0;
  for (int b = 0; b < net_.layout().num_bs(); ++b) {
    const double p = w.bs_power(b);
    f += cfg_.beta_at(b) * std::sqrt(p) + cfg_.theta * p;
  }
  return f;
}

double AdmmSolver::augmented_lagrangian(const AdmmState& s) const {
  const auto& lay = net_.layout();
  const double rho = cfg_.rho;
  double L = 0.0;
  for (int b = 0; b < lay.num_bs(); ++b) L += cfg_.beta_at(b) * s.w.bs_norm(b) + cfg_.theta * s.v.bs_power(b);
  const MatrixXcd rK = s.K - cross_gains(s.v);
  L += (s.mu.conjugate().cwiseProduct(rK)).real().sum() + 0.5 * rho * rK.squaredNorm();
  for (int u = 0; u < lay.num_users(); ++u) {
    const VectorXcd r = s.w.user(u) - s.v.user(u);
    L += std::real(s.lambda.user(u).dot(r)) + 0.5 * rho * r.squaredNorm();
  }
  const VectorXd rk = s.kappa - s.kappa_hat;
  L += s.delta.dot(rk) + 0.5 * rho * rk.squaredNorm();
  return L;
}

std::array<double, 4> AdmmSolver::residuals(const AdmmState& s, double previous_objective) const {
  const auto& lay = net_.layout();
  std::array<double, 4> r{};
  r[0] = (s.K - cross_gains(s.v)).cwiseAbs().maxCoeff() / std::max(1.0, s.K.norm());

  double vw_inf = 0.0;
  double v_norm2 = 0.0;
  double w_norm2 = 0.0;
  for (int u = 0; u < lay.num_users(); ++u) {
    vw_inf = std::max(vw_inf, (s.v.user(u) - s.w.user(u)).cwiseAbs().maxCoeff());
    v_norm2 += s.v.user(u).squaredNorm();
    w_norm2 += s.w.user(u).squaredNorm();
  }
  r[1] = vw_inf / std::max({1.0, std::sqrt(v_norm2), std::sqrt(w_norm2)});

  for (int u = 0; u < lay.num_users(); ++u)
    r[2] = std::max(r[2], std::abs(s.kappa(u) * s.kappa(u) - net_.noise_power[u]));

  const double f = objective(s.w);
  const double change = std::abs(f - previous_objective);
  if (std::abs(previous_objective) > std::numeric_limits<double>::min())
    r[3] = change / std::abs(previous_objective);
  else
    r[3] = change > 0.0 ? 1.0 : 0.0;
  return r;
}

SolveReport AdmmSolver::solve(const std::optional<BeamformerSet>& warm) const {
  AdmmState s = warm ? warm_start(*warm) : cold_start();
  SolveReport report;
  double previous = objective(s.w);
  const int limit = std::max(cfg_.max_iters, 1);
  bool converged = false;
  for (int t = 1; t <= limit; ++t) {
    step(s);
    const auto res = residuals(s, previous);
    previous = objective(s.w);
    IterationRecord rec{t, previous, res};
    if (cfg_.record_history) report.history.push_back(rec);
    if (t >= cfg_.min_iters && rec.metric() < cfg_.eps_tol) {
      converged = true;
      break;
    }
  }
  report.iterations = s.iteration;
  if (converged)
    report.status = SolveStatus::Converged;
  else
    report.status = s.iteration >= cfg_.infeasible_iter_cap ? SolveStatus::Infeasible : SolveStatus::MaxIterations;

  report.beamformers = s.w;
  report.total_power = total_power(s.w);
  report.active_set = active_bs_set(s.w, default_activity_tol(net_));
  return report;
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

SolveReport admm_solve(const NetworkInstance& net, const AdmmConfig& config,
                       const std::optional<BeamformerSet>& warm_start) {
  return AdmmSolver(net, config).solve(warm_start);
}

std::vector<double> reweight(const BeamformerSet& w, const std::vector<double>& beta0, double eps) {
  if (!(eps > 0.0)) throw ConfigInvalid("reweighting epsilon must be positive");
  const int nbs = w.layout().num_bs();
  if (static_cast<int>(beta0.size()) != nbs) throw DimensionMismatch("beta0 needs one entry per BS");
  std::vector<double> beta(nbs);
  for (int b = 0; b < nbs; ++b) beta[b] = beta0[b] / (w.bs_norm(b) + eps);
  return beta;
}

SolveReport debias(const NetworkInstance& net, const AdmmConfig& config, const std::vector<int>& active_set,
                   const std::optional<BeamformerSet>& warm_start) {
  if (active_set.empty()) {
    SolveReport r;
    r.status = SolveStatus::Infeasible;
    r.beamformers = BeamformerSet::zeros(net.layout());
    r.flags.push_back("empty_active_set");
    return r;
  }
  AdmmConfig cfg = config;
  cfg.beta.clear();
  cfg.theta = 1.0;
  return AdmmSolver(net, cfg, active_set).solve(warm_start);
}

SelectionResult admm_select(const NetworkInstance& net, const AdmmConfig& config) {
  const int nbs = net.layout().num_bs();
  config.validate(nbs);
  const std::vector<double> beta0 = config.beta.empty() ? std::vector<double>(nbs, 0.0) : config.beta;
  AdmmConfig cfg = config;
  SelectionResult result;
  for (int round = 0; round < config.reweight_rounds; ++round) {
    SolveReport rep = AdmmSolver(net, cfg).solve();
    result.active_counts.push_back(static_cast<int>(rep.active_set.size()));
    const bool failed = rep.status == SolveStatus::Infeasible;
    cfg.beta = reweight(rep.beamformers, beta0, config.reweight_eps);
    result.rounds.push_back(std::move(rep));
    if (failed) break;
  }
  const SolveReport& last = result.rounds.back();
  if (last.status == SolveStatus::Infeasible) {
    result.debiased = last;
    return result;
  }
  result.debiased = debias(net, config, last.active_set, last.beamformers);
  return result;
}

}  // namespace hetnet
