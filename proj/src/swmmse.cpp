#include "hetnet/swmmse.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "parallel.hpp"

namespace hetnet {

void SwmmseConfig::validate(const IndexLayout& layout) const {
  if (!mu.empty()) {
    if (static_cast<int>(mu.size()) != layout.num_bs()) throw ConfigInvalid("mu needs one entry per BS");
    for (double m : mu)
      if (!(m >= 0.0)) throw ConfigInvalid("mu entries must be non-negative");
  }
  if (!lambda.empty()) {
    if (static_cast<int>(lambda.size()) != layout.num_cells()) throw ConfigInvalid("lambda needs one entry per cell");
    for (double l : lambda)
      if (!(l >= 0.0)) throw ConfigInvalid("lambda entries must be non-negative");
  }
  if (!(v_reg > 0.0)) throw ConfigInvalid("v_reg must be positive");
  if (!(bisect_tol > 0.0)) throw ConfigInvalid("bisect_tol must be positive");
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw ConfigInvalid("tolerances must be positive");
  if (max_outer_iters < 1 || inner_max_iters < 1) throw ConfigInvalid("iteration caps must be >= 1");
  if (!(reweight_eps > 0.0)) throw ConfigInvalid("reweight_eps must be positive");
  if (reweight_rounds < 1) throw ConfigInvalid("reweight_rounds must be >= 1");
  if (!(min_active_fraction >= 0.0 && min_active_fraction <= 1.0))
    throw ConfigInvalid("min_active_fraction must lie in [0, 1]");
}

BeamformerSet SwmmseState::effective() const {
  BeamformerSet v = vbar;
  const auto& lay = v.layout();
  for (int u = 0; u < lay.num_users(); ++u) {
    const int k = lay.cell_of_user(u);
    for (int q = 0; q < lay.bs_per_cell[k]; ++q) v.block(u, q) *= alpha(lay.bs_offset(k) + q);
  }
  return v;
}

SwmmseState swmmse_init(const NetworkInstance& net) {
  net.validate();
  const auto& lay = net.layout();
  SwmmseState s;
  s.alpha = VectorXd::Ones(lay.num_bs());
  s.vbar = BeamformerSet::zeros(lay);
  s.u.assign(lay.num_users(), VectorXcd::Zero(lay.rx_antennas));
  s.w = VectorXd::Ones(lay.num_users());
  for (int k = 0; k < lay.num_cells(); ++k) {
    const int users = lay.users_per_cell[k];
    for (int q = 0; q < lay.bs_per_cell[k]; ++q) {
      const int bs = lay.bs_offset(k) + q;
      const double amp = std::sqrt(net.power_budget[bs] / users);
      for (int i = lay.user_offset(k); i < lay.user_offset(k) + users; ++i) {
        const MatrixXcd h = net.bs_channel(i, bs);
        VectorXcd dir = VectorXcd::Zero(lay.tx_antennas);
        if (h.norm() > 0.0) {
          Eigen::JacobiSVD<MatrixXcd> svd(h, Eigen::ComputeThinV);
          dir = svd.matrixV().col(0);
        } else {
          dir(0) = 1.0;
        }
        s.vbar.block(i, q) = amp * dir;
      }
    }
  }
  return s;
}

void update_u(SwmmseState& s, const NetworkInstance& net, int threads) {
  const BeamformerSet v = s.effective();
  detail::parallel_for(net.layout().num_users(), threads, [&](int i) {
    s.u[i] = received_covariance(net, v, i).ldlt().solve(desired_signal(net, v, i));
  });
}

void update_weights(SwmmseState& s, const NetworkInstance& net, int threads) {
  const BeamformerSet v = s.effective();
  detail::parallel_for(net.layout().num_users(), threads, [&](int i) {
    const VectorXcd sig = desired_signal(net, v, i);
    const double captured = std::real(sig.dot(received_covariance(net, v, i).ldlt().solve(sig)));
    s.w(i) = 1.0 / std::max(1.0 - captured, 1e-300);
  });
}

namespace {

// g_j = (H_j^k)^H u_j for every user j, stacked as columns (MQ_k x U).
MatrixXcd filtered_channels(const SwmmseState& s, const NetworkInstance& net, int cell) {
  const auto& lay = net.layout();
  const int dim = lay.tx_antennas * lay.bs_per_cell[cell];
  MatrixXcd g(dim, lay.num_users());
  for (int j = 0; j < lay.num_users(); ++j) g.col(j) = net.channel(j, cell).adjoint() * s.u[j];
  return g;
}

// In-cell vbar as an MQ_k x I_k matrix.
MatrixXcd cell_vbar(const SwmmseState& s, const IndexLayout& lay, int cell) {
  const int first = lay.user_offset(cell);
  MatrixXcd V(lay.tx_antennas * lay.bs_per_cell[cell], lay.users_per_cell[cell]);
  for (int i = 0; i < lay.users_per_cell[cell]; ++i) V.col(i) = s.vbar.user(first + i);
  return V;
}

double block_value(const MatrixXcd& B, const MatrixXcd& R, double lambda, const MatrixXcd& X) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    f += std::real(X.col(i).dot(B * X.col(i))) - 2.0 * std::real(R.col(i).dot(X.col(i)));
    f += lambda * X.col(i).norm();
  }
  return f;
}

}  // namespace

AlphaProblem alpha_problem(const SwmmseState& s, const NetworkInstance& net, int cell) {
  const auto& lay = net.layout();
  const int Q = lay.bs_per_cell[cell];
  const int M = lay.tx_antennas;
  const int first = lay.user_offset(cell);
  const MatrixXcd g = filtered_channels(s, net, cell);

  AlphaProblem p;
  p.A = MatrixXd::Zero(Q, Q);
  p.b = VectorXd::Zero(Q);
  VectorXcd y(Q);
  for (int i = 0; i < lay.users_per_cell[cell]; ++i) {
    for (int j = 0; j < lay.num_users(); ++j) {
      for (int q = 0; q < Q; ++q) y(q) = g.col(j).segment(q * M, M).dot(s.vbar.block(first + i, q));
      p.A.noalias() += s.w(j) * (y.conjugate() * y.transpose()).real();
      if (j == first + i) p.b += s.w(j) * y.real();
    }
  }
  return p;
}

double alpha_coordinate(double a_qq, double c, double mu) {
  if (2.0 * std::abs(c) <= mu) return 0.0;
  const double sgn = c > 0.0 ? 1.0 : -1.0;
  if (a_qq > 0.0) {
    const double x = (2.0 * c - mu * sgn) / (2.0 * a_qq);
    if (std::abs(x) < 1.0) return x;
  }
  return sgn;
}

VectorXd solve_alpha(const AlphaProblem& p, const std::vector<double>& mu, VectorXd alpha, double tol,
                     int max_iters, bool* degenerate) {
  const Eigen::Index Q = p.b.size();
  if (p.A.rows() != Q || p.A.cols() != Q || alpha.size() != Q || static_cast<Eigen::Index>(mu.size()) != Q)
    throw DimensionMismatch("alpha subproblem sizes disagree");
  for (int it = 0; it < max_iters; ++it) {
    double change = 0.0;
    for (Eigen::Index q = 0; q < Q; ++q) {
      const double c = p.b(q) - (p.A.col(q).dot(alpha) - p.A(q, q) * alpha(q));
      if (degenerate && p.A(q, q) <= 0.0 && 2.0 * std::abs(c) > mu[q]) *degenerate = true;
      const double next = alpha_coordinate(p.A(q, q), c, mu[q]);
      change = std::max(change, std::abs(next - alpha(q)));
      alpha(q) = next;
    }
    if (change <= tol * std::max(1.0, alpha.cwiseAbs().maxCoeff())) break;
  }
  return alpha;
}

void update_alpha(SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg, int cell, bool* degenerate) {
  const auto& lay = net.layout();
  const int Q = lay.bs_per_cell[cell];
  const int off = lay.bs_offset(cell);
  std::vector<double> mu(Q);
  for (int q = 0; q < Q; ++q) mu[q] = cfg.mu_at(off + q);
  const AlphaProblem p = alpha_problem(s, net, cell);
  s.alpha.segment(off, Q) = solve_alpha(p, mu, s.alpha.segment(off, Q), cfg.inner_tol, cfg.inner_max_iters, degenerate);
}

VbarProblem vbar_problem(const SwmmseState& s, const NetworkInstance& net, int cell) {
  const auto& lay = net.layout();
  const int Q = lay.bs_per_cell[cell];
  const int M = lay.tx_antennas;
  const int first = lay.user_offset(cell);
  const MatrixXcd g = filtered_channels(s, net, cell);

  VectorXd scale(M * Q);
  for (int q = 0; q < Q; ++q) scale.segment(q * M, M).setConstant(s.alpha(lay.bs_offset(cell) + q));

  VbarProblem p;
  p.C = g * s.w.asDiagonal() * g.adjoint();
  p.C = scale.asDiagonal() * p.C * scale.asDiagonal();
  p.D.resize(M * Q, lay.users_per_cell[cell]);
  for (int i = 0; i < lay.users_per_cell[cell]; ++i)
    p.D.col(i) = s.w(first + i) * scale.cwiseProduct(g.col(first + i));
  return p;
}

namespace {

using HermitianEig = Eigen::SelfAdjointEigenSolver<MatrixXcd>;

MatrixXcd solve_block_eig(const HermitianEig& eig, const MatrixXcd& R, double lambda, double budget, double tol,
                          double* delta_out) {
  const VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
  const MatrixXcd Rt = eig.eigenvectors().adjoint() * R;
  const VectorXd rnorm = Rt.colwise().norm().transpose();
  const VectorXd r2 = Rt.cwiseAbs2().colwise().sum().transpose();
  const double ev_min = ev.minCoeff();

  // Norm of column i at multiplier delta (rotated coordinates are norm preserving).
  auto column_scale = [&](Eigen::Index i, double delta) -> VectorXd {
    const VectorXd d = (ev.array() + delta).matrix();
    if (lambda == 0.0) {
      VectorXd out = d.cwiseInverse();
      for (Eigen::Index m = 0; m < d.size(); ++m)
        if (!(d(m) > 0.0)) out(m) = 0.0;  // pseudoinverse on null modes
      return out;
    }
    if (2.0 * rnorm(i) <= lambda) return VectorXd::Zero(d.size());
    // ||x|| = t solves sum |r_m|^2 / (d_m t + lambda/2)^2 = 1; the left side
    // is convex and decreasing in t, so Newton from t = 0 increases
    // monotonically to the root.
    const VectorXd w2 = Rt.col(i).cwiseAbs2();
    const double half = 0.5 * lambda;
    double t = 0.0;
    for (int it = 0; it < 200; ++it) {
      const VectorXd den = (d * t).array() + half;
      const double h = (w2.array() / den.array().square()).sum() - 1.0;
      const double dh = (-2.0 * w2.array() * d.array() / den.array().cube()).sum();
      if (h <= 0.0 || dh >= 0.0) break;
      const double step = -h / dh;
      t += step;
      if (step <= 1e-15 * t) break;
    }
    return (t / ((d * t).array() + half)).matrix();
  };

  auto power_at = [&](double delta) {
    double p = 0.0;
    for (Eigen::Index i = 0; i < R.cols(); ++i) p += (column_scale(i, delta).cwiseAbs2().cwiseProduct(Rt.col(i).cwiseAbs2())).sum();
    return p;
  };
  auto build = [&](double delta) {
    MatrixXcd Xt(R.rows(), R.cols());
    for (Eigen::Index i = 0; i < R.cols(); ++i) Xt.col(i) = column_scale(i, delta).cast<cdouble>().cwiseProduct(Rt.col(i));
    return MatrixXcd(eig.eigenvectors() * Xt);
  };

  double delta = 0.0;
  if (power_at(0.0) > budget) {
    if (lambda == 0.0 && ev_min > 0.0) {
      // phi(delta) = 1/||x(delta)|| - 1/sqrt(P) is concave and increasing, so
      // Newton from delta = 0 climbs monotonically to the root.
      const double target = 1.0 / std::sqrt(budget);
      for (int it = 0; it < 100; ++it) {
        const VectorXd d = (ev.array() + delta).matrix();
        double p2 = 0.0;
        double p3 = 0.0;
        for (Eigen::Index i = 0; i < R.cols(); ++i) {
          const VectorXd w2 = Rt.col(i).cwiseAbs2();
          p2 += (w2.array() / d.array().square()).sum();
          p3 += (w2.array() / d.array().cube()).sum();
        }
        const double norm = std::sqrt(p2);
        const double phi = 1.0 / norm - target;
        if (phi >= 0.0) break;
        const double step = -phi * norm * norm * norm / p3;
        delta += step;
        if (step <= tol * std::max(1.0, delta)) break;
      }
    } else {
      // ||x_i|| <= ||r_i|| / (ev_min + delta) bounds the power from above.
      double hi = std::max(std::sqrt(r2.sum() / std::max(budget, 1e-300)) - ev_min, 1e-300);
      while (power_at(hi) > budget) hi *= 2.0;
      double lo = 0.0;
      while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (power_at(mid) > budget ? lo : hi) = mid;
      }
      delta = hi;
    }
  }
  if (delta_out) *delta_out = delta;
  MatrixXcd X = build(delta);
  const double p = X.squaredNorm();
  if (p > budget) X *= std::sqrt(budget / p);
  return X;
}

}  // namespace

MatrixXcd solve_vbar_block(const MatrixXcd& B, const MatrixXcd& R, double lambda, double budget, double tol,
                           double* delta_out) {
  if (B.rows() != B.cols() || R.rows() != B.rows()) throw DimensionMismatch("vbar block sizes disagree");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (!(budget >= 0.0)) throw InvalidArgument("power budget must be non-negative");
  return solve_block_eig(HermitianEig(B), R, lambda, budget, tol, delta_out);
}

void update_vbar_clustered(SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg, int cell) {
  const auto& lay = net.layout();
  const int Q = lay.bs_per_cell[cell];
  const int M = lay.tx_antennas;
  const int first = lay.user_offset(cell);
  const double lambda = cfg.lambda_at(cell);
  const VbarProblem p = vbar_problem(s, net, cell);
  MatrixXcd V = cell_vbar(s, lay, cell);
  const MatrixXcd eye = cfg.v_reg * MatrixXcd::Identity(M, M);
  std::vector<MatrixXcd> B(Q);
  std::vector<HermitianEig> eig(Q);
  for (int q = 0; q < Q; ++q) {
    B[q] = p.C.block(q * M, q * M, M, M) + eye;
    eig[q].compute(B[q]);
  }

  for (int it = 0; it < cfg.inner_max_iters; ++it) {
    double change = 0.0;
    for (int q = 0; q < Q; ++q) {
      const MatrixXcd R = p.D.middleRows(q * M, M) - p.C.middleRows(q * M, M) * V +
                          p.C.block(q * M, q * M, M, M) * V.middleRows(q * M, M);
      const MatrixXcd old = V.middleRows(q * M, M);
      MatrixXcd next = solve_block_eig(eig[q], R, lambda, net.power_budget[lay.bs_offset(cell) + q], cfg.bisect_tol,
                                       nullptr);
      // The multiplier search stops on the feasible side; never accept a
      // candidate that is worse than the current block.
      if (block_value(B[q], R, lambda, next) > block_value(B[q], R, lambda, old)) next = old;
      change = std::max(change, (next - old).cwiseAbs().maxCoeff());
      V.middleRows(q * M, M) = next;
    }
    if (change <= cfg.inner_tol * std::max(1.0, V.cwiseAbs().maxCoeff())) break;
  }
  for (int i = 0; i < lay.users_per_cell[cell]; ++i) s.vbar.user(first + i) = V.col(i);
}

void update_vbar(SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg, int cell) {
  SwmmseConfig plain = cfg;
  plain.lambda.clear();
  update_vbar_clustered(s, net, plain, cell);
}

double swmmse_objective(const SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg) {
  const auto& lay = net.layout();
  const BeamformerSet v = s.effective();
  double f = 0.0;
  for (int i = 0; i < lay.num_users(); ++i) {
    const MatrixXcd J = received_covariance(net, v, i);
    const VectorXcd sig = desired_signal(net, v, i);
    const double e = 1.0 - 2.0 * std::real(s.u[i].dot(sig)) + std::real(s.u[i].dot(J * s.u[i]));
    f += s.w(i) * e - std::log(s.w(i));
  }
  for (int b = 0; b < lay.num_bs(); ++b) f += cfg.mu_at(b) * std::abs(s.alpha(b)) + cfg.v_reg * s.vbar.bs_power(b);
  for (int i = 0; i < lay.num_users(); ++i) {
    const int k = lay.cell_of_user(i);
    const double lambda = cfg.lambda_at(k);
    if (lambda == 0.0) continue;
    for (int q = 0; q < lay.bs_per_cell[k]; ++q) f += lambda * s.vbar.block(i, q).norm();
  }
  return f;
}

std::vector<int> cluster_sizes(const BeamformerSet& v, double tol) {
  const auto& lay = v.layout();
  std::vector<int> out(lay.num_users(), 0);
  for (int i = 0; i < lay.num_users(); ++i) {
    const int k = lay.cell_of_user(i);
    for (int q = 0; q < lay.bs_per_cell[k]; ++q)
      if (v.block(i, q).norm() > tol) ++out[i];
  }
  return out;
}

namespace {

SwmmseResult run_bcd(const NetworkInstance& net, const SwmmseConfig& cfg, SwmmseState s, bool alpha_step) {
  const auto& lay = net.layout();
  const int cells = lay.num_cells();
  SwmmseResult res;
  auto& report = res.report;
  std::vector<char> degenerate(cells, 0);

  auto mark = [&] {
    if (cfg.record_blocks) res.block_trace.push_back(swmmse_objective(s, net, cfg));
  };
  double previous = swmmse_objective(s, net, cfg);
  if (cfg.record_blocks) res.block_trace.push_back(previous);

  bool converged = false;
  int it = 0;
  while (it < cfg.max_outer_iters) {
    ++it;
    update_u(s, net, cfg.threads);
    mark();
    update_weights(s, net, cfg.threads);
    mark();
    detail::parallel_for(cells, cfg.threads, [&](int k) { update_vbar_clustered(s, net, cfg, k); });
    mark();
    if (alpha_step) {
      detail::parallel_for(cells, cfg.threads, [&](int k) {
        bool flag = false;
        update_alpha(s, net, cfg, k, &flag);
        if (flag) degenerate[k] = 1;
      });
      mark();
    }
    const double current = swmmse_objective(s, net, cfg);
    report.objective_trace.push_back(current);
    const bool small = std::abs(previous - current) <= cfg.outer_tol * std::max(1.0, std::abs(current));
    previous = current;
    if (it >= 2 && small) {
      converged = true;
      break;
    }
  }

  report.status = converged ? SolveStatus::Converged : SolveStatus::MaxIterations;
  report.iterations = it;
  report.beamformers = s.effective();
  report.total_power = total_power(report.beamformers);
  const double tol = default_activity_tol(net);
  report.active_set = active_bs_set(report.beamformers, tol);
  report.alpha.assign(s.alpha.data(), s.alpha.data() + s.alpha.size());
  for (int i = 0; i < lay.num_users(); ++i) report.user_rates.push_back(rate(net, report.beamformers, i));
  double total = 0.0;
  for (double r : report.user_rates) total += r;
  report.sum_rate = total;
  report.cluster_sizes = cluster_sizes(report.beamformers, tol);
  if (std::any_of(degenerate.begin(), degenerate.end(), [](char c) { return c != 0; }))
    report.flags.push_back("degenerate_alpha");
  if (s.alpha.isZero(0.0)) report.flags.push_back("all_alpha_zero");
  res.state = std::move(s);
  return res;
}

}  // namespace

SwmmseResult swmmse_solve(const NetworkInstance& net, const SwmmseConfig& cfg, const std::optional<SwmmseState>& init) {
  net.validate();
  cfg.validate(net.layout());
  SwmmseState s = init ? *init : swmmse_init(net);
  check_dimensions(net, s.vbar);
  if (s.alpha.size() != net.layout().num_bs()) throw DimensionMismatch("alpha needs one entry per BS");
  for (int b = 0; b < net.layout().num_bs(); ++b)
    if (std::abs(s.alpha(b)) > 1.0 || s.vbar.bs_power(b) > net.power_budget[b] * (1.0 + 1e-12))
      throw InvalidArgument("initial point is infeasible");
  return run_bcd(net, cfg, std::move(s), true);
}

SwmmseResult debias_swmmse(const NetworkInstance& net, const SwmmseConfig& cfg, const SwmmseState& penalized) {
  net.validate();
  cfg.validate(net.layout());
  const auto& lay = net.layout();
  SwmmseConfig plain = cfg;
  plain.mu.clear();
  SwmmseState s = penalized;
  for (int b = 0; b < lay.num_bs(); ++b) {
    const double a = penalized.alpha(b);
    s.alpha(b) = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
  }
  for (int i = 0; i < lay.num_users(); ++i) {
    const int k = lay.cell_of_user(i);
    for (int q = 0; q < lay.bs_per_cell[k]; ++q) s.vbar.block(i, q) *= std::abs(penalized.alpha(lay.bs_offset(k) + q));
  }
  return run_bcd(net, plain, std::move(s), false);
}

SwmmseResult wmmse_on_support(const NetworkInstance& net, const SwmmseConfig& cfg, const std::vector<int>& active_set) {
  net.validate();
  cfg.validate(net.layout());
  SwmmseConfig plain = cfg;
  plain.mu.clear();
  SwmmseState s = swmmse_init(net);
  s.alpha.setZero();
  for (int b : active_set) {
    if (b < 0 || b >= net.layout().num_bs()) throw DimensionMismatch("active BS index out of range");
    s.alpha(b) = 1.0;
  }
  for (int b = 0; b < net.layout().num_bs(); ++b)
    if (s.alpha(b) == 0.0) s.vbar.clear_bs(b);
  return run_bcd(net, plain, std::move(s), false);
}

std::vector<double> reweight_mu(const VectorXd& alpha, const std::vector<double>& mu0, double eps) {
  if (!(eps > 0.0)) throw ConfigInvalid("reweighting epsilon must be positive");
  if (static_cast<Eigen::Index>(mu0.size()) != alpha.size()) throw DimensionMismatch("mu0 needs one entry per BS");
  std::vector<double> mu(mu0.size());
  for (std::size_t b = 0; b < mu0.size(); ++b) mu[b] = mu0[b] / (std::abs(alpha(static_cast<Eigen::Index>(b))) + eps);
  return mu;
}

SwmmseSelection swmmse_select(const NetworkInstance& net, const SwmmseConfig& cfg) {
  const int nbs = net.layout().num_bs();
  cfg.validate(net.layout());
  const std::vector<double> mu0 = cfg.mu.empty() ? std::vector<double>(nbs, 0.0) : cfg.mu;
  SwmmseConfig cur = cfg;
  SwmmseSelection out;
  for (int round = 0; round < cfg.reweight_rounds; ++round) {
    SwmmseResult res = swmmse_solve(net, cur);
    const int count = static_cast<int>(res.report.active_set.size());
    const bool stalled = !out.active_counts.empty() && count >= out.active_counts.back();
    out.active_counts.push_back(count);
    cur.mu = reweight_mu(res.state.alpha, mu0, cfg.reweight_eps);
    out.rounds.push_back(std::move(res));
    if (stalled || count < cfg.min_active_fraction * nbs) break;
  }
  out.debiased = debias_swmmse(net, cfg, out.rounds.back().state);
  return out;
}

}  // namespace hetnet
