#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hetnet/net_model.hpp"
#include "hetnet/report.hpp"

namespace hetnet {

struct SwmmseConfig {
  /// Activation penalty per BS (nats); empty means zero.
  std::vector<double> mu;
  /// Clustering penalty per cell; empty means zero.
  std::vector<double> lambda;
  double v_reg = 1e-8;
  double bisect_tol = 1e-13;
  int max_outer_iters = 300;
  double outer_tol = 1e-6;
  double inner_tol = 1e-8;
  int inner_max_iters = 200;
  double reweight_eps = 1e-2;
  int reweight_rounds = 6;
  double min_active_fraction = 0.5;
  int threads = 1;
  /// Record the objective after every block update (u, w, vbar, alpha).
  bool record_blocks = false;

  void validate(const IndexLayout& layout) const;
  double mu_at(int bs) const { return mu.empty() ? 0.0 : mu[bs]; }
  double lambda_at(int cell) const { return lambda.empty() ? 0.0 : lambda[cell]; }
};

struct SwmmseState {
  VectorXd alpha;
  BeamformerSet vbar;
  std::vector<VectorXcd> u;
  VectorXd w;

  /// v = alpha o vbar, block by block.
  BeamformerSet effective() const;
};

/// alpha = 1 and, at every BS, equal power split over the cell's users along
/// each user's strongest right singular vector of the BS-to-user channel.
SwmmseState swmmse_init(const NetworkInstance& net);

/// u = J^{-1} H v for every user.
void update_u(SwmmseState& s, const NetworkInstance& net, int threads = 1);
/// w = 1 / (1 - v^H H^H J^{-1} H v) for every user.
void update_weights(SwmmseState& s, const NetworkInstance& net, int threads = 1);

/// Per-cell quadratically constrained LASSO in alpha:
/// min a^T A a - 2 b^T a + sum mu_q |a_q|, |a_q| <= 1.
struct AlphaProblem {
  MatrixXd A;
  VectorXd b;
};
AlphaProblem alpha_problem(const SwmmseState& s, const NetworkInstance& net, int cell);

/// Exact minimizer of a_qq x^2 - 2 c x + mu |x| over |x| <= 1.
double alpha_coordinate(double a_qq, double c, double mu);

/// Cyclic coordinate descent on an AlphaProblem starting from `alpha`.
/// Sets `degenerate` when a zero diagonal forced the clip branch.
VectorXd solve_alpha(const AlphaProblem& p, const std::vector<double>& mu, VectorXd alpha, double tol,
                     int max_iters, bool* degenerate = nullptr);

void update_alpha(SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg, int cell,
                  bool* degenerate = nullptr);

/// Per-cell quadratic data of the vbar subproblem: C_k and one D column per in-cell user.
struct VbarProblem {
  MatrixXcd C;
  MatrixXcd D;
};
VbarProblem vbar_problem(const SwmmseState& s, const NetworkInstance& net, int cell);

/// Exact minimizer over one BS's blocks x_i (columns of the result) of
///   sum_i x_i^H B x_i - 2 Re(r_i^H x_i) + lambda ||x_i||,  sum_i ||x_i||^2 <= budget
/// for Hermitian positive definite B. `delta_out` receives the power multiplier.
MatrixXcd solve_vbar_block(const MatrixXcd& B, const MatrixXcd& R, double lambda, double budget,
                           double tol, double* delta_out = nullptr);

/// Block-coordinate pass over the cell's BSs using the cell's lambda from cfg.
void update_vbar_clustered(SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg, int cell);
/// Same with the clustering penalty switched off.
void update_vbar(SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg, int cell);

/// sum_i (w_i e_i - log w_i) + sum mu|alpha| + eps sum ||vbar||^2 + sum lambda ||vbar_i^q||.
double swmmse_objective(const SwmmseState& s, const NetworkInstance& net, const SwmmseConfig& cfg);

struct SwmmseResult {
  SolveReport report;
  SwmmseState state;
  /// Objective after each block update when record_blocks is set.
  std::vector<double> block_trace;
};

SwmmseResult swmmse_solve(const NetworkInstance& net, const SwmmseConfig& cfg,
                          const std::optional<SwmmseState>& init = std::nullopt);

/// mu = 0, alpha pinned to sign(alpha*), alpha step skipped; starts from the
/// penalized effective beamformer.
SwmmseResult debias_swmmse(const NetworkInstance& net, const SwmmseConfig& cfg, const SwmmseState& penalized);

/// Plain WMMSE (mu = 0, no alpha step) with only `active_set` switched on,
/// started from the matched-filter point.
SwmmseResult wmmse_on_support(const NetworkInstance& net, const SwmmseConfig& cfg, const std::vector<int>& active_set);

/// mu_q = mu0_q / (|alpha_q| + eps).
std::vector<double> reweight_mu(const VectorXd& alpha, const std::vector<double>& mu0, double eps);

struct SwmmseSelection {
  std::vector<int> active_counts;
  std::vector<SwmmseResult> rounds;
  SwmmseResult debiased;
};

/// Reweighted S-WMMSE followed by debiasing on the last support.
SwmmseSelection swmmse_select(const NetworkInstance& net, const SwmmseConfig& cfg);

/// Per user, number of BSs whose block norm exceeds `tol`.
std::vector<int> cluster_sizes(const BeamformerSet& v, double tol);

}  // namespace hetnet
