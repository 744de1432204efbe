#pragma once

#include <array>
#include <optional>
#include <vector>

#include "hetnet/net_model.hpp"
#include "hetnet/report.hpp"

namespace hetnet {

struct AdmmConfig {
  double rho = 5.0;
  /// Per-BS group-sparsity weights; empty means all zero.
  std::vector<double> beta;
  double theta = 1.0;
  double eps_tol = 1e-4;
  int max_iters = 2000;
  double reweight_eps = 1e-3;
  int reweight_rounds = 6;
  int infeasible_iter_cap = 2000;
  int min_iters = 2;
  int threads = 1;
  bool record_history = true;
  /// Solve the equivalent problem with channels scaled by 1/sigma and unit noise.
  bool normalize_noise = true;

  void validate(int num_bs) const;
  double beta_at(int bs) const { return beta.empty() ? 0.0 : beta[bs]; }
};

/// beta = 0, theta = 1: plain minimum-power beamforming.
AdmmConfig power_min_config();
/// Uniform beta0 with theta = 1 / sum(P): the l1-relaxed single-stage selection problem.
AdmmConfig selection_config(const NetworkInstance& net, double beta0 = 1.0);

/// All primal copies and duals of the split problem.
///
/// K(j, i) is the copy of (h_j^{cell(i)})^H v_i, the contribution of user i's
/// beamformer at user j; mu has the same indexing. K, kappa and their duals
/// live in the solver's working units (see AdmmSolver::network()).
struct AdmmState {
  BeamformerSet w;
  MatrixXcd K;
  VectorXd kappa;
  BeamformerSet v;
  VectorXd kappa_hat;
  MatrixXcd mu;
  BeamformerSet lambda;
  VectorXd delta;
  int iteration = 0;
};

/// Exact Euclidean projection onto {Re K_ii >= sqrt(tau) * ||(kappa, K_ij)||, Im K_ii = 0}.
struct ConeProjection {
  double direct = 0.0;
  VectorXcd cross;
  double kappa = 0.0;
  double gamma = 0.0;
};
ConeProjection project_sinr_cone(double tau, cdouble direct_target, const VectorXcd& cross_target,
                                 double kappa_target);

/// Minimizer of beta*||w|| + rho/2*||w - b||^2 subject to ||w||^2 <= budget.
VectorXcd shrink_to_power_ball(const VectorXcd& b, double beta, double rho, double budget);

class AdmmSolver {
 public:
  /// `enabled_bs` restricts the optimization to a BS subset (others pinned
  /// to zero); empty means every BS.
  AdmmSolver(const NetworkInstance& net, AdmmConfig config, std::vector<int> enabled_bs = {});

  const AdmmConfig& config() const { return cfg_; }
  /// Working instance: the input, or its noise-normalized equivalent.
  const NetworkInstance& network() const { return net_; }
  bool enabled(int bs) const { return enabled_[bs] != 0; }

  AdmmState cold_start() const;
  AdmmState warm_start(const BeamformerSet& v0) const;

  void update_K_kappa(AdmmState& s, int user) const;
  void update_w(AdmmState& s, int bs) const;
  void update_v(AdmmState& s, int cell) const;
  void update_duals(AdmmState& s) const;

  void update_block_a(AdmmState& s) const;
  void update_block_b(AdmmState& s) const;
  /// One full iteration: block A, block B, dual ascent.
  void step(AdmmState& s) const;

  /// (h_j^{cell(i)})^H v_i for every ordered pair.
  MatrixXcd cross_gains(const BeamformerSet& v) const;
  double objective(const BeamformerSet& w) const;
  double augmented_lagrangian(const AdmmState& s) const;
  std::array<double, 4> residuals(const AdmmState& s, double previous_objective) const;

  SolveReport solve(const std::optional<BeamformerSet>& warm = std::nullopt) const;

 private:
  NetworkInstance net_;
  AdmmConfig cfg_;
  std::vector<char> enabled_;
  std::vector<double> sigma_;
  // Per cell: stacked-coordinate indices of enabled BS antennas, the reduced
  // channel stack H^k (rows = enabled coordinates, one column per user) and
  // the Cholesky factor of (1 + 2 theta / rho) I + H^k H^kH.
  std::vector<std::vector<int>> rows_;
  std::vector<MatrixXcd> stack_;
  std::vector<Eigen::LLT<MatrixXcd>> factor_;
};

SolveReport admm_solve(const NetworkInstance& net, const AdmmConfig& config,
                       const std::optional<BeamformerSet>& warm_start = std::nullopt);

/// beta_b = beta0_b / (||w^b|| + eps).
std::vector<double> reweight(const BeamformerSet& w, const std::vector<double>& beta0, double eps);

/// Minimum-power re-solve restricted to `active_set` (beta = 0, theta = 1).
SolveReport debias(const NetworkInstance& net, const AdmmConfig& config, const std::vector<int>& active_set,
                   const std::optional<BeamformerSet>& warm_start = std::nullopt);

struct SelectionResult {
  std::vector<int> active_counts;  // after each reweighting round
  std::vector<SolveReport> rounds;
  SolveReport debiased;
};

/// Solve with `config.beta` as beta0, reweight `config.reweight_rounds - 1`
/// times, then debias on the final support.
SelectionResult admm_select(const NetworkInstance& net, const AdmmConfig& config);

}  // namespace hetnet
