#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hetnet/net_model.hpp"

namespace hetnet {

/// Undirected simple graph on vertices 0..n-1 (text I/O is 1-based).
struct Graph {
  int vertices = 0;
  std::vector<std::pair<int, int>> edges;

  void validate() const;
  bool adjacent(int a, int b) const;
};

/// Edge-list text: first non-comment token is the vertex count, then one
/// "u v" pair per edge, 1-based. '#' starts a comment.
Graph parse_edge_list(std::istream& in);
Graph parse_edge_list(const std::string& text);
std::string to_edge_list(const Graph& g);

/// Single-cell, single-antenna instance in the power domain: user i gets
/// power p(i, q) from BS q through gain g(i, q).
struct PowerControlInstance {
  MatrixXd gain;
  VectorXd target;
  VectorXd noise;
  VectorXd budget;

  int users() const { return static_cast<int>(gain.rows()); }
  int num_bs() const { return static_cast<int>(gain.cols()); }
  void validate() const;
};

/// Gains 1 on the diagonal and on edges, targets 1/Q^2, noise Q, budgets Q.
PowerControlInstance vertex_cover_instance(const Graph& g);

/// SINR of every user under power allocation p (users x BSs).
VectorXd power_domain_sinr(const PowerControlInstance& inst, const MatrixXd& p);

inline constexpr int kDefaultOracleCap = 12;

/// Whether some p >= 0 supported on `active` columns meets every target and
/// budget. Tries p = 1 on the active columns, then an exact LP feasibility test.
bool feasible_with_set(const PowerControlInstance& inst, const std::vector<int>& active,
                       int cap = kDefaultOracleCap);

struct ActiveSetResult {
  int size = 0;
  std::vector<int> witness;
  bool feasible = false;
};

/// Smallest feasible BS subset by enumeration in increasing cardinality.
ActiveSetResult min_active_set(const PowerControlInstance& inst, int cap = kDefaultOracleCap);

int min_vertex_cover(const Graph& g, int cap = kDefaultOracleCap);
/// Smallest closed-neighbourhood cover (every vertex in the set or next to it).
int min_dominating_set(const Graph& g, int cap = kDefaultOracleCap);

/// Feasibility of {x >= 0 : A x <= b} by phase-one simplex with Bland's rule.
/// Returns a feasible point when one exists.
std::optional<VectorXd> lp_feasible_point(const MatrixXd& A, const VectorXd& b, double tol = 1e-9);

enum class OracleStatus { Optimal, Infeasible, BudgetBinding };
std::string to_string(OracleStatus s);

struct MisoOracleResult {
  OracleStatus status = OracleStatus::Infeasible;
  double total_power = 0.0;
  BeamformerSet beamformers;
  /// Uplink dual powers; their sum equals the minimum total power.
  VectorXd dual;
  int iterations = 0;
};

/// Minimum total power for a single-cell network with single-antenna users,
/// restricted to `active_set` (empty = all BSs), via the uplink-downlink
/// duality fixed point. The result is exact when no per-BS budget binds;
/// otherwise the status is BudgetBinding and total_power is a lower bound.
MisoOracleResult miso_power_oracle(const NetworkInstance& net, const std::vector<int>& active_set = {},
                                   double tol = 1e-12, int max_iters = 100000);

}  // namespace hetnet
