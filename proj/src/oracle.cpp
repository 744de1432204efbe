#include "hetnet/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>

namespace hetnet {

void Graph::validate() const {
  if (vertices < 0) throw InvalidArgument("vertex count must be non-negative");
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= vertices || b >= vertices) throw InvalidArgument("edge endpoint out of range");
    if (a == b) throw InvalidArgument("self-loops are not allowed");
  }
}

bool Graph::adjacent(int a, int b) const {
  for (const auto& [x, y] : edges)
    if ((x == a && y == b) || (x == b && y == a)) return true;
  return false;
}

Graph parse_edge_list(std::istream& in) {
  std::vector<long> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      long value = 0;
      try {
        value = std::stol(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw InvalidArgument("edge list: not an integer: '" + tok + "'");
      tokens.push_back(value);
    }
  }
  if (tokens.empty()) throw InvalidArgument("edge list: missing vertex count");
  if (tokens.size() % 2 == 0) throw InvalidArgument("edge list: dangling endpoint");
  Graph g;
  g.vertices = static_cast<int>(tokens[0]);
  for (std::size_t t = 1; t < tokens.size(); t += 2) {
    const int a = static_cast<int>(tokens[t]) - 1;
    const int b = static_cast<int>(tokens[t + 1]) - 1;
    if (g.adjacent(a, b)) continue;
    g.edges.emplace_back(a, b);
  }
  g.validate();
  return g;
}

Graph parse_edge_list(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

std::string to_edge_list(const Graph& g) {
  std::ostringstream out;
  out << g.vertices << '\n';
  for (const auto& [a, b] : g.edges) out << a + 1 << ' ' << b + 1 << '\n';
  return out.str();
}

void PowerControlInstance::validate() const {
  const auto U = gain.rows();
  const auto Q = gain.cols();
  if (target.size() != U || noise.size() != U || budget.size() != Q)
    throw DimensionMismatch("power-control instance sizes disagree");
  if (!gain.allFinite() || !target.allFinite() || !noise.allFinite() || !budget.allFinite())
    throw InvalidArgument("power-control instance has non-finite entries");
  if ((gain.array() < 0.0).any() || (target.array() <= 0.0).any() || (noise.array() < 0.0).any() ||
      (budget.array() < 0.0).any())
    throw InvalidArgument("power-control instance has out-of-range entries");
}

PowerControlInstance vertex_cover_instance(const Graph& g) {
  g.validate();
  const int Q = g.vertices;
  PowerControlInstance inst;
  inst.gain = MatrixXd::Identity(Q, Q);
  for (const auto& [a, b] : g.edges) {
    inst.gain(a, b) = 1.0;
    inst.gain(b, a) = 1.0;
  }
  const double q = Q;
  inst.target = VectorXd::Constant(Q, Q > 0 ? 1.0 / (q * q) : 1.0);
  inst.noise = VectorXd::Constant(Q, q);
  inst.budget = VectorXd::Constant(Q, q);
  return inst;
}

VectorXd power_domain_sinr(const PowerControlInstance& inst, const MatrixXd& p) {
  if (p.rows() != inst.gain.rows() || p.cols() != inst.gain.cols()) throw DimensionMismatch("power matrix shape");
  // received(i, j) = sum_q g(i, q) p(j, q)
  const MatrixXd received = inst.gain * p.transpose();
  VectorXd out(inst.users());
  for (int i = 0; i < inst.users(); ++i) {
    const double interference = received.row(i).sum() - received(i, i);
    out(i) = received(i, i) / (inst.noise(i) + interference);
  }
  return out;
}

std::optional<VectorXd> lp_feasible_point(const MatrixXd& A, const VectorXd& b, double tol) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (b.size() != m) throw DimensionMismatch("LP right-hand side size");
  std::vector<int> art_row;
  for (int i = 0; i < m; ++i)
    if (b(i) < 0.0) art_row.push_back(i);
  const int na = static_cast<int>(art_row.size());
  const int cols = n + m + na;

  MatrixXd T = MatrixXd::Zero(m, cols + 1);
  std::vector<int> basis(m);
  for (int i = 0, a = 0; i < m; ++i) {
    if (b(i) >= 0.0) {
      T.row(i).head(n) = A.row(i);
      T(i, n + i) = 1.0;
      T(i, cols) = b(i);
      basis[i] = n + i;
    } else {
      T.row(i).head(n) = -A.row(i);
      T(i, n + i) = -1.0;
      T(i, n + m + a) = 1.0;
      T(i, cols) = -b(i);
      basis[i] = n + m + a;
      ++a;
    }
  }
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());

  auto cost = [&](int j) { return j >= n + m ? 1.0 : 0.0; };
  const int max_pivots = 50 * (m + cols) + 1000;
  for (int pivots = 0; pivots < max_pivots; ++pivots) {
    int enter = -1;
    for (int j = 0; j < cols; ++j) {
      double d = cost(j);
      for (int i = 0; i < m; ++i) d -= cost(basis[i]) * T(i, j);
      if (d < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      if (T(i, enter) <= tol) continue;
      const double ratio = T(i, cols) / T(i, enter);
      if (ratio < best - tol || (std::abs(ratio - best) <= tol && leave >= 0 && basis[i] < basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave < 0) break;  // unbounded direction cannot lower the phase-one objective below 0
    T.row(leave) /= T(leave, enter);
    for (int i = 0; i < m; ++i)
      if (i != leave && T(i, enter) != 0.0) T.row(i) -= T(i, enter) * T.row(leave);
    basis[leave] = enter;
  }

  double infeasibility = 0.0;
  for (int i = 0; i < m; ++i)
    if (basis[i] >= n + m) infeasibility += T(i, cols);
  if (infeasibility > tol * scale) return std::nullopt;
  VectorXd x = VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) x(basis[i]) = std::max(0.0, T(i, cols));
  return x;
}

namespace {

void check_cap(int size, int cap) {
  if (size > cap) throw InvalidArgument("instance exceeds the enumeration cap of " + std::to_string(cap));
}

bool meets_targets(const PowerControlInstance& inst, const MatrixXd& p, double slack) {
  for (int q = 0; q < inst.num_bs(); ++q)
    if (p.col(q).sum() > inst.budget(q) * (1.0 + slack) + slack) return false;
  const VectorXd s = power_domain_sinr(inst, p);
  for (int i = 0; i < inst.users(); ++i)
    if (s(i) < inst.target(i) * (1.0 - slack)) return false;
  return true;
}

}  // namespace

bool feasible_with_set(const PowerControlInstance& inst, const std::vector<int>& active, int cap) {
  inst.validate();
  check_cap(inst.num_bs(), cap);
  const int U = inst.users();
  const int Q = inst.num_bs();
  std::vector<int> cols;
  std::vector<char> on(Q, 0);
  for (int q : active) {
    if (q < 0 || q >= Q) throw InvalidArgument("active BS index out of range");
    if (!on[q]) cols.push_back(q);
    on[q] = 1;
  }
  std::sort(cols.begin(), cols.end());
  if (U == 0) return true;

  // Every user needs a positive gain from some active BS.
  for (int i = 0; i < U; ++i) {
    bool reached = false;
    for (int q : cols) reached = reached || inst.gain(i, q) > 0.0;
    if (!reached && inst.noise(i) > 0.0) return false;
  }

  MatrixXd unit = MatrixXd::Zero(U, Q);
  for (int q : cols) unit.col(q).setOnes();
  if (meets_targets(inst, unit, 1e-12)) return true;

  const int S = static_cast<int>(cols.size());
  const int n = U * S;
  MatrixXd A = MatrixXd::Zero(U + S, n);
  VectorXd b(U + S);
  for (int i = 0; i < U; ++i) {
    for (int j = 0; j < U; ++j)
      for (int s = 0; s < S; ++s) {
        const double g = inst.gain(i, cols[s]);
        A(i, j * S + s) = (j == i) ? -g : inst.target(i) * g;
      }
    b(i) = -inst.target(i) * inst.noise(i);
  }
  for (int s = 0; s < S; ++s) {
    for (int i = 0; i < U; ++i) A(U + s, i * S + s) = 1.0;
    b(U + s) = inst.budget(cols[s]);
  }
  const auto x = lp_feasible_point(A, b);
  if (!x) return false;
  MatrixXd p = MatrixXd::Zero(U, Q);
  for (int i = 0; i < U; ++i)
    for (int s = 0; s < S; ++s) p(i, cols[s]) = (*x)(i * S + s);
  return meets_targets(inst, p, 1e-7);
}

namespace {

// Subsets of {0..n-1} ordered by size, then lexicographically by mask.
std::vector<unsigned> subsets_by_size(int n) {
  std::vector<unsigned> masks(std::size_t{1} << n);
  for (unsigned m = 0; m < masks.size(); ++m) masks[m] = m;
  std::stable_sort(masks.begin(), masks.end(),
                   [](unsigned a, unsigned b) { return std::popcount(a) < std::popcount(b); });
  return masks;
}

std::vector<int> members(unsigned mask, int n) {
  std::vector<int> out;
  for (int q = 0; q < n; ++q)
    if (mask & (1u << q)) out.push_back(q);
  return out;
}

}  // namespace

ActiveSetResult min_active_set(const PowerControlInstance& inst, int cap) {
  inst.validate();
  check_cap(inst.num_bs(), cap);
  const int Q = inst.num_bs();
  ActiveSetResult r;
  for (unsigned mask : subsets_by_size(Q)) {
    const auto set = members(mask, Q);
    if (feasible_with_set(inst, set, cap)) {
      r.size = static_cast<int>(set.size());
      r.witness = set;
      r.feasible = true;
      return r;
    }
  }
  return r;
}

int min_vertex_cover(const Graph& g, int cap) {
  g.validate();
  check_cap(g.vertices, cap);
  for (unsigned mask : subsets_by_size(g.vertices)) {
    bool covers = true;
    for (const auto& [a, b] : g.edges) covers = covers && ((mask >> a) & 1u || (mask >> b) & 1u);
    if (covers) return std::popcount(mask);
  }
  return g.vertices;
}

int min_dominating_set(const Graph& g, int cap) {
  g.validate();
  check_cap(g.vertices, cap);
  std::vector<unsigned> closed(g.vertices);
  for (int v = 0; v < g.vertices; ++v) closed[v] = 1u << v;
  for (const auto& [a, b] : g.edges) {
    closed[a] |= 1u << b;
    closed[b] |= 1u << a;
  }
  for (unsigned mask : subsets_by_size(g.vertices)) {
    bool dominates = true;
    for (int v = 0; v < g.vertices && dominates; ++v) dominates = (closed[v] & mask) != 0;
    if (dominates) return std::popcount(mask);
  }
  return g.vertices;
}

std::string to_string(OracleStatus s) {
  switch (s) {
    case OracleStatus::Optimal:
      return "optimal";
    case OracleStatus::Infeasible:
      return "infeasible";
    case OracleStatus::BudgetBinding:
      return "budget_binding";
  }
  return "unknown";
}

MisoOracleResult miso_power_oracle(const NetworkInstance& net, const std::vector<int>& active_set, double tol,
                                   int max_iters) {
  net.validate();
  const auto& lay = net.layout();
  if (lay.num_cells() != 1) throw DimensionMismatch("the power oracle handles a single cell");
  if (lay.rx_antennas != 1) throw DimensionMismatch("the power oracle needs single-antenna users");
  const int M = lay.tx_antennas;
  const int U = lay.num_users();

  std::vector<int> rows;
  std::vector<char> on(lay.num_bs(), active_set.empty() ? 1 : 0);
  for (int b : active_set) {
    if (b < 0 || b >= lay.num_bs()) throw DimensionMismatch("active BS index out of range");
    on[b] = 1;
  }
  for (int q = 0; q < lay.num_bs(); ++q)
    if (on[q])
      for (int m = 0; m < M; ++m) rows.push_back(q * M + m);
  const int d = static_cast<int>(rows.size());

  MisoOracleResult res;
  res.beamformers = BeamformerSet::zeros(lay);
  res.dual = VectorXd::Zero(U);
  if (U == 0) {
    res.status = OracleStatus::Optimal;
    return res;
  }
  if (d == 0) return res;

  // a_i = h_i / sigma_i restricted to active coordinates; received = a_i^H v.
  MatrixXcd a(d, U);
  for (int i = 0; i < U; ++i) {
    const auto& h = net.channel(i, 0);
    const double s = std::sqrt(net.noise_power[i]);
    for (int r = 0; r < d; ++r) a(r, i) = std::conj(h(0, rows[r])) / s;
  }
  const VectorXd& tau = Eigen::Map<const VectorXd>(net.sinr_target.data(), U);

  auto covariance = [&](const VectorXd& lam) {
    MatrixXcd S = MatrixXcd::Identity(d, d);
    for (int j = 0; j < U; ++j) S.noalias() += lam(j) * a.col(j) * a.col(j).adjoint();
    return S;
  };

  VectorXd lam = VectorXd::Zero(U);
  bool converged = false;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::LLT<MatrixXcd> llt(covariance(lam));
    VectorXd next(U);
    for (int i = 0; i < U; ++i) {
      const double q = std::real(a.col(i).dot(llt.solve(a.col(i))));
      next(i) = q > 0.0 ? tau(i) / ((1.0 + tau(i)) * q) : std::numeric_limits<double>::infinity();
    }
    res.iterations = it + 1;
    if (!next.allFinite() || next.maxCoeff() > 1e15) return res;
    const double change = (next - lam).cwiseAbs().maxCoeff();
    lam = next;
    if (change <= tol * std::max(1.0, lam.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged) return res;
  res.dual = lam;

  const Eigen::LLT<MatrixXcd> llt(covariance(lam));
  MatrixXcd dirs = llt.solve(a);
  for (int i = 0; i < U; ++i) dirs.col(i).normalize();
  MatrixXd F(U, U);
  for (int i = 0; i < U; ++i)
    for (int j = 0; j < U; ++j) F(i, j) = std::norm(a.col(i).dot(dirs.col(j)));
  MatrixXd system = -F;
  for (int i = 0; i < U; ++i) system(i, i) = F(i, i) / tau(i);
  const VectorXd p = system.fullPivLu().solve(VectorXd::Ones(U));
  if (!p.allFinite() || (p.array() < -1e-9 * std::max(1.0, p.cwiseAbs().maxCoeff())).any()) return res;

  for (int i = 0; i < U; ++i) {
    const VectorXcd vi = std::sqrt(std::max(p(i), 0.0)) * dirs.col(i);
    for (int r = 0; r < d; ++r) res.beamformers.user(i)(rows[r]) = vi(r);
  }
  res.total_power = total_power(res.beamformers);
  res.status = OracleStatus::Optimal;
  for (int q = 0; q < lay.num_bs(); ++q)
    if (res.beamformers.bs_power(q) > net.power_budget[q] * (1.0 + 1e-9)) res.status = OracleStatus::BudgetBinding;
  return res;
}

}  // namespace hetnet
