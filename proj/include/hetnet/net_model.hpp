#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "hetnet/common.hpp"

namespace hetnet {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// Index bookkeeping shared by everything that addresses users and BSs.
///
/// Users and BSs carry a global index; cell k owns the contiguous ranges
/// [user_offset(k), user_offset(k) + users_per_cell[k]) and
/// [bs_offset(k), bs_offset(k) + bs_per_cell[k]).
struct IndexLayout {
  int tx_antennas = 1;
  int rx_antennas = 1;
  std::vector<int> bs_per_cell;
  std::vector<int> users_per_cell;

  int num_cells() const { return static_cast<int>(bs_per_cell.size()); }
  int num_bs() const;
  int num_users() const;
  int bs_offset(int cell) const;
  int user_offset(int cell) const;
  int cell_of_user(int user) const;
  int cell_of_bs(int bs) const;
  /// Length of the stacked beamformer of a user in `cell` (M * Q_k).
  int stacked_dim(int cell) const { return tx_antennas * bs_per_cell.at(cell); }

  void validate() const;
  bool operator==(const IndexLayout&) const = default;
};

struct NetworkTopology {
  IndexLayout layout;
  std::vector<Point> cell_centers;
  std::vector<Point> bs_positions;
  std::vector<Point> user_positions;

  void validate() const;
};

/// Immutable problem data of one HetNet realization.
///
/// `channels[user * K + cell]` is the N x (M * Q_cell) matrix from every BS of
/// `cell` to `user`; columns [q*M, (q+1)*M) belong to the cell's q-th BS. For
/// N = 1 the row equals h^H in the MISO notation, so h^H v = channel * v.
struct NetworkInstance {
  NetworkTopology topology;
  std::vector<MatrixXcd> channels;
  std::vector<double> noise_power;   // per user, watts
  std::vector<double> sinr_target;   // per user, linear
  std::vector<double> power_budget;  // per BS, watts

  const IndexLayout& layout() const { return topology.layout; }
  const MatrixXcd& channel(int user, int cell) const;
  /// N x M block from a single BS (global index) to a user.
  MatrixXcd bs_channel(int user, int bs) const;

  void validate() const;
};

/// Transmit beamformers v_{i_k}^{q_k}; only intra-cell serving links exist.
///
/// Stored per user as the stacked vector [v^{1_k}; ...; v^{Q_k}] of length
/// M * Q_k, which is the "virtual" beamformer of the user.
class BeamformerSet {
 public:
  BeamformerSet() = default;
  explicit BeamformerSet(IndexLayout layout);

  static BeamformerSet zeros(const IndexLayout& layout) { return BeamformerSet(layout); }

  const IndexLayout& layout() const { return layout_; }
  int num_users() const { return static_cast<int>(per_user_.size()); }

  VectorXcd& user(int u) { return per_user_.at(u); }
  const VectorXcd& user(int u) const { return per_user_.at(u); }

  /// Block of user u at local BS index q of the user's own cell.
  auto block(int u, int q) { return per_user_.at(u).segment(q * layout_.tx_antennas, layout_.tx_antennas); }
  auto block(int u, int q) const {
    return per_user_.at(u).segment(q * layout_.tx_antennas, layout_.tx_antennas);
  }

  /// ||v^{q}||^2 summed over the users of the BS's cell (global BS index).
  double bs_power(int bs) const;
  double bs_norm(int bs) const { return std::sqrt(bs_power(bs)); }
  /// Zeros every block of a BS (global index).
  void clear_bs(int bs);

  bool operator==(const BeamformerSet& other) const;

 private:
  IndexLayout layout_;
  std::vector<VectorXcd> per_user_;
};

struct NetworkParams {
  int cells = 1;
  int bs_per_cell = 1;
  int users_per_cell = 1;
  int tx_antennas = 1;
  int rx_antennas = 1;
  double cell_spacing_m = 2000.0;
  double sinr_target_db = 15.0;
  double center_bs_budget_db = 10.0;
  double other_bs_budget_db = 5.0;
  double noise_power = 1.0;
  double min_distance_m = 10.0;
};

/// Random instance following the simulation protocol: hexagonal cell grid,
/// macro BS at each cell center, remaining BSs and users uniform in a disk of
/// radius spacing/2, Rayleigh channels with variance (200/d)^3 * L and
/// 8 dB log-normal shadowing. Deterministic in `seed`.
NetworkInstance generate_network(const NetworkParams& params, std::uint64_t seed);

/// Cell centers of the hexagonal layout, nearest to the origin first.
std::vector<Point> hex_cell_centers(int count, double spacing);

double sinr(const NetworkInstance& net, const BeamformerSet& v, int user);
/// Achievable rate in nats.
double rate(const NetworkInstance& net, const BeamformerSet& v, int user);
double sum_rate(const NetworkInstance& net, const BeamformerSet& v);
double mse(const NetworkInstance& net, const BeamformerSet& v, const VectorXcd& receive_filter, int user);

/// Received covariance J_u = sum_j H v_j v_j^H H^H + sigma^2 I (signal included).
MatrixXcd received_covariance(const NetworkInstance& net, const BeamformerSet& v, int user);
/// Effective N-vector H_u^k v_u of the user's own stream.
VectorXcd desired_signal(const NetworkInstance& net, const BeamformerSet& v, int user);

double total_power(const BeamformerSet& v);
std::vector<int> active_bs_set(const BeamformerSet& v, double tol);
/// 1e-5 * sqrt(max P): scale-aware zero threshold for BS blocks.
double default_activity_tol(const NetworkInstance& net);

void check_dimensions(const NetworkInstance& net, const BeamformerSet& v);

nlohmann::json to_json(const NetworkInstance& net);
NetworkInstance network_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BeamformerSet& v);
BeamformerSet beamformers_from_json(const nlohmann::json& j);

void save_network(const NetworkInstance& net, const std::filesystem::path& path);
NetworkInstance load_network(const std::filesystem::path& path);

}  // namespace hetnet
