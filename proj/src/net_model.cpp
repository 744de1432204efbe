#include "hetnet/net_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace hetnet {

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

// ---------------------------------------------------------------------------
// IndexLayout
// ---------------------------------------------------------------------------

int IndexLayout::num_bs() const { return std::accumulate(bs_per_cell.begin(), bs_per_cell.end(), 0); }

int IndexLayout::num_users() const {
  return std::accumulate(users_per_cell.begin(), users_per_cell.end(), 0);
}

int IndexLayout::bs_offset(int cell) const {
  return std::accumulate(bs_per_cell.begin(), bs_per_cell.begin() + cell, 0);
}

int IndexLayout::user_offset(int cell) const {
  return std::accumulate(users_per_cell.begin(), users_per_cell.begin() + cell, 0);
}

int IndexLayout::cell_of_user(int user) const {
  int acc = 0;
  for (int k = 0; k < num_cells(); ++k) {
    acc += users_per_cell[k];
    if (user < acc) return k;
  }
  throw DimensionMismatch("user index " + std::to_string(user) + " out of range");
}

int IndexLayout::cell_of_bs(int bs) const {
  int acc = 0;
  for (int k = 0; k < num_cells(); ++k) {
    acc += bs_per_cell[k];
    if (bs < acc) return k;
  }
  throw DimensionMismatch("BS index " + std::to_string(bs) + " out of range");
}

void IndexLayout::validate() const {
  if (bs_per_cell.empty()) throw InvalidArgument("network needs at least one cell");
  if (bs_per_cell.size() != users_per_cell.size())
    throw DimensionMismatch("bs_per_cell and users_per_cell disagree on the cell count");
  if (tx_antennas < 1 || rx_antennas < 1) throw InvalidArgument("antenna counts must be >= 1");
  for (int k = 0; k < num_cells(); ++k) {
    if (bs_per_cell[k] < 1 || users_per_cell[k] < 1)
      throw InvalidArgument("every cell needs at least one BS and one user");
  }
}

void NetworkTopology::validate() const {
  layout.validate();
  if (!cell_centers.empty() && static_cast<int>(cell_centers.size()) != layout.num_cells())
    throw DimensionMismatch("cell_centers size");
  if (!bs_positions.empty() && static_cast<int>(bs_positions.size()) != layout.num_bs())
    throw DimensionMismatch("bs_positions size");
  if (!user_positions.empty() && static_cast<int>(user_positions.size()) != layout.num_users())
    throw DimensionMismatch("user_positions size");
}

// ---------------------------------------------------------------------------
// NetworkInstance
// ---------------------------------------------------------------------------

const MatrixXcd& NetworkInstance::channel(int user, int cell) const {
  return channels.at(static_cast<std::size_t>(user) * layout().num_cells() + cell);
}

MatrixXcd NetworkInstance::bs_channel(int user, int bs) const {
  const auto& lay = layout();
  const int cell = lay.cell_of_bs(bs);
  const int q = bs - lay.bs_offset(cell);
  return channel(user, cell).middleCols(q * lay.tx_antennas, lay.tx_antennas);
}

void NetworkInstance::validate() const {
  topology.validate();
  const auto& lay = layout();
  const int users = lay.num_users();
  if (static_cast<int>(noise_power.size()) != users) throw DimensionMismatch("noise_power size");
  if (static_cast<int>(sinr_target.size()) != users) throw DimensionMismatch("sinr_target size");
  if (static_cast<int>(power_budget.size()) != lay.num_bs()) throw DimensionMismatch("power_budget size");
  if (static_cast<int>(channels.size()) != users * lay.num_cells()) throw DimensionMismatch("channel count");
  for (double s : noise_power)
    if (!(s > 0.0)) throw InvalidArgument("noise power must be positive");
  for (double t : sinr_target)
    if (!(t > 0.0)) throw InvalidArgument("SINR target must be positive");
  for (double p : power_budget)
    if (!(p > 0.0)) throw InvalidArgument("power budget must be positive");
  for (int u = 0; u < users; ++u) {
    for (int k = 0; k < lay.num_cells(); ++k) {
      const auto& h = channel(u, k);
      if (h.rows() != lay.rx_antennas || h.cols() != lay.stacked_dim(k))
        throw DimensionMismatch("channel shape for user " + std::to_string(u) + ", cell " + std::to_string(k));
    }
  }
}

// ---------------------------------------------------------------------------
// BeamformerSet
// ---------------------------------------------------------------------------

BeamformerSet::BeamformerSet(IndexLayout layout) : layout_(std::move(layout)) {
  per_user_.reserve(layout_.num_users());
  for (int k = 0; k < layout_.num_cells(); ++k) {
    for (int i = 0; i < layout_.users_per_cell[k]; ++i)
      per_user_.push_back(VectorXcd::Zero(layout_.stacked_dim(k)));
  }
}

double BeamformerSet::bs_power(int bs) const {
  const int cell = layout_.cell_of_bs(bs);
  const int q = bs - layout_.bs_offset(cell);
  const int first = layout_.user_offset(cell);
  double p = 0.0;
  for (int i = 0; i < layout_.users_per_cell[cell]; ++i) p += block(first + i, q).squaredNorm();
  return p;
}

void BeamformerSet::clear_bs(int bs) {
  const int cell = layout_.cell_of_bs(bs);
  const int q = bs - layout_.bs_offset(cell);
  const int first = layout_.user_offset(cell);
  for (int i = 0; i < layout_.users_per_cell[cell]; ++i) block(first + i, q).setZero();
}

bool BeamformerSet::operator==(const BeamformerSet& other) const {
  if (!(layout_ == other.layout_) || per_user_.size() != other.per_user_.size()) return false;
  for (std::size_t u = 0; u < per_user_.size(); ++u) {
    if (per_user_[u].size() != other.per_user_[u].size() || per_user_[u] != other.per_user_[u]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Instance generation
// ---------------------------------------------------------------------------

std::vector<Point> hex_cell_centers(int count, double spacing) {
  const int radius = 1 + static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
  struct Candidate {
    Point p;
    double dist;
    double angle;
  };
  std::vector<Candidate> lattice;
  const double h = spacing * std::sqrt(3.0) / 2.0;
  for (int a = -2 * radius; a <= 2 * radius; ++a) {
    for (int b = -2 * radius; b <= 2 * radius; ++b) {
      Point p{a * spacing + b * spacing / 2.0, b * h};
      double angle = std::atan2(p.y, p.x);
      if (angle < 0) angle += 2.0 * std::numbers::pi;
      // Snap to a grid so ties between equidistant rings sort by angle only.
      const double dist = std::round(std::hypot(p.x, p.y) * 1e6) / 1e6;
      lattice.push_back({p, dist, std::round(angle * 1e9) / 1e9});
    }
  }
  std::sort(lattice.begin(), lattice.end(), [](const Candidate& l, const Candidate& r) {
    return l.dist != r.dist ? l.dist < r.dist : l.angle < r.angle;
  });
  std::vector<Point> out;
  for (int c = 0; c < count; ++c) out.push_back(lattice.at(c).p);
  return out;
}

NetworkInstance generate_network(const NetworkParams& params, std::uint64_t seed) {
  if (params.cells < 1 || params.bs_per_cell < 1 || params.users_per_cell < 1 || params.tx_antennas < 1 ||
      params.rx_antennas < 1)
    throw InvalidArgument("network counts must be positive");
  if (!(params.cell_spacing_m > 0.0)) throw InvalidArgument("cell spacing must be positive");
  if (!(params.noise_power > 0.0)) throw InvalidArgument("noise power must be positive");
  if (!(params.min_distance_m > 0.0)) throw InvalidArgument("distance floor must be positive");

  NetworkInstance net;
  auto& lay = net.topology.layout;
  lay.tx_antennas = params.tx_antennas;
  lay.rx_antennas = params.rx_antennas;
  lay.bs_per_cell.assign(params.cells, params.bs_per_cell);
  lay.users_per_cell.assign(params.cells, params.users_per_cell);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double cell_radius = params.cell_spacing_m / 2.0;
  auto in_disk = [&](Point center) {
    const double r = cell_radius * std::sqrt(unif(rng));
    const double phi = 2.0 * std::numbers::pi * unif(rng);
    return Point{center.x + r * std::cos(phi), center.y + r * std::sin(phi)};
  };

  net.topology.cell_centers = hex_cell_centers(params.cells, params.cell_spacing_m);
  for (int k = 0; k < params.cells; ++k) {
    const Point c = net.topology.cell_centers[k];
    net.topology.bs_positions.push_back(c);
    for (int q = 1; q < params.bs_per_cell; ++q) net.topology.bs_positions.push_back(in_disk(c));
  }
  for (int k = 0; k < params.cells; ++k) {
    for (int i = 0; i < params.users_per_cell; ++i)
      net.topology.user_positions.push_back(in_disk(net.topology.cell_centers[k]));
  }

  const int users = lay.num_users();
  const int M = lay.tx_antennas;
  const int N = lay.rx_antennas;
  net.channels.reserve(static_cast<std::size_t>(users) * params.cells);
  for (int u = 0; u < users; ++u) {
    for (int k = 0; k < params.cells; ++k) {
      MatrixXcd h(N, lay.stacked_dim(k));
      for (int q = 0; q < lay.bs_per_cell[k]; ++q) {
        const Point bs = net.topology.bs_positions[lay.bs_offset(k) + q];
        const double d = std::max(distance(bs, net.topology.user_positions[u]), params.min_distance_m);
        const double shadow_db = 8.0 * gauss(rng);
        const double variance = std::pow(200.0 / d, 3.0) * db_to_linear(shadow_db);
        const double scale = std::sqrt(variance / 2.0);
        for (int r = 0; r < N; ++r) {
          for (int m = 0; m < M; ++m) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            h(r, q * M + m) = scale * cdouble(re, im);
          }
        }
      }
      net.channels.push_back(std::move(h));
    }
  }

  net.noise_power.assign(users, params.noise_power);
  net.sinr_target.assign(users, db_to_linear(params.sinr_target_db));
  for (int k = 0; k < params.cells; ++k) {
    for (int q = 0; q < params.bs_per_cell; ++q)
      net.power_budget.push_back(db_to_linear(q == 0 ? params.center_bs_budget_db : params.other_bs_budget_db));
  }
  net.validate();
  return net;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

void check_dimensions(const NetworkInstance& net, const BeamformerSet& v) {
  const auto& lay = net.layout();
  if (v.num_users() != lay.num_users()) throw DimensionMismatch("beamformer set has wrong user count");
  for (int u = 0; u < v.num_users(); ++u) {
    if (v.user(u).size() != lay.stacked_dim(lay.cell_of_user(u)))
      throw DimensionMismatch("beamformer of user " + std::to_string(u) + " has wrong length");
  }
}

namespace {

void check_user(const NetworkInstance& net, int user) {
  if (user < 0 || user >= net.layout().num_users())
    throw DimensionMismatch("user index " + std::to_string(user) + " out of range");
}

}  // namespace

VectorXcd desired_signal(const NetworkInstance& net, const BeamformerSet& v, int user) {
  const int k = net.layout().cell_of_user(user);
  return net.channel(user, k) * v.user(user);
}

MatrixXcd received_covariance(const NetworkInstance& net, const BeamformerSet& v, int user) {
  const auto& lay = net.layout();
  MatrixXcd J = net.noise_power[user] * MatrixXcd::Identity(lay.rx_antennas, lay.rx_antennas);
  for (int j = 0; j < lay.num_users(); ++j) {
    const VectorXcd s = net.channel(user, lay.cell_of_user(j)) * v.user(j);
    J.noalias() += s * s.adjoint();
  }
  return J;
}

double sinr(const NetworkInstance& net, const BeamformerSet& v, int user) {
  check_dimensions(net, v);
  check_user(net, user);
  const auto& lay = net.layout();
  if (lay.rx_antennas != 1) throw DimensionMismatch("sinr() is defined for single-antenna receivers");
  double interference = 0.0;
  double signal = 0.0;
  for (int j = 0; j < lay.num_users(); ++j) {
    const cdouble y = (net.channel(user, lay.cell_of_user(j)) * v.user(j))(0);
    if (j == user)
      signal = std::norm(y);
    else
      interference += std::norm(y);
  }
  return signal / (net.noise_power[user] + interference);
}

double rate(const NetworkInstance& net, const BeamformerSet& v, int user) {
  check_dimensions(net, v);
  check_user(net, user);
  if (!(net.noise_power[user] > 0.0)) throw InvalidArgument("rate() needs positive noise power");
  const VectorXcd s = desired_signal(net, v, user);
  MatrixXcd interference = received_covariance(net, v, user);
  interference.noalias() -= s * s.adjoint();
  // log det(I + s s^H Jint^{-1}) = log(1 + s^H Jint^{-1} s)
  const Eigen::LDLT<MatrixXcd> ldlt(interference);
  const double q = std::real(s.dot(ldlt.solve(s)));
  return std::log1p(std::max(q, 0.0));
}

double sum_rate(const NetworkInstance& net, const BeamformerSet& v) {
  double total = 0.0;
  for (int u = 0; u < net.layout().num_users(); ++u) total += rate(net, v, u);
  return total;
}

double mse(const NetworkInstance& net, const BeamformerSet& v, const VectorXcd& receive_filter, int user) {
  check_dimensions(net, v);
  check_user(net, user);
  const auto& lay = net.layout();
  if (receive_filter.size() != lay.rx_antennas) throw DimensionMismatch("receive filter length must be N");
  double e = net.noise_power[user] * receive_filter.squaredNorm();
  for (int j = 0; j < lay.num_users(); ++j) {
    const cdouble y = receive_filter.dot(net.channel(user, lay.cell_of_user(j)) * v.user(j));
    e += (j == user) ? std::norm(1.0 - y) : std::norm(y);
  }
  return e;
}

double total_power(const BeamformerSet& v) {
  double p = 0.0;
  for (int u = 0; u < v.num_users(); ++u) p += v.user(u).squaredNorm();
  return p;
}

std::vector<int> active_bs_set(const BeamformerSet& v, double tol) {
  if (tol < 0.0) throw InvalidArgument("activity tolerance must be non-negative");
  std::vector<int> active;
  for (int b = 0; b < v.layout().num_bs(); ++b) {
    if (v.bs_norm(b) > tol) active.push_back(b);
  }
  return active;
}

double default_activity_tol(const NetworkInstance& net) {
  const double pmax = *std::max_element(net.power_budget.begin(), net.power_budget.end());
  return 1e-5 * std::sqrt(pmax);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json points_to_json(const std::vector<Point>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Point> points_from_json(const json& j) {
  std::vector<Point> pts;
  for (const auto& e : j) pts.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
  return pts;
}

json complex_vector_to_json(const VectorXcd& x) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) arr.push_back({x(i).real(), x(i).imag()});
  return arr;
}

VectorXcd complex_vector_from_json(const json& j) {
  VectorXcd x(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    x(static_cast<Eigen::Index>(i)) = cdouble(j[i].at(0).get<double>(), j[i].at(1).get<double>());
  return x;
}

json layout_to_json(const IndexLayout& lay) {
  return {{"tx_antennas", lay.tx_antennas},
          {"rx_antennas", lay.rx_antennas},
          {"bs_per_cell", lay.bs_per_cell},
          {"users_per_cell", lay.users_per_cell}};
}

IndexLayout layout_from_json(const json& j) {
  IndexLayout lay;
  lay.tx_antennas = j.at("tx_antennas").get<int>();
  lay.rx_antennas = j.at("rx_antennas").get<int>();
  lay.bs_per_cell = j.at("bs_per_cell").get<std::vector<int>>();
  lay.users_per_cell = j.at("users_per_cell").get<std::vector<int>>();
  lay.validate();
  return lay;
}

}  // namespace

nlohmann::json to_json(const NetworkInstance& net) {
  json channels = json::array();
  const auto& lay = net.layout();
  for (int u = 0; u < lay.num_users(); ++u) {
    for (int k = 0; k < lay.num_cells(); ++k) {
      const auto& h = net.channel(u, k);
      json rows = json::array();
      for (Eigen::Index r = 0; r < h.rows(); ++r) rows.push_back(complex_vector_to_json(h.row(r).transpose()));
      channels.push_back({{"user", u}, {"cell", k}, {"rows", std::move(rows)}});
    }
  }
  return {{"format", "hetnet-instance"},
          {"version", 1},
          {"topology",
           {{"layout", layout_to_json(lay)},
            {"cell_centers", points_to_json(net.topology.cell_centers)},
            {"bs_positions", points_to_json(net.topology.bs_positions)},
            {"user_positions", points_to_json(net.topology.user_positions)}}},
          {"noise_power", net.noise_power},
          {"sinr_target", net.sinr_target},
          {"power_budget", net.power_budget},
          {"channels", std::move(channels)}};
}

NetworkInstance network_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "hetnet-instance") throw InvalidArgument("not a hetnet-instance document");
  NetworkInstance net;
  const auto& topo = j.at("topology");
  net.topology.layout = layout_from_json(topo.at("layout"));
  net.topology.cell_centers = points_from_json(topo.at("cell_centers"));
  net.topology.bs_positions = points_from_json(topo.at("bs_positions"));
  net.topology.user_positions = points_from_json(topo.at("user_positions"));
  net.noise_power = j.at("noise_power").get<std::vector<double>>();
  net.sinr_target = j.at("sinr_target").get<std::vector<double>>();
  net.power_budget = j.at("power_budget").get<std::vector<double>>();
  const auto& lay = net.topology.layout;
  net.channels.resize(static_cast<std::size_t>(lay.num_users()) * lay.num_cells());
  for (const auto& entry : j.at("channels")) {
    const int u = entry.at("user").get<int>();
    const int k = entry.at("cell").get<int>();
    if (u < 0 || u >= lay.num_users() || k < 0 || k >= lay.num_cells())
      throw DimensionMismatch("channel entry index out of range");
    const auto& rows = entry.at("rows");
    MatrixXcd h(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const VectorXcd row = complex_vector_from_json(rows[r]);
      if (row.size() != h.cols()) throw DimensionMismatch("ragged channel matrix");
      h.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    net.channels[static_cast<std::size_t>(u) * lay.num_cells() + k] = std::move(h);
  }
  net.validate();
  return net;
}

nlohmann::json to_json(const BeamformerSet& v) {
  json users = json::array();
  for (int u = 0; u < v.num_users(); ++u) users.push_back(complex_vector_to_json(v.user(u)));
  return {{"layout", layout_to_json(v.layout())}, {"users", std::move(users)}};
}

BeamformerSet beamformers_from_json(const nlohmann::json& j) {
  BeamformerSet v(layout_from_json(j.at("layout")));
  const auto& users = j.at("users");
  if (static_cast<int>(users.size()) != v.num_users()) throw DimensionMismatch("beamformer user count");
  for (int u = 0; u < v.num_users(); ++u) {
    VectorXcd x = complex_vector_from_json(users[u]);
    if (x.size() != v.user(u).size()) throw DimensionMismatch("beamformer length");
    v.user(u) = std::move(x);
  }
  return v;
}

void save_network(const NetworkInstance& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(net).dump(1) << '\n';
}

NetworkInstance load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return network_from_json(nlohmann::json::parse(in));
}

}  // namespace hetnet
