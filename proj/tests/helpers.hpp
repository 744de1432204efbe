#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hetnet/net_model.hpp"

namespace testing {

using namespace hetnet;

/// One cell, one BS, one user, M = N = 1 with channel h.
inline NetworkInstance scalar_network(cdouble h, double noise, double tau, double budget) {
  NetworkInstance net;
  auto& lay = net.topology.layout;
  lay.bs_per_cell = {1};
  lay.users_per_cell = {1};
  net.channels = {MatrixXcd::Constant(1, 1, h)};
  net.noise_power = {noise};
  net.sinr_target = {tau};
  net.power_budget = {budget};
  return net;
}

/// Unit-variance Gaussian channels, no geometry.
inline NetworkInstance random_network(std::uint64_t seed, int cells, int bs, int users, int m, int n,
                                      double noise = 1.0, double tau = 1.0, double budget = 10.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  NetworkInstance net;
  auto& lay = net.topology.layout;
  lay.tx_antennas = m;
  lay.rx_antennas = n;
  lay.bs_per_cell.assign(cells, bs);
  lay.users_per_cell.assign(cells, users);
  for (int u = 0; u < lay.num_users(); ++u)
    for (int k = 0; k < cells; ++k) {
      MatrixXcd h(n, m * bs);
      for (int r = 0; r < h.rows(); ++r)
        for (int c = 0; c < h.cols(); ++c) h(r, c) = cdouble(g(rng), g(rng));
      net.channels.push_back(h);
    }
  net.noise_power.assign(lay.num_users(), noise);
  net.sinr_target.assign(lay.num_users(), tau);
  net.power_budget.assign(lay.num_bs(), budget);
  return net;
}

inline VectorXcd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = cdouble(g(rng), g(rng));
  return v;
}

inline BeamformerSet random_beamformers(const IndexLayout& lay, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  BeamformerSet v(lay);
  for (int u = 0; u < lay.num_users(); ++u) v.user(u) = random_vector(rng, v.user(u).size(), scale);
  return v;
}

}  // namespace testing
