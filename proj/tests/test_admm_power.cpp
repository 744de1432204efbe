#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "minimizers.hpp"

#include "hetnet/admm_power.hpp"
#include "hetnet/oracle.hpp"

using namespace hetnet;
using testing::random_network;
using testing::random_vector;
using testing::scalar_network;

namespace {

// Random state with every primal and dual block populated.
AdmmState random_state(const AdmmSolver& solver, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& lay = solver.network().layout();
  AdmmState s = solver.cold_start();
  s.v = testing::random_beamformers(lay, seed + 1, 0.5);
  s.w = testing::random_beamformers(lay, seed + 2, 0.5);
  s.lambda = testing::random_beamformers(lay, seed + 3, 0.3);
  const int n = lay.num_users();
  for (int j = 0; j < n; ++j) {
    s.K.row(j) = random_vector(rng, n, 0.5).transpose();
    s.mu.row(j) = random_vector(rng, n, 0.3).transpose();
  }
  std::normal_distribution<double> g(0.0, 0.3);
  for (int u = 0; u < n; ++u) s.delta(u) = g(rng);
  // The Lagrangian is only finite inside the cones, so start there.
  for (int u = 0; u < n; ++u) {
    double s2 = s.kappa(u) * s.kappa(u);
    for (int j = 0; j < n; ++j)
      if (j != u) s2 += std::norm(s.K(u, j));
    s.K(u, u) = std::sqrt(solver.network().sinr_target[u] * s2) + 0.1;
  }
  return s;
}

bool in_cone(const AdmmSolver& solver, const AdmmState& s, int u, double slack = 1e-12) {
  const auto& net = solver.network();
  double s2 = s.kappa(u) * s.kappa(u);
  for (int j = 0; j < s.K.cols(); ++j)
    if (j != u) s2 += std::norm(s.K(u, j));
  const double direct = s.K(u, u).real();
  return s.K(u, u).imag() == 0.0 && direct + slack * std::max(1.0, direct) >= std::sqrt(net.sinr_target[u] * s2);
}

}  // namespace

TEST_CASE("cone projection keeps feasible targets") {
  VectorXcd cross(2);
  cross << cdouble(0.1, 0.2), cdouble(-0.3, 0.0);
  const ConeProjection p = project_sinr_cone(2.0, cdouble(5.0, 0.7), cross, 0.5);
  CHECK(p.gamma == 0.0);
  CHECK(p.direct == 5.0);
  CHECK(p.kappa == 0.5);
  CHECK(p.cross == cross);
}

TEST_CASE("cone projection scalar example") {
  const ConeProjection p = project_sinr_cone(1.0, cdouble(1.0, 0.0), VectorXcd(0), 2.0);
  CHECK(p.direct == doctest::Approx(1.5));
  CHECK(p.kappa == doctest::Approx(1.5));
  CHECK(p.gamma > 0.0);
}

TEST_CASE("cone projection of a polar-cone target is the apex") {
  VectorXcd cross = VectorXcd::Constant(1, cdouble(0.1, 0.0));
  const ConeProjection p = project_sinr_cone(4.0, cdouble(-10.0, 0.0), cross, 0.1);
  CHECK(p.direct == 0.0);
  CHECK(p.kappa == 0.0);
  CHECK(p.cross.norm() == 0.0);
  CHECK_THROWS_AS(project_sinr_cone(0.0, 1.0, cross, 1.0), InvalidArgument);
}

TEST_CASE("cone projection matches a numerical projector") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const double tau = std::exp(U(rng));
    const VectorXcd cross = random_vector(rng, 1 + t % 4);
    const double t0 = U(rng), k0 = U(rng);
    const ConeProjection p = project_sinr_cone(tau, cdouble(t0, U(rng)), cross, k0);
    const auto n = testing::numeric_cone_projection(tau, t0, cross, k0);
    CHECK(p.direct == doctest::Approx(n.direct).epsilon(1e-8).scale(1.0));
    CHECK(p.kappa == doctest::Approx(n.kappa).epsilon(1e-8).scale(1.0));
    CHECK((p.cross - n.cross).norm() <= 1e-8);
  }
}

TEST_CASE("shrink_to_power_ball examples") {
  VectorXcd b(2);
  b << 1.0, 0.0;
  CHECK(shrink_to_power_ball(b, 2.0, 1.0, 10.0).norm() == 0.0);
  b << 3.0, 4.0;
  const VectorXcd w = shrink_to_power_ball(b, 1.0, 2.0, 100.0);
  CHECK(w(0).real() == doctest::Approx(2.7));
  CHECK(w(1).real() == doctest::Approx(3.6));
  const VectorXcd c = shrink_to_power_ball(b, 1.0, 2.0, 4.0);
  CHECK(c(0).real() == doctest::Approx(1.2));
  CHECK(c(1).real() == doctest::Approx(1.6));
}

TEST_CASE("shrink_to_power_ball matches a numerical minimizer") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    const VectorXcd b = random_vector(rng, 1 + t % 5);
    const double beta = U(rng), rho = 0.5 + U(rng), P = 0.1 + U(rng);
    const VectorXcd w = shrink_to_power_ball(b, beta, rho, P);
    const VectorXcd n = testing::numeric_shrink(b, beta, rho, P);
    CHECK((w - n).norm() <= 1e-7);
    CHECK(w.squaredNorm() <= P * (1.0 + 1e-12));
  }
}

TEST_CASE("update_v scalar example and fixed point") {
  const NetworkInstance net = scalar_network(1.0, 1.0, 1.0, 10.0);
  AdmmConfig cfg = power_min_config();
  cfg.rho = 1.0;
  cfg.theta = 0.0;
  AdmmSolver solver(net, cfg);
  AdmmState s = solver.cold_start();
  s.K(0, 0) = 2.0;
  s.w.user(0)(0) = 2.0;
  solver.update_v(s, 0);
  CHECK(s.v.user(0)(0).real() == doctest::Approx(2.0));
  CHECK(s.v.user(0)(0).imag() == doctest::Approx(0.0));
  CHECK(s.kappa_hat(0) == doctest::Approx(1.0));

  // Consistent K and w with zero duals reproduce the previous v.
  const NetworkInstance rnet = random_network(4, 2, 2, 2, 2, 1);
  AdmmSolver rs(rnet, cfg);
  AdmmState st = rs.cold_start();
  const BeamformerSet v0 = testing::random_beamformers(rnet.layout(), 5);
  st.w = v0;
  st.K = rs.cross_gains(v0);
  for (int k = 0; k < 2; ++k) rs.update_v(st, k);
  for (int u = 0; u < rnet.layout().num_users(); ++u) CHECK((st.v.user(u) - v0.user(u)).norm() <= 1e-10);
}

TEST_CASE("update_v is a stationary point of the augmented Lagrangian") {
  const NetworkInstance net = random_network(9, 2, 3, 2, 2, 1);
  AdmmSolver solver(net, selection_config(net, 0.5));
  AdmmState s = random_state(solver, 10);
  for (int k = 0; k < 2; ++k) solver.update_v(s, k);
  const double base = solver.augmented_lagrangian(s);
  const double h = 1e-6;
  double grad2 = 0.0;
  for (int u = 0; u < net.layout().num_users(); ++u)
    for (Eigen::Index e = 0; e < s.v.user(u).size(); ++e)
      for (cdouble dir : {cdouble(1, 0), cdouble(0, 1)}) {
        AdmmState p = s, m = s;
        p.v.user(u)(e) += h * dir;
        m.v.user(u)(e) -= h * dir;
        const double g = (solver.augmented_lagrangian(p) - solver.augmented_lagrangian(m)) / (2 * h);
        grad2 += g * g;
        CHECK(solver.augmented_lagrangian(p) >= base - 1e-12);
      }
  CHECK(std::sqrt(grad2) <= 1e-6);
}

TEST_CASE("update_w and update_K_kappa minimize the augmented Lagrangian") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const NetworkInstance net = random_network(seed, 2, 2, 2, 2, 1, 1.0, 2.0, 1.0);
    AdmmSolver solver(net, selection_config(net, 0.3));
    AdmmState s = random_state(solver, seed * 7);

    // Numerical minimizers of each block, evaluated on the Lagrangian.
    for (int u = 0; u < net.layout().num_users(); ++u) {
      AdmmState ref = s;
      const int n = net.layout().num_users();
      VectorXcd targets(n);
      for (int j = 0; j < n; ++j)
        targets(j) = (net.channel(u, net.layout().cell_of_user(j)) * s.v.user(j))(0) - s.mu(u, j) / 5.0;
      VectorXcd cross(n - 1);
      for (int j = 0, c = 0; j < n; ++j)
        if (j != u) cross(c++) = targets(j);
      const auto num = testing::numeric_cone_projection(net.sinr_target[u], targets(u).real(), cross,
                                                        s.kappa_hat(u) - s.delta(u) / 5.0);
      for (int j = 0, c = 0; j < n; ++j) ref.K(u, j) = j == u ? cdouble(num.direct, 0.0) : num.cross(c++);
      ref.kappa(u) = num.kappa;

      const double before = solver.augmented_lagrangian(s);
      solver.update_K_kappa(s, u);
      CHECK(in_cone(solver, s, u));
      CHECK(solver.augmented_lagrangian(s) <= before + 1e-9);
      CHECK((s.K.row(u) - ref.K.row(u)).norm() <= 1e-7);
      CHECK(s.kappa(u) == doctest::Approx(ref.kappa(u)).epsilon(1e-7).scale(1.0));
    }
    for (int b = 0; b < net.layout().num_bs(); ++b) {
      const double before = solver.augmented_lagrangian(s);
      solver.update_w(s, b);
      CHECK(solver.augmented_lagrangian(s) <= before + 1e-9);
      CHECK(s.w.bs_power(b) <= net.power_budget[b] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("update_duals") {
  const NetworkInstance net = random_network(2, 1, 2, 2, 2, 1);
  AdmmSolver solver(net, power_min_config());
  SUBCASE("zero residuals leave the duals unchanged") {
    AdmmState s = solver.warm_start(testing::random_beamformers(net.layout(), 3));
    s.mu.setConstant(0.25);
    const AdmmState before = s;
    solver.update_duals(s);
    CHECK(s.mu == before.mu);
    CHECK(s.delta == before.delta);
    for (int u = 0; u < 2; ++u) CHECK(s.lambda.user(u) == before.lambda.user(u));
  }
  SUBCASE("full iteration increments equal rho times the residuals") {
    AdmmState s = random_state(solver, 11);
    solver.update_block_a(s);
    solver.update_block_b(s);
    const AdmmState before = s;
    solver.update_duals(s);
    const double rho = solver.config().rho;
    const MatrixXcd gains = solver.cross_gains(s.v);
    CHECK((s.mu - before.mu - rho * (s.K - gains)).norm() <= 1e-12);
    CHECK((s.delta - before.delta - rho * (s.kappa - s.kappa_hat)).norm() <= 1e-12);
    for (int u = 0; u < 2; ++u)
      CHECK((s.lambda.user(u) - before.lambda.user(u) - rho * (s.w.user(u) - s.v.user(u))).norm() <= 1e-12);
  }
}

TEST_CASE("residual metric") {
  const NetworkInstance net = random_network(5, 1, 2, 2, 2, 1);
  AdmmSolver solver(net, power_min_config());
  AdmmState s = solver.warm_start(testing::random_beamformers(net.layout(), 6));
  const auto r = solver.residuals(s, solver.objective(s.w));
  for (double x : r) CHECK(x == doctest::Approx(0.0).scale(1.0));

  const double d = 0.01;
  s.w.user(0)(0) += d;
  const auto r2 = solver.residuals(s, solver.objective(s.w));
  CHECK(r2[1] >= d / std::max(1.0, std::sqrt(total_power(s.v) + total_power(s.w))) - 1e-15);
}

TEST_CASE("scalar power minimization") {
  const NetworkInstance net = scalar_network(1.0, 1.0, 3.0, 10.0);
  const SolveReport r = admm_solve(net, power_min_config());
  CHECK(r.status == SolveStatus::Converged);
  CHECK(r.total_power == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(r.active_set == std::vector<int>{0});
  CHECK(r.history.back().metric() < 1e-4);
}

TEST_CASE("infeasible target hits the iteration cap") {
  const NetworkInstance net = scalar_network(1.0, 1.0, 1000.0, 1.0);
  AdmmConfig cfg = power_min_config();
  cfg.max_iters = 300;
  cfg.infeasible_iter_cap = 300;
  CHECK(admm_solve(net, cfg).status == SolveStatus::Infeasible);
}

TEST_CASE("M = 1 multi-user power matches the duality oracle") {
  int compared = 0;
  for (std::uint64_t seed = 1; seed <= 30 && compared < 8; ++seed) {
    NetworkParams p;
    p.bs_per_cell = 3;
    p.users_per_cell = 2;
    p.noise_power = 0.01;
    p.sinr_target_db = 5.0;
    const NetworkInstance net = generate_network(p, seed);
    const MisoOracleResult o = miso_power_oracle(net);
    if (o.status != OracleStatus::Optimal) continue;
    AdmmConfig cfg = power_min_config();
    cfg.eps_tol = 1e-6;
    cfg.max_iters = cfg.infeasible_iter_cap = 20000;
    const SolveReport r = admm_solve(net, cfg);
    CHECK(r.status == SolveStatus::Converged);
    CHECK(std::abs(r.total_power - o.total_power) <= 1e-3 * o.total_power);
    ++compared;
  }
  CHECK(compared >= 5);
}

TEST_CASE("block-A feasibility after every iteration and final SINR slack") {
  NetworkParams p;
  p.cells = 2;
  p.bs_per_cell = 3;
  p.users_per_cell = 2;
  p.tx_antennas = 2;
  p.noise_power = 0.01;
  p.sinr_target_db = 5.0;
  const NetworkInstance net = generate_network(p, 4);
  AdmmSolver solver(net, selection_config(net, 0.5));
  AdmmState s = solver.cold_start();
  solver.update_block_a(s);
  for (int it = 0; it < 100; ++it) {
    const double a0 = solver.augmented_lagrangian(s);
    solver.update_block_a(s);
    const double a1 = solver.augmented_lagrangian(s);
    solver.update_block_b(s);
    const double a2 = solver.augmented_lagrangian(s);
    CHECK(a1 <= a0 + 1e-9 * std::max(1.0, std::abs(a0)));
    CHECK(a2 <= a1 + 1e-9 * std::max(1.0, std::abs(a1)));
    solver.update_duals(s);
    for (int u = 0; u < net.layout().num_users(); ++u) CHECK(in_cone(solver, s, u));
    for (int b = 0; b < net.layout().num_bs(); ++b) CHECK(s.w.bs_power(b) <= net.power_budget[b] * (1 + 1e-12));
  }

  const SolveReport r = admm_solve(net, power_min_config());
  REQUIRE(r.status == SolveStatus::Converged);
  for (int u = 0; u < net.layout().num_users(); ++u) CHECK(sinr(net, r.beamformers, u) >= net.sinr_target[u] * (1 - 1e-3));
  for (int b = 0; b < net.layout().num_bs(); ++b)
    CHECK(r.beamformers.bs_power(b) <= net.power_budget[b] * (1 + 1e-12));
  const auto& last = r.history.back().residuals;
  CHECK(last[0] < 1e-4);
  CHECK(last[1] < 1e-4);
  CHECK(last[2] < 1e-4);
}

TEST_CASE("noise normalization does not change the solution") {
  NetworkParams p;
  p.bs_per_cell = 2;
  p.users_per_cell = 2;
  p.tx_antennas = 2;
  p.noise_power = 0.05;
  p.sinr_target_db = 5.0;
  const NetworkInstance net = generate_network(p, 2);
  AdmmConfig a = power_min_config();
  a.eps_tol = 1e-7;
  AdmmConfig b = a;
  b.normalize_noise = false;
  b.max_iters = b.infeasible_iter_cap = 20000;
  const SolveReport ra = admm_solve(net, a);
  const SolveReport rb = admm_solve(net, b);
  REQUIRE(ra.status == SolveStatus::Converged);
  REQUIRE(rb.status == SolveStatus::Converged);
  CHECK(ra.total_power == doctest::Approx(rb.total_power).epsilon(1e-4));
}

TEST_CASE("reweight") {
  const IndexLayout lay = random_network(1, 1, 2, 1, 1, 1).layout();
  BeamformerSet w(lay);
  w.block(0, 1)(0) = 1.0;
  const auto beta = reweight(w, {1.0, 1.0}, 1e-3);
  CHECK(beta[0] == doctest::Approx(1e3));
  CHECK(beta[1] == doctest::Approx(1.0 / 1.001));
  CHECK_THROWS_AS(reweight(w, {1.0, 1.0}, 0.0), ConfigInvalid);
}

TEST_CASE("debias") {
  NetworkParams p;
  p.bs_per_cell = 3;
  p.users_per_cell = 2;
  p.tx_antennas = 2;
  p.noise_power = 0.1;
  p.sinr_target_db = 3.0;
  const NetworkInstance net = generate_network(p, 6);

  SUBCASE("all BSs equals plain power minimization") {
    const SolveReport a = debias(net, power_min_config(), {0, 1, 2});
    const SolveReport b = admm_solve(net, power_min_config());
    CHECK(a.total_power == doctest::Approx(b.total_power).epsilon(1e-12));
    CHECK(a.iterations == b.iterations);
  }
  SUBCASE("debiased power does not exceed the regularized power on the same support") {
    const SolveReport reg = admm_solve(net, selection_config(net, 1.0));
    REQUIRE(reg.status == SolveStatus::Converged);
    const SolveReport deb = debias(net, power_min_config(), reg.active_set);
    CHECK(deb.total_power <= reg.total_power * (1 + 1e-3));
    for (int b = 0; b < 3; ++b) {
      const bool on = std::find(reg.active_set.begin(), reg.active_set.end(), b) != reg.active_set.end();
      if (!on) CHECK(deb.beamformers.bs_power(b) == 0.0);
    }
  }
  SUBCASE("empty support is infeasible") {
    CHECK(debias(net, power_min_config(), {}).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("single-BS support scalar power") {
  const NetworkInstance net = scalar_network(cdouble(0.0, 2.0), 0.5, 2.0, 10.0);
  const SolveReport r = debias(net, power_min_config(), {0});
  CHECK(r.total_power == doctest::Approx(2.0 * 0.5 / 4.0).epsilon(1e-3));
}

TEST_CASE("selection with reweighting is deterministic and shrinks the support") {
  NetworkParams p;
  p.bs_per_cell = 4;
  p.users_per_cell = 2;
  p.tx_antennas = 2;
  p.noise_power = 0.1;
  p.sinr_target_db = 3.0;
  const NetworkInstance net = generate_network(p, 3);
  AdmmConfig cfg = selection_config(net, 1.0);
  cfg.reweight_rounds = 4;
  const SelectionResult a = admm_select(net, cfg);
  const SelectionResult b = admm_select(net, cfg);
  CHECK(a.active_counts == b.active_counts);
  CHECK(a.debiased.beamformers == b.debiased.beamformers);
  for (std::size_t i = 1; i < a.active_counts.size(); ++i) CHECK(a.active_counts[i] <= a.active_counts[i - 1]);
  CHECK(a.debiased.status == SolveStatus::Converged);
}

TEST_CASE("threaded solve equals the serial solve") {
  NetworkParams p;
  p.cells = 2;
  p.bs_per_cell = 3;
  p.users_per_cell = 2;
  p.tx_antennas = 2;
  p.noise_power = 0.1;
  const NetworkInstance net = generate_network(p, 8);
  AdmmConfig a = power_min_config();
  AdmmConfig b = a;
  b.threads = 3;
  const SolveReport ra = admm_solve(net, a);
  const SolveReport rb = admm_solve(net, b);
  CHECK(ra.iterations == rb.iterations);
  CHECK(ra.beamformers == rb.beamformers);
}

TEST_CASE("config validation") {
  AdmmConfig c;
  c.rho = 0.0;
  CHECK_THROWS_AS(c.validate(1), ConfigInvalid);
  c = AdmmConfig{};
  c.beta = {1.0, 1.0};
  CHECK_THROWS_AS(c.validate(3), ConfigInvalid);
  c.beta = {1.0, -1.0, 0.0};
  CHECK_THROWS_AS(c.validate(3), ConfigInvalid);
}

TEST_CASE("report JSON round trip") {
  const NetworkInstance net = scalar_network(1.0, 1.0, 3.0, 10.0);
  const SolveReport r = admm_solve(net, power_min_config());
  const SolveReport back = report_from_json(to_json(r, true));
  CHECK(back.status == r.status);
  CHECK(back.iterations == r.iterations);
  CHECK(back.total_power == r.total_power);
  CHECK(back.active_set == r.active_set);
  CHECK(back.beamformers == r.beamformers);
  REQUIRE(back.history.size() == r.history.size());
  CHECK(back.history.back().residuals == r.history.back().residuals);
  CHECK(to_json(back, true).dump() == to_json(r, true).dump());
}
