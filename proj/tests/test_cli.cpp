#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#include "hetnet/experiment.hpp"

namespace {

const std::string kTiny =
    " --mode power-min --cells 1 --bs-per-cell 2 --users 1 --antennas-tx 1 --snr-db 20 --tau-db 5"
    " --realizations 2 --seed 3";

int run(const std::string& args) {
  const std::string cmd = std::string(HETNET_CLI) + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string capture(const std::string& args) {
  const std::string cmd = std::string(HETNET_CLI) + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  pclose(pipe);
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("experiment run writes a CSV and exits 0") {
  CHECK(run(kTiny + " --baseline all-on --out a.csv") == 0);
  const auto rows = hetnet::parse_csv(slurp("a.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].mode == "power-min");
  CHECK(rows[1].mode == "baseline:all-on");
  CHECK(rows[0].status == "converged");
  CHECK(rows[2].realization == 1);
}

TEST_CASE("output is byte-identical across invocations") {
  CHECK(run(kTiny + " --out b1.csv") == 0);
  CHECK(run(kTiny + " --out b2.csv") == 0);
  CHECK(slurp("b1.csv") == slurp("b2.csv"));
  CHECK(capture(kTiny) == slurp("b1.csv"));
}

TEST_CASE("a config file is equivalent to the flags") {
  {
    std::ofstream cfg("run.ini");
    cfg << "mode = power-min\ncells = 1\nbs-per-cell = 2\nusers = 1\nantennas-tx = 1\nsnr-db = 20\n"
           "tau-db = 5\nrealizations = 2\nseed = 3\n";
  }
  CHECK(run(" --config run.ini --out c.csv") == 0);
  CHECK(run(kTiny + " --out b.csv") == 0);
  CHECK(slurp("c.csv") == slurp("b.csv"));
}

TEST_CASE("infeasible realizations exit with 2") {
  CHECK(run(" --mode power-min --cells 1 --bs-per-cell 1 --users 2 --snr-db 0 --tau-db 40 --max-iters 50"
            " --out d.csv") == 2);
  const auto rows = hetnet::parse_csv(slurp("d.csv"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].status == "infeasible");
}

TEST_CASE("errors exit with 1") {
  CHECK(run(" --mode nope") == 1);
  CHECK(run(" --cells 0") == 1);
  CHECK(run(" --no-such-flag") == 1);
  CHECK(run(" --baseline random90") == 1);
  CHECK(run(kTiny + " --out /nonexistent-dir/x.csv") == 1);
  CHECK(run(" graph /nonexistent-file") == 1);
}

TEST_CASE("preset values apply to options that were not given") {
  CHECK(run(" --preset sumrate-large --cells 1 --bs-per-cell 2 --users 1 --antennas-tx 1 --antennas-rx 1"
            " --realizations 1 --reweight-rounds 1 --baseline all-on --out e.csv --summary e.json") == 0);
  const auto j = nlohmann::json::parse(slurp("e.json"));
  CHECK(j["spec"]["mode"] == "sumrate");
  CHECK(j["spec"]["mu"] == 1.5);
  CHECK(j["spec"]["cells"] == 1);
  CHECK(j["summary"].size() == 2);
  CHECK(capture(" --list-presets") == "powermin-large\nsumrate-large\n");
}

TEST_CASE("graph subcommand") {
  {
    std::ofstream g("k3.txt");
    g << "# triangle\n3\n1 2\n2 3\n1 3\n";
  }
  const auto j = nlohmann::json::parse(capture(" graph k3.txt"));
  CHECK(j["vertices"] == 3);
  CHECK(j["min_vertex_cover"] == 2);
  CHECK(j["min_dominating_set"] == 1);
  CHECK(j["min_active_set"] == 1);
  CHECK(j["active_set_witness"].size() == 1);
}
