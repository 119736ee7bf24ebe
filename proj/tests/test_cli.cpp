#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include "json.hpp"
#include "stats_helpers.hpp"

// Paths are baked in by the build so the suite can exercise the real binary.
#ifndef QSCF_CLI_PATH
#error "QSCF_CLI_PATH must be defined"
#endif
#ifndef QSCF_CONFIG_DIR
#error "QSCF_CONFIG_DIR must be defined"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(QSCF_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult result;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) {
    result.out.append(buf, n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string config(const char* name) {
  return std::string(QSCF_CONFIG_DIR) + "/" + name;
}

fs::path scratch_dir() {
  const fs::path dir =
      fs::temp_directory_path() / ("qscf_cli_test_" + std::to_string(getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("analyze reproduces the operating-point numbers") {
  const RunResult r = run_cli("analyze --config " + config("table1.cfg"));
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["p_alice"].get<double>() == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(j["p_bob"].get<double>() ==
        doctest::Approx(0.90012666970771977).epsilon(1e-9));
  CHECK(j["p_honest_abort"].get<double>() ==
        doctest::Approx(0.014).epsilon(1e-6));
  CHECK(j["p_classical"].get<double>() ==
        doctest::Approx(0.916).epsilon(1e-6));
  CHECK(j["gain_pp"].get<double>() == doctest::Approx(1.587).epsilon(1e-3));
  CHECK(j["rate_hz"].get<double>() == doctest::Approx(1577.6).epsilon(1e-6));
  CHECK(j["display"]["p_alice"] == "90.0%");
  CHECK(j["display"]["p_honest_abort"] == "1.4%");
  CHECK(j["display"]["p_classical"] == "91.6%");
}

TEST_CASE("analyze covers the coherent-pulse variant via an override") {
  const RunResult r = run_cli("analyze --config " + config("table1.cfg") +
                              " --set source_kind=wcp");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["p_bob"].get<double>() ==
        doctest::Approx(0.90413348386192247).epsilon(1e-8));
  CHECK(j["gain_pp"].get<double>() == doctest::Approx(1.1867).epsilon(1e-3));
}

TEST_CASE("invalid parameters exit with the config code") {
  CHECK(run_cli("analyze --config " + config("table1.cfg") +
                " --set state_param_a=1.2")
            .exit_code == 2);
  CHECK(run_cli("analyze --config /nonexistent.cfg").exit_code == 2);
  CHECK(run_cli("analyze").exit_code == 2);  // missing --config

  const fs::path dir = scratch_dir();
  const fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << "source_kind = sps\nmu = 0.0013\nwavelength_nm = 921\n";
  CHECK(run_cli("analyze --config " + bad.string()).exit_code == 2);
}

TEST_CASE("simulate output is byte-stable for a fixed seed") {
  const std::string args = "simulate --config " + config("table1.cfg") +
                           " --flips 4000 --seed 7";
  const RunResult a = run_cli(args);
  const RunResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != run_cli(args + "1").out);  // seed 71

  const json j = json::parse(a.out);
  CHECK(j["analytic"]["abort_within_4sigma"].get<bool>());
  CHECK(j["n_flips"].get<int>() == 4000);
}

TEST_CASE("simulate agrees with analyze on the abort probability") {
  const RunResult sim = run_cli("simulate --config " + config("loss3db.cfg") +
                                " --flips 20000 --seed 3");
  REQUIRE(sim.exit_code == 0);
  const json js = json::parse(sim.out);
  const RunResult an = run_cli("analyze --config " + config("loss3db.cfg"));
  REQUIRE(an.exit_code == 0);
  const json ja = json::parse(an.out);
  const double h = ja["p_honest_abort"].get<double>();
  const double observed = js["analytic"]["abort_observed"].get<double>();
  const double sigma = js["analytic"]["abort_sigma"].get<double>();
  CHECK(std::abs(observed - h) <= 4.0 * sigma);
}

TEST_CASE("a too-small randomness file exhausts with exit code 4") {
  const fs::path dir = scratch_dir();
  const fs::path bits = dir / "few.bits";
  std::ofstream(bits, std::ios::binary) << std::string(64, '\xa5');
  const RunResult r = run_cli("simulate --config " + config("table1.cfg") +
                              " --set pulses_per_flip=100 --flips 50" +
                              " --random-file " + bits.string());
  CHECK(r.exit_code == 4);
}

TEST_CASE("iotable emits the expected-table CSV") {
  const RunResult r = run_cli("iotable --config " + config("table1.cfg") +
                              " --format csv");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.rfind("sent,det_00,det_01,det_10,det_11\n", 0) == 0);
  CHECK(r.out.find("00,0.486,0.014,0.32,0.18\n") != std::string::npos);
}

TEST_CASE("simulated iotable stays close to the expected one") {
  const RunResult r = run_cli("iotable --config " + config("table1.cfg") +
                              " --simulated --flips 20000 --seed 5");
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["all_rows_sufficient"].get<bool>());
  const double p00 = j["rows"][0][0].get<double>();
  CHECK(std::abs(p00 - 0.486) < 0.02);
}

TEST_CASE("fairness solves the operating point") {
  const RunResult r = run_cli("fairness --config " + config("table1.cfg"));
  REQUIRE(r.exit_code == 0);
  const json j = json::parse(r.out);
  CHECK(j["a_star"].get<double>() ==
        doctest::Approx(0.89992393232875).epsilon(1e-7));
  CHECK(j["residual"].get<double>() < 1e-9);
}

TEST_CASE("single-cell sweep emits exactly one data row") {
  const RunResult r = run_cli("sweep --config " + config("table1.cfg") +
                              " --k-grid 50000 --mu-grid 0.0013 --format csv");
  REQUIRE(r.exit_code == 0);
  std::size_t lines = 0;
  for (char c : r.out) lines += c == '\n';
  CHECK(lines == 2);  // header + one cell
  CHECK(r.out.rfind("K,mu,a_star,p_alice,p_bob,H,p_classical,gain,note\n",
                    0) == 0);
  CHECK(r.out.find("50000,0.0013,0.89992") != std::string::npos);
}

TEST_CASE("three processes complete a session over unix sockets") {
  const fs::path dir = scratch_dir();
  const std::string ep_a = "unix:" + (dir / "a.sock").string();
  const std::string ep_b = "unix:" + (dir / "b.sock").string();
  const std::string shared = " --config " + config("table1.cfg") +
                             " --set pulses_per_flip=400 --flips 200"
                             " --seed 19";

  RunResult physics;
  std::thread physics_thread([&] {
    physics = run_cli("physics" + shared + " --alice-endpoint " + ep_a +
                      " --bob-endpoint " + ep_b);
  });
  // parties retry until the listener is up
  auto run_party = [&](const std::string& role, const std::string& ep) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const RunResult r = run_cli(role + shared + " --endpoint " + ep);
      if (r.exit_code == 0) return r;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return RunResult{};
  };
  RunResult bob;
  std::thread bob_thread([&] { bob = run_party("bob", ep_b); });
  const RunResult alice = run_party("alice", ep_a);
  bob_thread.join();
  physics_thread.join();

  REQUIRE(alice.exit_code == 0);
  REQUIRE(bob.exit_code == 0);
  REQUIRE(physics.exit_code == 0);
  const json ja = json::parse(alice.out);
  const json jb = json::parse(bob.out);
  CHECK(ja["outcome_digest"] == jb["outcome_digest"]);
  CHECK(ja["n_flips"].get<int>() == 200);
  const json jp = json::parse(physics.out);
  CHECK(jp["clean_finish"].get<bool>());
}

TEST_CASE("a file-backed randomness supply is deterministic") {
  const fs::path dir = scratch_dir();
  const fs::path bits = dir / "supply.bits";
  {
    std::ofstream out(bits, std::ios::binary);
    for (int i = 0; i < 8192; ++i) out.put(static_cast<char>(i * 37 + 11));
  }
  const std::string args = "simulate --config " + config("table1.cfg") +
                           " --set pulses_per_flip=10 --flips 50 --seed 9" +
                           " --random-file " + bits.string();
  const RunResult a = run_cli(args);
  const RunResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("a cheating receiver process shows the analytic bias") {
  const fs::path dir = scratch_dir();
  const std::string ep_a = "unix:" + (dir / "ca.sock").string();
  const std::string ep_b = "unix:" + (dir / "cb.sock").string();
  const std::string shared = " --config " + config("table1.cfg") +
                             " --set pulses_per_flip=1000 --flips 600"
                             " --seed 23";

  RunResult physics;
  std::thread physics_thread([&] {
    physics = run_cli("physics" + shared + " --alice-endpoint " + ep_a +
                      " --bob-endpoint " + ep_b);
  });
  auto run_party = [&](const std::string& invocation) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const RunResult r = run_cli(invocation);
      if (r.exit_code == 0) return r;
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return RunResult{};
  };
  RunResult bob;
  std::thread bob_thread([&] {
    bob = run_party("bob" + shared + " --cheat --target 1 --endpoint " + ep_b);
  });
  const RunResult alice = run_party("alice" + shared + " --endpoint " + ep_a);
  bob_thread.join();
  physics_thread.join();

  REQUIRE(alice.exit_code == 0);
  REQUIRE(bob.exit_code == 0);
  REQUIRE(physics.exit_code == 0);
  const json jb = json::parse(bob.out);
  const double n_success = jb["n_success"].get<double>();
  const double bias = jb["n_outcome1"].get<double>() / n_success;
  // forcing probability ~ 0.9 at these parameters
  const double sigma = testutil::binom_sigma(0.9, n_success);
  CHECK(std::abs(bias - 0.9) <= 4.0 * sigma);
}

TEST_CASE("a party with a different scenario is turned away") {
  const fs::path dir = scratch_dir();
  const std::string ep_a = "unix:" + (dir / "ha.sock").string();
  const std::string ep_b = "unix:" + (dir / "hb.sock").string();
  const std::string shared =
      " --config " + config("table1.cfg") + " --flips 20 --seed 4";

  RunResult physics;
  std::thread physics_thread([&] {
    physics = run_cli("physics" + shared + " --alice-endpoint " + ep_a +
                      " --bob-endpoint " + ep_b);
  });
  auto wait_for_socket = [](const fs::path& p) {
    for (int i = 0; i < 50 && !fs::exists(p); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  };
  wait_for_socket(dir / "ha.sock");
  wait_for_socket(dir / "hb.sock");
  RunResult bob;
  std::thread bob_thread([&] {
    // mismatched qber -> different scenario hash
    bob = run_cli("bob" + shared + " --set qber=0.031 --endpoint " + ep_b);
  });
  const RunResult alice = run_cli("alice" + shared + " --endpoint " + ep_a);
  bob_thread.join();
  physics_thread.join();

  CHECK(physics.exit_code == 3);
  CHECK(bob.exit_code == 3);
  CHECK(alice.exit_code == 3);
}

TEST_CASE("help succeeds") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("analyze --help").exit_code == 0);
}
