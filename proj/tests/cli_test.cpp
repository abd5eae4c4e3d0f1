// Copyright 2026 The qced Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the installed binary end to end: exit codes, report formats, and a
// two-process socket session.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string binary_path() {
  const char* bin = std::getenv("QCED_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

std::string circuit_dir() {
  const char* dir = std::getenv("QCED_CIRCUIT_DIR");
  REQUIRE(dir != nullptr);
  return dir;
}

fs::path scratch_dir() {
  static fs::path dir = [] {
    auto d = fs::temp_directory_path() /
             ("qced_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CommandResult run_cli(const std::string& args, const std::string& tag) {
  const auto out_path = scratch_dir() / (tag + ".out");
  const auto err_path = scratch_dir() / (tag + ".err");
  const std::string cmd = binary_path() + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  CommandResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

}  // namespace

TEST_CASE("local run reports the delegated execution") {
  const auto bell = circuit_dir() + "/bell.qc";
  auto text = run_cli("run --circuit " + bell + " --input 00 --seed 7", "bell");
  REQUIRE(text.exit_code == 0);
  REQUIRE(text.out.find("R-gates=0") != std::string::npos);
  REQUIRE(text.out.find("EncryptedRegister") != std::string::npos);

  auto js = run_cli(
      "run --circuit " + bell + " --input 00 --seed 7 --format json",
      "bell_json");
  REQUIRE(js.exit_code == 0);
  const auto report = json::parse(js.out);
  REQUIRE(report["schema"] == "qced-report/1");
  REQUIRE(report["resources"]["r_gate_count"] == 0);
  REQUIRE(report["transcript"]["messages"] == 2);
  // A Bell pair: two equal real amplitudes on |00> and |11>.
  REQUIRE(report["output"]["amplitudes"].size() == 2);
  // Text and JSON carry the same values.
  REQUIRE(text.out.find(report["circuit"]["hash"].get<std::string>()) !=
          std::string::npos);
}

TEST_CASE("identical seeds give identical transcripts") {
  const auto rdemo = circuit_dir() + "/rdemo.qc";
  auto a = run_cli("run --circuit " + rdemo +
                       " --input random:3 --seed 11 --format json",
                   "det_a");
  auto b = run_cli("run --circuit " + rdemo +
                       " --input random:3 --seed 11 --format json",
                   "det_b");
  REQUIRE(a.exit_code == 0);
  REQUIRE(json::parse(a.out)["transcript"]["dump"] ==
          json::parse(b.out)["transcript"]["dump"]);
}

TEST_CASE("malformed circuits exit 2 with a line diagnostic") {
  const auto bad = scratch_dir() / "bad.qc";
  std::ofstream(bad) << "qubits 1\nWIBBLE 0\n";
  auto r = run_cli("run --circuit " + bad.string(), "bad");
  REQUIRE(r.exit_code == 2);
  REQUIRE(r.err.find(":2:") != std::string::npos);
  REQUIRE(r.err.find("WIBBLE") != std::string::npos);

  auto usage = run_cli("run --no-such-flag", "usage");
  REQUIRE(usage.exit_code == 2);
}

TEST_CASE("verify-identities passes on a fresh build") {
  auto r = run_cli("verify-identities", "ident");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("FAIL") == std::string::npos);
  REQUIRE(r.out.find("X-teleportation") != std::string::npos);

  auto js = run_cli("verify-identities --format json", "ident_json");
  const auto report = json::parse(js.out);
  REQUIRE(report["pass"] == true);
  REQUIRE(report["identities"].size() >= 15);
}

TEST_CASE("audit passes for the honest client and fails for the leaky one") {
  const auto rdemo = circuit_dir() + "/rdemo.qc";
  auto good = run_cli("audit --circuit " + rdemo + " --format json", "audit");
  REQUIRE(good.exit_code == 0);
  const auto report = json::parse(good.out);
  REQUIRE(report["pass"] == true);
  REQUIRE(report["mixedness"]["pass"] == true);
  REQUIRE(report["equivalence"]["pass"] == true);
  REQUIRE(report["simulation"]["checks"].size() >= 4);

  auto leaky = run_cli(
      "audit --circuit " + rdemo + " --client-model leaky-x --format json",
      "audit_leaky");
  REQUIRE(leaky.exit_code == 1);
  REQUIRE(json::parse(leaky.out)["pass"] == false);

  auto mc = run_cli("audit --circuit " + rdemo +
                        " --level monte-carlo --samples 2000 --format json",
                    "audit_mc");
  REQUIRE(mc.exit_code == 0);
}

TEST_CASE("client and server modes run a session over TCP") {
  const auto rdemo = circuit_dir() + "/rdemo.qc";
  const std::uint16_t port =
      static_cast<std::uint16_t>(35000 + (::getpid() % 2000));
  auto server = std::async(std::launch::async, [&] {
    return run_cli("run --circuit " + rdemo + " --mode server --port " +
                       std::to_string(port) + " --seed 21 --format json",
                   "srv");
  });
  CommandResult client;
  for (int attempt = 0; attempt < 50; ++attempt) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    client = run_cli("run --circuit " + rdemo + " --mode client --port " +
                         std::to_string(port) +
                         " --input random:2 --seed 34 --format json",
                     "cli");
    if (client.exit_code == 0) break;
  }
  auto served = server.get();
  REQUIRE(client.exit_code == 0);
  REQUIRE(served.exit_code == 0);
  const auto client_report = json::parse(client.out);
  const auto server_report = json::parse(served.out);
  REQUIRE(client_report["server_seed"] == 21);
  REQUIRE(server_report["peer_seed"] == 34);
  REQUIRE(client_report["transcript"]["dump"] ==
          server_report["transcript"]["dump"]);
}
