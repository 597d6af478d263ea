#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(TRIMCP_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Outcome o;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) o.out.append(buf, n);
  const int status = pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path scratch() {
  const fs::path d = fs::temp_directory_path() / "trimcp_cli_test";
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

}  // namespace

TEST_CASE("lfs reproduces the finite-sample table") {
  const Outcome o = run("lfs --m 320 --mu 0.95 --alpha 0.1 --format csv");
  REQUIRE(o.code == 0);
  CHECK(o.out ==
        "d,L_fs,asymptotic\n0.000,0.9015,0.9000\n0.002,0.8995,0.8980\n0.005,0.8965,0.8950\n"
        "0.010,0.8915,0.8900\n0.020,0.8815,0.8800\n0.050,0.8515,0.8500\n");
  const Outcome j = run("--format json lfs --d-grid 0.01");
  REQUIRE(j.code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["rows"][0]["L_fs"].get<double>() == doctest::Approx(0.8915).epsilon(5e-5));
}

TEST_CASE("exit codes") {
  CHECK(run("").code == 2);
  CHECK(run("lfs --bogus 1").code == 2);
  CHECK(run("simulate --config /nonexistent/file.json").code != 0);
  const fs::path d = scratch();
  write_file(d / "noseed.json", R"({"schema_version": 1, "reps": 2})");
  CHECK(run("simulate --config " + (d / "noseed.json").string()).code == 2);
  write_file(d / "badkey.json", R"({"schema_version": 1, "seed": 1, "colour": "red"})");
  CHECK(run("diagnose --config " + (d / "badkey.json").string()).code == 2);
  write_file(d / "broken.json", "{ not json");
  CHECK(run("diagnose --config " + (d / "broken.json").string()).code == 2);
  // A numeric domain error (retention probability zero) maps to exit code 3.
  CHECK(run("lfs --mu 0").code == 3);
  // The trimming threshold removes everything.
  write_file(d / "degenerate.json",
             R"({"schema_version": 1, "family": "custom_discrete", "seed": 1, "reps": 2, "m": 20,
                 "threshold": {"kind": "explicit", "t": -5},
                 "discrete": {"clean": [{"a": 1, "s": 0, "mass": 1}], "dirty": [{"a": 2, "s": 0, "mass": 1}]}})");
  CHECK(run("diagnose --config " + (d / "degenerate.json").string()).code == 3);
}

TEST_CASE("certify subcommand") {
  Outcome o = run("certify --mode binomial --covered 20 --n 20 --beta 0.05");
  REQUIRE(o.code == 0);
  auto c = nlohmann::json::parse(o.out);
  CHECK(c["lower_bound"].get<double>() == doctest::Approx(0.8609).epsilon(1e-4));
  CHECK(c["route"] == "binomial_audit");

  o = run("certify --mode componentwise --alpha 0.1 --L-c 0.9 --U-d 1 --B-delta 0.01 --B-Q 1 --eps-max 0.2");
  REQUIRE(o.code == 0);
  c = nlohmann::json::parse(o.out);
  CHECK(c["lower_bound"].get<double>() == doctest::Approx(0.6748).epsilon(1e-4));

  const fs::path d = scratch();
  write_file(d / "sel.txt", "0.1\n0.5\n0.9\n1.3\n");
  write_file(d / "aud.txt", "0.1 0.5 0.9 1.3\n");
  o = run("certify --mode ks --selected " + (d / "sel.txt").string() + " --audit " + (d / "aud.txt").string() +
          " --tau 1.3 --beta 0.05");
  REQUIRE(o.code == 0);
  c = nlohmann::json::parse(o.out);
  CHECK(c["lower_bound"].get<double>() == doctest::Approx(1.0 - std::sqrt(std::log(20.0) / 8.0)));
  CHECK(run("certify --mode binomial --n 20").code == 2);
}

TEST_CASE("simulate, then re-emit tables from the saved results") {
  const fs::path d = scratch();
  write_file(d / "runs.json", R"({"schema_version": 1, "runs": [
      {"name": "a", "family": "custom_discrete", "reps": 30, "m": 40, "threshold": {"kind": "explicit", "t": 0.5},
       "discrete": {"clean": [{"a": 1, "s": 0, "mass": 0.5}, {"a": 2, "s": 0, "mass": 0.5}],
                    "dirty": [{"a": 9, "s": 1, "mass": 1}]}},
      {"name": "b", "family": "custom_discrete", "reps": 30, "m": 40, "anomaly": "none",
       "discrete": {"clean": [{"a": 1, "s": 0, "mass": 0.5}, {"a": 2, "s": 0, "mass": 0.5}],
                    "dirty": [{"a": 9, "s": 1, "mass": 1}]}}]})");
  const fs::path results = d / "results.json";
  const Outcome sim = run("--seed 12345 --format json --out " + results.string() + " simulate --config " +
                          (d / "runs.json").string());
  REQUIRE(sim.code == 0);
  const auto doc = nlohmann::json::parse(std::ifstream(results));
  CHECK(doc["results"].size() == 2);

  const Outcome csv_direct = run("--seed 12345 --format csv simulate --config " + (d / "runs.json").string());
  const Outcome csv_again = run("--format csv tables --in " + results.string());
  REQUIRE(csv_direct.code == 0);
  REQUIRE(csv_again.code == 0);
  CHECK(csv_direct.out == csv_again.out);
  std::istringstream lines(csv_again.out);
  int count = 0;
  for (std::string line; std::getline(lines, line);) ++count;
  CHECK(count == 3);

  // Determinism across thread counts at the CLI level.
  const Outcome t1 = run("--seed 7 --threads 1 simulate --config " + (d / "runs.json").string());
  const Outcome t4 = run("--seed 7 --threads 4 simulate --config " + (d / "runs.json").string());
  CHECK(t1.out == t4.out);
}
