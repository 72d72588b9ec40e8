#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "psc/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct Output {
  int code = -1;
  std::string text;
};

Output psclab(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "psc_cli_output.txt";
  const std::string cmd = std::string("\"") + PSCLAB_EXE + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Output out;
  out.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  out.text = ss.str();
  return out;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("psc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto unknown = psclab("bogus");
  CHECK(unknown.code == 2);
  CHECK(unknown.text.find("Usage") != std::string::npos);
  CHECK(psclab("").code == 2);
  CHECK(psclab("cubic --n three").code == 2);
  CHECK(psclab("cubic --n 3 --measure sideways").code == 2);
}

TEST_CASE("cubic reproduces the round-sphere integral") {
  const auto out = psclab("cubic --n 3 --measure paper");
  REQUIRE(out.code == 0);
  const auto j = nlohmann::json::parse(out.text);
  CHECK(std::abs(j["radial_integral"].get<double>() + 14 * std::numbers::pi / 9) < 1e-8);
  CHECK(j["F3"].get<double>() < 0);

  const auto geo = nlohmann::json::parse(psclab("cubic --n 3 --measure geometric").text);
  CHECK(std::abs(geo["radial_integral"].get<double>()) < 1e-10);

  CHECK(psclab("cubic --n 3 --measure paper --eps 0.05 --cells 2048").code == 1);
}

TEST_CASE("malformed config leaves no output") {
  const auto dir = scratch("bad");
  const auto out_dir = dir / "out";
  write(dir / "bad.toml", "[grid]\ndim = 3\nn_cells = \"many\"\n[output]\ndir = \"" + out_dir.string() + "\"\n");
  CHECK(psclab("flow run --config " + (dir / "bad.toml").string()).code == 2);
  CHECK_FALSE(fs::exists(out_dir));

  write(dir / "bad2.toml", "[metric]\nfamily = \"eps:0.9\"\n[output]\ndir = \"" + out_dir.string() + "\"\n");
  CHECK(psclab("flow run --config " + (dir / "bad2.toml").string()).code == 1);
  CHECK_FALSE(fs::exists(out_dir));
  CHECK(psclab("flow run --config " + (dir / "missing.toml").string()).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("flow run on the critical round sphere") {
  const auto dir = scratch("critical");
  write(dir / "critical.toml", R"([grid]
dim = 3
n_cells = 64
[f]
spec = "critical"
[integrator]
horizon = 0.05
stop_tol = 0
[output]
cadence = 5
)");
  const auto out = psclab("flow run --config " + (dir / "critical.toml").string() + " --out " + (dir / "out").string());
  REQUIRE(out.code == 0);
  const auto cols = psc::read_csv_columns((dir / "out" / "trace.csv").string());
  REQUIRE(cols.at("grad_l2").size() > 1);
  for (double g : cols.at("grad_l2")) CHECK(g < 1e-10);
  CHECK(fs::exists(dir / "out" / "run.json"));

  // Re-run from the record.
  const auto again =
      psclab("flow run --config " + (dir / "out" / "run.json").string() + " --out " + (dir / "again").string());
  CHECK(again.code == 0);
  CHECK(psc::read_csv_columns((dir / "again" / "trace.csv").string()).at("E") == cols.at("E"));

  const auto fit = psclab("lojasiewicz --input " + (dir / "out" / "trace.csv").string());
  CHECK(fit.code == 1);
  fs::remove_all(dir);
}

TEST_CASE("fit and spectrum subcommands") {
  const auto dir = scratch("fit");
  std::ofstream csv(dir / "trace.csv");
  csv.precision(17);
  csv << "t,dist_l2\n";
  for (int i = 0; i < 40; ++i) csv << 0.25 * i << ',' << 2 * std::exp(-0.25 * 1.5 * i) << '\n';
  csv.close();
  const auto out = psclab("fit --input " + (dir / "trace.csv").string() + " --model exponential");
  REQUIRE(out.code == 0);
  const auto j = nlohmann::json::parse(out.text);
  CHECK(j["rate"].get<double>() == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(psclab("fit --input " + (dir / "trace.csv").string() + " --column nope").code == 2);

  const auto spec = psclab("spectrum --n 3 --cells 32");
  REQUIRE(spec.code == 0);
  CHECK(spec.text.rfind("index,eigenvalue,classification", 0) == 0);
  CHECK(spec.text.find(",kernel") != std::string::npos);

  const auto ans = psclab("ansatz --p 3 --Fp 2 --T 10 --emit csv --samples 5");
  REQUIRE(ans.code == 0);
  CHECK(ans.text.find("0.13333333333333") != std::string::npos);
  CHECK(psclab("ansatz --p 3 --Fp -1 --T 10").code == 1);

  const auto as3 = psclab("as3 --eps 0.05");
  REQUIRE(as3.code == 0);
  CHECK(nlohmann::json::parse(as3.text).contains("verdict"));
  fs::remove_all(dir);
}
