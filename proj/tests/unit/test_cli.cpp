#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "pmpthermo/cli.hpp"

using pmpthermo::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "pmp-thermo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> lines;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  return lines;
}

std::vector<double> column(const std::string& csv, std::size_t index) {
  std::vector<double> values;
  const auto lines = data_lines(csv);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string cell;
    for (std::size_t k = 0; k <= index; ++k) std::getline(row, cell, ',');
    values.push_back(cell.empty() ? NAN : std::stod(cell));
  }
  return values;
}

}  // namespace

TEST_CASE("engine prints the solution") {
  const auto r = call({"engine", "--z", "0.3"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  for (const char* key : {"z", "K_star", "p_star", "u_c_star", "u_h_star", "eta_star", "eta_carnot",
                          "eta_curzon_ahlborn", "g", "theta"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["eta_carnot"].get<double>() == doctest::Approx(0.7));
  CHECK(r.err.rfind("# units:", 0) == 0);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(call({"engine", "--z", "1.5"}).code == 2);
  CHECK(call({"engine"}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"sweep", "--z-min", "0.6", "--z-max", "0.2"}).code == 2);
  CHECK(call({"isotherm", "--branch", "warm", "--u0", "1", "--u1", "2"}).code == 2);
  CHECK(call({"trajectory", "--K", "-0.05", "--deadline", "10"}).code == 2);
  CHECK(call({"engine", "--z", "0.3", "--beta-c", "-1"}).code == 2);
}

TEST_CASE("unreachable endpoints exit with 3") {
  const auto r = call({"trajectory", "--p-out", "0.9"});
  CHECK(r.code == 3);
  CHECK(r.err.find("infeasible") != std::string::npos);
  CHECK(call({"isotherm", "--branch", "cold", "--u0", "6", "--u1", "1"}).code == 3);
}

TEST_CASE("sweep columns") {
  const auto r = call({"sweep", "--z-min", "0.1", "--z-max", "0.9", "--steps", "9"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("# units:", 0) == 0);
  CHECK(data_lines(r.out).front() == "z,g,eta_star,eta_ca,eta_carnot");
  const auto z = column(r.out, 0), g = column(r.out, 1), eta = column(r.out, 2), carnot = column(r.out, 4);
  REQUIRE(z.size() == 9);
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(carnot[i] == doctest::Approx(1.0 - z[i]).epsilon(1e-15));
    CHECK(eta[i] <= carnot[i]);
    if (i > 0) CHECK(g[i] < g[i - 1]);
  }
}

TEST_CASE("isotherm csv directions") {
  const auto r = call({"isotherm", "--branch", "cold", "--z", "0.3", "--K", "-0.05", "--u0", "1", "--u1", "6"});
  REQUIRE(r.code == 0);
  const auto p = column(r.out, 2), heat = column(r.out, 5);
  for (std::size_t i = 2; i + 1 < p.size(); ++i) {
    CHECK(p[i] < p[i - 1]);
    CHECK(heat[i] > heat[i - 1]);
  }
}

TEST_CASE("outputs are byte-identical across runs") {
  const std::vector<std::string> args{"trajectory", "--cycles", "1", "--points", "100"};
  const auto a = call(args), b = call(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("unit flags rescale the output") {
  const auto base = nlohmann::json::parse(call({"engine", "--z", "0.3"}).out);
  const auto scaled = nlohmann::json::parse(call({"engine", "--z", "0.3", "--beta-c", "2", "--gamma", "3"}).out);
  CHECK(scaled["u_c_star"].get<double>() == doctest::Approx(base["u_c_star"].get<double>() / 2.0));
  CHECK(scaled["K_star"].get<double>() == doctest::Approx(base["K_star"].get<double>() * 1.5));
  CHECK(scaled["eta_star"] == base["eta_star"]);
}

TEST_CASE("config file values yield to flags") {
  const auto dir = std::filesystem::temp_directory_path() / "pmp_thermo_cli_test";
  std::filesystem::create_directories(dir);
  const auto cfg = dir / "engine.cfg";
  std::ofstream(cfg) << "# engine settings\nz = 0.5\nbeta-c = 2\n";
  const auto from_file = nlohmann::json::parse(call({"engine", "--config", cfg.string()}).out);
  CHECK(from_file["z"].get<double>() == 0.5);
  const auto flagged = nlohmann::json::parse(call({"engine", "--config", cfg.string(), "--z", "0.3"}).out);
  CHECK(flagged["z"].get<double>() == 0.3);
  CHECK(call({"engine", "--config", (dir / "missing.cfg").string()}).code == 2);

  const auto out = dir / "engine.json";
  REQUIRE(call({"engine", "--z", "0.3", "-o", out.string()}).code == 0);
  CHECK(std::filesystem::exists(out));
  std::filesystem::remove_all(dir);
}
