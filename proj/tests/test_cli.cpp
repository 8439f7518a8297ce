#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sys/wait.h>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "qcoll/cli.hpp"
#include "qcoll/quanto_pricer.hpp"

using namespace qcoll;
using qcoll::testing::data_path;
using qcoll::testing::fixture;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "qcoll_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    FAIL("missing column " << name);
    return 0;
  }
};

Csv parse_csv(const std::string& text) {
  Csv csv;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(cells, cell, ',')) {
      if (first)
        csv.header.push_back(cell);
      else
        row.push_back(std::strtod(cell.c_str(), nullptr));
    }
    if (!first) csv.rows.push_back(std::move(row));
    first = false;
  }
  return csv;
}

}  // namespace

TEST_CASE("price on the flat market: collocation and constant-drift vols agree") {
  const Outcome r = invoke({"price", "--market", data_path("flat.json"), "--maturities", "0.5,2,5", "--strikes",
                            "70,85,100,115,130"});
  REQUIRE(r.code == 0);
  const Csv csv = parse_csv(r.out);
  CHECK(csv.rows.size() == 15);
  for (const auto& row : csv.rows) {
    CHECK(std::abs(row[csv.col("iv_quanto")] - row[csv.col("iv_adhoc")]) < 1e-6);
    CHECK(row[csv.col("quanto_call")] == doctest::Approx(row[csv.col("adhoc_call")]).epsilon(1e-5));
    CHECK(row[csv.col("spread")] > 0.0);
  }
}

TEST_CASE("price on a skewed market with the copula oracle") {
  const Outcome r = invoke({"price", "--market", data_path("mixed.json"), "--maturities", "0.5,2", "--strikes",
                            "60,100,140", "--oracle", "copula"});
  REQUIRE(r.code == 0);
  const Csv csv = parse_csv(r.out);
  REQUIRE(csv.rows.size() == 6);
  for (const auto& row : csv.rows) CHECK(std::abs(row[csv.col("iv_diff_pts")]) <= 0.10);
}

TEST_CASE("output is deterministic and independent of parallel fan-out") {
  const std::vector<std::string> base{"price", "--market", data_path("neg_skew.json"), "--maturities", "0.5,1,3",
                                      "--strikes", "80,100,120"};
  const Outcome a = invoke(base);
  const Outcome b = invoke(base);
  std::vector<std::string> par = base;
  par.push_back("--parallel");
  const Outcome c = invoke(par);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);

  const auto dir = std::filesystem::temp_directory_path() / "qcoll_cli_test";
  std::filesystem::create_directories(dir);
  std::vector<std::string> to_file = base;
  to_file.insert(to_file.end(), {"--out", (dir / "prices.csv").string()});
  const Outcome d = invoke(to_file);
  CHECK(d.code == 0);
  CHECK(d.out.empty());
  std::ifstream in(dir / "prices.csv");
  std::ostringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == a.out);
}

TEST_CASE("exit codes") {
  const std::string flat = data_path("flat.json");
  SUBCASE("input errors exit 2") {
    CHECK(invoke({"price", "--market", data_path("missing.json"), "--maturities", "1", "--strikes", "100"}).code == 2);
    CHECK(invoke({"price", "--market", flat, "--maturities", "1"}).code == 2);
    CHECK(invoke({"price", "--market", flat, "--maturities", "1", "--strikes", "100", "--oracle", "foo"}).code == 2);
    CHECK(invoke({"price", "--market", flat, "--maturities", "-1", "--strikes", "100"}).code == 2);
    CHECK(invoke({"price", "--market", flat, "--maturities", "1", "--strikes", "100", "--n1", "20"}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"calibrate-rho", "--market", flat, "--maturities", "1"}).code == 2);
  }
  SUBCASE("domain errors exit 3") {
    const Outcome r = invoke({"price", "--market", data_path("pos_skew.json"), "--maturities", "2", "--strikes", "100",
                              "--n1", "16", "--n2", "16"});
    CHECK(r.code == 3);
    CHECK(r.err.find("strike bounds") != std::string::npos);
  }
  SUBCASE("unattainable calibration targets exit 4 and report the interval") {
    const Outcome r = invoke({"calibrate-rho", "--market", flat, "--maturities", "1", "--target", "1000"});
    CHECK(r.code == 4);
    CHECK(r.err.find("attainable interval [") != std::string::npos);
  }
}

TEST_CASE("calibrate-rho") {
  const Market flat = fixture("flat");
  SUBCASE("the unadjusted equity forward gives zero correlation") {
    const double fwd = forward(flat.setup, Asset::Equity, 1.0);
    const Outcome r = invoke({"calibrate-rho", "--market", data_path("flat.json"), "--maturities", "1", "--target",
                              std::to_string(fwd)});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(std::abs(csv.rows.at(0)[csv.col("rho")]) < 1e-6);
  }
  SUBCASE("round trip through the fixture correlation") {
    const Market mk = fixture("pos_skew");
    const double target = quanto_forward(build_context(mk.setup, mk.equity, mk.fx, 2.0));
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", target);
    const Outcome r = invoke({"calibrate-rho", "--market", data_path("pos_skew.json"), "--maturities", "2", "--target",
                              buf});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.rows.at(0)[csv.col("rho")] == doctest::Approx(0.7).epsilon(1e-6));
  }
}

TEST_CASE("drift-grid") {
  SUBCASE("flat market: rho sigma_S sigma_X everywhere") {
    const Outcome r = invoke({"drift-grid", "--market", data_path("flat.json"), "--maturities", "0.5,2", "--strikes",
                              "60,80,100,120,150"});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    CHECK(csv.header == std::vector<std::string>{"S", "t=0.5", "t=2"});
    for (const auto& row : csv.rows)
      for (std::size_t j = 1; j < row.size(); ++j) CHECK(row[j] == doctest::Approx(0.7 * 0.2 * 0.1).epsilon(1e-4));
  }
  SUBCASE("zero correlation gives zero drift") {
    const auto dir = std::filesystem::temp_directory_path() / "qcoll_cli_test";
    std::filesystem::create_directories(dir);
    nlohmann::json doc = nlohmann::json::parse(std::ifstream(data_path("mixed.json")));
    doc["setup"]["rho"] = 0.0;
    std::ofstream(dir / "mixed_rho0.json") << doc.dump();
    const Outcome r = invoke({"drift-grid", "--market", (dir / "mixed_rho0.json").string(), "--maturities", "1",
                              "--strikes", "70,100,130"});
    REQUIRE(r.code == 0);
    for (const auto& row : parse_csv(r.out).rows) CHECK(row[1] == 0.0);
  }
  SUBCASE("skewed market against the oracle columns") {
    const Outcome r = invoke({"drift-grid", "--market", data_path("neg_skew.json"), "--maturities", "0.5,2",
                              "--strikes", "50,75,100,125,150", "--oracle", "copula"});
    REQUIRE(r.code == 0);
    const Csv csv = parse_csv(r.out);
    REQUIRE(csv.header.size() == 5);
    for (const auto& row : csv.rows) {
      CHECK(std::abs(row[1] / row[3] - 1.0) < 0.02);
      CHECK(std::abs(row[2] / row[4] - 1.0) < 0.02);
    }
  }
}

TEST_CASE("JSON output carries the same numbers") {
  const std::vector<std::string> args{"price", "--market", data_path("mixed.json"), "--maturities", "1", "--strikes",
                                      "90,110"};
  const Outcome csv = invoke(args);
  std::vector<std::string> jargs = args;
  jargs.push_back("--json");
  const Outcome js = invoke(jargs);
  REQUIRE(js.code == 0);
  const nlohmann::json doc = nlohmann::json::parse(js.out);
  const Csv table = parse_csv(csv.out);
  CHECK(doc["columns"].get<std::vector<std::string>>() == table.header);
  REQUIRE(doc["rows"].size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < table.header.size(); ++j)
      CHECK(doc["rows"][i][j].get<double>() == doctest::Approx(table.rows[i][j]).epsilon(1e-11));
}

TEST_CASE("environment variables supply defaults") {
  ::setenv("QCOLL_MARKET", data_path("flat.json").c_str(), 1);
  ::setenv("QCOLL_STRIKES", "90,100,110", 1);
  const Outcome r = invoke({"price", "--maturities", "1"});
  const Outcome flagged = invoke({"price", "--maturities", "1", "--strikes", "100"});
  ::unsetenv("QCOLL_MARKET");
  ::unsetenv("QCOLL_STRIKES");
  REQUIRE(r.code == 0);
  CHECK(parse_csv(r.out).rows.size() == 3);
  REQUIRE(flagged.code == 0);
  CHECK(parse_csv(flagged.out).rows.size() == 1);
}

TEST_CASE("bench reports four shapes with amortised strike pricing") {
  const Outcome r = invoke({"bench", "--reps", "10"});
  REQUIRE(r.code == 0);
  const Csv csv = parse_csv(r.out);
  REQUIRE(csv.rows.size() == 4);
  const std::size_t per = csv.col("per_option_seconds");
  CHECK(csv.rows[0][csv.col("options")] == 1.0);
  CHECK(csv.rows[3][csv.col("options")] == 1000.0);
  CHECK(csv.rows[1][per] < csv.rows[0][per]);
  CHECK(invoke({"bench", "--reps", "3"}).code == 2);
}

TEST_CASE("the installed executable maps errors onto its exit status") {
  const std::string exe = QCOLL_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  const int ok = std::system((exe + " price --market " + data_path("flat.json") +
                              " --maturities 1 --strikes 100" + quiet).c_str());
  const int bad = std::system((exe + " price --market " + data_path("flat.json") + " --maturities 1" + quiet).c_str());
  REQUIRE(WIFEXITED(ok));
  REQUIRE(WIFEXITED(bad));
  CHECK(WEXITSTATUS(ok) == 0);
  CHECK(WEXITSTATUS(bad) == 2);
}
