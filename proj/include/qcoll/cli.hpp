#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qcoll::cli {

enum class OracleKind { None, Copula, Mc };

enum ExitCode : int { kOk = 0, kInputError = 2, kDomainError = 3, kCalibrationError = 4 };

struct RunConfig {
  std::string command;
  std::string market_path;
  std::vector<double> maturities;
  // Percent of equity spot unless `absolute_strikes` is set.
  std::vector<double> strikes;
  bool absolute_strikes = false;
  int n1 = 7;
  int n2 = 7;
  int nt = 6;
  OracleKind oracle = OracleKind::None;
  std::string out_path;
  std::uint64_t seed = 20190325;
  std::uint64_t mc_paths = std::uint64_t{1} << 20;
  bool parallel = false;
  bool json = false;
  std::optional<double> target;
  int reps = 20;

  // Throws InputError when a command's required lists are missing or an
  // order is outside the module caps.
  void validate() const;
};

// Rows of numbers under a fixed header, written as CSV (12 significant
// digits) or as a JSON object {"columns": [...], "rows": [[...], ...]}.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

void write_csv(const Table& table, std::ostream& out);
void write_json(const Table& table, std::ostream& out);

Table cmd_price(const RunConfig& config);
Table cmd_calibrate_rho(const RunConfig& config);
Table cmd_drift_grid(const RunConfig& config);
Table cmd_bench(const RunConfig& config);

// Full command-line entry point: parses argv (with QCOLL_* environment
// overrides), runs the command and maps library errors onto exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qcoll::cli
