#pragma once

#include "ellcomb/fusion.hpp"
#include "ellcomb/gls.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ellcomb::io {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kValidation = 2, kInfeasible = 3 };

struct InputOptions {
  std::optional<double> gamma;
  std::optional<std::string> method;
  std::optional<std::string> rule;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
};

struct InputDocument {
  Eigen::Index k = 0;
  std::vector<Estimate> estimates;
  InputOptions options;
};

/// Parses and validates an input document. Matrices are symmetrized and PSD
/// checked; failures throw InvalidInput naming the estimate index and the
/// offending eigenvalue. tol_override wins over options.tol.
InputDocument parse_input(const json& doc, std::optional<double> tol_override = std::nullopt);
InputDocument parse_input_text(const std::string& text,
                               std::optional<double> tol_override = std::nullopt);

json to_json(const GenMatrix& m);
json to_json(const Vector& v);
json to_json(const FusionResult& res);

/// Sweep value for r_p: "zero", "rmax", or a number in [0, 1).
struct RpSpec {
  enum class Kind { Zero, Rmax, Value } kind = Kind::Zero;
  double value = 0.0;
};
RpSpec parse_rp(const std::string& text);

struct SweepRecord {
  double r_p = 0.0;
  double r_n = 0.0;
  double det_P = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double entropy = 0.0;
  bool in_recommended_region = false;
};

/// Rows for r_n = m / grid, m = 0..grid-1 (r_n = 1 is excluded, R is singular there).
std::vector<SweepRecord> sweep_pair(const PairwiseGeometry& g, double r_p, int grid);
std::string sweep_csv(const std::vector<SweepRecord>& rows);

/// Default structured model for a document: every correlated component uses
/// options.rule, or time-decay when gamma is given, else pairwise-max.
StructuredModel structured_model_for(const InputDocument& doc);

struct CommandOutput {
  int code = kOk;
  std::string out;
  std::string err;
};

// Subcommands. Each catches library errors and maps them onto exit codes:
// InvalidInput -> 2, DomainError / Infeasible -> 3.
CommandOutput cmd_fuse(const InputDocument& doc, const std::string& method);
CommandOutput cmd_rmax(const InputDocument& doc, long i, long j);
CommandOutput cmd_sweep(const InputDocument& doc, long i, long j, int grid, const std::string& rp);
CommandOutput cmd_conjecture(long n, long k, long trials, std::uint64_t seed);
CommandOutput cmd_validate(const InputDocument& doc);

/// Runs `body`, mapping library exceptions (including JSON parse errors) onto
/// exit codes.
CommandOutput run_guarded(const std::function<CommandOutput()>& body);

std::string format_double(double v);

}  // namespace ellcomb::io
