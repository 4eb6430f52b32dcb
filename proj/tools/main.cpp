// ellcomb: fuse location estimates whose cross-correlations are unknown.
//
//   ellcomb fuse --method max-entropy --input doc.json
//   ellcomb rmax --pair 0 1 < doc.json
//   ellcomb sweep --pair 0 1 --grid 64 --rp rmax --input doc.json
//   ellcomb conjecture --n 4 --k 2 --trials 1000 --seed 7
//   ellcomb validate --input doc.json
//
// Exit codes: 0 success, 2 validation failure, 3 numerical infeasibility.

#include "ellcomb/errors.hpp"
#include "ellcomb/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace {

using ellcomb::io::CommandOutput;
using ellcomb::io::InputDocument;

std::string read_all(const std::string& path) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  std::ifstream in(path);
  if (!in) throw ellcomb::InvalidInput("cannot open input file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int emit(const CommandOutput& out) {
  std::cout << out.out;
  std::cerr << out.err;
  return out.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuse location estimates with unknown cross-estimate correlation"};
  app.require_subcommand(1);

  std::string input;
  std::optional<double> tol;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--input,-i", input, "Input JSON document (default: stdin)");
    sub->add_option("--tol", tol, "Override the PSD tolerance")->check(CLI::NonNegativeNumber);
  };

  std::string method;
  auto* fuse = app.add_subcommand("fuse", "Fuse all estimates in the document");
  add_common(fuse);
  fuse->add_option("--method,-m", method, "Fusion algorithm")
      ->check(CLI::IsMember(
          {"convolve", "max-entropy", "max-entropy-pm", "convolve-inflated", "structured"}));

  std::vector<long> pair{0, 1};
  auto* rmax = app.add_subcommand("rmax", "Entropy-maximizing coefficient for one pair");
  add_common(rmax);
  rmax->add_option("--pair", pair, "Estimate indices i j")->expected(2);

  int grid = 64;
  std::string rp = "zero";
  auto* sweep = app.add_subcommand("sweep", "CSV of |P|, alpha, beta, entropy over r_n");
  add_common(sweep);
  sweep->add_option("--pair", pair, "Estimate indices i j")->expected(2);
  sweep->add_option("--grid", grid, "Number of r_n grid points");
  sweep->add_option("--rp", rp, "Predicted coefficient: zero, rmax or a number");

  long n = 3, k = 1, trials = 100;
  std::uint64_t seed = 1;
  auto* conj = app.add_subcommand("conjecture", "Check PSD-ness of R(r_pm) on random ensembles");
  conj->add_option("--n", n, "Estimates per trial");
  conj->add_option("--k", k, "Dimension");
  conj->add_option("--trials", trials, "Number of trials");
  conj->add_option("--seed", seed, "Base seed; trial t uses seed + t");

  auto* validate = app.add_subcommand("validate", "Parse and check an input document");
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ellcomb::io::kValidation;
  }

  if (*conj) {
    return emit(ellcomb::io::cmd_conjecture(n, k, trials, seed));
  }

  InputDocument doc;
  const CommandOutput loaded = ellcomb::io::run_guarded([&] {
    doc = ellcomb::io::parse_input_text(read_all(input), tol);
    return CommandOutput{};
  });
  if (loaded.code != ellcomb::io::kOk) return emit(loaded);

  if (*fuse) {
    if (method.empty()) method = doc.options.method.value_or("convolve");
    return emit(ellcomb::io::cmd_fuse(doc, method));
  }
  if (*rmax) return emit(ellcomb::io::cmd_rmax(doc, pair[0], pair[1]));
  if (*sweep) return emit(ellcomb::io::cmd_sweep(doc, pair[0], pair[1], grid, rp));
  return emit(ellcomb::io::cmd_validate(doc));
}
