#include "ellcomb/io.hpp"

#include "ellcomb/errors.hpp"
#include "ellcomb/pairwise.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ellcomb::io {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw InvalidInput(where + ": " + msg);
}

Vector parse_vector(const json& j, Eigen::Index k, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != k) {
    fail(where, "expected an array of " + std::to_string(k) + " numbers");
  }
  Vector v(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const json& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) fail(where, "expected numbers");
    v(i) = x.get<double>();
  }
  if (!v.allFinite()) fail(where, "non-finite entry");
  return v;
}

SymMatrix parse_matrix(const json& j, Eigen::Index k, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != k) {
    fail(where, "expected a " + std::to_string(k) + "x" + std::to_string(k) + " array of arrays");
  }
  GenMatrix m(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    m.row(i) = parse_vector(j[static_cast<std::size_t>(i)], k, where).transpose();
  }
  return SymMatrix(m);
}

void require_psd(const SymMatrix& m, std::optional<double> tol, const std::string& where) {
  const PsdReport rep = check_psd(m, tol);
  if (!rep.is_psd) {
    std::ostringstream os;
    os << "not positive semidefinite, min eigenvalue " << format_double(rep.min_eigenvalue)
       << " (tolerance " << format_double(rep.tolerance_used) << ")";
    fail(where, os.str());
  }
}

void require_pair(const InputDocument& doc, long i, long j) {
  const long n = static_cast<long>(doc.estimates.size());
  if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
    std::ostringstream os;
    os << "invalid pair (" << i << ", " << j << ") for " << n << " estimates";
    throw InvalidInput(os.str());
  }
}

json to_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

CommandOutput ok_json(const json& doc) { return {kOk, doc.dump(2) + "\n", {}}; }

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

InputDocument parse_input(const json& doc, std::optional<double> tol_override) {
  if (!doc.is_object()) fail("input", "expected a JSON object");
  InputDocument out;

  if (doc.contains("options")) {
    const json& o = doc.at("options");
    if (!o.is_object()) fail("options", "expected an object");
    if (o.contains("gamma")) out.options.gamma = o.at("gamma").get<double>();
    if (o.contains("method")) out.options.method = o.at("method").get<std::string>();
    if (o.contains("rule")) out.options.rule = o.at("rule").get<std::string>();
    if (o.contains("tol")) out.options.tol = o.at("tol").get<double>();
    if (o.contains("seed")) out.options.seed = o.at("seed").get<std::uint64_t>();
  }
  if (tol_override) out.options.tol = tol_override;
  if (out.options.tol && !(*out.options.tol >= 0.0)) fail("options.tol", "must be >= 0");
  const std::optional<double> tol = out.options.tol;

  if (!doc.contains("k") || !doc.at("k").is_number_integer()) fail("input", "missing integer k");
  out.k = doc.at("k").get<Eigen::Index>();
  if (out.k < 1) fail("input", "k must be >= 1");
  if (!doc.contains("estimates") || !doc.at("estimates").is_array() ||
      doc.at("estimates").empty()) {
    fail("input", "estimates must be a non-empty array");
  }

  const json& list = doc.at("estimates");
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "estimate " + std::to_string(i);
    const json& e = list[i];
    if (!e.is_object() || !e.contains("y") || !e.contains("E")) {
      fail(where, "needs fields y and E");
    }
    Estimate est;
    est.y = parse_vector(e.at("y"), out.k, where + ".y");
    est.E = parse_matrix(e.at("E"), out.k, where + ".E");
    require_psd(est.E, tol, where + ".E");
    if (e.contains("t")) {
      if (!e.at("t").is_number()) fail(where + ".t", "expected a number");
      est.t = e.at("t").get<double>();
      if (!std::isfinite(*est.t)) fail(where + ".t", "non-finite");
    }
    if (e.contains("instrument")) est.instrument = e.at("instrument").get<std::string>();
    if (e.contains("components")) {
      const json& comps = e.at("components");
      if (!comps.is_array()) fail(where + ".components", "expected an array of matrices");
      for (std::size_t a = 0; a < comps.size(); ++a) {
        const std::string cw = where + ".components[" + std::to_string(a) + "]";
        est.components.push_back(parse_matrix(comps[a], out.k, cw));
        require_psd(est.components.back(), tol, cw);
      }
    }
    try {
      validate_estimate(est, tol);
    } catch (const InvalidInput& err) {
      fail(where, err.what());
    }
    out.estimates.push_back(std::move(est));
  }
  return out;
}

InputDocument parse_input_text(const std::string& text, std::optional<double> tol_override) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    throw InvalidInput(std::string("input is not valid JSON: ") + err.what());
  }
  try {
    return parse_input(doc, tol_override);
  } catch (const json::exception& err) {
    throw InvalidInput(std::string("malformed input: ") + err.what());
  }
}

json to_json(const GenMatrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json to_json(const FusionResult& res) {
  json out;
  out["method"] = res.method;
  out["x_hat"] = to_json(res.x_hat);
  out["P"] = to_json(res.P.mat());
  out["det_P"] = determinant(res.P.mat());
  out["entropy"] = res.entropy;
  out["coefficients_used"] = to_json(res.coefficients);
  json weights = json::array();
  for (const auto& w : res.weights) weights.push_back(to_json(w));
  out["weights"] = std::move(weights);
  if (!res.notes.empty()) out["notes"] = res.notes;
  return out;
}

RpSpec parse_rp(const std::string& text) {
  if (text == "zero") return {RpSpec::Kind::Zero, 0.0};
  if (text == "rmax") return {RpSpec::Kind::Rmax, 0.0};
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v >= 0.0 && v < 1.0)) {
    throw InvalidInput("--rp must be 'zero', 'rmax' or a number in [0, 1)");
  }
  return {RpSpec::Kind::Value, v};
}

std::vector<SweepRecord> sweep_pair(const PairwiseGeometry& g, double r_p, int grid) {
  if (grid < 2) throw InvalidInput("sweep grid must be >= 2");
  const double r_max = solve_rmax(g).r_max;
  std::vector<SweepRecord> rows;
  rows.reserve(static_cast<std::size_t>(grid));
  for (int m = 0; m < grid; ++m) {
    SweepRecord rec;
    rec.r_p = r_p;
    rec.r_n = static_cast<double>(m) / grid;
    const SymMatrix p = mismatch_covariance(g, r_p, rec.r_n);
    rec.det_P = determinant(p.mat());
    rec.alpha = pairwise_alpha(g, r_p, rec.r_n);
    rec.beta = pairwise_beta(g, r_p, rec.r_n);
    rec.entropy = gaussian_entropy(p);
    rec.in_recommended_region = rec.r_n <= r_max;
    rows.push_back(rec);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRecord>& rows) {
  std::string out = "r_p,r_n,det_P,alpha,beta,entropy,in_recommended_region\n";
  for (const auto& r : rows) {
    out += format_double(r.r_p) + "," + format_double(r.r_n) + "," + format_double(r.det_P) +
           "," + format_double(r.alpha) + "," + format_double(r.beta) + "," +
           format_double(r.entropy) + "," + (r.in_recommended_region ? "true" : "false") + "\n";
  }
  return out;
}

StructuredModel structured_model_for(const InputDocument& doc) {
  const std::size_t parts = doc.estimates.front().components.size();
  for (std::size_t i = 0; i < doc.estimates.size(); ++i) {
    if (doc.estimates[i].components.size() != parts || parts == 0) {
      throw InvalidInput("structured fusion: estimate " + std::to_string(i) +
                         " must carry the same non-empty list of components as the others");
    }
  }
  ComponentRule rule;
  if (doc.options.rule) {
    rule.rule = parse_coefficient_rule(*doc.options.rule);
  } else {
    rule.rule = doc.options.gamma ? CoefficientRule::TimeDecay : CoefficientRule::PairwiseMax;
  }
  if (rule.rule == CoefficientRule::TimeDecay) {
    if (!doc.options.gamma) throw InvalidInput("time-decay rule requires options.gamma");
    rule.gamma = *doc.options.gamma;
  }
  StructuredModel model;
  model.rules.assign(parts - 1, rule);
  return model;
}

CommandOutput run_guarded(const std::function<CommandOutput()>& body) {
  try {
    return body();
  } catch (const InvalidInput& e) {
    return {kValidation, {}, std::string("validation error: ") + e.what() + "\n"};
  } catch (const json::exception& e) {
    return {kValidation, {}, std::string("validation error: ") + e.what() + "\n"};
  } catch (const Infeasible& e) {
    return {kInfeasible, {}, std::string("infeasible: ") + e.what() + "\n"};
  } catch (const DomainError& e) {
    return {kInfeasible, {}, std::string("numerical error: ") + e.what() + "\n"};
  }
}

CommandOutput cmd_fuse(const InputDocument& doc, const std::string& method) {
  return run_guarded([&] {
    FusionResult res;
    if (method == "convolve") {
      res = fuse_convolve(doc.estimates);
    } else if (method == "max-entropy") {
      res = fuse_max_entropy(doc.estimates, MaxEntropyMode::Exact);
    } else if (method == "max-entropy-pm") {
      res = fuse_max_entropy(doc.estimates, MaxEntropyMode::PairwiseMax);
    } else if (method == "convolve-inflated") {
      res = fuse_convolve_inflated(doc.estimates);
    } else if (method == "structured") {
      res = fuse_structured(doc.estimates, structured_model_for(doc));
    } else {
      throw InvalidInput("unknown method '" + method + "'");
    }
    return ok_json(to_json(res));
  });
}

CommandOutput cmd_rmax(const InputDocument& doc, long i, long j) {
  return run_guarded([&] {
    require_pair(doc, i, j);
    const RmaxResult res = solve_rmax(build_geometry(doc.estimates[static_cast<std::size_t>(i)].E,
                                                     doc.estimates[static_cast<std::size_t>(j)].E));
    json out;
    out["pair"] = {i, j};
    out["r_max"] = res.r_max;
    out["method"] = to_string(res.method);
    out["candidates"] = to_json(res.candidates);
    out["monotone_interval_verified"] = res.monotone_interval_verified;
    out["degenerate"] = res.degenerate;
    return ok_json(out);
  });
}

CommandOutput cmd_sweep(const InputDocument& doc, long i, long j, int grid, const std::string& rp) {
  return run_guarded([&] {
    require_pair(doc, i, j);
    if (grid < 2) throw InvalidInput("--grid must be >= 2");
    const RpSpec spec = parse_rp(rp);
    const PairwiseGeometry g = build_geometry(doc.estimates[static_cast<std::size_t>(i)].E,
                                              doc.estimates[static_cast<std::size_t>(j)].E);
    double r_p = spec.value;
    if (spec.kind == RpSpec::Kind::Rmax) r_p = solve_rmax(g).r_max;
    return CommandOutput{kOk, sweep_csv(sweep_pair(g, r_p, grid)), {}};
  });
}

CommandOutput cmd_conjecture(long n, long k, long trials, std::uint64_t seed) {
  return run_guarded([&] {
    if (n < 2 || k < 1 || trials < 1) {
      throw InvalidInput("conjecture: need --n >= 2, --k >= 1, --trials >= 1");
    }
    const ConjectureReport rep = psd_conjecture_trial(seed, n, k, trials);
    json out;
    out["n"] = n;
    out["k"] = k;
    out["seed"] = seed;
    out["trials"] = rep.trials;
    out["violations"] = rep.violations;
    out["worst_min_eigenvalue"] = rep.worst_min_eigenvalue;
    out["worst_relative_eigenvalue"] = rep.worst_relative_eigenvalue;
    out["worst_seed"] = rep.worst_seed;
    return ok_json(out);
  });
}

CommandOutput cmd_validate(const InputDocument& doc) {
  return run_guarded([&] {
    json out;
    out["valid"] = true;
    out["n"] = doc.estimates.size();
    out["k"] = doc.k;
    json list = json::array();
    for (std::size_t i = 0; i < doc.estimates.size(); ++i) {
      const PsdReport rep = check_psd(doc.estimates[i].E, doc.options.tol);
      list.push_back({{"index", i},
                      {"min_eigenvalue", rep.min_eigenvalue},
                      {"is_pd", rep.is_pd},
                      {"components", doc.estimates[i].components.size()}});
    }
    out["estimates"] = std::move(list);
    return ok_json(out);
  });
}

}  // namespace ellcomb::io
