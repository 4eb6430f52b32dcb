#pragma once

#include <stdexcept>
#include <string>

namespace ellcomb {

// Bad user data: non-finite entries, shape mismatches, missing metadata.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mathematically valid request that the numbers cannot satisfy
// (e.g. a square root of an indefinite matrix).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A constructed joint covariance or normal matrix failed the PSD/PD gate.
class Infeasible : public std::runtime_error {
 public:
  Infeasible(const std::string& what, double min_eigenvalue)
      : std::runtime_error(what), min_eigenvalue_(min_eigenvalue) {}

  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

}  // namespace ellcomb
