#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace jivekit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// true = observed
using MissingMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A weighted regression step had a zero denominator.
class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside one phase of the decomposition.
class PhaseError : public std::runtime_error {
 public:
  PhaseError(std::string phase, int block, const std::string& what)
      : std::runtime_error(format(phase, block, what)),
        phase_(std::move(phase)),
        block_(block) {}

  const std::string& phase() const { return phase_; }
  // -1 when the failure is not tied to one block
  int block() const { return block_; }

 private:
  static std::string format(const std::string& phase, int block, const std::string& what) {
    std::string s = phase;
    if (block >= 0) s += " (block " + std::to_string(block) + ")";
    return s + ": " + what;
  }

  std::string phase_;
  int block_;
};

// Checks the MissingMask invariants against a matrix shape: matching
// dimensions and at least two observed cells in every row and column.
void validate_mask(const MissingMask& mask, Eigen::Index rows, Eigen::Index cols);

// Copy of x with masked-out cells replaced by zero.
Matrix zero_fill(const Matrix& x, const MissingMask* mask);

}  // namespace jivekit
