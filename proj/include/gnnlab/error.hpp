#pragma once

#include <stdexcept>
#include <string>

namespace gnnlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition on an argument (bad index, bad probability, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced inside a forward or backward pass.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int layer, std::string origin)
      : Error(what), layer_(layer), origin_(std::move(origin)) {}

  int layer() const noexcept { return layer_; }
  const std::string& origin() const noexcept { return origin_; }

 private:
  int layer_;
  std::string origin_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace gnnlab
