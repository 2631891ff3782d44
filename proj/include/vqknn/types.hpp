#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace vqknn {

using Real = double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using IndexMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

// Thrown when an operation is called with arguments violating its contract
// (shape mismatches, degenerate inputs, invalid configuration values).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace vqknn
