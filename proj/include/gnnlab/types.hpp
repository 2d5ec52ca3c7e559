#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gnnlab {

using Index = std::int64_t;

// Node features are stored one node per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;

// Non-fatal notices collected by construction routines.
using Warnings = std::vector<std::string>;

}  // namespace gnnlab
