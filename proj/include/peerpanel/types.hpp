#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace peerpanel {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Row-major so that per-observation (row) access is the cheap direction.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

}  // namespace peerpanel
