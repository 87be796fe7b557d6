#pragma once

#include <Eigen/Dense>

namespace cbm {

/// Pooled embeddings and every derived vector are held in double precision.
using Vector = Eigen::VectorXd;
/// Column-major; by convention columns are samples.
using Matrix = Eigen::MatrixXd;

}  // namespace cbm
