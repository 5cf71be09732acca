#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace rfw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Spectral norm of [I, x]; equals sqrt(1 + |x|^2).
inline double concat_identity_norm(const Vector& x) { return std::sqrt(1.0 + x.squaredNorm()); }

}  // namespace rfw
