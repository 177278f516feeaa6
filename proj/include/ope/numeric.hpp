#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace ope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Pairwise (cascade) summation. Deterministic and far more accurate than a
/// running sum for the across-trajectory accumulations at n = 10^4 and above.
double pairwise_sum(std::span<const double> values);

inline double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum(std::span<const double>(values));
}

/// Sample mean and standard error of the mean.
struct MeanStdError {
  double mean = 0.0;
  double std_error = 0.0;
};
MeanStdError mean_and_std_error(std::span<const double> values);

/// Population standard deviation (divide by n, not n-1).
double population_stddev(std::span<const double> values);

bool is_probability_vector(const Vector& v, double tol = 1e-9);
bool rows_are_stochastic(const Matrix& m, double tol = 1e-9);

}  // namespace ope
