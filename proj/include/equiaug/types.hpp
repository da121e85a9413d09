#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace equiaug {

using scalar_t = double;
using Vector = Eigen::Matrix<scalar_t, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<scalar_t, Eigen::Dynamic, Eigen::Dynamic>;
using index_t = Eigen::Index;

/// Thrown when a numeric routine produces a non-finite value.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown on malformed persisted files (bad line, truncated stream).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when a well-formed file carries inconsistent dimensions.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace equiaug
