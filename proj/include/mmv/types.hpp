#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mmv {

// State dimension d and mark dimension m are small at desk scale; vectors and
// matrices use inline storage up to kMaxDim so the particle loop never heap-allocates.
inline constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

/// Malformed or inconsistent scenario/construction parameters.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An operation was called outside its preconditions.
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite or otherwise invalid numeric input.
class InvalidInputError : public std::runtime_error {
public:
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// graph_sample could not produce any pair within the requested radius.
class EmptySampleError : public std::runtime_error {
public:
  explicit EmptySampleError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A scenario-level failure detected while running (e.g. an (H4) violation).
class ScenarioError : public std::runtime_error {
public:
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw InvalidInputError(std::string(what) + ": non-finite coordinates");
}

}  // namespace mmv
