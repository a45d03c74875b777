#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace okdph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// User/configuration errors; mapped to exit code 1 by the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParamSlice {
  int layer = 0;
  Index offset = 0;
  Index length = 0;

  friend bool operator==(const ParamSlice&, const ParamSlice&) = default;
};

/// Ordered slice descriptors mapping a flat parameter array to layers.
struct ParamLayout {
  std::vector<ParamSlice> slices;

  Index total() const {
    Index n = 0;
    for (const auto& s : slices) n += s.length;
    return n;
  }

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

/// Flat, ordered array of all trainable parameters of one network.
struct ParamVector {
  Vector values;
  ParamLayout layout;
};

/// Same layout as the ParamVector it differentiates; values are dLoss/dtheta.
struct GradVector {
  Vector values;
  ParamLayout layout;
};

inline void require_same_layout(const ParamLayout& a, const ParamLayout& b,
                                const std::string& what) {
  if (!(a == b)) throw std::runtime_error("layout mismatch: " + what);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace okdph
