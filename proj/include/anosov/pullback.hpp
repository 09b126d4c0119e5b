#pragma once

#include <cmath>
#include <string>

#include "anosov/errors.hpp"

namespace anosov {

/// Radii of the nested tori family: R1 around the z-axis, R2 for the tube.
struct EmbeddingParams {
  double R1 = 0.0;
  double R2 = 0.0;

  void validate() const {
    if (!(R1 > 0.0 && R2 > 0.0) || !std::isfinite(R1) || !std::isfinite(R2)) {
      throw InvalidArgument("embedding radii must be positive and finite");
    }
  }
  /// Guard for operations that place the slab w in [0, 1] in space: the inner
  /// torus must not pass through its core circle and the tori must not touch
  /// the z-axis.
  void require_embedded_slab() const {
    validate();
    if (!(R2 > 1.0)) throw InvalidArgument("embedding requires R2 > 1, got " + std::to_string(R2));
    if (!(R1 > R2 + 1.0)) throw InvalidArgument("embedding requires R1 > R2 + 1");
  }
};

/// Diagonal entries of the pulled-back Euclidean metric in (u, v, w) coordinates,
/// written over a generic scalar so Jets give exact derivatives.
template <class S>
S pullback_q11(const EmbeddingParams& e, const S& v, const S& w) {
  using std::cos;
  const S f = 1.0 + (e.R2 + w) * cos(v / e.R2) / e.R1;
  return f * f;
}

template <class S>
S pullback_q22(const EmbeddingParams& e, const S& w) {
  const S f = 1.0 + w / e.R2;
  return f * f;
}

}  // namespace anosov
