#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

#include "regrace/geometry.hpp"

namespace regrace {

constexpr int kDescriptorDim = 128;

/// 128-d local object feature. Always finite and L2-normalized to 1.
struct LocalDescriptor {
    Eigen::VectorXd values;  // kDescriptorDim
};

/// Pluggable per-object feature extractor: (P x 3 sample, class id) -> 128-d.
/// Implementations must be rotation- and translation-invariant.
using DescriptorBackend = std::function<LocalDescriptor(const PointMatrix&, int)>;

/// Deterministic reference descriptor, invariant to rigid motion by
/// construction. Slot layout (unused tail zero-padded to 128):
///   [0,32)    normalized histogram of distances to the centroid, range [0,R]
///   [32,64)   normalized histogram of pairwise distances over a fixed
///             deterministic pair subsample, range [0,2R]
///   [64,67)   sorted covariance eigenvalues, normalized by their sum
///   [67,71)   radial moments: mean/R and central moments 2..4 over R^2..R^4
///   [71]      R, the bounding-sphere radius (max distance to centroid)
///   [72]      log1p(point count)
///   [73,105)  class one-hot (class id mod 32)
/// where R is the sample's max distance to its centroid. The result is
/// L2-normalized. Degenerate samples (R ~ 0) fall back to zeros except the
/// class one-hot and count slots, then normalize.
LocalDescriptor describe_reference(const PointMatrix& sample, int class_id);

/// Backend registry keyed by config name. "reference" is the deterministic
/// built-in; "learned" is reserved for a weight-loading backend and is not
/// available in this build.
DescriptorBackend make_descriptor_backend(const std::string& name);

}  // namespace regrace
