#include "regrace/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "regrace/rng.hpp"

namespace regrace {

namespace {

constexpr int kBins = 32;
constexpr int kMaxPairs = 4096;
constexpr int kClassSlots = 32;
constexpr double kDegenerateRadius = 1e-12;
// Fixed stream constant for the pair subsample; independent of any run seed
// so a given point multiset always yields the same descriptor.
constexpr std::uint64_t kPairStream = 0x70616972ULL;  // "pair"

int bin_of(double value, double range) {
    const int b = static_cast<int>(std::floor(value / range * kBins));
    return std::min(kBins - 1, std::max(0, b));
}

}  // namespace

LocalDescriptor describe_reference(const PointMatrix& sample, int class_id) {
    const int p = static_cast<int>(sample.rows());
    if (p < 1) {
        throw std::invalid_argument("describe_reference: empty sample");
    }
    if (!sample.allFinite()) {
        throw std::invalid_argument("describe_reference: non-finite coordinates");
    }

    LocalDescriptor d;
    d.values = Eigen::VectorXd::Zero(kDescriptorDim);
    const int one_hot = 73 + (((class_id % kClassSlots) + kClassSlots) % kClassSlots);

    const Eigen::RowVector3d centroid = sample.colwise().mean();
    const PointMatrix centered = sample.rowwise() - centroid;
    Eigen::VectorXd radii(p);
    for (int i = 0; i < p; ++i) radii[i] = centered.row(i).norm();
    const double radius = radii.maxCoeff();

    if (radius < kDegenerateRadius) {
        d.values[72] = std::log1p(static_cast<double>(p));
        d.values[one_hot] = 1.0;
        d.values.normalize();
        return d;
    }

    // Canonical point order: ascending distance to centroid, ties by the
    // centered coordinates. All sums below run in this order, so the
    // descriptor is an exact function of the point multiset.
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (radii[a] != radii[b]) return radii[a] < radii[b];
        for (int c = 0; c < 3; ++c) {
            if (centered(a, c) != centered(b, c)) return centered(a, c) < centered(b, c);
        }
        return false;
    });

    // radial histogram + moments
    for (int i : order) d.values[bin_of(radii[i], radius)] += 1.0;
    d.values.head(kBins) /= static_cast<double>(p);

    double m1 = 0.0;
    for (int i : order) m1 += radii[i];
    m1 /= p;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (int i : order) {
        const double e = radii[i] - m1;
        m2 += e * e;
        m3 += e * e * e;
        m4 += e * e * e * e;
    }
    m2 /= p;
    m3 /= p;
    m4 /= p;

    // pairwise-distance histogram over a bounded, deterministic pair set
    const std::int64_t all_pairs = static_cast<std::int64_t>(p) * (p - 1) / 2;
    std::int64_t n_pairs = 0;
    if (all_pairs > 0 && all_pairs <= kMaxPairs) {
        for (int a = 0; a < p; ++a) {
            for (int b = a + 1; b < p; ++b) {
                const double dist = (sample.row(order[a]) - sample.row(order[b])).norm();
                d.values[kBins + bin_of(dist, 2.0 * radius)] += 1.0;
            }
        }
        n_pairs = all_pairs;
    } else if (all_pairs > kMaxPairs) {
        Rng rng(derive_seed(kPairStream, static_cast<std::uint64_t>(p)));
        for (int k = 0; k < kMaxPairs; ++k) {
            const int a = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(p)));
            int b = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(p - 1)));
            if (b >= a) ++b;
            const double dist = (sample.row(order[a]) - sample.row(order[b])).norm();
            d.values[kBins + bin_of(dist, 2.0 * radius)] += 1.0;
        }
        n_pairs = kMaxPairs;
    }
    if (n_pairs > 0) d.values.segment(kBins, kBins) /= static_cast<double>(n_pairs);

    // shape spectrum: eigenvalues of the covariance, accumulated in canonical
    // order for exactness
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int i : order) cov += centered.row(i).transpose() * centered.row(i);
    cov /= p;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    const double ev_sum = ev.sum();
    if (ev_sum > 0.0) d.values.segment(64, 3) = ev / ev_sum;

    d.values[67] = m1 / radius;
    d.values[68] = m2 / (radius * radius);
    d.values[69] = m3 / (radius * radius * radius);
    d.values[70] = m4 / (radius * radius * radius * radius);
    d.values[71] = radius;
    d.values[72] = std::log1p(static_cast<double>(p));
    d.values[one_hot] = 1.0;

    d.values.normalize();
    return d;
}

DescriptorBackend make_descriptor_backend(const std::string& name) {
    if (name == "reference") {
        return [](const PointMatrix& sample, int class_id) {
            return describe_reference(sample, class_id);
        };
    }
    if (name == "learned") {
        throw std::invalid_argument(
            "descriptor backend 'learned' is reserved but not available in this build");
    }
    throw std::invalid_argument("unknown descriptor backend: " + name);
}

}  // namespace regrace
