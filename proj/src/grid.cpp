#include "regrace/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regrace {

UniformGrid3::UniformGrid3(const PointMatrix& pts, double cell_size) : pts_(pts), cell_(cell_size) {
    if (!(cell_size > 0.0)) {
        throw std::invalid_argument("UniformGrid3: cell_size must be positive");
    }
    if (!pts_.allFinite()) {
        throw std::invalid_argument("UniformGrid3: non-finite point coordinates");
    }
    cells_.reserve(static_cast<std::size_t>(pts_.rows()));
    for (int i = 0; i < pts_.rows(); ++i) {
        cells_[key_of(pts_.row(i))].push_back(i);
    }
}

UniformGrid3::Key UniformGrid3::key_of(const Eigen::Vector3d& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
}

std::vector<int> UniformGrid3::radius_neighbors(const Eigen::Vector3d& q, double radius) const {
    std::vector<int> out;
    if (radius < 0.0) return out;
    const Key c = key_of(q);
    const std::int64_t span = static_cast<std::int64_t>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (std::int64_t dx = -span; dx <= span; ++dx) {
        for (std::int64_t dy = -span; dy <= span; ++dy) {
            for (std::int64_t dz = -span; dz <= span; ++dz) {
                const auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
                if (it == cells_.end()) continue;
                for (int idx : it->second) {
                    if ((pts_.row(idx).transpose() - q).squaredNorm() <= r2) {
                        out.push_back(idx);
                    }
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

int UniformGrid3::nearest_within(const Eigen::Vector3d& q, double radius) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    if (radius < 0.0) return best;
    const Key c = key_of(q);
    const std::int64_t span = static_cast<std::int64_t>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (std::int64_t dx = -span; dx <= span; ++dx) {
        for (std::int64_t dy = -span; dy <= span; ++dy) {
            for (std::int64_t dz = -span; dz <= span; ++dz) {
                const auto it = cells_.find({c[0] + dx, c[1] + dy, c[2] + dz});
                if (it == cells_.end()) continue;
                for (int idx : it->second) {
                    const double d2 = (pts_.row(idx).transpose() - q).squaredNorm();
                    if (d2 > r2) continue;
                    if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                        best_d2 = d2;
                        best = idx;
                    }
                }
            }
        }
    }
    return best;
}

}  // namespace regrace
