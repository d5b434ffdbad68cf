#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"

namespace regrace {

/// Uniform hash grid over 3-d points for fixed-radius neighbor lookups.
///
/// Exact within the queried radius: every point inside the radius is found
/// (candidate cells are enumerated conservatively from ceil(radius/cell)),
/// so results match a brute-force scan. Neighbor lists are returned in
/// ascending point-index order to keep downstream algorithms deterministic.
class UniformGrid3 {
   public:
    UniformGrid3(const PointMatrix& pts, double cell_size);

    /// Indices of all points with ||p - q|| <= radius, ascending.
    std::vector<int> radius_neighbors(const Eigen::Vector3d& q, double radius) const;

    /// Index of the nearest point with ||p - q|| <= radius, or -1 if none.
    /// Distance ties resolve to the lowest index.
    int nearest_within(const Eigen::Vector3d& q, double radius) const;

    std::size_t size() const { return static_cast<std::size_t>(pts_.rows()); }

   private:
    using Key = std::array<std::int64_t, 3>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            // splitmix-style avalanche over the packed coordinates
            std::uint64_t h = 0x9e3779b97f4a7c15ULL;
            for (std::int64_t v : k) {
                std::uint64_t x = static_cast<std::uint64_t>(v) + h;
                x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
                x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
                h = x ^ (x >> 31);
            }
            return static_cast<std::size_t>(h);
        }
    };

    Key key_of(const Eigen::Vector3d& p) const;

    PointMatrix pts_;
    double cell_;
    std::unordered_map<Key, std::vector<int>, KeyHash> cells_;
};

}  // namespace regrace
