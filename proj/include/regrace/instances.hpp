#pragma once

#include <set>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"
#include "regrace/submap.hpp"

namespace regrace {

/// Density-clustering parameters. `eps` is the neighborhood radius over voxel
/// centroids (inclusive), `min_pts` the minimum neighborhood size for a core
/// cell and the minimum size of an emitted cluster.
struct ClusterParams {
    double eps = 0.2;
    int min_pts = 100;
    std::set<int> excluded_classes;
};

/// One clustered object: its member voxel centroids, the keypoint (mean of
/// the cells), the shared semantic class, and an optional fixed-size point
/// sample attached by sample_fixed().
struct ObjectInstance {
    int class_id = 0;
    PointMatrix cells;  // M x 3 voxel centroids, M >= min_pts
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    PointMatrix sampled;  // P x 3 once sampling has run, else 0 x 3
};

/// Groups voxels by their argmax class and runs DBSCAN per class on the cell
/// centroids. Cells of excluded classes are never clustered; noise cells and
/// clusters smaller than min_pts are dropped. Output order is deterministic:
/// ascending class id, then ascending lowest member cell (in sorted-key
/// order) within the class.
std::vector<ObjectInstance> cluster(const SemanticVoxelGrid& grid, const ClusterParams& params);

/// Fixed-size resampling of an instance's points.
///  - p >= P: farthest-point sampling. The virtual start is the point nearest
///    the centroid (it seeds the distance field but is not auto-selected);
///    each round picks the point with the largest distance to the selected
///    set, ties to the lowest index.
///  - p < P: all p points in input order, padded with the points ranked
///    farthest from the centroid, cycling through that ranking as needed.
PointMatrix sample_fixed(const PointMatrix& points, int sample_size);

}  // namespace regrace
