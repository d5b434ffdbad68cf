#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"

namespace regrace {

/// One LiDAR scan with per-point class probabilities, in the sensor frame.
struct LabeledScan {
    PointMatrix points;           // N x 3, sensor frame (m)
    Eigen::MatrixXd class_probs;  // N x C, rows sum to 1
    double timestamp = 0.0;       // seconds
    Pose pose;                    // sensor -> world
};

/// Integer voxel coordinate, keyed by floor(coordinate / voxel_size).
struct VoxelKey {
    std::int64_t x = 0, y = 0, z = 0;
    bool operator<(const VoxelKey& o) const {
        if (x != o.x) return x < o.x;
        if (y != o.y) return y < o.y;
        return z < o.z;
    }
    bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VoxelCell {
    Eigen::VectorXd mean_probs;  // C, arithmetic mean over member points
    int count = 0;               // member points, >= 1
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
};

/// Voxelized semantic map; keys ordered so iteration is deterministic.
struct SemanticVoxelGrid {
    double voxel_size = 0.1;
    std::map<VoxelKey, VoxelCell> cells;
};

/// A dense local map fused from consecutive scans, expressed in the frame of
/// the middle scan of the fused window.
struct Submap {
    std::int64_t id = 0;
    Pose origin;             // middle-scan world pose
    double timestamp = 0.0;  // middle-scan time (s)
    SemanticVoxelGrid grid;  // coordinates in the origin frame
};

/// Bins points into voxels of edge `voxel_size` and averages the class
/// probability rows per cell. Exactly permutation-invariant in the input
/// order: members of each cell are summed in a canonical sort order before
/// dividing, so reshuffled inputs produce bit-identical grids.
SemanticVoxelGrid voxelize(const PointMatrix& points, const Eigen::MatrixXd& class_probs,
                           double voxel_size);

/// Fuses scans into one submap. Starting from the first scan, consecutive
/// scans are included while the straight-line distance between the candidate
/// scan's translation and the first scan's translation stays <= max_span
/// (inclusive). All included points are re-expressed in the frame of the
/// middle included scan (index floor((N-1)/2)), whose pose and timestamp
/// become the submap origin and timestamp.
Submap accumulate(const std::vector<LabeledScan>& scans, double max_span, double voxel_size,
                  std::int64_t id = 0);

/// Number of scans accumulate() would fuse, without doing the work.
std::size_t accumulate_window(const std::vector<LabeledScan>& scans, double max_span);

/// Same window rule from poses alone, so callers can size a window before
/// loading any scan data.
std::size_t accumulate_window(const std::vector<Pose>& poses, double max_span);

}  // namespace regrace
