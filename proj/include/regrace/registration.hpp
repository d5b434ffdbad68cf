#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"
#include "regrace/graphnet.hpp"

namespace regrace {

/// Mutual-best feature match between a query node and a candidate node.
struct Correspondence {
    int query_node = -1;
    int candidate_node = -1;
    double descriptor_distance = 0.0;
};

/// SE(3) hypothesis mapping candidate coordinates into the query frame.
struct TransformEstimate {
    enum class Stage { coarse, refined };
    Pose transform;
    std::vector<Correspondence> inliers;
    double rmse = 0.0;  // over the inlier residuals (m)
    Stage stage = Stage::coarse;
    bool degraded = false;  // set when no clean hypothesis/association existed
};

struct RansacParams {
    double inlier_tol = 0.5;  // m, centroid residual (inclusive)
    int max_iters = 10000;
    double confidence = 0.999;
    std::uint64_t seed = 42;
};

struct IcpParams {
    double nn_cap = 1.0;       // m, association distance cap
    double tol = 1e-4;         // m, max point displacement for convergence
    int max_iters = 50;
};

/// Which node features correspondences are matched on.
enum class MatchFeatures { descriptors, enriched };

/// Mutual nearest-neighbor matching in feature L2 distance: (i, j) is kept
/// iff j is i's closest candidate node and i is j's closest query node, ties
/// to the lowest index. Matches on the 128-d descriptors by default; the
/// enriched 512-d features are selectable when present on both graphs.
std::vector<Correspondence> match_features(const SceneGraph& query, const SceneGraph& candidate,
                                           MatchFeatures on = MatchFeatures::descriptors);

/// Least-squares rigid transform mapping src points onto dst points
/// (centroid subtraction + SVD of the cross-covariance with reflection
/// correction). Requires >= 3 rows.
Pose fit_rigid(const PointMatrix& src, const PointMatrix& dst);

/// RANSAC over 3-point minimal samples of the correspondences, aligning
/// candidate centroids onto query centroids. Hypotheses are scored by inlier
/// count (residual <= inlier_tol, ties to the earlier hypothesis), the winner
/// is re-fit on its full inlier set until the set stabilizes, and the
/// returned inliers are exactly the correspondences within tolerance of the
/// returned transform. Enumeration is exhaustive over all triples when that
/// is within the iteration budget, otherwise seeded sampling with an adaptive
/// confidence-based exit. Throws std::invalid_argument below 3
/// correspondences; if every triple is degenerate the estimate falls back to
/// the full least-squares fit with the degraded flag set.
TransformEstimate ransac_align(const std::vector<Correspondence>& corrs,
                               const PointMatrix& query_centroids,
                               const PointMatrix& candidate_centroids, const RansacParams& params);

/// Point-to-point ICP seeded by the coarse estimate: iterates capped
/// nearest-neighbor association against the query points and a closed-form
/// re-fit, until the largest candidate-point displacement between successive
/// transforms drops below tol or max_iters is hit. If no pair associates
/// within the cap, the coarse transform is returned with the degraded flag.
TransformEstimate icp_refine(const TransformEstimate& coarse, const PointMatrix& query_points,
                             const PointMatrix& candidate_points, const IcpParams& params);

struct RegistrationEval {
    double rre_deg = 0.0;
    double rte_m = 0.0;
    bool success = false;
};

/// RRE/RTE against ground truth with an inclusive success test
/// (rre <= rre_max and rte <= rte_max, with a 1e-9 grace so exact-boundary
/// constructions land on the success side).
RegistrationEval eval_registration(const Pose& est, const Pose& gt, double rre_max_deg = 5.0,
                                   double rte_max_m = 2.0);

/// Per-submap feature bundle used by the coarse-to-fine path: the instance
/// list (for inlier-object cells) plus the built graph.
struct SubmapFeatures {
    std::int64_t id = 0;
    double timestamp = 0.0;
    Pose origin;
    std::vector<ObjectInstance> instances;
    SceneGraph graph;
};

/// Full coarse-to-fine registration of a candidate submap onto a query
/// submap: mutual-best matching, RANSAC on the matched centroids, then ICP
/// restricted to the voxel cells of the RANSAC-inlier objects.
TransformEstimate register_pair(const SubmapFeatures& query, const SubmapFeatures& candidate,
                                const RansacParams& ransac, const IcpParams& icp,
                                MatchFeatures on = MatchFeatures::descriptors);

}  // namespace regrace
