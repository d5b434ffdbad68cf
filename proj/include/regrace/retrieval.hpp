#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"
#include "regrace/graphnet.hpp"
#include "regrace/registration.hpp"

namespace regrace {

/// One persisted database entry of the place-recognition index.
struct IndexRecord {
    std::int64_t id = 0;
    double timestamp = 0.0;      // s
    Eigen::VectorXd embedding;   // 256
    SceneGraph graph;
    Pose world_pose;
};

/// Ranked retrieval candidate.
struct Candidate {
    const IndexRecord* record = nullptr;
    double embedding_distance = 0.0;
};

/// A re-ranked candidate with its geometric-consistency score.
struct RankedCandidate {
    std::int64_t candidate_id = -1;
    double embedding_distance = 0.0;
    double consistency = 0.0;
};

/// Outcome of querying one submap against the database.
struct RevisitDecision {
    std::int64_t query_id = -1;
    std::int64_t candidate_id = -1;  // -1 when no candidate was reachable
    double consistency = 0.0;
    double embedding_distance = 0.0;
    bool is_revisit = false;
    std::vector<RankedCandidate> ranked;  // consistency-descending order
};

/// In-memory embedding database with temporal-exclusion top-k queries.
/// Inserts must keep ids unique and timestamps non-decreasing.
class EmbeddingIndex {
   public:
    void insert(IndexRecord record);
    std::size_t size() const { return records_.size(); }
    const IndexRecord* find(std::int64_t id) const;
    const std::vector<IndexRecord>& records() const { return records_; }

    /// Up to k records with timestamp <= query_time - exclusion_s, ordered by
    /// ascending embedding L2 distance, ties by ascending id. `exclude_id`
    /// additionally drops one record (the query's own entry).
    std::vector<Candidate> query_topk(const Eigen::VectorXd& embedding, double query_time, int k,
                                      double exclusion_s, std::int64_t exclude_id = -1) const;

   private:
    std::vector<IndexRecord> records_;
    std::map<std::int64_t, std::size_t> by_id_;
};

/// One hinge term of the consistency sum: max(1 - (d1 - d2)^2 / d_t^2, 0).
double consistency_pair_term(double d1, double d2, double d_t);

/// Consistency sum over all unordered pairs of distinct inlier
/// correspondences, given the original centroids of both graphs.
double consistency_from_inliers(const std::vector<Correspondence>& inliers,
                                const PointMatrix& query_centroids,
                                const PointMatrix& candidate_centroids, double d_t);

/// Eq-style geometric consistency between two graphs: mutual-best matching,
/// coarse RANSAC (no ICP), then the pairwise hinge sum over the inlier set.
/// Fewer than 3 correspondences score 0. When `normalize` is set the sum is
/// divided by the number of inlier pairs (off by default).
double consistency_score(const SceneGraph& query, const SceneGraph& candidate, double d_t,
                         const RansacParams& ransac, bool normalize = false,
                         MatchFeatures on = MatchFeatures::descriptors);

struct RerankParams {
    int top_k = 20;
    double exclusion_s = 30.0;
    double d_t = 1.0;
    double epsilon_c = 10.0;  // consistency threshold for declaring a revisit
    bool normalize_consistency = false;
    RansacParams ransac;
    MatchFeatures match_on = MatchFeatures::descriptors;
};

/// Retrieves the top-k embedding neighbors, scores each with the geometric
/// consistency, and declares a revisit when the best consistency exceeds
/// epsilon_c. Best candidate = highest consistency, ties by smaller
/// embedding distance then smaller id.
RevisitDecision rerank_classify(const EmbeddingIndex& index, std::int64_t query_id,
                                const Eigen::VectorXd& embedding, const SceneGraph& graph,
                                double query_time, const RerankParams& params);

/// Everything eval_metrics needs to know about one query.
struct QueryOutcome {
    bool has_gt_positive = false;  // a reachable database entry lies within r_tp
    std::vector<double> ranked_gt_dist;  // gt distance per ranked candidate
    double score = 0.0;                  // decision confidence (higher = revisit)
    double cand_gt_dist = 0.0;           // gt distance of the decision candidate
    bool has_candidate = false;
};

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricReport {
    double recall_at_1 = 0.0;
    double recall_at_5 = 0.0;
    double f1_max = 0.0;
    double best_threshold = 0.0;
    std::vector<PrPoint> curve;  // one point per distinct decision score
};

/// Place-recognition metrics under the two-threshold convention: a declared
/// match within r_tp is a true positive, beyond r_fp a false positive, and
/// matches in the open band between them are ignored. A query with a
/// reachable ground-truth positive that is not matched within r_tp counts as
/// a false negative. Recall@N uses the ranked candidate lists; F1_max sweeps
/// the decision scores. Non-finite ground-truth distances raise
/// std::invalid_argument.
MetricReport eval_metrics(const std::vector<QueryOutcome>& outcomes, double r_tp,
                          double r_fp = 20.0);

}  // namespace regrace
