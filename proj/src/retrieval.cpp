#include "regrace/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regrace {

void EmbeddingIndex::insert(IndexRecord record) {
    if (by_id_.count(record.id)) {
        throw std::invalid_argument("EmbeddingIndex: duplicate id " + std::to_string(record.id));
    }
    if (!records_.empty() && record.timestamp < records_.back().timestamp) {
        throw std::invalid_argument("EmbeddingIndex: timestamps must be non-decreasing");
    }
    by_id_.emplace(record.id, records_.size());
    records_.push_back(std::move(record));
}

const IndexRecord* EmbeddingIndex::find(std::int64_t id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
}

std::vector<Candidate> EmbeddingIndex::query_topk(const Eigen::VectorXd& embedding,
                                                  double query_time, int k, double exclusion_s,
                                                  std::int64_t exclude_id) const {
    if (k < 1) {
        throw std::invalid_argument("query_topk: k must be >= 1");
    }
    std::vector<Candidate> eligible;
    for (const IndexRecord& r : records_) {
        if (r.id == exclude_id) continue;
        if (r.timestamp > query_time - exclusion_s) continue;  // too recent
        eligible.push_back({&r, (r.embedding - embedding).norm()});
    }
    std::sort(eligible.begin(), eligible.end(), [](const Candidate& a, const Candidate& b) {
        if (a.embedding_distance != b.embedding_distance)
            return a.embedding_distance < b.embedding_distance;
        return a.record->id < b.record->id;
    });
    if (static_cast<int>(eligible.size()) > k) eligible.resize(k);
    return eligible;
}

double consistency_pair_term(double d1, double d2, double d_t) {
    if (!(d_t > 0.0)) {
        throw std::invalid_argument("consistency_pair_term: d_t must be positive");
    }
    const double e = (d1 - d2) / d_t;
    return std::max(1.0 - e * e, 0.0);
}

double consistency_from_inliers(const std::vector<Correspondence>& inliers,
                                const PointMatrix& query_centroids,
                                const PointMatrix& candidate_centroids, double d_t) {
    double c = 0.0;
    const int n = static_cast<int>(inliers.size());
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const double d1 = (query_centroids.row(inliers[a].query_node) -
                               query_centroids.row(inliers[b].query_node))
                                  .norm();
            const double d2 = (candidate_centroids.row(inliers[a].candidate_node) -
                               candidate_centroids.row(inliers[b].candidate_node))
                                  .norm();
            c += consistency_pair_term(d1, d2, d_t);
        }
    }
    return c;
}

double consistency_score(const SceneGraph& query, const SceneGraph& candidate, double d_t,
                         const RansacParams& ransac, bool normalize, MatchFeatures on) {
    const std::vector<Correspondence> corrs = match_features(query, candidate, on);
    if (corrs.size() < 3) return 0.0;
    const TransformEstimate est =
        ransac_align(corrs, query.centroids, candidate.centroids, ransac);
    double c = consistency_from_inliers(est.inliers, query.centroids, candidate.centroids, d_t);
    if (normalize) {
        const std::size_t n = est.inliers.size();
        if (n >= 2) c /= static_cast<double>(n * (n - 1) / 2);
    }
    return c;
}

RevisitDecision rerank_classify(const EmbeddingIndex& index, std::int64_t query_id,
                                const Eigen::VectorXd& embedding, const SceneGraph& graph,
                                double query_time, const RerankParams& params) {
    RevisitDecision d;
    d.query_id = query_id;

    const std::vector<Candidate> top =
        index.query_topk(embedding, query_time, params.top_k, params.exclusion_s, query_id);
    for (const Candidate& c : top) {
        RankedCandidate rc;
        rc.candidate_id = c.record->id;
        rc.embedding_distance = c.embedding_distance;
        rc.consistency = consistency_score(graph, c.record->graph, params.d_t, params.ransac,
                                           params.normalize_consistency, params.match_on);
        d.ranked.push_back(rc);
    }
    std::stable_sort(d.ranked.begin(), d.ranked.end(),
                     [](const RankedCandidate& a, const RankedCandidate& b) {
                         if (a.consistency != b.consistency) return a.consistency > b.consistency;
                         if (a.embedding_distance != b.embedding_distance)
                             return a.embedding_distance < b.embedding_distance;
                         return a.candidate_id < b.candidate_id;
                     });
    if (!d.ranked.empty()) {
        d.candidate_id = d.ranked.front().candidate_id;
        d.consistency = d.ranked.front().consistency;
        d.embedding_distance = d.ranked.front().embedding_distance;
        d.is_revisit = d.consistency > params.epsilon_c;
    }
    return d;
}

MetricReport eval_metrics(const std::vector<QueryOutcome>& outcomes, double r_tp, double r_fp) {
    if (!(r_tp > 0.0) || !(r_fp >= r_tp)) {
        throw std::invalid_argument("eval_metrics: need 0 < r_tp <= r_fp");
    }
    for (const QueryOutcome& q : outcomes) {
        if (q.has_candidate && !std::isfinite(q.cand_gt_dist)) {
            throw std::invalid_argument("eval_metrics: missing ground truth for a decision");
        }
        for (double dist : q.ranked_gt_dist) {
            if (!std::isfinite(dist)) {
                throw std::invalid_argument("eval_metrics: missing ground truth for a candidate");
            }
        }
    }

    MetricReport rep;

    // Recall@N over queries that actually have a reachable positive
    int denom = 0, hit1 = 0, hit5 = 0;
    for (const QueryOutcome& q : outcomes) {
        if (!q.has_gt_positive) continue;
        ++denom;
        const std::size_t n5 = std::min<std::size_t>(5, q.ranked_gt_dist.size());
        for (std::size_t i = 0; i < n5; ++i) {
            if (q.ranked_gt_dist[i] <= r_tp) {
                if (i == 0) ++hit1;
                ++hit5;
                break;
            }
        }
    }
    rep.recall_at_1 = denom > 0 ? static_cast<double>(hit1) / denom : 0.0;
    rep.recall_at_5 = denom > 0 ? static_cast<double>(hit5) / denom : 0.0;

    // F1 sweep: sort decisions by score descending and walk the thresholds.
    // At threshold t, predictions are all decisions with score >= t.
    std::vector<int> order;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].has_candidate) order.push_back(static_cast<int>(i));
    }
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return outcomes[a].score > outcomes[b].score; });

    int gt_total = 0;
    for (const QueryOutcome& q : outcomes) {
        if (q.has_gt_positive) ++gt_total;
    }

    int tp = 0, fp = 0;
    double best_f1 = 0.0, best_thr = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    while (i < order.size()) {
        const double thr = outcomes[order[i]].score;
        // admit every decision tied at this score before evaluating
        while (i < order.size() && outcomes[order[i]].score == thr) {
            const QueryOutcome& q = outcomes[order[i]];
            if (q.cand_gt_dist <= r_tp) {
                ++tp;
            } else if (q.cand_gt_dist >= r_fp) {
                ++fp;
            }  // band matches are ignored by the two-threshold convention
            ++i;
        }
        const int fn = gt_total - tp;
        const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        const double f1 =
            (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        rep.curve.push_back({thr, precision, recall, f1});
        if (f1 > best_f1) {
            best_f1 = f1;
            best_thr = thr;
        }
    }
    rep.f1_max = best_f1;
    rep.best_threshold = best_thr;
    return rep;
}

}  // namespace regrace
