#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "regrace/descriptor.hpp"
#include "regrace/retrieval.hpp"
#include "regrace/rng.hpp"

using namespace regrace;

namespace {

Pose random_pose(Rng& rng, double trans_scale = 10.0) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    Eigen::Vector3d t(rng.uniform(-trans_scale, trans_scale), rng.uniform(-trans_scale, trans_scale),
                      rng.uniform(-trans_scale, trans_scale));
    return Pose(q.toRotationMatrix(), t);
}

Eigen::VectorXd random_vec(Rng& rng, int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    return v;
}

/// A graph of k nodes with distinct random features at random keypoints.
SceneGraph random_graph(Rng& rng, int k, double alpha = 20.0) {
    std::vector<ObjectInstance> instances(k);
    Eigen::MatrixXd feats(k, kDescriptorDim);
    for (int i = 0; i < k; ++i) {
        instances[i].centroid << rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0),
            rng.uniform(-1.0, 1.0);
        for (int j = 0; j < kDescriptorDim; ++j) feats(i, j) = rng.normal();
    }
    return build_graph(instances, feats, alpha);
}

/// The same graph with rigidly moved keypoints (features untouched).
SceneGraph moved_copy(const SceneGraph& g, const Pose& pose) {
    std::vector<ObjectInstance> instances(g.size());
    for (int i = 0; i < g.size(); ++i) {
        instances[i].centroid = pose * Eigen::Vector3d(g.centroids.row(i).transpose());
    }
    return build_graph(instances, g.features, g.alpha);
}

IndexRecord record_of(std::int64_t id, double ts, const Eigen::VectorXd& emb,
                      const SceneGraph& graph) {
    IndexRecord r;
    r.id = id;
    r.timestamp = ts;
    r.embedding = emb;
    r.graph = graph;
    return r;
}

QueryOutcome outcome(double score, double cand_gt, bool has_gt,
                     std::vector<double> ranked_gt = {}) {
    QueryOutcome q;
    q.score = score;
    q.cand_gt_dist = cand_gt;
    q.has_gt_positive = has_gt;
    q.has_candidate = true;
    q.ranked_gt_dist = std::move(ranked_gt);
    if (q.ranked_gt_dist.empty()) q.ranked_gt_dist.push_back(cand_gt);
    return q;
}

/// Metric oracle: literal re-implementation of the two-threshold sweep.
double f1_max_oracle(const std::vector<QueryOutcome>& outcomes, double r_tp, double r_fp) {
    int gt_total = 0;
    for (const auto& q : outcomes) gt_total += q.has_gt_positive ? 1 : 0;
    std::vector<double> scores;
    for (const auto& q : outcomes) {
        if (q.has_candidate) scores.push_back(q.score);
    }
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    double best = 0.0;
    for (double thr : scores) {
        int tp = 0, fp = 0;
        for (const auto& q : outcomes) {
            if (!q.has_candidate || q.score < thr) continue;
            if (q.cand_gt_dist <= r_tp) ++tp;
            else if (q.cand_gt_dist >= r_fp) ++fp;
        }
        const int fn = gt_total - tp;
        const double p = (tp + fp) > 0 ? double(tp) / (tp + fp) : 0.0;
        const double r = (tp + fn) > 0 ? double(tp) / (tp + fn) : 0.0;
        const double f1 = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
        best = std::max(best, f1);
    }
    return best;
}

}  // namespace

TEST_CASE("index stores and finds records") {
    Rng rng(121);
    EmbeddingIndex index;
    CHECK(index.size() == 0);
    CHECK(index.find(1) == nullptr);

    index.insert(record_of(5, 0.0, random_vec(rng, 8), SceneGraph{}));
    index.insert(record_of(2, 1.0, random_vec(rng, 8), SceneGraph{}));
    CHECK(index.size() == 2);
    REQUIRE(index.find(5) != nullptr);
    CHECK(index.find(5)->timestamp == 0.0);
    CHECK(index.find(2)->timestamp == 1.0);
    CHECK(index.find(99) == nullptr);
}

TEST_CASE("index rejects duplicate ids and time travel") {
    Rng rng(122);
    EmbeddingIndex index;
    index.insert(record_of(1, 10.0, random_vec(rng, 8), SceneGraph{}));
    CHECK_THROWS_AS(index.insert(record_of(1, 11.0, random_vec(rng, 8), SceneGraph{})),
                    std::invalid_argument);
    CHECK_THROWS_AS(index.insert(record_of(2, 9.0, random_vec(rng, 8), SceneGraph{})),
                    std::invalid_argument);
    index.insert(record_of(3, 10.0, random_vec(rng, 8), SceneGraph{}));  // equal time is fine
    CHECK(index.size() == 2);
}

TEST_CASE("index scales to a thousand records") {
    Rng rng(123);
    EmbeddingIndex index;
    for (int i = 0; i < 1000; ++i) {
        index.insert(record_of(i, static_cast<double>(i), random_vec(rng, 8), SceneGraph{}));
    }
    CHECK(index.size() == 1000);
    CHECK(index.find(999)->id == 999);
}

TEST_CASE("top-k respects the temporal exclusion window") {
    Rng rng(124);
    EmbeddingIndex index;
    const Eigen::VectorXd probe = random_vec(rng, 8);

    SUBCASE("empty index yields nothing") {
        CHECK(index.query_topk(probe, 100.0, 20, 30.0).empty());
    }

    SUBCASE("records inside the window are unreachable") {
        for (int i = 0; i < 5; ++i) {
            index.insert(record_of(i, 80.0 + i, random_vec(rng, 8), SceneGraph{}));
        }
        CHECK(index.query_topk(probe, 100.0, 20, 30.0).empty());  // all newer than 70
    }

    SUBCASE("the boundary record exactly exclusion seconds old is eligible") {
        index.insert(record_of(1, 70.0, probe, SceneGraph{}));
        index.insert(record_of(2, 70.0 + 1e-9, probe, SceneGraph{}));
        auto got = index.query_topk(probe, 100.0, 20, 30.0);
        REQUIRE(got.size() == 1);  // 70.0 <= 100 - 30 but 70.0+eps is not
        CHECK(got[0].record->id == 1);
        CHECK(got[0].embedding_distance == 0.0);
    }

    SUBCASE("the query's own record is dropped") {
        index.insert(record_of(7, 0.0, probe, SceneGraph{}));
        index.insert(record_of(8, 1.0, probe, SceneGraph{}));
        auto got = index.query_topk(probe, 100.0, 20, 30.0, 7);
        REQUIRE(got.size() == 1);
        CHECK(got[0].record->id == 8);
    }
}

TEST_CASE("top-k ordering matches a brute-force sort") {
    Rng rng(125);
    EmbeddingIndex index;
    std::vector<Eigen::VectorXd> embs;
    for (int i = 0; i < 50; ++i) {
        embs.push_back(random_vec(rng, 8));
        index.insert(record_of(i, static_cast<double>(i), embs.back(), SceneGraph{}));
    }
    const Eigen::VectorXd probe = random_vec(rng, 8);
    const double query_time = 100.0;  // records 0..70 eligible -> all 50

    auto got = index.query_topk(probe, query_time, 20, 30.0);
    REQUIRE(got.size() == 20);

    std::vector<std::pair<double, int>> expect;
    for (int i = 0; i < 50; ++i) expect.push_back({(embs[i] - probe).norm(), i});
    std::sort(expect.begin(), expect.end());
    for (int i = 0; i < 20; ++i) {
        CHECK(got[i].record->id == expect[i].second);
        CHECK(got[i].embedding_distance == doctest::Approx(expect[i].first).epsilon(1e-12));
    }
    // ascending distance within the returned list
    for (int i = 1; i < 20; ++i) {
        CHECK(got[i - 1].embedding_distance <= got[i].embedding_distance);
    }
}

TEST_CASE("top-k distance ties resolve by ascending id") {
    Rng rng(126);
    EmbeddingIndex index;
    const Eigen::VectorXd shared = random_vec(rng, 8);
    index.insert(record_of(4, 0.0, shared, SceneGraph{}));
    index.insert(record_of(9, 1.0, shared, SceneGraph{}));
    index.insert(record_of(2, 2.0, shared, SceneGraph{}));
    auto got = index.query_topk(shared, 100.0, 3, 30.0);
    REQUIRE(got.size() == 3);
    CHECK(got[0].record->id == 2);
    CHECK(got[1].record->id == 4);
    CHECK(got[2].record->id == 9);
}

TEST_CASE("consistency pair term") {
    CHECK(consistency_pair_term(1.0, 1.5, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(consistency_pair_term(1.5, 1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(consistency_pair_term(2.0, 2.0, 1.0) == 1.0);
    CHECK(consistency_pair_term(2.0, 3.0, 1.0) == 0.0);   // difference equals d_t
    CHECK(consistency_pair_term(1.0, 2.5, 1.0) == 0.0);   // beyond d_t
    CHECK(consistency_pair_term(1.0, 1.25, 0.5) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_THROWS_AS(consistency_pair_term(1.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(consistency_pair_term(1.0, 1.0, -1.0), std::invalid_argument);
}

TEST_CASE("a rigidly transformed graph scores the full pair count") {
    Rng rng(127);
    SceneGraph query = random_graph(rng, 5);
    SceneGraph candidate = moved_copy(query, random_pose(rng));
    const double c = consistency_score(query, candidate, 1.0, RansacParams{});
    CHECK(c == doctest::Approx(10.0).epsilon(1e-12));  // C(5,2) exact hinge terms

    SUBCASE("swapping the roles gives the same score") {
        const double swapped = consistency_score(candidate, query, 1.0, RansacParams{});
        CHECK(swapped == doctest::Approx(c).epsilon(1e-12));
    }
    SUBCASE("normalization divides by the pair count") {
        const double n = consistency_score(query, candidate, 1.0, RansacParams{}, true);
        CHECK(n == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("consistency from inliers is monotone under inlier removal") {
    Rng rng(128);
    SceneGraph query = random_graph(rng, 8);
    SceneGraph candidate = moved_copy(query, random_pose(rng));
    std::vector<Correspondence> inliers;
    for (int i = 0; i < 8; ++i) inliers.push_back({i, i, 0.0});

    double prev = consistency_from_inliers(inliers, query.centroids, candidate.centroids, 1.0);
    CHECK(prev == doctest::Approx(28.0).epsilon(1e-12));
    while (inliers.size() > 1) {
        inliers.pop_back();
        const double cur =
            consistency_from_inliers(inliers, query.centroids, candidate.centroids, 1.0);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
    CHECK(prev == 0.0);  // a single correspondence has no pairs
}

TEST_CASE("too few correspondences score zero") {
    Rng rng(129);
    SceneGraph tiny = random_graph(rng, 2);
    SceneGraph tiny_moved = moved_copy(tiny, random_pose(rng));
    CHECK(consistency_score(tiny, tiny_moved, 1.0, RansacParams{}) == 0.0);
}

TEST_CASE("unrelated graphs score lower than a true revisit") {
    Rng rng(130);
    SceneGraph query = random_graph(rng, 8);
    SceneGraph revisit = moved_copy(query, random_pose(rng));
    SceneGraph stranger = random_graph(rng, 8);
    const double good = consistency_score(query, revisit, 1.0, RansacParams{});
    const double bad = consistency_score(query, stranger, 1.0, RansacParams{});
    CHECK(good == doctest::Approx(28.0).epsilon(1e-12));
    CHECK(bad < good);
}

TEST_CASE("reranking picks the geometrically consistent candidate") {
    Rng rng(131);
    SceneGraph query_graph = random_graph(rng, 6);
    SceneGraph partner = moved_copy(query_graph, random_pose(rng));
    const Eigen::VectorXd q_emb = random_vec(rng, 16);

    EmbeddingIndex index;
    // a decoy whose embedding is CLOSER than the true partner's
    Eigen::VectorXd decoy_emb = q_emb;
    decoy_emb[0] += 0.01;
    index.insert(record_of(1, 0.0, decoy_emb, random_graph(rng, 6)));
    Eigen::VectorXd partner_emb = q_emb;
    partner_emb[0] += 0.5;
    index.insert(record_of(2, 10.0, partner_emb, partner));

    RerankParams params;
    params.epsilon_c = 5.0;
    RevisitDecision d = rerank_classify(index, 77, q_emb, query_graph, 100.0, params);

    CHECK(d.query_id == 77);
    CHECK(d.candidate_id == 2);  // consistency outranks embedding distance
    CHECK(d.consistency == doctest::Approx(15.0).epsilon(1e-12));  // C(6,2)
    CHECK(d.is_revisit);
    REQUIRE(d.ranked.size() == 2);
    CHECK(d.ranked[0].candidate_id == 2);
    CHECK(d.ranked[1].candidate_id == 1);
    CHECK(d.ranked[0].consistency >= d.ranked[1].consistency);

    SUBCASE("a high threshold flips the call to not-a-revisit") {
        params.epsilon_c = 15.0;  // strictly greater is required
        RevisitDecision strict = rerank_classify(index, 77, q_emb, query_graph, 100.0, params);
        CHECK(strict.candidate_id == 2);
        CHECK(!strict.is_revisit);
    }
}

TEST_CASE("reranking with nothing reachable returns no candidate") {
    Rng rng(132);
    SceneGraph g = random_graph(rng, 5);
    EmbeddingIndex index;
    index.insert(record_of(1, 95.0, random_vec(rng, 16), random_graph(rng, 5)));

    RevisitDecision d = rerank_classify(index, 2, random_vec(rng, 16), g, 100.0, RerankParams{});
    CHECK(d.candidate_id == -1);
    CHECK(!d.is_revisit);
    CHECK(d.ranked.empty());
}

TEST_CASE("reranking honors top_k") {
    Rng rng(133);
    SceneGraph g = random_graph(rng, 4);
    EmbeddingIndex index;
    for (int i = 0; i < 30; ++i) {
        index.insert(record_of(i, static_cast<double>(i), random_vec(rng, 16),
                               random_graph(rng, 4)));
    }
    RerankParams params;
    params.top_k = 7;
    RevisitDecision d = rerank_classify(index, 99, random_vec(rng, 16), g, 1000.0, params);
    CHECK(d.ranked.size() == 7);
}

TEST_CASE("metrics on a perfect run") {
    std::vector<QueryOutcome> outcomes;
    for (int i = 0; i < 4; ++i) {
        outcomes.push_back(outcome(1.0 - 0.1 * i, 0.5, true, {0.5, 25.0, 25.0}));
    }
    MetricReport rep = eval_metrics(outcomes, 3.0, 20.0);
    CHECK(rep.recall_at_1 == 1.0);
    CHECK(rep.recall_at_5 == 1.0);
    CHECK(rep.f1_max == 1.0);
    CHECK(rep.curve.size() == 4);  // one point per distinct score
}

TEST_CASE("metrics expose a precision = recall = 0.5 operating point") {
    std::vector<QueryOutcome> outcomes;
    outcomes.push_back(outcome(0.9, 1.0, true));   // true positive
    outcomes.push_back(outcome(0.4, 30.0, true));  // false positive, its gt goes unmatched
    MetricReport rep = eval_metrics(outcomes, 3.0, 20.0);

    REQUIRE(rep.curve.size() == 2);
    // at the lower threshold both decisions are admitted
    CHECK(rep.curve[1].precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.curve[1].recall == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.curve[1].f1 == doctest::Approx(0.5).epsilon(1e-12));
    // the sweep keeps the better high-threshold point: P=1, R=0.5
    CHECK(rep.f1_max == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.best_threshold == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("recall at five sees positives the top decision missed") {
    std::vector<QueryOutcome> outcomes;
    // the positive shows up at rank 4 only
    outcomes.push_back(outcome(0.5, 25.0, true, {25.0, 25.0, 25.0, 1.0, 25.0}));
    MetricReport rep = eval_metrics(outcomes, 3.0, 20.0);
    CHECK(rep.recall_at_1 == 0.0);
    CHECK(rep.recall_at_5 == 1.0);

    // beyond rank 5 it no longer counts
    outcomes[0].ranked_gt_dist = {25.0, 25.0, 25.0, 25.0, 25.0, 1.0};
    rep = eval_metrics(outcomes, 3.0, 20.0);
    CHECK(rep.recall_at_5 == 0.0);
}

TEST_CASE("band decisions are ignored by both counters") {
    std::vector<QueryOutcome> outcomes;
    outcomes.push_back(outcome(0.8, 10.0, true));  // inside (r_tp, r_fp): neither TP nor FP
    MetricReport rep = eval_metrics(outcomes, 3.0, 20.0);
    REQUIRE(rep.curve.size() == 1);
    CHECK(rep.curve[0].precision == 0.0);
    CHECK(rep.curve[0].recall == 0.0);
    CHECK(rep.f1_max == 0.0);
}

TEST_CASE("metric sweep agrees with a brute-force oracle") {
    Rng rng(134);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<QueryOutcome> outcomes;
        const int n = 30;
        for (int i = 0; i < n; ++i) {
            QueryOutcome q;
            q.has_candidate = rng.uniform() < 0.9;
            // quantized scores force plenty of ties
            q.score = std::floor(rng.uniform(0.0, 5.0)) / 5.0;
            q.cand_gt_dist = rng.uniform(0.0, 30.0);
            q.has_gt_positive = q.cand_gt_dist <= 3.0 || rng.uniform() < 0.3;
            if (!q.has_candidate) {
                q.cand_gt_dist = 0.0;
                q.has_gt_positive = rng.uniform() < 0.5;
            }
            q.ranked_gt_dist = {q.cand_gt_dist};
            outcomes.push_back(std::move(q));
        }
        MetricReport got = eval_metrics(outcomes, 3.0, 20.0);
        CHECK(got.f1_max == doctest::Approx(f1_max_oracle(outcomes, 3.0, 20.0)).epsilon(1e-12));
        // f1_max dominates every point on the curve
        for (const auto& pt : got.curve) {
            CHECK(got.f1_max >= pt.f1 - 1e-12);
        }
    }
}

TEST_CASE("metrics validate their input") {
    std::vector<QueryOutcome> outcomes = {outcome(0.5, 1.0, true)};
    CHECK_THROWS_AS(eval_metrics(outcomes, 0.0, 20.0), std::invalid_argument);
    CHECK_THROWS_AS(eval_metrics(outcomes, 5.0, 3.0), std::invalid_argument);

    outcomes[0].cand_gt_dist = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(eval_metrics(outcomes, 3.0, 20.0), std::invalid_argument);

    outcomes[0].cand_gt_dist = 1.0;
    outcomes[0].ranked_gt_dist = {std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(eval_metrics(outcomes, 3.0, 20.0), std::invalid_argument);

    // a candidate-less query contributes no decision but keeps its gt flag
    std::vector<QueryOutcome> mixed = {outcome(0.9, 1.0, true)};
    QueryOutcome no_cand;
    no_cand.has_candidate = false;
    no_cand.has_gt_positive = true;
    mixed.push_back(no_cand);
    MetricReport rep = eval_metrics(mixed, 3.0, 20.0);
    CHECK(rep.curve.size() == 1);
    CHECK(rep.f1_max == doctest::Approx(2.0 / 3.0).epsilon(1e-12));  // fn from the silent query
}

TEST_CASE("empty outcome list gives empty metrics") {
    MetricReport rep = eval_metrics({}, 3.0, 20.0);
    CHECK(rep.recall_at_1 == 0.0);
    CHECK(rep.recall_at_5 == 0.0);
    CHECK(rep.f1_max == 0.0);
    CHECK(rep.curve.empty());
}
