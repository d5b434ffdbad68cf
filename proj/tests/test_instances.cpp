#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "regrace/instances.hpp"
#include "regrace/rng.hpp"
#include "regrace/submap.hpp"

using namespace regrace;

namespace {

Eigen::VectorXd one_hot(int cls, int num_classes) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(num_classes);
    p[cls] = 1.0;
    return p;
}

/// Grid whose i-th cell (in key order) carries pts.row(i) and class cls[i].
SemanticVoxelGrid make_grid(const PointMatrix& pts, const std::vector<int>& cls,
                            int num_classes = 10) {
    SemanticVoxelGrid grid;
    grid.voxel_size = 0.1;
    for (int i = 0; i < pts.rows(); ++i) {
        VoxelKey key{i, 0, 0};
        VoxelCell cell;
        cell.mean_probs = one_hot(cls[i], num_classes);
        cell.count = 1;
        cell.centroid = pts.row(i).transpose();
        grid.cells[key] = cell;
    }
    return grid;
}

PointMatrix blob(Rng& rng, const Eigen::Vector3d& center, int n, double radius) {
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        pts.row(i) = (center + radius * d).transpose();
    }
    return pts;
}

/// Reference density clustering, one class at a time, written independently
/// of the library: quadratic neighbor scan, explicit core/border rules.
std::vector<std::vector<int>> dbscan_oracle(const PointMatrix& pts, double eps, int min_pts) {
    const int n = static_cast<int>(pts.rows());
    std::vector<std::vector<int>> nbrs(n);
    std::vector<bool> core(n, false);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if ((pts.row(i) - pts.row(j)).norm() <= eps) nbrs[i].push_back(j);
        }
        core[i] = static_cast<int>(nbrs[i].size()) >= min_pts;
    }

    std::vector<int> label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || label[i] != -1) continue;
        std::vector<int> stack{i};
        label[i] = next;
        while (!stack.empty()) {
            int cur = stack.back();
            stack.pop_back();
            for (int nb : nbrs[cur]) {
                if (core[nb] && label[nb] == -1) {
                    label[nb] = next;
                    stack.push_back(nb);
                }
            }
        }
        ++next;
    }
    for (int i = 0; i < n; ++i) {
        if (core[i] || label[i] != -1) continue;
        for (int nb : nbrs[i]) {
            if (core[nb]) {
                label[i] = label[nb];
                break;
            }
        }
    }

    std::vector<std::vector<int>> buckets(next);
    for (int i = 0; i < n; ++i) {
        if (label[i] >= 0) buckets[label[i]].push_back(i);
    }
    std::vector<std::vector<int>> clusters;
    for (auto& b : buckets) {
        if (static_cast<int>(b.size()) >= min_pts) clusters.push_back(std::move(b));
    }
    return clusters;
}

/// Canonical partition form: each cluster as its sorted member indices, the
/// whole set sorted, so cluster ordering and ids drop out of the comparison.
std::set<std::vector<int>> canon(std::vector<std::vector<int>> clusters) {
    std::set<std::vector<int>> out;
    for (auto& c : clusters) {
        std::sort(c.begin(), c.end());
        out.insert(c);
    }
    return out;
}

/// Maps instance member coordinates back to input indices. Coordinates are
/// copied verbatim through clustering, so exact comparison is safe.
std::set<std::vector<int>> canon_instances(const std::vector<ObjectInstance>& instances,
                                           const PointMatrix& pts) {
    std::map<std::array<double, 3>, int> index;
    for (int i = 0; i < pts.rows(); ++i) {
        index[{pts(i, 0), pts(i, 1), pts(i, 2)}] = i;
    }
    std::vector<std::vector<int>> clusters;
    for (const auto& inst : instances) {
        std::vector<int> members;
        for (int r = 0; r < inst.cells.rows(); ++r) {
            auto it = index.find({inst.cells(r, 0), inst.cells(r, 1), inst.cells(r, 2)});
            REQUIRE(it != index.end());
            members.push_back(it->second);
        }
        clusters.push_back(std::move(members));
    }
    return canon(std::move(clusters));
}

}  // namespace

TEST_CASE("two well-separated blobs become two instances") {
    Rng rng(51);
    const Eigen::Vector3d ca(0, 0, 0), cb(10, 0, 0);
    PointMatrix pts(100, 3);
    pts.topRows(50) = blob(rng, ca, 50, 0.5);
    pts.bottomRows(50) = blob(rng, cb, 50, 0.5);
    std::vector<int> cls(100, 4);

    ClusterParams params;
    params.eps = 1.0;  // every within-blob pair <= 2*0.5*sqrt(3) is bridged via the dense core
    params.min_pts = 10;
    auto instances = cluster(make_grid(pts, cls), params);

    REQUIRE(instances.size() == 2);
    for (const auto& inst : instances) {
        CHECK(inst.class_id == 4);
        CHECK(inst.cells.rows() == 50);
        // centroid is the mean of the member cells
        CHECK((inst.centroid.transpose() - inst.cells.colwise().mean()).norm() < 1e-12);
    }
    // one instance per blob, near its center
    std::vector<double> dist_a;
    for (const auto& inst : instances) dist_a.push_back((inst.centroid - ca).norm());
    std::sort(dist_a.begin(), dist_a.end());
    CHECK(dist_a[0] < 1.0);
    CHECK(dist_a[1] > 9.0);
}

TEST_CASE("groups smaller than min_pts are dropped") {
    Rng rng(52);
    PointMatrix pts = blob(rng, Eigen::Vector3d::Zero(), 5, 0.2);
    std::vector<int> cls(5, 2);
    ClusterParams params;
    params.eps = 1.0;
    params.min_pts = 10;
    CHECK(cluster(make_grid(pts, cls), params).empty());
}

TEST_CASE("min_pts=1 keeps isolated cells as singleton instances") {
    PointMatrix pts(3, 3);
    pts << 0, 0, 0, 5, 0, 0, 0, 5, 0;
    std::vector<int> cls(3, 1);
    ClusterParams params;
    params.eps = 0.5;
    params.min_pts = 1;
    auto instances = cluster(make_grid(pts, cls), params);
    REQUIRE(instances.size() == 3);
    for (const auto& inst : instances) CHECK(inst.cells.rows() == 1);
}

TEST_CASE("clustering matches a brute-force reference partition") {
    Rng rng(53);
    const int n = 300;
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i) {
        pts.row(i) << rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0);
    }
    std::vector<int> cls(n, 6);

    for (double eps : {0.25, 0.35, 0.5}) {
        for (int min_pts : {1, 3, 5}) {
            CAPTURE(eps);
            CAPTURE(min_pts);
            ClusterParams params;
            params.eps = eps;
            params.min_pts = min_pts;
            auto instances = cluster(make_grid(pts, cls), params);
            CHECK(canon_instances(instances, pts) == canon(dbscan_oracle(pts, eps, min_pts)));
        }
    }
}

TEST_CASE("classes cluster independently and excluded classes are skipped") {
    Rng rng(54);
    // two co-located blobs of different classes: same coordinates, but they
    // must not merge because clustering is per class
    PointMatrix pts(60, 3);
    pts.topRows(30) = blob(rng, Eigen::Vector3d::Zero(), 30, 0.4);
    pts.bottomRows(30) = pts.topRows(30);
    std::vector<int> cls(60, 3);
    std::fill(cls.begin() + 30, cls.end(), 7);

    ClusterParams params;
    params.eps = 1.0;
    params.min_pts = 10;

    auto both = cluster(make_grid(pts, cls), params);
    REQUIRE(both.size() == 2);
    CHECK(both[0].class_id == 3);  // ascending class order
    CHECK(both[1].class_id == 7);

    params.excluded_classes = {7};
    auto kept = cluster(make_grid(pts, cls), params);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].class_id == 3);

    params.excluded_classes = {3, 7};
    CHECK(cluster(make_grid(pts, cls), params).empty());
}

TEST_CASE("instances are identical regardless of scan point order") {
    Rng rng(55);
    const int n = 400;
    PointMatrix pts(n, 3);
    Eigen::MatrixXd probs(n, 8);
    for (int i = 0; i < n; ++i) {
        pts.row(i) << rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-0.5, 0.5);
        probs.row(i) = one_hot(static_cast<int>(rng.uniform_index(8)), 8).transpose();
    }

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int i = n - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.uniform_index(static_cast<std::size_t>(i) + 1)]);
    }
    PointMatrix pts2(n, 3);
    Eigen::MatrixXd probs2(n, 8);
    for (int i = 0; i < n; ++i) {
        pts2.row(i) = pts.row(perm[i]);
        probs2.row(i) = probs.row(perm[i]);
    }

    ClusterParams params;
    params.eps = 0.6;
    params.min_pts = 4;
    auto a = cluster(voxelize(pts, probs, 0.25), params);
    auto b = cluster(voxelize(pts2, probs2, 0.25), params);

    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].class_id == b[i].class_id);
        REQUIRE(a[i].cells.rows() == b[i].cells.rows());
        CHECK((a[i].cells.array() == b[i].cells.array()).all());
        CHECK((a[i].centroid.array() == b[i].centroid.array()).all());
    }
}

TEST_CASE("every instance meets the size floor and carries the mean centroid") {
    Rng rng(56);
    const int n = 250;
    PointMatrix pts(n, 3);
    for (int i = 0; i < n; ++i) {
        pts.row(i) << rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0);
    }
    std::vector<int> cls(n);
    for (int i = 0; i < n; ++i) cls[i] = static_cast<int>(rng.uniform_index(3));

    ClusterParams params;
    params.eps = 0.45;
    params.min_pts = 4;
    auto instances = cluster(make_grid(pts, cls), params);
    CHECK(!instances.empty());
    for (const auto& inst : instances) {
        CHECK(inst.cells.rows() >= params.min_pts);
        CHECK((inst.centroid.transpose() - inst.cells.colwise().mean()).norm() < 1e-12);
        CHECK(inst.sampled.rows() == 0);  // sampling has not run yet
    }
}

TEST_CASE("cluster validates its parameters") {
    SemanticVoxelGrid grid;
    ClusterParams params;
    params.eps = 0.0;
    CHECK_THROWS_AS(cluster(grid, params), std::invalid_argument);
    params.eps = 0.2;
    params.min_pts = 0;
    CHECK_THROWS_AS(cluster(grid, params), std::invalid_argument);
}

TEST_CASE("sampling with p == P returns a permutation of the input") {
    Rng rng(57);
    PointMatrix pts(10, 3);
    for (int i = 0; i < 10; ++i) {
        pts.row(i) << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    }
    PointMatrix out = sample_fixed(pts, 10);
    REQUIRE(out.rows() == 10);

    auto rows_sorted = [](const PointMatrix& m) {
        std::vector<std::array<double, 3>> rows;
        for (int i = 0; i < m.rows(); ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
        std::sort(rows.begin(), rows.end());
        return rows;
    };
    CHECK(rows_sorted(out) == rows_sorted(pts));
}

TEST_CASE("padding repeats the points farthest from the centroid") {
    PointMatrix pts(3, 3);
    pts << 0, 0, 0,   // dist to centroid ~3.3667
        10, 0, 0,     // ~6.6333, most peripheral
        0.1, 0, 0;    // ~3.2667, least
    PointMatrix out = sample_fixed(pts, 5);
    REQUIRE(out.rows() == 5);
    // first p rows preserve input order
    CHECK((out.topRows(3).array() == pts.array()).all());
    // pads: peripheral ranking is row1, row0, row2
    CHECK((out.row(3).array() == pts.row(1).array()).all());
    CHECK((out.row(4).array() == pts.row(0).array()).all());
}

TEST_CASE("padding cycles through the peripheral ranking") {
    PointMatrix pts(2, 3);
    pts << 0, 0, 0, 4, 0, 0;  // equidistant from centroid; stable rank keeps input order
    PointMatrix out = sample_fixed(pts, 7);
    REQUIRE(out.rows() == 7);
    for (int t = 0; t < 7; ++t) {
        CHECK((out.row(t).array() == pts.row(t % 2).array()).all());
    }
}

TEST_CASE("farthest-point sampling picks the extreme corners") {
    Rng rng(58);
    PointMatrix pts(104, 3);
    for (int i = 0; i < 100; ++i) {
        pts.row(i) << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    }
    pts.row(100) << 50, 50, 0;
    pts.row(101) << 50, -50, 0;
    pts.row(102) << -50, 50, 0;
    pts.row(103) << -50, -50, 0;

    PointMatrix out = sample_fixed(pts, 4);
    REQUIRE(out.rows() == 4);
    std::set<std::array<double, 3>> got, want;
    for (int i = 0; i < 4; ++i) {
        got.insert({out(i, 0), out(i, 1), out(i, 2)});
        want.insert({pts(100 + i, 0), pts(100 + i, 1), pts(100 + i, 2)});
    }
    CHECK(got == want);
}

TEST_CASE("farthest-point ties go to the lowest index") {
    PointMatrix pts(3, 3);
    pts << 0, 0, 0, 1, 0, 0, -1, 0, 0;
    // seed = row0 (nearest centroid); rows 1 and 2 tie at distance 1
    PointMatrix out = sample_fixed(pts, 2);
    CHECK((out.row(0).array() == pts.row(1).array()).all());
    CHECK((out.row(1).array() == pts.row(2).array()).all());
}

TEST_CASE("sampling validates its input") {
    PointMatrix empty(0, 3);
    CHECK_THROWS_AS(sample_fixed(empty, 4), std::invalid_argument);
    PointMatrix pts(2, 3);
    pts.setZero();
    CHECK_THROWS_AS(sample_fixed(pts, 0), std::invalid_argument);
    pts(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sample_fixed(pts, 4), std::invalid_argument);
}
