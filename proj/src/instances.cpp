#include "regrace/instances.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "regrace/grid.hpp"

namespace regrace {

namespace {

/// DBSCAN over one class's cells. `pts` rows are in sorted voxel-key order,
/// which is what makes every tie-break below deterministic.
///
/// Conventions (shared with the tests' brute-force oracle):
///  - the eps-neighborhood includes the cell itself and is inclusive at eps;
///  - a cell is core iff its neighborhood has >= min_pts members;
///  - clusters are the connected components of core cells (cores linked when
///    within eps of each other);
///  - a border cell (non-core with at least one core neighbor) joins the
///    cluster of its lowest-index core neighbor;
///  - remaining cells are noise; clusters below min_pts are discarded.
std::vector<std::vector<int>> dbscan(const PointMatrix& pts, double eps, int min_pts) {
    const int n = static_cast<int>(pts.rows());
    std::vector<std::vector<int>> clusters;
    if (n == 0) return clusters;

    UniformGrid3 grid(pts, eps);
    std::vector<std::vector<int>> nbrs(n);
    std::vector<bool> core(n, false);
    for (int i = 0; i < n; ++i) {
        nbrs[i] = grid.radius_neighbors(pts.row(i).transpose(), eps);
        core[i] = static_cast<int>(nbrs[i].size()) >= min_pts;
    }

    std::vector<int> label(n, -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || label[i] != -1) continue;
        // flood fill across core cells
        std::vector<int> stack{i};
        label[i] = next;
        while (!stack.empty()) {
            const int cur = stack.back();
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
        for (int nb : nbrs[i]) {  // ascending, so the first core is the lowest-index one
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
    for (auto& b : buckets) {
        if (static_cast<int>(b.size()) >= min_pts) clusters.push_back(std::move(b));
    }
    // flood-fill order already yields ascending lowest-member order; keep it
    // explicit so the contract survives refactors
    std::sort(clusters.begin(), clusters.end(),
              [](const std::vector<int>& a, const std::vector<int>& b) { return a.front() < b.front(); });
    return clusters;
}

int argmax_class(const Eigen::VectorXd& probs) {
    int best = 0;
    for (int c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;  // ties keep the lowest class id
    }
    return best;
}

}  // namespace

std::vector<ObjectInstance> cluster(const SemanticVoxelGrid& grid, const ClusterParams& params) {
    if (!(params.eps > 0.0) || params.min_pts < 1) {
        throw std::invalid_argument("cluster: eps must be > 0 and min_pts >= 1");
    }

    // Partition cells by argmax class, preserving sorted-key order per class.
    std::map<int, std::vector<const VoxelCell*>> by_class;
    for (const auto& [key, cell] : grid.cells) {
        const int cls = argmax_class(cell.mean_probs);
        if (params.excluded_classes.count(cls)) continue;
        by_class[cls].push_back(&cell);
    }

    std::vector<ObjectInstance> out;
    for (const auto& [cls, cells] : by_class) {
        PointMatrix pts(cells.size(), 3);
        for (std::size_t i = 0; i < cells.size(); ++i) pts.row(i) = cells[i]->centroid;

        for (const std::vector<int>& members : dbscan(pts, params.eps, params.min_pts)) {
            ObjectInstance inst;
            inst.class_id = cls;
            inst.cells.resize(members.size(), 3);
            for (std::size_t i = 0; i < members.size(); ++i) inst.cells.row(i) = pts.row(members[i]);
            inst.centroid = inst.cells.colwise().mean();
            out.push_back(std::move(inst));
        }
    }
    return out;
}

PointMatrix sample_fixed(const PointMatrix& points, int sample_size) {
    const int p = static_cast<int>(points.rows());
    if (p == 0) {
        throw std::invalid_argument("sample_fixed: empty instance");
    }
    if (sample_size < 1) {
        throw std::invalid_argument("sample_fixed: sample size must be >= 1");
    }
    if (!points.allFinite()) {
        throw std::invalid_argument("sample_fixed: non-finite coordinates");
    }

    const Eigen::RowVector3d centroid = points.colwise().mean();
    PointMatrix out(sample_size, 3);

    if (p >= sample_size) {
        // Seed a virtual reference at the point nearest the centroid; it only
        // initializes the distance field, so the first selection is already
        // the most peripheral point.
        int seed = 0;
        double seed_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < p; ++i) {
            const double d = (points.row(i) - centroid).squaredNorm();
            if (d < seed_d) {
                seed_d = d;
                seed = i;
            }
        }
        std::vector<double> mind(p);
        std::vector<bool> taken(p, false);
        for (int i = 0; i < p; ++i) mind[i] = (points.row(i) - points.row(seed)).norm();

        for (int t = 0; t < sample_size; ++t) {
            int pick = -1;
            double best = -1.0;
            for (int i = 0; i < p; ++i) {
                if (!taken[i] && mind[i] > best) {
                    best = mind[i];
                    pick = i;
                }
            }
            taken[pick] = true;
            out.row(t) = points.row(pick);
            for (int i = 0; i < p; ++i) {
                if (taken[i]) continue;
                const double d = (points.row(i) - points.row(pick)).norm();
                if (d < mind[i]) mind[i] = d;
            }
        }
        return out;
    }

    // Padding branch: keep everything, then repeat the most peripheral points.
    out.topRows(p) = points;
    std::vector<int> rank(p);
    std::iota(rank.begin(), rank.end(), 0);
    std::vector<double> r(p);
    for (int i = 0; i < p; ++i) r[i] = (points.row(i) - centroid).norm();
    std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return r[a] > r[b]; });
    for (int t = 0; t < sample_size - p; ++t) {
        out.row(p + t) = points.row(rank[t % p]);
    }
    return out;
}

}  // namespace regrace
