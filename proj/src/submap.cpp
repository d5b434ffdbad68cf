#include "regrace/submap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace regrace {

namespace {

constexpr double kProbRowTol = 1e-4;

void validate_probs(const Eigen::MatrixXd& probs) {
    if (!probs.allFinite()) {
        throw std::invalid_argument("class probabilities contain non-finite values");
    }
    for (int i = 0; i < probs.rows(); ++i) {
        if (std::abs(probs.row(i).sum() - 1.0) > kProbRowTol) {
            throw std::invalid_argument("class probability row does not sum to 1");
        }
    }
}

}  // namespace

SemanticVoxelGrid voxelize(const PointMatrix& points, const Eigen::MatrixXd& class_probs,
                           double voxel_size) {
    if (!(voxel_size > 0.0)) {
        throw std::invalid_argument("voxelize: voxel_size must be positive");
    }
    if (!points.allFinite()) {
        throw std::invalid_argument("voxelize: non-finite point coordinates");
    }
    if (points.rows() != class_probs.rows()) {
        throw std::invalid_argument("voxelize: point/probability row count mismatch");
    }
    validate_probs(class_probs);

    SemanticVoxelGrid grid;
    grid.voxel_size = voxel_size;

    std::map<VoxelKey, std::vector<int>> members;
    for (int i = 0; i < points.rows(); ++i) {
        const VoxelKey key{static_cast<std::int64_t>(std::floor(points(i, 0) / voxel_size)),
                           static_cast<std::int64_t>(std::floor(points(i, 1) / voxel_size)),
                           static_cast<std::int64_t>(std::floor(points(i, 2) / voxel_size))};
        members[key].push_back(i);
    }

    // Canonical member order (coordinates, then probability row) makes the
    // per-cell summation independent of how the input rows were arranged.
    const auto canon_less = [&](int a, int b) {
        for (int c = 0; c < 3; ++c) {
            if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
        }
        for (int c = 0; c < class_probs.cols(); ++c) {
            if (class_probs(a, c) != class_probs(b, c)) return class_probs(a, c) < class_probs(b, c);
        }
        return false;
    };

    for (auto& [key, idx] : members) {
        std::sort(idx.begin(), idx.end(), canon_less);
        Eigen::VectorXd prob_sum = Eigen::VectorXd::Zero(class_probs.cols());
        Eigen::Vector3d coord_sum = Eigen::Vector3d::Zero();
        for (int i : idx) {
            prob_sum += class_probs.row(i);
            coord_sum += points.row(i);
        }
        VoxelCell cell;
        cell.count = static_cast<int>(idx.size());
        cell.mean_probs = prob_sum / static_cast<double>(idx.size());
        cell.centroid = coord_sum / static_cast<double>(idx.size());
        grid.cells.emplace(key, std::move(cell));
    }
    return grid;
}

std::size_t accumulate_window(const std::vector<Pose>& poses, double max_span) {
    if (poses.empty()) {
        throw std::invalid_argument("accumulate: empty scan list");
    }
    const Eigen::Vector3d anchor = poses.front().translation();
    std::size_t n = 0;
    for (const Pose& p : poses) {
        if ((p.translation() - anchor).norm() <= max_span) {
            ++n;
        } else {
            break;
        }
    }
    return n;
}

std::size_t accumulate_window(const std::vector<LabeledScan>& scans, double max_span) {
    std::vector<Pose> poses;
    poses.reserve(scans.size());
    for (const LabeledScan& s : scans) poses.push_back(s.pose);
    return accumulate_window(poses, max_span);
}

Submap accumulate(const std::vector<LabeledScan>& scans, double max_span, double voxel_size,
                  std::int64_t id) {
    const std::size_t n = accumulate_window(scans, max_span);
    for (std::size_t i = 1; i < n; ++i) {
        if (!(scans[i].timestamp > scans[i - 1].timestamp)) {
            throw std::invalid_argument("accumulate: timestamps must be strictly increasing");
        }
    }

    const std::size_t mid = (n - 1) / 2;
    const Pose& origin = scans[mid].pose;

    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) total += scans[i].points.rows();
    const int n_classes = static_cast<int>(scans.front().class_probs.cols());

    PointMatrix pts(total, 3);
    Eigen::MatrixXd probs(total, n_classes);
    std::int64_t row = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (scans[i].class_probs.cols() != n_classes) {
            throw std::invalid_argument("accumulate: inconsistent class count across scans");
        }
        const Pose to_mid = relative(origin, scans[i].pose);  // scan frame -> middle frame
        const PointMatrix moved = apply(to_mid, scans[i].points);
        pts.middleRows(row, moved.rows()) = moved;
        probs.middleRows(row, moved.rows()) = scans[i].class_probs;
        row += moved.rows();
    }

    Submap out;
    out.id = id;
    out.origin = origin;
    out.timestamp = scans[mid].timestamp;
    out.grid = voxelize(pts, probs, voxel_size);
    return out;
}

}  // namespace regrace
