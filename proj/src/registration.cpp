#include "regrace/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "regrace/grid.hpp"
#include "regrace/rng.hpp"

namespace regrace {

namespace {

constexpr double kDegenerateCross = 1e-9;
constexpr double kBoundaryGrace = 1e-9;

const Eigen::MatrixXd& matching_block(const SceneGraph& g, MatchFeatures on) {
    if (on == MatchFeatures::enriched) {
        if (!g.has_enriched) {
            throw std::invalid_argument("match_features: enriched features requested but absent");
        }
        return g.enriched_features;
    }
    return g.features;
}

/// Index of the row of `rows` closest to `probe` in L2, ties to lowest index.
int nearest_row(const Eigen::MatrixXd& rows, const Eigen::RowVectorXd& probe) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < rows.rows(); ++i) {
        const double d = (rows.row(i) - probe).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

bool triangle_degenerate(const PointMatrix& pts, int a, int b, int c) {
    const Eigen::Vector3d u = pts.row(b) - pts.row(a);
    const Eigen::Vector3d v = pts.row(c) - pts.row(a);
    return u.cross(v).norm() < kDegenerateCross;
}

std::vector<Correspondence> inliers_under(const std::vector<Correspondence>& corrs,
                                          const PointMatrix& qc, const PointMatrix& cc,
                                          const Pose& t, double tol) {
    std::vector<Correspondence> in;
    for (const Correspondence& c : corrs) {
        const Eigen::Vector3d moved = t * Eigen::Vector3d(cc.row(c.candidate_node).transpose());
        if ((moved - Eigen::Vector3d(qc.row(c.query_node).transpose())).norm() <= tol) {
            in.push_back(c);
        }
    }
    return in;
}

double rmse_of(const std::vector<Correspondence>& in, const PointMatrix& qc, const PointMatrix& cc,
               const Pose& t) {
    if (in.empty()) return 0.0;
    double acc = 0.0;
    for (const Correspondence& c : in) {
        const Eigen::Vector3d moved = t * Eigen::Vector3d(cc.row(c.candidate_node).transpose());
        acc += (moved - Eigen::Vector3d(qc.row(c.query_node).transpose())).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(in.size()));
}

Pose fit_on(const std::vector<Correspondence>& set, const PointMatrix& qc, const PointMatrix& cc) {
    PointMatrix src(set.size(), 3), dst(set.size(), 3);
    for (std::size_t i = 0; i < set.size(); ++i) {
        src.row(i) = cc.row(set[i].candidate_node);
        dst.row(i) = qc.row(set[i].query_node);
    }
    return fit_rigid(src, dst);
}

}  // namespace

std::vector<Correspondence> match_features(const SceneGraph& query, const SceneGraph& candidate,
                                           MatchFeatures on) {
    const Eigen::MatrixXd& fq = matching_block(query, on);
    const Eigen::MatrixXd& fc = matching_block(candidate, on);
    if (fq.cols() != fc.cols()) {
        throw std::invalid_argument("match_features: feature dimensions differ");
    }

    std::vector<Correspondence> out;
    if (fq.rows() == 0 || fc.rows() == 0) return out;

    std::vector<int> best_c(fq.rows());
    for (int i = 0; i < fq.rows(); ++i) best_c[i] = nearest_row(fc, fq.row(i));
    std::vector<int> best_q(fc.rows());
    for (int j = 0; j < fc.rows(); ++j) best_q[j] = nearest_row(fq, fc.row(j));

    for (int i = 0; i < fq.rows(); ++i) {
        const int j = best_c[i];
        if (best_q[j] == i) {
            out.push_back({i, j, (fq.row(i) - fc.row(j)).norm()});
        }
    }
    return out;
}

Pose fit_rigid(const PointMatrix& src, const PointMatrix& dst) {
    if (src.rows() != dst.rows() || src.rows() < 3) {
        throw std::invalid_argument("fit_rigid: need >= 3 matched rows");
    }
    const Eigen::RowVector3d cs = src.colwise().mean();
    const Eigen::RowVector3d cd = dst.colwise().mean();
    const PointMatrix a = src.rowwise() - cs;
    const PointMatrix b = dst.rowwise() - cd;
    const Eigen::Matrix3d h = a.transpose() * b;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixV() * svd.matrixU().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        r = svd.matrixV() * flip * svd.matrixU().transpose();
    }
    r = nearest_rotation(r);  // absorb SVD round-off so Pose validation holds
    const Eigen::Vector3d t = cd.transpose() - r * cs.transpose();
    return Pose(r, t);
}

TransformEstimate ransac_align(const std::vector<Correspondence>& corrs,
                               const PointMatrix& query_centroids,
                               const PointMatrix& candidate_centroids,
                               const RansacParams& params) {
    const int n = static_cast<int>(corrs.size());
    if (n < 3) {
        throw std::invalid_argument("ransac_align: need at least 3 correspondences");
    }

    PointMatrix src(n, 3), dst(n, 3);
    for (int i = 0; i < n; ++i) {
        src.row(i) = candidate_centroids.row(corrs[i].candidate_node);
        dst.row(i) = query_centroids.row(corrs[i].query_node);
    }

    const auto evaluate = [&](int a, int b, int c) -> std::pair<int, Pose> {
        if (triangle_degenerate(src, a, b, c) || triangle_degenerate(dst, a, b, c)) {
            return {-1, Pose::identity()};
        }
        PointMatrix s(3, 3), d(3, 3);
        s.row(0) = src.row(a);
        s.row(1) = src.row(b);
        s.row(2) = src.row(c);
        d.row(0) = dst.row(a);
        d.row(1) = dst.row(b);
        d.row(2) = dst.row(c);
        const Pose t = fit_rigid(s, d);
        int count = 0;
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector3d moved = t * Eigen::Vector3d(src.row(i).transpose());
            if ((moved - Eigen::Vector3d(dst.row(i).transpose())).norm() <= params.inlier_tol) ++count;
        }
        return {count, t};
    };

    int best_count = -1;
    Pose best_pose = Pose::identity();

    const std::int64_t n64 = n;
    const std::int64_t all_triples = n64 * (n64 - 1) * (n64 - 2) / 6;
    if (all_triples <= params.max_iters) {
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                for (int c = b + 1; c < n; ++c) {
                    const auto [count, pose] = evaluate(a, b, c);
                    if (count > best_count) {  // strict: earlier hypothesis wins ties
                        best_count = count;
                        best_pose = pose;
                    }
                }
            }
        }
    } else {
        Rng rng(derive_seed(params.seed, 0x72616eULL));  // "ran"
        double needed = static_cast<double>(params.max_iters);
        for (int it = 0; it < params.max_iters && it < needed; ++it) {
            const int a = static_cast<int>(rng.uniform_index(n));
            int b = static_cast<int>(rng.uniform_index(n - 1));
            if (b >= a) ++b;
            int c = static_cast<int>(rng.uniform_index(n - 2));
            if (c >= std::min(a, b)) ++c;
            if (c >= std::max(a, b)) ++c;
            const auto [count, pose] = evaluate(a, b, c);
            if (count > best_count) {
                best_count = count;
                best_pose = pose;
                const double w = static_cast<double>(count) / n;
                const double p_good = w * w * w;
                if (p_good > 0.0 && p_good < 1.0) {
                    needed = std::log(1.0 - params.confidence) / std::log(1.0 - p_good);
                } else if (p_good >= 1.0) {
                    needed = 0.0;
                }
            }
        }
    }

    TransformEstimate est;
    est.stage = TransformEstimate::Stage::coarse;

    if (best_count < 0) {
        // every triple degenerate (e.g. all centroids collinear): degrade to
        // the full least-squares fit
        est.transform = fit_rigid(src, dst);
        est.degraded = true;
        est.inliers =
            inliers_under(corrs, query_centroids, candidate_centroids, est.transform, params.inlier_tol);
        est.rmse = rmse_of(est.inliers, query_centroids, candidate_centroids, est.transform);
        return est;
    }

    // Re-fit on the winning inlier set until it stabilizes, so the reported
    // inliers are exactly those within tolerance of the reported transform.
    Pose t = best_pose;
    std::vector<Correspondence> in =
        inliers_under(corrs, query_centroids, candidate_centroids, t, params.inlier_tol);
    for (int round = 0; round < 10 && static_cast<int>(in.size()) >= 3; ++round) {
        const Pose refit = fit_on(in, query_centroids, candidate_centroids);
        std::vector<Correspondence> next =
            inliers_under(corrs, query_centroids, candidate_centroids, refit, params.inlier_tol);
        t = refit;
        if (next.size() == in.size() &&
            std::equal(next.begin(), next.end(), in.begin(),
                       [](const Correspondence& x, const Correspondence& y) {
                           return x.query_node == y.query_node &&
                                  x.candidate_node == y.candidate_node;
                       })) {
            in = std::move(next);
            break;
        }
        in = std::move(next);
    }
    est.transform = t;
    est.inliers = std::move(in);
    est.rmse = rmse_of(est.inliers, query_centroids, candidate_centroids, est.transform);
    est.degraded = static_cast<int>(est.inliers.size()) < 3;
    return est;
}

TransformEstimate icp_refine(const TransformEstimate& coarse, const PointMatrix& query_points,
                             const PointMatrix& candidate_points, const IcpParams& params) {
    TransformEstimate out = coarse;
    out.stage = TransformEstimate::Stage::refined;
    if (query_points.rows() == 0 || candidate_points.rows() == 0) {
        out.degraded = true;
        return out;
    }

    UniformGrid3 grid(query_points, params.nn_cap);
    Pose t = coarse.transform;
    double final_rmse = coarse.rmse;
    bool associated_once = false;

    for (int it = 0; it < params.max_iters; ++it) {
        PointMatrix moved = apply(t, candidate_points);
        std::vector<int> src_idx, dst_idx;
        src_idx.reserve(candidate_points.rows());
        for (int i = 0; i < moved.rows(); ++i) {
            const int j = grid.nearest_within(moved.row(i).transpose(), params.nn_cap);
            if (j >= 0) {
                src_idx.push_back(i);
                dst_idx.push_back(j);
            }
        }
        if (src_idx.size() < 3) {
            if (!associated_once) {
                out.degraded = true;
                return out;  // keep the coarse transform untouched
            }
            break;
        }
        associated_once = true;

        PointMatrix s(src_idx.size(), 3), d(dst_idx.size(), 3);
        double acc = 0.0;
        for (std::size_t k = 0; k < src_idx.size(); ++k) {
            s.row(k) = candidate_points.row(src_idx[k]);
            d.row(k) = query_points.row(dst_idx[k]);
            acc += (moved.row(src_idx[k]) - query_points.row(dst_idx[k])).squaredNorm();
        }
        final_rmse = std::sqrt(acc / static_cast<double>(src_idx.size()));

        const Pose t_new = fit_rigid(s, d);

        // convergence: largest displacement any candidate point experiences
        // between the successive transforms
        const PointMatrix before = apply(t, candidate_points);
        const PointMatrix after = apply(t_new, candidate_points);
        const double shift = (after - before).rowwise().norm().maxCoeff();
        t = t_new;
        if (shift < params.tol) {
            // final association for the reported rmse
            const PointMatrix fin = apply(t, candidate_points);
            double facc = 0.0;
            int fcount = 0;
            for (int i = 0; i < fin.rows(); ++i) {
                const int j = grid.nearest_within(fin.row(i).transpose(), params.nn_cap);
                if (j >= 0) {
                    facc += (fin.row(i) - query_points.row(j)).squaredNorm();
                    ++fcount;
                }
            }
            if (fcount > 0) final_rmse = std::sqrt(facc / fcount);
            break;
        }
    }

    out.transform = t;
    out.rmse = final_rmse;
    return out;
}

RegistrationEval eval_registration(const Pose& est, const Pose& gt, double rre_max_deg,
                                   double rte_max_m) {
    RegistrationEval e;
    e.rre_deg = rotation_error_deg(est, gt);
    e.rte_m = translation_error_m(est, gt);
    e.success =
        e.rre_deg <= rre_max_deg + kBoundaryGrace && e.rte_m <= rte_max_m + kBoundaryGrace;
    return e;
}

TransformEstimate register_pair(const SubmapFeatures& query, const SubmapFeatures& candidate,
                                const RansacParams& ransac, const IcpParams& icp,
                                MatchFeatures on) {
    const std::vector<Correspondence> corrs = match_features(query.graph, candidate.graph, on);
    TransformEstimate coarse =
        ransac_align(corrs, query.graph.centroids, candidate.graph.centroids, ransac);

    // gather the voxel cells of the inlier objects on both sides
    std::int64_t nq = 0, nc = 0;
    for (const Correspondence& c : coarse.inliers) {
        nq += query.instances[c.query_node].cells.rows();
        nc += candidate.instances[c.candidate_node].cells.rows();
    }
    PointMatrix qpts(nq, 3), cpts(nc, 3);
    std::int64_t rq = 0, rc = 0;
    for (const Correspondence& c : coarse.inliers) {
        const auto& qcells = query.instances[c.query_node].cells;
        const auto& ccells = candidate.instances[c.candidate_node].cells;
        qpts.middleRows(rq, qcells.rows()) = qcells;
        cpts.middleRows(rc, ccells.rows()) = ccells;
        rq += qcells.rows();
        rc += ccells.rows();
    }

    return icp_refine(coarse, qpts, cpts, icp);
}

}  // namespace regrace
