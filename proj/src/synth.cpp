#include "regrace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regrace/rng.hpp"

namespace regrace {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// One generated object, described in whatever frame the scene lives in.
struct ObjSpec {
    int class_id = 0;
    int family = 0;  // 0 box, 1 ellipsoid, 2 cylinder shell, 3 plane patch
    Eigen::Vector3d size = Eigen::Vector3d::Ones();
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

Eigen::Matrix3d random_rotation(Rng& rng) {
    // uniform over SO(3) via a normalized random quaternion
    Eigen::Vector4d q;
    for (int i = 0; i < 4; ++i) q[i] = rng.normal();
    q.normalize();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return nearest_rotation(r);
}

Eigen::Vector3d random_unit(Rng& rng) {
    Eigen::Vector3d v;
    do {
        for (int i = 0; i < 3; ++i) v[i] = rng.normal();
    } while (v.norm() < 1e-9);
    return v.normalized();
}

/// Sample one point of a primitive in its local frame.
Eigen::Vector3d sample_local(Rng& rng, int family, const Eigen::Vector3d& size) {
    switch (family) {
        case 0: {  // solid box
            return {rng.uniform(-size.x() / 2, size.x() / 2),
                    rng.uniform(-size.y() / 2, size.y() / 2),
                    rng.uniform(-size.z() / 2, size.z() / 2)};
        }
        case 1: {  // solid ellipsoid
            Eigen::Vector3d dir = random_unit(rng);
            const double r = std::cbrt(rng.uniform());
            return (dir * r).cwiseProduct(size / 2.0);
        }
        case 2: {  // cylinder shell
            const double theta = rng.uniform(0.0, 2.0 * kPi);
            const double r = size.x() / 2;
            return {r * std::cos(theta), r * std::sin(theta),
                    rng.uniform(-size.z() / 2, size.z() / 2)};
        }
        default: {  // plane patch with a sliver of thickness
            return {rng.uniform(-size.x() / 2, size.x() / 2),
                    rng.uniform(-size.y() / 2, size.y() / 2), rng.uniform(-0.01, 0.01)};
        }
    }
}

/// Non-overlapping 2.5-d center placement by rejection, deterministic in rng.
std::vector<Eigen::Vector3d> place_centers(Rng& rng, int count, double extent, double separation) {
    std::vector<Eigen::Vector3d> centers;
    double sep = separation;
    int rejects = 0;
    while (static_cast<int>(centers.size()) < count) {
        Eigen::Vector3d c(rng.uniform(-extent / 2, extent / 2),
                          rng.uniform(-extent / 2, extent / 2), rng.uniform(-1.5, 1.5));
        bool ok = true;
        for (const Eigen::Vector3d& prev : centers) {
            if ((prev - c).norm() < sep) {
                ok = false;
                break;
            }
        }
        if (ok) {
            centers.push_back(c);
            rejects = 0;
        } else if (++rejects > 200) {
            sep *= 0.9;  // relax rather than loop forever on dense specs
            rejects = 0;
        }
    }
    return centers;
}

std::vector<ObjSpec> draw_objects(Rng& rng, const SceneSpec& s) {
    const std::vector<Eigen::Vector3d> centers =
        place_centers(rng, s.object_count, s.extent, s.min_separation);
    std::vector<ObjSpec> objs(s.object_count);
    for (int k = 0; k < s.object_count; ++k) {
        ObjSpec& o = objs[k];
        o.class_id = s.class_palette[rng.uniform_index(s.class_palette.size())];
        o.family = ((o.class_id % 4) + 4) % 4;
        o.size = {rng.uniform(0.8, 1.8), rng.uniform(0.8, 1.8), rng.uniform(0.8, 1.8)};
        o.rot = random_rotation(rng);
        o.center = centers[k];
    }
    return objs;
}

/// Renders the listed objects as one submap observed from `origin`: each kept
/// object is freshly point-sampled in its primitive frame, moved into the
/// observer's local frame, optionally perturbed with Gaussian noise, then the
/// whole cloud is voxelized. `kept` receives the indices of surviving
/// objects.
Submap observe(const std::vector<ObjSpec>& objs, const Pose& origin, Rng& rng,
               const SceneSpec& s, double noise_sigma, double dropout, std::int64_t id,
               double timestamp, std::vector<int>* kept) {
    std::vector<int> keep;
    for (std::size_t k = 0; k < objs.size(); ++k) {
        if (rng.uniform() >= dropout) keep.push_back(static_cast<int>(k));
    }

    const Pose to_local = origin.inverse();
    const std::int64_t total = static_cast<std::int64_t>(keep.size()) * s.points_per_object;
    PointMatrix pts(total, 3);
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(total, s.num_classes);
    std::int64_t row = 0;
    for (int k : keep) {
        const ObjSpec& o = objs[k];
        const Eigen::Vector3d center_local = to_local * o.center;
        const Eigen::Matrix3d rot_local = to_local.rotation() * o.rot;
        for (int i = 0; i < s.points_per_object; ++i) {
            Eigen::Vector3d p = rot_local * sample_local(rng, o.family, o.size) + center_local;
            if (noise_sigma > 0.0) {
                p += Eigen::Vector3d(rng.normal(0.0, noise_sigma), rng.normal(0.0, noise_sigma),
                                     rng.normal(0.0, noise_sigma));
            }
            pts.row(row) = p.transpose();
            probs(row, o.class_id) = 1.0;
            ++row;
        }
    }

    Submap sub;
    sub.id = id;
    sub.origin = origin;
    sub.timestamp = timestamp;
    sub.grid = voxelize(pts, probs, s.voxel_size);
    if (kept) *kept = std::move(keep);
    return sub;
}

}  // namespace

ScenePair generate_pair(const SceneSpec& spec) {
    if (spec.object_count < 1 || spec.points_per_object < 1) {
        throw std::invalid_argument("generate_pair: need at least one object and one point");
    }
    if (spec.dropout < 0.0 || spec.dropout >= 1.0 || spec.noise_sigma < 0.0) {
        throw std::invalid_argument("generate_pair: invalid noise/dropout");
    }
    for (int c : spec.class_palette) {
        if (c < 0 || c >= spec.num_classes) {
            throw std::invalid_argument("generate_pair: class id outside one-hot range");
        }
    }

    Rng rng(derive_seed(spec.seed, 0x7363656eULL));  // "scen"
    const std::vector<ObjSpec> objs = draw_objects(rng, spec);

    ScenePair out;
    std::vector<int> kept_a;
    out.a = observe(objs, Pose::identity(), rng, spec, 0.0, 0.0, 0, 0.0, &kept_a);

    const double angle =
        rng.uniform(spec.rot_min_deg, spec.rot_max_deg) * kPi / 180.0;
    const Eigen::Vector3d axis = random_unit(rng);
    const Eigen::Vector3d tdir = random_unit(rng);
    const double tmag = rng.uniform(spec.trans_min, spec.trans_max);
    out.gt = Pose(rotation_about(axis, angle), tdir * tmag);

    std::vector<int> kept_b;
    out.b = observe(objs, out.gt, rng, spec, spec.noise_sigma, spec.dropout, 1, 1000.0, &kept_b);

    out.a_centers.resize(objs.size(), 3);
    out.a_classes.resize(objs.size());
    for (std::size_t k = 0; k < objs.size(); ++k) {
        out.a_centers.row(k) = objs[k].center.transpose();
        out.a_classes[k] = objs[k].class_id;
    }
    const Pose to_b = out.gt.inverse();
    out.b_centers.resize(kept_b.size(), 3);
    out.b_classes.resize(kept_b.size());
    for (std::size_t i = 0; i < kept_b.size(); ++i) {
        out.b_centers.row(i) = (to_b * objs[kept_b[i]].center).transpose();
        out.b_classes[i] = objs[kept_b[i]].class_id;
        out.correspondences.emplace_back(kept_b[i], static_cast<int>(i));
    }
    return out;
}

SynthWorld generate_world(const WorldSpec& spec) {
    if (spec.submap_count < 1) {
        throw std::invalid_argument("generate_world: submap_count must be >= 1");
    }
    if (spec.revisit_fraction < 0.0 || spec.revisit_fraction > 1.0) {
        throw std::invalid_argument("generate_world: revisit_fraction must be in [0,1]");
    }

    const int n = spec.submap_count;
    const int n_revisit = static_cast<int>(std::llround(spec.revisit_fraction * n));
    const int n_base = n - n_revisit;

    Rng layout_rng(derive_seed(spec.seed, 0x776f726cULL));  // "worl"

    SynthWorld world;
    world.entries.resize(n);

    // Scene content of every base submap, kept in world coordinates so
    // revisits can re-observe it from a different frame.
    std::vector<std::vector<ObjSpec>> base_scenes(n_base);
    std::vector<Pose> base_poses(n_base);

    for (int i = 0; i < n_base; ++i) {
        const int row = i / spec.row_length;
        const int col = i % spec.row_length;
        const double x = (row % 2 == 0 ? col : spec.row_length - 1 - col) * spec.step;
        const double y = row * spec.row_spacing;
        const double yaw = (row % 2 == 0) ? 0.0 : kPi;
        const Pose origin(rotation_about(Eigen::Vector3d::UnitZ(), yaw), {x, y, 0.0});
        base_poses[i] = origin;

        Rng scene_rng(derive_seed(spec.seed, 1000 + static_cast<std::uint64_t>(i)));
        std::vector<ObjSpec> objs;
        const bool confuse = i > 0 && layout_rng.uniform() < spec.confuser_fraction;
        if (confuse) {
            // same class/size inventory as an earlier scene, fresh layout:
            // similar "bag of objects", different geometry
            const int donor = static_cast<int>(layout_rng.uniform_index(i));
            objs = base_scenes[donor];
            const std::vector<Eigen::Vector3d> centers = place_centers(
                scene_rng, static_cast<int>(objs.size()), spec.scene.extent,
                spec.scene.min_separation);
            for (std::size_t k = 0; k < objs.size(); ++k) {
                objs[k].center = centers[k];
                objs[k].rot = random_rotation(scene_rng);
            }
        } else {
            objs = draw_objects(scene_rng, spec.scene);
        }
        // lift local specification into world coordinates
        for (ObjSpec& o : objs) {
            o.center = origin * o.center;
            o.rot = origin.rotation() * o.rot;
        }
        base_scenes[i] = objs;

        WorldEntry& e = world.entries[i];
        e.timestamp = i * spec.dt;
        e.submap = observe(objs, origin, scene_rng, spec.scene, 0.0, 0.0, i, e.timestamp, nullptr);
        e.revisit_partner = -1;
    }

    for (int q = n_base; q < n; ++q) {
        const int max_partner = std::min(n_base, q - spec.min_partner_gap + 1);
        const int partner =
            max_partner > 0 ? static_cast<int>(layout_rng.uniform_index(max_partner)) : 0;

        const double off = layout_rng.uniform(0.0, spec.revisit_offset_max);
        const double bearing = layout_rng.uniform(0.0, 2.0 * kPi);
        const Eigen::Vector3d pos = base_poses[partner].translation() +
                                    Eigen::Vector3d(off * std::cos(bearing),
                                                    off * std::sin(bearing), 0.0);
        const bool reversed = layout_rng.uniform() < spec.reversed_fraction;
        const double yaw_noise = layout_rng.uniform(-5.0, 5.0) * kPi / 180.0;
        const Eigen::Matrix3d heading =
            rotation_about(Eigen::Vector3d::UnitZ(), (reversed ? kPi : 0.0) + yaw_noise) *
            base_poses[partner].rotation();
        const Pose origin(nearest_rotation(heading), pos);

        Rng scene_rng(derive_seed(spec.seed, 500000 + static_cast<std::uint64_t>(q)));
        WorldEntry& e = world.entries[q];
        e.timestamp = q * spec.dt;
        e.revisit_partner = partner;
        e.reversed = reversed;
        e.submap = observe(base_scenes[partner], origin, scene_rng, spec.scene, spec.noise_sigma,
                           spec.dropout, q, e.timestamp, nullptr);
    }

    return world;
}

}  // namespace regrace
