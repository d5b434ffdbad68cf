#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"
#include "regrace/submap.hpp"

namespace regrace {

/// Parameters for one synthetic scene pair with known ground truth.
struct SceneSpec {
    std::uint64_t seed = 1;
    int object_count = 20;
    std::vector<int> class_palette = {2, 3, 4, 5, 6, 7, 8, 9};
    int num_classes = 34;        // one-hot width of the emitted probabilities
    int points_per_object = 800;
    double noise_sigma = 0.0;    // m, per-coordinate Gaussian noise on B
    double dropout = 0.0;        // fraction of objects missing from B
    double rot_min_deg = 0.0;
    double rot_max_deg = 180.0;
    double trans_min = 0.0;      // m
    double trans_max = 10.0;     // m
    double extent = 32.0;        // m, square scene side objects are placed in
    double min_separation = 5.5; // m, between object centers
    double voxel_size = 0.1;     // m
};

/// A generated scene pair. B observes the same objects as A from a frame
/// displaced by `gt` (gt maps B-frame coordinates into the A frame), with
/// fresh point samples, optional noise, and optional per-object dropout.
struct ScenePair {
    Submap a;  // origin = identity
    Submap b;  // origin = gt
    Pose gt;
    std::vector<std::pair<int, int>> correspondences;  // (A object idx, B object idx)
    PointMatrix a_centers;  // exact generative centers, A frame
    PointMatrix b_centers;  // exact generative centers of surviving objects, B frame
    std::vector<int> a_classes;
    std::vector<int> b_classes;
};

ScenePair generate_pair(const SceneSpec& spec);

/// Parameters for a synthetic trajectory of submaps with annotated revisits.
struct WorldSpec {
    std::uint64_t seed = 7;
    int submap_count = 200;
    double step = 10.0;            // m between consecutive submap origins
    int row_length = 40;           // submaps per serpentine row
    double row_spacing = 30.0;     // m between rows (> typical r_fp)
    double revisit_fraction = 0.2; // fraction of submaps that are revisits
    double revisit_offset_max = 2.0;  // m, positional offset of a revisit
    double reversed_fraction = 0.5;   // revisits observed with flipped heading
    double confuser_fraction = 0.15;  // scenes reusing an earlier class multiset
    double dt = 1.0;               // s between submaps
    int min_partner_gap = 31;      // steps between a revisit and its partner
    double noise_sigma = 0.0;      // m, re-observation noise for revisits
    double dropout = 0.0;          // object dropout for revisits
    SceneSpec scene;               // per-scene object parameters
};

/// One trajectory entry: the submap (grid in its own frame), its ground-truth
/// world pose (== submap.origin), and the loop partner when this submap is a
/// revisit (-1 otherwise).
struct WorldEntry {
    Submap submap;
    double timestamp = 0.0;
    int revisit_partner = -1;
    bool reversed = false;  // revisit observed with flipped heading
};

struct SynthWorld {
    std::vector<WorldEntry> entries;
};

SynthWorld generate_world(const WorldSpec& spec);

}  // namespace regrace
