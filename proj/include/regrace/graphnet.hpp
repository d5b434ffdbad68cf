#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"
#include "regrace/instances.hpp"

namespace regrace {

/// Fully connected object graph of one submap. `features` are the 128-d
/// local descriptors; `edges` holds the normalized centroid distances
/// e_ij = ||c_i - c_j|| / alpha (symmetric, zero diagonal). The enriched
/// block is filled by egnn_forward, the global embedding by gem_pool.
struct SceneGraph {
    PointMatrix centroids;       // K x 3 (m), original keypoints c_i
    Eigen::MatrixXd features;    // K x 128
    Eigen::MatrixXd edges;       // K x K, unitless
    double alpha = 0.0;          // edge normalizer used at build time (m)

    bool has_enriched = false;
    Eigen::MatrixXd enriched_features;  // K x 512
    PointMatrix enriched_coords;        // K x 3

    bool has_global = false;
    Eigen::VectorXd global;  // 256

    int size() const { return static_cast<int>(centroids.rows()); }
};

/// One equivariant message-passing layer. All matrices are stored
/// (input-dim x output-dim); activations apply rowwise to batched inputs.
struct EgnnLayer {
    Eigen::MatrixXd edge_w1, edge_w2;  // (2H+2) x H, H x H
    Eigen::VectorXd edge_b1, edge_b2;  // H
    Eigen::MatrixXd coord_w1;          // H x H
    Eigen::VectorXd coord_b1;          // H
    Eigen::VectorXd coord_w2;          // H (maps H -> 1)
    double coord_b2 = 0.0;
    Eigen::MatrixXd node_w1, node_w2;  // 2H x H, H x H
    Eigen::VectorXd node_b1, node_b2;  // H
};

/// Complete parameter set: input embedding, message-passing layers, output
/// head, GeM exponent, pooled-to-global projection, and the tensor similarity
/// head (s bilinear slices + pair map + bias + s->1 output map).
struct NetWeights {
    Eigen::MatrixXd embed_w;  // 128 x H
    Eigen::VectorXd embed_b;  // H
    std::vector<EgnnLayer> layers;
    Eigen::MatrixXd out_w;  // H x 512
    Eigen::VectorXd out_b;  // 512

    double gem_lambda = 3.0;
    Eigen::MatrixXd projection;  // 512 x 256, bias-free

    std::vector<Eigen::MatrixXd> tnn_slices;  // s of 256 x 256
    Eigen::MatrixXd tnn_pair;                 // 512 x 16
    Eigen::VectorXd tnn_bias;                 // 16
    Eigen::VectorXd tnn_out;                  // 16

    int hidden() const { return static_cast<int>(embed_w.cols()); }
    int feature_dim() const { return static_cast<int>(embed_w.rows()); }
    int output_dim() const { return static_cast<int>(out_w.cols()); }
    int global_dim() const { return static_cast<int>(projection.cols()); }
    int slices() const { return static_cast<int>(tnn_slices.size()); }
};

/// Throws std::invalid_argument if any shape is inconsistent, a value is
/// non-finite, gem_lambda <= 0, or the slice count differs from 16.
void validate_weights(const NetWeights& w);

/// Seeded Xavier-style initialization (biases zero, coordinate head scaled
/// down so random nets keep coordinate updates small).
NetWeights random_weights(std::uint64_t seed, int feature_dim = 128, int hidden = 256,
                          int out_dim = 512, int depth = 3, int global_dim = 256,
                          int slices = 16);

/// All-zero parameters of the same shapes (useful for algebraic tests).
NetWeights zero_weights(int feature_dim = 128, int hidden = 256, int out_dim = 512, int depth = 3,
                        int global_dim = 256, int slices = 16);

/// Builds the fully connected graph over instance keypoints with normalized
/// distance edges. Requires alpha > 0 and at least one instance with a
/// descriptor of matching dimension.
SceneGraph build_graph(const std::vector<ObjectInstance>& instances,
                       const Eigen::MatrixXd& descriptors, double alpha);

/// Edge normalizer from a training split: the 95% quantile (nearest-rank) of
/// per-instance maximum intra-cell distances. Falls back to `fallback` when
/// the split has no instance with >= 2 cells.
double compute_alpha(const std::vector<std::vector<ObjectInstance>>& split, double quantile = 0.95,
                     double fallback = 20.0);

/// Equivariant forward pass. Node features come out invariant to any rigid
/// transform of the input centroids; coordinates come out equivariant. The
/// enriched feature block is strictly positive (softplus head), so GeM's
/// clamp is inactive on real data.
void egnn_forward(SceneGraph& graph, const NetWeights& w);

/// Generalized-mean pooling of the enriched features followed by the 512->256
/// projection. Features are clamped to >= 1e-6 before the fractional power;
/// lambda == 1 short-circuits to the exact arithmetic mean.
Eigen::VectorXd gem_pool(const Eigen::MatrixXd& enriched, const NetWeights& w);

/// Tensor similarity head: s bilinear slice terms plus a linear map of the
/// concatenated pair, ReLU, the s->1 output map, sigmoid. Strictly in (0,1).
double tnn_score(const Eigen::VectorXd& g_i, const Eigen::VectorXd& g_j, const NetWeights& w);

}  // namespace regrace
