#pragma once

#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"

namespace regrace {

/// One triplet of global embeddings with a margin.
struct TripletSpec {
    Eigen::VectorXd anchor;
    Eigen::VectorXd positive;
    Eigen::VectorXd negative;
    double margin = 1.0;
};

/// Embedding plus the submap's ground-truth world position, as mined within
/// a training batch.
struct BatchSample {
    Eigen::VectorXd embedding;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// A mined triplet with the batch indices it was built from.
struct MinedTriplet {
    int anchor = -1;
    int positive = -1;
    int negative = -1;
    TripletSpec spec;
};

/// Closed-form gradients of triplet_loss with respect to each embedding.
struct TripletGrads {
    Eigen::VectorXd d_anchor;
    Eigen::VectorXd d_positive;
    Eigen::VectorXd d_negative;
};

/// max(||a-p|| - ||a-n|| + margin, 0)
double triplet_loss(const TripletSpec& spec);

/// Gradients of triplet_loss; zero when the hinge is inactive. Not defined at
/// the hinge itself or at coincident embeddings (subgradient 0 returned).
TripletGrads triplet_loss_grad(const TripletSpec& spec);

/// Binary cross-entropy of a similarity score against a {0,1} label. Scores
/// are clamped to [1e-12, 1 - 1e-12] before the logs.
double bce_loss(double score, int label);

/// d(bce_loss)/d(score), valid away from the clamp boundaries.
double bce_loss_grad(double score, int label);

/// Combined objective: sum of the two parts.
double total_loss(double triplet, double score_loss);

/// In-batch hard mining: for every anchor that has at least one positive
/// (world distance <= pos_radius) and one negative (>= neg_radius), emits the
/// triplet pairing the embedding-farthest positive with the embedding-closest
/// negative. Distance ties resolve to the lowest sample index; samples in the
/// open band between the radii are neither positive nor negative.
std::vector<MinedTriplet> mine_hard_triplets(const std::vector<BatchSample>& batch,
                                             double pos_radius = 3.0, double neg_radius = 20.0,
                                             double margin = 1.0);

}  // namespace regrace
