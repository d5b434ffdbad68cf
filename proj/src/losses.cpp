#include "regrace/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regrace {

namespace {
constexpr double kScoreClamp = 1e-12;
}

double triplet_loss(const TripletSpec& spec) {
    if (spec.margin < 0.0) {
        throw std::invalid_argument("triplet_loss: margin must be >= 0");
    }
    const double dp = (spec.anchor - spec.positive).norm();
    const double dn = (spec.anchor - spec.negative).norm();
    return std::max(dp - dn + spec.margin, 0.0);
}

TripletGrads triplet_loss_grad(const TripletSpec& spec) {
    TripletGrads g;
    const Eigen::VectorXd ap = spec.anchor - spec.positive;
    const Eigen::VectorXd an = spec.anchor - spec.negative;
    const double dp = ap.norm();
    const double dn = an.norm();
    const auto zero = Eigen::VectorXd::Zero(spec.anchor.size());
    if (dp - dn + spec.margin <= 0.0 || dp == 0.0 || dn == 0.0) {
        g.d_anchor = zero;
        g.d_positive = zero;
        g.d_negative = zero;
        return g;
    }
    g.d_anchor = ap / dp - an / dn;
    g.d_positive = -ap / dp;
    g.d_negative = an / dn;
    return g;
}

double bce_loss(double score, int label) {
    if (label != 0 && label != 1) {
        throw std::invalid_argument("bce_loss: label must be 0 or 1");
    }
    const double s = std::clamp(score, kScoreClamp, 1.0 - kScoreClamp);
    return -(label * std::log(s) + (1 - label) * std::log(1.0 - s));
}

double bce_loss_grad(double score, int label) {
    const double s = std::clamp(score, kScoreClamp, 1.0 - kScoreClamp);
    return -label / s + (1 - label) / (1.0 - s);
}

double total_loss(double triplet, double score_loss) { return triplet + score_loss; }

std::vector<MinedTriplet> mine_hard_triplets(const std::vector<BatchSample>& batch,
                                             double pos_radius, double neg_radius, double margin) {
    std::vector<MinedTriplet> out;
    const int n = static_cast<int>(batch.size());
    for (int a = 0; a < n; ++a) {
        int best_pos = -1, best_neg = -1;
        double pos_d = -1.0;  // hardest positive: max embedding distance
        double neg_d = std::numeric_limits<double>::infinity();  // hardest negative: min
        for (int i = 0; i < n; ++i) {
            if (i == a) continue;
            const double world = (batch[i].position - batch[a].position).norm();
            const double emb = (batch[i].embedding - batch[a].embedding).norm();
            if (world <= pos_radius) {
                if (emb > pos_d) {
                    pos_d = emb;
                    best_pos = i;
                }
            } else if (world >= neg_radius) {
                if (emb < neg_d) {
                    neg_d = emb;
                    best_neg = i;
                }
            }
            // the open band between the radii is neither positive nor negative
        }
        if (best_pos < 0 || best_neg < 0) continue;
        MinedTriplet t;
        t.anchor = a;
        t.positive = best_pos;
        t.negative = best_neg;
        t.spec = {batch[a].embedding, batch[best_pos].embedding, batch[best_neg].embedding, margin};
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace regrace
