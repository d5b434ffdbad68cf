#include "regrace/graphnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regrace/rng.hpp"

namespace regrace {

namespace {

constexpr int kTnnSlices = 16;

double silu_scalar(double x) { return x / (1.0 + std::exp(-x)); }

void silu_inplace(Eigen::MatrixXd& m) {
    m = m.unaryExpr([](double x) { return silu_scalar(x); });
}

double softplus_scalar(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

Eigen::MatrixXd xavier(Rng& rng, int in, int out, double scale = 1.0) {
    const double a = scale * std::sqrt(6.0 / static_cast<double>(in + out));
    Eigen::MatrixXd m(in, out);
    for (int i = 0; i < in; ++i) {
        for (int j = 0; j < out; ++j) m(i, j) = rng.uniform(-a, a);
    }
    return m;
}

void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("weights: ") + what);
}

bool finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

void validate_weights(const NetWeights& w) {
    const int h = w.hidden();
    check(h > 0 && w.feature_dim() > 0, "empty embedding");
    check(w.embed_b.size() == h, "embed bias size");
    check(!w.layers.empty(), "no layers");
    for (const EgnnLayer& l : w.layers) {
        check(l.edge_w1.rows() == 2 * h + 2 && l.edge_w1.cols() == h, "edge_w1 shape");
        check(l.edge_w2.rows() == h && l.edge_w2.cols() == h, "edge_w2 shape");
        check(l.edge_b1.size() == h && l.edge_b2.size() == h, "edge bias size");
        check(l.coord_w1.rows() == h && l.coord_w1.cols() == h, "coord_w1 shape");
        check(l.coord_b1.size() == h && l.coord_w2.size() == h, "coord head size");
        check(l.node_w1.rows() == 2 * h && l.node_w1.cols() == h, "node_w1 shape");
        check(l.node_w2.rows() == h && l.node_w2.cols() == h, "node_w2 shape");
        check(l.node_b1.size() == h && l.node_b2.size() == h, "node bias size");
        check(finite(l.edge_w1) && finite(l.edge_w2) && finite(l.coord_w1) && finite(l.node_w1) &&
                  finite(l.node_w2),
              "non-finite layer parameters");
    }
    check(w.out_w.rows() == h, "output head input dim");
    check(w.out_b.size() == w.out_w.cols(), "output bias size");
    check(w.gem_lambda > 0.0, "gem_lambda must be positive");
    check(w.projection.rows() == w.out_w.cols(), "projection input dim");
    check(static_cast<int>(w.tnn_slices.size()) == kTnnSlices, "slice count must be 16");
    const int g = w.global_dim();
    for (const Eigen::MatrixXd& s : w.tnn_slices) {
        check(s.rows() == g && s.cols() == g, "slice shape");
        check(finite(s), "non-finite slice");
    }
    check(w.tnn_pair.rows() == 2 * g && w.tnn_pair.cols() == kTnnSlices, "pair map shape");
    check(w.tnn_bias.size() == kTnnSlices && w.tnn_out.size() == kTnnSlices, "tnn vector size");
    check(finite(w.embed_w) && finite(w.out_w) && finite(w.projection) && finite(w.tnn_pair),
          "non-finite parameters");
}

NetWeights random_weights(std::uint64_t seed, int feature_dim, int hidden, int out_dim, int depth,
                          int global_dim, int slices) {
    Rng rng(derive_seed(seed, 0x776569ULL));  // "wei"
    NetWeights w;
    w.embed_w = xavier(rng, feature_dim, hidden);
    w.embed_b = Eigen::VectorXd::Zero(hidden);
    for (int l = 0; l < depth; ++l) {
        EgnnLayer layer;
        layer.edge_w1 = xavier(rng, 2 * hidden + 2, hidden);
        layer.edge_b1 = Eigen::VectorXd::Zero(hidden);
        layer.edge_w2 = xavier(rng, hidden, hidden);
        layer.edge_b2 = Eigen::VectorXd::Zero(hidden);
        layer.coord_w1 = xavier(rng, hidden, hidden);
        layer.coord_b1 = Eigen::VectorXd::Zero(hidden);
        // small coordinate head keeps random-net coordinate drift bounded
        layer.coord_w2 = xavier(rng, hidden, 1, 0.01);
        layer.coord_b2 = 0.0;
        layer.node_w1 = xavier(rng, 2 * hidden, hidden);
        layer.node_b1 = Eigen::VectorXd::Zero(hidden);
        layer.node_w2 = xavier(rng, hidden, hidden);
        layer.node_b2 = Eigen::VectorXd::Zero(hidden);
        w.layers.push_back(std::move(layer));
    }
    w.out_w = xavier(rng, hidden, out_dim);
    w.out_b = Eigen::VectorXd::Zero(out_dim);
    w.gem_lambda = 3.0;
    w.projection = xavier(rng, out_dim, global_dim);
    for (int s = 0; s < slices; ++s) w.tnn_slices.push_back(xavier(rng, global_dim, global_dim));
    w.tnn_pair = xavier(rng, 2 * global_dim, slices);
    w.tnn_bias = Eigen::VectorXd::Zero(slices);
    w.tnn_out = xavier(rng, slices, 1);
    validate_weights(w);
    return w;
}

NetWeights zero_weights(int feature_dim, int hidden, int out_dim, int depth, int global_dim,
                        int slices) {
    NetWeights w;
    w.embed_w = Eigen::MatrixXd::Zero(feature_dim, hidden);
    w.embed_b = Eigen::VectorXd::Zero(hidden);
    for (int l = 0; l < depth; ++l) {
        EgnnLayer layer;
        layer.edge_w1 = Eigen::MatrixXd::Zero(2 * hidden + 2, hidden);
        layer.edge_b1 = Eigen::VectorXd::Zero(hidden);
        layer.edge_w2 = Eigen::MatrixXd::Zero(hidden, hidden);
        layer.edge_b2 = Eigen::VectorXd::Zero(hidden);
        layer.coord_w1 = Eigen::MatrixXd::Zero(hidden, hidden);
        layer.coord_b1 = Eigen::VectorXd::Zero(hidden);
        layer.coord_w2 = Eigen::VectorXd::Zero(hidden);
        layer.coord_b2 = 0.0;
        layer.node_w1 = Eigen::MatrixXd::Zero(2 * hidden, hidden);
        layer.node_b1 = Eigen::VectorXd::Zero(hidden);
        layer.node_w2 = Eigen::MatrixXd::Zero(hidden, hidden);
        layer.node_b2 = Eigen::VectorXd::Zero(hidden);
        w.layers.push_back(std::move(layer));
    }
    w.out_w = Eigen::MatrixXd::Zero(hidden, out_dim);
    w.out_b = Eigen::VectorXd::Zero(out_dim);
    w.gem_lambda = 1.0;
    w.projection = Eigen::MatrixXd::Zero(out_dim, global_dim);
    for (int s = 0; s < slices; ++s)
        w.tnn_slices.push_back(Eigen::MatrixXd::Zero(global_dim, global_dim));
    w.tnn_pair = Eigen::MatrixXd::Zero(2 * global_dim, slices);
    w.tnn_bias = Eigen::VectorXd::Zero(slices);
    w.tnn_out = Eigen::VectorXd::Zero(slices);
    return w;
}

SceneGraph build_graph(const std::vector<ObjectInstance>& instances,
                       const Eigen::MatrixXd& descriptors, double alpha) {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("build_graph: alpha must be positive");
    }
    const int k = static_cast<int>(instances.size());
    if (k < 1) {
        throw std::invalid_argument("build_graph: need at least one instance");
    }
    if (descriptors.rows() != k) {
        throw std::invalid_argument("build_graph: descriptor row count mismatch");
    }

    SceneGraph g;
    g.alpha = alpha;
    g.centroids.resize(k, 3);
    for (int i = 0; i < k; ++i) g.centroids.row(i) = instances[i].centroid;
    g.features = descriptors;
    g.edges = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double e = (g.centroids.row(i) - g.centroids.row(j)).norm() / alpha;
            g.edges(i, j) = e;
            g.edges(j, i) = e;
        }
    }
    return g;
}

double compute_alpha(const std::vector<std::vector<ObjectInstance>>& split, double quantile,
                     double fallback) {
    if (!(quantile > 0.0 && quantile <= 1.0)) {
        throw std::invalid_argument("compute_alpha: quantile must be in (0,1]");
    }
    std::vector<double> diameters;
    for (const auto& instances : split) {
        for (const ObjectInstance& inst : instances) {
            const int n = static_cast<int>(inst.cells.rows());
            if (n < 2) continue;
            double best = 0.0;
            for (int a = 0; a < n; ++a) {
                for (int b = a + 1; b < n; ++b) {
                    best = std::max(best, (inst.cells.row(a) - inst.cells.row(b)).norm());
                }
            }
            diameters.push_back(best);
        }
    }
    if (diameters.empty()) return fallback;
    std::sort(diameters.begin(), diameters.end());
    // nearest-rank quantile: smallest value covering `quantile` of the data
    const std::size_t rank = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(diameters.size()))));
    return diameters[std::min(rank, diameters.size()) - 1];
}

void egnn_forward(SceneGraph& graph, const NetWeights& w) {
    validate_weights(w);
    const int k = graph.size();
    if (k < 1) {
        throw std::invalid_argument("egnn_forward: empty graph");
    }
    if (graph.features.cols() != w.feature_dim()) {
        throw std::invalid_argument("egnn_forward: feature dimension does not match weights");
    }
    const int h = w.hidden();

    Eigen::MatrixXd hid = graph.features * w.embed_w;
    hid.rowwise() += w.embed_b.transpose();
    PointMatrix x = graph.centroids;

    const int n_edges = k * (k - 1);
    // Edge rows ordered (i, j) with i ascending and j ascending, j != i; the
    // order is fixed so summations are reproducible.
    std::vector<std::pair<int, int>> edge_of(n_edges);
    {
        int e = 0;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                if (j == i) continue;
                edge_of[e++] = {i, j};
            }
        }
    }

    const double inv_deg = k > 1 ? 1.0 / static_cast<double>(k - 1) : 0.0;

    for (const EgnnLayer& layer : w.layers) {
        Eigen::MatrixXd messages;  // n_edges x h
        if (n_edges > 0) {
            Eigen::MatrixXd ein(n_edges, 2 * h + 2);
            for (int e = 0; e < n_edges; ++e) {
                const auto [i, j] = edge_of[e];
                ein.block(e, 0, 1, h) = hid.row(i);
                ein.block(e, h, 1, h) = hid.row(j);
                // log1p keeps the squared-distance channel O(1) at map scale
                ein(e, 2 * h) = std::log1p((x.row(i) - x.row(j)).squaredNorm());
                ein(e, 2 * h + 1) = graph.edges(i, j);
            }
            Eigen::MatrixXd m1 = ein * layer.edge_w1;
            m1.rowwise() += layer.edge_b1.transpose();
            silu_inplace(m1);
            messages = m1 * layer.edge_w2;
            messages.rowwise() += layer.edge_b2.transpose();
            silu_inplace(messages);

            // equivariant coordinate update
            Eigen::MatrixXd cw = messages * layer.coord_w1;
            cw.rowwise() += layer.coord_b1.transpose();
            silu_inplace(cw);
            Eigen::VectorXd gate = cw * layer.coord_w2;
            gate.array() += layer.coord_b2;
            PointMatrix dx = PointMatrix::Zero(k, 3);
            for (int e = 0; e < n_edges; ++e) {
                const auto [i, j] = edge_of[e];
                dx.row(i) += (x.row(i) - x.row(j)) * gate[e];
            }
            x += inv_deg * dx;
        }

        Eigen::MatrixXd agg = Eigen::MatrixXd::Zero(k, h);
        if (n_edges > 0) {
            for (int e = 0; e < n_edges; ++e) {
                agg.row(edge_of[e].first) += messages.row(e);
            }
            agg *= inv_deg;
        }

        Eigen::MatrixXd nin(k, 2 * h);
        nin.leftCols(h) = hid;
        nin.rightCols(h) = agg;
        Eigen::MatrixXd t1 = nin * layer.node_w1;
        t1.rowwise() += layer.node_b1.transpose();
        silu_inplace(t1);
        Eigen::MatrixXd t2 = t1 * layer.node_w2;
        t2.rowwise() += layer.node_b2.transpose();
        hid += t2;  // residual update
    }

    Eigen::MatrixXd out = hid * w.out_w;
    out.rowwise() += w.out_b.transpose();
    graph.enriched_features = out.unaryExpr([](double v) { return softplus_scalar(v); });
    graph.enriched_coords = x;
    graph.has_enriched = true;
}

Eigen::VectorXd gem_pool(const Eigen::MatrixXd& enriched, const NetWeights& w) {
    const int k = static_cast<int>(enriched.rows());
    if (k < 1) {
        throw std::invalid_argument("gem_pool: need at least one feature row");
    }
    if (enriched.cols() != w.projection.rows()) {
        throw std::invalid_argument("gem_pool: feature dimension does not match projection");
    }
    const Eigen::MatrixXd clamped = enriched.cwiseMax(1e-6);
    Eigen::RowVectorXd pooled;
    if (w.gem_lambda == 1.0) {
        pooled = clamped.colwise().mean();  // exact power-mean identity
    } else {
        const double lam = w.gem_lambda;
        pooled = clamped.array()
                     .pow(lam)
                     .colwise()
                     .mean()
                     .pow(1.0 / lam)
                     .matrix();
    }
    return (pooled * w.projection).transpose();
}

double tnn_score(const Eigen::VectorXd& g_i, const Eigen::VectorXd& g_j, const NetWeights& w) {
    const int g = w.global_dim();
    if (g_i.size() != g || g_j.size() != g) {
        throw std::invalid_argument("tnn_score: embedding dimension does not match weights");
    }
    Eigen::VectorXd z(kTnnSlices);
    for (int s = 0; s < kTnnSlices; ++s) {
        z[s] = g_i.dot(w.tnn_slices[s] * g_j);
    }
    Eigen::VectorXd pair(2 * g);
    pair.head(g) = g_i;
    pair.tail(g) = g_j;
    z += w.tnn_pair.transpose() * pair;
    z += w.tnn_bias;
    z = z.cwiseMax(0.0);  // ReLU
    const double a = z.dot(w.tnn_out);
    // keep the documented open interval: the raw sigmoid saturates to an
    // exact 0 or 1 once |a| exceeds ~37
    constexpr double kTiny = 1e-15;
    return std::clamp(1.0 / (1.0 + std::exp(-a)), kTiny, 1.0 - kTiny);
}

}  // namespace regrace
