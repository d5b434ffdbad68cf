#include "regrace/pipeline.hpp"

namespace regrace {

PipelineParams pipeline_params(const Config& cfg) {
    PipelineParams p;
    p.cluster.eps = cfg.get_double("cluster_eps");
    p.cluster.min_pts = cfg.get_int("cluster_min_pts");
    p.cluster.excluded_classes.clear();
    for (int c : cfg.get_int_list("excluded_classes")) p.cluster.excluded_classes.insert(c);
    p.sample_size = cfg.get_int("sample_size");
    p.descriptor_backend = cfg.get_str("descriptor_backend");
    p.alpha = cfg.get_double("alpha");
    return p;
}

SubmapFeatures extract_features(const Submap& submap, const PipelineParams& params,
                                const NetWeights* weights) {
    SubmapFeatures out;
    out.id = submap.id;
    out.timestamp = submap.timestamp;
    out.origin = submap.origin;

    out.instances = cluster(submap.grid, params.cluster);
    const int k = static_cast<int>(out.instances.size());

    if (k == 0) {
        out.graph.centroids.resize(0, 3);
        out.graph.features.resize(0, kDescriptorDim);
        out.graph.edges.resize(0, 0);
        out.graph.alpha = params.alpha;
        if (weights != nullptr) {
            out.graph.global = Eigen::VectorXd::Zero(weights->global_dim());
            out.graph.has_global = true;
        }
        return out;
    }

    const DescriptorBackend describe = make_descriptor_backend(params.descriptor_backend);
    Eigen::MatrixXd descriptors(k, kDescriptorDim);
    for (int i = 0; i < k; ++i) {
        ObjectInstance& inst = out.instances[i];
        inst.sampled = sample_fixed(inst.cells, params.sample_size);
        descriptors.row(i) = describe(inst.sampled, inst.class_id).values.transpose();
    }

    out.graph = build_graph(out.instances, descriptors, params.alpha);

    if (weights != nullptr) {
        egnn_forward(out.graph, *weights);
        out.graph.global = gem_pool(out.graph.enriched_features, *weights);
        out.graph.has_global = true;
    }
    return out;
}

}  // namespace regrace
