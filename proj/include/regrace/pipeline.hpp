#pragma once

#include <string>

#include "regrace/config.hpp"
#include "regrace/descriptor.hpp"
#include "regrace/graphnet.hpp"
#include "regrace/instances.hpp"
#include "regrace/registration.hpp"
#include "regrace/submap.hpp"

namespace regrace {

/// Per-submap feature extraction settings (the dense stage up to the graph,
/// plus the optional network pass).
struct PipelineParams {
    ClusterParams cluster;
    int sample_size = 1024;
    std::string descriptor_backend = "reference";
    double alpha = 20.0;
};

PipelineParams pipeline_params(const Config& cfg);

/// Runs cluster -> fixed-size sampling -> local descriptors -> scene graph
/// for one submap. When `weights` is non-null the graph is also enriched
/// (message passing) and pooled into the global embedding. A submap with no
/// instances yields an empty graph; with weights, its global embedding is the
/// zero vector so it still indexes (and matches nothing).
SubmapFeatures extract_features(const Submap& submap, const PipelineParams& params,
                                const NetWeights* weights);

}  // namespace regrace
