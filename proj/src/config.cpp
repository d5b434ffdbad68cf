#include "regrace/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace regrace {

namespace {

// clang-format off
const std::vector<ConfigEntry> kSchema = {
    // inputs / outputs
    {"scans_dir",        "",              "directory of float32 x,y,z,intensity .bin scans (sorted by name)"},
    {"labels_dir",       "",              "directory of u32 .label files matching scans_dir"},
    {"poses_path",       "",              "text file, one 3x4 row-major pose per line"},
    {"times_path",       "",              "text file, one timestamp (s) per line"},
    {"submaps_path",     "submaps.rgrc",  "voxelized submap container (build output, extract input)"},
    {"features_path",    "features.rgrc", "per-submap graph/feature container (extract output)"},
    {"weights_path",     "",              "network weights container; empty = random init from seed"},
    {"index_path",       "index.rgrc",    "embedding index container (index output, query input)"},
    {"out_path",         "",              "command output path (records, metrics, or synth directory)"},
    {"pairs_path",       "",              "optional 'query_id candidate_id' lines for register"},
    {"records_path",     "",              "input records for eval-pr (decisions) / eval-reg (registrations)"},

    // submap assembly
    {"voxel_size",       "0.1",           "voxel edge length (m)"},
    {"max_span",         "20.0",          "max distance from a window's first scan (m); 0 = single scan"},
    {"num_classes",      "34",            "semantic class count of the label probability rows"},

    // instance clustering
    {"cluster_eps",      "0.2",           "DBSCAN neighborhood radius over voxel centroids (m)"},
    {"cluster_min_pts",  "100",           "DBSCAN core threshold and minimum cluster size"},
    {"excluded_classes", "0,1,40,48,49,72,99", "class ids never clustered (ground-like / unlabeled)"},
    {"sample_size",      "1024",          "fixed per-object sample size P for the descriptor"},

    // descriptors and graph
    {"descriptor_backend", "reference",   "local descriptor backend name"},
    {"alpha",            "20.0",          "edge normalizer (m); distances divide by this"},
    {"egnn_depth",       "3",             "message-passing layers"},
    {"egnn_hidden",      "256",           "hidden width"},
    {"egnn_out",         "512",           "enriched node feature width"},
    {"gem_lambda",       "3.0",           "generalized-mean pooling exponent"},
    {"embed_dim",        "256",           "global embedding width after projection"},
    {"tnn_slices",       "16",            "bilinear slices in the similarity head"},

    // retrieval / re-ranking
    {"top_k",            "20",            "candidates re-ranked per query"},
    {"exclusion_seconds","30.0",          "temporal exclusion window before the query"},
    {"d_t",              "1.0",           "consistency hinge scale (m)"},
    {"epsilon_c",        "10.0",          "consistency threshold for declaring a revisit"},
    {"consistency_normalize", "false",    "divide consistency by the inlier pair count"},
    {"match_features",   "descriptor",    "correspondence space: 'descriptor' or 'enriched'"},

    // registration
    {"ransac_inlier_tol", "0.5",          "correspondence residual accepted as inlier (m)"},
    {"ransac_max_iters", "10000",         "hypothesis budget (exhaustive triples when cheaper)"},
    {"ransac_confidence", "0.999",        "adaptive early-exit confidence"},
    {"icp_max_iters",    "50",            "ICP iteration cap"},
    {"icp_tol",          "1e-4",          "ICP convergence threshold on point displacement (m)"},
    {"icp_nn_cap",       "1.0",           "ICP association distance cap (m)"},
    {"reg_pair_max_dist", "20.0",         "eval-reg pairs ground-truth distance cap (m)"},

    // evaluation
    {"r_tp",             "3.0",           "true-positive distance threshold (m)"},
    {"r_fp",             "20.0",          "false-positive distance threshold (m)"},
    {"rre_max_deg",      "5.0",           "registration success rotation bound (deg, inclusive)"},
    {"rte_max_m",        "2.0",           "registration success translation bound (m, inclusive)"},

    // synthetic world
    {"synth_submaps",    "200",           "submaps in a generated world"},
    {"synth_objects",    "20",            "objects per scene"},
    {"synth_points",     "800",           "surface samples per object"},
    {"synth_noise_sigma","0.0",           "per-point Gaussian noise (m)"},
    {"synth_dropout",    "0.0",           "per-object dropout probability on revisit"},
    {"synth_revisit_fraction", "0.2",     "fraction of submaps that are revisits"},

    // run control
    {"seed",             "42",            "master RNG seed"},
    {"workers",          "1",             "worker threads for per-submap stages"},
};
// clang-format on

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

const std::vector<ConfigEntry>& Config::schema() { return kSchema; }

Config::Config() {
    for (const ConfigEntry& e : kSchema) values_[e.key] = e.def;
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
    it->second = value;
}

void Config::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     " is not key = value: " + path);
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

const std::string& Config::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key: " + key);
    return it->second;
}

double Config::get_double(const std::string& key) const {
    const std::string& v = get_str(key);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not a number: '" + v + "'");
    }
    if (used != v.size()) {
        throw std::invalid_argument("config key " + key + " is not a number: '" + v + "'");
    }
    return out;
}

int Config::get_int(const std::string& key) const {
    const double d = get_double(key);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) {
        throw std::invalid_argument("config key " + key + " is not an integer");
    }
    return i;
}

std::uint64_t Config::get_u64(const std::string& key) const {
    const std::string& v = get_str(key);
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not an unsigned integer: '" + v +
                                    "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get_str(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key " + key + " is not a boolean: '" + v + "'");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    const std::string& v = get_str(key);
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        out.push_back(std::stoi(tok));
    }
    return out;
}

std::string Config::describe() {
    std::ostringstream os;
    for (const ConfigEntry& e : kSchema) {
        os << "  " << e.key;
        for (std::size_t i = std::string(e.key).size(); i < 22; ++i) os << ' ';
        os << "[" << e.def << "] " << e.doc << '\n';
    }
    return os.str();
}

}  // namespace regrace
