#include "regrace/io.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace regrace {

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

template <typename T>
void put(std::ostream& s, const T& v) {
    s.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& s, const std::string& path) {
    T v{};
    s.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!s) throw std::runtime_error("truncated file: " + path);
    return v;
}

void put_pose(std::ostream& s, const Pose& p) {
    const Eigen::Matrix3d& r = p.rotation();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) put<double>(s, r(i, j));
        put<double>(s, p.translation()[i]);
    }
}

Pose get_pose(std::istream& s, const std::string& path) {
    Eigen::Matrix3d r;
    Eigen::Vector3d t;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) r(i, j) = get<double>(s, path);
        t[i] = get<double>(s, path);
    }
    return Pose(nearest_rotation(r), t);
}

void put_matrix_f32(std::ostream& s, const Eigen::MatrixXd& m) {
    put<std::uint32_t>(s, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(s, static_cast<std::uint32_t>(m.cols()));
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) put<float>(s, static_cast<float>(m(i, j)));
    }
}

Eigen::MatrixXd get_matrix_f32(std::istream& s, const std::string& path) {
    const auto rows = get<std::uint32_t>(s, path);
    const auto cols = get<std::uint32_t>(s, path);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = get<float>(s, path);
    }
    return m;
}

void put_matrix_f64(std::ostream& s, const Eigen::MatrixXd& m) {
    put<std::uint32_t>(s, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(s, static_cast<std::uint32_t>(m.cols()));
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) put<double>(s, m(i, j));
    }
}

Eigen::MatrixXd get_matrix_f64(std::istream& s, const std::string& path) {
    const auto rows = get<std::uint32_t>(s, path);
    const auto cols = get<std::uint32_t>(s, path);
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
        for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = get<double>(s, path);
    }
    return m;
}

void put_vector_f64(std::ostream& s, const Eigen::VectorXd& v) {
    put<std::uint32_t>(s, static_cast<std::uint32_t>(v.size()));
    for (int i = 0; i < v.size(); ++i) put<double>(s, v[i]);
}

Eigen::VectorXd get_vector_f64(std::istream& s, const std::string& path) {
    const auto n = get<std::uint32_t>(s, path);
    Eigen::VectorXd v(n);
    for (std::uint32_t i = 0; i < n; ++i) v[i] = get<double>(s, path);
    return v;
}

void write_header(std::ostream& s, RgrcType type, std::uint64_t count) {
    s.write("RGRC", 4);
    put<std::uint32_t>(s, kRgrcVersion);
    put<std::uint32_t>(s, static_cast<std::uint32_t>(type));
    put<std::uint64_t>(s, count);
}

std::uint64_t read_header(std::istream& s, RgrcType expected, const std::string& path) {
    char magic[4] = {};
    s.read(magic, 4);
    if (!s || std::memcmp(magic, "RGRC", 4) != 0) {
        throw std::runtime_error("bad magic, not an RGRC file: " + path);
    }
    const auto version = get<std::uint32_t>(s, path);
    if (version != kRgrcVersion) {
        throw std::runtime_error("unsupported RGRC version " + std::to_string(version) + ": " +
                                 path);
    }
    const auto type = get<std::uint32_t>(s, path);
    if (type != static_cast<std::uint32_t>(expected)) {
        throw std::runtime_error("RGRC payload type mismatch in " + path);
    }
    return get<std::uint64_t>(s, path);
}

}  // namespace

RawScan read_scan(const std::string& path) {
    std::ifstream f = open_in(path);
    f.seekg(0, std::ios::end);
    const std::streamoff size = f.tellg();
    f.seekg(0, std::ios::beg);
    if (size % 16 != 0) {
        throw std::runtime_error("scan file size is not a multiple of 16 bytes: " + path);
    }
    const std::int64_t n = size / 16;
    RawScan scan;
    scan.points.resize(n, 3);
    scan.intensities.resize(n);
    for (std::int64_t i = 0; i < n; ++i) {
        float q[4];
        f.read(reinterpret_cast<char*>(q), sizeof(q));
        if (!f) throw std::runtime_error("truncated scan file: " + path);
        scan.points(i, 0) = q[0];
        scan.points(i, 1) = q[1];
        scan.points(i, 2) = q[2];
        scan.intensities[i] = q[3];
    }
    return scan;
}

ScanLabels read_labels(const std::string& path, std::size_t expected_n) {
    std::ifstream f = open_in(path);
    f.seekg(0, std::ios::end);
    const std::streamoff size = f.tellg();
    f.seekg(0, std::ios::beg);
    if (size % 4 != 0) {
        throw std::runtime_error("label file size is not a multiple of 4 bytes: " + path);
    }
    const std::size_t n = static_cast<std::size_t>(size / 4);
    if (n != expected_n) {
        throw std::runtime_error("label count " + std::to_string(n) + " does not match scan size " +
                                 std::to_string(expected_n) + ": " + path);
    }
    ScanLabels labels;
    labels.classes.resize(n);
    labels.instance_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto word = get<std::uint32_t>(f, path);
        labels.classes[i] = static_cast<int>(word & 0xFFFFu);
        labels.instance_ids[i] = word >> 16;
    }
    return labels;
}

std::vector<Pose> read_poses(const std::string& path) {
    std::ifstream f = open_in(path);
    std::vector<Pose> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ss(line);
        double v[12];
        for (int i = 0; i < 12; ++i) {
            if (!(ss >> v[i])) {
                throw std::runtime_error("pose line " + std::to_string(lineno) +
                                         " does not hold 12 numbers: " + path);
            }
        }
        double extra;
        if (ss >> extra) {
            throw std::runtime_error("pose line " + std::to_string(lineno) +
                                     " holds more than 12 numbers: " + path);
        }
        Eigen::Matrix3d r;
        r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
        const Eigen::Vector3d t(v[3], v[7], v[11]);
        const double err =
            (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
        if (err > 1e-3) {
            std::cerr << "warning: pose line " << lineno
                      << " rotation off orthonormal by " << err
                      << ", re-projecting\n";
        }
        poses.emplace_back(nearest_rotation(r), t);
    }
    return poses;
}

void write_poses(const std::string& path, const std::vector<Pose>& poses) {
    std::ofstream f = open_out(path);
    f.precision(17);
    for (const Pose& p : poses) {
        const Eigen::Matrix3d& r = p.rotation();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) f << r(i, j) << ' ';
            f << p.translation()[i] << (i == 2 ? '\n' : ' ');
        }
    }
}

std::vector<double> read_times(const std::string& path) {
    std::ifstream f = open_in(path);
    std::vector<double> times;
    std::string line;
    while (std::getline(f, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        times.push_back(std::stod(line));
    }
    return times;
}

void write_submaps(const std::string& path, const std::vector<Submap>& submaps) {
    std::ofstream f = open_out(path);
    write_header(f, RgrcType::submaps, submaps.size());
    for (const Submap& s : submaps) {
        put<std::int64_t>(f, s.id);
        put<double>(f, s.timestamp);
        put_pose(f, s.origin);
        put<double>(f, s.grid.voxel_size);
        put<std::uint64_t>(f, s.grid.cells.size());
        const std::uint32_t n_classes =
            s.grid.cells.empty() ? 0
                                 : static_cast<std::uint32_t>(
                                       s.grid.cells.begin()->second.mean_probs.size());
        put<std::uint32_t>(f, n_classes);
        for (const auto& [key, cell] : s.grid.cells) {
            put<std::int64_t>(f, key.x);
            put<std::int64_t>(f, key.y);
            put<std::int64_t>(f, key.z);
            for (int i = 0; i < 3; ++i) put<double>(f, cell.centroid[i]);
            put<std::uint32_t>(f, static_cast<std::uint32_t>(cell.count));
            for (int i = 0; i < cell.mean_probs.size(); ++i)
                put<float>(f, static_cast<float>(cell.mean_probs[i]));
        }
    }
}

std::vector<Submap> read_submaps(const std::string& path) {
    std::ifstream f = open_in(path);
    const std::uint64_t count = read_header(f, RgrcType::submaps, path);
    std::vector<Submap> out(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Submap& s = out[i];
        s.id = get<std::int64_t>(f, path);
        s.timestamp = get<double>(f, path);
        s.origin = get_pose(f, path);
        s.grid.voxel_size = get<double>(f, path);
        const auto n_cells = get<std::uint64_t>(f, path);
        const auto n_classes = get<std::uint32_t>(f, path);
        for (std::uint64_t c = 0; c < n_cells; ++c) {
            VoxelKey key;
            key.x = get<std::int64_t>(f, path);
            key.y = get<std::int64_t>(f, path);
            key.z = get<std::int64_t>(f, path);
            VoxelCell cell;
            for (int k = 0; k < 3; ++k) cell.centroid[k] = get<double>(f, path);
            cell.count = static_cast<int>(get<std::uint32_t>(f, path));
            cell.mean_probs.resize(n_classes);
            for (std::uint32_t k = 0; k < n_classes; ++k) cell.mean_probs[k] = get<float>(f, path);
            s.grid.cells.emplace(key, std::move(cell));
        }
    }
    return out;
}

void write_features(const std::string& path, const std::vector<SubmapFeatures>& features) {
    std::ofstream f = open_out(path);
    write_header(f, RgrcType::features, features.size());
    for (const SubmapFeatures& s : features) {
        put<std::int64_t>(f, s.id);
        put<double>(f, s.timestamp);
        put_pose(f, s.origin);
        put<double>(f, s.graph.alpha);
        const std::uint32_t k = static_cast<std::uint32_t>(s.graph.size());
        put<std::uint32_t>(f, k);
        put_matrix_f64(f, s.graph.centroids);
        put_matrix_f32(f, s.graph.features);
        put<std::uint8_t>(f, s.graph.has_enriched ? 1 : 0);
        if (s.graph.has_enriched) {
            put_matrix_f32(f, s.graph.enriched_features);
            put_matrix_f64(f, s.graph.enriched_coords);
        }
        put<std::uint8_t>(f, s.graph.has_global ? 1 : 0);
        if (s.graph.has_global) {
            put_matrix_f32(f, s.graph.global);
        }
        // per-node instance payload (class + cells) for the dense stage
        for (std::uint32_t i = 0; i < k; ++i) {
            put<std::int32_t>(f, s.instances[i].class_id);
            put_matrix_f64(f, s.instances[i].cells);
        }
    }
}

std::vector<SubmapFeatures> read_features(const std::string& path) {
    std::ifstream f = open_in(path);
    const std::uint64_t count = read_header(f, RgrcType::features, path);
    std::vector<SubmapFeatures> out(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        SubmapFeatures& s = out[i];
        s.id = get<std::int64_t>(f, path);
        s.timestamp = get<double>(f, path);
        s.origin = get_pose(f, path);
        s.graph.alpha = get<double>(f, path);
        const auto k = get<std::uint32_t>(f, path);
        s.graph.centroids = get_matrix_f64(f, path);
        s.graph.features = get_matrix_f32(f, path);
        if (get<std::uint8_t>(f, path)) {
            s.graph.enriched_features = get_matrix_f32(f, path);
            s.graph.enriched_coords = get_matrix_f64(f, path);
            s.graph.has_enriched = true;
        }
        if (get<std::uint8_t>(f, path)) {
            s.graph.global = Eigen::VectorXd(get_matrix_f32(f, path));
            s.graph.has_global = true;
        }
        if (s.graph.centroids.rows() != k) {
            throw std::runtime_error("corrupt features record in " + path);
        }
        // rebuild the dense symmetric edges from centroids and alpha
        s.graph.edges = Eigen::MatrixXd::Zero(k, k);
        if (s.graph.alpha > 0.0) {
            for (std::uint32_t a = 0; a < k; ++a) {
                for (std::uint32_t b = a + 1; b < k; ++b) {
                    const double e =
                        (s.graph.centroids.row(a) - s.graph.centroids.row(b)).norm() /
                        s.graph.alpha;
                    s.graph.edges(a, b) = e;
                    s.graph.edges(b, a) = e;
                }
            }
        }
        s.instances.resize(k);
        for (std::uint32_t a = 0; a < k; ++a) {
            s.instances[a].class_id = get<std::int32_t>(f, path);
            s.instances[a].cells = get_matrix_f64(f, path);
            if (s.instances[a].cells.rows() > 0) {
                s.instances[a].centroid = s.instances[a].cells.colwise().mean();
            }
        }
    }
    return out;
}

void write_index(const std::string& path, const std::vector<IndexEntry>& entries) {
    std::ofstream f = open_out(path);
    write_header(f, RgrcType::index, entries.size());
    for (const IndexEntry& e : entries) {
        put<std::int64_t>(f, e.id);
        put<double>(f, e.timestamp);
        put_pose(f, e.world_pose);
        put_matrix_f32(f, e.embedding);
    }
}

std::vector<IndexEntry> read_index(const std::string& path) {
    std::ifstream f = open_in(path);
    const std::uint64_t count = read_header(f, RgrcType::index, path);
    std::vector<IndexEntry> out(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        out[i].id = get<std::int64_t>(f, path);
        out[i].timestamp = get<double>(f, path);
        out[i].world_pose = get_pose(f, path);
        out[i].embedding = Eigen::VectorXd(get_matrix_f32(f, path));
    }
    return out;
}

void write_weights(const std::string& path, const NetWeights& w) {
    std::ofstream f = open_out(path);
    write_header(f, RgrcType::weights, 1);
    put_matrix_f64(f, w.embed_w);
    put_vector_f64(f, w.embed_b);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(w.layers.size()));
    for (const EgnnLayer& l : w.layers) {
        put_matrix_f64(f, l.edge_w1);
        put_vector_f64(f, l.edge_b1);
        put_matrix_f64(f, l.edge_w2);
        put_vector_f64(f, l.edge_b2);
        put_matrix_f64(f, l.coord_w1);
        put_vector_f64(f, l.coord_b1);
        put_vector_f64(f, l.coord_w2);
        put<double>(f, l.coord_b2);
        put_matrix_f64(f, l.node_w1);
        put_vector_f64(f, l.node_b1);
        put_matrix_f64(f, l.node_w2);
        put_vector_f64(f, l.node_b2);
    }
    put_matrix_f64(f, w.out_w);
    put_vector_f64(f, w.out_b);
    put<double>(f, w.gem_lambda);
    put_matrix_f64(f, w.projection);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(w.tnn_slices.size()));
    for (const Eigen::MatrixXd& s : w.tnn_slices) put_matrix_f64(f, s);
    put_matrix_f64(f, w.tnn_pair);
    put_vector_f64(f, w.tnn_bias);
    put_vector_f64(f, w.tnn_out);
}

NetWeights read_weights(const std::string& path) {
    std::ifstream f = open_in(path);
    const std::uint64_t count = read_header(f, RgrcType::weights, path);
    if (count != 1) throw std::runtime_error("weights file must hold one record: " + path);
    NetWeights w;
    w.embed_w = get_matrix_f64(f, path);
    w.embed_b = get_vector_f64(f, path);
    const auto depth = get<std::uint32_t>(f, path);
    for (std::uint32_t i = 0; i < depth; ++i) {
        EgnnLayer l;
        l.edge_w1 = get_matrix_f64(f, path);
        l.edge_b1 = get_vector_f64(f, path);
        l.edge_w2 = get_matrix_f64(f, path);
        l.edge_b2 = get_vector_f64(f, path);
        l.coord_w1 = get_matrix_f64(f, path);
        l.coord_b1 = get_vector_f64(f, path);
        l.coord_w2 = get_vector_f64(f, path);
        l.coord_b2 = get<double>(f, path);
        l.node_w1 = get_matrix_f64(f, path);
        l.node_b1 = get_vector_f64(f, path);
        l.node_w2 = get_matrix_f64(f, path);
        l.node_b2 = get_vector_f64(f, path);
        w.layers.push_back(std::move(l));
    }
    w.out_w = get_matrix_f64(f, path);
    w.out_b = get_vector_f64(f, path);
    w.gem_lambda = get<double>(f, path);
    w.projection = get_matrix_f64(f, path);
    const auto slices = get<std::uint32_t>(f, path);
    for (std::uint32_t i = 0; i < slices; ++i) w.tnn_slices.push_back(get_matrix_f64(f, path));
    w.tnn_pair = get_matrix_f64(f, path);
    w.tnn_bias = get_vector_f64(f, path);
    w.tnn_out = get_vector_f64(f, path);
    validate_weights(w);
    return w;
}

void write_records(const std::string& path, const std::vector<Record>& records) {
    std::ofstream f = open_out(path);
    f.precision(17);
    for (const Record& r : records) {
        bool first = true;
        for (const auto& [k, v] : r) {
            if (!first) f << ' ';
            f << k << '=' << v;
            first = false;
        }
        f << '\n';
    }
}

std::vector<Record> read_records(const std::string& path) {
    std::ifstream f = open_in(path);
    std::vector<Record> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        Record r;
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) {
                throw std::runtime_error("malformed record token '" + tok + "' in " + path);
            }
            r.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string record_get(const Record& r, const std::string& key) {
    for (const auto& [k, v] : r) {
        if (k == key) return v;
    }
    throw std::runtime_error("record key not found: " + key);
}

}  // namespace regrace
