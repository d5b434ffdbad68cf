#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "regrace/geometry.hpp"
#include "regrace/graphnet.hpp"
#include "regrace/registration.hpp"
#include "regrace/submap.hpp"

namespace regrace {

/// Raw LiDAR scan: little-endian float32 quadruples (x, y, z, intensity).
struct RawScan {
    PointMatrix points;
    Eigen::VectorXd intensities;
};

RawScan read_scan(const std::string& path);

/// Per-point labels: one little-endian u32 per point; the low 16 bits are the
/// class id, the high 16 bits an instance id (preserved, unused).
struct ScanLabels {
    std::vector<int> classes;
    std::vector<std::uint32_t> instance_ids;
};

ScanLabels read_labels(const std::string& path, std::size_t expected_n);

/// Poses as lines of 12 whitespace-separated decimals (row-major 3x4 [R|t]).
/// Rotations off orthonormal by more than 1e-3 are re-projected with a
/// warning on stderr; malformed lines raise std::runtime_error.
std::vector<Pose> read_poses(const std::string& path);
void write_poses(const std::string& path, const std::vector<Pose>& poses);

/// One timestamp (seconds, decimal) per line.
std::vector<double> read_times(const std::string& path);

// ---------------------------------------------------------------------------
// RGRC binary containers: header = magic "RGRC", u32 version, u32 payload
// type, u64 record count; then fixed-layout records. Readers reject unknown
// magic, version, or payload type. Embeddings and feature blocks are f32;
// poses, centroids, and cell coordinates are f64.
// ---------------------------------------------------------------------------

constexpr std::uint32_t kRgrcVersion = 1;
enum class RgrcType : std::uint32_t { submaps = 1, features = 2, index = 3, weights = 4 };

void write_submaps(const std::string& path, const std::vector<Submap>& submaps);
std::vector<Submap> read_submaps(const std::string& path);

void write_features(const std::string& path, const std::vector<SubmapFeatures>& features);
std::vector<SubmapFeatures> read_features(const std::string& path);

/// Index persistence stores (id, timestamp, world pose, embedding) — graphs
/// stay in the features file.
struct IndexEntry {
    std::int64_t id = 0;
    double timestamp = 0.0;
    Pose world_pose;
    Eigen::VectorXd embedding;
};

void write_index(const std::string& path, const std::vector<IndexEntry>& entries);
std::vector<IndexEntry> read_index(const std::string& path);

void write_weights(const std::string& path, const NetWeights& weights);
NetWeights read_weights(const std::string& path);

// ---------------------------------------------------------------------------
// Line-delimited key=value metric/decision records, e.g.
//   type=decision query=12 candidate=3 consistency=8.25 distance=0.41 revisit=1
// ---------------------------------------------------------------------------

using Record = std::vector<std::pair<std::string, std::string>>;

void write_records(const std::string& path, const std::vector<Record>& records);
std::vector<Record> read_records(const std::string& path);
std::string record_get(const Record& r, const std::string& key);

}  // namespace regrace
