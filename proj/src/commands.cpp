#include "regrace/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "parallel.hpp"
#include "regrace/io.hpp"
#include "regrace/pipeline.hpp"
#include "regrace/retrieval.hpp"
#include "regrace/synth.hpp"

namespace regrace {

namespace {

namespace fs = std::filesystem;

/// Distinguishes "you called this wrong" (exit 2) from data errors (exit 1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string require(const Config& cfg, const std::string& key) {
    const std::string& v = cfg.get_str(key);
    if (v.empty()) throw UsageError("config key '" + key + "' is required by this command");
    return v;
}

std::string require_file(const Config& cfg, const std::string& key) {
    const std::string v = require(cfg, key);
    if (!fs::exists(v)) throw UsageError(key + " does not exist: " + v);
    return v;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

RansacParams ransac_from(const Config& cfg) {
    RansacParams r;
    r.inlier_tol = cfg.get_double("ransac_inlier_tol");
    r.max_iters = cfg.get_int("ransac_max_iters");
    r.confidence = cfg.get_double("ransac_confidence");
    r.seed = cfg.get_u64("seed");
    return r;
}

IcpParams icp_from(const Config& cfg) {
    IcpParams p;
    p.nn_cap = cfg.get_double("icp_nn_cap");
    p.tol = cfg.get_double("icp_tol");
    p.max_iters = cfg.get_int("icp_max_iters");
    return p;
}

MatchFeatures match_from(const Config& cfg) {
    const std::string& v = cfg.get_str("match_features");
    if (v == "descriptor") return MatchFeatures::descriptors;
    if (v == "enriched") return MatchFeatures::enriched;
    throw UsageError("match_features must be 'descriptor' or 'enriched', got '" + v + "'");
}

RerankParams rerank_from(const Config& cfg) {
    RerankParams p;
    p.top_k = cfg.get_int("top_k");
    p.exclusion_s = cfg.get_double("exclusion_seconds");
    p.d_t = cfg.get_double("d_t");
    p.epsilon_c = cfg.get_double("epsilon_c");
    p.normalize_consistency = cfg.get_bool("consistency_normalize");
    p.ransac = ransac_from(cfg);
    p.match_on = match_from(cfg);
    return p;
}

NetWeights load_or_random_weights(const Config& cfg) {
    const std::string& path = cfg.get_str("weights_path");
    if (!path.empty()) {
        if (!fs::exists(path)) throw UsageError("weights_path does not exist: " + path);
        return read_weights(path);
    }
    NetWeights w = random_weights(cfg.get_u64("seed"), kDescriptorDim, cfg.get_int("egnn_hidden"),
                                  cfg.get_int("egnn_out"), cfg.get_int("egnn_depth"),
                                  cfg.get_int("embed_dim"), cfg.get_int("tnn_slices"));
    w.gem_lambda = cfg.get_double("gem_lambda");
    return w;
}

std::string zero_pad6(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06zu", i);
    return buf;
}

// ---------------------------------------------------------------------- synth

int cmd_synth(const Config& cfg, std::ostream& out) {
    const std::string dir = require(cfg, "out_path");

    WorldSpec spec;
    spec.seed = cfg.get_u64("seed");
    spec.submap_count = cfg.get_int("synth_submaps");
    spec.revisit_fraction = cfg.get_double("synth_revisit_fraction");
    spec.noise_sigma = cfg.get_double("synth_noise_sigma");
    spec.dropout = cfg.get_double("synth_dropout");
    spec.scene.object_count = cfg.get_int("synth_objects");
    spec.scene.points_per_object = cfg.get_int("synth_points");
    spec.scene.voxel_size = cfg.get_double("voxel_size");
    spec.scene.num_classes = cfg.get_int("num_classes");
    const SynthWorld world = generate_world(spec);

    fs::create_directories(fs::path(dir) / "scans");
    fs::create_directories(fs::path(dir) / "labels");

    std::vector<Pose> poses;
    std::ofstream times(fs::path(dir) / "times.txt");
    times.precision(17);
    std::vector<Record> revisits;

    for (std::size_t i = 0; i < world.entries.size(); ++i) {
        const WorldEntry& e = world.entries[i];
        const std::string stem = zero_pad6(i);
        std::ofstream scan(fs::path(dir) / "scans" / (stem + ".bin"), std::ios::binary);
        std::ofstream label(fs::path(dir) / "labels" / (stem + ".label"), std::ios::binary);
        for (const auto& [key, cell] : e.submap.grid.cells) {
            const float q[4] = {static_cast<float>(cell.centroid.x()),
                                static_cast<float>(cell.centroid.y()),
                                static_cast<float>(cell.centroid.z()), 0.0f};
            scan.write(reinterpret_cast<const char*>(q), sizeof(q));
            Eigen::Index cls = 0;
            cell.mean_probs.maxCoeff(&cls);
            const auto word = static_cast<std::uint32_t>(cls);
            label.write(reinterpret_cast<const char*>(&word), sizeof(word));
        }
        poses.push_back(e.submap.origin);
        times << e.timestamp << '\n';
        if (e.revisit_partner >= 0) {
            revisits.push_back({{"type", "revisit"},
                                {"query", std::to_string(i)},
                                {"partner", std::to_string(e.revisit_partner)},
                                {"reversed", e.reversed ? "1" : "0"}});
        }
    }
    write_poses((fs::path(dir) / "poses.txt").string(), poses);
    write_records((fs::path(dir) / "revisits.txt").string(), revisits);
    out << "synth: " << world.entries.size() << " submaps (" << revisits.size() << " revisits) -> "
        << dir << '\n';
    return 0;
}

// ---------------------------------------------------------------------- build

int cmd_build(const Config& cfg, std::ostream& out) {
    const std::string scans_dir = require_file(cfg, "scans_dir");
    const std::string labels_dir = require_file(cfg, "labels_dir");
    const std::vector<Pose> poses = read_poses(require_file(cfg, "poses_path"));
    const std::vector<double> times = read_times(require_file(cfg, "times_path"));
    const std::string out_path = require(cfg, "submaps_path");
    const double voxel = cfg.get_double("voxel_size");
    const double span = cfg.get_double("max_span");
    const int n_classes = cfg.get_int("num_classes");

    std::vector<fs::path> scan_files;
    for (const auto& ent : fs::directory_iterator(scans_dir)) {
        if (ent.path().extension() == ".bin") scan_files.push_back(ent.path());
    }
    std::sort(scan_files.begin(), scan_files.end());
    if (scan_files.empty()) throw UsageError("no .bin scans in " + scans_dir);
    if (scan_files.size() != poses.size() || poses.size() != times.size()) {
        throw std::runtime_error("scan/pose/time counts disagree: " +
                                 std::to_string(scan_files.size()) + " scans, " +
                                 std::to_string(poses.size()) + " poses, " +
                                 std::to_string(times.size()) + " times");
    }

    std::vector<Submap> submaps;
    std::size_t idx = 0;
    std::int64_t id = 0;
    while (idx < scan_files.size()) {
        // size the window from poses alone, then load only those scans
        const std::vector<Pose> tail(poses.begin() + static_cast<std::ptrdiff_t>(idx),
                                     poses.end());
        const std::size_t w = accumulate_window(tail, span);
        std::vector<LabeledScan> window;
        window.reserve(w);
        for (std::size_t k = idx; k < idx + w; ++k) {
            RawScan raw = read_scan(scan_files[k].string());
            const auto n = static_cast<std::size_t>(raw.points.rows());
            const fs::path label_path =
                fs::path(labels_dir) / (scan_files[k].stem().string() + ".label");
            const ScanLabels labels = read_labels(label_path.string(), n);
            LabeledScan ls;
            ls.points = std::move(raw.points);
            ls.class_probs = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), n_classes);
            for (std::size_t p = 0; p < n; ++p) {
                const int cls = labels.classes[p];
                if (cls < 0 || cls >= n_classes) {
                    throw std::runtime_error("class id " + std::to_string(cls) +
                                             " out of range for num_classes=" +
                                             std::to_string(n_classes) + " in " +
                                             label_path.string());
                }
                ls.class_probs(static_cast<Eigen::Index>(p), cls) = 1.0;
            }
            ls.timestamp = times[k];
            ls.pose = poses[k];
            window.push_back(std::move(ls));
        }
        submaps.push_back(accumulate(window, span, voxel, id++));
        idx += w;
    }
    write_submaps(out_path, submaps);
    out << "build: " << submaps.size() << " submaps from " << scan_files.size() << " scans -> "
        << out_path << '\n';
    return 0;
}

// -------------------------------------------------------------------- extract

int cmd_extract(const Config& cfg, std::ostream& out) {
    const std::vector<Submap> submaps = read_submaps(require_file(cfg, "submaps_path"));
    const std::string out_path = require(cfg, "features_path");
    const NetWeights weights = load_or_random_weights(cfg);
    const PipelineParams params = pipeline_params(cfg);

    std::vector<SubmapFeatures> features(submaps.size());
    parallel_for(static_cast<int>(submaps.size()), cfg.get_int("workers"), [&](int i) {
        features[static_cast<std::size_t>(i)] =
            extract_features(submaps[static_cast<std::size_t>(i)], params, &weights);
    });
    write_features(out_path, features);
    out << "extract: " << features.size() << " submaps -> " << out_path << '\n';
    return 0;
}

// ---------------------------------------------------------------------- index

int cmd_index(const Config& cfg, std::ostream& out) {
    const std::vector<SubmapFeatures> features = read_features(require_file(cfg, "features_path"));
    const std::string out_path = require(cfg, "index_path");

    std::vector<IndexEntry> entries;
    entries.reserve(features.size());
    for (const SubmapFeatures& f : features) {
        if (!f.graph.has_global) {
            throw std::runtime_error("submap " + std::to_string(f.id) +
                                     " has no global embedding; re-run extract");
        }
        IndexEntry e;
        e.id = f.id;
        e.timestamp = f.timestamp;
        e.world_pose = f.origin;
        e.embedding = f.graph.global;
        entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const IndexEntry& a, const IndexEntry& b) { return a.id < b.id; });
    write_index(out_path, entries);
    out << "index: " << entries.size() << " embeddings -> " << out_path << '\n';
    return 0;
}

// ---------------------------------------------------------------------- query

int cmd_query(const Config& cfg, std::ostream& out) {
    const std::vector<SubmapFeatures> features = read_features(require_file(cfg, "features_path"));
    const std::vector<IndexEntry> entries = read_index(require_file(cfg, "index_path"));
    const std::string out_path = require(cfg, "out_path");
    const RerankParams params = rerank_from(cfg);
    const double r_tp = cfg.get_double("r_tp");

    std::map<std::int64_t, const SubmapFeatures*> feat_by_id;
    for (const SubmapFeatures& f : features) feat_by_id[f.id] = &f;

    std::vector<const IndexEntry*> by_time;
    by_time.reserve(entries.size());
    for (const IndexEntry& e : entries) by_time.push_back(&e);
    std::sort(by_time.begin(), by_time.end(), [](const IndexEntry* a, const IndexEntry* b) {
        return a->timestamp != b->timestamp ? a->timestamp < b->timestamp : a->id < b->id;
    });

    EmbeddingIndex index;
    for (const IndexEntry* e : by_time) {
        const auto it = feat_by_id.find(e->id);
        if (it == feat_by_id.end()) {
            throw std::runtime_error("index entry " + std::to_string(e->id) +
                                     " has no features record");
        }
        IndexRecord rec;
        rec.id = e->id;
        rec.timestamp = e->timestamp;
        rec.embedding = e->embedding;
        rec.graph = it->second->graph;
        rec.world_pose = e->world_pose;
        index.insert(std::move(rec));
    }

    const std::vector<IndexRecord>& recs = index.records();
    const int n = static_cast<int>(recs.size());
    std::vector<Record> decisions(recs.size());

    parallel_for(n, cfg.get_int("workers"), [&](int i) {
        const IndexRecord& q = recs[static_cast<std::size_t>(i)];
        const RevisitDecision d =
            rerank_classify(index, q.id, q.embedding, q.graph, q.timestamp, params);

        // ground-truth bookkeeping over the same eligibility window
        const Eigen::Vector3d qp = q.world_pose.translation();
        bool has_gt = false;
        for (const IndexRecord& r : recs) {
            if (r.id == q.id || r.timestamp > q.timestamp - params.exclusion_s) continue;
            if ((r.world_pose.translation() - qp).norm() <= r_tp) {
                has_gt = true;
                break;
            }
        }
        std::string ranked_gt;
        for (const RankedCandidate& rc : d.ranked) {
            const IndexRecord* r = index.find(rc.candidate_id);
            if (!ranked_gt.empty()) ranked_gt += ',';
            ranked_gt += fmt((r->world_pose.translation() - qp).norm());
        }
        double cand_gt = -1.0;
        if (d.candidate_id >= 0) {
            cand_gt = (index.find(d.candidate_id)->world_pose.translation() - qp).norm();
        }

        decisions[static_cast<std::size_t>(i)] = {
            {"type", "decision"},
            {"query", std::to_string(q.id)},
            {"ts", fmt(q.timestamp)},
            {"candidate", std::to_string(d.candidate_id)},
            {"consistency", fmt(d.consistency)},
            {"distance", fmt(d.embedding_distance)},
            {"revisit", d.is_revisit ? "1" : "0"},
            {"gt_pos", has_gt ? "1" : "0"},
            {"cand_gt_dist", fmt(cand_gt)},
            {"ranked_gt", ranked_gt},
        };
    });

    write_records(out_path, decisions);
    out << "query: " << decisions.size() << " decisions -> " << out_path << '\n';
    return 0;
}

// ------------------------------------------------------------------- register

int cmd_register(const Config& cfg, std::ostream& out) {
    const std::vector<SubmapFeatures> features = read_features(require_file(cfg, "features_path"));
    const std::string out_path = require(cfg, "out_path");
    const RansacParams rp = ransac_from(cfg);
    const IcpParams ip = icp_from(cfg);
    const MatchFeatures on = match_from(cfg);
    const double rre_max = cfg.get_double("rre_max_deg");
    const double rte_max = cfg.get_double("rte_max_m");

    std::map<std::int64_t, const SubmapFeatures*> by_id;
    for (const SubmapFeatures& f : features) by_id[f.id] = &f;
    const auto lookup = [&](std::int64_t id) -> const SubmapFeatures& {
        const auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw std::runtime_error("no features for submap id " + std::to_string(id));
        }
        return *it->second;
    };

    std::vector<std::pair<std::int64_t, std::int64_t>> pairs;
    const std::string& pairs_path = cfg.get_str("pairs_path");
    if (!pairs_path.empty()) {
        if (!fs::exists(pairs_path)) throw UsageError("pairs_path does not exist: " + pairs_path);
        std::ifstream pf(pairs_path);
        std::int64_t a = 0, b = 0;
        while (pf >> a >> b) pairs.emplace_back(a, b);
    } else {
        // all pairs close in space and separated in time, query strictly later
        const double max_dist = cfg.get_double("reg_pair_max_dist");
        const double exclusion = cfg.get_double("exclusion_seconds");
        for (const SubmapFeatures& q : features) {
            for (const SubmapFeatures& c : features) {
                if (c.timestamp > q.timestamp - exclusion) continue;
                const double d = (q.origin.translation() - c.origin.translation()).norm();
                if (d <= max_dist) pairs.emplace_back(q.id, c.id);
            }
        }
    }

    std::vector<Record> records(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), cfg.get_int("workers"), [&](int i) {
        const auto [qid, cid] = pairs[static_cast<std::size_t>(i)];
        const SubmapFeatures& q = lookup(qid);
        const SubmapFeatures& c = lookup(cid);
        const Pose gt = relative(q.origin, c.origin);  // candidate frame -> query frame

        Record r = {{"type", "registration"},
                    {"query", std::to_string(qid)},
                    {"candidate", std::to_string(cid)}};
        try {
            const TransformEstimate est = register_pair(q, c, rp, ip, on);
            const RegistrationEval ev = eval_registration(est.transform, gt, rre_max, rte_max);
            r.emplace_back("success", ev.success ? "1" : "0");
            r.emplace_back("rre_deg", fmt(ev.rre_deg));
            r.emplace_back("rte_m", fmt(ev.rte_m));
            r.emplace_back("rmse", fmt(est.rmse));
            r.emplace_back("inliers", std::to_string(est.inliers.size()));
            r.emplace_back("stage",
                           est.stage == TransformEstimate::Stage::refined ? "refined" : "coarse");
            r.emplace_back("degraded", est.degraded ? "1" : "0");
        } catch (const std::exception&) {
            // too few mutual matches to even hypothesize — count as a failure
            r.emplace_back("success", "0");
            r.emplace_back("rre_deg", "inf");
            r.emplace_back("rte_m", "inf");
            r.emplace_back("rmse", "inf");
            r.emplace_back("inliers", "0");
            r.emplace_back("stage", "none");
            r.emplace_back("degraded", "1");
        }
        records[static_cast<std::size_t>(i)] = std::move(r);
    });

    write_records(out_path, records);
    out << "register: " << records.size() << " pairs -> " << out_path << '\n';
    return 0;
}

// -------------------------------------------------------------------- eval-pr

int cmd_eval_pr(const Config& cfg, std::ostream& out) {
    const std::vector<Record> records = read_records(require_file(cfg, "records_path"));
    const double r_tp = cfg.get_double("r_tp");
    const double r_fp = cfg.get_double("r_fp");

    std::vector<QueryOutcome> outcomes;
    for (const Record& r : records) {
        if (record_get(r, "type") != "decision") continue;
        QueryOutcome o;
        o.has_gt_positive = record_get(r, "gt_pos") == "1";
        o.score = std::stod(record_get(r, "consistency"));
        o.has_candidate = std::stoll(record_get(r, "candidate")) >= 0;
        o.cand_gt_dist = o.has_candidate ? std::stod(record_get(r, "cand_gt_dist")) : 0.0;
        const std::string ranked = record_get(r, "ranked_gt");
        std::stringstream ss(ranked);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (!tok.empty()) o.ranked_gt_dist.push_back(std::stod(tok));
        }
        outcomes.push_back(std::move(o));
    }

    const MetricReport rep = eval_metrics(outcomes, r_tp, r_fp);
    out << "eval-pr: queries=" << outcomes.size() << " recall_at_1=" << rep.recall_at_1
        << " recall_at_5=" << rep.recall_at_5 << " f1_max=" << rep.f1_max
        << " best_threshold=" << rep.best_threshold << '\n';

    const std::string& out_path = cfg.get_str("out_path");
    if (!out_path.empty()) {
        std::vector<Record> lines;
        lines.push_back({{"type", "metrics"},
                         {"queries", std::to_string(outcomes.size())},
                         {"recall_at_1", fmt(rep.recall_at_1)},
                         {"recall_at_5", fmt(rep.recall_at_5)},
                         {"f1_max", fmt(rep.f1_max)},
                         {"best_threshold", fmt(rep.best_threshold)}});
        for (const PrPoint& p : rep.curve) {
            lines.push_back({{"type", "pr"},
                             {"threshold", fmt(p.threshold)},
                             {"precision", fmt(p.precision)},
                             {"recall", fmt(p.recall)},
                             {"f1", fmt(p.f1)}});
        }
        write_records(out_path, lines);
    }
    return 0;
}

// ------------------------------------------------------------------- eval-reg

int cmd_eval_reg(const Config& cfg, std::ostream& out) {
    const std::vector<Record> records = read_records(require_file(cfg, "records_path"));

    std::vector<double> rre, rte;
    int attempted = 0, succeeded = 0;
    for (const Record& r : records) {
        if (record_get(r, "type") != "registration") continue;
        ++attempted;
        if (record_get(r, "success") == "1") {
            ++succeeded;
            rre.push_back(std::stod(record_get(r, "rre_deg")));
            rte.push_back(std::stod(record_get(r, "rte_m")));
        }
    }
    if (attempted == 0) throw std::runtime_error("no registration records found");

    const auto median = [](std::vector<double> v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    const auto mean = [](const std::vector<double>& v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };

    const double rate = static_cast<double>(succeeded) / attempted;
    out << "eval-reg: pairs=" << attempted << " success_rate=" << rate
        << " rre_median_deg=" << median(rre) << " rte_median_m=" << median(rte)
        << " rre_mean_deg=" << mean(rre) << " rte_mean_m=" << mean(rte) << '\n';

    const std::string& out_path = cfg.get_str("out_path");
    if (!out_path.empty()) {
        write_records(out_path, {{{"type", "reg_metrics"},
                                  {"pairs", std::to_string(attempted)},
                                  {"succeeded", std::to_string(succeeded)},
                                  {"success_rate", fmt(rate)},
                                  {"rre_median_deg", fmt(median(rre))},
                                  {"rte_median_m", fmt(median(rte))},
                                  {"rre_mean_deg", fmt(mean(rre))},
                                  {"rte_mean_m", fmt(mean(rte))}}});
    }
    return 0;
}

}  // namespace

int run_command(const std::string& command, const Config& cfg, std::ostream& out,
                std::ostream& err) {
    try {
        if (command == "synth") return cmd_synth(cfg, out);
        if (command == "build") return cmd_build(cfg, out);
        if (command == "extract") return cmd_extract(cfg, out);
        if (command == "index") return cmd_index(cfg, out);
        if (command == "query") return cmd_query(cfg, out);
        if (command == "register") return cmd_register(cfg, out);
        if (command == "eval-pr") return cmd_eval_pr(cfg, out);
        if (command == "eval-reg") return cmd_eval_reg(cfg, out);
        throw UsageError("unknown command '" + command +
                         "' (expected synth|build|extract|index|query|register|eval-pr|eval-reg)");
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace regrace
