#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "core_types.hpp"
#include "errors.hpp"
#include "gt_labels.hpp"
#include "log.hpp"
#include "numfmt.hpp"

namespace tflow {

/// One sequence worth of inputs. `hidden_identity` is only known for
/// synthetic data (detection -> true identity, -1 for false positives).
struct SequenceBundle {
    std::string name = "sequence";
    int frame_count = 0;
    std::vector<Detection> detections;
    std::vector<Trajectory> gt;
    std::map<DetKey, int> hidden_identity;
};

namespace io_detail {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool skippable(std::string_view line) {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string_view::npos || line[first] == '#';
}

inline double number(std::string_view s, std::size_t line_no, const char* field) {
    double v;
    if (!parse_double(s, v)) throw FormatError(std::string("bad ") + field + " '" + std::string(s) + "'", line_no);
    return v;
}

inline int integer(std::string_view s, std::size_t line_no, const char* field) {
    long long v;
    if (!parse_int(s, v)) throw FormatError(std::string("bad ") + field + " '" + std::string(s) + "'", line_no);
    return static_cast<int>(v);
}

/// Calls fn(fields, line_no) for every data line.
inline void for_each_row(std::istream& is, const std::function<void(const std::vector<std::string_view>&, std::size_t)>& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (skippable(line)) continue;
        fn(split(line), line_no);
    }
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return is;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    return os;
}

}  // namespace io_detail

/// MOTChallenge detections: "frame,id,bb_left,bb_top,bb_width,bb_height,conf[,x,y,z]".
/// Detection indices count rows per frame in file order.
inline std::vector<Detection> read_detections(std::istream& is) {
    using namespace io_detail;
    std::vector<Detection> out;
    std::map<int, int> per_frame;
    for_each_row(is, [&](const auto& f, std::size_t ln) {
        if (f.size() < 7) throw FormatError("detection row needs at least 7 fields", ln);
        Detection d;
        d.frame = integer(f[0], ln, "frame");
        if (d.frame < 1) throw FormatError("frames are 1-based", ln);
        d.box = {number(f[2], ln, "bb_left"), number(f[3], ln, "bb_top"), number(f[4], ln, "bb_width"),
                 number(f[5], ln, "bb_height")};
        d.det_score = number(f[6], ln, "conf");
        d.index = per_frame[d.frame]++;
        if (!(d.box.w > 0.0 && d.box.h > 0.0)) {
            log::warn("skipping detection with non-positive size at line " + std::to_string(ln));
            return;
        }
        out.push_back(std::move(d));
    });
    return out;
}

inline std::vector<Detection> read_detections(const std::string& path) {
    auto is = io_detail::open_in(path);
    return read_detections(is);
}

/// Rows sorted by (frame, index); reals with two fractional digits.
inline void write_detections(std::ostream& os, std::vector<Detection> dets) {
    std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) { return key_of(a) < key_of(b); });
    for (const auto& d : dets)
        os << d.frame << ",-1," << fixed_double(d.box.x) << ',' << fixed_double(d.box.y) << ','
           << fixed_double(d.box.w) << ',' << fixed_double(d.box.h) << ',' << fixed_double(d.det_score)
           << ",-1,-1,-1\n";
}

struct GtReadOptions {
    /// Accepted class ids; empty accepts every class.
    std::set<int> classes{1};
    bool keep_ignored = false;
};

/// Track files ("frame,id,x,y,w,h[,flag[,class[,visibility]]]") grouped into
/// per-identity trajectories. Rows with flag 0 are ignored unless requested.
inline std::vector<Trajectory> read_tracks(std::istream& is, const GtReadOptions& opt = {}) {
    using namespace io_detail;
    std::map<int, std::map<int, BoundingBox>> tracks;
    for_each_row(is, [&](const auto& f, std::size_t ln) {
        if (f.size() < 6) throw FormatError("track row needs at least 6 fields", ln);
        const int frame = integer(f[0], ln, "frame");
        const int id = integer(f[1], ln, "id");
        const BoundingBox box{number(f[2], ln, "x"), number(f[3], ln, "y"), number(f[4], ln, "w"),
                              number(f[5], ln, "h")};
        if (f.size() >= 7 && !opt.keep_ignored && number(f[6], ln, "flag") == 0.0) return;
        if (f.size() >= 8 && !opt.classes.empty() && !opt.classes.count(integer(f[7], ln, "class"))) return;
        if (!(box.w > 0.0 && box.h > 0.0)) {
            log::warn("skipping box with non-positive size at line " + std::to_string(ln));
            return;
        }
        if (!tracks[id].emplace(frame, box).second)
            throw FormatError("duplicate (frame, id) = (" + std::to_string(frame) + ", " + std::to_string(id) + ")", ln);
    });
    std::vector<Trajectory> out;
    for (const auto& [id, frames] : tracks) {
        Trajectory t{id, {}};
        for (const auto& [frame, box] : frames) t.entries.push_back({frame, box, false});
        out.push_back(std::move(t));
    }
    return out;
}

inline std::vector<Trajectory> read_ground_truth(const std::string& path, const GtReadOptions& opt = {}) {
    auto is = io_detail::open_in(path);
    return read_tracks(is, opt);
}

/// Tracking results: every row counts, whatever the confidence column holds.
inline std::vector<Trajectory> read_results(const std::string& path) {
    auto is = io_detail::open_in(path);
    return read_tracks(is, {{}, true});
}

namespace io_detail {

struct Row {
    int frame;
    int id;
    BoundingBox box;
};

inline std::vector<Row> rows_of(const std::vector<Trajectory>& trajectories) {
    std::vector<Row> rows;
    for (const auto& t : trajectories) {
        if (t.identity < 1) throw PreconditionError("track identities must be positive");
        for (const auto& e : t.entries) rows.push_back({e.frame, t.identity, e.box});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.frame != b.frame ? a.frame < b.frame : a.id < b.id; });
    return rows;
}

}  // namespace io_detail

/// Ground truth: "frame,id,x,y,w,h,1,1,1.00" sorted by frame then identity.
inline void write_ground_truth(std::ostream& os, const std::vector<Trajectory>& gt) {
    for (const auto& r : io_detail::rows_of(gt))
        os << r.frame << ',' << r.id << ',' << fixed_double(r.box.x) << ',' << fixed_double(r.box.y) << ','
           << fixed_double(r.box.w) << ',' << fixed_double(r.box.h) << ",1,1,1.00\n";
}

/// Results: "frame,id,x,y,w,h,1.00,-1,-1,-1" sorted by frame then identity.
/// The interpolated flag has no column and is dropped.
inline void write_results(std::ostream& os, const std::vector<Trajectory>& trajectories) {
    for (const auto& r : io_detail::rows_of(trajectories))
        os << r.frame << ',' << r.id << ',' << fixed_double(r.box.x) << ',' << fixed_double(r.box.y) << ','
           << fixed_double(r.box.w) << ',' << fixed_double(r.box.h) << ",1.00,-1,-1,-1\n";
}

inline void write_results(const std::string& path, const std::vector<Trajectory>& trajectories) {
    auto os = io_detail::open_out(path);
    write_results(os, trajectories);
}

using EmbeddingTable = std::map<DetKey, Embedding>;

/// Embedding sidecar: header "# dim=<D>", rows "frame,det_index,v1,...,vD".
/// Vectors are re-normalized; a norm off by more than 1e-3 is reported.
inline EmbeddingTable read_embeddings(std::istream& is) {
    using namespace io_detail;
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0, dim = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.starts_with("# dim=")) {
            double d;
            if (!parse_double(std::string_view(line).substr(6), d) || d < 1) throw FormatError("bad dimension header", line_no);
            dim = static_cast<std::size_t>(d);
            continue;
        }
        if (skippable(line)) continue;
        if (dim == 0) throw FormatError("embedding file lacks '# dim=' header", line_no);
        const auto f = split(line);
        if (f.size() != dim + 2) throw FormatError("expected " + std::to_string(dim + 2) + " fields", line_no);
        Embedding v(dim);
        for (std::size_t k = 0; k < dim; ++k) v[k] = number(f[k + 2], line_no, "value");
        const double n = l2_norm(v);
        if (!(n > 0.0)) throw FormatError("zero embedding", line_no);
        if (std::abs(n - 1.0) > 1e-3) log::warn("embedding at line " + std::to_string(line_no) + " re-normalized");
        const DetKey key{integer(f[0], line_no, "frame"), integer(f[1], line_no, "det_index")};
        if (!table.emplace(key, normalized(std::move(v))).second) throw FormatError("duplicate embedding key", line_no);
    }
    return table;
}

inline EmbeddingTable read_embeddings(const std::string& path) {
    auto is = io_detail::open_in(path);
    return read_embeddings(is);
}

inline void write_embeddings(std::ostream& os, const std::vector<Detection>& dets) {
    std::size_t dim = 0;
    for (const auto& d : dets)
        if (d.has_embedding()) dim = d.embedding.size();
    os << "# dim=" << std::max<std::size_t>(dim, 1) << '\n';
    for (const auto& d : dets) {
        if (!d.has_embedding()) continue;
        os << d.frame << ',' << d.index;
        for (double v : d.embedding) os << ',' << fixed_double(v, 6);
        os << '\n';
    }
}

/// Copies sidecar embeddings onto detections; every key must name a detection.
inline void attach_embeddings(std::vector<Detection>& dets, const EmbeddingTable& table) {
    std::map<DetKey, Detection*> index;
    for (auto& d : dets) index[key_of(d)] = &d;
    for (const auto& [key, v] : table) {
        auto it = index.find(key);
        if (it == index.end())
            throw FormatError("embedding for unknown detection (" + std::to_string(key.first) + ", " +
                              std::to_string(key.second) + ")");
        it->second->embedding = v;
    }
}

/// Per-detection scalar sidecar: rows "frame,det_index,value".
inline std::map<DetKey, double> read_keyed_values(std::istream& is) {
    using namespace io_detail;
    std::map<DetKey, double> out;
    for_each_row(is, [&](const auto& f, std::size_t ln) {
        if (f.size() != 3) throw FormatError("expected frame,det_index,value", ln);
        const DetKey key{integer(f[0], ln, "frame"), integer(f[1], ln, "det_index")};
        if (!out.emplace(key, number(f[2], ln, "value")).second) throw FormatError("duplicate key", ln);
    });
    return out;
}

inline std::map<DetKey, double> read_humanity(const std::string& path) {
    auto is = io_detail::open_in(path);
    return read_keyed_values(is);
}

inline void attach_humanity(std::vector<Detection>& dets, const std::map<DetKey, double>& table) {
    std::map<DetKey, Detection*> index;
    for (auto& d : dets) index[key_of(d)] = &d;
    for (const auto& [key, h] : table) {
        auto it = index.find(key);
        if (it == index.end()) throw FormatError("humanity for unknown detection");
        if (h < 0.0 || h > 1.0) throw FormatError("humanity must lie in [0, 1]");
        it->second->humanity = h;
    }
}

inline void write_humanity(std::ostream& os, const std::vector<Detection>& dets) {
    for (const auto& d : dets)
        if (d.humanity) os << d.frame << ',' << d.index << ',' << fixed_double(*d.humanity, 6) << '\n';
}

// ---------------------------------------------------------------- config

namespace io_detail {

struct ConfigField {
    const char* key;
    std::function<void(EngineConfig&, std::string_view)> set;
    std::function<std::string(const EngineConfig&)> get;
};

template <class T>
ConfigField real_field(const char* key, T EngineConfig::*member) {
    return {key,
            [key, member](EngineConfig& c, std::string_view v) {
                double d;
                if (!parse_double(v, d)) throw ConfigError(std::string("bad value for ") + key);
                c.*member = static_cast<T>(d);
                if constexpr (std::is_integral_v<T>)
                    if (static_cast<double>(c.*member) != d) throw ConfigError(std::string(key) + " must be an integer");
            },
            [member](const EngineConfig& c) {
                if constexpr (std::is_integral_v<T>) return std::to_string(c.*member);
                else return exact_double(c.*member);
            }};
}

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = {
        real_field("beta", &EngineConfig::beta),
        real_field("gamma", &EngineConfig::gamma),
        real_field("cost_init_scale", &EngineConfig::cost_init_scale),
        real_field("window", &EngineConfig::window),
        real_field("step", &EngineConfig::step),
        real_field("dt_max", &EngineConfig::dt_max),
        real_field("gap_max", &EngineConfig::gap_max),
        real_field("nms_iou", &EngineConfig::nms_iou),
        real_field("humanity_min", &EngineConfig::humanity_min),
        real_field("det_score_min", &EngineConfig::det_score_min),
        real_field("theta_high", &EngineConfig::theta_high),
        real_field("margin", &EngineConfig::margin),
        real_field("affinity_epochs", &EngineConfig::affinity_epochs),
        real_field("affinity_lr", &EngineConfig::affinity_lr),
        real_field("lr", &EngineConfig::lr),
        real_field("iterations", &EngineConfig::iterations),
        real_field("train_window", &EngineConfig::train_window),
        real_field("train_step", &EngineConfig::train_step),
        {"weighting", [](EngineConfig& c, std::string_view v) { c.weighting = parse_weighting(std::string(v)); },
         [](const EngineConfig& c) { return to_string(c.weighting); }},
        real_field("missing_distance", &EngineConfig::missing_distance),
        real_field("kalman_measurement_std", &EngineConfig::kalman_measurement_std),
        real_field("kalman_process_std", &EngineConfig::kalman_process_std),
        real_field("interp_humanity_min", &EngineConfig::interp_humanity_min),
        real_field("interp_distance_max", &EngineConfig::interp_distance_max),
        real_field("seed", &EngineConfig::seed),
        real_field("workers", &EngineConfig::workers),
    };
    return fields;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace io_detail

/// Applies one "key=value" override; unknown keys are rejected by name.
inline void set_config_value(EngineConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : io_detail::config_fields())
        if (key == f.key) {
            f.set(cfg, io_detail::trim(value));
            return;
        }
    throw ConfigError("unknown config key '" + key + "'");
}

/// Flat "key = value" text, '#' comments. Missing keys keep their defaults.
inline EngineConfig parse_config(std::istream& is) {
    EngineConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (io_detail::skippable(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("expected key=value", line_no);
        set_config_value(cfg, io_detail::trim(std::string_view(line).substr(0, eq)),
                         io_detail::trim(std::string_view(line).substr(eq + 1)));
    }
    return cfg;
}

inline EngineConfig load_config(const std::string& path) {
    auto is = io_detail::open_in(path);
    return parse_config(is);
}

inline void write_config(std::ostream& os, const EngineConfig& cfg) {
    for (const auto& f : io_detail::config_fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

// ---------------------------------------------------------------- bundles

/// Sequence directory layout:
///   seqinfo.ini          [Sequence] name=..., seqLength=...
///   det/det.txt          detections
///   det/embeddings.txt   optional embedding sidecar
///   det/humanity.txt     optional humanity sidecar
///   det/identities.txt   optional hidden identities (synthetic data)
///   gt/gt.txt            optional ground truth
inline void save_bundle(const std::string& dir, const SequenceBundle& b) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "det");
    fs::create_directories(fs::path(dir) / "gt");
    {
        auto os = io_detail::open_out((fs::path(dir) / "seqinfo.ini").string());
        os << "[Sequence]\nname=" << b.name << "\nseqLength=" << b.frame_count << '\n';
    }
    {
        auto os = io_detail::open_out((fs::path(dir) / "det" / "det.txt").string());
        write_detections(os, b.detections);
    }
    if (std::any_of(b.detections.begin(), b.detections.end(), [](const auto& d) { return d.has_embedding(); })) {
        auto os = io_detail::open_out((fs::path(dir) / "det" / "embeddings.txt").string());
        write_embeddings(os, b.detections);
    }
    if (std::any_of(b.detections.begin(), b.detections.end(), [](const auto& d) { return d.humanity.has_value(); })) {
        auto os = io_detail::open_out((fs::path(dir) / "det" / "humanity.txt").string());
        write_humanity(os, b.detections);
    }
    if (!b.hidden_identity.empty()) {
        auto os = io_detail::open_out((fs::path(dir) / "det" / "identities.txt").string());
        for (const auto& [key, id] : b.hidden_identity) os << key.first << ',' << key.second << ',' << id << '\n';
    }
    auto os = io_detail::open_out((fs::path(dir) / "gt" / "gt.txt").string());
    write_ground_truth(os, b.gt);
}

inline SequenceBundle load_bundle(const std::string& dir) {
    namespace fs = std::filesystem;
    SequenceBundle b;
    b.name = fs::path(dir).filename().string();
    const fs::path info = fs::path(dir) / "seqinfo.ini";
    if (fs::exists(info)) {
        auto is = io_detail::open_in(info.string());
        std::string line;
        while (std::getline(is, line)) {
            if (line.starts_with("name=")) b.name = io_detail::trim(line.substr(5));
            if (line.starts_with("seqLength=")) {
                long long v;
                if (parse_int(io_detail::trim(line.substr(10)), v)) b.frame_count = static_cast<int>(v);
            }
        }
    }
    const fs::path det = fs::path(dir) / "det" / "det.txt";
    if (!fs::exists(det)) throw FormatError("missing " + det.string());
    b.detections = read_detections(det.string());
    if (const auto p = fs::path(dir) / "det" / "embeddings.txt"; fs::exists(p))
        attach_embeddings(b.detections, read_embeddings(p.string()));
    if (const auto p = fs::path(dir) / "det" / "humanity.txt"; fs::exists(p))
        attach_humanity(b.detections, read_humanity(p.string()));
    if (const auto p = fs::path(dir) / "det" / "identities.txt"; fs::exists(p)) {
        auto is = io_detail::open_in(p.string());
        for (const auto& [key, v] : read_keyed_values(is)) b.hidden_identity[key] = static_cast<int>(v);
    }
    if (const auto p = fs::path(dir) / "gt" / "gt.txt"; fs::exists(p)) b.gt = read_ground_truth(p.string());
    for (const auto& d : b.detections) b.frame_count = std::max(b.frame_count, d.frame);
    return b;
}

}  // namespace tflow
