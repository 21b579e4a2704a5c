#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "errors.hpp"
#include "gt_labels.hpp"
#include "mot_io.hpp"
#include "pipeline.hpp"

namespace tflow {

struct OcclusionEpisode {
    int identity = 1;  // 1-based, as in the ground truth
    int start = 1;
    int duration = 0;
};

struct ScenarioConfig {
    int n_identities = 20;
    int frames = 300;
    double arena_width = 1920.0;
    double arena_height = 1080.0;
    double min_height = 80.0;
    double max_height = 200.0;
    double aspect = 0.41;  // width / height
    double speed_min = 1.0;  // pixels per frame
    double speed_max = 6.0;
    double direction_change_prob = 0.02;
    double p_miss = 0.1;
    double fp_rate = 0.05;  // expected false positives per frame
    double jitter_std = 0.05;  // fraction of box size
    std::vector<OcclusionEpisode> occlusions;
    // random occlusions: per identity and frame start probability, Gamma(4) durations
    double occlusion_rate = 0.0;
    double occlusion_mean = 10.0;
    double min_lifetime_fraction = 0.5;
    int embedding_dim = 128;
    double embedding_noise_std = 0.1;
    std::uint64_t seed = 42;

    void validate() const {
        auto prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
        };
        prob(direction_change_prob, "direction_change_prob");
        prob(p_miss, "p_miss");
        prob(occlusion_rate, "occlusion_rate");
        prob(min_lifetime_fraction, "min_lifetime_fraction");
        if (n_identities < 0 || frames < 1) throw ConfigError("need n_identities >= 0 and frames >= 1");
        if (!(fp_rate >= 0.0) || !(jitter_std >= 0.0) || !(embedding_noise_std >= 0.0))
            throw ConfigError("rates and noise levels must be non-negative");
        if (!(min_height > 0.0 && max_height >= min_height && aspect > 0.0)) throw ConfigError("bad box size range");
        if (!(speed_min >= 0.0 && speed_max >= speed_min)) throw ConfigError("bad speed range");
        if (!(occlusion_mean > 0.0)) throw ConfigError("occlusion_mean must be positive");
        if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
        if (arena_width < aspect * max_height || arena_height < max_height) throw ConfigError("arena too small");
    }
};

/// Flat "key = value" text like the engine config; each explicit occlusion
/// episode is one "occlusion = identity,start,duration" line.
inline void write_scenario(std::ostream& os, const ScenarioConfig& c) {
    os << "n_identities = " << c.n_identities << "\nframes = " << c.frames
       << "\narena_width = " << exact_double(c.arena_width) << "\narena_height = " << exact_double(c.arena_height)
       << "\nmin_height = " << exact_double(c.min_height) << "\nmax_height = " << exact_double(c.max_height)
       << "\naspect = " << exact_double(c.aspect) << "\nspeed_min = " << exact_double(c.speed_min)
       << "\nspeed_max = " << exact_double(c.speed_max)
       << "\ndirection_change_prob = " << exact_double(c.direction_change_prob)
       << "\np_miss = " << exact_double(c.p_miss) << "\nfp_rate = " << exact_double(c.fp_rate)
       << "\njitter_std = " << exact_double(c.jitter_std) << "\nocclusion_rate = " << exact_double(c.occlusion_rate)
       << "\nocclusion_mean = " << exact_double(c.occlusion_mean)
       << "\nmin_lifetime_fraction = " << exact_double(c.min_lifetime_fraction)
       << "\nembedding_dim = " << c.embedding_dim << "\nembedding_noise_std = " << exact_double(c.embedding_noise_std)
       << "\nseed = " << c.seed << '\n';
    for (const auto& e : c.occlusions) os << "occlusion = " << e.identity << ',' << e.start << ',' << e.duration << '\n';
}

inline ScenarioConfig parse_scenario(std::istream& is) {
    ScenarioConfig c;
    std::map<std::string, double*> reals{
        {"arena_width", &c.arena_width}, {"arena_height", &c.arena_height}, {"min_height", &c.min_height},
        {"max_height", &c.max_height}, {"aspect", &c.aspect}, {"speed_min", &c.speed_min},
        {"speed_max", &c.speed_max}, {"direction_change_prob", &c.direction_change_prob}, {"p_miss", &c.p_miss},
        {"fp_rate", &c.fp_rate}, {"jitter_std", &c.jitter_std}, {"occlusion_rate", &c.occlusion_rate},
        {"occlusion_mean", &c.occlusion_mean}, {"min_lifetime_fraction", &c.min_lifetime_fraction},
        {"embedding_noise_std", &c.embedding_noise_std}};
    std::map<std::string, int*> ints{
        {"n_identities", &c.n_identities}, {"frames", &c.frames}, {"embedding_dim", &c.embedding_dim}};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (io_detail::skippable(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("expected key=value", line_no);
        const std::string key = io_detail::trim(std::string_view(line).substr(0, eq));
        const std::string value = io_detail::trim(std::string_view(line).substr(eq + 1));
        if (key == "occlusion") {
            const auto f = io_detail::split(value);
            if (f.size() != 3) throw FormatError("occlusion needs identity,start,duration", line_no);
            c.occlusions.push_back({io_detail::integer(f[0], line_no, "identity"),
                                    io_detail::integer(f[1], line_no, "start"),
                                    io_detail::integer(f[2], line_no, "duration")});
        } else if (key == "seed") {
            long long v;
            if (!parse_int(value, v) || v < 0) throw FormatError("bad seed", line_no);
            c.seed = static_cast<std::uint64_t>(v);
        } else if (auto r = reals.find(key); r != reals.end()) {
            *r->second = io_detail::number(value, line_no, key.c_str());
        } else if (auto n = ints.find(key); n != ints.end()) {
            *n->second = io_detail::integer(value, line_no, key.c_str());
        } else {
            throw ConfigError("unknown scenario key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

namespace synth_detail {

// Independent random streams so one aspect of the scenario can be redrawn
// without disturbing the others.
enum Stream : std::uint64_t { motion = 1, occlusion = 2, detection = 3, appearance = 4, clutter = 5 };

inline std::mt19937_64 stream(std::uint64_t seed, Stream s) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s)};
    return std::mt19937_64(seq);
}

inline double beta_draw(std::mt19937_64& rng, double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(rng);
    const double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x / (x + y);
}

inline Embedding random_unit(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Embedding v(dim);
    for (auto& x : v) x = n(rng);
    return normalized(std::move(v));
}

struct Lifetime {
    int first;
    int last;
};

}  // namespace synth_detail

/// Per-identity base appearance vectors, identity k at index k - 1.
inline std::vector<Embedding> identity_embeddings(const ScenarioConfig& cfg) {
    auto rng = synth_detail::stream(cfg.seed, synth_detail::appearance);
    std::vector<Embedding> out;
    for (int k = 0; k < cfg.n_identities; ++k) out.push_back(synth_detail::random_unit(rng, cfg.embedding_dim));
    return out;
}

/// Explicit episodes followed by randomly drawn ones.
inline std::vector<OcclusionEpisode> draw_occlusions(const ScenarioConfig& cfg) {
    std::vector<OcclusionEpisode> out = cfg.occlusions;
    if (cfg.occlusion_rate <= 0.0) return out;
    auto rng = synth_detail::stream(cfg.seed, synth_detail::occlusion);
    std::bernoulli_distribution starts(cfg.occlusion_rate);
    std::gamma_distribution<double> length(4.0, cfg.occlusion_mean / 4.0);
    for (int id = 1; id <= cfg.n_identities; ++id)
        for (int f = 1; f <= cfg.frames; ++f)
            if (starts(rng)) {
                const int d = std::max(1, static_cast<int>(std::lround(length(rng))));
                out.push_back({id, f, d});
                f += d;  // episodes of one identity never overlap
            }
    return out;
}

/// Ground truth, noisy detections with humanity and embeddings, and the hidden
/// identity of every detection (-1 for false positives).
inline SequenceBundle generate(const ScenarioConfig& cfg) {
    using namespace synth_detail;
    cfg.validate();
    SequenceBundle b;
    b.name = "synthetic-" + std::to_string(cfg.seed);
    b.frame_count = cfg.frames;

    // Motion: piecewise constant velocity, reflected at the arena walls.
    auto mrng = stream(cfg.seed, motion);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw_velocity = [&](double& vx, double& vy) {
        const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(mrng);
        const double angle = 2.0 * M_PI * unit(mrng);
        vx = speed * std::cos(angle);
        vy = 0.3 * speed * std::sin(angle);  // people mostly move across the image
    };
    const int min_life = std::max(1, static_cast<int>(std::ceil(cfg.min_lifetime_fraction * cfg.frames)));
    std::vector<Lifetime> lifetimes;
    for (int id = 1; id <= cfg.n_identities; ++id) {
        const int len = min_life + static_cast<int>(unit(mrng) * (cfg.frames - min_life + 1) * 0.999999);
        const int first = 1 + static_cast<int>(unit(mrng) * (cfg.frames - len + 1) * 0.999999);
        lifetimes.push_back({first, first + len - 1});
        const double h = cfg.min_height + (cfg.max_height - cfg.min_height) * unit(mrng);
        const double w = cfg.aspect * h;
        double cx = w / 2 + (cfg.arena_width - w) * unit(mrng);
        double cy = h / 2 + (cfg.arena_height - h) * unit(mrng);
        double vx, vy;
        draw_velocity(vx, vy);
        Trajectory t{id, {}};
        for (int f = first; f <= first + len - 1; ++f) {
            if (f > first) {
                if (unit(mrng) < cfg.direction_change_prob) draw_velocity(vx, vy);
                cx += vx;
                cy += vy;
                if (cx < w / 2) cx = w - cx, vx = -vx;
                if (cx > cfg.arena_width - w / 2) cx = 2 * (cfg.arena_width - w / 2) - cx, vx = -vx;
                if (cy < h / 2) cy = h - cy, vy = -vy;
                if (cy > cfg.arena_height - h / 2) cy = 2 * (cfg.arena_height - h / 2) - cy, vy = -vy;
            }
            t.entries.push_back({f, {cx - w / 2, cy - h / 2, w, h}, false});
        }
        b.gt.push_back(std::move(t));
    }

    std::map<int, std::vector<std::pair<int, int>>> hidden;  // identity -> [start, end] episodes
    for (const auto& e : draw_occlusions(cfg)) hidden[e.identity].push_back({e.start, e.start + e.duration - 1});
    auto occluded = [&](int id, int f) {
        auto it = hidden.find(id);
        if (it == hidden.end()) return false;
        return std::any_of(it->second.begin(), it->second.end(),
                           [f](const auto& r) { return f >= r.first && f <= r.second; });
    };

    const auto bases = identity_embeddings(cfg);
    auto drng = stream(cfg.seed, detection);
    auto crng = stream(cfg.seed, clutter);
    // Normal distributions cache a second draw, so each stream gets its own.
    std::normal_distribution<double> gauss(0.0, 1.0), clutter_gauss(0.0, 1.0);
    std::uniform_real_distribution<double> clutter_unit(0.0, 1.0);
    std::bernoulli_distribution missed(cfg.p_miss);
    std::poisson_distribution<int> clutter_count(cfg.fp_rate);
    const double emb_std = cfg.embedding_noise_std / std::sqrt(static_cast<double>(cfg.embedding_dim));

    for (int f = 1; f <= cfg.frames; ++f) {
        std::vector<std::pair<Detection, int>> frame_dets;
        for (const auto& t : b.gt) {
            const auto& life = lifetimes[t.identity - 1];
            if (f < life.first || f > life.last) continue;
            const BoundingBox& g = t.entries[f - life.first].box;
            // Draw every random number regardless of the outcome so that the
            // streams stay aligned across configurations.
            const bool miss = missed(drng);
            double jx = gauss(drng), jy = gauss(drng), jw = gauss(drng), jh = gauss(drng);
            const double humanity = beta_draw(drng, 18.0, 2.0);
            const double score = 1.5 + 0.8 * gauss(drng);
            Embedding e = bases[t.identity - 1];
            for (auto& x : e) x += emb_std * gauss(drng);
            if (miss || occluded(t.identity, f)) continue;
            Detection d;
            d.frame = f;
            d.box = {g.x + cfg.jitter_std * g.w * jx, g.y + cfg.jitter_std * g.h * jy,
                     std::max(1.0, g.w * (1.0 + cfg.jitter_std * jw)), std::max(1.0, g.h * (1.0 + cfg.jitter_std * jh))};
            d.det_score = score;
            d.humanity = humanity;
            d.embedding = normalized(std::move(e));
            frame_dets.push_back({std::move(d), t.identity});
        }
        const int n_fp = cfg.fp_rate > 0.0 ? clutter_count(crng) : 0;
        for (int k = 0; k < n_fp; ++k) {
            const double h = cfg.min_height + (cfg.max_height - cfg.min_height) * clutter_unit(crng);
            const double w = cfg.aspect * h;
            Detection d;
            d.frame = f;
            d.box = {(cfg.arena_width - w) * clutter_unit(crng), (cfg.arena_height - h) * clutter_unit(crng), w, h};
            d.humanity = beta_draw(crng, 1.0, 7.0);
            d.det_score = -1.5 + clutter_gauss(crng);
            d.embedding = random_unit(crng, cfg.embedding_dim);
            frame_dets.push_back({std::move(d), -1});
        }
        std::shuffle(frame_dets.begin(), frame_dets.end(), crng);
        for (std::size_t k = 0; k < frame_dets.size(); ++k) {
            auto& [d, id] = frame_dets[k];
            d.index = static_cast<int>(k);
            b.hidden_identity[key_of(d)] = id;
            b.detections.push_back(std::move(d));
        }
    }
    return b;
}

/// Best achievable trajectories from the emitted detections: true-positive
/// detections grouped by their hidden identity, no interpolation.
inline std::vector<Trajectory> oracle_tracker(const SequenceBundle& b) {
    std::map<int, Trajectory> by_id;
    for (const auto& d : b.detections) {
        auto it = b.hidden_identity.find(key_of(d));
        if (it == b.hidden_identity.end() || it->second < 1) continue;
        auto& t = by_id[it->second];
        t.identity = it->second;
        t.entries.push_back({d.frame, d.box, false});
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : by_id) {
        std::sort(t.entries.begin(), t.entries.end(), [](const auto& a, const auto& c) { return a.frame < c.frame; });
        out.push_back(std::move(t));
    }
    return out;
}

/// Patch validator backed by the scenario: a box overlapping a true person
/// (IOU >= 0.5) reports high humanity and that person's base appearance;
/// anything else reports background.
inline PatchValidator synthetic_validator(const SequenceBundle& b, const ScenarioConfig& cfg) {
    auto frames = std::make_shared<GroundTruthFrames>(gt_by_frame(b.gt));
    auto bases = std::make_shared<std::vector<Embedding>>(identity_embeddings(cfg));
    return [frames, bases](int frame, const BoundingBox& box) -> std::optional<PatchObservation> {
        auto it = frames->find(frame);
        int best_id = -1;
        double best = 0.5;
        if (it != frames->end())
            for (const auto& [id, g] : it->second)
                if (const double o = iou(box, g); o >= best) best = o, best_id = id;
        if (best_id < 1 || best_id > static_cast<int>(bases->size())) return PatchObservation{0.02, {}};
        return PatchObservation{0.9, (*bases)[best_id - 1]};
    };
}

}  // namespace tflow
