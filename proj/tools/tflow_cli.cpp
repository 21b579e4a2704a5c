// tflow command-line tool: synthetic data, training, tracking and evaluation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <tflow/tflow.hpp>

namespace fs = std::filesystem;
using namespace tflow;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool verbose = false;

    EngineConfig config() const {
        EngineConfig cfg = config_path.empty() ? EngineConfig{} : load_config(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) cfg.seed = *seed;
        if (workers) cfg.workers = *workers;
        return cfg;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "engine config file (key = value)")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override one config key, e.g. --set beta=0.5");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--workers", c.workers, "worker threads (0 = all cores)");
    cmd->add_flag("-v,--verbose", c.verbose, "progress messages on stderr");
}

fs::path ensure_dir(const fs::path& dir) {
    if (!dir.empty()) fs::create_directories(dir);
    return dir;
}

fs::path parent_of(const std::string& file) {
    const fs::path p = fs::path(file).parent_path();
    return p.empty() ? fs::path(".") : p;
}

// Every output directory gets the configuration that produced it.
void echo_config(const fs::path& dir, const EngineConfig& cfg) {
    ensure_dir(dir);
    std::ofstream os(dir / "config.txt");
    if (!os) throw FormatError("cannot write " + (dir / "config.txt").string());
    write_config(os, cfg);
}

std::ofstream open_file(const std::string& path) {
    ensure_dir(parent_of(path));
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    return os;
}

SequenceBundle load_labeled(const std::string& dir) {
    auto b = load_bundle(dir);
    if (b.gt.empty()) throw FormatError("sequence " + dir + " has no ground truth (gt/gt.txt)");
    return b;
}

LabeledSequence labeled(const SequenceBundle& b) { return {&b.detections, &b.gt, b.frame_count}; }

AffinityModel load_affinity(const std::string& model_dir) {
    const fs::path p = fs::path(model_dir) / "affinity.net";
    if (!fs::exists(p)) throw FormatError("no affinity model at " + p.string() + " (run train-affinity first)");
    return AffinityModel{load_densenet(p.string())};
}

Models load_models(const std::string& model_dir) {
    const fs::path p = fs::path(model_dir) / "cost.model";
    if (!fs::exists(p)) throw FormatError("no cost model at " + p.string() + " (run train-assoc first)");
    return {load_affinity(model_dir), load_cost_model(p.string())};
}

PatchValidator validator_for(const std::string& seq_dir, const SequenceBundle& b) {
    const fs::path p = fs::path(seq_dir) / "scenario.txt";
    if (!fs::exists(p)) throw FormatError("--validate needs " + p.string() + " (synthetic sequences only)");
    std::ifstream is(p);
    return synthetic_validator(b, parse_scenario(is));
}

std::vector<Trajectory> tracklet_tracks(const std::vector<Tracklet>& tracklets) {
    std::vector<Trajectory> out;
    for (const auto& t : tracklets) {
        Trajectory tr{t.id + 1, {}};
        for (const auto& d : t.detections) tr.entries.push_back({d.frame, d.box, false});
        out.push_back(std::move(tr));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        long long v;
        if (!parse_int(item, v) || v < 1) throw ConfigError("bad window size '" + item + "'");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tflow: tracklet flow tracking with learned edge costs"};
    app.require_subcommand(1);

    // synth
    Common synth_c;
    ScenarioConfig sc;
    std::string synth_out, scenario_path;
    bool noiseless = false;
    auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
    add_common(synth, synth_c);
    synth->add_option("--out", synth_out, "output sequence directory")->required();
    synth->add_option("--scenario", scenario_path, "scenario file (key = value)")->check(CLI::ExistingFile);
    synth->add_option("--identities", sc.n_identities);
    synth->add_option("--frames", sc.frames);
    synth->add_option("--p-miss", sc.p_miss);
    synth->add_option("--fp-rate", sc.fp_rate);
    synth->add_option("--jitter", sc.jitter_std);
    synth->add_option("--occlusion-rate", sc.occlusion_rate);
    synth->add_option("--occlusion-mean", sc.occlusion_mean);
    synth->add_option("--embedding-noise", sc.embedding_noise_std);
    synth->add_flag("--noiseless", noiseless, "no misses, clutter, jitter or occlusions");

    // preprocess
    Common pre_c;
    std::string pre_seq, pre_out;
    auto* pre = app.add_subcommand("preprocess", "NMS and score filtering of detections");
    add_common(pre, pre_c);
    pre->add_option("--seq", pre_seq, "sequence directory")->required()->check(CLI::ExistingDirectory);
    pre->add_option("--out", pre_out, "selected detections file")->required();

    // train-affinity
    Common ta_c;
    std::string ta_seq, ta_model;
    auto* ta = app.add_subcommand("train-affinity", "train the adjacent-frame affinity model");
    add_common(ta, ta_c);
    ta->add_option("--seq", ta_seq, "labeled training sequence")->required()->check(CLI::ExistingDirectory);
    ta->add_option("--model", ta_model, "model directory")->required();

    // tracklets
    Common tl_c;
    std::string tl_seq, tl_model, tl_out;
    auto* tl = app.add_subcommand("tracklets", "low-level association into tracklets");
    add_common(tl, tl_c);
    tl->add_option("--seq", tl_seq, "sequence directory")->required()->check(CLI::ExistingDirectory);
    tl->add_option("--model", tl_model, "model directory")->required();
    tl->add_option("--out", tl_out, "tracklets in results format")->required();

    // train-assoc
    Common tr_c;
    std::string tr_seq, tr_val, tr_model, tr_log;
    auto* tr = app.add_subcommand("train-assoc", "learn association costs end to end");
    add_common(tr, tr_c);
    tr->add_option("--seq", tr_seq, "labeled training sequence")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--val", tr_val, "labeled validation sequence")->check(CLI::ExistingDirectory);
    tr->add_option("--model", tr_model, "model directory holding affinity.net")->required();
    tr->add_option("--log", tr_log, "training curve CSV (default <model>/training_log.csv)");

    // track
    Common tk_c;
    std::string tk_seq, tk_model, tk_out;
    bool tk_validate = false;
    auto* tk = app.add_subcommand("track", "track a sequence");
    add_common(tk, tk_c);
    tk->add_option("--seq", tk_seq, "sequence directory")->required()->check(CLI::ExistingDirectory);
    tk->add_option("--model", tk_model, "model directory")->required();
    tk->add_option("--out", tk_out, "results file")->required();
    tk->add_flag("--validate", tk_validate, "check interpolated boxes against the synthetic scenario");

    // eval
    std::string ev_gt, ev_seq, ev_hyp, ev_csv;
    auto* ev = app.add_subcommand("eval", "CLEAR-MOT metrics");
    auto* gt_opt = ev->add_option("--gt", ev_gt, "ground-truth file")->check(CLI::ExistingFile);
    ev->add_option("--seq", ev_seq, "sequence directory (uses gt/gt.txt)")
        ->check(CLI::ExistingDirectory)
        ->excludes(gt_opt);
    ev->add_option("--hyp", ev_hyp, "results file")->required()->check(CLI::ExistingFile);
    ev->add_option("--csv", ev_csv, "also write the metrics as CSV");

    // ablate
    Common ab_c;
    std::string ab_train, ab_test, ab_out, ab_windows = "10,20,30,40,50,60,70,80,90,100";
    std::vector<std::string> ab_schemes{"uniform", "TL", "TG", "TL+TG"};
    auto* ab = app.add_subcommand("ablate", "sweep window sizes and loss weighting schemes");
    add_common(ab, ab_c);
    ab->add_option("--train", ab_train, "labeled training sequence")->required()->check(CLI::ExistingDirectory);
    ab->add_option("--test", ab_test, "labeled test sequence")->required()->check(CLI::ExistingDirectory);
    ab->add_option("--out", ab_out, "results CSV")->required();
    ab->add_option("--windows", ab_windows, "comma-separated window sizes");
    ab->add_option("--schemes", ab_schemes, "weighting schemes");

    // plot-tracks
    std::string pl_results, pl_gt, pl_out;
    auto* pl = app.add_subcommand("plot-tracks", "SVG of x-position against frame");
    pl->add_option("--results", pl_results, "results file")->required()->check(CLI::ExistingFile);
    pl->add_option("--gt", pl_gt, "ground truth drawn underneath")->check(CLI::ExistingFile);
    pl->add_option("--out", pl_out, "SVG file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        for (const Common* c : {&synth_c, &pre_c, &ta_c, &tl_c, &tr_c, &tk_c, &ab_c})
            if (c->verbose) log::set_level(log::Level::info);

        if (*synth) {
            const EngineConfig cfg = synth_c.config();
            if (!scenario_path.empty()) {
                std::ifstream is(scenario_path);
                sc = parse_scenario(is);
            }
            if (noiseless) sc.p_miss = 0, sc.fp_rate = 0, sc.jitter_std = 0, sc.occlusion_rate = 0, sc.occlusions.clear();
            if (synth_c.seed) sc.seed = *synth_c.seed;
            const auto b = generate(sc);
            save_bundle(synth_out, b);
            {
                std::ofstream os(fs::path(synth_out) / "scenario.txt");
                write_scenario(os, sc);
            }
            echo_config(synth_out, cfg);
            int boxes = 0, tp = 0;
            for (const auto& t : b.gt) boxes += static_cast<int>(t.entries.size());
            for (const auto& [k, id] : b.hidden_identity) tp += id >= 1;
            std::cout << "identities " << b.gt.size() << "\nframes " << b.frame_count << "\ngt_boxes " << boxes
                      << "\ndetections " << b.detections.size() << "\ntrue_positives " << tp << "\nfalse_positives "
                      << b.detections.size() - tp << '\n';
        } else if (*pre) {
            const EngineConfig cfg = pre_c.config();
            const auto b = load_bundle(pre_seq);
            const auto kept = preprocess(b.detections, preprocess_params(cfg));
            auto os = open_file(pre_out);
            write_detections(os, kept);
            echo_config(parent_of(pre_out), cfg);
            std::cout << "kept " << kept.size() << " of " << b.detections.size() << " detections\n";
        } else if (*ta) {
            const EngineConfig cfg = ta_c.config();
            const auto b = load_labeled(ta_seq);
            const auto r = fit_affinity(labeled(b), cfg);
            ensure_dir(ta_model);
            save_densenet((fs::path(ta_model) / "affinity.net").string(), r.model.net);
            echo_config(ta_model, cfg);
            std::cout << "held-out accuracy " << fixed_double(r.heldout_accuracy, 4) << '\n';
        } else if (*tl) {
            const EngineConfig cfg = tl_c.config();
            const auto b = load_bundle(tl_seq);
            const auto affinity = load_affinity(tl_model);
            const auto selected = preprocess(b.detections, preprocess_params(cfg));
            const auto tracklets = generate_tracklets(selected, affinity, {cfg.theta_high, cfg.margin, cfg.workers});
            auto os = open_file(tl_out);
            write_results(os, tracklet_tracks(tracklets));
            echo_config(parent_of(tl_out), cfg);
            std::cout << "tracklets " << tracklets.size() << '\n';
        } else if (*tr) {
            const EngineConfig cfg = tr_c.config();
            const auto train_b = load_labeled(tr_seq);
            const auto affinity = load_affinity(tr_model);
            std::optional<SequenceBundle> val_b;
            std::optional<LabeledSequence> val;
            if (!tr_val.empty()) {
                val_b = load_labeled(tr_val);
                val = labeled(*val_b);
            }
            const auto sys = train_association(labeled(train_b), affinity, cfg, val);
            save_cost_model((fs::path(tr_model) / "cost.model").string(), sys.models.cost);
            echo_config(tr_model, cfg);
            const std::string log_path = tr_log.empty() ? (fs::path(tr_model) / "training_log.csv").string() : tr_log;
            auto os = open_file(log_path);
            write_training_log(os, sys.history);
            if (!tr_log.empty()) echo_config(parent_of(tr_log), cfg);
            std::cout << "iterations " << sys.history.size() << "\nfirst_loss " << exact_double(sys.history.front().loss)
                      << "\nfinal_loss " << exact_double(sys.history.back().loss) << "\nbest_iteration "
                      << sys.best_iteration << '\n';
        } else if (*tk) {
            const EngineConfig cfg = tk_c.config();
            const auto b = load_bundle(tk_seq);
            const auto models = load_models(tk_model);
            const auto out = track_sequence(b.detections, models, cfg, b.frame_count,
                                            tk_validate ? validator_for(tk_seq, b) : PatchValidator{});
            auto os = open_file(tk_out);
            write_results(os, out.trajectories);
            echo_config(parent_of(tk_out), cfg);
            std::cout << "trajectories " << out.trajectories.size() << "\ntracklets " << out.tracklets.size() << '\n';
        } else if (*ev) {
            if (ev_gt.empty() && ev_seq.empty()) throw ConfigError("eval needs --gt or --seq");
            const std::string gt_path = ev_gt.empty() ? (fs::path(ev_seq) / "gt" / "gt.txt").string() : ev_gt;
            const auto gt = read_ground_truth(gt_path);
            if (gt.empty()) throw FormatError("ground truth " + gt_path + " is empty");
            const auto report = evaluate(read_results(ev_hyp), gt);
            write_report_table(std::cout, report);
            if (!ev_csv.empty()) {
                auto os = open_file(ev_csv);
                write_report_csv(os, report);
            }
        } else if (*ab) {
            EngineConfig cfg = ab_c.config();
            const auto windows = parse_int_list(ab_windows);
            std::vector<Weighting> schemes;
            for (const auto& s : ab_schemes) schemes.push_back(parse_weighting(s));
            const auto train_b = load_labeled(ab_train);
            const auto test_b = load_labeled(ab_test);
            const auto affinity = fit_affinity(labeled(train_b), cfg).model;
            auto os = open_file(ab_out);
            os << "window,scheme,mota,motp,fp,fn,ids,first_loss,final_loss\n";
            for (int w : windows)
                for (Weighting scheme : schemes) {
                    EngineConfig run = cfg;
                    run.window = w;
                    run.step = 0;
                    run.train_window = w;
                    run.train_step = std::max(1, w / 2);
                    run.dt_max = std::min(cfg.dt_max, w);
                    run.weighting = scheme;
                    const auto sys = train_association(labeled(train_b), affinity, run);
                    const auto out = track_sequence(test_b.detections, sys.models, run, test_b.frame_count);
                    const auto r = evaluate(out.trajectories, test_b.gt);
                    os << w << ',' << to_string(scheme) << ',' << exact_double(r.mota) << ',' << exact_double(r.motp)
                       << ',' << r.fp << ',' << r.fn << ',' << r.ids << ',' << exact_double(sys.history.front().loss)
                       << ',' << exact_double(sys.history.back().loss) << '\n';
                    os.flush();
                    std::cout << "W=" << w << ' ' << to_string(scheme) << " MOTA " << fixed_double(100 * r.mota, 1)
                              << std::endl;
                }
            echo_config(parent_of(ab_out), cfg);
        } else if (*pl) {
            PlotOptions opt;
            if (!pl_gt.empty()) opt.reference = read_ground_truth(pl_gt);
            const auto tracks = read_results(pl_results);
            auto os = open_file(pl_out);
            write_svg(os, tracks, opt);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
