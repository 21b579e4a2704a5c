// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <tflow/tflow.hpp>

#include "../support/flow_oracle.hpp"
#include "../support/gradcheck.hpp"

using namespace tflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

LabeledSequence labeled(const SequenceBundle& b) { return {&b.detections, &b.gt, b.frame_count}; }

// ---------------------------------------------------------------- 1

Outcome assignment_exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> size(1, 7);
    std::uniform_real_distribution<double> value(0.0, 100.0);
    int agree = 0;
    const int trials = 500;
    for (int trial = 0; trial < trials; ++trial) {
        const int n = size(rng);
        CostMatrix c(n, n);
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < n; ++k) c(r, k) = value(rng);
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double s = 0;
            for (int r = 0; r < n; ++r) s += c(r, perm[r]);
            best = std::min(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        const auto a = solve_assignment(c);
        agree += static_cast<int>(a.size()) == n && std::abs(assignment_cost(c, a) - best) <= 1e-9 * (1 + best);
    }
    const double secs = seconds_since(t0);
    return {agree == trials && secs < 5.0,
            std::to_string(agree) + "/" + std::to_string(trials) + " match enumeration, " + num(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 2

Outcome flow_exactness() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> count(1, 10);
    std::uniform_real_distribution<double> cost(-5.0, 5.0);
    int agree = 0, binary = 0;
    const int trials = 200;
    for (int trial = 0; trial < trials; ++trial) {
        const auto ts = testing::random_tracklets(rng, count(rng));
        FlowGraph g = build_graph(ts, 30, 0.7);
        for (auto& e : g.edges)
            if (e.kind == EdgeKind::det || e.kind == EdgeKind::link) e.cost = cost(rng);
        const auto sol = solve_min_cost(g);
        const auto oracle = testing::brute_force_flow(g);
        binary += std::all_of(sol.x.begin(), sol.x.end(), [](int v) { return v == 0 || v == 1; });
        agree += std::abs(sol.objective - oracle.objective) <= 1e-9 && sol.x == oracle.x;
    }
    const double secs = seconds_since(t0);
    return {agree == trials && binary == trials && secs < 60.0,
            std::to_string(agree) + "/" + std::to_string(trials) + " match the path-cover oracle, " +
                std::to_string(binary) + " binary, " + num(secs, 3) + " s"};
}

// ---------------------------------------------------------------- 3

DenseNet random_net(const std::vector<int>& sizes, Activation out, std::uint64_t seed) {
    std::vector<ActivationSpec> acts(sizes.size() - 2, ActivationSpec{Activation::leaky_relu});
    acts.push_back(out == Activation::tanh_scaled ? ActivationSpec::tanh_bounded(5.0) : ActivationSpec{out});
    DenseNet net(sizes, acts);
    net.init_glorot(seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (double& p : net.mutable_parameters()) p += jitter(rng);
    return net;
}

// Central differences with h = 1e-5 carry roughly eps * |f| / h ~ 1e-10 of
// roundoff, so gradients below 1e-6 are compared on that floor.
Outcome gradient_fidelity() {
    const auto t0 = Clock::now();
    struct Arch {
        std::vector<int> sizes;
        Activation out;
        std::size_t sampled;  // 0 checks every parameter
    };
    const std::vector<Arch> archs{{{7, 16, 8, 1}, Activation::sigmoid, 0},
                                  {{8, 4, 1}, Activation::tanh_scaled, 0},
                                  {{18, 256, 256, 1}, Activation::tanh_scaled, 500}};
    std::string detail;
    double worst_all = 0.0;
    for (const auto& a : archs) {
        testing::GradCheckReport total;
        for (int k = 0; k < 100; ++k) {
            const DenseNet net = random_net(a.sizes, a.out, 1000 + k);
            std::mt19937_64 rng(5000 + k);
            std::vector<std::size_t> params(net.parameter_count());
            std::iota(params.begin(), params.end(), 0);
            if (a.sampled && a.sampled < params.size()) {
                std::shuffle(params.begin(), params.end(), rng);
                params.resize(a.sampled);
            }
            const auto r = testing::gradient_report(net, testing::random_input(rng, a.sizes[0]), params, 1e-5, 1e-6);
            total.worst = std::max(total.worst, r.worst);
            total.checked += r.checked;
            total.straddled += r.straddled;
        }
        worst_all = std::max(worst_all, total.worst);
        std::string name;
        for (int s : a.sizes) name += (name.empty() ? "" : ",") + std::to_string(s);
        detail += "[" + name + "] " + num(total.worst, 3) + " over " + std::to_string(total.checked) + " entries";
        if (total.straddled) detail += " (" + std::to_string(total.straddled) + " straddling a kink skipped)";
        detail += "; ";
    }
    return {worst_all < 1e-4, "max rel err " + detail + num(seconds_since(t0), 3) + " s"};
}

// ---------------------------------------------------------------- 4, 5, 6, 10

struct BenchmarkRun {
    TrainedSystem sys;
    IterationLog heldout;
    IterationLog train_final;
    double worst_window_accuracy = 1.0;
    std::string results;
    EvalReport report;
    EvalReport report_no_interp;
    EvalReport oracle;
    double seconds = 0.0;
};

ScenarioConfig benchmark_scenario(std::uint64_t seed) {
    ScenarioConfig sc;  // defaults: 20 identities, 300 frames, p_miss 0.1, fp_rate 0.05, jitter 0.05
    sc.seed = seed;
    return sc;
}

// Train on seed 42, select by validation loss on seed 44, track seed 43.
BenchmarkRun run_benchmark(int workers) {
    const auto t0 = Clock::now();
    BenchmarkRun run;
    const auto train_b = generate(benchmark_scenario(42));
    const auto val_b = generate(benchmark_scenario(44));
    const auto test_sc = benchmark_scenario(43);
    const auto test_b = generate(test_sc);
    EngineConfig cfg;
    cfg.iterations = 200;
    cfg.lr = 1e-3;
    cfg.seed = 42;
    cfg.workers = workers;
    run.sys = train_system(labeled(train_b), cfg, labeled(val_b));
    const auto out = track_sequence(test_b.detections, run.sys.models, cfg, test_b.frame_count,
                                    synthetic_validator(test_b, test_sc));
    std::ostringstream os;
    write_results(os, out.trajectories);
    run.results = os.str();
    run.report = evaluate(out.trajectories, test_b.gt);
    run.seconds = seconds_since(t0);

    run.oracle = evaluate(oracle_tracker(test_b), test_b.gt);
    EngineConfig no_interp = cfg;
    no_interp.gap_max = 0;
    run.report_no_interp = evaluate(track_sequence(test_b.detections, run.sys.models, no_interp, test_b.frame_count).trajectories,
                                    test_b.gt);
    run.heldout = evaluate_windows(run.sys.models.cost, run.sys.validation, workers);
    for (const auto& w : run.sys.validation) {
        const auto ev = evaluate_window(run.sys.models.cost, w);
        run.worst_window_accuracy = std::min(run.worst_window_accuracy, static_cast<double>(ev.correct) / w.x_gt.size());
    }
    run.train_final = evaluate_windows(run.sys.models.cost, run.sys.training, workers);
    return run;
}

Outcome training_convergence(const BenchmarkRun& r) {
    const double first = r.sys.history.front().loss, last = r.sys.history.back().loss;
    const double ratio = last / first;
    return {ratio <= 0.2 && r.heldout.edge_accuracy >= 0.95,
            "loss " + num(first) + " -> " + num(last) + " (" + num(100 * ratio, 3) + "% of iteration 1), held-out edge accuracy " +
                num(r.heldout.edge_accuracy) + " (worst window " + num(r.worst_window_accuracy) + ")"};
}

Outcome cost_convergence(const BenchmarkRun& r) {
    const double target = 2 * 0.7;
    const double det = r.train_final.mean_abs_det_tp, link = r.train_final.mean_abs_link_true;
    auto within = [&](double v) { return std::abs(v - target) <= 0.25 * target; };
    return {within(det) && within(link),
            "mean |c_det| over TP " + num(det) + ", mean |c_link| over true links " + num(link) + " (band " +
                num(0.75 * target) + ".." + num(1.25 * target) + "); held-out " + num(r.heldout.mean_abs_det_tp) +
                " / " + num(r.heldout.mean_abs_link_true)};
}

Outcome end_to_end_mota(const BenchmarkRun& r) {
    const double mota = r.report.mota, oracle = r.oracle.mota;
    return {mota >= 0.90 && oracle - mota <= 0.05 && r.seconds < 120.0,
            "MOTA " + num(mota) + " (fp " + std::to_string(r.report.fp) + ", fn " + std::to_string(r.report.fn) +
                ", ids " + std::to_string(r.report.ids) + "), oracle " + num(oracle) + ", without interpolation " +
                num(r.report_no_interp.mota) + ", " + num(r.seconds, 3) + " s single-threaded"};
}

bool same_history(const std::vector<IterationLog>& a, const std::vector<IterationLog>& b) {
    if (a.size() != b.size()) return false;
    auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!same(a[k].loss, b[k].loss) || !same(a[k].validation_loss, b[k].validation_loss) ||
            !same(a[k].mean_abs_det_tp, b[k].mean_abs_det_tp) || !same(a[k].mean_abs_link_true, b[k].mean_abs_link_true))
            return false;
    return true;
}

Outcome determinism(const BenchmarkRun& single, const BenchmarkRun& multi) {
    const bool hist = same_history(single.sys.history, multi.sys.history);
    const bool files = single.results == multi.results;
    return {hist && files, std::string("loss history ") + (hist ? "identical" : "differs") + ", result file " +
                               (files ? "identical" : "differs") + " (1 vs 3 workers)"};
}

// ---------------------------------------------------------------- 7

std::vector<std::vector<TrajectoryEntry>> shapes(const std::vector<Trajectory>& ts) {
    std::vector<std::vector<TrajectoryEntry>> out;
    for (const auto& t : ts) out.push_back(t.entries);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::make_pair(a.front().frame, a.front().box.x) < std::make_pair(b.front().frame, b.front().box.x);
    });
    return out;
}

bool same_entries(const std::vector<std::vector<TrajectoryEntry>>& a, const std::vector<std::vector<TrajectoryEntry>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t k = 0; k < a[i].size(); ++k)
            if (a[i][k].frame != b[i][k].frame || !(a[i][k].box == b[i][k].box) ||
                a[i][k].interpolated != b[i][k].interpolated)
                return false;
    }
    return true;
}

Outcome windowing_equivalence(const Models& models) {
    ScenarioConfig sc;
    sc.n_identities = 8;
    sc.frames = 150;
    sc.p_miss = 0.05;
    sc.fp_rate = 0.05;
    sc.jitter_std = 0.03;
    sc.seed = 7;
    const auto b = generate(sc);
    EngineConfig cfg;
    cfg.workers = 1;

    // Precondition: every true link spans at most 5 frames.
    const auto selected = preprocess(b.detections, preprocess_params(cfg));
    const auto tracklets = generate_tracklets(selected, models.affinity, {cfg.theta_high, cfg.margin, 1});
    FlowGraph g = build_graph(tracklets, cfg.dt_max, cfg.beta);
    const auto x = label_ground_truth(g, label_tracklets(tracklets, label_detections(selected, b.gt)));
    int max_dt = 0;
    for (std::size_t k = g.first_link(); k < g.edges.size(); ++k)
        if (x[k]) max_dt = std::max(max_dt, g.edges[k].dt);

    EngineConfig windowed = cfg;
    windowed.window = 30;
    windowed.step = 10;
    EngineConfig full = cfg;
    full.window = b.frame_count;
    full.step = b.frame_count;
    const auto a = track_sequence(b.detections, models, windowed, b.frame_count);
    const auto c = track_sequence(b.detections, models, full, b.frame_count);
    const bool same = same_entries(shapes(a.trajectories), shapes(c.trajectories));
    return {max_dt <= 5 && same, "max true-link gap " + std::to_string(max_dt) + ", " +
                                     std::to_string(a.trajectories.size()) + " windowed vs " +
                                     std::to_string(c.trajectories.size()) + " full-sequence trajectories, " +
                                     (same ? "identical" : "different")};
}

// ---------------------------------------------------------------- 8

Outcome weighting_direction() {
    const auto t0 = Clock::now();
    double sum_uniform = 0, sum_tltg = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ScenarioConfig sc;
        sc.n_identities = 12;
        sc.frames = 200;
        sc.occlusion_rate = 0.01;
        sc.occlusion_mean = 10;
        sc.seed = seed;
        ScenarioConfig test_sc = sc;
        test_sc.seed = seed + 100;
        const auto train_b = generate(sc);
        const auto test_b = generate(test_sc);
        EngineConfig cfg;
        cfg.seed = seed;
        cfg.workers = 1;
        const auto affinity = fit_affinity(labeled(train_b), cfg).model;
        double mota[2];
        const Weighting schemes[2] = {Weighting::uniform, Weighting::tl_tg};
        for (int s = 0; s < 2; ++s) {
            EngineConfig run = cfg;
            run.weighting = schemes[s];
            const auto sys = train_association(labeled(train_b), affinity, run);
            const auto out = track_sequence(test_b.detections, sys.models, run, test_b.frame_count,
                                            synthetic_validator(test_b, test_sc));
            mota[s] = evaluate(out.trajectories, test_b.gt).mota;
        }
        sum_uniform += mota[0];
        sum_tltg += mota[1];
        per_seed += num(mota[0]) + "/" + num(mota[1]) + " ";
    }
    return {sum_tltg >= sum_uniform, "mean MOTA uniform " + num(sum_uniform / 5) + ", TL+TG " + num(sum_tltg / 5) +
                                         " (per seed uniform/TL+TG: " + per_seed + "), " + num(seconds_since(t0), 3) + " s"};
}

// ---------------------------------------------------------------- 9

BoundingBox at(double x) { return {x, 0, 10, 20}; }

Trajectory straight(int id, int first, int last, double x) {
    Trajectory t{id, {}};
    for (int f = first; f <= last; ++f) t.entries.push_back({f, at(x), false});
    return t;
}

Outcome metric_correctness() {
    // Two 50-frame objects (GT = 100): 5 missed frames on each, one
    // hypothesis handover on the second object and 5 clutter boxes.
    const std::vector<Trajectory> gt{straight(1, 1, 50, 0), straight(2, 1, 50, 100)};
    std::vector<Trajectory> hyp;
    Trajectory a{1, {}};
    for (int f = 1; f <= 50; ++f)
        if (f < 10 || f > 14) a.entries.push_back({f, at(0), false});
    hyp.push_back(a);
    hyp.push_back(straight(2, 1, 25, 100));
    Trajectory b{3, {}};
    for (int f = 26; f <= 50; ++f)
        if (f < 30 || f > 34) b.entries.push_back({f, at(100), false});
    hyp.push_back(b);
    hyp.push_back(straight(4, 1, 5, 500));
    const auto r = evaluate(hyp, gt);

    // Label swap: two hypotheses exchange objects halfway.
    const std::vector<Trajectory> gt2{straight(1, 1, 4, 0), straight(2, 1, 4, 100)};
    Trajectory h7{7, {{1, at(0), false}, {2, at(0), false}, {3, at(100), false}, {4, at(100), false}}};
    Trajectory h8{8, {{1, at(100), false}, {2, at(100), false}, {3, at(0), false}, {4, at(0), false}}};
    const auto swap = evaluate({h7, h8}, gt2);

    const bool ok = r.gt_count == 100 && r.fp == 5 && r.fn == 10 && r.ids == 1 && std::abs(r.mota - 0.84) < 1e-12 &&
                    swap.ids == 2;
    return {ok, "MOTA " + num(r.mota) + " (GT " + std::to_string(r.gt_count) + ", FP " + std::to_string(r.fp) +
                    ", FN " + std::to_string(r.fn) + ", IDS " + std::to_string(r.ids) + "), label swap IDS " +
                    std::to_string(swap.ids)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int k) { return wanted.empty() || wanted.count(k); };

    const char* names[] = {"",
                           "assignment exactness",
                           "flow-solver exactness",
                           "gradient fidelity",
                           "approximate-gradient training convergence",
                           "cost convergence to 2*beta",
                           "end-to-end synthetic MOTA",
                           "windowing equivalence",
                           "weighting direction",
                           "metric correctness",
                           "determinism"};
    int failures = 0;
    auto report = [&](int k, const Outcome& o) {
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k << "] " << names[k] << ": " << o.detail << std::endl;
    };

    if (want(1)) report(1, assignment_exactness());
    if (want(2)) report(2, flow_exactness());
    if (want(3)) report(3, gradient_fidelity());

    std::optional<BenchmarkRun> bench;
    if (want(4) || want(5) || want(6) || want(7) || want(10)) bench = run_benchmark(1);
    if (want(4)) report(4, training_convergence(*bench));
    if (want(5)) report(5, cost_convergence(*bench));
    if (want(6)) report(6, end_to_end_mota(*bench));
    if (want(7)) report(7, windowing_equivalence(bench->sys.models));
    if (want(8)) report(8, weighting_direction());
    if (want(9)) report(9, metric_correctness());
    if (want(10)) report(10, determinism(*bench, run_benchmark(3)));

    std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failures ? 1 : 0;
}
