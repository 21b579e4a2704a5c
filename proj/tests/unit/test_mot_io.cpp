#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include <tflow/mot_io.hpp>

using namespace tflow;

namespace {

double cents(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo * 100, hi * 100)(rng) / 100.0;
}

std::vector<Detection> random_detections(std::mt19937_64& rng, int n) {
    std::map<int, int> per_frame;
    std::vector<Detection> out;
    for (int k = 0; k < n; ++k) {
        Detection d;
        d.frame = std::uniform_int_distribution<int>(1, 50)(rng);
        d.box = {cents(rng, -50, 1900), cents(rng, -50, 1000), cents(rng, 1, 300), cents(rng, 1, 400)};
        d.det_score = cents(rng, -3, 3);
        out.push_back(d);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
    for (auto& d : out) d.index = per_frame[d.frame]++;
    return out;
}

std::vector<Trajectory> random_tracks(std::mt19937_64& rng) {
    std::vector<Trajectory> out;
    for (int id = 1; id <= 8; ++id) {
        Trajectory t{id, {}};
        const int first = std::uniform_int_distribution<int>(1, 30)(rng);
        const int len = std::uniform_int_distribution<int>(1, 40)(rng);
        for (int f = first; f < first + len; ++f)
            t.entries.push_back({f, {cents(rng, 0, 1800), cents(rng, 0, 900), cents(rng, 5, 100), cents(rng, 5, 200)}, false});
        out.push_back(t);
    }
    return out;
}

void expect_same_tracks(const std::vector<Trajectory>& a, const std::vector<Trajectory>& b) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].identity, b[i].identity);
        ASSERT_EQ(a[i].entries.size(), b[i].entries.size());
        for (std::size_t k = 0; k < a[i].entries.size(); ++k) {
            EXPECT_EQ(a[i].entries[k].frame, b[i].entries[k].frame);
            EXPECT_EQ(a[i].entries[k].box, b[i].entries[k].box);
        }
    }
}

}  // namespace

TEST(ReadDetections, SingleLine) {
    std::istringstream is("1,-1,10.0,20.0,5.0,8.0,0.9,-1,-1,-1\n");
    const auto dets = read_detections(is);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].frame, 1);
    EXPECT_EQ(dets[0].index, 0);
    EXPECT_EQ(dets[0].box, (BoundingBox{10, 20, 5, 8}));
    EXPECT_DOUBLE_EQ(dets[0].det_score, 0.9);
    EXPECT_FALSE(dets[0].humanity.has_value());
    EXPECT_FALSE(dets[0].has_embedding());
}

TEST(ReadDetections, EmptyInput) {
    std::istringstream is("");
    EXPECT_TRUE(read_detections(is).empty());
}

TEST(ReadDetections, MalformedLineReportsLineNumber) {
    std::istringstream is("1,-1,10,20,5,8,0.9\n2,-1,abc,20,5,8,0.9\n");
    try {
        read_detections(is);
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(ReadDetections, NonPositiveSizeIsSkipped) {
    std::istringstream is("1,-1,10,20,0,8,0.9\n1,-1,10,20,5,8,0.4\n");
    const auto dets = read_detections(is);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_DOUBLE_EQ(dets[0].det_score, 0.4);
    EXPECT_EQ(dets[0].index, 1);  // index keeps file position so sidecars still line up
}

TEST(ReadDetections, RoundTripThousand) {
    std::mt19937_64 rng(17);
    const auto dets = random_detections(rng, 1000);
    std::ostringstream os;
    write_detections(os, dets);
    std::istringstream is(os.str());
    const auto back = read_detections(is);
    ASSERT_EQ(back.size(), dets.size());
    for (std::size_t k = 0; k < dets.size(); ++k) {
        EXPECT_EQ(back[k].frame, dets[k].frame);
        EXPECT_EQ(back[k].index, dets[k].index);
        EXPECT_EQ(back[k].box, dets[k].box);
        EXPECT_EQ(back[k].det_score, dets[k].det_score);
    }
    std::ostringstream again;
    write_detections(again, back);
    EXPECT_EQ(again.str(), os.str());
}

TEST(GroundTruth, RoundTripAndFormat) {
    std::mt19937_64 rng(5);
    const auto gt = random_tracks(rng);
    std::ostringstream os;
    write_ground_truth(os, gt);
    std::istringstream is(os.str());
    expect_same_tracks(read_tracks(is), gt);
    EXPECT_NE(os.str().find(",1,1,1.00\n"), std::string::npos);
}

TEST(GroundTruth, SingleIdentityAndFiltering) {
    std::istringstream is(
        "1,3,0,0,10,10,1,1,1\n"
        "2,3,1,0,10,10,1,1,1\n"
        "2,4,1,0,10,10,0,1,1\n"
        "2,5,1,0,10,10,1,7,1\n");
    const auto gt = read_tracks(is);
    ASSERT_EQ(gt.size(), 1u);
    EXPECT_EQ(gt[0].identity, 3);
    EXPECT_EQ(gt[0].entries.size(), 2u);
}

TEST(GroundTruth, DuplicateRowsRejected) {
    std::istringstream is("1,3,0,0,10,10,1,1,1\n1,3,5,0,10,10,1,1,1\n");
    EXPECT_THROW(read_tracks(is), FormatError);
}

TEST(GroundTruth, EmptyInput) {
    std::istringstream is("");
    EXPECT_TRUE(read_tracks(is).empty());
}

TEST(Results, RoundTripDropsInterpolatedFlag) {
    std::mt19937_64 rng(8);
    auto tracks = random_tracks(rng);
    tracks[0].entries[0].interpolated = true;
    std::ostringstream os;
    write_results(os, tracks);
    std::istringstream is(os.str());
    const auto back = read_tracks(is, {{}, true});
    expect_same_tracks(back, tracks);
    for (const auto& t : back)
        for (const auto& e : t.entries) EXPECT_FALSE(e.interpolated);
    EXPECT_NE(os.str().find(",1.00,-1,-1,-1\n"), std::string::npos);
}

TEST(Results, SortedByFrameThenIdentityAndEmpty) {
    std::vector<Trajectory> t{{2, {{1, {0, 0, 1, 1}, false}}}, {1, {{2, {0, 0, 1, 1}, false}, {1, {0, 0, 1, 1}, false}}}};
    std::ostringstream os;
    write_results(os, t);
    EXPECT_EQ(os.str(),
              "1,1,0.00,0.00,1.00,1.00,1.00,-1,-1,-1\n"
              "1,2,0.00,0.00,1.00,1.00,1.00,-1,-1,-1\n"
              "2,1,0.00,0.00,1.00,1.00,1.00,-1,-1,-1\n");
    std::ostringstream empty;
    write_results(empty, {});
    EXPECT_TRUE(empty.str().empty());
    EXPECT_THROW(write_results(empty, {{0, {{1, {0, 0, 1, 1}, false}}}}), PreconditionError);
}

TEST(Embeddings, SingleRowAndRenormalization) {
    std::istringstream is("# dim=2\n3,1,3.0,4.0\n");
    const auto table = read_embeddings(is);
    ASSERT_EQ(table.size(), 1u);
    const auto& v = table.at({3, 1});
    EXPECT_DOUBLE_EQ(v[0], 0.6);
    EXPECT_DOUBLE_EQ(v[1], 0.8);
    std::istringstream empty("# dim=4\n");
    EXPECT_TRUE(read_embeddings(empty).empty());
    std::istringstream headless("3,1,3.0,4.0\n");
    EXPECT_THROW(read_embeddings(headless), FormatError);
    std::istringstream short_row("# dim=3\n3,1,3.0,4.0\n");
    EXPECT_THROW(read_embeddings(short_row), FormatError);
}

TEST(Embeddings, RoundTrip) {
    std::mt19937_64 rng(2);
    auto dets = random_detections(rng, 50);
    std::normal_distribution<double> n;
    for (auto& d : dets) {
        Embedding e(16);
        for (double& x : e) x = n(rng);
        d.embedding = normalized(e);
    }
    std::ostringstream os;
    write_embeddings(os, dets);
    std::istringstream is(os.str());
    const auto table = read_embeddings(is);
    ASSERT_EQ(table.size(), dets.size());
    for (const auto& d : dets) {
        const auto& v = table.at(key_of(d));
        for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v[k], d.embedding[k], 2e-6);
    }
    auto copy = dets;
    for (auto& d : copy) d.embedding.clear();
    attach_embeddings(copy, table);
    EXPECT_TRUE(copy[0].has_embedding());
    EXPECT_THROW(attach_embeddings(copy, {{{999, 0}, {1.0}}}), FormatError);
}

TEST(Humanity, SidecarAttachAndRange) {
    std::vector<Detection> dets(2);
    dets[1].index = 1;
    std::istringstream is("1,0,0.25\n1,1,0.75\n");
    attach_humanity(dets, read_keyed_values(is));
    EXPECT_DOUBLE_EQ(*dets[0].humanity, 0.25);
    EXPECT_DOUBLE_EQ(*dets[1].humanity, 0.75);
    EXPECT_THROW(attach_humanity(dets, {{{1, 0}, 1.5}}), FormatError);
}

TEST(Config, EmptyFileGivesDefaults) {
    std::istringstream is("");
    const auto cfg = parse_config(is);
    EXPECT_EQ(cfg.beta, 0.7);
    EXPECT_EQ(cfg.gamma, 5.0);
    EXPECT_EQ(cfg.window, 30);
    EXPECT_EQ(cfg.effective_step(), 7);
    EXPECT_EQ(cfg.dt_max, 30);
    EXPECT_EQ(cfg.nms_iou, 0.7);
    EXPECT_EQ(cfg.humanity_min, 0.1);
    EXPECT_EQ(cfg.det_score_min, 0.0);
    EXPECT_EQ(cfg.theta_high, 0.8);
    EXPECT_EQ(cfg.margin, 0.1);
    EXPECT_EQ(cfg.lr, 1e-3);
}

TEST(Config, OverrideOneKey) {
    std::istringstream is("# comment\n  beta = 0.5 \n");
    const auto cfg = parse_config(is);
    EXPECT_EQ(cfg.beta, 0.5);
    std::ostringstream a, b;
    EngineConfig ref;
    ref.beta = 0.5;
    write_config(a, cfg);
    write_config(b, ref);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Config, BadKeyNamesIt) {
    std::istringstream is("betta = 0.5\n");
    try {
        parse_config(is);
        FAIL() << "expected a config error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("betta"), std::string::npos);
    }
    EngineConfig cfg;
    EXPECT_THROW(set_config_value(cfg, "window", "2.5"), ConfigError);
    EXPECT_THROW(set_config_value(cfg, "lr", "fast"), ConfigError);
}

TEST(Config, WriteThenParseIsIdentity) {
    EngineConfig cfg;
    cfg.lr = 3.3e-4;
    cfg.weighting = Weighting::tg;
    cfg.seed = 1234567;
    std::ostringstream os;
    write_config(os, cfg);
    std::istringstream is(os.str());
    std::ostringstream again;
    write_config(again, parse_config(is));
    EXPECT_EQ(again.str(), os.str());
}

TEST(Bundle, SaveLoadRoundTrip) {
    std::mt19937_64 rng(4);
    SequenceBundle b;
    b.name = "demo";
    b.frame_count = 60;
    b.detections = random_detections(rng, 40);
    for (auto& d : b.detections) {
        d.humanity = cents(rng, 0, 1);
        d.embedding = normalized({1.0, 2.0, 3.0});
        b.hidden_identity[key_of(d)] = d.index % 2 ? -1 : 3;
    }
    b.gt = random_tracks(rng);
    const auto dir = std::filesystem::temp_directory_path() / "tflow_bundle_test";
    std::filesystem::remove_all(dir);
    save_bundle(dir.string(), b);
    const auto back = load_bundle(dir.string());
    EXPECT_EQ(back.name, "demo");
    EXPECT_EQ(back.frame_count, 60);
    ASSERT_EQ(back.detections.size(), b.detections.size());
    EXPECT_EQ(back.hidden_identity, b.hidden_identity);
    expect_same_tracks(back.gt, b.gt);
    for (std::size_t k = 0; k < b.detections.size(); ++k) {
        EXPECT_EQ(*back.detections[k].humanity, *b.detections[k].humanity);
        EXPECT_NEAR(back.detections[k].embedding[2], b.detections[k].embedding[2], 1e-6);
    }
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_bundle(dir.string()), FormatError);
}
