#include "cli_app.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run dscope_run(std::vector<std::string> args) {
    args.insert(args.begin(), "dscope");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = dscope::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& path) {
    std::ifstream in(path);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

/// Labeled corpus + store, and a dated tweet store next to it.
struct Fixture {
    testutil::TempDir dir;
    std::string dataset = dir.file("train.jsonl");
    std::string emb = dir.file("train.bin");
    std::string tweets = dir.file("tweets.bin");

    explicit Fixture(int per_class = 20, int n_tweets = 1500) {
        const auto a = dscope_run({"mock-embed", "--synthetic-labeled", std::to_string(per_class), "--dataset-out", dataset,
                                   "--output", emb, "--dim", "64"});
        EXPECT_EQ(a.code, 0) << a.err;
        const auto b = dscope_run({"mock-embed", "--synthetic-tweets", std::to_string(n_tweets), "--output", tweets, "--dim", "64",
                                   "--start", "2020-02-01", "--end", "2020-02-14"});
        EXPECT_EQ(b.code, 0) << b.err;
    }
};

}  // namespace

TEST(Cli, VersionPlainAndJson) {
    const auto plain = dscope_run({"--version"});
    EXPECT_EQ(plain.code, 0);
    EXPECT_EQ(plain.out, "dscope " + std::string(dscope::kVersion) + "\n");
    const auto js = dscope_run({"--version", "--json"});
    EXPECT_EQ(js.code, 0);
    const auto j = nlohmann::json::parse(js.out);
    EXPECT_EQ(j.at("version"), std::string(dscope::kVersion));
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(dscope_run({"--help"}).code, 0);
    EXPECT_EQ(dscope_run({}).code, 1);
    EXPECT_EQ(dscope_run({"frobnicate"}).code, 1);
    EXPECT_EQ(dscope_run({"tune", "--dataset", "x"}).code, 1);
    testutil::TempDir dir;
    const auto missing = dscope_run({"evaluate", "--dataset", dir.file("nope.jsonl"), "--embeddings", dir.file("nope.bin")});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("does not exist"), std::string::npos);
    std::ofstream(dir.file("bad.jsonl")) << "{not json\n";
    EXPECT_EQ(dscope_run({"ingest", "--input", dir.file("bad.jsonl"), "--output", dir.file("o.jsonl")}).code, 2);
}

TEST(Cli, IngestAppliesIntentRules) {
    testutil::TempDir dir;
    {
        std::ofstream in(dir.file("raw.jsonl"));
        in << R"({"text":"hi there","language":"en","source":"intent","category":"Hi"})" << "\n";
        in << R"({"text":"wash hands","language":"en","source":"intent","category":"Prevention"})" << "\n";
        in << R"({"text":"wash them","language":"en","source":"intent","category":"Prevention"})" << "\n";
    }
    const auto r = dscope_run({"ingest", "--input", dir.file("raw.jsonl"), "--output", dir.file("out.jsonl"), "--intent-rules"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(dir.file("out.jsonl")), 2u);
    EXPECT_NE(r.out.find("samples\t2"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir.file("out.jsonl.provenance.json")));
}

TEST(Cli, EvaluatePerfectOnSeparableTopics) {
    Fixture fx;
    const auto r = dscope_run({"evaluate", "--dataset", fx.dataset, "--embeddings", fx.emb, "--family", "knn", "--folds", "5",
                               "--report", fx.dir.file("report.json"), "--confusion", fx.dir.file("cm.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "accuracy 1.000000");
    const auto report = nlohmann::json::parse(testutil::slurp(fx.dir.file("report.json")));
    EXPECT_EQ(report.at("accuracy").get<double>(), 1.0);
    EXPECT_EQ(line_count(fx.dir.file("cm.csv")), 12u);
}

TEST(Cli, TuneWritesHistoryAndBestSpec) {
    Fixture fx(6);
    const auto hist = fx.dir.file("h.jsonl"), best = fx.dir.file("best.json");
    const auto r = dscope_run({"tune", "--dataset", fx.dataset, "--embeddings", fx.emb, "--family", "logreg", "--iterations", "30",
                               "--folds", "3", "--history", hist, "--best-spec", best});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(hist), 30u);
    const auto spec = nlohmann::json::parse(testutil::slurp(best));
    EXPECT_EQ(spec.at("family"), "logreg");
    const auto train = dscope_run({"train", "--dataset", fx.dataset, "--embeddings", fx.emb, "--spec", best, "--model",
                                   fx.dir.file("m.bin")});
    ASSERT_EQ(train.code, 0) << train.err;
    EXPECT_TRUE(fs::exists(fx.dir.file("m.bin")));
}

TEST(Cli, ClassifyAggregateChain) {
    Fixture fx;
    const auto model = fx.dir.file("m.bin"), preds = fx.dir.file("p.csv"), rep = fx.dir.file("t.json");
    ASSERT_EQ(dscope_run({"train", "--dataset", fx.dataset, "--embeddings", fx.emb, "--family", "knn", "--model", model}).code, 0);
    const auto c = dscope_run({"classify", "--model", model, "--store", fx.tweets, "--output", preds, "--chunk-size", "100"});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_EQ(line_count(preds), 1501u);
    const auto a = dscope_run({"aggregate", "--predictions", preds, "--metadata", fx.tweets + ".meta.jsonl", "--format", "json",
                               "--output", rep});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto j = nlohmann::json::parse(testutil::slurp(rep));
    EXPECT_EQ(j.at("days").size(), 14u);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
    Fixture fx(6);
    std::ofstream(fx.dir.file("cfg.ini")) << "[tune]\nfamily=knn\niterations=4\ninitial=2\nfolds=3\n";
    const auto hist = fx.dir.file("h.jsonl");
    auto r = dscope_run({"--config", fx.dir.file("cfg.ini"), "tune", "--dataset", fx.dataset, "--embeddings", fx.emb, "--history",
                         hist, "--best-spec", fx.dir.file("b.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(hist), 4u);
    EXPECT_EQ(nlohmann::json::parse(testutil::slurp(fx.dir.file("b.json"))).at("family"), "knn");
    r = dscope_run({"--config", fx.dir.file("cfg.ini"), "tune", "--dataset", fx.dataset, "--embeddings", fx.emb, "--iterations", "6",
                    "--history", hist, "--best-spec", fx.dir.file("b.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(line_count(hist), 6u);

    std::ofstream(fx.dir.file("bad.ini")) << "[tune]\nbogus=1\n";
    EXPECT_EQ(dscope_run({"--config", fx.dir.file("bad.ini"), "tune", "--dataset", fx.dataset, "--embeddings", fx.emb}).code, 1);
}

TEST(Cli, PipelineIsByteIdenticalAcrossRuns) {
    Fixture fx(10, 800);
    const auto run_into = [&](const std::string& out) {
        const auto r = dscope_run({"--threads", "1", "pipeline", "--dataset", fx.dataset, "--embeddings", fx.emb, "--store", fx.tweets,
                                   "--family", "knn", "--iterations", "6", "--initial", "3", "--folds", "3", "--rolling", "3",
                                   "--out-dir", out});
        EXPECT_EQ(r.code, 0) << r.err;
    };
    const auto a = fx.dir.file("a"), b = fx.dir.file("b");
    run_into(a);
    run_into(b);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        const auto name = e.path().filename().string();
        EXPECT_EQ(testutil::slurp(e.path().string()), testutil::slurp((fs::path(b) / name).string())) << name;
        ++files;
    }
    EXPECT_GE(files, 6u);
    EXPECT_TRUE(fs::exists(fs::path(a) / "timeline_rolling.csv"));
    EXPECT_EQ(line_count((fs::path(a) / "timeline.csv").string()), 15u);
}
