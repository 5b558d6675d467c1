#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "sargam/errors.hpp"
#include "sargam/pipeline.hpp"
#include "sargam/synthetic.hpp"

using namespace sargam;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

// Records with disjoint identifier sets so TF-IDF retrieval is exact.
Dataset distinct_dataset(int n) {
    Dataset d;
    for (int i = 0; i < n; ++i) {
        std::string tag = std::to_string(i);
        PatchRecord r;
        r.id = "r" + tag;
        r.buggy_only = "alpha" + tag + " = beta" + tag + " ;";
        r.prev_code = "void m" + tag + " ( ) { alpha" + tag + " = beta" +
                      tag + " ; }";
        r.commit_msg = "update alpha" + tag;
        r.fixed_code = "alpha" + tag + " = gamma" + tag + " ;";
        d.records.push_back(std::move(r));
    }
    return d;
}

struct Fixture {
    Dataset data;
    TfidfEmbedder embedder;
    PatchIndex index;
    RetrievalCopyGenerator generator;
    RunContext ctx;
    PipelineConfig config;

    explicit Fixture(int n = 6)
        : data(distinct_dataset(n)),
          embedder(TfidfEmbedder::build(docs(data))) {
        index = build_index(data, embedder);
        ctx.index = &index;
        ctx.embedder = &embedder;
        ctx.generator = &generator;
        // Query on context only: identical prev_code gives distance 0.
        config.modalities = ModalityFlags{false, true, false, true};
        config.k_retrieve = 3;
        config.n_generate = 3;
    }

    static std::vector<TokenSequence> docs(const Dataset& d) {
        std::vector<TokenSequence> out;
        for (const auto& r : d.records)
            out.push_back(tokenize(r.prev_code));
        return out;
    }
};

int run_cli(std::vector<std::string> args) {
    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    return cli(static_cast<int>(argv.size()), argv.data());
}

} // namespace

TEST_CASE("config json parsing, presets and validation") {
    TempFile f("pipeline_cfg.json");
    {
        std::ofstream out(f.path);
        out << R"({"index_corpus":"idx.jsonl","test_corpus":"test.jsonl",
                   "k_retrieve":7,"n_generate":2,"generator":"identity",
                   "modalities":{"intent":false},"seed":9,
                   "first_plausible":true,"histogram_bins":20})";
    }
    PipelineConfig c = PipelineConfig::from_json_file(f.path);
    CHECK(c.index_corpus == "idx.jsonl");
    CHECK(c.k_retrieve == 7);
    CHECK(c.n_generate == 2);
    CHECK(c.generator == "identity");
    CHECK_FALSE(c.modalities.intent);
    CHECK(c.modalities.location);
    CHECK(c.seed == 9);
    CHECK(c.first_plausible);
    CHECK(c.histogram_bins == 20);

    {
        std::ofstream out(f.path);
        out << R"({"apr_preset":true})";
    }
    PipelineConfig apr = PipelineConfig::from_json_file(f.path);
    CHECK(apr.k_retrieve == 25);
    CHECK(apr.n_generate == 50);
    CHECK(apr.k_retrieve * apr.n_generate == 1250);

    {
        std::ofstream out(f.path);
        out << R"({"n_generate":0})";
    }
    CHECK_THROWS_AS(PipelineConfig::from_json_file(f.path), ArgumentError);
    CHECK_THROWS_AS(PipelineConfig::from_json_file("no_such_config.json"),
                    IoError);
}

TEST_CASE("search-only with k=1 returns the top retrieved patch") {
    Fixture fx;
    fx.config.k_retrieve = 1;
    StageFlags stages{.search = true, .generate = false, .modify = false};
    auto cands = run_record(fx.data.records[2], fx.config, stages, fx.ctx);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].tokens == tokenize(fx.data.records[2].fixed_code));
    CHECK(cands[0].stage_tag == "search");
    CHECK(cands[0].rank == 1);
}

TEST_CASE("candidate budget law and contiguous ranks") {
    Fixture fx;
    fx.config.k_retrieve = 2;
    fx.config.n_generate = 3;
    StageFlags stages{.search = true, .generate = true, .modify = false};
    auto cands = run_record(fx.data.records[0], fx.config, stages, fx.ctx);
    CHECK(cands.size() <= 6);
    for (size_t i = 0; i < cands.size(); ++i)
        CHECK(cands[i].rank == int(i) + 1);
}

TEST_CASE("duplicate candidates collapse to the best rank") {
    Fixture fx;
    // The identity generator emits the same candidate on every one of the
    // k generation passes; de-duplication must fold them into one.
    IdentityGenerator identity;
    fx.ctx.generator = &identity;
    fx.config.modalities = ModalityFlags{true, true, false, true};
    fx.config.k_retrieve = 3;
    fx.config.n_generate = 1;
    StageFlags stages{.search = true, .generate = true, .modify = false};
    auto cands = run_record(fx.data.records[1], fx.config, stages, fx.ctx);
    REQUIRE(cands.size() == 1);
    CHECK(cands[0].tokens == tokenize(fx.data.records[1].buggy_only));
    CHECK(cands[0].rank == 1);
}

TEST_CASE("oracle end-to-end: retrieval copy + oracle refine hits top-1") {
    Fixture fx;
    fx.ctx.oracle_modify = true;
    StageFlags stages{.search = true, .generate = true, .modify = true};
    for (const auto& rec : fx.data.records) {
        auto cands = run_record(rec, fx.config, stages, fx.ctx);
        REQUIRE_FALSE(cands.empty());
        CHECK(cands[0].tokens == tokenize(rec.fixed_code));
        CHECK(cands[0].stage_tag == "modify");
    }
}

TEST_CASE("validator hook marks candidates and honors first_plausible") {
    Fixture fx;
    fx.config.k_retrieve = 3;
    fx.config.validator_command = "grep -q gamma";
    StageFlags stages{.search = true, .generate = false, .modify = false};
    auto cands = run_record(fx.data.records[0], fx.config, stages, fx.ctx);
    REQUIRE_FALSE(cands.empty());
    for (const auto& c : cands) {
        CHECK(c.validator_ran);
        CHECK(c.validated); // every fixed_code contains a gamma token
    }

    fx.config.first_plausible = true;
    auto first = run_record(fx.data.records[0], fx.config, stages, fx.ctx);
    size_t ran = 0;
    for (const auto& c : first)
        if (c.validator_ran)
            ++ran;
    CHECK(ran == 1); // stopped at the first plausible candidate

    fx.config.first_plausible = false;
    fx.config.validator_command = "grep -q never_present_token";
    auto none = run_record(fx.data.records[0], fx.config, stages, fx.ctx);
    for (const auto& c : none) {
        CHECK(c.validator_ran);
        CHECK_FALSE(c.validated);
    }
}

TEST_CASE("evaluate: accuracies, zero improvement, modality analytics") {
    Fixture fx;
    std::vector<VariantSpec> variants = {
        {"search", {true, false, false}, ""},
        {"search_again", {true, false, false}, "search"},
    };
    EvalReport report = evaluate(fx.data, fx.config, variants, fx.ctx);
    REQUIRE(report.variants.size() == 2);
    CHECK(report.variants[0].top1 == 1.0);
    CHECK(report.variants[0].top5 == 1.0);
    REQUIRE(report.improvements.size() == 1);
    CHECK(report.improvements[0].top1_improve_pct == 0.0);
    CHECK(report.improvements[0].top5_improve_pct == 0.0);

    REQUIRE(report.modality_analytics.size() == 3);
    std::set<std::string> names;
    for (const auto& m : report.modality_analytics) {
        names.insert(m.modality);
        REQUIRE(m.top1.values.size() == m.min_top5.values.size());
        for (size_t i = 0; i < m.top1.values.size(); ++i)
            CHECK(m.min_top5.values[i] <= m.top1.values[i] + 1e-12);
        CHECK(int(m.top1_hist.size()) == fx.config.histogram_bins);
    }
    CHECK(names == std::set<std::string>{"buggy_only", "prev_code",
                                         "commit_msg"});
    for (const auto& t : report.tests) {
        CHECK(t.result.p_value >= 0.0);
        CHECK(t.result.p_value <= 1.0);
        CHECK(t.result.wasserstein >= 0.0);
    }
}

TEST_CASE("eval report round trip and emitted files") {
    Fixture fx;
    std::vector<VariantSpec> variants = {{"search", {true, false, false}, ""}};
    EvalReport report = evaluate(fx.data, fx.config, variants, fx.ctx);

    TempFile f("evalreport_test.json");
    save_eval_report(report, f.path);
    EvalReport back = load_eval_report(f.path);
    REQUIRE(back.variants.size() == report.variants.size());
    CHECK(back.variants[0].top1 == report.variants[0].top1);
    CHECK(back.modality_analytics.size() ==
          report.modality_analytics.size());
    CHECK(back.tests.size() == report.tests.size());

    std::string dir = "report_test_dir";
    emit_report_files(back, dir);
    CHECK(fs::exists(fs::path(dir) / "histograms.csv"));
    CHECK(fs::exists(fs::path(dir) / "tests.json"));
    CHECK(fs::exists(fs::path(dir) / "accuracy.json"));
    std::ifstream hist(fs::path(dir) / "histograms.csv");
    std::string header;
    std::getline(hist, header);
    CHECK(header == "modality,sample,bin_low,bin_high,count");
    fs::remove_all(dir);
}

TEST_CASE("cli usage errors exit with status 1") {
    CHECK(run_cli({"sargam", "eval"}) == 1);          // missing --config
    CHECK(run_cli({"sargam", "no-such-command"}) == 1);
    CHECK(run_cli({"sargam"}) == 1);                  // no subcommand
    CHECK(run_cli({"sargam", "search", "--query", "x"}) == 1); // no index
}

TEST_CASE("cli search returns distance 0 for an indexed query") {
    // End-to-end through the real subcommands: index then search.
    Dataset d = distinct_dataset(3);
    TempFile corpus("cli_corpus.jsonl");
    TempFile index("cli_index.jsonl");
    save_jsonl(d, corpus.path);
    CHECK(run_cli({"sargam", "index", "--corpus", corpus.path, "--out",
                   index.path}) == 0);
    CHECK(run_cli({"sargam", "search", "--index", index.path, "--query",
                   d.records[0].prev_code, "--k", "1"}) == 0);
    // Runtime failures (missing file) map to exit 2.
    CHECK(run_cli({"sargam", "search", "--index", "missing_index.jsonl",
                   "--query", "x"}) == 2);
}
