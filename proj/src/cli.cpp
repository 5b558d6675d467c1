#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sargam/corpus.hpp"
#include "sargam/errors.hpp"
#include "sargam/levt.hpp"
#include "sargam/pipeline.hpp"
#include "sargam/search.hpp"
#include "sargam/synthetic.hpp"

namespace sargam {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct LoadedArtifacts {
    PatchIndex index;
    std::unique_ptr<TfidfEmbedder> embedder;
    std::unique_ptr<LevTModel> model;
    std::unique_ptr<Generator> generator;
    RunContext ctx;
};

LoadedArtifacts load_artifacts(const PipelineConfig& cfg, bool need_index,
                               bool need_model) {
    LoadedArtifacts a;
    if (need_index) {
        fs::path index_path = fs::path(cfg.report_dir) / "index.jsonl";
        if (fs::exists(index_path)) {
            a.index = load_index(index_path.string());
            a.embedder = load_index_embedder(index_path.string());
        } else {
            Dataset corpus = load_jsonl(cfg.index_corpus);
            std::vector<TokenSequence> docs;
            for (const auto& r : corpus.records)
                docs.push_back(tokenize(r.prev_code));
            a.embedder =
                std::make_unique<TfidfEmbedder>(TfidfEmbedder::build(docs));
            a.index = build_index(corpus, *a.embedder);
        }
        a.ctx.index = &a.index;
        a.ctx.embedder = a.embedder.get();
    }
    if (need_model && !cfg.levt_checkpoint.empty()) {
        a.model =
            std::make_unique<LevTModel>(load_checkpoint(cfg.levt_checkpoint));
        a.ctx.model = a.model.get();
    }
    a.generator = make_generator(cfg.generator, cfg.remote);
    a.ctx.generator = a.generator.get();
    return a;
}

json retrieved_to_json(const std::vector<RetrievedPatch>& hits) {
    json out = json::array();
    for (const auto& h : hits)
        out.push_back({{"record_id", h.record_id},
                       {"distance", h.distance},
                       {"patch", join_tokens(h.patch)}});
    return out;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"search-generate-modify code editing pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--seed", seed_override, "override the config seed")
        ->each([&](const std::string&) { seed_set = true; });

    // index
    auto* cmd_index = app.add_subcommand("index", "build a patch index");
    std::string index_corpus, index_out;
    cmd_index->add_option("--corpus", index_corpus, "corpus JSONL")
        ->required();
    cmd_index->add_option("--out", index_out, "output index file")
        ->required();

    // search
    auto* cmd_search = app.add_subcommand("search", "query a patch index");
    std::string search_index, search_query;
    size_t search_k = 5;
    cmd_search->add_option("--index", search_index, "index file")->required();
    cmd_search->add_option("--query", search_query, "query text")->required();
    cmd_search->add_option("--k", search_k, "number of results");

    // train-levt
    auto* cmd_train = app.add_subcommand("train-levt", "train the edit model");
    std::string train_corpus, train_val, train_out;
    bool train_synthetic = false;
    size_t synthetic_n = 2000;
    TrainOptions topts;
    LevTConfig lcfg;
    cmd_train->add_option("--corpus", train_corpus, "training corpus JSONL");
    cmd_train->add_option("--val", train_val, "validation corpus JSONL");
    cmd_train->add_flag("--synthetic", train_synthetic,
                        "train on the built-in synthetic corpus");
    cmd_train->add_option("--synthetic-n", synthetic_n,
                          "synthetic corpus size");
    cmd_train->add_option("--out", train_out, "checkpoint path")->required();
    cmd_train->add_option("--epochs", topts.max_epochs, "max epochs");
    cmd_train->add_option("--lr", topts.lr, "learning rate");
    cmd_train->add_option("--batch-size", topts.batch_size, "batch size");
    cmd_train->add_option("--patience", topts.patience, "early stopping");
    cmd_train->add_option("--d-model", lcfg.d_model, "model width");

    // generate
    auto* cmd_generate =
        app.add_subcommand("generate", "run search+generate, dump candidates");

    // modify
    auto* cmd_modify = app.add_subcommand("modify", "refine a candidate");
    std::string modify_model, modify_input, modify_context;
    int modify_iters = 1;
    cmd_modify->add_option("--model", modify_model, "checkpoint")->required();
    cmd_modify->add_option("--input", modify_input, "candidate text")
        ->required();
    cmd_modify->add_option("--context", modify_context, "context text");
    cmd_modify->add_option("--iterations", modify_iters, "refine passes");

    // eval / report
    auto* cmd_eval = app.add_subcommand("eval", "run the evaluation harness");
    auto* cmd_report =
        app.add_subcommand("report", "emit CSV/JSON report files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1; // usage error
    }

    auto need_config = [&]() -> PipelineConfig {
        if (config_path.empty())
            throw ArgumentError("this subcommand requires --config");
        PipelineConfig cfg = PipelineConfig::from_json_file(config_path);
        if (seed_set)
            cfg.seed = seed_override;
        return cfg;
    };

    if (cmd_index->parsed()) {
        Dataset corpus = load_jsonl(index_corpus);
        std::vector<TokenSequence> docs;
        for (const auto& r : corpus.records)
            docs.push_back(tokenize(r.prev_code));
        TfidfEmbedder embedder = TfidfEmbedder::build(docs);
        PatchIndex index = build_index(corpus, embedder);
        save_index(index, index_out, &embedder);
        std::cout << "indexed " << index.entries.size() << " patches into "
                  << index_out << "\n";
        return 0;
    }

    if (cmd_search->parsed()) {
        PatchIndex index = load_index(search_index);
        auto embedder = load_index_embedder(search_index);
        auto hits = retrieve(tokenize(search_query), index, search_k,
                             *embedder);
        std::cout << retrieved_to_json(hits).dump(2) << "\n";
        return 0;
    }

    if (cmd_train->parsed()) {
        Dataset train_set, val_set;
        if (train_synthetic) {
            Dataset all = make_synthetic_dataset(synthetic_n, 7);
            auto [tr, ev, te] = split(all, 0.9, 0.1, 0.0, 7);
            train_set = std::move(tr);
            val_set = std::move(ev);
        } else {
            if (train_corpus.empty())
                throw ArgumentError("train-levt needs --corpus or "
                                    "--synthetic");
            train_set = load_jsonl(train_corpus);
            if (!train_val.empty()) {
                val_set = load_jsonl(train_val);
            } else {
                auto [tr, ev, te] = split(train_set, 0.9, 0.1, 0.0, 7);
                train_set = std::move(tr);
                val_set = std::move(ev);
            }
        }
        std::vector<TokenSequence> docs;
        for (const auto& r : train_set.records) {
            docs.push_back(tokenize(r.buggy_only));
            docs.push_back(tokenize(r.prev_code));
            docs.push_back(tokenize(r.commit_msg));
            docs.push_back(tokenize(r.fixed_code));
        }
        Vocabulary vocab = Vocabulary::build(docs, 1);
        LevTModel model(lcfg, vocab);
        TrainHistory hist = train(model, train_set, val_set, topts,
                                  lcfg.seed);
        save_checkpoint(model, train_out);
        std::cout << "epochs: " << hist.epochs.size()
                  << ", best val exact match: "
                  << hist.best_val_exact_match << "\n";
        return 0;
    }

    if (cmd_modify->parsed()) {
        LevTModel model = load_checkpoint(modify_model);
        TokenSequence out = refine_with_model(
            model, tokenize(modify_input),
            tokenize(modify_context.empty() ? modify_input
                                            : modify_context),
            modify_iters);
        std::cout << join_tokens(out) << "\n";
        return 0;
    }

    if (cmd_generate->parsed()) {
        PipelineConfig cfg = need_config();
        auto artifacts = load_artifacts(cfg, true, false);
        Dataset test_set = load_jsonl(cfg.test_corpus);
        fs::create_directories(cfg.report_dir);
        std::ofstream out(fs::path(cfg.report_dir) / "candidates.jsonl");
        StageFlags stages{.search = true, .generate = true, .modify = false};
        for (const auto& rec : test_set.records) {
            auto cands = run_record(rec, cfg, stages, artifacts.ctx);
            json line{{"id", rec.id}, {"candidates", json::array()}};
            for (const auto& c : cands)
                line["candidates"].push_back(
                    {{"rank", c.rank},
                     {"tokens", join_tokens(c.tokens)},
                     {"stage", c.stage_tag}});
            out << line.dump() << "\n";
        }
        std::cout << "wrote " << cfg.report_dir << "/candidates.jsonl\n";
        return 0;
    }

    if (cmd_eval->parsed()) {
        PipelineConfig cfg = need_config();
        auto artifacts = load_artifacts(cfg, true, true);
        Dataset test_set = load_jsonl(cfg.test_corpus);
        std::vector<VariantSpec> variants;
        variants.push_back(
            {"search", {.search = true, .generate = false, .modify = false},
             ""});
        variants.push_back({"search+generate",
                            {.search = true, .generate = true,
                             .modify = false},
                            "search"});
        if (artifacts.ctx.model)
            variants.push_back({"search+generate+modify",
                                {.search = true, .generate = true,
                                 .modify = true},
                                "search+generate"});
        EvalReport report =
            evaluate(test_set, cfg, variants, artifacts.ctx);
        fs::create_directories(cfg.report_dir);
        save_eval_report(report,
                         (fs::path(cfg.report_dir) / "evalreport.json")
                             .string());
        for (const auto& v : report.variants)
            std::cout << v.name << ": top1 " << v.top1 << ", top5 "
                      << v.top5 << "\n";
        return 0;
    }

    if (cmd_report->parsed()) {
        PipelineConfig cfg = need_config();
        EvalReport report = load_eval_report(
            (fs::path(cfg.report_dir) / "evalreport.json").string());
        emit_report_files(report, cfg.report_dir);
        std::cout << "wrote histograms.csv, tests.json, accuracy.json in "
                  << cfg.report_dir << "\n";
        return 0;
    }

    std::cerr << app.help() << "\n";
    return 1;
}

} // namespace

int cli(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ArgumentError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace sargam
