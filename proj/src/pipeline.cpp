#include "sargam/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sargam/editalg.hpp"
#include "sargam/errors.hpp"

namespace sargam {

namespace {
using nlohmann::json;
namespace fs = std::filesystem;
} // namespace

void PipelineConfig::check() const {
    if (n_generate < 1)
        throw ArgumentError("config: n_generate must be >= 1");
    if (refine_iterations < 1)
        throw ArgumentError("config: refine_iterations must be >= 1");
    if (histogram_bins < 1)
        throw ArgumentError("config: histogram_bins must be >= 1");
}

PipelineConfig apr_preset(PipelineConfig base) {
    base.k_retrieve = 25;
    base.n_generate = 50;
    return base;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    PipelineConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key))
            field = j.at(key).template get<
                std::remove_reference_t<decltype(field)>>();
    };
    get("index_corpus", c.index_corpus);
    get("test_corpus", c.test_corpus);
    get("k_retrieve", c.k_retrieve);
    get("n_generate", c.n_generate);
    get("generator", c.generator);
    get("levt_checkpoint", c.levt_checkpoint);
    get("refine_iterations", c.refine_iterations);
    get("validator_command", c.validator_command);
    get("report_dir", c.report_dir);
    get("seed", c.seed);
    get("first_plausible", c.first_plausible);
    get("histogram_bins", c.histogram_bins);
    if (j.contains("modalities")) {
        const auto& m = j.at("modalities");
        auto flag = [&](const char* key, bool& field) {
            if (m.contains(key))
                field = m.at(key).get<bool>();
        };
        flag("location", c.modalities.location);
        flag("context", c.modalities.context);
        flag("intent", c.modalities.intent);
        flag("retrieved", c.modalities.retrieved);
    }
    if (j.contains("remote")) {
        const auto& r = j.at("remote");
        if (r.contains("endpoint"))
            c.remote.endpoint = r.at("endpoint").get<std::string>();
        if (r.contains("timeout_seconds"))
            c.remote.timeout_seconds = r.at("timeout_seconds").get<int>();
        if (r.contains("max_tokens"))
            c.remote.max_tokens = r.at("max_tokens").get<int>();
    }
    if (j.contains("apr_preset") && j.at("apr_preset").get<bool>())
        c = apr_preset(c);
    c.check();
    return c;
}

bool run_validator(const std::string& command, const TokenSequence& tokens) {
    FILE* pipe = popen(command.c_str(), "w");
    if (!pipe)
        throw IoError("validator command failed to start: " + command);
    std::string line = join_tokens(tokens) + "\n";
    fwrite(line.data(), 1, line.size(), pipe);
    int status = pclose(pipe);
    return status == 0;
}

namespace {

TokenSequence query_tokens(const PatchRecord& record,
                           const ModalityFlags& flags) {
    ModalityFlags f = flags;
    f.retrieved = false;
    // Unknown edit location degenerates to a whole-context query.
    if (f.location && record.buggy_only.empty() && !f.context) {
        f.location = false;
        f.context = true;
    }
    return assemble(record, {}, f).serialize();
}

TokenSequence refine_context(const PatchRecord& record) {
    return tokenize(record.buggy_only.empty() ? record.prev_code
                                              : record.buggy_only);
}

} // namespace

std::vector<Candidate> run_record(const PatchRecord& record,
                                  const PipelineConfig& config,
                                  const StageFlags& stages,
                                  const RunContext& ctx) {
    std::vector<Candidate> out;

    std::vector<RetrievedPatch> retrieved;
    if (stages.search && config.k_retrieve > 0 && ctx.index &&
        ctx.embedder && !ctx.index->entries.empty()) {
        retrieved = retrieve(query_tokens(record, config.modalities),
                             *ctx.index, config.k_retrieve, *ctx.embedder);
    }

    if (!stages.generate) {
        for (const auto& r : retrieved) {
            Candidate c;
            c.tokens = r.patch;
            c.stage_tag = "search";
            out.push_back(std::move(c));
        }
    } else {
        if (!ctx.generator)
            throw ArgumentError("run_record: generate stage needs a "
                                "generator");
        const bool remote = ctx.generator->name() == "remote";
        size_t passes = retrieved.empty() ? 1 : retrieved.size();
        for (size_t i = 0; i < passes; ++i) {
            std::vector<RetrievedPatch> one;
            if (i < retrieved.size())
                one.push_back(retrieved[i]);
            Candidate failure;
            try {
                GenInput gi;
                gi.input = assemble(record, one, config.modalities);
                if (remote)
                    gi.prompt = build_prompt(
                        record, one.empty()
                                    ? std::nullopt
                                    : std::optional<TokenSequence>(
                                          one[0].patch));
                auto cands = ctx.generator->generate(gi, config.n_generate);
                for (auto& gc : cands) {
                    Candidate c;
                    c.tokens = std::move(gc.tokens);
                    c.stage_tag = "generate";
                    out.push_back(std::move(c));
                }
                continue;
            } catch (const Error& e) {
                failure.stage_tag = "generate";
                failure.error = e.what();
            }
            out.push_back(std::move(failure));
        }
    }

    if (stages.modify) {
        TokenSequence target = tokenize(record.fixed_code);
        for (auto& c : out) {
            if (!c.error.empty())
                continue;
            try {
                if (ctx.oracle_modify) {
                    OracleRefinePolicy policy(target);
                    int max_plh = ctx.model ? ctx.model->config().max_plh : 8;
                    int max_len =
                        ctx.model ? ctx.model->config().max_seq_len : 128;
                    c.tokens = refine(policy, c.tokens,
                                      config.refine_iterations, max_plh,
                                      max_len);
                } else if (ctx.model) {
                    c.tokens = refine_with_model(
                        *ctx.model, c.tokens, refine_context(record),
                        config.refine_iterations);
                }
                c.stage_tag = "modify";
            } catch (const Error& e) {
                c.error = e.what();
            }
        }
    }

    // De-duplicate, keeping the best (earliest) rank.
    std::vector<Candidate> unique;
    std::unordered_set<std::string> seen;
    for (auto& c : out) {
        std::string key = join_tokens(c.tokens);
        if (!c.error.empty())
            key = "\x01error:" + c.error + key;
        if (seen.insert(key).second)
            unique.push_back(std::move(c));
    }
    for (size_t i = 0; i < unique.size(); ++i)
        unique[i].rank = static_cast<int>(i) + 1;

    if (!config.validator_command.empty()) {
        for (auto& c : unique) {
            if (!c.error.empty())
                continue;
            c.validator_ran = true;
            c.validated = run_validator(config.validator_command, c.tokens);
            if (c.validated && config.first_plausible)
                break;
        }
    }
    return unique;
}

namespace {

const char* kModalities[] = {"buggy_only", "prev_code", "commit_msg"};

std::string modality_field(const PatchRecord& r, const std::string& name) {
    if (name == "buggy_only")
        return r.buggy_only;
    if (name == "prev_code")
        return r.prev_code;
    return r.commit_msg;
}

} // namespace

EvalReport evaluate(const Dataset& test_set, const PipelineConfig& config,
                    const std::vector<VariantSpec>& variants,
                    const RunContext& ctx) {
    if (variants.empty())
        throw ArgumentError("evaluate: need at least one variant");
    EvalReport report;

    std::vector<TokenSequence> targets;
    for (const auto& r : test_set.records)
        targets.push_back(tokenize(r.fixed_code));

    for (const auto& v : variants) {
        VariantResult res;
        res.name = v.name;
        res.records = test_set.records.size();
        std::vector<std::vector<TokenSequence>> all;
        bool skipped = false;
        for (const auto& rec : test_set.records) {
            try {
                auto cands = run_record(rec, config, v.stages, ctx);
                std::vector<TokenSequence> toks;
                for (auto& c : cands)
                    if (c.error.empty())
                        toks.push_back(std::move(c.tokens));
                all.push_back(std::move(toks));
            } catch (const Error& e) {
                fprintf(stderr, "variant %s skipped: %s\n", v.name.c_str(),
                        e.what());
                skipped = true;
                break;
            }
        }
        if (skipped)
            continue;
        res.top1 = topk_accuracy(all, targets, 1);
        res.top5 = topk_accuracy(all, targets, 5);
        report.variants.push_back(res);
    }

    for (const auto& v : variants) {
        if (v.baseline.empty())
            continue;
        auto find = [&](const std::string& name) -> const VariantResult* {
            for (const auto& r : report.variants)
                if (r.name == name)
                    return &r;
            return nullptr;
        };
        const VariantResult* a = find(v.name);
        const VariantResult* b = find(v.baseline);
        if (!a || !b || b->top1 == 0.0 || b->top5 == 0.0)
            continue;
        ImprovementRow row;
        row.variant = v.name;
        row.baseline = v.baseline;
        row.top1_improve_pct = percent_improvement(b->top1, a->top1);
        row.top5_improve_pct = percent_improvement(b->top5, a->top5);
        report.improvements.push_back(row);
    }

    // RQ4-style retrieval analytics per query modality.
    if (ctx.index && ctx.embedder && !ctx.index->entries.empty()) {
        for (const char* name : kModalities) {
            ModalityAnalytics ma;
            ma.modality = name;
            ma.top1.label = std::string(name) + ", k=1";
            ma.min_top5.label = std::string(name) + ", k=5";
            for (size_t i = 0; i < test_set.records.size(); ++i) {
                std::string text =
                    modality_field(test_set.records[i], name);
                auto hits = retrieve(tokenize(text), *ctx.index, 5,
                                     *ctx.embedder);
                if (hits.empty())
                    continue;
                std::vector<TokenSequence> patches;
                for (const auto& h : hits)
                    patches.push_back(h.patch);
                ma.top1.values.push_back(
                    normalized_distance(patches[0], targets[i]));
                ma.min_top5.values.push_back(
                    min_topk_distance(patches, targets[i], 5));
            }
            if (ma.top1.values.empty())
                continue;
            ma.top1_hist = histogram(ma.top1, config.histogram_bins);
            ma.min_top5_hist = histogram(ma.min_top5, config.histogram_bins);
            report.modality_analytics.push_back(std::move(ma));
        }
        for (size_t i = 0; i < report.modality_analytics.size(); ++i)
            for (size_t j = i + 1; j < report.modality_analytics.size();
                 ++j) {
                const auto& a = report.modality_analytics[i];
                const auto& b = report.modality_analytics[j];
                try {
                    PairwiseTest t;
                    t.a = a.top1.label;
                    t.b = b.top1.label;
                    t.result = two_sample_z(a.top1, b.top1);
                    report.tests.push_back(t);
                } catch (const Error& e) {
                    fprintf(stderr, "pairwise test %s vs %s skipped: %s\n",
                            a.modality.c_str(), b.modality.c_str(),
                            e.what());
                }
            }
    }
    return report;
}

namespace {

json hist_to_json(const std::vector<HistogramBin>& h) {
    json out = json::array();
    for (const auto& b : h)
        out.push_back({{"low", b.low}, {"high", b.high}, {"count", b.count}});
    return out;
}

std::vector<HistogramBin> hist_from_json(const json& j) {
    std::vector<HistogramBin> out;
    for (const auto& b : j)
        out.push_back({b.at("low").get<double>(),
                       b.at("high").get<double>(),
                       b.at("count").get<long>()});
    return out;
}

} // namespace

void save_eval_report(const EvalReport& report, const std::string& path) {
    json j;
    j["variants"] = json::array();
    for (const auto& v : report.variants)
        j["variants"].push_back({{"name", v.name},
                                 {"top1", v.top1},
                                 {"top5", v.top5},
                                 {"records", v.records}});
    j["improvements"] = json::array();
    for (const auto& r : report.improvements)
        j["improvements"].push_back({{"variant", r.variant},
                                     {"baseline", r.baseline},
                                     {"top1_improve_pct", r.top1_improve_pct},
                                     {"top5_improve_pct", r.top5_improve_pct}});
    j["modality_analytics"] = json::array();
    for (const auto& m : report.modality_analytics)
        j["modality_analytics"].push_back(
            {{"modality", m.modality},
             {"top1", {{"label", m.top1.label}, {"values", m.top1.values}}},
             {"min_top5",
              {{"label", m.min_top5.label},
               {"values", m.min_top5.values}}},
             {"top1_hist", hist_to_json(m.top1_hist)},
             {"min_top5_hist", hist_to_json(m.min_top5_hist)}});
    j["tests"] = json::array();
    for (const auto& t : report.tests)
        j["tests"].push_back({{"a", t.a},
                              {"b", t.b},
                              {"z_statistic", t.result.z_statistic},
                              {"p_value", t.result.p_value},
                              {"wasserstein", t.result.wasserstein}});
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot write eval report: " + path);
    f << j.dump(2) << "\n";
}

EvalReport load_eval_report(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open eval report: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw CorruptionError("eval report unreadable: " +
                              std::string(e.what()));
    }
    EvalReport r;
    for (const auto& v : j.at("variants"))
        r.variants.push_back({v.at("name").get<std::string>(),
                              v.at("top1").get<double>(),
                              v.at("top5").get<double>(),
                              v.at("records").get<size_t>()});
    for (const auto& v : j.at("improvements"))
        r.improvements.push_back(
            {v.at("variant").get<std::string>(),
             v.at("baseline").get<std::string>(),
             v.at("top1_improve_pct").get<double>(),
             v.at("top5_improve_pct").get<double>()});
    for (const auto& m : j.at("modality_analytics")) {
        ModalityAnalytics ma;
        ma.modality = m.at("modality").get<std::string>();
        ma.top1.label = m.at("top1").at("label").get<std::string>();
        ma.top1.values =
            m.at("top1").at("values").get<std::vector<double>>();
        ma.min_top5.label = m.at("min_top5").at("label").get<std::string>();
        ma.min_top5.values =
            m.at("min_top5").at("values").get<std::vector<double>>();
        ma.top1_hist = hist_from_json(m.at("top1_hist"));
        ma.min_top5_hist = hist_from_json(m.at("min_top5_hist"));
        r.modality_analytics.push_back(std::move(ma));
    }
    for (const auto& t : j.at("tests")) {
        PairwiseTest pt;
        pt.a = t.at("a").get<std::string>();
        pt.b = t.at("b").get<std::string>();
        pt.result.z_statistic = t.at("z_statistic").get<double>();
        pt.result.p_value = t.at("p_value").get<double>();
        pt.result.wasserstein = t.at("wasserstein").get<double>();
        r.tests.push_back(pt);
    }
    return r;
}

void emit_report_files(const EvalReport& report, const std::string& dir) {
    fs::create_directories(dir);

    std::ofstream hist(fs::path(dir) / "histograms.csv");
    if (!hist)
        throw IoError("cannot write histograms.csv in " + dir);
    hist << "modality,sample,bin_low,bin_high,count\n";
    for (const auto& m : report.modality_analytics) {
        for (const auto& b : m.top1_hist)
            hist << m.modality << ",k=1," << b.low << "," << b.high << ","
                 << b.count << "\n";
        for (const auto& b : m.min_top5_hist)
            hist << m.modality << ",k=5," << b.low << "," << b.high << ","
                 << b.count << "\n";
    }

    json tests = json::array();
    for (const auto& t : report.tests)
        tests.push_back({{"a", t.a},
                         {"b", t.b},
                         {"z_statistic", t.result.z_statistic},
                         {"p_value", t.result.p_value},
                         {"wasserstein", t.result.wasserstein}});
    std::ofstream tf(fs::path(dir) / "tests.json");
    tf << tests.dump(2) << "\n";

    json acc;
    acc["variants"] = json::array();
    for (const auto& v : report.variants)
        acc["variants"].push_back({{"name", v.name},
                                   {"top1", v.top1},
                                   {"top5", v.top5},
                                   {"records", v.records}});
    acc["improvements"] = json::array();
    for (const auto& r : report.improvements)
        acc["improvements"].push_back(
            {{"variant", r.variant},
             {"baseline", r.baseline},
             {"top1_improve_pct", r.top1_improve_pct},
             {"top5_improve_pct", r.top5_improve_pct}});
    std::ofstream af(fs::path(dir) / "accuracy.json");
    af << acc.dump(2) << "\n";
}

} // namespace sargam
