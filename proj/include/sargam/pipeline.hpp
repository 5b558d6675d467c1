#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sargam/corpus.hpp"
#include "sargam/generate.hpp"
#include "sargam/levt.hpp"
#include "sargam/search.hpp"
#include "sargam/stats.hpp"

namespace sargam {

struct StageFlags {
    bool search = true;
    bool generate = true;
    bool modify = true;
};

struct PipelineConfig {
    std::string index_corpus;
    std::string test_corpus;
    ModalityFlags modalities;
    size_t k_retrieve = 5;  // APR preset: 25
    size_t n_generate = 5;  // APR preset: 50
    std::string generator = "retrieval_copy";
    RemoteConfig remote;
    std::string levt_checkpoint;
    int refine_iterations = 1;
    std::string validator_command;
    std::string report_dir = "report";
    std::uint64_t seed = 0;
    bool first_plausible = false;
    int histogram_bins = 50;

    void check() const;
    static PipelineConfig from_json_file(const std::string& path);
};

// 50 * 25 = 1250 candidate patches per bug.
PipelineConfig apr_preset(PipelineConfig base);

struct Candidate {
    TokenSequence tokens;
    int rank = 0;
    std::string stage_tag; // search | generate | modify
    bool validator_ran = false;
    bool validated = false;
    std::string error; // per-candidate stage failure, never fatal
};

// Loaded artifacts for a run; model may be absent when the modify stage
// is disabled. oracle_target switches the modify stage to the expert
// policy (test harness).
struct RunContext {
    const PatchIndex* index = nullptr;
    const Embedder* embedder = nullptr;
    LevTModel* model = nullptr;
    const Generator* generator = nullptr;
    bool oracle_modify = false;
};

std::vector<Candidate> run_record(const PatchRecord& record,
                                  const PipelineConfig& config,
                                  const StageFlags& stages,
                                  const RunContext& ctx);

struct VariantSpec {
    std::string name;
    StageFlags stages;
    std::string baseline; // empty = no improvement row
};

struct VariantResult {
    std::string name;
    double top1 = 0.0;
    double top5 = 0.0;
    size_t records = 0;
};

struct ImprovementRow {
    std::string variant;
    std::string baseline;
    double top1_improve_pct = 0.0;
    double top5_improve_pct = 0.0;
};

struct ModalityAnalytics {
    std::string modality; // buggy_only | prev_code | commit_msg
    DistanceSample top1;
    DistanceSample min_top5;
    std::vector<HistogramBin> top1_hist;
    std::vector<HistogramBin> min_top5_hist;
};

struct PairwiseTest {
    std::string a;
    std::string b;
    TestResult result;
};

struct EvalReport {
    std::vector<VariantResult> variants;
    std::vector<ImprovementRow> improvements;
    std::vector<ModalityAnalytics> modality_analytics;
    std::vector<PairwiseTest> tests;
};

EvalReport evaluate(const Dataset& test_set, const PipelineConfig& config,
                    const std::vector<VariantSpec>& variants,
                    const RunContext& ctx);

void save_eval_report(const EvalReport& report, const std::string& path);
EvalReport load_eval_report(const std::string& path);

// Emits histograms.csv, tests.json and accuracy.json under dir.
void emit_report_files(const EvalReport& report, const std::string& dir);

// Pipes the candidate to the validator command's stdin; exit status 0
// marks it validated.
bool run_validator(const std::string& command, const TokenSequence& tokens);

int cli(int argc, char** argv);

} // namespace sargam
