#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sargam/autodiff.hpp"
#include "sargam/corpus.hpp"
#include "sargam/editalg.hpp"
#include "sargam/generate.hpp"
#include "sargam/tokenize.hpp"

namespace sargam {

struct LevTConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_enc_layers = 2;
    int n_dec_layers = 2;
    int ffn_dim = 128;
    int max_plh = 8; // K_max: placeholder head predicts 0..max_plh
    int max_seq_len = 128;
    double dropout = 0.1;
    std::uint64_t seed = 0;

    void check() const;
};

// One refinement pass, stage by stage.
struct RefinementStep {
    TokenSequence input;
    std::vector<int> del_decisions;
    TokenSequence after_deletion;
    std::vector<int> plh_counts;
    TokenSequence with_placeholders;
    TokenSequence inserted;
    TokenSequence output;
    bool truncated = false;
};

struct RefinementTrace {
    std::vector<RefinementStep> steps;
};

// Supplies the three edit decisions for one refinement pass. Sequences
// passed in include BOS/EOS sentinels; masks/counts cover only the
// editable positions (non-sentinel tokens; gaps between consecutive
// tokens).
class RefinePolicy {
public:
    virtual ~RefinePolicy() = default;
    virtual std::vector<int> delete_mask(const TokenSequence& current) = 0;
    virtual std::vector<int>
    placeholder_counts(const TokenSequence& after_deletion) = 0;
    virtual TokenSequence
    insert_tokens(const TokenSequence& with_placeholders) = 0;
};

struct TrainExample {
    std::vector<int> context_ids; // encoder input, sentinel-wrapped
    TokenSequence roll_in;        // decoder input
    TokenSequence y_star;         // target
};

class LevTModel {
public:
    LevTModel(LevTConfig config, Vocabulary vocab);

    const LevTConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    int vocab_size() const { return vocab_.size(); }

    // Fixed, documented parameter order (also the checkpoint layout).
    std::vector<ad::Param*> params();
    size_t param_count();

    // Inference-path forwards (dropout off, deterministic).
    ad::Mat encode_context(const std::vector<int>& input_ids,
                           bool* truncated = nullptr);
    ad::Mat decoder_states(const std::vector<int>& ids, const ad::Mat& H);

    // Head probability matrices (softmax rows).
    ad::Mat head_del(const ad::Mat& z) const;  // len x 2
    ad::Mat head_plh(const ad::Mat& z) const;  // (len-1) x (max_plh+1)
    ad::Mat head_ins(const ad::Mat& z_at_plh) const; // #plh x vocab

    // Mean-per-valid-position sum of the three cross-entropy terms.
    double loss(const std::vector<TrainExample>& batch);
    // Same loss with dropout active; accumulates parameter gradients.
    double loss_and_grad(const std::vector<TrainExample>& batch,
                         std::mt19937_64& dropout_rng);

    struct Impl;

private:
    LevTConfig config_;
    Vocabulary vocab_;
    std::shared_ptr<Impl> impl_;

    friend class ModelRefinePolicy;
    double run_loss(const std::vector<TrainExample>& batch, bool training,
                    std::mt19937_64* rng);
};

// Greedy-argmax model policy. Encodes the context once per instance.
class ModelRefinePolicy : public RefinePolicy {
public:
    ModelRefinePolicy(LevTModel& model, const std::vector<int>& context_ids);

    std::vector<int> delete_mask(const TokenSequence& current) override;
    std::vector<int>
    placeholder_counts(const TokenSequence& after_deletion) override;
    TokenSequence
    insert_tokens(const TokenSequence& with_placeholders) override;

private:
    LevTModel& model_;
    ad::Mat H_;

    ad::Mat states(const TokenSequence& tokens);
};

// Expert policy against a known target; used for oracle harness runs.
class OracleRefinePolicy : public RefinePolicy {
public:
    explicit OracleRefinePolicy(TokenSequence target)
        : target_(std::move(target)) {}

    std::vector<int> delete_mask(const TokenSequence& current) override;
    std::vector<int>
    placeholder_counts(const TokenSequence& after_deletion) override;
    TokenSequence
    insert_tokens(const TokenSequence& with_placeholders) override;

private:
    TokenSequence target_;
};

// Delete -> placeholder -> insert, greedy, early stop when a pass makes
// no change. Output never contains the placeholder token.
TokenSequence refine(RefinePolicy& policy, const TokenSequence& v_gen,
                     int iterations, int max_plh, int max_seq_len,
                     RefinementTrace* trace = nullptr);

// Convenience wrapper: encodes the context and runs the model policy.
TokenSequence refine_with_model(LevTModel& model, const TokenSequence& v_gen,
                                const TokenSequence& context_tokens,
                                int iterations,
                                RefinementTrace* trace = nullptr);

enum class RollInMode { drop, model };

// Decoder-input corruption for imitation training. "drop" deletes each
// token independently with probability noise_p; "model" additionally
// runs the current deletion head over the noised target.
TokenSequence roll_in(const TokenSequence& y_star, RollInMode mode,
                      double noise_p, std::uint64_t seed,
                      LevTModel* model = nullptr,
                      const std::vector<int>* context_ids = nullptr);

struct TrainOptions {
    double lr = 3e-3;
    int batch_size = 16;
    int max_epochs = 30;
    int patience = 5;
    double noise_p = 0.3;
    double vgen_rollin_prob = 0.8; // roll in from buggy_only this often
    int val_refine_iterations = 1;
    ModalityFlags encoder_modalities{.location = true,
                                     .context = false,
                                     .intent = false,
                                     .retrieved = false};
};

struct EpochStats {
    double train_loss = 0.0;
    double val_exact_match = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    int best_epoch = -1; // index into epochs
    double best_val_exact_match = 0.0;
};

TrainHistory train(LevTModel& model, const Dataset& train_set,
                   const Dataset& val_set, const TrainOptions& options,
                   std::uint64_t seed);

std::vector<int> encoder_input_ids(const PatchRecord& record,
                                   const Vocabulary& vocab,
                                   const ModalityFlags& flags,
                                   int max_seq_len);

void save_checkpoint(LevTModel& model, const std::string& path);
LevTModel load_checkpoint(const std::string& path);

} // namespace sargam
