#include "sargam/levt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "sargam/errors.hpp"

namespace sargam {

using ad::Mat;
using ad::Param;
using ad::Tape;

void LevTConfig::check() const {
    if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
        throw ArgumentError("LevTConfig: d_model must be divisible by "
                            "n_heads");
    if (max_plh < 1)
        throw ArgumentError("LevTConfig: max_plh must be >= 1");
    if (max_seq_len < 4)
        throw ArgumentError("LevTConfig: max_seq_len too small");
    if (dropout < 0.0 || dropout >= 1.0)
        throw ArgumentError("LevTConfig: dropout must be in [0,1)");
}

namespace {

struct AttnParams {
    Param Wq, bq, Wk, bk, Wv, bv, Wo, bo;
};

struct LayerNormParams {
    Param gain, bias;
};

struct FfnParams {
    Param W1, b1, W2, b2;
};

struct EncLayer {
    LayerNormParams ln1;
    AttnParams attn;
    LayerNormParams ln2;
    FfnParams ffn;
};

struct DecLayer {
    LayerNormParams ln1;
    AttnParams self_attn;
    LayerNormParams ln2;
    AttnParams cross_attn;
    LayerNormParams ln3;
    FfnParams ffn;
};

Mat sinusoidal_positions(int len, int d) {
    Mat p(len, d);
    for (int pos = 0; pos < len; ++pos)
        for (int i = 0; i < d; ++i) {
            double angle =
                pos / std::pow(10000.0, double(2 * (i / 2)) / double(d));
            p(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return p;
}

TokenSequence wrap_sentinels(const TokenSequence& tokens) {
    TokenSequence out;
    out.reserve(tokens.size() + 2);
    out.push_back(kBosToken);
    out.insert(out.end(), tokens.begin(), tokens.end());
    out.push_back(kEosToken);
    return out;
}

TokenSequence strip_sentinels(const TokenSequence& tokens) {
    TokenSequence out;
    for (const auto& t : tokens)
        if (t != kBosToken && t != kEosToken)
            out.push_back(t);
    return out;
}

} // namespace

struct LevTModel::Impl {
    Param embedding; // vocab x d_model, shared by encoder and decoder
    std::vector<EncLayer> enc_layers;
    LayerNormParams enc_final;
    std::vector<DecLayer> dec_layers;
    LayerNormParams dec_final;
    Param W_del; // d_model x 2
    Param W_plh; // 2*d_model x (max_plh+1)
    Param W_ins; // d_model x vocab
};

namespace {

// One forward pass: a tape plus the per-pass parameter node cache.
struct Fwd {
    Tape tape;
    bool training = false;
    double dropout = 0.0;
    std::mt19937_64* rng = nullptr;
    std::unordered_map<const Param*, int> nodes;

    int p(Param& param) {
        auto it = nodes.find(&param);
        if (it != nodes.end())
            return it->second;
        int id = training ? tape.param(param)
                          : tape.constant(param.value);
        nodes.emplace(&param, id);
        return id;
    }

    int drop(int x) {
        if (training && dropout > 0.0)
            return tape.dropout(x, dropout, *rng);
        return x;
    }
};

int attention(Fwd& f, int xq, int xkv, AttnParams& a, int n_heads) {
    Tape& t = f.tape;
    int Q = t.add_rowvec(t.matmul(xq, f.p(a.Wq)), f.p(a.bq));
    int K = t.add_rowvec(t.matmul(xkv, f.p(a.Wk)), f.p(a.bk));
    int V = t.add_rowvec(t.matmul(xkv, f.p(a.Wv)), f.p(a.bv));
    int d = static_cast<int>(t.value(Q).cols());
    int dh = d / n_heads;
    int cat = -1;
    for (int h = 0; h < n_heads; ++h) {
        int Qh = t.slice_cols(Q, h * dh, dh);
        int Kh = t.slice_cols(K, h * dh, dh);
        int Vh = t.slice_cols(V, h * dh, dh);
        int S = t.scale(t.matmul_nt(Qh, Kh), 1.0 / std::sqrt(double(dh)));
        int A = f.drop(t.softmax_rows(S));
        int Oh = t.matmul(A, Vh);
        cat = (h == 0) ? Oh : t.hcat(cat, Oh);
    }
    return t.add_rowvec(t.matmul(cat, f.p(a.Wo)), f.p(a.bo));
}

int layernorm(Fwd& f, int x, LayerNormParams& ln) {
    return f.tape.layernorm_rows(x, f.p(ln.gain), f.p(ln.bias));
}

int ffn(Fwd& f, int x, FfnParams& p) {
    Tape& t = f.tape;
    int h = t.relu(t.add_rowvec(t.matmul(x, f.p(p.W1)), f.p(p.b1)));
    return t.add_rowvec(t.matmul(h, f.p(p.W2)), f.p(p.b2));
}

int embed(Fwd& f, LevTModel::Impl& m, const std::vector<int>& ids, int d) {
    int x = f.tape.rows(f.p(m.embedding), ids);
    int pos = f.tape.constant(
        sinusoidal_positions(static_cast<int>(ids.size()), d));
    return f.drop(f.tape.add(x, pos));
}

int encoder_forward(Fwd& f, LevTModel::Impl& m, const LevTConfig& cfg,
                    const std::vector<int>& ids) {
    int x = embed(f, m, ids, cfg.d_model);
    for (auto& layer : m.enc_layers) {
        int a = layernorm(f, x, layer.ln1);
        x = f.tape.add(x, f.drop(attention(f, a, a, layer.attn,
                                           cfg.n_heads)));
        int b = layernorm(f, x, layer.ln2);
        x = f.tape.add(x, f.drop(ffn(f, b, layer.ffn)));
    }
    return layernorm(f, x, m.enc_final);
}

int decoder_forward(Fwd& f, LevTModel::Impl& m, const LevTConfig& cfg,
                    const std::vector<int>& ids, int H) {
    int x = embed(f, m, ids, cfg.d_model);
    for (auto& layer : m.dec_layers) {
        int a = layernorm(f, x, layer.ln1);
        x = f.tape.add(x, f.drop(attention(f, a, a, layer.self_attn,
                                           cfg.n_heads)));
        int b = layernorm(f, x, layer.ln2);
        x = f.tape.add(x, f.drop(attention(f, b, H, layer.cross_attn,
                                           cfg.n_heads)));
        int c = layernorm(f, x, layer.ln3);
        x = f.tape.add(x, f.drop(ffn(f, c, layer.ffn)));
    }
    return layernorm(f, x, m.dec_final);
}

Mat softmax_rows_plain(Mat m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

void init_normal(Param& p, int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 0.02);
    p = Param(Mat::NullaryExpr(rows, cols, [&]() { return dist(rng); }));
}

void init_zeros(Param& p, int rows, int cols) {
    p = Param(Mat::Zero(rows, cols));
}

void init_ones(Param& p, int rows, int cols) {
    p = Param(Mat::Ones(rows, cols));
}

void init_attn(AttnParams& a, int d, std::mt19937_64& rng) {
    init_normal(a.Wq, d, d, rng);
    init_zeros(a.bq, 1, d);
    init_normal(a.Wk, d, d, rng);
    init_zeros(a.bk, 1, d);
    init_normal(a.Wv, d, d, rng);
    init_zeros(a.bv, 1, d);
    init_normal(a.Wo, d, d, rng);
    init_zeros(a.bo, 1, d);
}

void init_ln(LayerNormParams& ln, int d) {
    init_ones(ln.gain, 1, d);
    init_zeros(ln.bias, 1, d);
}

void init_ffn(FfnParams& p, int d, int ffn_dim, std::mt19937_64& rng) {
    init_normal(p.W1, d, ffn_dim, rng);
    init_zeros(p.b1, 1, ffn_dim);
    init_normal(p.W2, ffn_dim, d, rng);
    init_zeros(p.b2, 1, d);
}

void collect_attn(std::vector<Param*>& out, AttnParams& a) {
    out.insert(out.end(),
               {&a.Wq, &a.bq, &a.Wk, &a.bk, &a.Wv, &a.bv, &a.Wo, &a.bo});
}

} // namespace

LevTModel::LevTModel(LevTConfig config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)),
      impl_(std::make_shared<Impl>()) {
    config_.check();
    std::mt19937_64 rng(config_.seed);
    const int d = config_.d_model;
    init_normal(impl_->embedding, vocab_.size(), d, rng);
    impl_->enc_layers.resize(static_cast<size_t>(config_.n_enc_layers));
    for (auto& l : impl_->enc_layers) {
        init_ln(l.ln1, d);
        init_attn(l.attn, d, rng);
        init_ln(l.ln2, d);
        init_ffn(l.ffn, d, config_.ffn_dim, rng);
    }
    init_ln(impl_->enc_final, d);
    impl_->dec_layers.resize(static_cast<size_t>(config_.n_dec_layers));
    for (auto& l : impl_->dec_layers) {
        init_ln(l.ln1, d);
        init_attn(l.self_attn, d, rng);
        init_ln(l.ln2, d);
        init_attn(l.cross_attn, d, rng);
        init_ln(l.ln3, d);
        init_ffn(l.ffn, d, config_.ffn_dim, rng);
    }
    init_ln(impl_->dec_final, d);
    init_normal(impl_->W_del, d, 2, rng);
    init_normal(impl_->W_plh, 2 * d, config_.max_plh + 1, rng);
    init_normal(impl_->W_ins, d, vocab_.size(), rng);
}

std::vector<Param*> LevTModel::params() {
    std::vector<Param*> out;
    out.push_back(&impl_->embedding);
    for (auto& l : impl_->enc_layers) {
        out.push_back(&l.ln1.gain);
        out.push_back(&l.ln1.bias);
        collect_attn(out, l.attn);
        out.push_back(&l.ln2.gain);
        out.push_back(&l.ln2.bias);
        out.insert(out.end(),
                   {&l.ffn.W1, &l.ffn.b1, &l.ffn.W2, &l.ffn.b2});
    }
    out.push_back(&impl_->enc_final.gain);
    out.push_back(&impl_->enc_final.bias);
    for (auto& l : impl_->dec_layers) {
        out.push_back(&l.ln1.gain);
        out.push_back(&l.ln1.bias);
        collect_attn(out, l.self_attn);
        out.push_back(&l.ln2.gain);
        out.push_back(&l.ln2.bias);
        collect_attn(out, l.cross_attn);
        out.push_back(&l.ln3.gain);
        out.push_back(&l.ln3.bias);
        out.insert(out.end(),
                   {&l.ffn.W1, &l.ffn.b1, &l.ffn.W2, &l.ffn.b2});
    }
    out.push_back(&impl_->dec_final.gain);
    out.push_back(&impl_->dec_final.bias);
    out.push_back(&impl_->W_del);
    out.push_back(&impl_->W_plh);
    out.push_back(&impl_->W_ins);
    return out;
}

size_t LevTModel::param_count() {
    size_t n = 0;
    for (Param* p : params())
        n += static_cast<size_t>(p->value.size());
    return n;
}

Mat LevTModel::encode_context(const std::vector<int>& input_ids,
                              bool* truncated) {
    std::vector<int> ids = input_ids;
    bool trunc = false;
    if (static_cast<int>(ids.size()) > config_.max_seq_len) {
        ids.resize(static_cast<size_t>(config_.max_seq_len));
        ids.back() = EOS;
        trunc = true;
    }
    if (truncated)
        *truncated = trunc;
    Fwd f;
    int H = encoder_forward(f, *impl_, config_, ids);
    return f.tape.value(H);
}

Mat LevTModel::decoder_states(const std::vector<int>& ids, const Mat& H) {
    Fwd f;
    int Hn = f.tape.constant(H);
    int Z = decoder_forward(f, *impl_, config_, ids, Hn);
    return f.tape.value(Z);
}

Mat LevTModel::head_del(const Mat& z) const {
    return softmax_rows_plain(z * impl_->W_del.value);
}

Mat LevTModel::head_plh(const Mat& z) const {
    const Eigen::Index n = z.rows();
    if (n < 2)
        throw ArgumentError("head_plh: need at least 2 positions");
    Mat pairs(n - 1, 2 * z.cols());
    pairs << z.topRows(n - 1), z.bottomRows(n - 1);
    return softmax_rows_plain(pairs * impl_->W_plh.value);
}

Mat LevTModel::head_ins(const Mat& z_at_plh) const {
    if (z_at_plh.rows() == 0)
        return Mat(0, vocab_.size());
    return softmax_rows_plain(z_at_plh * impl_->W_ins.value);
}

namespace {

// Builds the post-deletion and with-placeholder stages for expert
// supervision, clipping placeholder counts to max_plh.
struct ExpertStages {
    TokenSequence kept;          // after expert deletion, no sentinels
    std::vector<int> clipped_counts;
    TokenSequence with_plh;      // no sentinels
    std::vector<int> plh_positions; // in sentinel-wrapped with_plh
    std::vector<std::string> ins_targets;
};

ExpertStages expert_stages(const TokenSequence& roll_in,
                           const TokenSequence& y_star,
                           const ExpertLabels& labels, int max_plh) {
    ExpertStages st;
    for (size_t i = 0; i < roll_in.size(); ++i)
        if (!labels.del_mask[i])
            st.kept.push_back(roll_in[i]);
    st.clipped_counts.resize(labels.plh_counts.size());
    size_t ins_cursor = 0;
    for (size_t g = 0; g < labels.plh_counts.size(); ++g) {
        int c = labels.plh_counts[g];
        int cc = std::min(c, max_plh); // gaps beyond K_max are unreachable
        st.clipped_counts[g] = cc;
        for (int i = 0; i < cc; ++i) {
            st.with_plh.push_back(kPlhToken);
            st.plh_positions.push_back(
                static_cast<int>(st.with_plh.size())); // +1 for BOS below
            st.ins_targets.push_back(labels.ins_tokens[ins_cursor + i]);
        }
        ins_cursor += static_cast<size_t>(c);
        if (g < st.kept.size())
            st.with_plh.push_back(st.kept[g]);
    }
    (void)y_star;
    return st;
}

} // namespace

double LevTModel::run_loss(const std::vector<TrainExample>& batch,
                           bool training, std::mt19937_64* rng) {
    if (batch.empty())
        throw ArgumentError("loss: batch is empty");
    Fwd f;
    f.training = training;
    f.dropout = training ? config_.dropout : 0.0;
    f.rng = rng;
    Tape& t = f.tape;

    auto encode_tokens = [this](const TokenSequence& tokens) {
        return vocab_.encode(tokens, false);
    };

    int total = -1;
    for (const auto& ex : batch) {
        int H = encoder_forward(f, *impl_, config_, ex.context_ids);
        auto labels = expert_labels(ex.roll_in, ex.y_star);

        int ex_loss = -1;
        auto add_term = [&](int term) {
            ex_loss = (ex_loss < 0) ? term : t.add(ex_loss, term);
        };

        // Deletion pass over the roll-in.
        {
            TokenSequence wrapped = wrap_sentinels(ex.roll_in);
            std::vector<int> ids = encode_tokens(wrapped);
            int Z = decoder_forward(f, *impl_, config_, ids, H);
            if (!ex.roll_in.empty()) {
                std::vector<int> idx(ex.roll_in.size());
                for (size_t i = 0; i < idx.size(); ++i)
                    idx[i] = static_cast<int>(i) + 1;
                int logits =
                    t.matmul(t.rows(Z, idx), f.p(impl_->W_del));
                add_term(t.cross_entropy_rows(logits, labels.del_mask));
            }
        }

        auto st = expert_stages(ex.roll_in, ex.y_star, labels,
                                config_.max_plh);

        // Placeholder pass over the expert-deleted sequence.
        {
            TokenSequence wrapped = wrap_sentinels(st.kept);
            std::vector<int> ids = encode_tokens(wrapped);
            int Z = decoder_forward(f, *impl_, config_, ids, H);
            const int n = static_cast<int>(ids.size());
            std::vector<int> left(static_cast<size_t>(n - 1)),
                right(static_cast<size_t>(n - 1));
            for (int i = 0; i < n - 1; ++i) {
                left[size_t(i)] = i;
                right[size_t(i)] = i + 1;
            }
            int pairs = t.hcat(t.rows(Z, left), t.rows(Z, right));
            int logits = t.matmul(pairs, f.p(impl_->W_plh));
            add_term(t.cross_entropy_rows(logits, st.clipped_counts));
        }

        // Insertion pass over the sequence with expert placeholders.
        if (!st.plh_positions.empty()) {
            TokenSequence wrapped = wrap_sentinels(st.with_plh);
            std::vector<int> ids = encode_tokens(wrapped);
            int Z = decoder_forward(f, *impl_, config_, ids, H);
            int picked = t.rows(Z, st.plh_positions);
            int logits = t.matmul(picked, f.p(impl_->W_ins));
            std::vector<int> targets;
            targets.reserve(st.ins_targets.size());
            for (const auto& tok : st.ins_targets)
                targets.push_back(vocab_.id_of(tok));
            add_term(t.cross_entropy_rows(logits, std::move(targets)));
        }

        if (ex_loss < 0)
            ex_loss = t.constant(Mat::Zero(1, 1));
        total = (total < 0) ? ex_loss : t.add(total, ex_loss);
    }
    int avg = t.scale(total, 1.0 / static_cast<double>(batch.size()));
    double loss = t.value(avg)(0, 0);
    if (training)
        t.backward(avg);
    return loss;
}

double LevTModel::loss(const std::vector<TrainExample>& batch) {
    return run_loss(batch, false, nullptr);
}

double LevTModel::loss_and_grad(const std::vector<TrainExample>& batch,
                                std::mt19937_64& dropout_rng) {
    return run_loss(batch, true, &dropout_rng);
}

// ---------------------------------------------------------------------
// Refinement

ModelRefinePolicy::ModelRefinePolicy(LevTModel& model,
                                     const std::vector<int>& context_ids)
    : model_(model), H_(model.encode_context(context_ids)) {}

Mat ModelRefinePolicy::states(const TokenSequence& tokens) {
    std::vector<int> ids = model_.vocab().encode(tokens, false);
    return model_.decoder_states(ids, H_);
}

std::vector<int> ModelRefinePolicy::delete_mask(const TokenSequence& cur) {
    Mat probs = model_.head_del(states(cur));
    std::vector<int> mask;
    for (size_t i = 1; i + 1 < cur.size(); ++i) {
        auto r = probs.row(static_cast<Eigen::Index>(i));
        mask.push_back(r(1) > r(0) ? 1 : 0);
    }
    return mask;
}

std::vector<int>
ModelRefinePolicy::placeholder_counts(const TokenSequence& after_del) {
    Mat probs = model_.head_plh(states(after_del));
    std::vector<int> counts;
    for (Eigen::Index g = 0; g < probs.rows(); ++g) {
        Eigen::Index best;
        probs.row(g).maxCoeff(&best);
        counts.push_back(static_cast<int>(best));
    }
    return counts;
}

TokenSequence
ModelRefinePolicy::insert_tokens(const TokenSequence& with_plh) {
    std::vector<int> plh_pos;
    for (size_t i = 0; i < with_plh.size(); ++i)
        if (with_plh[i] == kPlhToken)
            plh_pos.push_back(static_cast<int>(i));
    if (plh_pos.empty())
        return {};
    Mat z = states(with_plh);
    Mat picked(static_cast<Eigen::Index>(plh_pos.size()), z.cols());
    for (size_t i = 0; i < plh_pos.size(); ++i)
        picked.row(static_cast<Eigen::Index>(i)) = z.row(plh_pos[i]);
    Mat probs = model_.head_ins(picked);
    TokenSequence out;
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        // Specials never materialize as inserted code tokens.
        Eigen::Index best = -1;
        double best_p = -1.0;
        for (Eigen::Index c = PLH + 1; c < probs.cols(); ++c)
            if (probs(r, c) > best_p) {
                best_p = probs(r, c);
                best = c;
            }
        out.push_back(best >= 0
                          ? model_.vocab().token_of(static_cast<int>(best))
                          : std::string(kUnkToken));
    }
    return out;
}

std::vector<int>
OracleRefinePolicy::delete_mask(const TokenSequence& current) {
    return expert_labels(strip_sentinels(current), target_).del_mask;
}

std::vector<int>
OracleRefinePolicy::placeholder_counts(const TokenSequence& after_del) {
    return expert_labels(strip_sentinels(after_del), target_).plh_counts;
}

TokenSequence
OracleRefinePolicy::insert_tokens(const TokenSequence& with_plh) {
    TokenSequence kept;
    for (const auto& t : with_plh)
        if (t != kBosToken && t != kEosToken && t != kPlhToken)
            kept.push_back(t);
    auto labels = expert_labels(kept, target_);
    // Per-gap cursors into the expert insertion list.
    std::vector<size_t> gap_start(labels.plh_counts.size() + 1, 0);
    for (size_t g = 0; g < labels.plh_counts.size(); ++g)
        gap_start[g + 1] =
            gap_start[g] + static_cast<size_t>(labels.plh_counts[g]);
    std::vector<size_t> used(labels.plh_counts.size(), 0);
    TokenSequence out;
    size_t gap = 0;
    for (const auto& t : with_plh) {
        if (t == kBosToken)
            continue;
        if (t == kEosToken)
            break;
        if (t == kPlhToken) {
            if (gap < labels.plh_counts.size() &&
                used[gap] < static_cast<size_t>(labels.plh_counts[gap]))
                out.push_back(
                    labels.ins_tokens[gap_start[gap] + used[gap]++]);
            else
                out.push_back(kUnkToken);
        } else {
            ++gap;
        }
    }
    return out;
}

TokenSequence refine(RefinePolicy& policy, const TokenSequence& v_gen,
                     int iterations, int max_plh, int max_seq_len,
                     RefinementTrace* trace) {
    if (iterations < 1)
        throw ArgumentError("refine: iterations must be >= 1");
    TokenSequence cur = wrap_sentinels(v_gen);
    bool truncated = false;
    if (static_cast<int>(cur.size()) > max_seq_len) {
        cur.resize(static_cast<size_t>(max_seq_len));
        cur.back() = kEosToken;
        truncated = true;
    }
    for (int it = 0; it < iterations; ++it) {
        RefinementStep step;
        step.input = cur;
        step.truncated = truncated;

        step.del_decisions = policy.delete_mask(cur);
        TokenSequence after_del{kBosToken};
        for (size_t i = 1; i + 1 < cur.size(); ++i)
            if (i - 1 >= step.del_decisions.size() ||
                !step.del_decisions[i - 1])
                after_del.push_back(cur[i]);
        after_del.push_back(kEosToken);
        step.after_deletion = after_del;

        step.plh_counts = policy.placeholder_counts(after_del);
        TokenSequence with_plh;
        for (size_t i = 0; i < after_del.size(); ++i) {
            with_plh.push_back(after_del[i]);
            if (i + 1 < after_del.size()) {
                int c = (i < step.plh_counts.size()) ? step.plh_counts[i]
                                                     : 0;
                c = std::min(c, max_plh);
                for (int j = 0; j < c; ++j) {
                    if (static_cast<int>(with_plh.size()) + 1 >=
                        max_seq_len) {
                        step.truncated = true;
                        break;
                    }
                    with_plh.push_back(kPlhToken);
                }
            }
        }
        step.with_placeholders = with_plh;

        step.inserted = policy.insert_tokens(with_plh);
        TokenSequence out;
        size_t ins_i = 0;
        for (const auto& t : with_plh) {
            if (t == kPlhToken) {
                if (ins_i < step.inserted.size() &&
                    step.inserted[ins_i] != kPlhToken)
                    out.push_back(step.inserted[ins_i]);
                ++ins_i;
            } else {
                out.push_back(t);
            }
        }
        step.output = out;
        if (trace)
            trace->steps.push_back(step);
        if (out == cur)
            break; // stable; further passes would repeat
        cur = out;
    }
    return strip_sentinels(cur);
}

TokenSequence refine_with_model(LevTModel& model, const TokenSequence& v_gen,
                                const TokenSequence& context_tokens,
                                int iterations, RefinementTrace* trace) {
    std::vector<int> ctx_ids =
        model.vocab().encode(context_tokens, true);
    if (static_cast<int>(ctx_ids.size()) > model.config().max_seq_len) {
        ctx_ids.resize(static_cast<size_t>(model.config().max_seq_len));
        ctx_ids.back() = EOS;
    }
    ModelRefinePolicy policy(model, ctx_ids);
    return refine(policy, v_gen, iterations, model.config().max_plh,
                  model.config().max_seq_len, trace);
}

// ---------------------------------------------------------------------
// Training

TokenSequence roll_in(const TokenSequence& y_star, RollInMode mode,
                      double noise_p, std::uint64_t seed, LevTModel* model,
                      const std::vector<int>* context_ids) {
    if (noise_p < 0.0 || noise_p > 1.0)
        throw ArgumentError("roll_in: noise_p must be in [0,1]");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution drop_tok(noise_p);
    TokenSequence noised;
    for (const auto& t : y_star)
        if (noise_p == 0.0 || !drop_tok(rng))
            noised.push_back(t);
    if (mode == RollInMode::drop)
        return noised;
    if (!model || !context_ids)
        throw ArgumentError("roll_in: model mode needs a model and context");
    ModelRefinePolicy policy(*model, *context_ids);
    TokenSequence wrapped = wrap_sentinels(noised);
    auto mask = policy.delete_mask(wrapped);
    TokenSequence out;
    for (size_t i = 0; i < noised.size(); ++i)
        if (i >= mask.size() || !mask[i])
            out.push_back(noised[i]);
    return out;
}

namespace {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;

    void step(std::vector<Param*>& params, double lr) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, double(t));
        double bc2 = 1.0 - std::pow(beta2, double(t));
        for (Param* p : params) {
            p->adam_m = beta1 * p->adam_m + (1.0 - beta1) * p->grad;
            p->adam_v = beta2 * p->adam_v +
                        (1.0 - beta2) * p->grad.cwiseProduct(p->grad);
            Mat mhat = p->adam_m / bc1;
            Mat vhat = p->adam_v / bc2;
            p->value.array() -=
                lr * mhat.array() / (vhat.array().sqrt() + eps);
        }
    }
};

struct PreparedRecord {
    std::vector<int> context_ids;
    TokenSequence v_gen;
    TokenSequence y_star;
};

} // namespace

std::vector<int> encoder_input_ids(const PatchRecord& record,
                                   const Vocabulary& vocab,
                                   const ModalityFlags& flags,
                                   int max_seq_len) {
    ModalityFlags f = flags;
    f.retrieved = false;
    MultiModalInput mm = assemble(record, {}, f);
    std::vector<int> ids = vocab.encode(mm.serialize(), true);
    if (static_cast<int>(ids.size()) > max_seq_len) {
        ids.resize(static_cast<size_t>(max_seq_len));
        ids.back() = EOS;
    }
    return ids;
}

TrainHistory train(LevTModel& model, const Dataset& train_set,
                   const Dataset& val_set, const TrainOptions& options,
                   std::uint64_t seed) {
    if (train_set.records.empty())
        throw ArgumentError("train: empty training set");
    const auto& vocab = model.vocab();
    const auto& cfg = model.config();

    auto prepare = [&](const Dataset& ds) {
        std::vector<PreparedRecord> out;
        for (const auto& r : ds.records) {
            PreparedRecord p;
            p.context_ids = encoder_input_ids(
                r, vocab, options.encoder_modalities, cfg.max_seq_len);
            p.v_gen = tokenize(r.buggy_only.empty() ? r.prev_code
                                                    : r.buggy_only);
            p.y_star = tokenize(r.fixed_code);
            out.push_back(std::move(p));
        }
        return out;
    };
    auto train_recs = prepare(train_set);
    auto val_recs = prepare(val_set);

    auto params = model.params();
    AdamState adam;
    std::mt19937_64 rng(seed);
    std::mt19937_64 dropout_rng(seed ^ 0x9e3779b97f4a7c15ull);

    TrainHistory history;
    std::vector<Mat> best_values;
    int stagnant = 0;

    std::vector<size_t> order(train_recs.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int n_batches = 0;
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(options.batch_size)) {
            std::vector<TrainExample> batch;
            size_t stop = std::min(
                order.size(),
                start + static_cast<size_t>(options.batch_size));
            for (size_t i = start; i < stop; ++i) {
                const auto& rec = train_recs[order[i]];
                TrainExample ex;
                ex.context_ids = rec.context_ids;
                ex.y_star = rec.y_star;
                if (coin(rng) < options.vgen_rollin_prob)
                    ex.roll_in = rec.v_gen;
                else
                    ex.roll_in = roll_in(rec.y_star, RollInMode::drop,
                                         options.noise_p, rng());
                batch.push_back(std::move(ex));
            }
            for (Param* p : params)
                p->zero_grad();
            double loss = model.loss_and_grad(batch, dropout_rng);
            if (!std::isfinite(loss))
                throw TrainingError(
                    "non-finite loss at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(n_batches));
            adam.step(params, options.lr);
            epoch_loss += loss;
            ++n_batches;
        }

        // Validation exact match via one-pass refinement.
        double em = 0.0;
        if (!val_recs.empty()) {
            size_t hits = 0;
            for (const auto& rec : val_recs) {
                ModelRefinePolicy policy(model, rec.context_ids);
                TokenSequence out =
                    refine(policy, rec.v_gen,
                           options.val_refine_iterations, cfg.max_plh,
                           cfg.max_seq_len);
                if (out == rec.y_star)
                    ++hits;
            }
            em = double(hits) / double(val_recs.size());
        }

        history.epochs.push_back(
            {epoch_loss / std::max(1, n_batches), em});
        if (history.best_epoch < 0 || em > history.best_val_exact_match) {
            history.best_epoch = epoch;
            history.best_val_exact_match = em;
            best_values.clear();
            for (Param* p : params)
                best_values.push_back(p->value);
            stagnant = 0;
        } else {
            ++stagnant;
        }
        if (stagnant >= options.patience)
            break;
    }

    if (!best_values.empty())
        for (size_t i = 0; i < params.size(); ++i)
            params[i]->value = best_values[i];
    return history;
}

// ---------------------------------------------------------------------
// Checkpoint: one JSON header line, then the little-endian 64-bit float
// parameter block in params() order.

void save_checkpoint(LevTModel& model, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write checkpoint: " + path);
    const auto& cfg = model.config();
    nlohmann::json header{
        {"config",
         {{"d_model", cfg.d_model},
          {"n_heads", cfg.n_heads},
          {"n_enc_layers", cfg.n_enc_layers},
          {"n_dec_layers", cfg.n_dec_layers},
          {"ffn_dim", cfg.ffn_dim},
          {"max_plh", cfg.max_plh},
          {"max_seq_len", cfg.max_seq_len},
          {"dropout", cfg.dropout},
          {"seed", cfg.seed}}},
        {"vocab", model.vocab().tokens()},
        {"vocab_hash", model.vocab().content_hash()},
        {"param_count", model.param_count()}};
    f << header.dump() << "\n";
    for (Param* p : model.params()) {
        // Eigen is column-major; serialize in that storage order.
        f.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(sizeof(double) *
                                             size_t(p->value.size())));
    }
    if (!f)
        throw IoError("checkpoint write failed: " + path);
}

LevTModel load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(f, line))
        throw CorruptionError("checkpoint header missing: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorruptionError(std::string("checkpoint header unreadable: ") +
                              e.what());
    }
    LevTConfig cfg;
    const auto& jc = header.at("config");
    cfg.d_model = jc.at("d_model").get<int>();
    cfg.n_heads = jc.at("n_heads").get<int>();
    cfg.n_enc_layers = jc.at("n_enc_layers").get<int>();
    cfg.n_dec_layers = jc.at("n_dec_layers").get<int>();
    cfg.ffn_dim = jc.at("ffn_dim").get<int>();
    cfg.max_plh = jc.at("max_plh").get<int>();
    cfg.max_seq_len = jc.at("max_seq_len").get<int>();
    cfg.dropout = jc.at("dropout").get<double>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();
    Vocabulary vocab = Vocabulary::from_tokens(
        header.at("vocab").get<std::vector<std::string>>());
    if (header.contains("vocab_hash") &&
        header.at("vocab_hash").get<std::uint64_t>() !=
            vocab.content_hash())
        throw CorruptionError("checkpoint vocab hash mismatch: " + path);
    LevTModel model(cfg, std::move(vocab));
    size_t expected = header.at("param_count").get<size_t>();
    if (model.param_count() != expected)
        throw CorruptionError("checkpoint parameter count mismatch: " +
                              path);
    for (Param* p : model.params()) {
        f.read(reinterpret_cast<char*>(p->value.data()),
               static_cast<std::streamsize>(sizeof(double) *
                                            size_t(p->value.size())));
        if (!f)
            throw CorruptionError("checkpoint truncated: " + path);
    }
    return model;
}

} // namespace sargam
