#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sargam/corpus.hpp"
#include "sargam/tokenize.hpp"

namespace sargam {

using EmbeddingVector = std::vector<double>;

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual size_t dim() const = 0;
    virtual EmbeddingVector embed(const TokenSequence& tokens) const = 0;
};

// TF-IDF bag of tokens: tf = raw count, idf = ln((1+N)/(1+df)) + 1,
// L2-normalized. Tokens unseen at build time contribute nothing.
class TfidfEmbedder : public Embedder {
public:
    static TfidfEmbedder build(const std::vector<TokenSequence>& corpus);

    std::string id() const override { return "tfidf"; }
    size_t dim() const override { return axes_.size(); }
    EmbeddingVector embed(const TokenSequence& tokens) const override;

    const std::vector<std::string>& axis_tokens() const { return axes_; }
    const std::vector<double>& idf() const { return idf_; }

    static TfidfEmbedder from_state(std::vector<std::string> axes,
                                    std::vector<double> idf);

private:
    std::vector<std::string> axes_; // lexicographically sorted
    std::vector<double> idf_;
    std::unordered_map<std::string, size_t> axis_of_;
};

struct IndexEntry {
    std::string record_id;
    EmbeddingVector v0_embedding;
    TokenSequence v1_tokens;
};

struct PatchIndex {
    std::vector<IndexEntry> entries;
    std::string embedder_id;
    size_t dim = 0;
};

struct RetrievedPatch {
    TokenSequence patch; // v1
    double distance = 0.0;
    std::string record_id;
};

// 1 - x.y/(|x||y|); 1 when either norm is zero.
double cosine_distance(const EmbeddingVector& x, const EmbeddingVector& y);

PatchIndex build_index(const Dataset& dataset, const Embedder& embedder);

// Brute-force scan, ascending distance, ties by record_id.
std::vector<RetrievedPatch> retrieve(const TokenSequence& query,
                                     const PatchIndex& index, size_t k,
                                     const Embedder& embedder);

void save_index(const PatchIndex& index, const std::string& path,
                const TfidfEmbedder* embedder_state = nullptr);
PatchIndex load_index(const std::string& path);

// Rebuilds the embedder persisted alongside a TF-IDF index file.
std::unique_ptr<TfidfEmbedder> load_index_embedder(const std::string& path);

} // namespace sargam
