#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sargam/corpus.hpp"
#include "sargam/search.hpp"
#include "sargam/tokenize.hpp"

namespace sargam {

struct ModalityFlags {
    bool location = true;
    bool context = true;
    bool intent = true;
    bool retrieved = true;

    bool any() const { return location || context || intent || retrieved; }
};

// Modalities joined with the literal <s> separator, fixed order:
// location, context, intent, retrieved patches (ascending distance).
struct MultiModalInput {
    TokenSequence location;
    TokenSequence context;
    TokenSequence intent;
    std::vector<TokenSequence> retrieved;
    ModalityFlags flags;

    TokenSequence serialize() const;
};

MultiModalInput assemble(const PatchRecord& record,
                         const std::vector<RetrievedPatch>& retrieved,
                         const ModalityFlags& flags);

// Inverts serialize() given the modality flags; leftover separator
// segments are retrieved patches.
MultiModalInput deserialize(const TokenSequence& serialized,
                            const ModalityFlags& flags);

// Completion-style prompt with the /// comment layout: task comment,
// method with the buggy-line marker, optional retrieved patch section,
// and the context lines preceding the buggy line.
std::string build_prompt(const PatchRecord& record,
                         const std::optional<TokenSequence>& retrieved_patch);

struct GenCandidate {
    TokenSequence tokens;
    int rank = 1; // 1-based, contiguous
    std::string source; // retrieval_copy | identity | remote
};

struct GenInput {
    MultiModalInput input;
    std::string prompt; // remote generators consume this
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string name() const = 0;
    virtual std::vector<GenCandidate> generate(const GenInput& in,
                                               size_t n) const = 0;
};

// Returns the location modality as the single candidate.
class IdentityGenerator : public Generator {
public:
    std::string name() const override { return "identity"; }
    std::vector<GenCandidate> generate(const GenInput& in,
                                       size_t n) const override;
};

// Returns retrieved patches in distance order.
class RetrievalCopyGenerator : public Generator {
public:
    std::string name() const override { return "retrieval_copy"; }
    std::vector<GenCandidate> generate(const GenInput& in,
                                       size_t n) const override;
};

struct RemoteConfig {
    std::string endpoint;          // http://host:port
    std::string complete_path = "/complete";
    std::string embed_path = "/embed";
    int timeout_seconds = 30;
    int max_retries = 3;
    int max_tokens = 128;
    // API key read from SARGAM_API_KEY when set.
};

// POST {prompt, n, max_tokens, temperature} -> {completions: [text]};
// takes the first line of each completion as the patch.
class RemoteGenerator : public Generator {
public:
    explicit RemoteGenerator(RemoteConfig config)
        : config_(std::move(config)) {}

    std::string name() const override { return "remote"; }
    std::vector<GenCandidate> generate(const GenInput& in,
                                       size_t n) const override;

private:
    RemoteConfig config_;
};

// PLBART-like embedding service behind the same HTTP protocol:
// POST {texts: [text]} -> {embeddings: [[...]], dim}.
class RemoteEmbedder : public Embedder {
public:
    RemoteEmbedder(RemoteConfig config, std::string embedder_id, size_t dim)
        : config_(std::move(config)), id_(std::move(embedder_id)),
          dim_(dim) {}

    std::string id() const override { return id_; }
    size_t dim() const override { return dim_; }
    EmbeddingVector embed(const TokenSequence& tokens) const override;

private:
    RemoteConfig config_;
    std::string id_;
    size_t dim_;
};

std::unique_ptr<Generator> make_generator(const std::string& name,
                                          const RemoteConfig& remote);

} // namespace sargam
