#include "sargam/generate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include <httplib.h>

#include "sargam/errors.hpp"

namespace sargam {

namespace {

using nlohmann::json;

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> nonblank_lines(const std::string& text) {
    std::vector<std::string> out;
    for (auto& l : split_lines(text))
        if (l.find_first_not_of(" \t") != std::string::npos)
            out.push_back(l);
    return out;
}

// POSTs a JSON body with retries and exponential backoff; returns the
// parsed response body.
json post_json(const RemoteConfig& cfg, const std::string& path,
               const json& body) {
    std::string err;
    for (int attempt = 0; attempt < std::max(1, cfg.max_retries); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(100 << (attempt - 1)));
        httplib::Client client(cfg.endpoint);
        client.set_read_timeout(cfg.timeout_seconds, 0);
        client.set_connection_timeout(cfg.timeout_seconds, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv("SARGAM_API_KEY"))
            headers.emplace("Authorization", std::string("Bearer ") + key);
        auto res = client.Post(path, headers, body.dump(),
                               "application/json");
        if (!res) {
            err = "transport failure: " + httplib::to_string(res.error());
            continue; // transient, retry
        }
        if (res->status >= 500) {
            err = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw GenerationError("remote returned HTTP " +
                                      std::to_string(res->status),
                                  res->status);
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw GenerationError(std::string("remote response unreadable: ") +
                                  e.what());
        }
    }
    throw GenerationError("remote unavailable after retries: " + err);
}

} // namespace

TokenSequence MultiModalInput::serialize() const {
    std::vector<const TokenSequence*> parts;
    if (flags.location)
        parts.push_back(&location);
    if (flags.context)
        parts.push_back(&context);
    if (flags.intent)
        parts.push_back(&intent);
    TokenSequence out;
    bool first = true;
    for (const auto* p : parts) {
        if (!first)
            out.push_back(kSepToken);
        out.insert(out.end(), p->begin(), p->end());
        first = false;
    }
    if (flags.retrieved) {
        for (const auto& r : retrieved) {
            if (!first)
                out.push_back(kSepToken);
            out.insert(out.end(), r.begin(), r.end());
            first = false;
        }
    }
    return out;
}

MultiModalInput assemble(const PatchRecord& record,
                         const std::vector<RetrievedPatch>& retrieved,
                         const ModalityFlags& flags) {
    if (!flags.any())
        throw ArgumentError("assemble: all modalities disabled");
    MultiModalInput in;
    in.flags = flags;
    if (flags.location)
        in.location = tokenize(record.buggy_only);
    if (flags.context)
        in.context = tokenize(record.prev_code);
    if (flags.intent)
        in.intent = tokenize(record.commit_msg);
    if (flags.retrieved) {
        auto sorted = retrieved;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const RetrievedPatch& a, const RetrievedPatch& b) {
                             return a.distance < b.distance;
                         });
        for (const auto& r : sorted)
            in.retrieved.push_back(r.patch);
    }
    return in;
}

MultiModalInput deserialize(const TokenSequence& serialized,
                            const ModalityFlags& flags) {
    if (!flags.any())
        throw ArgumentError("deserialize: all modalities disabled");
    std::vector<TokenSequence> segments(1);
    for (const auto& t : serialized) {
        if (t == kSepToken)
            segments.emplace_back();
        else
            segments.back().push_back(t);
    }
    MultiModalInput in;
    in.flags = flags;
    size_t i = 0;
    auto next = [&]() -> TokenSequence {
        if (i < segments.size())
            return segments[i++];
        return {};
    };
    if (flags.location)
        in.location = next();
    if (flags.context)
        in.context = next();
    if (flags.intent)
        in.intent = next();
    if (flags.retrieved)
        while (i < segments.size())
            in.retrieved.push_back(segments[i++]);
    return in;
}

std::string build_prompt(const PatchRecord& record,
                         const std::optional<TokenSequence>& retrieved_patch) {
    if (record.buggy_only.empty())
        throw ArgumentError("build_prompt: record has no buggy_only");
    auto method_lines = split_lines(record.prev_code);
    auto buggy_lines = nonblank_lines(record.buggy_only);
    if (buggy_lines.empty())
        throw ArgumentError("build_prompt: buggy_only is blank");

    // Token-level match of the buggy block inside the method.
    auto line_tokens = [](const std::string& l) { return tokenize(l); };
    size_t start = std::string::npos;
    for (size_t s = 0; s + buggy_lines.size() <= method_lines.size(); ++s) {
        bool ok = true;
        for (size_t i = 0; i < buggy_lines.size(); ++i) {
            if (line_tokens(method_lines[s + i]) !=
                line_tokens(buggy_lines[i])) {
                ok = false;
                break;
            }
        }
        if (ok) {
            start = s;
            break;
        }
    }
    if (start == std::string::npos)
        throw LocalizationError(
            "build_prompt: buggy line not found in prev_code for record " +
            record.id);
    size_t end = start + buggy_lines.size(); // one past the buggy block

    std::ostringstream out;
    out << "/// fix the bug in the following method\n";
    for (size_t i = 0; i < method_lines.size(); ++i) {
        out << method_lines[i] << "\n";
        if (i + 1 == end)
            out << "/// buggy line is here\n";
    }
    if (retrieved_patch) {
        out << "/// A possible patch for buggy line\n";
        out << join_tokens(*retrieved_patch) << "\n";
    }
    out << "/// change the buggy line to fix the bug:\n";
    for (size_t i = 0; i < start; ++i)
        out << method_lines[i] << "\n";
    return out.str();
}

std::vector<GenCandidate> IdentityGenerator::generate(const GenInput& in,
                                                      size_t n) const {
    if (n == 0)
        throw ArgumentError("generate: n must be >= 1");
    GenCandidate c;
    c.tokens = in.input.location;
    c.rank = 1;
    c.source = "identity";
    return {c};
}

std::vector<GenCandidate>
RetrievalCopyGenerator::generate(const GenInput& in, size_t n) const {
    if (n == 0)
        throw ArgumentError("generate: n must be >= 1");
    std::vector<GenCandidate> out;
    for (const auto& patch : in.input.retrieved) {
        if (out.size() >= n)
            break;
        GenCandidate c;
        c.tokens = patch;
        c.rank = static_cast<int>(out.size()) + 1;
        c.source = "retrieval_copy";
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<GenCandidate> RemoteGenerator::generate(const GenInput& in,
                                                    size_t n) const {
    if (n == 0)
        throw ArgumentError("generate: n must be >= 1");
    json body{{"prompt", in.prompt},
              {"n", n},
              {"max_tokens", config_.max_tokens},
              {"temperature", n > 1 ? 0.8 : 0.0}};
    json resp = post_json(config_, config_.complete_path, body);
    if (!resp.contains("completions") || !resp["completions"].is_array())
        throw GenerationError("remote response lacks completions array");
    std::vector<GenCandidate> out;
    for (const auto& item : resp["completions"]) {
        if (out.size() >= n)
            break;
        std::string text = item.get<std::string>();
        std::string first_line = text.substr(0, text.find('\n'));
        TokenSequence tokens = tokenize(first_line);
        if (tokens.empty()) {
            std::cerr << "warning: remote returned an empty completion; "
                         "skipped\n";
            continue;
        }
        GenCandidate c;
        c.tokens = std::move(tokens);
        c.rank = static_cast<int>(out.size()) + 1;
        c.source = "remote";
        out.push_back(std::move(c));
    }
    return out;
}

EmbeddingVector RemoteEmbedder::embed(const TokenSequence& tokens) const {
    json body{{"texts", json::array({join_tokens(tokens)})}};
    json resp = post_json(config_, config_.embed_path, body);
    if (!resp.contains("embeddings") || resp["embeddings"].empty())
        throw GenerationError("remote response lacks embeddings");
    auto v = resp["embeddings"][0].get<EmbeddingVector>();
    if (v.size() != dim_)
        throw GenerationError("remote embedding dim " +
                              std::to_string(v.size()) + " != " +
                              std::to_string(dim_));
    return v;
}

std::unique_ptr<Generator> make_generator(const std::string& name,
                                          const RemoteConfig& remote) {
    if (name == "identity")
        return std::make_unique<IdentityGenerator>();
    if (name == "retrieval_copy")
        return std::make_unique<RetrievalCopyGenerator>();
    if (name == "remote")
        return std::make_unique<RemoteGenerator>(remote);
    throw ArgumentError("unknown generator: " + name);
}

} // namespace sargam
