#include "sargam/search.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "sargam/errors.hpp"

namespace sargam {

namespace {
using nlohmann::json;
}

TfidfEmbedder TfidfEmbedder::build(const std::vector<TokenSequence>& corpus) {
    if (corpus.empty())
        throw ArgumentError("tfidf build: corpus is empty");
    std::map<std::string, size_t> df;
    for (const auto& doc : corpus) {
        std::set<std::string> uniq(doc.begin(), doc.end());
        for (const auto& t : uniq)
            ++df[t];
    }
    TfidfEmbedder e;
    const double n = static_cast<double>(corpus.size());
    for (const auto& [tok, d] : df) { // std::map gives sorted axes
        e.axis_of_[tok] = e.axes_.size();
        e.axes_.push_back(tok);
        e.idf_.push_back(std::log((1.0 + n) / (1.0 + double(d))) + 1.0);
    }
    return e;
}

TfidfEmbedder TfidfEmbedder::from_state(std::vector<std::string> axes,
                                        std::vector<double> idf) {
    if (axes.size() != idf.size())
        throw CorruptionError("tfidf state: axes/idf size mismatch");
    TfidfEmbedder e;
    e.axes_ = std::move(axes);
    e.idf_ = std::move(idf);
    for (size_t i = 0; i < e.axes_.size(); ++i)
        e.axis_of_[e.axes_[i]] = i;
    return e;
}

EmbeddingVector TfidfEmbedder::embed(const TokenSequence& tokens) const {
    EmbeddingVector v(axes_.size(), 0.0);
    for (const auto& t : tokens) {
        auto it = axis_of_.find(t);
        if (it != axis_of_.end())
            v[it->second] += idf_[it->second];
    }
    double norm2 = 0.0;
    for (double x : v)
        norm2 += x * x;
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v)
            x *= inv;
    }
    return v; // all-zero stays all-zero
}

double cosine_distance(const EmbeddingVector& x, const EmbeddingVector& y) {
    if (x.size() != y.size())
        throw ArgumentError("cosine_distance: dimension mismatch");
    double dot = 0.0, nx = 0.0, ny = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if (nx == 0.0 || ny == 0.0)
        return 1.0;
    return 1.0 - dot / (std::sqrt(nx) * std::sqrt(ny));
}

PatchIndex build_index(const Dataset& dataset, const Embedder& embedder) {
    PatchIndex index;
    index.embedder_id = embedder.id();
    index.dim = embedder.dim();
    for (const auto& r : dataset.records) {
        IndexEntry e;
        e.record_id = r.id;
        e.v0_embedding = embedder.embed(tokenize(r.prev_code));
        e.v1_tokens = tokenize(r.fixed_code);
        index.entries.push_back(std::move(e));
    }
    return index;
}

std::vector<RetrievedPatch> retrieve(const TokenSequence& query,
                                     const PatchIndex& index, size_t k,
                                     const Embedder& embedder) {
    if (k == 0)
        throw ArgumentError("retrieve: k must be positive");
    if (embedder.id() != index.embedder_id)
        throw IndexError("retrieve: embedder \"" + embedder.id() +
                         "\" does not match index \"" + index.embedder_id +
                         "\"");
    EmbeddingVector q = embedder.embed(query);
    std::vector<RetrievedPatch> all;
    all.reserve(index.entries.size());
    for (const auto& e : index.entries) {
        RetrievedPatch r;
        r.patch = e.v1_tokens;
        r.distance = cosine_distance(q, e.v0_embedding);
        r.record_id = e.record_id;
        all.push_back(std::move(r));
    }
    std::sort(all.begin(), all.end(),
              [](const RetrievedPatch& a, const RetrievedPatch& b) {
                  if (a.distance != b.distance)
                      return a.distance < b.distance;
                  return a.record_id < b.record_id;
              });
    if (all.size() > k)
        all.resize(k);
    return all;
}

void save_index(const PatchIndex& index, const std::string& path,
                const TfidfEmbedder* embedder_state) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write index: " + path);
    json header{{"embedder_id", index.embedder_id},
                {"dim", index.dim},
                {"count", index.entries.size()}};
    if (embedder_state) {
        header["embedder_state"] = {{"tokens", embedder_state->axis_tokens()},
                                    {"idf", embedder_state->idf()}};
    }
    f << header.dump() << "\n";
    for (const auto& e : index.entries) {
        json j{{"record_id", e.record_id},
               {"v0_embedding", e.v0_embedding},
               {"v1_tokens", e.v1_tokens}};
        f << j.dump() << "\n";
    }
    if (!f)
        throw IoError("write failed: " + path);
}

namespace {

json read_index_header(std::ifstream& f, const std::string& path) {
    std::string line;
    if (!std::getline(f, line))
        throw CorruptionError("index file is empty: " + path);
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw CorruptionError("index header unreadable: " +
                              std::string(e.what()));
    }
}

} // namespace

PatchIndex load_index(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open index: " + path);
    json header = read_index_header(f, path);
    PatchIndex index;
    index.embedder_id = header.at("embedder_id").get<std::string>();
    index.dim = header.at("dim").get<size_t>();
    size_t count = header.at("count").get<size_t>();
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw CorruptionError("index entry unreadable: " +
                                  std::string(e.what()));
        }
        IndexEntry e;
        e.record_id = j.at("record_id").get<std::string>();
        e.v0_embedding = j.at("v0_embedding").get<EmbeddingVector>();
        e.v1_tokens = j.at("v1_tokens").get<TokenSequence>();
        if (e.v0_embedding.size() != index.dim)
            throw CorruptionError("index entry " + e.record_id +
                                  ": embedding dim " +
                                  std::to_string(e.v0_embedding.size()) +
                                  " != " + std::to_string(index.dim));
        index.entries.push_back(std::move(e));
    }
    if (index.entries.size() != count)
        throw CorruptionError("index truncated: header count " +
                              std::to_string(count) + ", found " +
                              std::to_string(index.entries.size()));
    return index;
}

std::unique_ptr<TfidfEmbedder> load_index_embedder(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open index: " + path);
    json header = read_index_header(f, path);
    if (!header.contains("embedder_state"))
        throw CorruptionError("index has no persisted embedder state: " +
                              path);
    auto& st = header.at("embedder_state");
    return std::make_unique<TfidfEmbedder>(TfidfEmbedder::from_state(
        st.at("tokens").get<std::vector<std::string>>(),
        st.at("idf").get<std::vector<double>>()));
}

} // namespace sargam
