#include "sargam/tokenize.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "sargam/errors.hpp"

namespace sargam {

namespace {

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}


void split_subtokens(const std::string& word, TokenSequence& out) {
    size_t produced = 0;
    std::string part;
    auto flush = [&] {
        if (!part.empty()) {
            out.push_back(part);
            ++produced;
            part.clear();
        }
    };
    for (char c : word) {
        if (c == '_') {
            flush();
            continue;
        }
        // camelCase boundary: split only at lower -> upper transitions.
        if (!part.empty() && std::isupper(static_cast<unsigned char>(c)) &&
            std::islower(static_cast<unsigned char>(part.back()))) {
            flush();
        }
        part.push_back(c);
    }
    flush();
    // All-underscore identifiers would otherwise vanish.
    if (produced == 0 && !word.empty())
        out.push_back(word);
}

const std::set<std::string>& java_keywords() {
    static const std::set<std::string> kw = {
        "abstract", "assert",       "boolean",  "break",      "byte",
        "case",     "catch",        "char",     "class",      "const",
        "continue", "default",      "do",       "double",     "else",
        "enum",     "extends",      "final",    "finally",    "float",
        "for",      "goto",         "if",       "implements", "import",
        "instanceof", "int",        "interface", "long",      "native",
        "new",      "package",      "private",  "protected",  "public",
        "return",   "short",        "static",   "strictfp",   "super",
        "switch",   "synchronized", "this",     "throw",      "throws",
        "transient", "try",         "void",     "volatile",   "while",
    };
    return kw;
}

} // namespace

TokenSequence tokenize(const std::string& text, bool subtoken_split) {
    TokenSequence out;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (is_word_char(c)) {
            size_t j = i;
            while (j < text.size() && is_word_char(text[j]))
                ++j;
            std::string word = text.substr(i, j - i);
            if (subtoken_split)
                split_subtokens(word, out);
            else
                out.push_back(word);
            i = j;
        } else {
            out.emplace_back(1, c);
            ++i;
        }
    }
    return out;
}

std::string join_tokens(const TokenSequence& tokens) {
    std::string out;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i)
            out += ' ';
        out += tokens[i];
    }
    return out;
}

std::set<std::string> identifiers(const TokenSequence& seq) {
    std::set<std::string> out;
    for (const auto& t : seq) {
        if (t.empty())
            continue;
        char c0 = t[0];
        bool head = std::isalpha(static_cast<unsigned char>(c0)) ||
                    c0 == '_' || c0 == '$';
        if (!head)
            continue;
        bool ok = std::all_of(t.begin(), t.end(), is_word_char);
        if (!ok)
            continue;
        if (java_keywords().count(t))
            continue;
        out.insert(t);
    }
    return out;
}

Vocabulary::Vocabulary() {
    push(kPadToken);
    push(kUnkToken);
    push(kBosToken);
    push(kEosToken);
    push(kSepToken);
    push(kPlhToken);
}

void Vocabulary::push(const std::string& token) {
    id_of_[token] = static_cast<int>(token_of_.size());
    token_of_.push_back(token);
}

Vocabulary Vocabulary::build(const std::vector<TokenSequence>& corpus,
                             int min_freq) {
    if (min_freq < 1)
        throw ArgumentError("build_vocab: min_freq must be >= 1");
    Vocabulary v;
    std::map<std::string, long> freq;
    for (const auto& seq : corpus)
        for (const auto& t : seq)
            ++freq[t];
    // Descending frequency, lexicographic tie-break.
    std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
    std::stable_sort(items.begin(), items.end(), [](auto& a, auto& b) {
        if (a.second != b.second)
            return a.second > b.second;
        return a.first < b.first;
    });
    for (const auto& [tok, n] : items) {
        if (n < min_freq)
            continue;
        if (!v.id_of_.count(tok))
            v.push(tok);
    }
    return v;
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = id_of_.find(token);
    return it == id_of_.end() ? UNK : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    if (id < 0 || id >= size())
        throw ArgumentError("token_of: id out of range: " +
                            std::to_string(id));
    return token_of_[static_cast<size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
    return id_of_.count(token) > 0;
}

std::vector<int> Vocabulary::encode(const TokenSequence& seq,
                                    bool add_sentinels) const {
    std::vector<int> ids;
    ids.reserve(seq.size() + 2);
    if (add_sentinels)
        ids.push_back(BOS);
    for (const auto& t : seq)
        ids.push_back(id_of(t));
    if (add_sentinels)
        ids.push_back(EOS);
    return ids;
}

TokenSequence Vocabulary::decode(const std::vector<int>& ids) const {
    TokenSequence out;
    for (int id : ids) {
        if (id == PAD || id == BOS || id == EOS)
            continue;
        out.push_back(token_of(id));
    }
    return out;
}

void Vocabulary::save_json(const std::string& path) const {
    nlohmann::json j = nlohmann::json::object();
    for (int i = 0; i < size(); ++i)
        j[token_of_[static_cast<size_t>(i)]] = i;
    std::ofstream f(path);
    if (!f)
        throw IoError("cannot write vocabulary: " + path);
    f << j.dump() << "\n";
}

Vocabulary Vocabulary::load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot read vocabulary: " + path);
    nlohmann::json j;
    f >> j;
    std::vector<std::string> tokens(j.size());
    for (auto it = j.begin(); it != j.end(); ++it) {
        int id = it.value().get<int>();
        if (id < 0 || id >= static_cast<int>(tokens.size()))
            throw CorruptionError("vocabulary ids not dense in " + path);
        tokens[static_cast<size_t>(id)] = it.key();
    }
    return from_tokens(tokens);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    if (tokens.size() < 6)
        throw CorruptionError("vocabulary missing special tokens");
    for (size_t i = 6; i < tokens.size(); ++i)
        v.push(tokens[i]);
    return v;
}

std::uint64_t Vocabulary::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& t : token_of_) {
        for (char c : t) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace sargam
