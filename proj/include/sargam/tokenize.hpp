#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace sargam {

using TokenSequence = std::vector<std::string>;

// Special token ids. PAD..PLH occupy the first six vocabulary slots.
enum Special : int {
    PAD = 0,
    UNK = 1,
    BOS = 2,
    EOS = 3,
    SEP = 4, // "<s>", the modality separator
    PLH = 5, // "[PLH]", the placeholder token
};

inline const char* kPadToken = "<pad>";
inline const char* kUnkToken = "<unk>";
inline const char* kBosToken = "<bos>";
inline const char* kEosToken = "<eos>";
inline const char* kSepToken = "<s>";
inline const char* kPlhToken = "[PLH]";

// Rule-based code tokenizer. Maximal runs of [A-Za-z0-9_$] become one
// token, any other non-whitespace character is a single-character token.
// With subtoken_split, identifiers are further split at underscores and
// lower->upper camelCase transitions.
TokenSequence tokenize(const std::string& text, bool subtoken_split = false);

std::string join_tokens(const TokenSequence& tokens);

// Identifier tokens ([A-Za-z_$][A-Za-z0-9_$]*) minus the Java keyword
// stoplist.
std::set<std::string> identifiers(const TokenSequence& seq);

class Vocabulary {
public:
    // Specials only.
    Vocabulary();

    static Vocabulary build(const std::vector<TokenSequence>& corpus,
                            int min_freq = 1);

    int size() const { return static_cast<int>(token_of_.size()); }

    // UNK for out-of-vocabulary tokens.
    int id_of(const std::string& token) const;
    const std::string& token_of(int id) const;
    bool contains(const std::string& token) const;

    std::vector<int> encode(const TokenSequence& seq,
                            bool add_sentinels = false) const;
    // Drops sentinel/PAD ids; keeps everything else.
    TokenSequence decode(const std::vector<int>& ids) const;

    void save_json(const std::string& path) const;
    static Vocabulary load_json(const std::string& path);

    // FNV-1a over the token list, for checkpoint compatibility checks.
    std::uint64_t content_hash() const;

    const std::vector<std::string>& tokens() const { return token_of_; }
    static Vocabulary from_tokens(const std::vector<std::string>& tokens);

private:
    std::vector<std::string> token_of_;
    std::unordered_map<std::string, int> id_of_;

    void push(const std::string& token);
};

} // namespace sargam
