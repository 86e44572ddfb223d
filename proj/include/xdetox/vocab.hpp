#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "xdetox/corpus.hpp"

namespace xdetox {

// Dense token <-> id bijection with the fixed specials PAD/BOS/EOS/UNK and
// one language-control token per language (spelled "<lang:TAG>").
class Vocabulary {
public:
    Vocabulary() = default;

    // Specials first, then extra language tokens, then regular tokens in
    // the given order. Duplicate tokens are rejected.
    static Vocabulary build(const std::vector<std::string>& langs,
                            const std::vector<std::string>& tokens);

    // All tokens of a language pack (both languages, neutral then toxic,
    // deterministic order).
    static Vocabulary from_pack(const LanguagePack& pack);

    int pad_id() const { return 0; }
    int bos_id() const { return 1; }
    int eos_id() const { return 2; }
    int unk_id() const { return 3; }

    int lang_token_id(const std::string& lang) const;  // throws ConfigError if absent
    bool has_lang(const std::string& lang) const;
    const std::vector<std::string>& langs() const { return langs_; }

    int size() const { return static_cast<int>(id_to_token_.size()); }
    bool is_special(int id) const { return id < 4 + static_cast<int>(langs_.size()); }

    int token_id(const std::string& token) const;  // UNK for unknown tokens
    const std::string& token(int id) const;        // throws InputError if out of range

    std::vector<int> encode(const std::vector<std::string>& tokens) const;
    std::vector<std::string> decode(const std::vector<int>& ids) const;  // keeps specials out

    const std::vector<std::string>& id_to_token() const { return id_to_token_; }

    bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

private:
    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<std::string> langs_;
};

}  // namespace xdetox
