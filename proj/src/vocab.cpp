#include "xdetox/vocab.hpp"

#include "xdetox/errors.hpp"

namespace xdetox {

namespace {
std::string lang_token(const std::string& lang) { return "<lang:" + lang + ">"; }
}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& langs,
                             const std::vector<std::string>& tokens) {
    Vocabulary v;
    v.langs_ = langs;
    v.id_to_token_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (const std::string& lang : langs) v.id_to_token_.push_back(lang_token(lang));
    for (const std::string& tok : tokens) v.id_to_token_.push_back(tok);
    for (size_t i = 0; i < v.id_to_token_.size(); ++i) {
        if (!v.token_to_id_.emplace(v.id_to_token_[i], static_cast<int>(i)).second)
            throw ConfigError("duplicate token in vocabulary: '" + v.id_to_token_[i] + "'");
    }
    return v;
}

Vocabulary Vocabulary::from_pack(const LanguagePack& pack) {
    std::vector<std::string> tokens;
    tokens.insert(tokens.end(), pack.neutral_vocab_a.begin(), pack.neutral_vocab_a.end());
    tokens.insert(tokens.end(), pack.toxic_lexicon_a.begin(), pack.toxic_lexicon_a.end());
    tokens.insert(tokens.end(), pack.neutral_vocab_b.begin(), pack.neutral_vocab_b.end());
    tokens.insert(tokens.end(), pack.toxic_lexicon_b.begin(), pack.toxic_lexicon_b.end());
    return build({pack.lang_a, pack.lang_b}, tokens);
}

int Vocabulary::lang_token_id(const std::string& lang) const {
    auto it = token_to_id_.find(lang_token(lang));
    if (it == token_to_id_.end())
        throw ConfigError("language '" + lang + "' has no control token in this vocabulary");
    return it->second;
}

bool Vocabulary::has_lang(const std::string& lang) const {
    return token_to_id_.count(lang_token(lang)) > 0;
}

int Vocabulary::token_id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? unk_id() : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw InputError("token id out of range: " + std::to_string(id));
    return id_to_token_[id];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const std::string& tok : tokens) ids.push_back(token_id(tok));
    return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
    std::vector<std::string> tokens;
    tokens.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= size()) throw InputError("token id out of range: " + std::to_string(id));
        if (is_special(id)) continue;
        tokens.push_back(id_to_token_[id]);
    }
    return tokens;
}

}  // namespace xdetox
