#include "xdetox/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "xdetox/errors.hpp"
#include "xdetox/rng.hpp"
#include "xdetox/text.hpp"
#include "xdetox/translate.hpp"

namespace xdetox {

using nlohmann::json;

Utterance Utterance::from_text(std::string_view text, std::string lang) {
    return Utterance(tokenize(text), std::move(lang));
}

std::string Utterance::text() const { return join_tokens(tokens); }

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "dev") return Split::dev;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "' (expected train|dev|test)");
}

std::string Corpus::toxic_lang() const {
    if (pairs.empty()) throw SchemaError("corpus '" + name + "' is empty, no toxic lang");
    return pairs.front().toxic.lang;
}

std::string Corpus::neutral_lang() const {
    if (pairs.empty()) throw SchemaError("corpus '" + name + "' is empty, no neutral lang");
    return pairs.front().neutral.lang;
}

void Corpus::validate() const {
    for (size_t i = 0; i < pairs.size(); ++i) {
        const DetoxPair& p = pairs[i];
        if (p.toxic.empty() || p.neutral.empty())
            throw SchemaError("row " + std::to_string(i + 1) + ": empty utterance");
        if (p.toxic.lang.empty() || p.neutral.lang.empty())
            throw SchemaError("row " + std::to_string(i + 1) + ": empty language tag");
        if (p.toxic.lang != pairs.front().toxic.lang)
            throw SchemaError("row " + std::to_string(i + 1) + ": toxic lang '" + p.toxic.lang +
                              "' differs from '" + pairs.front().toxic.lang + "'");
        if (p.neutral.lang != pairs.front().neutral.lang)
            throw SchemaError("row " + std::to_string(i + 1) + ": neutral lang '" + p.neutral.lang +
                              "' differs from '" + pairs.front().neutral.lang + "'");
    }
}

CorpusFormat format_from_string(const std::string& s) {
    if (s == "jsonl") return CorpusFormat::jsonl;
    if (s == "tsv") return CorpusFormat::tsv;
    throw ConfigError("unknown corpus format '" + s + "' (expected jsonl|tsv)");
}

CorpusFormat format_from_path(const std::filesystem::path& path) {
    const std::string ext = path.extension().string();
    if (ext == ".tsv") return CorpusFormat::tsv;
    return CorpusFormat::jsonl;
}

namespace {

constexpr const char* kTsvHeader = "toxic\tneutral\tlang_toxic\tlang_neutral";

DetoxPair make_pair_checked(const std::string& toxic, const std::string& neutral,
                            const std::string& lang_toxic, const std::string& lang_neutral,
                            size_t line_no) {
    if (lang_toxic.empty() || lang_neutral.empty())
        throw SchemaError("line " + std::to_string(line_no) + ": empty language tag");
    DetoxPair pair{Utterance::from_text(toxic, lang_toxic), Utterance::from_text(neutral, lang_neutral)};
    if (pair.toxic.empty())
        throw SchemaError("line " + std::to_string(line_no) + ": toxic side empty after normalization");
    if (pair.neutral.empty())
        throw SchemaError("line " + std::to_string(line_no) + ": neutral side empty after normalization");
    return pair;
}

void check_row_langs(const Corpus& corpus, const DetoxPair& pair, size_t line_no) {
    if (corpus.pairs.empty()) return;
    if (pair.toxic.lang != corpus.pairs.front().toxic.lang)
        throw SchemaError("line " + std::to_string(line_no) + ": toxic lang '" + pair.toxic.lang +
                          "' inconsistent with '" + corpus.pairs.front().toxic.lang + "'");
    if (pair.neutral.lang != corpus.pairs.front().neutral.lang)
        throw SchemaError("line " + std::to_string(line_no) + ": neutral lang '" + pair.neutral.lang +
                          "' inconsistent with '" + corpus.pairs.front().neutral.lang + "'");
}

std::vector<std::string> split_tsv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (!line.empty() && line.back() == '\t') fields.push_back("");
    return fields;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path.string());

    Corpus corpus;
    corpus.name = path.stem().string();

    std::string line;
    size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        if (format == CorpusFormat::tsv && !saw_header) {
            if (line != kTsvHeader)
                throw SchemaError("line 1: expected TSV header '" + std::string(kTsvHeader) + "'");
            saw_header = true;
            continue;
        }

        DetoxPair pair;
        if (format == CorpusFormat::jsonl) {
            json row;
            try {
                row = json::parse(line);
            } catch (const json::parse_error& e) {
                throw SchemaError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
            }
            for (const char* key : {"toxic", "neutral", "lang_toxic", "lang_neutral"}) {
                if (!row.contains(key) || !row[key].is_string())
                    throw SchemaError("line " + std::to_string(line_no) + ": missing string field '" +
                                      key + "'");
            }
            pair = make_pair_checked(row["toxic"], row["neutral"], row["lang_toxic"],
                                     row["lang_neutral"], line_no);
        } else {
            std::vector<std::string> fields = split_tsv_line(line);
            if (fields.size() != 4)
                throw SchemaError("line " + std::to_string(line_no) + ": expected 4 TSV columns, got " +
                                  std::to_string(fields.size()));
            pair = make_pair_checked(fields[0], fields[1], fields[2], fields[3], line_no);
        }
        check_row_langs(corpus, pair, line_no);
        corpus.pairs.push_back(std::move(pair));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format) {
    for (size_t i = 0; i < corpus.pairs.size(); ++i) {
        const DetoxPair& p = corpus.pairs[i];
        for (const Utterance* u : {&p.toxic, &p.neutral}) {
            for (const std::string& tok : u->tokens) {
                if (format == CorpusFormat::tsv &&
                    (tok.find('\t') != std::string::npos || tok.find('\n') != std::string::npos))
                    throw InputError("row " + std::to_string(i + 1) +
                                     ": token contains tab/newline, not representable as TSV");
            }
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write corpus file: " + path.string());

    if (format == CorpusFormat::tsv) out << kTsvHeader << "\n";
    for (const DetoxPair& p : corpus.pairs) {
        if (format == CorpusFormat::jsonl) {
            json row = {{"toxic", p.toxic.text()},
                        {"neutral", p.neutral.text()},
                        {"lang_toxic", p.toxic.lang},
                        {"lang_neutral", p.neutral.lang}};
            out << row.dump() << "\n";
        } else {
            out << p.toxic.text() << '\t' << p.neutral.text() << '\t' << p.toxic.lang << '\t'
                << p.neutral.lang << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Toy languages
// ---------------------------------------------------------------------------

void ToyLanguageSpec::validate() const {
    if (neutral_vocab_size < 10) throw ConfigError("neutral_vocab_size must be >= 10");
    if (toxic_vocab_size < 1) throw ConfigError("toxic_vocab_size must be >= 1");
    if (min_len < 1 || min_len > max_len) throw ConfigError("need 1 <= min_len <= max_len");
}

const std::set<std::string>& LanguagePack::toxic_lexicon(const std::string& lang) const {
    if (lang == lang_a) return toxic_lexicon_a;
    if (lang == lang_b) return toxic_lexicon_b;
    throw ConfigError("language '" + lang + "' not in pack (" + lang_a + ", " + lang_b + ")");
}

const std::vector<std::string>& LanguagePack::neutral_vocab(const std::string& lang) const {
    if (lang == lang_a) return neutral_vocab_a;
    if (lang == lang_b) return neutral_vocab_b;
    throw ConfigError("language '" + lang + "' not in pack (" + lang_a + ", " + lang_b + ")");
}

std::set<std::string> LanguagePack::toxic_union() const {
    std::set<std::string> all = toxic_lexicon_a;
    all.insert(toxic_lexicon_b.begin(), toxic_lexicon_b.end());
    return all;
}

void LanguagePack::validate() const {
    if (lang_a.empty() || lang_b.empty() || lang_a == lang_b)
        throw SchemaError("language pack needs two distinct language tags");
    std::set<std::string> values;
    for (const auto& [a, b] : dictionary_ab) {
        if (!values.insert(b).second) throw SchemaError("dictionary is not injective at '" + b + "'");
        const bool a_toxic = toxic_lexicon_a.count(a) > 0;
        const bool b_toxic = toxic_lexicon_b.count(b) > 0;
        if (a_toxic != b_toxic)
            throw SchemaError("dictionary maps across toxicity classes: '" + a + "' -> '" + b + "'");
    }
    for (const std::string& t : toxic_lexicon_a)
        if (!dictionary_ab.count(t)) throw SchemaError("toxic token '" + t + "' missing from dictionary");
    for (const std::string& t : neutral_vocab_a)
        if (!dictionary_ab.count(t)) throw SchemaError("neutral token '" + t + "' missing from dictionary");
}

namespace {

// Pronounceable synthetic token from language-specific syllables.
std::string make_token(Rng& rng, const std::string& consonants, const std::string& vowels,
                       int syllables) {
    std::string tok;
    for (int s = 0; s < syllables; ++s) {
        tok.push_back(consonants[rng.next_below(consonants.size())]);
        tok.push_back(vowels[rng.next_below(vowels.size())]);
    }
    return tok;
}

std::vector<std::string> make_vocab(Rng& rng, const std::string& consonants, const std::string& vowels,
                                    int count, std::set<std::string>& taken) {
    std::vector<std::string> vocab;
    vocab.reserve(count);
    while (static_cast<int>(vocab.size()) < count) {
        int syllables = 2 + static_cast<int>(rng.next_below(2));
        std::string tok = make_token(rng, consonants, vowels, syllables);
        if (taken.insert(tok).second) vocab.push_back(std::move(tok));
    }
    return vocab;
}

}  // namespace

LanguagePack gen_toy_languages(const ToyLanguageSpec& spec) {
    spec.validate();
    Rng rng(Rng::mix(spec.seed, 0x70c7));

    LanguagePack pack;
    pack.lang_a = "toyA";
    pack.lang_b = "toyB";
    pack.min_len = spec.min_len;
    pack.max_len = spec.max_len;

    std::set<std::string> taken;
    // Distinct consonant inventories keep the two languages visually apart.
    pack.neutral_vocab_a = make_vocab(rng, "bdkmnpt", "aeiou", spec.neutral_vocab_size, taken);
    pack.neutral_vocab_b = make_vocab(rng, "fgljrvz", "aeiou", spec.neutral_vocab_size, taken);
    std::vector<std::string> toxic_a = make_vocab(rng, "bdkmnpt", "aeiou", spec.toxic_vocab_size, taken);
    std::vector<std::string> toxic_b = make_vocab(rng, "fgljrvz", "aeiou", spec.toxic_vocab_size, taken);
    // Toxic tokens carry a marker suffix so corpora stay readable.
    for (auto& t : toxic_a) t += "xx";
    for (auto& t : toxic_b) t += "xx";

    for (int i = 0; i < spec.neutral_vocab_size; ++i)
        pack.dictionary_ab[pack.neutral_vocab_a[i]] = pack.neutral_vocab_b[i];
    for (int i = 0; i < spec.toxic_vocab_size; ++i) {
        pack.dictionary_ab[toxic_a[i]] = toxic_b[i];
        pack.toxic_lexicon_a.insert(toxic_a[i]);
        pack.toxic_lexicon_b.insert(toxic_b[i]);
    }
    pack.validate();
    return pack;
}

void save_language_pack(const LanguagePack& pack, const std::filesystem::path& path) {
    json doc = {{"lang_a", pack.lang_a},
                {"lang_b", pack.lang_b},
                {"dictionary_ab", pack.dictionary_ab},
                {"toxic_lexicon_a", pack.toxic_lexicon_a},
                {"toxic_lexicon_b", pack.toxic_lexicon_b},
                {"neutral_vocab_a", pack.neutral_vocab_a},
                {"neutral_vocab_b", pack.neutral_vocab_b},
                {"min_len", pack.min_len},
                {"max_len", pack.max_len}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write language pack: " + path.string());
    out << doc.dump(2) << "\n";
}

LanguagePack load_language_pack(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open language pack: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw SchemaError("invalid language pack JSON: " + std::string(e.what()));
    }
    LanguagePack pack;
    try {
        pack.lang_a = doc.at("lang_a");
        pack.lang_b = doc.at("lang_b");
        pack.dictionary_ab = doc.at("dictionary_ab").get<std::map<std::string, std::string>>();
        pack.toxic_lexicon_a = doc.at("toxic_lexicon_a").get<std::set<std::string>>();
        pack.toxic_lexicon_b = doc.at("toxic_lexicon_b").get<std::set<std::string>>();
        pack.neutral_vocab_a = doc.at("neutral_vocab_a").get<std::vector<std::string>>();
        pack.neutral_vocab_b = doc.at("neutral_vocab_b").get<std::vector<std::string>>();
        pack.min_len = doc.at("min_len");
        pack.max_len = doc.at("max_len");
    } catch (const json::exception& e) {
        throw SchemaError("language pack missing fields: " + std::string(e.what()));
    }
    pack.validate();
    return pack;
}

namespace {

std::string lang_of(const LanguagePack& pack, ToySide side) {
    return side == ToySide::a ? pack.lang_a : pack.lang_b;
}

std::vector<std::string> sample_neutral_sentence(Rng& rng, const std::vector<std::string>& vocab,
                                                 int min_len, int max_len) {
    int len = min_len + static_cast<int>(rng.next_below(max_len - min_len + 1));
    std::vector<std::string> tokens;
    tokens.reserve(len);
    for (int i = 0; i < len; ++i) tokens.push_back(vocab[rng.next_below(vocab.size())]);
    return tokens;
}

}  // namespace

Corpus gen_toy_detox_corpus(const LanguagePack& pack, ToySide side, size_t n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("corpus size must be >= 1");
    const std::string lang = lang_of(pack, side);
    const auto& neutral_vocab = pack.neutral_vocab(lang);
    std::vector<std::string> toxic_vocab(pack.toxic_lexicon(lang).begin(),
                                         pack.toxic_lexicon(lang).end());

    Rng rng(Rng::mix(seed, 0xde70));
    Corpus corpus;
    corpus.name = "toy-detox-" + lang;
    corpus.pairs.reserve(n);

    for (size_t row = 0; row < n; ++row) {
        // Mostly neutral sentence with 1..3 toxic insertions; always keeps
        // at least one neutral token so deletion cannot empty the pair.
        std::vector<std::string> toxic_tokens =
            sample_neutral_sentence(rng, neutral_vocab, std::max(1, pack.min_len), pack.max_len);
        int max_toxic = std::min<int>(3, static_cast<int>(toxic_tokens.size()));
        int n_toxic = 1 + static_cast<int>(rng.next_below(max_toxic));

        std::vector<size_t> positions;
        for (int k = 0; k < n_toxic; ++k)
            positions.push_back(rng.next_below(toxic_tokens.size() + 1));
        std::sort(positions.rbegin(), positions.rend());
        for (size_t pos : positions)
            toxic_tokens.insert(toxic_tokens.begin() + pos,
                                toxic_vocab[rng.next_below(toxic_vocab.size())]);

        std::vector<std::string> neutral_tokens;
        neutral_tokens.reserve(toxic_tokens.size());
        for (const std::string& tok : toxic_tokens) {
            if (pack.toxic_lexicon(lang).count(tok)) {
                if (rng.next_bool(0.5)) continue;  // delete
                neutral_tokens.push_back(neutral_vocab[rng.next_below(neutral_vocab.size())]);
            } else {
                neutral_tokens.push_back(tok);
            }
        }
        corpus.pairs.push_back(
            {Utterance(std::move(toxic_tokens), lang), Utterance(std::move(neutral_tokens), lang)});
    }
    return corpus;
}

Corpus gen_toy_translation_corpus(const LanguagePack& pack, ToySide source_side, size_t n,
                                  std::uint64_t seed) {
    if (n < 1) throw ConfigError("corpus size must be >= 1");
    const std::string src_lang = lang_of(pack, source_side);
    const std::string dst_lang = source_side == ToySide::a ? pack.lang_b : pack.lang_a;
    const auto& vocab = pack.neutral_vocab(src_lang);

    DictionaryTranslator clean(pack);
    Rng rng(Rng::mix(seed, 0x7a15));
    Corpus corpus;
    corpus.name = "toy-translate-" + src_lang;
    corpus.pairs.reserve(n);
    for (size_t row = 0; row < n; ++row) {
        Utterance src(sample_neutral_sentence(rng, vocab, pack.min_len, pack.max_len), src_lang);
        corpus.pairs.push_back({src, clean.translate(src, dst_lang)});
    }
    return corpus;
}

Corpus gen_toy_paraphrase_corpus(const LanguagePack& pack, ToySide side, size_t n,
                                 std::uint64_t seed) {
    if (n < 1) throw ConfigError("corpus size must be >= 1");
    const std::string lang = lang_of(pack, side);
    const auto& vocab = pack.neutral_vocab(lang);

    Rng rng(Rng::mix(seed, 0x9a7a));
    Corpus corpus;
    corpus.name = "toy-paraphrase-" + lang;
    corpus.pairs.reserve(n);
    for (size_t row = 0; row < n; ++row) {
        std::vector<std::string> src =
            sample_neutral_sentence(rng, vocab, std::max(2, pack.min_len), pack.max_len);
        std::vector<std::string> dst = src;
        switch (rng.next_below(3)) {
            case 0: {  // adjacent swap
                size_t i = rng.next_below(dst.size() - 1);
                std::swap(dst[i], dst[i + 1]);
                break;
            }
            case 1:  // substitution
                dst[rng.next_below(dst.size())] = vocab[rng.next_below(vocab.size())];
                break;
            default:  // deletion
                if (dst.size() > 1) dst.erase(dst.begin() + rng.next_below(dst.size()));
                break;
        }
        corpus.pairs.push_back({Utterance(std::move(src), lang), Utterance(std::move(dst), lang)});
    }
    return corpus;
}

Corpus translate_training_data(const Corpus& corpus, const Translator& translator,
                               const std::string& target_lang) {
    Corpus out;
    out.split = corpus.split;
    out.name = corpus.name + "-" + target_lang;
    out.pairs.reserve(corpus.pairs.size());
    for (size_t i = 0; i < corpus.pairs.size(); ++i) {
        try {
            out.pairs.push_back({translator.translate(corpus.pairs[i].toxic, target_lang),
                                 translator.translate(corpus.pairs[i].neutral, target_lang)});
        } catch (const Error& e) {
            throw Error("translation failed at row " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

Corpus build_crosslingual_corpus(const Corpus& corpus, const Translator& translator, PairSide side,
                                 const std::string& target_lang) {
    if (!corpus.empty() && corpus.toxic_lang() != corpus.neutral_lang())
        throw ConfigError("build_crosslingual_corpus expects a monolingual corpus");
    Corpus out;
    out.split = corpus.split;
    out.name = corpus.name + "-xling-" + target_lang;
    out.pairs.reserve(corpus.pairs.size());
    for (size_t i = 0; i < corpus.pairs.size(); ++i) {
        DetoxPair pair = corpus.pairs[i];
        try {
            if (side == PairSide::toxic)
                pair.toxic = translator.translate(pair.toxic, target_lang);
            else
                pair.neutral = translator.translate(pair.neutral, target_lang);
        } catch (const Error& e) {
            throw Error("translation failed at row " + std::to_string(i + 1) + ": " + e.what());
        }
        out.pairs.push_back(std::move(pair));
    }
    return out;
}

}  // namespace xdetox
