#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace xdetox {

class Translator;

// A single normalized sentence plus its language tag.
struct Utterance {
    std::vector<std::string> tokens;
    std::string lang;

    Utterance() = default;
    Utterance(std::vector<std::string> toks, std::string language)
        : tokens(std::move(toks)), lang(std::move(language)) {}

    // Tokenizes raw text with the framework tokenizer.
    static Utterance from_text(std::string_view text, std::string lang);

    std::string text() const;
    bool empty() const { return tokens.empty(); }

    bool operator==(const Utterance&) const = default;
};

// One parallel row: styles are fixed by position (toxic -> neutral).
struct DetoxPair {
    Utterance toxic;
    Utterance neutral;

    bool operator==(const DetoxPair&) const = default;
};

enum class Split { train, dev, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Corpus {
    std::vector<DetoxPair> pairs;
    Split split = Split::train;
    std::string name;

    size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }

    // Language shared by all toxic (resp. neutral) sides. Throws
    // SchemaError if the corpus is empty or inconsistent.
    std::string toxic_lang() const;
    std::string neutral_lang() const;

    // Throws SchemaError on any violated invariant.
    void validate() const;
};

enum class CorpusFormat { jsonl, tsv };

CorpusFormat format_from_string(const std::string& s);
CorpusFormat format_from_path(const std::filesystem::path& path);

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path, CorpusFormat format);

// ---------------------------------------------------------------------------
// Synthetic toy languages
// ---------------------------------------------------------------------------

struct ToyLanguageSpec {
    int neutral_vocab_size = 60;
    int toxic_vocab_size = 15;
    int min_len = 4;
    int max_len = 10;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

// Two synthetic languages with a token-level bijection between them.
struct LanguagePack {
    std::string lang_a;
    std::string lang_b;
    std::map<std::string, std::string> dictionary_ab;  // bijective, A -> B
    std::set<std::string> toxic_lexicon_a;
    std::set<std::string> toxic_lexicon_b;
    std::vector<std::string> neutral_vocab_a;  // generation order
    std::vector<std::string> neutral_vocab_b;
    int min_len = 4;
    int max_len = 10;

    bool has_lang(const std::string& lang) const { return lang == lang_a || lang == lang_b; }
    const std::set<std::string>& toxic_lexicon(const std::string& lang) const;
    const std::vector<std::string>& neutral_vocab(const std::string& lang) const;
    // Union of both toxic lexica; what oracle scorers use.
    std::set<std::string> toxic_union() const;

    void validate() const;  // throws SchemaError on broken bijection
};

LanguagePack gen_toy_languages(const ToyLanguageSpec& spec);

void save_language_pack(const LanguagePack& pack, const std::filesystem::path& path);
LanguagePack load_language_pack(const std::filesystem::path& path);

enum class ToySide { a, b };

// Parallel detox corpus: every toxic side holds at least one toxic token
// and at least one neutral token; the neutral side is the toxic side with
// each toxic token either deleted (p = 0.5) or replaced by a sampled
// neutral token, neutral tokens kept in order.
Corpus gen_toy_detox_corpus(const LanguagePack& pack, ToySide side, size_t n, std::uint64_t seed);

// Neutral sentence pairs (source, dictionary translation) for the
// translation task. Stored as DetoxPairs with toxic = source side.
Corpus gen_toy_translation_corpus(const LanguagePack& pack, ToySide source_side, size_t n,
                                  std::uint64_t seed);

// Neutral sentence pairs (sentence, light perturbation) in one language for
// the paraphrase task: one adjacent swap, token substitution or deletion.
Corpus gen_toy_paraphrase_corpus(const LanguagePack& pack, ToySide side, size_t n,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// Corpus-level transformations
// ---------------------------------------------------------------------------

// Translates both sides of every pair into target_lang. Errors carry the
// failing row index; no partial output is produced.
Corpus translate_training_data(const Corpus& corpus, const Translator& translator,
                               const std::string& target_lang);

enum class PairSide { toxic, neutral };

// Translates exactly one side of a monolingual corpus, producing a
// cross-lingual corpus whose pair langs differ.
Corpus build_crosslingual_corpus(const Corpus& corpus, const Translator& translator,
                                 PairSide side, const std::string& target_lang);

}  // namespace xdetox
