#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "xdetox/corpus.hpp"

namespace xdetox {

// Uniform translation interface. Implementations must be callable from
// multiple threads.
class Translator {
public:
    virtual ~Translator() = default;

    // Output lang always equals target_lang.
    virtual Utterance translate(const Utterance& utterance, const std::string& target_lang) const = 0;

    // Stable identity string; part of cache keys and run metadata.
    virtual std::string identity() const = 0;
};

// Relabels the language tag, tokens untouched.
class IdentityTranslator final : public Translator {
public:
    Utterance translate(const Utterance& utterance, const std::string& target_lang) const override;
    std::string identity() const override { return "identity"; }
};

// Models the translation failure mode where toxicity is lost in transit:
// each toxic token is independently dropped with toxic_drop_prob, and each
// neutral token is replaced by a random same-language "synonym" with
// neutral_synonym_prob.
struct NoiseConfig {
    double toxic_drop_prob = 0.0;
    double neutral_synonym_prob = 0.0;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError if probabilities leave [0,1]
};

// Deterministic dictionary-backed mock of a machine translation system.
// Noise decisions are derived from (seed, tokens, target_lang), so equal
// calls give equal results.
class DictionaryTranslator final : public Translator {
public:
    DictionaryTranslator(LanguagePack pack, NoiseConfig noise = {});

    Utterance translate(const Utterance& utterance, const std::string& target_lang) const override;
    std::string identity() const override;

    // Tokens seen that the dictionary does not cover (passed through).
    std::uint64_t unknown_token_count() const { return unknown_count_.load(); }

    const LanguagePack& pack() const { return pack_; }

private:
    LanguagePack pack_;
    NoiseConfig noise_;
    std::map<std::string, std::string> reverse_;  // B -> A
    mutable std::atomic<std::uint64_t> unknown_count_{0};
};

struct RemoteConfig {
    std::string endpoint;         // e.g. http://localhost:8089/translate
    std::string auth_token_env;   // env var holding the bearer token, may be empty
    double timeout_seconds = 10.0;
    int max_in_flight = 4;

    void validate() const;  // throws ConfigError
};

// Generic HTTP MT client. POST {"text","source_lang","target_lang"},
// expects {"translation"}. Timeouts, non-2xx statuses and malformed
// responses are distinct error kinds; the caller decides whether to retry.
class RemoteTranslator final : public Translator {
public:
    explicit RemoteTranslator(RemoteConfig config);
    ~RemoteTranslator() override;

    Utterance translate(const Utterance& utterance, const std::string& target_lang) const override;
    std::string identity() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Persistent file cache keyed by content hash of (text, source lang,
// target lang, inner translator identity). One file per key, filename is
// the lowercase hex hash, content is the response body verbatim.
class CachedTranslator final : public Translator {
public:
    CachedTranslator(std::shared_ptr<const Translator> inner, std::filesystem::path cache_dir);

    Utterance translate(const Utterance& utterance, const std::string& target_lang) const override;
    std::string identity() const override { return inner_->identity(); }

    std::uint64_t hit_count() const { return hits_.load(); }
    std::uint64_t miss_count() const { return misses_.load(); }

private:
    std::shared_ptr<const Translator> inner_;
    std::filesystem::path cache_dir_;
    mutable std::mutex write_mutex_;
    mutable std::atomic<std::uint64_t> hits_{0};
    mutable std::atomic<std::uint64_t> misses_{0};
};

// FNV-1a over a canonical encoding; used for cache filenames.
std::string cache_key(const std::string& text, const std::string& source_lang,
                      const std::string& target_lang, const std::string& translator_identity);

}  // namespace xdetox
