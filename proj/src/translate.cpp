#include "xdetox/translate.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "xdetox/errors.hpp"
#include "xdetox/rng.hpp"
#include "xdetox/text.hpp"

namespace xdetox {

using nlohmann::json;

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::string cache_key(const std::string& text, const std::string& source_lang,
                      const std::string& target_lang, const std::string& translator_identity) {
    std::string canon;
    canon.reserve(text.size() + source_lang.size() + target_lang.size() + translator_identity.size() + 3);
    canon += text;
    canon.push_back('\x1f');
    canon += source_lang;
    canon.push_back('\x1f');
    canon += target_lang;
    canon.push_back('\x1f');
    canon += translator_identity;
    std::uint64_t h = fnv1a64(canon);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

Utterance IdentityTranslator::translate(const Utterance& utterance,
                                        const std::string& target_lang) const {
    return Utterance(utterance.tokens, target_lang);
}

void NoiseConfig::validate() const {
    if (toxic_drop_prob < 0.0 || toxic_drop_prob > 1.0)
        throw ConfigError("toxic_drop_prob must be in [0,1]");
    if (neutral_synonym_prob < 0.0 || neutral_synonym_prob > 1.0)
        throw ConfigError("neutral_synonym_prob must be in [0,1]");
}

DictionaryTranslator::DictionaryTranslator(LanguagePack pack, NoiseConfig noise)
    : pack_(std::move(pack)), noise_(noise) {
    noise_.validate();
    pack_.validate();
    for (const auto& [a, b] : pack_.dictionary_ab) reverse_[b] = a;
}

std::string DictionaryTranslator::identity() const {
    std::ostringstream id;
    id << "dict(" << pack_.lang_a << "<->" << pack_.lang_b << ",drop=" << noise_.toxic_drop_prob
       << ",syn=" << noise_.neutral_synonym_prob << ",seed=" << noise_.seed << ")";
    return id.str();
}

Utterance DictionaryTranslator::translate(const Utterance& utterance,
                                          const std::string& target_lang) const {
    if (!pack_.has_lang(target_lang))
        throw ConfigError("target language '" + target_lang + "' not in pack");
    if (!pack_.has_lang(utterance.lang))
        throw ConfigError("source language '" + utterance.lang + "' not in pack");
    if (utterance.lang == target_lang) return utterance;

    const bool a_to_b = utterance.lang == pack_.lang_a;
    const auto& toxic_src = pack_.toxic_lexicon(utterance.lang);
    const auto& neutral_dst = pack_.neutral_vocab(target_lang);

    // Noise decisions depend only on (seed, text, langs): equal calls give
    // equal outputs, so caching stays transparent.
    Rng rng(Rng::mix(noise_.seed,
                     fnv1a64(utterance.text() + '\x1f' + utterance.lang + '\x1f' + target_lang)));

    std::vector<std::string> out;
    out.reserve(utterance.tokens.size());
    for (const std::string& tok : utterance.tokens) {
        const bool toxic = toxic_src.count(tok) > 0;
        if (toxic && noise_.toxic_drop_prob > 0.0 && rng.next_bool(noise_.toxic_drop_prob)) continue;

        const auto& dict = a_to_b ? pack_.dictionary_ab : reverse_;
        auto it = dict.find(tok);
        std::string mapped;
        if (it == dict.end()) {
            unknown_count_.fetch_add(1);
            mapped = tok;
        } else {
            mapped = it->second;
        }
        if (!toxic && noise_.neutral_synonym_prob > 0.0 && rng.next_bool(noise_.neutral_synonym_prob))
            mapped = neutral_dst[rng.next_below(neutral_dst.size())];
        out.push_back(std::move(mapped));
    }
    if (out.empty()) throw InputError("empty translation for '" + utterance.text() + "'");
    return Utterance(std::move(out), target_lang);
}

// ---------------------------------------------------------------------------
// Remote client
// ---------------------------------------------------------------------------

void RemoteConfig::validate() const {
    if (endpoint.empty()) throw ConfigError("remote translator endpoint is empty");
    if (timeout_seconds <= 0.0) throw ConfigError("timeout must be > 0");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
}

struct RemoteTranslator::Impl {
    RemoteConfig config;
    std::string base;  // scheme://host:port
    std::string path;  // /translate
    mutable std::mutex slots_mutex;
    mutable std::condition_variable slots_cv;
    mutable int in_flight = 0;
};

RemoteTranslator::RemoteTranslator(RemoteConfig config) : impl_(std::make_unique<Impl>()) {
    config.validate();
    const std::string& ep = config.endpoint;
    size_t scheme = ep.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint must include scheme: " + ep);
    size_t slash = ep.find('/', scheme + 3);
    impl_->base = slash == std::string::npos ? ep : ep.substr(0, slash);
    impl_->path = slash == std::string::npos ? "/" : ep.substr(slash);
    impl_->config = std::move(config);
}

RemoteTranslator::~RemoteTranslator() = default;

std::string RemoteTranslator::identity() const { return "remote(" + impl_->config.endpoint + ")"; }

Utterance RemoteTranslator::translate(const Utterance& utterance,
                                      const std::string& target_lang) const {
    // Bound the number of concurrent requests.
    {
        std::unique_lock lock(impl_->slots_mutex);
        impl_->slots_cv.wait(lock, [&] { return impl_->in_flight < impl_->config.max_in_flight; });
        ++impl_->in_flight;
    }
    struct SlotRelease {
        const Impl* impl;
        ~SlotRelease() {
            std::lock_guard lock(impl->slots_mutex);
            --impl->in_flight;
            impl->slots_cv.notify_one();
        }
    } release{impl_.get()};

    httplib::Client client(impl_->base);
    const auto timeout = std::chrono::duration<double>(impl_->config.timeout_seconds);
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
    client.set_connection_timeout(sec.count(), usec.count());
    client.set_read_timeout(sec.count(), usec.count());
    client.set_write_timeout(sec.count(), usec.count());

    httplib::Headers headers;
    if (!impl_->config.auth_token_env.empty()) {
        if (const char* token = std::getenv(impl_->config.auth_token_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    json body = {{"text", utterance.text()},
                 {"source_lang", utterance.lang},
                 {"target_lang", target_lang}};

    const auto started = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(impl_->path, headers, body.dump(), "application/json");
    if (!res) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout ||
            (err == httplib::Error::Read && elapsed >= impl_->config.timeout_seconds * 0.9))
            throw TimeoutError("translation request timed out after " +
                               std::to_string(impl_->config.timeout_seconds) + "s");
        throw IoError("translation request failed: " + httplib::to_string(err));
    }
    if (res->status < 200 || res->status >= 300)
        throw ServiceError("translation service returned status " + std::to_string(res->status),
                           res->status);

    json parsed;
    try {
        parsed = json::parse(res->body);
    } catch (const json::parse_error&) {
        throw SchemaError("malformed translation response body");
    }
    if (!parsed.contains("translation") || !parsed["translation"].is_string())
        throw SchemaError("translation response missing 'translation' string");

    Utterance out = Utterance::from_text(parsed["translation"].get<std::string>(), target_lang);
    if (out.empty()) throw InputError("empty translation for '" + utterance.text() + "'");
    return out;
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

CachedTranslator::CachedTranslator(std::shared_ptr<const Translator> inner,
                                   std::filesystem::path cache_dir)
    : inner_(std::move(inner)), cache_dir_(std::move(cache_dir)) {
    std::filesystem::create_directories(cache_dir_);
}

Utterance CachedTranslator::translate(const Utterance& utterance,
                                      const std::string& target_lang) const {
    const std::string key = cache_key(utterance.text(), utterance.lang, target_lang, inner_->identity());
    const std::filesystem::path entry = cache_dir_ / key;

    if (std::filesystem::exists(entry)) {
        std::ifstream in(entry, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        try {
            json doc = json::parse(buf.str());
            Utterance cached =
                Utterance::from_text(doc.at("translation").get<std::string>(), target_lang);
            if (!cached.empty()) {
                hits_.fetch_add(1);
                return cached;
            }
        } catch (const json::exception&) {
            std::cerr << "warning: corrupt cache entry " << entry << ", treating as miss\n";
        }
    }

    misses_.fetch_add(1);
    Utterance result = inner_->translate(utterance, target_lang);

    json doc = {{"translation", result.text()}};
    std::lock_guard lock(write_mutex_);
    const std::filesystem::path tmp = entry.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write cache entry: " + tmp.string());
        out << doc.dump();
    }
    std::filesystem::rename(tmp, entry);
    return result;
}

}  // namespace xdetox
