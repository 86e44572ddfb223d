#pragma once

// Templated encoder-decoder with explicit forward/backward passes. Private
// to the library; the public surface is xdetox::Seq2SeqModel.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "xdetox/errors.hpp"
#include "xdetox/model.hpp"
#include "xdetox/rng.hpp"

namespace xdetox::detail {

class ModelImpl {
public:
    virtual ~ModelImpl() = default;
    virtual std::unique_ptr<ModelImpl> clone() const = 0;
    virtual const ModelConfig& config() const = 0;
    virtual const Vocabulary& vocab() const = 0;
    virtual const std::vector<ParamInfo>& index() const = 0;
    virtual std::vector<double> param_values(const std::string& name) const = 0;
    virtual void set_param_values(const std::string& name, const std::vector<double>& v) = 0;
    virtual std::vector<double> raw_values() const = 0;
    virtual void set_raw_values(const std::vector<double>& v) = 0;
    virtual void set_freeze_policy(FreezePolicy p) = 0;
    virtual FreezePolicy freeze_policy() const = 0;
    virtual std::size_t trainable_scalar_count() const = 0;
    virtual EncoderStates encode(const std::vector<int>& ids) const = 0;
    virtual EncoderStates apply_adapter(const EncoderStates& states) const = 0;
    virtual double forward_loss(const Batch& batch) const = 0;
    virtual double backward(const Batch& batch) = 0;
    virtual std::map<std::string, std::vector<double>> gradients() const = 0;
    virtual std::vector<double> trainable_grad_flat() const = 0;
    virtual void add_to_trainable(const std::vector<double>& delta) = 0;
    virtual std::vector<int> generate(const std::vector<int>& src_ids, int src_lang_id,
                                      int tgt_lang_id, const GenerateOptions& options) const = 0;
    virtual double grad_check(const Batch& batch, double eps, int n_samples, std::uint64_t seed) = 0;
};

// ---------------------------------------------------------------------------
// math helpers (row-major, accumulate-into-output backward convention)
// ---------------------------------------------------------------------------

// y = x W + b, x: [n][din], W: [din][dout]
template <typename T>
void linear_fwd(const T* x, int n, int din, const T* w, const T* b, int dout, T* y) {
    for (int i = 0; i < n; ++i) {
        const T* xi = x + static_cast<size_t>(i) * din;
        T* yi = y + static_cast<size_t>(i) * dout;
        if (b)
            std::memcpy(yi, b, sizeof(T) * dout);
        else
            std::fill(yi, yi + dout, T(0));
        for (int k = 0; k < din; ++k) {
            const T xv = xi[k];
            const T* wk = w + static_cast<size_t>(k) * dout;
            for (int j = 0; j < dout; ++j) yi[j] += xv * wk[j];
        }
    }
}

template <typename T>
void linear_bwd(const T* x, const T* w, const T* dy, int n, int din, int dout, T* dx, T* dw,
                T* db) {
    for (int i = 0; i < n; ++i) {
        const T* dyi = dy + static_cast<size_t>(i) * dout;
        const T* xi = x + static_cast<size_t>(i) * din;
        if (dx) {
            T* dxi = dx + static_cast<size_t>(i) * din;
            for (int k = 0; k < din; ++k) {
                const T* wk = w + static_cast<size_t>(k) * dout;
                T acc = 0;
                for (int j = 0; j < dout; ++j) acc += dyi[j] * wk[j];
                dxi[k] += acc;
            }
        }
        if (dw) {
            for (int k = 0; k < din; ++k) {
                const T xv = xi[k];
                T* dwk = dw + static_cast<size_t>(k) * dout;
                for (int j = 0; j < dout; ++j) dwk[j] += xv * dyi[j];
            }
        }
        if (db)
            for (int j = 0; j < dout; ++j) db[j] += dyi[j];
    }
}

template <typename T>
struct LnCache {
    std::vector<T> xhat;
    std::vector<T> inv_std;
};

template <typename T>
void layernorm_fwd(const T* x, int n, int d, const T* g, const T* b, T* y, LnCache<T>& c) {
    constexpr T eps = T(1e-5);
    c.xhat.resize(static_cast<size_t>(n) * d);
    c.inv_std.resize(n);
    for (int i = 0; i < n; ++i) {
        const T* xi = x + static_cast<size_t>(i) * d;
        T* yi = y + static_cast<size_t>(i) * d;
        T mean = 0;
        for (int k = 0; k < d; ++k) mean += xi[k];
        mean /= d;
        T var = 0;
        for (int k = 0; k < d; ++k) {
            const T cdev = xi[k] - mean;
            var += cdev * cdev;
        }
        var /= d;
        const T inv = T(1) / std::sqrt(var + eps);
        c.inv_std[i] = inv;
        T* xh = c.xhat.data() + static_cast<size_t>(i) * d;
        for (int k = 0; k < d; ++k) {
            xh[k] = (xi[k] - mean) * inv;
            yi[k] = g[k] * xh[k] + b[k];
        }
    }
}

template <typename T>
void layernorm_bwd(const LnCache<T>& c, int n, int d, const T* g, const T* dy, T* dx, T* dg,
                   T* db) {
    for (int i = 0; i < n; ++i) {
        const T* dyi = dy + static_cast<size_t>(i) * d;
        const T* xh = c.xhat.data() + static_cast<size_t>(i) * d;
        const T inv = c.inv_std[i];
        T sum_dxh = 0, sum_dxh_xh = 0;
        for (int k = 0; k < d; ++k) {
            const T dxh = dyi[k] * g[k];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh[k];
            if (dg) dg[k] += dyi[k] * xh[k];
            if (db) db[k] += dyi[k];
        }
        const T m1 = sum_dxh / d;
        const T m2 = sum_dxh_xh / d;
        T* dxi = dx + static_cast<size_t>(i) * d;
        for (int k = 0; k < d; ++k) {
            const T dxh = dyi[k] * g[k];
            dxi[k] += inv * (dxh - m1 - xh[k] * m2);
        }
    }
}

template <typename T>
struct AttnCache {
    std::vector<T> q, k, v;  // projected, heads concatenated
    std::vector<T> probs;    // [H][nq][nk]
    std::vector<T> ctx;      // [nq][d]
};

template <typename T>
void attention_fwd(const T* xq, int nq, const T* xkv, int nk, int d, int heads, bool causal,
                   const T* wq, const T* bq, const T* wk, const T* bk, const T* wv, const T* bv,
                   const T* wo, const T* bo, T* out, AttnCache<T>& c) {
    const int dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    c.q.resize(static_cast<size_t>(nq) * d);
    c.k.resize(static_cast<size_t>(nk) * d);
    c.v.resize(static_cast<size_t>(nk) * d);
    c.probs.assign(static_cast<size_t>(heads) * nq * nk, T(0));
    c.ctx.assign(static_cast<size_t>(nq) * d, T(0));
    linear_fwd(xq, nq, d, wq, bq, d, c.q.data());
    linear_fwd(xkv, nk, d, wk, bk, d, c.k.data());
    linear_fwd(xkv, nk, d, wv, bv, d, c.v.data());

    std::vector<T> scores(nk);
    for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < nq; ++i) {
            const int limit = causal ? std::min(nk, i + 1) : nk;
            const T* qi = c.q.data() + static_cast<size_t>(i) * d + off;
            T mx = -std::numeric_limits<T>::infinity();
            for (int j = 0; j < limit; ++j) {
                const T* kj = c.k.data() + static_cast<size_t>(j) * d + off;
                T s = 0;
                for (int e = 0; e < dh; ++e) s += qi[e] * kj[e];
                s *= scale;
                scores[j] = s;
                mx = std::max(mx, s);
            }
            T z = 0;
            for (int j = 0; j < limit; ++j) {
                scores[j] = std::exp(scores[j] - mx);
                z += scores[j];
            }
            T* pr = c.probs.data() + (static_cast<size_t>(h) * nq + i) * nk;
            T* ct = c.ctx.data() + static_cast<size_t>(i) * d + off;
            for (int j = 0; j < limit; ++j) {
                pr[j] = scores[j] / z;
                const T* vj = c.v.data() + static_cast<size_t>(j) * d + off;
                for (int e = 0; e < dh; ++e) ct[e] += pr[j] * vj[e];
            }
        }
    }
    linear_fwd(c.ctx.data(), nq, d, wo, bo, d, out);
}

template <typename T>
void attention_bwd(const T* xq, int nq, const T* xkv, int nk, int d, int heads, bool causal,
                   const T* wq, const T* wk, const T* wv, const T* wo, const AttnCache<T>& c,
                   const T* dout, T* dxq, T* dxkv, T* dwq, T* dbq, T* dwk, T* dbk, T* dwv, T* dbv,
                   T* dwo, T* dbo) {
    const int dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    std::vector<T> dctx(static_cast<size_t>(nq) * d, T(0));
    std::vector<T> dq(static_cast<size_t>(nq) * d, T(0));
    std::vector<T> dk(static_cast<size_t>(nk) * d, T(0));
    std::vector<T> dv(static_cast<size_t>(nk) * d, T(0));
    linear_bwd(c.ctx.data(), wo, dout, nq, d, d, dctx.data(), dwo, dbo);

    std::vector<T> dp(nk);
    for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int i = 0; i < nq; ++i) {
            const int limit = causal ? std::min(nk, i + 1) : nk;
            const T* pr = c.probs.data() + (static_cast<size_t>(h) * nq + i) * nk;
            const T* dct = dctx.data() + static_cast<size_t>(i) * d + off;
            T dot_dp_p = 0;
            for (int j = 0; j < limit; ++j) {
                const T* vj = c.v.data() + static_cast<size_t>(j) * d + off;
                T* dvj = dv.data() + static_cast<size_t>(j) * d + off;
                T acc = 0;
                for (int e = 0; e < dh; ++e) {
                    acc += dct[e] * vj[e];
                    dvj[e] += pr[j] * dct[e];
                }
                dp[j] = acc;
                dot_dp_p += acc * pr[j];
            }
            const T* qi = c.q.data() + static_cast<size_t>(i) * d + off;
            T* dqi = dq.data() + static_cast<size_t>(i) * d + off;
            for (int j = 0; j < limit; ++j) {
                const T ds = pr[j] * (dp[j] - dot_dp_p) * scale;
                const T* kj = c.k.data() + static_cast<size_t>(j) * d + off;
                T* dkj = dk.data() + static_cast<size_t>(j) * d + off;
                for (int e = 0; e < dh; ++e) {
                    dqi[e] += ds * kj[e];
                    dkj[e] += ds * qi[e];
                }
            }
        }
    }
    linear_bwd(xq, wq, dq.data(), nq, d, d, dxq, dwq, dbq);
    linear_bwd(xkv, wk, dk.data(), nk, d, d, dxkv, dwk, dbk);
    linear_bwd(xkv, wv, dv.data(), nk, d, d, dxkv, dwv, dbv);
}

// ---------------------------------------------------------------------------
// model
// ---------------------------------------------------------------------------

template <typename T>
class TransformerModel final : public ModelImpl {
public:
    TransformerModel(ModelConfig cfg, Vocabulary vocab) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
        build_index();
        init_params();
    }

    std::unique_ptr<ModelImpl> clone() const override {
        return std::make_unique<TransformerModel<T>>(*this);
    }

    const ModelConfig& config() const override { return cfg_; }
    const Vocabulary& vocab() const override { return vocab_; }
    const std::vector<ParamInfo>& index() const override { return index_; }

    std::vector<double> param_values(const std::string& name) const override {
        const int e = entry(name);
        std::vector<double> out(index_[e].size);
        const T* src = w_.data() + offsets_[e];
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(src[i]);
        return out;
    }

    void set_param_values(const std::string& name, const std::vector<double>& v) override {
        const int e = entry(name);
        if (v.size() != index_[e].size)
            throw InputError("parameter '" + name + "' expects " + std::to_string(index_[e].size) +
                             " values, got " + std::to_string(v.size()));
        T* dst = w_.data() + offsets_[e];
        for (size_t i = 0; i < v.size(); ++i) dst[i] = static_cast<T>(v[i]);
    }

    std::vector<double> raw_values() const override {
        return std::vector<double>(w_.begin(), w_.end());
    }

    void set_raw_values(const std::vector<double>& v) override {
        if (v.size() != w_.size())
            throw CorruptionError("parameter blob size mismatch: expected " +
                                  std::to_string(w_.size()) + ", got " + std::to_string(v.size()));
        for (size_t i = 0; i < v.size(); ++i) w_[i] = static_cast<T>(v[i]);
    }

    void set_freeze_policy(FreezePolicy p) override {
        policy_ = p;
        for (auto& e : index_)
            e.trainable = (p == FreezePolicy::none) || e.name.rfind("adapter.", 0) == 0;
        if (p == FreezePolicy::adapter_only && !cfg_.adapter)
            throw ConfigError("adapter_only freeze policy requires a model with an adapter");
    }

    FreezePolicy freeze_policy() const override { return policy_; }

    std::size_t trainable_scalar_count() const override {
        std::size_t n = 0;
        for (const auto& e : index_)
            if (e.trainable) n += e.size;
        return n;
    }

    EncoderStates encode(const std::vector<int>& ids) const override {
        check_ids(ids, cfg_.max_seq_len);
        if (ids.empty()) throw InputError("encode requires at least one token id");
        EncCache c;
        encoder_fwd(ids, c);
        EncoderStates out;
        out.len = static_cast<int>(ids.size());
        out.dim = cfg_.embed_dim;
        out.data.assign(c.pre_adapter.begin(), c.pre_adapter.end());
        return out;
    }

    EncoderStates apply_adapter(const EncoderStates& states) const override {
        if (!cfg_.adapter) throw ConfigError("model has no adapter");
        if (states.dim != cfg_.embed_dim)
            throw Error("adapter dimension mismatch: states dim " + std::to_string(states.dim) +
                        " vs model dim " + std::to_string(cfg_.embed_dim));
        const int n = states.len;
        const int d = cfg_.embed_dim;
        const int h = cfg_.adapter_dim;
        std::vector<T> x(states.data.begin(), states.data.end());
        std::vector<T> z(static_cast<size_t>(n) * h), r;
        std::vector<T> y(static_cast<size_t>(n) * d);
        linear_fwd(x.data(), n, d, P(ad_w1_), P(ad_b1_), h, z.data());
        for (T& v : z) v = std::max(v, T(0));
        linear_fwd(z.data(), n, h, P(ad_w2_), P(ad_b2_), d, y.data());
        if (cfg_.adapter_residual)
            for (size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        EncoderStates out;
        out.len = n;
        out.dim = d;
        out.data.assign(y.begin(), y.end());
        return out;
    }

    double forward_loss(const Batch& batch) const override {
        if (batch.empty()) throw InputError("empty batch");
        double total_nll = 0;
        size_t total_pos = 0;
        for (const Example& ex : batch) {
            ExampleCache c;
            total_nll += example_fwd(ex, c);
            total_pos += c.targets.size();
        }
        return total_nll / static_cast<double>(total_pos);
    }

    double backward(const Batch& batch) override {
        if (batch.empty()) throw InputError("empty batch");
        std::fill(g_.begin(), g_.end(), T(0));

        std::vector<ExampleCache> caches(batch.size());
        double total_nll = 0;
        size_t total_pos = 0;
        for (size_t i = 0; i < batch.size(); ++i) {
            total_nll += example_fwd(batch[i], caches[i]);
            total_pos += caches[i].targets.size();
        }
        for (size_t i = 0; i < batch.size(); ++i) example_bwd(batch[i], caches[i], total_pos);
        return total_nll / static_cast<double>(total_pos);
    }

    std::map<std::string, std::vector<double>> gradients() const override {
        std::map<std::string, std::vector<double>> out;
        for (size_t e = 0; e < index_.size(); ++e) {
            if (!index_[e].trainable) continue;
            const T* src = g_.data() + offsets_[e];
            out.emplace(index_[e].name, std::vector<double>(src, src + index_[e].size));
        }
        return out;
    }

    std::vector<double> trainable_grad_flat() const override {
        std::vector<double> out;
        out.reserve(trainable_scalar_count());
        for (size_t e = 0; e < index_.size(); ++e) {
            if (!index_[e].trainable) continue;
            const T* src = g_.data() + offsets_[e];
            out.insert(out.end(), src, src + index_[e].size);
        }
        return out;
    }

    void add_to_trainable(const std::vector<double>& delta) override {
        if (delta.size() != trainable_scalar_count())
            throw InputError("update size mismatch: expected " +
                             std::to_string(trainable_scalar_count()) + ", got " +
                             std::to_string(delta.size()));
        size_t pos = 0;
        for (size_t e = 0; e < index_.size(); ++e) {
            if (!index_[e].trainable) continue;
            T* dst = w_.data() + offsets_[e];
            for (size_t i = 0; i < index_[e].size; ++i)
                dst[i] = static_cast<T>(static_cast<double>(dst[i]) + delta[pos + i]);
            pos += index_[e].size;
        }
    }

    std::vector<int> generate(const std::vector<int>& src_ids, int src_lang_id, int tgt_lang_id,
                              const GenerateOptions& options) const override;

    double grad_check(const Batch& batch, double eps, int n_samples, std::uint64_t seed) override {
        if (cfg_.precision != Precision::fp64)
            throw ConfigError("grad_check requires a model in fp64 precision mode");
        if (eps <= 0) throw InputError("grad_check needs eps > 0");
        if (n_samples < 1) throw InputError("grad_check needs n_samples >= 1");

        std::vector<size_t> trainable_entries;
        for (size_t e = 0; e < index_.size(); ++e)
            if (index_[e].trainable) trainable_entries.push_back(e);
        if (trainable_entries.empty()) throw ConfigError("no trainable parameters to check");

        backward(batch);
        std::vector<T> analytic = g_;

        Rng rng(Rng::mix(seed, 0x6c4d));
        double max_rel = 0;
        for (int s = 0; s < n_samples; ++s) {
            const size_t e = trainable_entries[rng.next_below(trainable_entries.size())];
            const size_t flat = offsets_[e] + rng.next_below(index_[e].size);
            const T saved = w_[flat];
            w_[flat] = saved + static_cast<T>(eps);
            const double lp = forward_loss(batch);
            w_[flat] = saved - static_cast<T>(eps);
            const double lm = forward_loss(batch);
            w_[flat] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = static_cast<double>(analytic[flat]);
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            max_rel = std::max(max_rel, rel);
        }
        return max_rel;
    }

private:
    enum class Init { normal, zeros, ones };

    struct AttnRefs {
        int wq, bq, wk, bk, wv, bv, wo, bo;
    };
    struct FfnRefs {
        int w1, b1, w2, b2;
    };
    struct EncLayerRefs {
        int ln1_g, ln1_b, ln2_g, ln2_b;
        AttnRefs attn;
        FfnRefs ffn;
    };
    struct DecLayerRefs {
        int ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
        AttnRefs self_attn, cross_attn;
        FfnRefs ffn;
    };

    ModelConfig cfg_;
    Vocabulary vocab_;
    FreezePolicy policy_ = FreezePolicy::none;
    std::vector<ParamInfo> index_;
    std::vector<size_t> offsets_;
    std::unordered_map<std::string, int> by_name_;
    std::vector<Init> init_kind_;
    std::vector<T> w_, g_;

    int embed_tok_ = -1, enc_pos_ = -1, dec_pos_ = -1;
    std::vector<EncLayerRefs> enc_layers_;
    std::vector<DecLayerRefs> dec_layers_;
    int enc_f_g_ = -1, enc_f_b_ = -1, dec_f_g_ = -1, dec_f_b_ = -1;
    int out_w_ = -1, out_b_ = -1;
    int ad_w1_ = -1, ad_b1_ = -1, ad_w2_ = -1, ad_b2_ = -1;

    int ffn_dim() const { return 2 * cfg_.embed_dim; }

    int add(const std::string& name, std::vector<int> shape, Init kind) {
        size_t sz = 1;
        for (int s : shape) sz *= static_cast<size_t>(s);
        const size_t offset = w_.size();
        w_.resize(w_.size() + sz, T(0));
        index_.push_back({name, std::move(shape), sz, true});
        offsets_.push_back(offset);
        init_kind_.push_back(kind);
        by_name_.emplace(name, static_cast<int>(index_.size() - 1));
        return static_cast<int>(index_.size() - 1);
    }

    AttnRefs add_attn(const std::string& prefix) {
        const int d = cfg_.embed_dim;
        AttnRefs r;
        r.wq = add(prefix + ".wq", {d, d}, Init::normal);
        r.bq = add(prefix + ".bq", {d}, Init::zeros);
        r.wk = add(prefix + ".wk", {d, d}, Init::normal);
        r.bk = add(prefix + ".bk", {d}, Init::zeros);
        r.wv = add(prefix + ".wv", {d, d}, Init::normal);
        r.bv = add(prefix + ".bv", {d}, Init::zeros);
        r.wo = add(prefix + ".wo", {d, d}, Init::normal);
        r.bo = add(prefix + ".bo", {d}, Init::zeros);
        return r;
    }

    FfnRefs add_ffn(const std::string& prefix) {
        const int d = cfg_.embed_dim;
        const int f = ffn_dim();
        FfnRefs r;
        r.w1 = add(prefix + ".w1", {d, f}, Init::normal);
        r.b1 = add(prefix + ".b1", {f}, Init::zeros);
        r.w2 = add(prefix + ".w2", {f, d}, Init::normal);
        r.b2 = add(prefix + ".b2", {d}, Init::zeros);
        return r;
    }

    void build_index() {
        cfg_.validate();
        if (cfg_.vocab_size == 0) cfg_.vocab_size = vocab_.size();
        if (cfg_.vocab_size != vocab_.size())
            throw ConfigError("config vocab_size disagrees with vocabulary size");
        const int d = cfg_.embed_dim;
        embed_tok_ = add("embed.tok", {cfg_.vocab_size, d}, Init::normal);
        enc_pos_ = add("enc.pos", {cfg_.max_seq_len, d}, Init::normal);
        dec_pos_ = add("dec.pos", {cfg_.max_seq_len, d}, Init::normal);
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "enc.l" + std::to_string(l);
            EncLayerRefs r;
            r.ln1_g = add(p + ".ln1.g", {d}, Init::ones);
            r.ln1_b = add(p + ".ln1.b", {d}, Init::zeros);
            r.attn = add_attn(p + ".attn");
            r.ln2_g = add(p + ".ln2.g", {d}, Init::ones);
            r.ln2_b = add(p + ".ln2.b", {d}, Init::zeros);
            r.ffn = add_ffn(p + ".ffn");
            enc_layers_.push_back(r);
        }
        enc_f_g_ = add("enc.final.g", {d}, Init::ones);
        enc_f_b_ = add("enc.final.b", {d}, Init::zeros);
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "dec.l" + std::to_string(l);
            DecLayerRefs r;
            r.ln1_g = add(p + ".ln1.g", {d}, Init::ones);
            r.ln1_b = add(p + ".ln1.b", {d}, Init::zeros);
            r.self_attn = add_attn(p + ".self");
            r.ln2_g = add(p + ".ln2.g", {d}, Init::ones);
            r.ln2_b = add(p + ".ln2.b", {d}, Init::zeros);
            r.cross_attn = add_attn(p + ".cross");
            r.ln3_g = add(p + ".ln3.g", {d}, Init::ones);
            r.ln3_b = add(p + ".ln3.b", {d}, Init::zeros);
            r.ffn = add_ffn(p + ".ffn");
            dec_layers_.push_back(r);
        }
        dec_f_g_ = add("dec.final.g", {d}, Init::ones);
        dec_f_b_ = add("dec.final.b", {d}, Init::zeros);
        out_w_ = add("out.w", {d, cfg_.vocab_size}, Init::normal);
        out_b_ = add("out.b", {cfg_.vocab_size}, Init::zeros);
        // Adapter entries stay last so base parameters are identical for
        // the same seed with or without an adapter.
        if (cfg_.adapter) {
            const int h = cfg_.adapter_dim;
            ad_w1_ = add("adapter.w1", {d, h}, Init::normal);
            ad_b1_ = add("adapter.b1", {h}, Init::zeros);
            ad_w2_ = add("adapter.w2", {h, d},
                         cfg_.adapter_residual ? Init::zeros : Init::normal);
            ad_b2_ = add("adapter.b2", {d}, Init::zeros);
        }
        g_.assign(w_.size(), T(0));
    }

    void init_params() {
        constexpr double kInitStd = 0.05;
        Rng rng(Rng::mix(cfg_.seed, 0x1417));
        for (size_t e = 0; e < index_.size(); ++e) {
            T* dst = w_.data() + offsets_[e];
            switch (init_kind_[e]) {
                case Init::zeros:
                    break;
                case Init::ones:
                    std::fill(dst, dst + index_[e].size, T(1));
                    break;
                case Init::normal:
                    for (size_t i = 0; i < index_[e].size; ++i)
                        dst[i] = static_cast<T>(rng.next_normal() * kInitStd);
                    break;
            }
        }
    }

    int entry(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw InputError("unknown parameter: '" + name + "'");
        return it->second;
    }

    const T* P(int e) const { return w_.data() + offsets_[e]; }
    // Gradient slot; null when the entry is frozen so backward helpers skip
    // the accumulation work.
    T* G(int e) { return index_[e].trainable ? g_.data() + offsets_[e] : nullptr; }

    void check_ids(const std::vector<int>& ids, int max_len) const {
        if (static_cast<int>(ids.size()) > max_len)
            throw InputError("sequence length " + std::to_string(ids.size()) +
                             " exceeds max_seq_len " + std::to_string(max_len));
        for (int id : ids)
            if (id < 0 || id >= cfg_.vocab_size)
                throw InputError("token id out of range: " + std::to_string(id));
    }

    // ---- forward caches -------------------------------------------------

    struct EncLayerCache {
        LnCache<T> ln1, ln2;
        AttnCache<T> attn;
        std::vector<T> x_in, a, x1, f, z1, ff_in_relu;
    };

    struct EncCache {
        std::vector<int> ids;
        std::vector<T> emb;
        std::vector<EncLayerCache> layers;
        LnCache<T> lnf;
        std::vector<T> lnf_in;
        std::vector<T> pre_adapter;   // final encoder output, before adapter
        std::vector<T> ad_z;          // adapter hidden, post-relu
        std::vector<T> states;        // what the decoder cross-attends to
    };

    struct DecLayerCache {
        LnCache<T> ln1, ln2, ln3;
        AttnCache<T> self_attn, cross_attn;
        std::vector<T> y_in, a, y1, cattn_in, y2, f, z1;
    };

    struct DecCache {
        std::vector<int> ids;
        std::vector<T> emb;
        std::vector<DecLayerCache> layers;
        LnCache<T> lnf;
        std::vector<T> lnf_in;
        std::vector<T> dec_out;
        std::vector<T> probs;  // softmax over vocab per position
    };

    struct ExampleCache {
        EncCache enc;
        DecCache dec;
        std::vector<int> targets;
    };

    void embed_fwd(const std::vector<int>& ids, int pos_entry, std::vector<T>& out) const {
        const int d = cfg_.embed_dim;
        const int n = static_cast<int>(ids.size());
        out.resize(static_cast<size_t>(n) * d);
        const T* tok = P(embed_tok_);
        const T* pos = P(pos_entry);
        for (int i = 0; i < n; ++i) {
            const T* te = tok + static_cast<size_t>(ids[i]) * d;
            const T* pe = pos + static_cast<size_t>(i) * d;
            T* oi = out.data() + static_cast<size_t>(i) * d;
            for (int k = 0; k < d; ++k) oi[k] = te[k] + pe[k];
        }
    }

    void embed_bwd(const std::vector<int>& ids, int pos_entry, const T* dout) {
        const int d = cfg_.embed_dim;
        T* dtok = G(embed_tok_);
        T* dpos = G(pos_entry);
        for (size_t i = 0; i < ids.size(); ++i) {
            const T* di = dout + i * d;
            if (dtok) {
                T* t = dtok + static_cast<size_t>(ids[i]) * d;
                for (int k = 0; k < d; ++k) t[k] += di[k];
            }
            if (dpos) {
                T* p = dpos + i * d;
                for (int k = 0; k < d; ++k) p[k] += di[k];
            }
        }
    }

    void ffn_fwd(const FfnRefs& r, const T* f, int n, std::vector<T>& z1, std::vector<T>& out) const {
        const int d = cfg_.embed_dim;
        const int fd = ffn_dim();
        z1.resize(static_cast<size_t>(n) * fd);
        out.resize(static_cast<size_t>(n) * d);
        linear_fwd(f, n, d, P(r.w1), P(r.b1), fd, z1.data());
        for (T& v : z1) v = std::max(v, T(0));  // z1 caches the post-relu value
        linear_fwd(z1.data(), n, fd, P(r.w2), P(r.b2), d, out.data());
    }

    void ffn_bwd(const FfnRefs& r, const T* f, const std::vector<T>& z1, int n, const T* dout,
                 T* df) {
        const int d = cfg_.embed_dim;
        const int fd = ffn_dim();
        std::vector<T> dz1(static_cast<size_t>(n) * fd, T(0));
        linear_bwd(z1.data(), P(r.w2), dout, n, fd, d, dz1.data(), G(r.w2), G(r.b2));
        for (size_t i = 0; i < dz1.size(); ++i)
            if (z1[i] == T(0)) dz1[i] = T(0);
        linear_bwd(f, P(r.w1), dz1.data(), n, d, fd, df, G(r.w1), G(r.b1));
    }

    void encoder_fwd(const std::vector<int>& ids, EncCache& c) const {
        const int d = cfg_.embed_dim;
        const int n = static_cast<int>(ids.size());
        c.ids = ids;
        embed_fwd(ids, enc_pos_, c.emb);
        c.layers.resize(enc_layers_.size());
        std::vector<T> x = c.emb;
        for (size_t l = 0; l < enc_layers_.size(); ++l) {
            const EncLayerRefs& r = enc_layers_[l];
            EncLayerCache& lc = c.layers[l];
            lc.x_in = x;
            lc.a.resize(x.size());
            layernorm_fwd(lc.x_in.data(), n, d, P(r.ln1_g), P(r.ln1_b), lc.a.data(), lc.ln1);
            std::vector<T> sa(x.size());
            attention_fwd(lc.a.data(), n, lc.a.data(), n, d, cfg_.heads, false, P(r.attn.wq),
                          P(r.attn.bq), P(r.attn.wk), P(r.attn.bk), P(r.attn.wv), P(r.attn.bv),
                          P(r.attn.wo), P(r.attn.bo), sa.data(), lc.attn);
            lc.x1.resize(x.size());
            for (size_t i = 0; i < x.size(); ++i) lc.x1[i] = lc.x_in[i] + sa[i];
            lc.f.resize(x.size());
            layernorm_fwd(lc.x1.data(), n, d, P(r.ln2_g), P(r.ln2_b), lc.f.data(), lc.ln2);
            std::vector<T> ff;
            ffn_fwd(r.ffn, lc.f.data(), n, lc.z1, ff);
            x.resize(lc.x1.size());
            for (size_t i = 0; i < x.size(); ++i) x[i] = lc.x1[i] + ff[i];
        }
        c.lnf_in = x;
        c.pre_adapter.resize(x.size());
        layernorm_fwd(c.lnf_in.data(), n, d, P(enc_f_g_), P(enc_f_b_), c.pre_adapter.data(), c.lnf);

        if (cfg_.adapter) {
            const int h = cfg_.adapter_dim;
            c.ad_z.resize(static_cast<size_t>(n) * h);
            linear_fwd(c.pre_adapter.data(), n, d, P(ad_w1_), P(ad_b1_), h, c.ad_z.data());
            for (T& v : c.ad_z) v = std::max(v, T(0));
            c.states.resize(x.size());
            linear_fwd(c.ad_z.data(), n, h, P(ad_w2_), P(ad_b2_), d, c.states.data());
            if (cfg_.adapter_residual)
                for (size_t i = 0; i < c.states.size(); ++i) c.states[i] += c.pre_adapter[i];
        } else {
            c.states = c.pre_adapter;
        }
    }

    bool need_encoder_grads() const {
        for (const auto& e : index_) {
            if (!e.trainable) continue;
            if (e.name.rfind("enc.", 0) == 0 || e.name == "embed.tok") return true;
        }
        return false;
    }

    // denc_states: gradient at the decoder-visible encoder states.
    void encoder_bwd(EncCache& c, std::vector<T>& denc_states) {
        const int d = cfg_.embed_dim;
        const int n = static_cast<int>(c.ids.size());

        std::vector<T> dpre(static_cast<size_t>(n) * d, T(0));
        if (cfg_.adapter) {
            const int h = cfg_.adapter_dim;
            std::vector<T> dz(static_cast<size_t>(n) * h, T(0));
            linear_bwd(c.ad_z.data(), P(ad_w2_), denc_states.data(), n, h, d, dz.data(), G(ad_w2_),
                       G(ad_b2_));
            for (size_t i = 0; i < dz.size(); ++i)
                if (c.ad_z[i] == T(0)) dz[i] = T(0);
            linear_bwd(c.pre_adapter.data(), P(ad_w1_), dz.data(), n, d, h, dpre.data(), G(ad_w1_),
                       G(ad_b1_));
            if (cfg_.adapter_residual)
                for (size_t i = 0; i < dpre.size(); ++i) dpre[i] += denc_states[i];
        } else {
            dpre = denc_states;
        }

        if (!need_encoder_grads()) return;

        std::vector<T> dcur(static_cast<size_t>(n) * d, T(0));
        layernorm_bwd(c.lnf, n, d, P(enc_f_g_), dpre.data(), dcur.data(), G(enc_f_g_), G(enc_f_b_));

        std::vector<T> tmp;
        for (int l = static_cast<int>(enc_layers_.size()) - 1; l >= 0; --l) {
            const EncLayerRefs& r = enc_layers_[l];
            EncLayerCache& lc = c.layers[l];
            // x2 = x1 + FFN(LN2(x1))
            tmp.assign(static_cast<size_t>(n) * d, T(0));
            ffn_bwd(r.ffn, lc.f.data(), lc.z1, n, dcur.data(), tmp.data());
            layernorm_bwd(lc.ln2, n, d, P(r.ln2_g), tmp.data(), dcur.data(), G(r.ln2_g), G(r.ln2_b));
            // x1 = x0 + Attn(LN1(x0))
            tmp.assign(static_cast<size_t>(n) * d, T(0));
            attention_bwd(lc.a.data(), n, lc.a.data(), n, d, cfg_.heads, false, P(r.attn.wq),
                          P(r.attn.wk), P(r.attn.wv), P(r.attn.wo), lc.attn, dcur.data(), tmp.data(),
                          tmp.data(), G(r.attn.wq), G(r.attn.bq), G(r.attn.wk), G(r.attn.bk),
                          G(r.attn.wv), G(r.attn.bv), G(r.attn.wo), G(r.attn.bo));
            layernorm_bwd(lc.ln1, n, d, P(r.ln1_g), tmp.data(), dcur.data(), G(r.ln1_g), G(r.ln1_b));
        }
        embed_bwd(c.ids, enc_pos_, dcur.data());
    }

    void decoder_fwd(const std::vector<int>& dec_ids, const std::vector<T>& enc_states,
                     int enc_len, DecCache& c) const {
        const int d = cfg_.embed_dim;
        const int n = static_cast<int>(dec_ids.size());
        c.ids = dec_ids;
        embed_fwd(dec_ids, dec_pos_, c.emb);
        c.layers.resize(dec_layers_.size());
        std::vector<T> y = c.emb;
        for (size_t l = 0; l < dec_layers_.size(); ++l) {
            const DecLayerRefs& r = dec_layers_[l];
            DecLayerCache& lc = c.layers[l];
            lc.y_in = y;
            lc.a.resize(y.size());
            layernorm_fwd(lc.y_in.data(), n, d, P(r.ln1_g), P(r.ln1_b), lc.a.data(), lc.ln1);
            std::vector<T> sa(y.size());
            attention_fwd(lc.a.data(), n, lc.a.data(), n, d, cfg_.heads, true, P(r.self_attn.wq),
                          P(r.self_attn.bq), P(r.self_attn.wk), P(r.self_attn.bk), P(r.self_attn.wv),
                          P(r.self_attn.bv), P(r.self_attn.wo), P(r.self_attn.bo), sa.data(),
                          lc.self_attn);
            lc.y1.resize(y.size());
            for (size_t i = 0; i < y.size(); ++i) lc.y1[i] = lc.y_in[i] + sa[i];
            lc.cattn_in.resize(y.size());
            layernorm_fwd(lc.y1.data(), n, d, P(r.ln2_g), P(r.ln2_b), lc.cattn_in.data(), lc.ln2);
            std::vector<T> ca(y.size());
            attention_fwd(lc.cattn_in.data(), n, enc_states.data(), enc_len, d, cfg_.heads, false,
                          P(r.cross_attn.wq), P(r.cross_attn.bq), P(r.cross_attn.wk),
                          P(r.cross_attn.bk), P(r.cross_attn.wv), P(r.cross_attn.bv),
                          P(r.cross_attn.wo), P(r.cross_attn.bo), ca.data(), lc.cross_attn);
            lc.y2.resize(y.size());
            for (size_t i = 0; i < y.size(); ++i) lc.y2[i] = lc.y1[i] + ca[i];
            lc.f.resize(y.size());
            layernorm_fwd(lc.y2.data(), n, d, P(r.ln3_g), P(r.ln3_b), lc.f.data(), lc.ln3);
            std::vector<T> ff;
            ffn_fwd(r.ffn, lc.f.data(), n, lc.z1, ff);
            y.resize(lc.y2.size());
            for (size_t i = 0; i < y.size(); ++i) y[i] = lc.y2[i] + ff[i];
        }
        c.lnf_in = y;
        c.dec_out.resize(y.size());
        layernorm_fwd(c.lnf_in.data(), n, d, P(dec_f_g_), P(dec_f_b_), c.dec_out.data(), c.lnf);
    }

    // Fills c.probs (softmax rows) and returns the summed NLL of targets.
    double logits_and_nll(DecCache& c, const std::vector<int>& targets) const {
        const int d = cfg_.embed_dim;
        const int V = cfg_.vocab_size;
        const int n = static_cast<int>(c.ids.size());
        std::vector<T> logits(static_cast<size_t>(n) * V);
        linear_fwd(c.dec_out.data(), n, d, P(out_w_), P(out_b_), V, logits.data());
        c.probs.resize(logits.size());
        double nll = 0;
        for (int i = 0; i < n; ++i) {
            const T* li = logits.data() + static_cast<size_t>(i) * V;
            T* pi = c.probs.data() + static_cast<size_t>(i) * V;
            T mx = li[0];
            for (int v = 1; v < V; ++v) mx = std::max(mx, li[v]);
            T z = 0;
            for (int v = 0; v < V; ++v) {
                pi[v] = std::exp(li[v] - mx);
                z += pi[v];
            }
            for (int v = 0; v < V; ++v) pi[v] /= z;
            nll -= std::log(static_cast<double>(pi[targets[i]]) + 1e-30);
        }
        return nll;
    }

    double example_fwd(const Example& ex, ExampleCache& c) const {
        check_ids(ex.src, cfg_.max_seq_len - 1);
        check_ids(ex.tgt, cfg_.max_seq_len - 1);
        check_ids({ex.src_lang_id, ex.tgt_lang_id}, 2);

        std::vector<int> enc_ids;
        enc_ids.reserve(ex.src.size() + 1);
        enc_ids.push_back(ex.src_lang_id);
        enc_ids.insert(enc_ids.end(), ex.src.begin(), ex.src.end());

        std::vector<int> dec_ids;
        dec_ids.reserve(ex.tgt.size() + 1);
        dec_ids.push_back(ex.tgt_lang_id);
        dec_ids.insert(dec_ids.end(), ex.tgt.begin(), ex.tgt.end());

        c.targets = ex.tgt;
        c.targets.push_back(vocab_.eos_id());

        encoder_fwd(enc_ids, c.enc);
        decoder_fwd(dec_ids, c.enc.states, static_cast<int>(enc_ids.size()), c.dec);
        return logits_and_nll(c.dec, c.targets);
    }

    void example_bwd(const Example& ex, ExampleCache& c, size_t total_pos) {
        const int d = cfg_.embed_dim;
        const int V = cfg_.vocab_size;
        const int n = static_cast<int>(c.dec.ids.size());
        const int enc_len = static_cast<int>(c.enc.ids.size());

        // d(logits) = (softmax - onehot) / total positions
        std::vector<T> dlogits(c.dec.probs.size());
        const T inv = static_cast<T>(1.0 / static_cast<double>(total_pos));
        for (int i = 0; i < n; ++i) {
            const T* pi = c.dec.probs.data() + static_cast<size_t>(i) * V;
            T* dli = dlogits.data() + static_cast<size_t>(i) * V;
            for (int v = 0; v < V; ++v) dli[v] = pi[v] * inv;
            dli[c.targets[i]] -= inv;
        }

        std::vector<T> ddec_out(static_cast<size_t>(n) * d, T(0));
        linear_bwd(c.dec.dec_out.data(), P(out_w_), dlogits.data(), n, d, V, ddec_out.data(),
                   G(out_w_), G(out_b_));

        std::vector<T> dcur(static_cast<size_t>(n) * d, T(0));
        layernorm_bwd(c.dec.lnf, n, d, P(dec_f_g_), ddec_out.data(), dcur.data(), G(dec_f_g_),
                      G(dec_f_b_));

        std::vector<T> denc_states(static_cast<size_t>(enc_len) * d, T(0));
        std::vector<T> tmp;
        for (int l = static_cast<int>(dec_layers_.size()) - 1; l >= 0; --l) {
            const DecLayerRefs& r = dec_layers_[l];
            DecLayerCache& lc = c.dec.layers[l];
            // y3 = y2 + FFN(LN3(y2))
            tmp.assign(static_cast<size_t>(n) * d, T(0));
            ffn_bwd(r.ffn, lc.f.data(), lc.z1, n, dcur.data(), tmp.data());
            layernorm_bwd(lc.ln3, n, d, P(r.ln3_g), tmp.data(), dcur.data(), G(r.ln3_g), G(r.ln3_b));
            // y2 = y1 + CrossAttn(LN2(y1), enc)
            tmp.assign(static_cast<size_t>(n) * d, T(0));
            attention_bwd(lc.cattn_in.data(), n, c.enc.states.data(), enc_len, d, cfg_.heads, false,
                          P(r.cross_attn.wq), P(r.cross_attn.wk), P(r.cross_attn.wv),
                          P(r.cross_attn.wo), lc.cross_attn, dcur.data(), tmp.data(),
                          denc_states.data(), G(r.cross_attn.wq), G(r.cross_attn.bq),
                          G(r.cross_attn.wk), G(r.cross_attn.bk), G(r.cross_attn.wv),
                          G(r.cross_attn.bv), G(r.cross_attn.wo), G(r.cross_attn.bo));
            layernorm_bwd(lc.ln2, n, d, P(r.ln2_g), tmp.data(), dcur.data(), G(r.ln2_g), G(r.ln2_b));
            // y1 = y0 + SelfAttn(LN1(y0))
            tmp.assign(static_cast<size_t>(n) * d, T(0));
            attention_bwd(lc.a.data(), n, lc.a.data(), n, d, cfg_.heads, true, P(r.self_attn.wq),
                          P(r.self_attn.wk), P(r.self_attn.wv), P(r.self_attn.wo), lc.self_attn,
                          dcur.data(), tmp.data(), tmp.data(), G(r.self_attn.wq), G(r.self_attn.bq),
                          G(r.self_attn.wk), G(r.self_attn.bk), G(r.self_attn.wv), G(r.self_attn.bv),
                          G(r.self_attn.wo), G(r.self_attn.bo));
            layernorm_bwd(lc.ln1, n, d, P(r.ln1_g), tmp.data(), dcur.data(), G(r.ln1_g), G(r.ln1_b));
        }
        embed_bwd(c.dec.ids, dec_pos_, dcur.data());
        encoder_bwd(c.enc, denc_states);
    }
};

// ---------------------------------------------------------------------------
// generation
// ---------------------------------------------------------------------------

template <typename T>
std::vector<int> TransformerModel<T>::generate(const std::vector<int>& src_ids, int src_lang_id,
                                               int tgt_lang_id, const GenerateOptions& options) const {
    if (options.beam_width < 1) throw ConfigError("beam width must be >= 1");
    if (options.max_len < 0) throw ConfigError("max_len must be >= 0");
    check_ids(src_ids, cfg_.max_seq_len - 1);
    check_ids({src_lang_id, tgt_lang_id}, 2);

    std::vector<int> enc_ids;
    enc_ids.reserve(src_ids.size() + 1);
    enc_ids.push_back(src_lang_id);
    enc_ids.insert(enc_ids.end(), src_ids.begin(), src_ids.end());
    EncCache enc;
    encoder_fwd(enc_ids, enc);
    const int enc_len = static_cast<int>(enc_ids.size());
    const int eos = vocab_.eos_id();
    const int max_new = std::min(options.max_len, cfg_.max_seq_len - 1);

    // Log-probabilities of the next token after the given decoder prefix.
    auto next_logprobs = [&](const std::vector<int>& dec_ids) {
        DecCache dec;
        decoder_fwd(dec_ids, enc.states, enc_len, dec);
        const int d = cfg_.embed_dim;
        const int V = cfg_.vocab_size;
        const T* last = dec.dec_out.data() + (dec_ids.size() - 1) * static_cast<size_t>(d);
        std::vector<double> logits(V);
        const T* w = P(out_w_);
        const T* b = P(out_b_);
        for (int v = 0; v < V; ++v) logits[v] = static_cast<double>(b[v]);
        for (int k = 0; k < d; ++k) {
            const double x = static_cast<double>(last[k]);
            const T* wk = w + static_cast<size_t>(k) * V;
            for (int v = 0; v < V; ++v) logits[v] += x * static_cast<double>(wk[v]);
        }
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0;
        for (double v : logits) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        for (double& v : logits) v -= lse;
        return logits;
    };

    struct Hyp {
        std::vector<int> ids;  // starts with the target-language token
        double score = 0;
        bool done = false;
    };

    std::vector<Hyp> live{Hyp{{tgt_lang_id}, 0.0, false}};
    std::vector<Hyp> finished;
    const int k = options.mode == GenerateOptions::Mode::greedy ? 1 : options.beam_width;

    for (int step = 0; step < max_new && !live.empty(); ++step) {
        struct Cand {
            double score;
            size_t hyp;
            int token;
        };
        std::vector<Cand> cands;
        for (size_t hi = 0; hi < live.size(); ++hi) {
            const std::vector<double> lp = next_logprobs(live[hi].ids);
            for (int v = 0; v < static_cast<int>(lp.size()); ++v)
                cands.push_back({live[hi].score + lp[v], hi, v});
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.hyp != b.hyp) return a.hyp < b.hyp;
            return a.token < b.token;
        });
        std::vector<Hyp> next;
        for (const Cand& cand : cands) {
            if (static_cast<int>(next.size() + finished.size()) >= k &&
                static_cast<int>(next.size()) >= k)
                break;
            Hyp h = live[cand.hyp];
            h.ids.push_back(cand.token);
            h.score = cand.score;
            if (cand.token == eos) {
                h.done = true;
                finished.push_back(std::move(h));
            } else {
                next.push_back(std::move(h));
            }
            if (static_cast<int>(next.size()) >= k) break;
        }
        live = std::move(next);
        if (static_cast<int>(finished.size()) >= k) break;
    }

    const Hyp* best = nullptr;
    for (const Hyp& h : finished)
        if (!best || h.score > best->score) best = &h;
    for (const Hyp& h : live)
        if (!best || h.score > best->score) best = &h;

    std::vector<int> out;
    if (best) {
        for (size_t i = 1; i < best->ids.size(); ++i)  // skip the language seed
            if (best->ids[i] != eos) out.push_back(best->ids[i]);
    }
    return out;
}

}  // namespace xdetox::detail
