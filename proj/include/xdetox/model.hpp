#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "xdetox/vocab.hpp"

namespace xdetox {

enum class Precision { fp32, fp64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct ModelConfig {
    int vocab_size = 0;  // filled from the vocabulary at init
    int embed_dim = 64;
    int layers = 1;
    int heads = 4;
    int max_seq_len = 32;
    bool adapter = false;
    int adapter_dim = 16;
    bool adapter_residual = true;
    Precision precision = Precision::fp32;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError
    bool operator==(const ModelConfig&) const = default;
};

struct ParamInfo {
    std::string name;
    std::vector<int> shape;
    std::size_t size = 0;
    bool trainable = true;
};

enum class FreezePolicy { none, adapter_only };

std::string to_string(FreezePolicy p);
FreezePolicy freeze_policy_from_string(const std::string& s);

// One teacher-forcing example: content token ids plus the language-control
// ids that condition the encoder and the decoder start.
struct Example {
    std::vector<int> src;
    std::vector<int> tgt;
    int src_lang_id = 0;
    int tgt_lang_id = 0;
};
using Batch = std::vector<Example>;

struct GenerateOptions {
    enum class Mode { greedy, beam };
    Mode mode = Mode::greedy;
    int beam_width = 1;
    int max_len = 24;
};

// Encoder states: one embed_dim-sized row per input position.
struct EncoderStates {
    int len = 0;
    int dim = 0;
    std::vector<double> data;  // row-major [len][dim]

    double at(int pos, int i) const { return data[static_cast<size_t>(pos) * dim + i]; }
};

namespace detail {
class ModelImpl;
}

// Small differentiable encoder-decoder with an optional position-wise
// adapter bottleneck between encoder and decoder. Single-writer for
// training; frozen snapshots are safe to read from many threads.
class Seq2SeqModel {
public:
    Seq2SeqModel() = default;
    ~Seq2SeqModel();
    Seq2SeqModel(Seq2SeqModel&&) noexcept;
    Seq2SeqModel& operator=(Seq2SeqModel&&) noexcept;
    Seq2SeqModel(const Seq2SeqModel&);
    Seq2SeqModel& operator=(const Seq2SeqModel&);

    // Deterministic for a fixed seed; base parameters do not depend on the
    // adapter flag, and the adapter starts as an identity when the residual
    // connection is enabled (W2 = 0).
    static Seq2SeqModel init(ModelConfig config, Vocabulary vocab);

    const ModelConfig& config() const;
    const Vocabulary& vocab() const;

    const std::vector<ParamInfo>& param_index() const;
    std::vector<double> param_values(const std::string& name) const;
    void set_param_values(const std::string& name, const std::vector<double>& values);
    std::vector<double> raw_values() const;  // flat, index order
    void set_raw_values(const std::vector<double>& values);

    void set_freeze_policy(FreezePolicy policy);
    FreezePolicy freeze_policy() const;
    std::size_t trainable_scalar_count() const;

    EncoderStates encode(const std::vector<int>& token_ids) const;
    EncoderStates apply_adapter(const EncoderStates& states) const;

    double forward_loss(const Batch& batch) const;

    // Computes the loss and gradients for every trainable parameter.
    double backward(const Batch& batch);
    std::map<std::string, std::vector<double>> gradients() const;  // trainable entries only
    std::vector<double> trainable_grad_flat() const;
    void add_to_trainable(const std::vector<double>& delta);

    std::vector<int> generate(const std::vector<int>& src_ids, int src_lang_id, int tgt_lang_id,
                              const GenerateOptions& options = {}) const;

    // Max relative error between analytic and central-difference gradients
    // over n randomly sampled trainable scalars. fp64 models only.
    double grad_check(const Batch& batch, double eps, int n_samples, std::uint64_t seed = 0);

private:
    std::unique_ptr<detail::ModelImpl> impl_;
};

}  // namespace xdetox
