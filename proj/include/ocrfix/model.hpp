#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ocrfix/ops.hpp"
#include "ocrfix/tape.hpp"
#include "ocrfix/tensor.hpp"
#include "ocrfix/vocab.hpp"

namespace ocrfix::model {

struct CrConfig {
    std::size_t embed_dim = 128;
    std::size_t hidden_dim = 256;
    std::size_t conv_layers = 3;  // k; 0 gives the plain attention baseline
    double lambda = 0.1;          // copy-dampening weight, 0 <= lambda < 1
    std::size_t max_len = 128;    // characters per input snippet
    double init_scale = 0.08;
    std::uint64_t seed = 1;

    static constexpr std::size_t kKernelSize = 3;

    // Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
    // Width of one attention value vector: [h^l, h_rnn] or h_rnn alone.
    std::size_t context_dim() const { return conv_layers > 0 ? 3 * hidden_dim : 2 * hidden_dim; }
};

std::string config_to_json(const CrConfig& config);
CrConfig config_from_json(std::string_view json);

// One training/eval example as id sequences (no SOS/EOS).
struct Example {
    std::vector<int> source;
    std::vector<int> target;
};

// Time-major padded batch. Row index for step t of sequence b is t*batch+b.
struct Batch {
    std::size_t batch = 0;
    std::size_t src_len = 0;    // T
    std::size_t tgt_steps = 0;  // decoder steps = longest target + 1 (EOS)
    std::vector<int> src_ids;          // [T*B], PAD padded
    std::vector<std::size_t> src_lengths;
    std::vector<int> dec_inputs;       // [S*B], SOS then target chars
    std::vector<int> targets;          // [S*B], target chars then EOS, -1 past the end
    std::vector<int> loss_source;      // [S*B], source chars then EOS, PAD past the end
};

Batch make_batch(std::span<const Example> examples);

struct EncoderOutputs {
    std::size_t steps = 0;
    std::size_t batch = 0;
    ad::Var h_rnn;                 // [T,B,2H] forward/backward states per position
    std::vector<ad::Var> h_conv;   // k tensors of [T,B,H]
    ad::Var h_final;               // [B,2H] last forward state, first backward state
    std::vector<ad::Var> keys;     // per attention layer, [T,B,H]
    std::vector<ad::Var> values;   // per attention layer, [T,B,context_dim]
    ad::Var score_mask;            // [B,T], 0 or -inf on PAD
};

struct DecoderState {
    ad::Var hidden;   // [B,H]
    ad::Var cell;     // [B,H]
    ad::Var context;  // [B,context_dim] from the previous step
};

struct AttentionResult {
    ad::Var context;                // [B,context_dim]
    std::vector<ad::Var> weights;   // per layer, [B,T]
};

struct StepOutput {
    ad::Var logits;    // [B,V]
    ad::Var features;  // [B,H+context_dim], the output projection input
    DecoderState next;
    AttentionResult attention;
};

class CrModel;

// Parameters placed on one tape, in CrModel::parameters() order.
class BoundModel {
public:
    BoundModel(const CrModel& model, ad::Tape& tape);

    const CrModel& model() const { return *model_; }
    ad::Tape& tape() const { return *tape_; }
    ad::Var param(std::size_t i) const { return vars_[i]; }
    const std::vector<ad::Var>& vars() const { return vars_; }

    EncoderOutputs encode(const Batch& batch) const;
    DecoderState initial_state(const EncoderOutputs& enc) const;
    AttentionResult attend(const EncoderOutputs& enc, ad::Var decoder_hidden) const;
    StepOutput decode_step(const EncoderOutputs& enc, const DecoderState& state,
                           std::span<const int> prev_ids) const;
    // Teacher-forced logits for every decoder step: [S*B, V].
    ad::Var teacher_forced_logits(const Batch& batch, const EncoderOutputs& enc) const;
    // Copy-dampened loss over the batch (see weighted_loss).
    ad::Var loss(const Batch& batch) const;

private:
    struct Lstm {
        ad::Var wx, wh, b;
    };
    // One LSTM step given the input projection x*wx+b; returns (h, c).
    std::pair<ad::Var, ad::Var> lstm_cell(const Lstm& p, ad::Var x_proj, ad::Var h, ad::Var c) const;
    ad::Var zeros(ad::Shape shape) const;

    const CrModel* model_;
    ad::Tape* tape_;
    std::vector<ad::Var> vars_;

    ad::Var embedding_;
    Lstm enc_fwd_, enc_bwd_, dec_;
    std::vector<ad::Var> conv_w_, conv_b_;
    ad::Var bridge_w_, bridge_b_, attn_query_, attn_key_, out_w_, out_b_;
};

// Per-step copy-dampening weights 1 - lambda * [source_i == target_i].
std::vector<double> copy_weights(std::span<const int> targets, std::span<const int> sources, double lambda);

// Mean over steps with target >= 0 of CE_i * (1 - lambda * [source_i == target_i]).
// Throws std::invalid_argument unless 0 <= lambda < 1.
ad::Var weighted_loss(ad::Tape& tape, ad::Var logits, std::span<const int> targets,
                      std::span<const int> sources, double lambda);

class CrModel {
public:
    CrModel(CrConfig config, CharVocab vocab);

    const CrConfig& config() const { return config_; }
    const CharVocab& vocab() const { return vocab_; }
    void set_lambda(double lambda);

    // Named tensors in a fixed order.
    const std::vector<std::pair<std::string, ad::Tensor>>& parameters() const { return params_; }
    std::vector<std::pair<std::string, ad::Tensor>>& parameters() { return params_; }
    std::size_t index_of(std::string_view name) const;
    std::size_t parameter_count() const;

    // Uniform(-init_scale, init_scale) from config.seed.
    void initialize();
    void fill(double v);

    Example encode_pair(std::string_view source, std::string_view target) const;

    // Greedy argmax decoding, batched. Each output stops at EOS or after
    // 2 x its input length steps. Specials are stripped.
    std::vector<std::string> greedy_decode(std::span<const std::string> inputs) const;
    std::string greedy_decode(std::string_view input) const;

    void save(const std::filesystem::path& path) const;
    static CrModel load(const std::filesystem::path& path);

private:
    void create_parameters();

    CrConfig config_;
    CharVocab vocab_;
    std::vector<std::pair<std::string, ad::Tensor>> params_;
};

}  // namespace ocrfix::model
