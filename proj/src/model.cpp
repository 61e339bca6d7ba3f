#include "ocrfix/model.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "ocrfix/text.hpp"

namespace ocrfix::model {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

void CrConfig::validate() const {
    if (embed_dim == 0 || hidden_dim == 0) throw std::invalid_argument("CrConfig: dimensions must be positive");
    if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("CrConfig: lambda must satisfy 0 <= lambda < 1");
    if (max_len == 0) throw std::invalid_argument("CrConfig: max_len must be positive");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("CrConfig: init_scale must be non-negative");
}

std::string config_to_json(const CrConfig& c) {
    nlohmann::ordered_json j;
    j["embed_dim"] = c.embed_dim;
    j["hidden_dim"] = c.hidden_dim;
    j["conv_layers"] = c.conv_layers;
    j["kernel_size"] = CrConfig::kKernelSize;
    j["lambda"] = c.lambda;
    j["max_len"] = c.max_len;
    j["init_scale"] = c.init_scale;
    j["seed"] = c.seed;
    return j.dump();
}

CrConfig config_from_json(std::string_view json) {
    const auto j = nlohmann::json::parse(json);
    CrConfig c;
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.conv_layers = j.at("conv_layers").get<std::size_t>();
    c.lambda = j.at("lambda").get<double>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.init_scale = j.value("init_scale", 0.08);
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.value("kernel_size", CrConfig::kKernelSize) != CrConfig::kKernelSize)
        throw std::invalid_argument("config: only kernel size 3 is supported");
    c.validate();
    return c;
}

Batch make_batch(std::span<const Example> examples) {
    if (examples.empty()) throw std::invalid_argument("make_batch: no examples");
    Batch b;
    b.batch = examples.size();
    for (const auto& e : examples) {
        if (e.source.empty()) throw EmptyInputError("make_batch: empty source sequence");
        b.src_len = std::max(b.src_len, e.source.size());
        b.tgt_steps = std::max(b.tgt_steps, e.target.size() + 1);
        b.src_lengths.push_back(e.source.size());
    }
    const std::size_t B = b.batch;
    b.src_ids.assign(b.src_len * B, CharVocab::kPad);
    b.dec_inputs.assign(b.tgt_steps * B, CharVocab::kPad);
    b.targets.assign(b.tgt_steps * B, -1);
    b.loss_source.assign(b.tgt_steps * B, CharVocab::kPad);
    for (std::size_t i = 0; i < B; ++i) {
        const auto& e = examples[i];
        for (std::size_t t = 0; t < e.source.size(); ++t) b.src_ids[t * B + i] = e.source[t];
        for (std::size_t s = 0; s <= e.target.size(); ++s) {
            b.dec_inputs[s * B + i] = s == 0 ? CharVocab::kSos : e.target[s - 1];
            b.targets[s * B + i] = s < e.target.size() ? e.target[s] : CharVocab::kEos;
        }
        for (std::size_t s = 0; s < b.tgt_steps; ++s) {
            if (s < e.source.size()) {
                b.loss_source[s * B + i] = e.source[s];
            } else if (s == e.source.size()) {
                b.loss_source[s * B + i] = CharVocab::kEos;
            }
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// CrModel

CrModel::CrModel(CrConfig config, CharVocab vocab) : config_(config), vocab_(std::move(vocab)) {
    config_.validate();
    create_parameters();
    initialize();
}

void CrModel::set_lambda(double lambda) {
    CrConfig c = config_;
    c.lambda = lambda;
    c.validate();
    config_ = c;
}

void CrModel::create_parameters() {
    const std::size_t E = config_.embed_dim;
    const std::size_t H = config_.hidden_dim;
    const std::size_t V = vocab_.size();
    const std::size_t C = config_.context_dim();
    params_.clear();
    auto add = [this](std::string name, Shape shape) { params_.emplace_back(std::move(name), Tensor(std::move(shape))); };
    add("embedding", {V, E});
    for (const char* dir : {"enc_fwd", "enc_bwd"}) {
        add(std::string(dir) + ".wx", {E, 4 * H});
        add(std::string(dir) + ".wh", {H, 4 * H});
        add(std::string(dir) + ".b", {4 * H});
    }
    for (std::size_t l = 0; l < config_.conv_layers; ++l) {
        const std::size_t cin = l == 0 ? E : H;
        add("conv" + std::to_string(l) + ".w", {CrConfig::kKernelSize, cin, 2 * H});
        add("conv" + std::to_string(l) + ".b", {2 * H});
    }
    add("bridge.w", {2 * H, H});
    add("bridge.b", {H});
    add("attn.query", {H, H});
    if (config_.conv_layers == 0) add("attn.key", {2 * H, H});
    add("dec.wx", {E + C, 4 * H});
    add("dec.wh", {H, 4 * H});
    add("dec.b", {4 * H});
    add("out.w", {H + C, V});
    add("out.b", {V});
}

std::size_t CrModel::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].first == name) return i;
    throw std::out_of_range("no parameter named " + std::string(name));
}

std::size_t CrModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.size();
    return n;
}

void CrModel::initialize() {
    std::mt19937_64 rng(config_.seed);
    std::uniform_real_distribution<double> u(-config_.init_scale, config_.init_scale);
    for (auto& [name, t] : params_)
        for (auto& x : t.data()) x = u(rng);
}

void CrModel::fill(double v) {
    for (auto& [name, t] : params_) t.fill(v);
}

Example CrModel::encode_pair(std::string_view source, std::string_view target) const {
    return Example{vocab_.encode(source), vocab_.encode(target)};
}

// ---------------------------------------------------------------------------
// BoundModel

BoundModel::BoundModel(const CrModel& model, Tape& tape) : model_(&model), tape_(&tape) {
    for (const auto& [name, t] : model.parameters()) vars_.push_back(tape.parameter(t));
    auto get = [&](std::string_view name) { return vars_[model.index_of(name)]; };
    embedding_ = get("embedding");
    enc_fwd_ = {get("enc_fwd.wx"), get("enc_fwd.wh"), get("enc_fwd.b")};
    enc_bwd_ = {get("enc_bwd.wx"), get("enc_bwd.wh"), get("enc_bwd.b")};
    for (std::size_t l = 0; l < model.config().conv_layers; ++l) {
        conv_w_.push_back(get("conv" + std::to_string(l) + ".w"));
        conv_b_.push_back(get("conv" + std::to_string(l) + ".b"));
    }
    bridge_w_ = get("bridge.w");
    bridge_b_ = get("bridge.b");
    attn_query_ = get("attn.query");
    if (model.config().conv_layers == 0) attn_key_ = get("attn.key");
    dec_ = {get("dec.wx"), get("dec.wh"), get("dec.b")};
    out_w_ = get("out.w");
    out_b_ = get("out.b");
}

Var BoundModel::zeros(Shape shape) const { return tape_->constant(Tensor(std::move(shape), 0.0)); }

std::pair<Var, Var> BoundModel::lstm_cell(const Lstm& p, Var x_proj, Var h, Var c) const {
    Tape& t = *tape_;
    const std::size_t H = model_->config().hidden_dim;
    const Var gates = ad::add(t, x_proj, ad::matmul(t, h, p.wh));
    // gate layout: input, forget, output (sigmoid) then candidate (tanh)
    const Var sig = ad::sigmoid(t, ad::slice(t, gates, 1, 0, 3 * H));
    const Var cand = ad::tanh(t, ad::slice(t, gates, 1, 3 * H, 4 * H));
    const Var in_gate = ad::slice(t, sig, 1, 0, H);
    const Var forget = ad::slice(t, sig, 1, H, 2 * H);
    const Var out_gate = ad::slice(t, sig, 1, 2 * H, 3 * H);
    const Var c_next = ad::add(t, ad::mul(t, forget, c), ad::mul(t, in_gate, cand));
    const Var h_next = ad::mul(t, out_gate, ad::tanh(t, c_next));
    return {h_next, c_next};
}

EncoderOutputs BoundModel::encode(const Batch& batch) const {
    Tape& t = *tape_;
    const auto& cfg = model_->config();
    const std::size_t H = cfg.hidden_dim;
    const std::size_t E = cfg.embed_dim;
    const std::size_t T = batch.src_len;
    const std::size_t B = batch.batch;
    for (auto len : batch.src_lengths)
        if (len == 0 || len > cfg.max_len)
            throw std::invalid_argument("encode: sequence length " + std::to_string(len) + " outside [1, " +
                                        std::to_string(cfg.max_len) + "]");

    EncoderOutputs enc;
    enc.steps = T;
    enc.batch = B;

    // valid[t*B+b] == 1 for real characters
    std::vector<double> valid(T * B, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < batch.src_lengths[b]; ++s) valid[s * B + b] = 1.0;
    const bool ragged = std::any_of(valid.begin(), valid.end(), [](double v) { return v == 0.0; });
    auto row_mask = [&](std::size_t rows_from, std::size_t rows, std::size_t width, bool invert) {
        Tensor m({rows, width});
        for (std::size_t r = 0; r < rows; ++r) {
            const double v = invert ? 1.0 - valid[rows_from + r] : valid[rows_from + r];
            std::fill(m.raw() + r * width, m.raw() + (r + 1) * width, v);
        }
        return t.constant(std::move(m));
    };

    Var emb = ad::embedding_lookup(t, embedding_, batch.src_ids);  // [T*B,E]
    if (ragged) emb = ad::mul(t, emb, row_mask(0, T * B, E, false));

    // Bidirectional LSTM. Padded steps carry the previous state through, so
    // the forward final state is the last real one and the backward pass
    // starts from zeros at each sequence's own end.
    std::vector<Var> fwd(T), bwd(T);
    for (int dir = 0; dir < 2; ++dir) {
        const Lstm& p = dir == 0 ? enc_fwd_ : enc_bwd_;
        const Var proj = ad::add(t, ad::matmul(t, emb, p.wx), p.b);  // [T*B,4H]
        Var h = zeros({B, H});
        Var c = zeros({B, H});
        for (std::size_t i = 0; i < T; ++i) {
            const std::size_t s = dir == 0 ? i : T - 1 - i;
            const Var xp = ad::slice(t, proj, 0, s * B, (s + 1) * B);
            auto [h_new, c_new] = lstm_cell(p, xp, h, c);
            bool full = true;
            for (std::size_t b = 0; b < B; ++b) full = full && valid[s * B + b] == 1.0;
            if (full) {
                h = h_new;
                c = c_new;
            } else {
                const Var keep = row_mask(s * B, B, H, false);
                const Var hold = row_mask(s * B, B, H, true);
                h = ad::add(t, ad::mul(t, keep, h_new), ad::mul(t, hold, h));
                c = ad::add(t, ad::mul(t, keep, c_new), ad::mul(t, hold, c));
            }
            (dir == 0 ? fwd : bwd)[s] = h;
        }
        if (dir == 0) {
            enc.h_final = h;
        } else {
            enc.h_final = ad::concat(t, {enc.h_final, h}, 1);
        }
    }
    std::vector<Var> per_step(T);
    for (std::size_t s = 0; s < T; ++s) per_step[s] = ad::concat(t, {fwd[s], bwd[s]}, 1);
    enc.h_rnn = ad::reshape(t, ad::concat(t, per_step, 0), {T, B, 2 * H});

    // Gated convolution stack; layer 0 reads the embeddings.
    Var x = ad::reshape(t, emb, {T, B, E});
    for (std::size_t l = 0; l < cfg.conv_layers; ++l) {
        Var h = ad::glu(t, ad::conv1d_same(t, x, conv_w_[l], conv_b_[l]));
        if (ragged) h = ad::mul(t, h, ad::reshape(t, row_mask(0, T * B, H, false), {T, B, H}));
        enc.h_conv.push_back(h);
        x = h;
    }

    if (cfg.conv_layers == 0) {
        const Var flat = ad::reshape(t, enc.h_rnn, {T * B, 2 * H});
        enc.keys.push_back(ad::reshape(t, ad::matmul(t, flat, attn_key_), {T, B, H}));
        enc.values.push_back(enc.h_rnn);
    } else {
        for (const Var h : enc.h_conv) {
            enc.keys.push_back(h);
            enc.values.push_back(ad::concat(t, {h, enc.h_rnn}, 2));
        }
    }

    Tensor mask({B, T}, 0.0);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = batch.src_lengths[b]; s < T; ++s) mask[b * T + s] = -std::numeric_limits<double>::infinity();
    enc.score_mask = t.constant(std::move(mask));
    return enc;
}

DecoderState BoundModel::initial_state(const EncoderOutputs& enc) const {
    Tape& t = *tape_;
    const std::size_t H = model_->config().hidden_dim;
    DecoderState s;
    s.hidden = ad::tanh(t, ad::add(t, ad::matmul(t, enc.h_final, bridge_w_), bridge_b_));
    s.cell = zeros({enc.batch, H});
    s.context = zeros({enc.batch, model_->config().context_dim()});
    return s;
}

AttentionResult BoundModel::attend(const EncoderOutputs& enc, Var decoder_hidden) const {
    Tape& t = *tape_;
    const Var query = ad::matmul(t, decoder_hidden, attn_query_);
    AttentionResult r;
    Var total;
    for (std::size_t l = 0; l < enc.keys.size(); ++l) {
        const Var scores = ad::add(t, ad::attention_scores(t, enc.keys[l], query), enc.score_mask);
        const Var weights = ad::row_softmax(t, scores);
        r.weights.push_back(weights);
        const Var ctx = ad::attention_context(t, weights, enc.values[l]);
        total = l == 0 ? ctx : ad::add(t, total, ctx);
    }
    r.context = enc.keys.size() == 1 ? total : ad::scale(t, total, 1.0 / static_cast<double>(enc.keys.size()));
    return r;
}

StepOutput BoundModel::decode_step(const EncoderOutputs& enc, const DecoderState& state,
                                   std::span<const int> prev_ids) const {
    Tape& t = *tape_;
    if (prev_ids.size() != enc.batch) throw ad::ShapeError("decode_step: one previous id per sequence required");
    const Var emb = ad::embedding_lookup(t, embedding_, prev_ids);
    const Var input = ad::concat(t, {emb, state.context}, 1);
    const Var proj = ad::add(t, ad::matmul(t, input, dec_.wx), dec_.b);
    auto [h, c] = lstm_cell(dec_, proj, state.hidden, state.cell);
    StepOutput out;
    out.attention = attend(enc, h);
    out.features = ad::concat(t, {h, out.attention.context}, 1);
    out.logits = ad::add(t, ad::matmul(t, out.features, out_w_), out_b_);
    out.next = DecoderState{h, c, out.attention.context};
    return out;
}

Var BoundModel::teacher_forced_logits(const Batch& batch, const EncoderOutputs& enc) const {
    Tape& t = *tape_;
    DecoderState state = initial_state(enc);
    const std::size_t B = batch.batch;
    std::vector<Var> features;
    features.reserve(batch.tgt_steps);
    for (std::size_t s = 0; s < batch.tgt_steps; ++s) {
        const std::span<const int> prev(batch.dec_inputs.data() + s * B, B);
        const Var emb = ad::embedding_lookup(t, embedding_, prev);
        const Var input = ad::concat(t, {emb, state.context}, 1);
        const Var proj = ad::add(t, ad::matmul(t, input, dec_.wx), dec_.b);
        auto [h, c] = lstm_cell(dec_, proj, state.hidden, state.cell);
        const auto att = attend(enc, h);
        features.push_back(ad::concat(t, {h, att.context}, 1));
        state = DecoderState{h, c, att.context};
    }
    const Var all = ad::concat(t, features, 0);  // [S*B, H+C]
    return ad::add(t, ad::matmul(t, all, out_w_), out_b_);
}

Var BoundModel::loss(const Batch& batch) const {
    const auto enc = encode(batch);
    const Var logits = teacher_forced_logits(batch, enc);
    return weighted_loss(*tape_, logits, batch.targets, batch.loss_source, model_->config().lambda);
}

std::vector<double> copy_weights(std::span<const int> targets, std::span<const int> sources, double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("weighted_loss: lambda must satisfy 0 <= lambda < 1");
    if (targets.size() != sources.size())
        throw ad::ShapeError("weighted_loss: " + std::to_string(targets.size()) + " targets vs " +
                             std::to_string(sources.size()) + " sources");
    std::vector<double> w(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double copy = (targets[i] >= 0 && sources[i] == targets[i]) ? 1.0 : 0.0;
        w[i] = 1.0 - lambda * copy;
    }
    return w;
}

Var weighted_loss(Tape& tape, Var logits, std::span<const int> targets, std::span<const int> sources, double lambda) {
    const auto w = copy_weights(targets, sources, lambda);
    return ad::cross_entropy(tape, logits, targets, w);
}

// ---------------------------------------------------------------------------
// Greedy decoding

namespace {

std::vector<std::string> decode_chunk(const CrModel& model, std::span<const std::vector<int>> sources) {
    Tape tape(false);
    const BoundModel bound(model, tape);
    std::vector<Example> ex;
    for (const auto& s : sources) ex.push_back({s, {}});
    const Batch batch = make_batch(ex);
    const auto enc = bound.encode(batch);
    DecoderState state = bound.initial_state(enc);
    const std::size_t B = batch.batch;
    std::vector<int> prev(B, CharVocab::kSos);
    std::vector<std::vector<int>> out(B);
    std::vector<bool> done(B, false);
    std::size_t max_steps = 0;
    for (auto len : batch.src_lengths) max_steps = std::max(max_steps, 2 * len);
    const std::size_t V = model.vocab().size();
    for (std::size_t step = 0; step < max_steps; ++step) {
        const auto so = bound.decode_step(enc, state, prev);
        const auto& logits = tape.value(so.logits);
        bool all_done = true;
        for (std::size_t b = 0; b < B; ++b) {
            const double* row = logits.raw() + b * V;
            const int best = static_cast<int>(std::max_element(row, row + V) - row);
            prev[b] = best;
            if (done[b]) continue;
            if (best == CharVocab::kEos) {
                done[b] = true;
            } else {
                out[b].push_back(best);
                if (out[b].size() >= 2 * batch.src_lengths[b]) done[b] = true;
            }
            all_done = all_done && done[b];
        }
        state = so.next;
        if (all_done) break;
    }
    std::vector<std::string> texts;
    for (const auto& ids : out) texts.push_back(model.vocab().decode(ids));
    return texts;
}

}  // namespace

std::vector<std::string> CrModel::greedy_decode(std::span<const std::string> inputs) const {
    std::vector<std::vector<int>> sources(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        sources[i] = vocab_.encode(inputs[i]);
        if (sources[i].empty()) throw EmptyInputError("greedy_decode: input is empty after normalization");
        if (sources[i].size() > config_.max_len)
            throw std::invalid_argument("greedy_decode: input longer than max_len (" + std::to_string(config_.max_len) + ")");
    }
    // Length-sorted chunks keep padding low.
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sources[a].size() < sources[b].size(); });
    constexpr std::size_t kChunk = 32;
    const std::size_t n_chunks = (order.size() + kChunk - 1) / kChunk;
    std::vector<std::string> result(inputs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t c = 0; c < n_chunks; ++c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(order.size(), lo + kChunk);
        std::vector<std::vector<int>> chunk;
        for (std::size_t i = lo; i < hi; ++i) chunk.push_back(sources[order[i]]);
        const auto texts = decode_chunk(*this, chunk);
        for (std::size_t i = lo; i < hi; ++i) result[order[i]] = texts[i - lo];
    }
    return result;
}

std::string CrModel::greedy_decode(std::string_view input) const {
    const std::string s(input);
    return greedy_decode(std::span<const std::string>(&s, 1)).front();
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout: "OCRFIXCK" | u32 version | u32 header length | header JSON
// (config and vocab code points) | u32 block count | per block: u32 name
// length, name, u32 rank, u64 dims..., doubles. Integers and doubles are
// little-endian.

namespace {

constexpr char kMagic[8] = {'O', 'C', 'R', 'F', 'I', 'X', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("checkpoint truncated reading " + what);
    return v;
}

std::string get_bytes(std::istream& is, std::size_t n, const std::string& what) {
    std::string s(n, '\0');
    if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n)))
        throw std::runtime_error("checkpoint truncated reading " + what);
    return s;
}

}  // namespace

void CrModel::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json header;
    header["format_version"] = kFormatVersion;
    header["config"] = nlohmann::ordered_json::parse(config_to_json(config_));
    std::vector<std::uint32_t> cps(vocab_.chars().begin(), vocab_.chars().end());
    header["vocab"] = cps;
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, kFormatVersion);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, t] : params_) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) put<std::uint64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

CrModel CrModel::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    const std::string magic = get_bytes(is, sizeof kMagic, "magic");
    if (magic != std::string(kMagic, sizeof kMagic)) throw std::runtime_error(path.string() + " is not a checkpoint");
    const auto version = get<std::uint32_t>(is, "version");
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const auto header_len = get<std::uint32_t>(is, "header length");
    const auto header = nlohmann::json::parse(get_bytes(is, header_len, "header"));
    const CrConfig config = config_from_json(header.at("config").dump());
    std::vector<char32_t> chars;
    for (auto cp : header.at("vocab").get<std::vector<std::uint32_t>>()) chars.push_back(static_cast<char32_t>(cp));
    CrModel model(config, CharVocab(std::move(chars)));

    const auto count = get<std::uint32_t>(is, "block count");
    if (count != model.params_.size())
        throw std::runtime_error("checkpoint has " + std::to_string(count) + " parameter blocks, expected " +
                                 std::to_string(model.params_.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name = get_bytes(is, get<std::uint32_t>(is, "name length"), "name");
        auto& t = model.params_.at(model.index_of(name)).second;
        const auto rank = get<std::uint32_t>(is, "rank");
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(get<std::uint64_t>(is, "dims"));
        if (shape != t.shape())
            throw std::runtime_error("parameter " + name + " has shape " + ad::shape_str(shape) + ", expected " +
                                     ad::shape_str(t.shape()));
        if (!is.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(double))))
            throw std::runtime_error("checkpoint truncated in parameter " + name);
    }
    return model;
}

}  // namespace ocrfix::model
