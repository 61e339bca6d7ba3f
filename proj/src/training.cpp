#include "ocrfix/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ocrfix/text.hpp"

namespace ocrfix::training {

using model::CrModel;

void SplitSpec::validate() const {
    for (double f : {train, dev, test})
        if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("split fractions must lie in [0, 1]");
    if (std::abs(train + dev + test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
}

Split split(std::span<const TextPair> pairs, const SplitSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (pairs.empty()) throw std::invalid_argument("split: no pairs");
    std::mt19937_64 rng(seed);
    Split out;
    const double n = static_cast<double>(pairs.size());

    if (spec.policy == SplitPolicy::random) {
        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::llround(spec.train * n));
        const auto n_dev = std::min(pairs.size() - n_train, static_cast<std::size_t>(std::llround(spec.dev * n)));
        for (std::size_t i = 0; i < order.size(); ++i) {
            auto& side = i < n_train ? out.train : i < n_train + n_dev ? out.dev : out.test;
            side.push_back(pairs[order[i]]);
        }
        return out;
    }

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pairs.size(); ++i) groups[pairs[i].key].push_back(i);
    std::vector<std::string> free_keys;
    std::vector<std::size_t> assigned_test;
    for (const auto& [key, members] : groups) {
        if (std::find(spec.test_keys.begin(), spec.test_keys.end(), key) != spec.test_keys.end()) {
            assigned_test.insert(assigned_test.end(), members.begin(), members.end());
        } else {
            free_keys.push_back(key);
        }
    }
    std::shuffle(free_keys.begin(), free_keys.end(), rng);

    const double target[3] = {spec.train * n, spec.dev * n, spec.test * n};
    double filled[3] = {0.0, 0.0, static_cast<double>(assigned_test.size())};
    std::vector<std::size_t> sides[3];
    sides[2] = assigned_test;
    // Largest groups first so small groups can even out the remainder.
    std::stable_sort(free_keys.begin(), free_keys.end(), [&](const std::string& a, const std::string& b) {
        return groups[a].size() > groups[b].size();
    });
    for (const auto& key : free_keys) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
            if (target[s] - filled[s] > target[best] - filled[best]) best = s;
        sides[best].insert(sides[best].end(), groups[key].begin(), groups[key].end());
        filled[best] += static_cast<double>(groups[key].size());
    }
    for (int s = 0; s < 3; ++s) {
        std::sort(sides[s].begin(), sides[s].end());
        auto& dst = s == 0 ? out.train : s == 1 ? out.dev : out.test;
        for (auto i : sides[s]) dst.push_back(pairs[i]);
    }
    return out;
}

void TrainConfig::validate() const {
    if (batch_size == 0 || max_epochs == 0 || patience == 0)
        throw std::invalid_argument("batch size, epochs and patience must be positive");
    if (!(learning_rate > 0.0) || !(clip_norm > 0.0) || !(epsilon > 0.0))
        throw std::invalid_argument("learning rate, clip norm and epsilon must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("Adam betas must lie in (0, 1)");
}

std::string history_to_csv(std::span<const EpochRecord> history) {
    std::ostringstream os;
    os << "epoch,train_loss,dev_wer,dev_cer\n";
    char buf[128];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", r.epoch, r.train_loss, r.dev_wer, r.dev_cer);
        os << buf;
    }
    return os.str();
}

Adam::Adam(const CrModel& model, const TrainConfig& config) : config_(config) {
    config_.validate();
    for (const auto& [name, t] : model.parameters()) {
        m_.emplace_back(t.shape(), 0.0);
        v_.emplace_back(t.shape(), 0.0);
    }
}

double Adam::step(CrModel& model, std::vector<ad::Tensor>& grads) {
    auto& params = model.parameters();
    if (grads.size() != params.size()) throw std::invalid_argument("Adam: gradient count mismatch");
    double sq = 0.0;
    for (const auto& g : grads)
        for (double x : g.data()) sq += x * x;
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) throw TrainingDiverged("gradient norm is not finite at step " + std::to_string(t_ + 1));
    const double clip = norm > config_.clip_norm ? config_.clip_norm / norm : 1.0;
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* w = params[i].second.raw();
        const double* g = grads[i].raw();
        double* m = m_[i].raw();
        double* v = v_[i].raw();
        const std::size_t n = grads[i].size();
        for (std::size_t j = 0; j < n; ++j) {
            const double gj = g[j] * clip;
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            w[j] -= config_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.epsilon);
        }
    }
    return norm;
}

CrModel make_model(const model::CrConfig& config, std::span<const TextPair> train) {
    std::vector<std::string> texts;
    texts.reserve(train.size() * 2);
    for (const auto& p : train) {
        texts.push_back(p.ocr);
        texts.push_back(p.gold);
    }
    return CrModel(config, model::CharVocab::build(texts));
}

double loss_and_gradients(const CrModel& model, const model::Batch& batch, std::vector<ad::Tensor>& grads) {
    ad::Tape tape;
    const model::BoundModel bound(model, tape);
    const ad::Var loss = bound.loss(batch);
    const double value = tape.value(loss)[0];
    if (!std::isfinite(value)) return value;
    tape.backward(loss);
    const auto& params = model.parameters();
    grads.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ad::Tensor* g = tape.grad_if_any(bound.param(i));
        if (g) {
            grads[i] = *g;
        } else {
            grads[i] = ad::Tensor(params[i].second.shape(), 0.0);
        }
    }
    return value;
}

std::vector<std::string> correct_all(const CrModel& model, std::span<const std::string> inputs) {
    std::vector<std::string> out(inputs.begin(), inputs.end());
    std::vector<std::string> todo;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto len = utf8_length(normalize_whitespace(inputs[i]));
        if (len == 0 || len > model.config().max_len) continue;
        todo.push_back(inputs[i]);
        where.push_back(i);
    }
    const auto decoded = model.greedy_decode(todo);
    for (std::size_t j = 0; j < where.size(); ++j) out[where[j]] = decoded[j];
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(const std::vector<model::Example>& examples, std::size_t batch_size,
                                                   std::mt19937_64& rng) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    // Sort within pools of several batches so batches hold similar lengths.
    const std::size_t pool = batch_size * 50;
    for (std::size_t lo = 0; lo < order.size(); lo += pool) {
        const auto hi = std::min(order.size(), lo + pool);
        std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi),
                         [&](std::size_t a, std::size_t b) {
                             return examples[a].source.size() < examples[b].source.size();
                         });
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t lo = 0; lo < order.size(); lo += batch_size)
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), lo + batch_size)));
    std::shuffle(batches.begin(), batches.end(), rng);
    return batches;
}

std::pair<double, double> dev_scores(const CrModel& model, std::span<const TextPair> dev) {
    std::vector<std::string> inputs, golds;
    for (const auto& p : dev) {
        inputs.push_back(p.ocr);
        golds.push_back(p.gold);
    }
    const auto report = metrics::evaluate_pairs(correct_all(model, inputs), golds);
    return {report.wer, report.cer};
}

}  // namespace

TrainResult train(CrModel model, std::span<const TextPair> train_set, std::span<const TextPair> dev_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (dev_set.empty()) throw std::invalid_argument("train: the dev set is empty");

    std::vector<model::Example> examples;
    std::size_t skipped = 0;
    for (const auto& p : train_set) {
        auto ex = model.encode_pair(p.ocr, p.gold);
        if (ex.source.empty() || ex.source.size() > model.config().max_len ||
            ex.target.size() + 1 > 2 * model.config().max_len) {
            ++skipped;
            continue;
        }
        examples.push_back(std::move(ex));
    }
    if (examples.empty()) throw std::invalid_argument("train: no usable training pairs");

    std::mt19937_64 rng(config.seed);
    Adam adam(model, config);
    std::vector<ad::Tensor> grads;
    std::vector<ad::Tensor> best = [&] {
        std::vector<ad::Tensor> v;
        for (const auto& [name, t] : model.parameters()) v.push_back(t);
        return v;
    }();
    TrainResult result{model, {}, 0, std::numeric_limits<double>::infinity(), skipped};
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double loss_sum = 0.0;
        double weight_sum = 0.0;
        for (const auto& idx : make_batches(examples, config.batch_size, rng)) {
            std::vector<model::Example> chunk;
            for (auto i : idx) chunk.push_back(examples[i]);
            const auto batch = model::make_batch(chunk);
            const double loss = loss_and_gradients(model, batch, grads);
            if (!std::isfinite(loss))
                throw TrainingDiverged("loss became " + std::to_string(loss) + " in epoch " + std::to_string(epoch) +
                                       " after " + std::to_string(adam.steps()) + " updates");
            adam.step(model, grads);
            const auto active = static_cast<double>(std::count_if(batch.targets.begin(), batch.targets.end(),
                                                                  [](int t) { return t >= 0; }));
            loss_sum += loss * active;
            weight_sum += active;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / weight_sum;
        std::tie(rec.dev_wer, rec.dev_cer) = dev_scores(model, dev_set);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);

        if (rec.dev_cer < result.best_dev_cer) {
            result.best_dev_cer = rec.dev_cer;
            result.best_epoch = epoch;
            for (std::size_t i = 0; i < best.size(); ++i) best[i] = model.parameters()[i].second;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (on_epoch && !on_epoch(rec, model)) break;
        if (since_best >= config.patience) break;
    }
    for (std::size_t i = 0; i < best.size(); ++i) model.parameters()[i].second = best[i];
    result.model = std::move(model);
    return result;
}

ModelReport evaluate_outputs(std::span<const std::string> outputs, std::span<const TextPair> pairs) {
    if (outputs.size() != pairs.size()) throw std::invalid_argument("evaluate: output and pair counts differ");
    std::vector<std::string> ocr, gold;
    for (const auto& p : pairs) {
        ocr.push_back(p.ocr);
        gold.push_back(p.gold);
    }
    ModelReport r;
    r.ocr = metrics::evaluate_pairs(ocr, gold);
    r.corrected = metrics::evaluate_pairs(outputs, gold);
    r.wer_reduction = r.ocr.wer > 0.0 ? (r.ocr.wer - r.corrected.wer) / r.ocr.wer : 0.0;
    r.cer_reduction = r.ocr.cer > 0.0 ? (r.ocr.cer - r.corrected.cer) / r.ocr.cer : 0.0;
    return r;
}

ModelReport evaluate_model(const CrModel& model, std::span<const TextPair> pairs) {
    std::vector<std::string> inputs;
    for (const auto& p : pairs) inputs.push_back(p.ocr);
    return evaluate_outputs(correct_all(model, inputs), pairs);
}

std::string format_report(const ModelReport& report, const std::string& model_name) {
    char buf[256];
    std::ostringstream os;
    std::snprintf(buf, sizeof buf, "%-8s %8s %10s %8s %10s\n", "", "WER", "", "CER", "");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-8s %8.2f %10s %8.2f %10s\n", "OCR", 100.0 * report.ocr.wer, "",
                  100.0 * report.ocr.cer, "");
    os << buf;
    auto arrow = [](double r) {
        char b[32];
        std::snprintf(b, sizeof b, "%s%.1f%%", r >= 0.0 ? "▼" : "▲", 100.0 * std::abs(r));
        return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "%-8s %8.2f %10s %8.2f %10s\n", model_name.c_str(), 100.0 * report.corrected.wer,
                  arrow(report.wer_reduction).c_str(), 100.0 * report.corrected.cer, arrow(report.cer_reduction).c_str());
    os << buf;
    return os.str();
}

std::string model_report_to_json(const ModelReport& report) {
    nlohmann::ordered_json j;
    j["ocr"] = nlohmann::ordered_json::parse(metrics::report_to_json(report.ocr, -1));
    j["corrected"] = nlohmann::ordered_json::parse(metrics::report_to_json(report.corrected, -1));
    j["wer_reduction"] = report.wer_reduction;
    j["cer_reduction"] = report.cer_reduction;
    return j.dump(2);
}

}  // namespace ocrfix::training
