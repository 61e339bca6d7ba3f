#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ocrfix/metrics.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/tsv.hpp"

namespace ocrfix::training {

enum class SplitPolicy { random, by_key };

struct SplitSpec {
    SplitPolicy policy = SplitPolicy::random;
    double train = 0.7;
    double dev = 0.1;
    double test = 0.2;
    // by_key only: groups forced into the test side. The remaining groups
    // are distributed to approach the fractions.
    std::vector<std::string> test_keys;

    void validate() const;
};

struct Split {
    std::vector<TextPair> train, dev, test;
};

// Deterministic given the seed. by_key never divides a key group; a group
// larger than its target side is still placed whole.
Split split(std::span<const TextPair> pairs, const SplitSpec& spec, std::uint64_t seed);

struct TrainConfig {
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 5.0;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double dev_wer = 0.0;
    double dev_cer = 0.0;
    double seconds = 0.0;
};

std::string history_to_csv(std::span<const EpochRecord> history);

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Adam over a model's parameter list, with global gradient-norm clipping.
class Adam {
public:
    Adam(const model::CrModel& model, const TrainConfig& config);
    // Returns the gradient norm before clipping.
    double step(model::CrModel& model, std::vector<ad::Tensor>& grads);
    std::size_t steps() const { return t_; }

private:
    TrainConfig config_;
    std::vector<ad::Tensor> m_, v_;
    std::size_t t_ = 0;
};

// Model with its vocabulary built from the training pairs (both sides).
model::CrModel make_model(const model::CrConfig& config, std::span<const TextPair> train);

// Teacher-forced loss and parameter gradients for one batch.
double loss_and_gradients(const model::CrModel& model, const model::Batch& batch, std::vector<ad::Tensor>& grads);

// Decodes every input; inputs the model cannot take (empty, longer than
// max_len) come back unchanged.
std::vector<std::string> correct_all(const model::CrModel& model, std::span<const std::string> inputs);

struct TrainResult {
    model::CrModel model;  // parameters of the best dev-CER epoch
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_dev_cer = 0.0;
    std::size_t skipped = 0;  // training pairs dropped as empty or too long
};

// Called after each epoch with the record and the current model; returning
// false stops training.
using EpochCallback = std::function<bool(const EpochRecord&, const model::CrModel&)>;

TrainResult train(model::CrModel model, std::span<const TextPair> train_set, std::span<const TextPair> dev_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct ModelReport {
    metrics::ErrorReport ocr;
    metrics::ErrorReport corrected;
    double wer_reduction = 0.0;  // relative, (ocr - corrected) / ocr
    double cer_reduction = 0.0;
};

ModelReport evaluate_outputs(std::span<const std::string> outputs, std::span<const TextPair> pairs);
ModelReport evaluate_model(const model::CrModel& model, std::span<const TextPair> pairs);

// Two-row table: the OCR baseline and the model with relative reductions.
std::string format_report(const ModelReport& report, const std::string& model_name = "CR");
std::string model_report_to_json(const ModelReport& report);

}  // namespace ocrfix::training
