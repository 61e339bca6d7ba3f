#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocrfix/corpus.hpp"
#include "ocrfix/metrics.hpp"
#include "ocrfix/model.hpp"
#include "ocrfix/pagecorrect.hpp"
#include "ocrfix/synth.hpp"
#include "ocrfix/text.hpp"
#include "ocrfix/training.hpp"
#include "ocrfix/tsv.hpp"

using namespace ocrfix;

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::vector<std::string> lines;
    std::stringstream ss(read_text_file(path));
    for (std::string line; std::getline(ss, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

struct AlignArgs {
    std::string ocr, gold, out, coverage;
    std::size_t window = 5;
    double threshold = 0.8;
    std::size_t num_perm = 128;
    std::size_t bands = 32;
    std::uint64_t seed = 0x5eed;
};

int run_align(const AlignArgs& a) {
    corpus::CorpusOptions opt;
    opt.window = a.window;
    opt.threshold = a.threshold;
    opt.lsh.num_perm = a.num_perm;
    opt.lsh.bands = a.bands;
    if (a.bands == 0 || a.num_perm % a.bands != 0)
        throw CLI::ValidationError("--bands", "must divide --num-perm");
    opt.lsh.rows = a.num_perm / a.bands;
    opt.lsh.seed = a.seed;
    const auto ocr = corpus::read_document(a.ocr);
    const auto gold = corpus::read_document(a.gold);
    const auto result = corpus::build_corpus(ocr, gold, opt);
    std::vector<TextPair> rows;
    for (const auto& p : result.pairs) rows.push_back({p.ocr_text, p.gold_text, {}});
    write_pairs_tsv(a.out, rows);
    const auto cov_path = a.coverage.empty() ? a.out + ".coverage.json" : a.coverage;
    write_text_file(cov_path, corpus::coverage_to_json(result.coverage) + "\n");
    std::printf("%zu pairs written to %s; coverage %.4f (%zu of %zu OCR snippets), report %s\n", rows.size(),
                a.out.c_str(), result.coverage.coverage(), result.coverage.matched, result.coverage.total,
                cov_path.c_str());
    return 0;
}

struct EvaluateArgs {
    std::string pairs, model, report;
};

int run_evaluate(const EvaluateArgs& a) {
    const auto pairs = read_pairs_tsv(a.pairs);
    if (a.model.empty()) {
        std::vector<std::string> hyps, refs;
        for (const auto& p : pairs) {
            hyps.push_back(p.ocr);
            refs.push_back(p.gold);
        }
        const auto report = metrics::evaluate_pairs(hyps, refs);
        const auto json = metrics::report_to_json(report);
        if (!a.report.empty()) write_text_file(a.report, json + "\n");
        std::printf("pairs %zu  WER %.2f%%  CER %.2f%%  over-seg %zu  under-seg %zu  word errors %zu\n", report.pairs,
                    100.0 * report.wer, 100.0 * report.cer, report.over_seg, report.under_seg, report.word_error);
        return 0;
    }
    const auto model = model::CrModel::load(a.model);
    const auto report = training::evaluate_model(model, pairs);
    std::fputs(training::format_report(report).c_str(), stdout);
    if (!a.report.empty()) write_text_file(a.report, training::model_report_to_json(report) + "\n");
    return 0;
}

struct AnalyzeArgs {
    std::string pairs, confusion;
};

int run_analyze(const AnalyzeArgs& a) {
    const auto pairs = read_pairs_tsv(a.pairs);
    std::vector<AlignedPair> aligned;
    metrics::ErrorCounts counts;
    for (const auto& p : pairs) {
        aligned.push_back(align_chars(normalize_whitespace(p.ocr), normalize_whitespace(p.gold)));
        counts += metrics::classify_errors(aligned.back());
    }
    write_text_file(a.confusion, metrics::confusion_to_csv(metrics::confusion_matrix(aligned)));
    const double total = static_cast<double>(counts.over_seg + counts.under_seg + counts.word_error);
    auto pct = [&](std::size_t n) { return total > 0 ? 100.0 * static_cast<double>(n) / total : 0.0; };
    std::printf("over-segmentation %zu (%.1f%%)\nunder-segmentation %zu (%.1f%%)\nword errors %zu (%.1f%%)\n",
                counts.over_seg, pct(counts.over_seg), counts.under_seg, pct(counts.under_seg), counts.word_error,
                pct(counts.word_error));
    return 0;
}

struct TrainArgs {
    std::string pairs, out, history, split = "random", test_keys, fractions = "0.7,0.1,0.2", test_out;
    std::size_t k = 3;
    double lambda = 0.1;
    std::uint64_t seed = 1;
    std::size_t embed = 128, hidden = 256, max_len = 128;
    training::TrainConfig cfg;
};

int run_train(TrainArgs a) {
    const auto pairs = read_pairs_tsv(a.pairs);
    const auto fr = split_csv_list(a.fractions);
    if (fr.size() != 3) throw CLI::ValidationError("--fractions", "expects three comma-separated values");
    training::SplitSpec spec;
    spec.train = std::stod(fr[0]);
    spec.dev = std::stod(fr[1]);
    spec.test = std::stod(fr[2]);

    training::Split parts;
    if (a.split == "random") {
        parts = training::split(pairs, spec, a.seed);
    } else if (a.split == "century") {
        // Test centuries are held out whole; the rest is split at random.
        const auto keys = a.test_keys.empty() ? std::vector<std::string>{"17"} : split_csv_list(a.test_keys);
        std::vector<TextPair> rest;
        for (const auto& p : pairs) {
            if (std::find(keys.begin(), keys.end(), p.key) != keys.end()) {
                parts.test.push_back(p);
            } else {
                rest.push_back(p);
            }
        }
        if (rest.empty()) throw std::runtime_error("century split: every pair has a test key");
        training::SplitSpec inner;
        inner.train = spec.train / (spec.train + spec.dev);
        inner.dev = 1.0 - inner.train;
        inner.test = 0.0;
        auto tr = training::split(rest, inner, a.seed);
        parts.train = std::move(tr.train);
        parts.dev = std::move(tr.dev);
    } else if (a.split == "group") {
        spec.policy = training::SplitPolicy::by_key;
        spec.test_keys = split_csv_list(a.test_keys);
        parts = training::split(pairs, spec, a.seed);
    } else {
        throw CLI::ValidationError("--split", "must be random, century or group");
    }
    if (parts.dev.empty()) throw std::runtime_error("the dev split is empty; adjust --fractions or --split");
    if (parts.train.empty()) throw std::runtime_error("the training split is empty");

    model::CrConfig mc;
    mc.conv_layers = a.k;
    mc.lambda = a.lambda;
    mc.seed = a.seed;
    mc.embed_dim = a.embed;
    mc.hidden_dim = a.hidden;
    mc.max_len = a.max_len;
    a.cfg.seed = a.seed;
    auto model = training::make_model(mc, parts.train);
    std::printf("train %zu  dev %zu  test %zu  vocab %zu  parameters %zu\n", parts.train.size(), parts.dev.size(),
                parts.test.size(), model.vocab().size(), model.parameter_count());

    const auto history_path = a.history.empty() ? a.out + ".history.csv" : a.history;
    std::vector<training::EpochRecord> history;
    auto on_epoch = [&](const training::EpochRecord& r, const model::CrModel&) {
        history.push_back(r);
        write_text_file(history_path, training::history_to_csv(history));
        std::printf("epoch %3zu  loss %.5f  dev WER %.2f%%  dev CER %.2f%%  (%.1fs)\n", r.epoch, r.train_loss,
                    100.0 * r.dev_wer, 100.0 * r.dev_cer, r.seconds);
        std::fflush(stdout);
        return true;
    };
    auto result = training::train(std::move(model), parts.train, parts.dev, a.cfg, on_epoch);
    result.model.save(a.out);
    write_text_file(history_path, training::history_to_csv(result.history));
    std::printf("best epoch %zu (dev CER %.2f%%), %zu training pairs skipped; model saved to %s\n", result.best_epoch,
                100.0 * result.best_dev_cer, result.skipped, a.out.c_str());
    if (!a.test_out.empty()) write_pairs_tsv(a.test_out, parts.test);
    if (!parts.test.empty()) std::fputs(training::format_report(training::evaluate_model(result.model, parts.test)).c_str(), stdout);
    return 0;
}

struct SynthArgs {
    std::string text, out, spec;
    double rate = 0.30;
    std::uint64_t seed = 0;
    std::size_t window = 5, stride = 0;
};

int run_synth(const SynthArgs& a) {
    auto spec = a.spec.empty() ? synth::default_spec(a.rate, a.seed) : synth::spec_from_json(read_text_file(a.spec));
    spec.seed = a.seed;
    const auto pairs = synth::make_pairs(read_text_file(a.text), spec, a.window, a.stride);
    write_pairs_tsv(a.out, pairs);
    std::vector<std::string> hyps, refs;
    for (const auto& p : pairs) {
        hyps.push_back(p.ocr);
        refs.push_back(p.gold);
    }
    const auto report = metrics::evaluate_pairs(hyps, refs);
    std::printf("%zu pairs written to %s; WER %.2f%%  CER %.2f%%\n", pairs.size(), a.out.c_str(), 100.0 * report.wer,
                100.0 * report.cer);
    return 0;
}

struct CorrectArgs {
    std::string model, in, out, actions;
    std::size_t window = 5;
};

int run_correct(const CorrectArgs& a) {
    const auto model = model::CrModel::load(a.model);
    const auto lines = read_lines(a.in);
    const auto result = pagecorrect::correct_page(lines, model, a.window);
    std::string text;
    for (const auto& l : result.lines) text += l + "\n";
    write_text_file(a.out, text);
    if (!a.actions.empty()) write_text_file(a.actions, pagecorrect::actions_to_json(result.actions) + "\n");
    const auto c = pagecorrect::count_actions(result.actions);
    std::printf("%zu lines corrected; actions S %zu  M %zu  R %zu  total %zu\n", result.lines.size(), c.split,
                c.merge, c.replace, c.total());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"OCR post-correction toolkit for historical German prints"};
    app.require_subcommand(1);

    AlignArgs align;
    auto* c_align = app.add_subcommand("align", "Build a parallel OCR/gold corpus");
    c_align->add_option("--ocr", align.ocr, "OCR document (text or .jsonl)")->required()->check(CLI::ExistingFile);
    c_align->add_option("--gold", align.gold, "Gold document (text or .jsonl)")->required()->check(CLI::ExistingFile);
    c_align->add_option("--window", align.window, "Tokens per OCR snippet")->capture_default_str();
    c_align->add_option("--threshold", align.threshold, "Minimum trigram Jaccard")->capture_default_str();
    c_align->add_option("--num-perm", align.num_perm, "MinHash permutations")->capture_default_str();
    c_align->add_option("--bands", align.bands, "LSH bands")->capture_default_str();
    c_align->add_option("--seed", align.seed, "Hash seed")->capture_default_str();
    c_align->add_option("--out", align.out, "Output TSV")->required();
    c_align->add_option("--coverage", align.coverage, "Coverage JSON (default <out>.coverage.json)");

    EvaluateArgs evaluate;
    auto* c_eval = app.add_subcommand("evaluate", "WER/CER and error types of a pair file, or of a model on it");
    c_eval->add_option("--pairs", evaluate.pairs, "TSV of ocr/hypothesis and gold")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--model", evaluate.model, "Checkpoint to apply to the OCR column")->check(CLI::ExistingFile);
    c_eval->add_option("--report", evaluate.report, "JSON report path");

    AnalyzeArgs analyze;
    auto* c_an = app.add_subcommand("analyze", "Character confusion table and error-type counts");
    c_an->add_option("--pairs", analyze.pairs, "TSV of ocr and gold")->required()->check(CLI::ExistingFile);
    c_an->add_option("--confusion", analyze.confusion, "Output CSV")->required();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train a correction model");
    c_tr->add_option("--pairs", tr.pairs, "TSV of ocr, gold and optional key")->required()->check(CLI::ExistingFile);
    c_tr->add_option("--split", tr.split, "random, century or group")->capture_default_str();
    c_tr->add_option("--test-keys", tr.test_keys, "Comma-separated keys held out for testing");
    c_tr->add_option("--fractions", tr.fractions, "train,dev,test fractions")->capture_default_str();
    c_tr->add_option("--k", tr.k, "Convolution layers (0 = plain attention)")->capture_default_str();
    c_tr->add_option("--lambda", tr.lambda, "Copy-dampening weight")->capture_default_str();
    c_tr->add_option("--seed", tr.seed, "Seed for splits, init and batching")->capture_default_str();
    c_tr->add_option("--embed", tr.embed, "Embedding size")->capture_default_str();
    c_tr->add_option("--hidden", tr.hidden, "Hidden size")->capture_default_str();
    c_tr->add_option("--max-len", tr.max_len, "Longest input in characters")->capture_default_str();
    c_tr->add_option("--epochs", tr.cfg.max_epochs, "Maximum epochs")->capture_default_str();
    c_tr->add_option("--patience", tr.cfg.patience, "Epochs without dev improvement before stopping")->capture_default_str();
    c_tr->add_option("--batch-size", tr.cfg.batch_size, "Batch size")->capture_default_str();
    c_tr->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate")->capture_default_str();
    c_tr->add_option("--out", tr.out, "Checkpoint path")->required();
    c_tr->add_option("--history", tr.history, "History CSV (default <out>.history.csv)");
    c_tr->add_option("--test-out", tr.test_out, "Write the test split to this TSV");

    SynthArgs sy;
    auto* c_sy = app.add_subcommand("synth", "Generate synthetic OCR/gold pairs from clean text");
    c_sy->add_option("--text", sy.text, "UTF-8 text, one line per paragraph or line")->required()->check(CLI::ExistingFile);
    c_sy->add_option("--rate", sy.rate, "Token error rate for the default noise mix")->capture_default_str();
    c_sy->add_option("--spec", sy.spec, "Noise spec JSON (overrides --rate)")->check(CLI::ExistingFile);
    c_sy->add_option("--seed", sy.seed, "Noise seed")->capture_default_str();
    c_sy->add_option("--window", sy.window, "Tokens per snippet")->capture_default_str();
    c_sy->add_option("--stride", sy.stride, "Snippet stride (0 = window)")->capture_default_str();
    c_sy->add_option("--out", sy.out, "Output TSV")->required();

    CorrectArgs co;
    auto* c_co = app.add_subcommand("correct", "Correct a page of OCR text");
    c_co->add_option("--model", co.model, "Checkpoint")->required()->check(CLI::ExistingFile);
    c_co->add_option("--in", co.in, "Input text, one line per OCR line")->required()->check(CLI::ExistingFile);
    c_co->add_option("--out", co.out, "Corrected text")->required();
    c_co->add_option("--actions", co.actions, "Action log JSON");
    c_co->add_option("--window", co.window, "Tokens per window")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*c_align) return run_align(align);
        if (*c_eval) return run_evaluate(evaluate);
        if (*c_an) return run_analyze(analyze);
        if (*c_tr) return run_train(tr);
        if (*c_sy) return run_synth(sy);
        if (*c_co) return run_correct(co);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
