#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocrfix/alignment.hpp"

namespace ocrfix::metrics {

template <class T>
EditCounts edit_distance(std::span<const T> hyp, std::span<const T> ref) {
    return count_ops(levenshtein_path(hyp, ref));
}

// Word error rate: whitespace-token edit distance over the reference word count.
double wer(std::string_view hyp, std::string_view ref);
// Character error rate: code-point edit distance over the reference length,
// spaces included. Both sides are whitespace-normalized first.
double cer(std::string_view hyp, std::string_view ref);

struct ErrorCounts {
    std::size_t over_seg = 0;    // gold words merged into one OCR token
    std::size_t under_seg = 0;   // gold word split into two OCR tokens
    std::size_t word_error = 0;  // gold tokens with non-space character edits

    ErrorCounts& operator+=(const ErrorCounts& o) {
        over_seg += o.over_seg;
        under_seg += o.under_seg;
        word_error += o.word_error;
        return *this;
    }
    friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

ErrorCounts classify_errors(const AlignedPair& pair);

// ocr char -> gold char -> count, UTF-8 keys.
using ConfusionMap = std::map<std::string, std::map<std::string, std::size_t>>;

void accumulate_confusion(const AlignedPair& pair, ConfusionMap& confusion);
ConfusionMap confusion_matrix(std::span<const AlignedPair> pairs);

struct ErrorReport {
    double wer = 0.0;
    double cer = 0.0;
    std::size_t over_seg = 0;
    std::size_t under_seg = 0;
    std::size_t word_error = 0;
    ConfusionMap confusion;

    std::size_t pairs = 0;
    std::size_t ref_words = 0;
    std::size_t ref_chars = 0;
    std::size_t word_edits = 0;
    std::size_t char_edits = 0;
};

// Corpus-level report: WER/CER are micro-averaged (summed edits over summed
// reference lengths). Pairs with an empty reference are skipped.
ErrorReport evaluate_pairs(std::span<const std::string> hyps, std::span<const std::string> refs);

std::string report_to_json(const ErrorReport& report, int indent = 2);

// Writes ocr_char,gold_char,count rows (with header), sorted by key.
std::string confusion_to_csv(const ConfusionMap& confusion);

}  // namespace ocrfix::metrics
