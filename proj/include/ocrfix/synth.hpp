#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ocrfix/tsv.hpp"

namespace ocrfix::synth {

// Token-level OCR noise model. Each token draws at most one error:
// merge with the next token, split at an interior position, or a single
// character substitution.
struct NoiseSpec {
    double p_over_seg = 0.0;
    double p_under_seg = 0.0;
    double p_word_error = 0.0;
    // gold char -> (ocr char, weight)
    std::map<char32_t, std::vector<std::pair<char32_t, double>>> confusion;
    // Any non-space gold char may also turn into one of these, sharing
    // residual_weight uniformly.
    std::vector<char32_t> residual_alphabet;
    double residual_weight = 0.0;
    std::uint64_t seed = 0;

    double total() const { return p_over_seg + p_under_seg + p_word_error; }
    void validate() const;
};

// 54:3:43 mix scaled to `rate`, historical confusions (long s/f, e/c, u/v,
// n/u) plus uniform residual mass over lowercase letters.
NoiseSpec default_spec(double rate = 0.30, std::uint64_t seed = 0);

NoiseSpec spec_from_json(std::string_view json);
std::string spec_to_json(const NoiseSpec& spec);

enum class ErrorKind { over_seg, under_seg, word_error };

struct Injection {
    std::size_t token;  // gold token index
    ErrorKind kind;
};

struct Corruption {
    std::string text;
    std::vector<Injection> log;
};

// Pure and deterministic in (gold, spec, seed). Draws that cannot apply
// (merge on the last token, split of a one-character token) are skipped.
Corruption corrupt_logged(std::string_view gold, const NoiseSpec& spec, std::uint64_t seed);
std::string corrupt(std::string_view gold, const NoiseSpec& spec, std::uint64_t seed);

// Cuts each line of `text` into consecutive `window`-token gold snippets and
// pairs each with a corruption seeded from spec.seed and its index. The key
// column holds the source line number.
std::vector<TextPair> make_pairs(std::string_view text, const NoiseSpec& spec, std::size_t window = 5,
                                 std::size_t stride = 0);

}  // namespace ocrfix::synth
