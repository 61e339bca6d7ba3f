#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ocrfix/alignment.hpp"

namespace ocrfix::corpus {

struct TokenSpan {
    std::size_t begin = 0;  // half-open
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct Snippet {
    std::string text;
    std::string book_id;
    std::size_t page = 0;
    std::size_t line_index = 0;
    TokenSpan token_span;
};

// Normalizes whitespace and checks the snippet invariants (non-empty text,
// span length equal to the token count). Throws EmptyInputError or
// std::invalid_argument.
Snippet make_snippet(std::string_view text, std::string book_id, std::size_t page,
                     std::size_t line_index, TokenSpan span);

using ShingleSet = std::unordered_set<std::string>;

// Character n-grams of the whitespace-normalized text. Texts shorter than n
// yield the singleton {text}. Case-sensitive; spaces are characters.
ShingleSet shingle(std::string_view text, std::size_t n = 3);

double jaccard(const ShingleSet& a, const ShingleSet& b);

struct MinHashSignature {
    std::vector<std::uint64_t> values;
    std::size_t num_perm() const { return values.size(); }
    friend bool operator==(const MinHashSignature&, const MinHashSignature&) = default;
};

// Seeded family of num_perm hash functions: 128-bit multiply-shift applied
// to a 64-bit FNV-1a hash of each shingle.
class MinHasher {
public:
    MinHasher(std::size_t num_perm, std::uint64_t seed);

    MinHashSignature operator()(const ShingleSet& shingles) const;
    std::size_t num_perm() const { return mult_.size(); }

private:
    std::vector<unsigned __int128> mult_;
    std::vector<unsigned __int128> add_;
};

MinHashSignature minhash(const ShingleSet& shingles, std::size_t num_perm, std::uint64_t seed);

// Fraction of agreeing positions.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

// Probability that two sets of Jaccard s share at least one band.
double candidate_probability(double s, std::size_t bands, std::size_t rows);

class LshIndex {
public:
    LshIndex(std::size_t bands, std::size_t rows);

    void insert(std::uint32_t id, const MinHashSignature& sig);
    // Ids sharing at least one band bucket with `sig`, sorted, deduplicated.
    std::vector<std::uint32_t> candidates(const MinHashSignature& sig) const;

    std::size_t bands() const { return bands_; }
    std::size_t rows() const { return rows_; }
    std::size_t size() const { return size_; }
    // Occurrences of `id` across all buckets (equals bands() once inserted).
    std::size_t bucket_occurrences(std::uint32_t id) const;

private:
    std::uint64_t band_key(const MinHashSignature& sig, std::size_t band) const;

    std::size_t bands_;
    std::size_t rows_;
    std::size_t size_ = 0;
    std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>> buckets_;
};

struct LshParams {
    std::size_t num_perm = 128;
    std::size_t bands = 32;
    std::size_t rows = 4;
    std::uint64_t seed = 0x5eed;
    std::size_t shingle_size = 3;
};

struct MatchedPair {
    Snippet ocr;
    Snippet gold;
    double jaccard = 0.0;
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    std::vector<std::size_t> unmatched;  // indices into the OCR snippets
};

MatchResult lsh_match(std::span<const Snippet> ocr_snippets, std::span<const Snippet> gold_snippets,
                      double threshold, const LshParams& params);

struct Scoring {
    double match = 2.0;
    double mismatch = -1.0;
    double gap = -1.0;
};

// Raw Smith-Waterman result over code points; [begin, end) regions.
struct LocalRegion {
    double score = 0.0;
    std::size_t a_begin = 0, a_end = 0;
    std::size_t b_begin = 0, b_end = 0;
    std::vector<AlignStep> path;  // positions relative to the full strings
};

LocalRegion smith_waterman(std::u32string_view a, std::u32string_view b, const Scoring& scoring);

// Best local alignment of OCR text `a` against gold text `b`; head and tail
// tokens with under half of their characters inside the aligned region are
// trimmed from both sides. The returned alignment is the character alignment
// of the two refined strings.
AlignedPair local_align(std::string_view a, std::string_view b, const Scoring& scoring = {});

struct DocumentLine {
    std::string book_id;
    std::size_t page = 0;
    std::size_t line_index = 0;
    std::string text;
};

// Plain text (one line per line, '\f' starts a new page) or JSONL with
// {book_id, page, text} when the path ends in .jsonl.
std::vector<DocumentLine> read_document(const std::filesystem::path& path);
std::vector<DocumentLine> lines_from_text(std::string_view text, std::string book_id = "doc");

// OCR side: consecutive non-overlapping windows per sentence/line segment.
// A remainder shorter than `window` joins the preceding window; a segment
// shorter than `window` is one snippet.
std::vector<Snippet> ocr_snippets(std::span<const DocumentLine> lines, std::size_t window);
// Gold side: every window of window..2*window tokens over each book's token
// stream, crossing line boundaries, plus each segment shorter than `window`.
std::vector<Snippet> gold_snippets(std::span<const DocumentLine> lines, std::size_t window);

struct PageCoverage {
    std::string book_id;
    std::size_t page = 0;
    std::size_t matched = 0;
    std::size_t dropped = 0;
};

struct CoverageReport {
    std::size_t total = 0;
    std::size_t matched = 0;
    std::size_t dropped = 0;
    std::vector<PageCoverage> pages;

    double coverage() const { return total == 0 ? 0.0 : static_cast<double>(matched) / total; }
};

std::string coverage_to_json(const CoverageReport& report, int indent = 2);

struct CorpusOptions {
    std::size_t window = 5;
    double threshold = 0.8;
    LshParams lsh;
    Scoring scoring;
};

struct CorpusResult {
    std::vector<AlignedPair> pairs;
    std::vector<double> jaccard;  // parallel to pairs
    CoverageReport coverage;
};

CorpusResult build_corpus(std::span<const DocumentLine> ocr_lines,
                          std::span<const DocumentLine> gold_lines, const CorpusOptions& options);

}  // namespace ocrfix::corpus
