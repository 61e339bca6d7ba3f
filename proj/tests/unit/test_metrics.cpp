#include <doctest.h>

#include <random>

#include "ocrfix/alignment.hpp"
#include "ocrfix/metrics.hpp"
#include "ocrfix/synth.hpp"
#include "ocrfix/text.hpp"
#include "oracles.hpp"

using namespace ocrfix;

namespace {

metrics::ErrorCounts classify(std::string_view ocr, std::string_view gold) {
    return metrics::classify_errors(align_chars(ocr, gold));
}

EditCounts chars(std::string_view a, std::string_view b) {
    const auto ua = utf8_decode(a), ub = utf8_decode(b);
    return metrics::edit_distance(std::span<const char32_t>(ua), std::span<const char32_t>(ub));
}

std::u32string random_string(std::mt19937_64& rng, std::size_t max_len, const std::u32string& alphabet) {
    std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, alphabet.size() - 1);
    std::u32string s(len(rng), U' ');
    for (auto& c : s) c = alphabet[pick(rng)];
    return s;
}

}  // namespace

TEST_CASE("edit distance examples") {
    CHECK(chars("ſein", "ſein").distance == 0);
    const auto vnd = chars("vnd", "und");
    CHECK(vnd.distance == 1);
    CHECK(vnd.substitutions == 1);
    const auto merged = chars("allein", "alle in");
    CHECK(merged.distance == 1);
    CHECK(merged.deletions == 1);
    const auto split = chars("alle in", "allein");
    CHECK(split.insertions == 1);
}

TEST_CASE("edit distance matches exhaustive oracle on short strings") {
    const auto all = oracle::all_strings(U"abc", 4);
    for (const auto& a : all)
        for (const auto& b : all) {
            const auto got = metrics::edit_distance(std::span<const char32_t>(a), std::span<const char32_t>(b));
            REQUIRE(got.distance == oracle::edit_distance(a, b));
            REQUIRE(got.substitutions + got.insertions + got.deletions == got.distance);
        }
}

TEST_CASE("edit distance is symmetric and satisfies the triangle inequality") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        const auto a = random_string(rng, 12, U"abcd ſ"), b = random_string(rng, 12, U"abcd ſ"),
                   c = random_string(rng, 12, U"abcd ſ");
        auto d = [](const std::u32string& x, const std::u32string& y) {
            return metrics::edit_distance(std::span<const char32_t>(x), std::span<const char32_t>(y)).distance;
        };
        CHECK(d(a, b) == d(b, a));
        CHECK(d(a, c) <= d(a, b) + d(b, c));
    }
}

TEST_CASE("wer and cer examples") {
    CHECK(metrics::wer("und dem", "und dem") == 0.0);
    CHECK(metrics::wer("vnd dem", "und dem") == doctest::Approx(0.5));
    CHECK(metrics::cer("vnd", "und") == doctest::Approx(1.0 / 3.0));
    CHECK(metrics::cer("mcin", "mein") == doctest::Approx(0.25));
    CHECK(metrics::cer("ſein", "ſein") == 0.0);
    CHECK_THROWS(metrics::wer("x", ""));
    CHECK_THROWS(metrics::cer("x", "  "));
}

TEST_CASE("alignment replay reconstructs both strings") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        const auto a = utf8_encode(random_string(rng, 15, U"abſ ü"));
        const auto b = utf8_encode(random_string(rng, 15, U"abſ ü"));
        const auto pair = align_chars(a, b);
        const auto [ra, rb] = replay_alignment(pair);
        CHECK(utf8_encode(ra) == pair.ocr_text);
        CHECK(utf8_encode(rb) == pair.gold_text);
    }
}

TEST_CASE("classify errors examples") {
    CHECK(classify("und dem", "und dem") == metrics::ErrorCounts{});
    const auto under = classify("haus thür", "hausthür");
    CHECK(under.under_seg == 1);
    CHECK(under.over_seg == 0);
    CHECK(under.word_error == 0);
    const auto over = classify("allein", "alle in");
    CHECK(over.over_seg == 1);
    CHECK(over.under_seg == 0);
    CHECK(over.word_error == 0);
    const auto word = classify("vnd dem", "und dem");
    CHECK(word.word_error == 1);
    CHECK(word.over_seg + word.under_seg == 0);
}

TEST_CASE("classify errors is additive under concatenation with a sentinel token") {
    const auto spec = synth::default_spec(0.5, 3);
    const std::vector<std::string> golds{"der Herr ſprach zu jm", "vnd es geſchah alſo bald", "mein Sohn iſt kommen",
                                         "in dem Jahr da man zehlet", "alle Leut im Land"};
    std::uint64_t seed = 0;
    for (const auto& ga : golds)
        for (const auto& gb : golds) {
            const auto oa = synth::corrupt(ga, spec, ++seed);
            const auto ob = synth::corrupt(gb, spec, ++seed);
            auto sum = classify(oa, ga);
            sum += classify(ob, gb);
            const auto joined = classify(oa + " # " + ob, ga + " # " + gb);
            CHECK(joined == sum);
        }
}

TEST_CASE("confusion matrix") {
    CHECK(metrics::confusion_matrix(std::vector<AlignedPair>{align_chars("und", "und")}).empty());
    const auto one = metrics::confusion_matrix(std::vector<AlignedPair>{align_chars("mcin", "mein")});
    REQUIRE(one.size() == 1);
    CHECK(one.at("c").at("e") == 1);
    const auto two = metrics::confusion_matrix(std::vector<AlignedPair>{align_chars("mcin vnd", "mein und")});
    std::size_t total = 0;
    for (const auto& [from, row] : two)
        for (const auto& [to, n] : row) total += n;
    CHECK(total == 2);
    CHECK(two.at("v").at("u") == 1);
    CHECK(metrics::confusion_to_csv(one) == "ocr_char,gold_char,count\nc,e,1\n");
}

TEST_CASE("corpus report is micro-averaged") {
    const std::vector<std::string> hyps{"vnd dem", "a b c d"};
    const std::vector<std::string> refs{"und dem", "a b c d"};
    const auto r = metrics::evaluate_pairs(hyps, refs);
    CHECK(r.ref_words == 6);
    CHECK(r.word_edits == 1);
    CHECK(r.wer == doctest::Approx(1.0 / 6.0));
    CHECK(r.cer == doctest::Approx(1.0 / 14.0));
    CHECK(r.word_error == 1);
}
