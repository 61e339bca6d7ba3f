#include <doctest.h>

#include <random>

#include "ocrfix/alignment.hpp"
#include "ocrfix/metrics.hpp"
#include "ocrfix/synth.hpp"
#include "ocrfix/text.hpp"
#include "ocrfix/tsv.hpp"

using namespace ocrfix;
using namespace ocrfix::synth;

namespace {

std::string gold_sample() { return read_text_file(OCRFIX_DATA_DIR "/chronik.txt"); }

}  // namespace

TEST_CASE("zero probabilities leave the text unchanged") {
    NoiseSpec spec;
    const std::string g = "der Herr ſprach zu ſeinem Knecht";
    for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(corrupt(g, spec, seed) == g);
    CHECK_THROWS_AS(corrupt("   ", spec, 1), EmptyInputError);
}

TEST_CASE("word error with a single confusion") {
    NoiseSpec spec;
    spec.p_word_error = 1.0;
    spec.confusion[U'e'] = {{U'c', 1.0}};
    CHECK(corrupt("mein", spec, 9) == "mcin");
}

TEST_CASE("corruption is deterministic per seed") {
    const auto spec = default_spec(0.3, 1);
    const std::string g = "vnd es geſchah alſo bald darnach daß der Fürſt kam";
    CHECK(corrupt(g, spec, 5) == corrupt(g, spec, 5));
    bool differs = false;
    for (std::uint64_t s = 6; s < 30 && !differs; ++s) differs = corrupt(g, spec, s) != corrupt(g, spec, 5);
    CHECK(differs);
}

TEST_CASE("default spec mix and validation") {
    const auto spec = default_spec();
    CHECK(spec.total() == doctest::Approx(0.30));
    CHECK(spec.p_over_seg / spec.total() == doctest::Approx(0.54));
    CHECK(spec.p_under_seg / spec.total() == doctest::Approx(0.03));
    CHECK(spec.p_word_error / spec.total() == doctest::Approx(0.43));
    CHECK_NOTHROW(spec.validate());
    CHECK(spec.confusion.at(U'ſ').front().first == U'f');
    CHECK(spec.confusion.at(U'f').front().first == U'ſ');

    NoiseSpec bad;
    bad.p_over_seg = 0.7;
    bad.p_word_error = 0.7;
    CHECK_THROWS(bad.validate());
    NoiseSpec neg;
    neg.confusion[U'a'] = {{U'b', -1.0}};
    CHECK_THROWS(neg.validate());
    CHECK_THROWS(default_spec(1.5));
}

TEST_CASE("noise spec json round trip") {
    const auto spec = default_spec(0.2, 77);
    const auto back = spec_from_json(spec_to_json(spec));
    CHECK(back.p_over_seg == spec.p_over_seg);
    CHECK(back.p_word_error == spec.p_word_error);
    CHECK(back.confusion == spec.confusion);
    CHECK(back.residual_alphabet == spec.residual_alphabet);
    CHECK(back.seed == 77);
    const auto custom = spec_from_json(R"({"p_word_error": 1.0, "confusion": {"e": {"c": 2.0}}})");
    CHECK(corrupt("mein", custom, 1) == "mcin");
    CHECK_THROWS(spec_from_json(R"({"confusion": {"ab": {"c": 1}}})"));
}

TEST_CASE("realized error frequencies follow the spec") {
    const auto tokens = split_tokens(gold_sample());
    const auto spec = default_spec(0.3, 0);
    std::size_t n = 0, over = 0, under = 0, word = 0;
    std::uint64_t seed = 100;
    for (std::size_t b = 0; b + 10 <= tokens.size(); b += 10) {
        const auto log = corrupt_logged(join_tokens(tokens, b, b + 10), spec, ++seed).log;
        // merges can only apply to the first nine tokens of a snippet
        n += 9;
        for (const auto& inj : log) {
            if (inj.token == 9) continue;
            over += inj.kind == ErrorKind::over_seg;
            under += inj.kind == ErrorKind::under_seg;
            word += inj.kind == ErrorKind::word_error;
        }
    }
    REQUIRE(n > 5000);
    const double N = static_cast<double>(n);
    CHECK(std::abs(over / N - spec.p_over_seg) <= 0.02);
    CHECK(std::abs(under / N - spec.p_under_seg) <= 0.02);
    CHECK(std::abs(word / N - spec.p_word_error) <= 0.02);
    CHECK(std::abs((over + under + word) / N - 0.30) <= 0.02);
}

TEST_CASE("classify errors recovers single injected errors") {
    const auto tokens = split_tokens(gold_sample());
    const auto spec = default_spec(0.3, 0);
    std::size_t checked = 0;
    for (std::size_t b = 0; b + 5 <= tokens.size() && checked < 300; b += 5) {
        const auto gold = join_tokens(tokens, b, b + 5);
        const auto c = corrupt_logged(gold, spec, b);
        if (c.log.size() != 1) continue;
        const auto counts = metrics::classify_errors(align_chars(c.text, gold));
        metrics::ErrorCounts expect;
        switch (c.log[0].kind) {
            case ErrorKind::over_seg: expect.over_seg = 1; break;
            case ErrorKind::under_seg: expect.under_seg = 1; break;
            case ErrorKind::word_error: expect.word_error = 1; break;
        }
        INFO(gold << " -> " << c.text);
        CHECK(counts == expect);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("make pairs windows and keys") {
    const std::string text = "a b c d e f g\n\nh i j\n";
    NoiseSpec none;
    const auto pairs = make_pairs(text, none, 5);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].gold == "a b c d e");
    CHECK(pairs[1].gold == "f g");
    CHECK(pairs[2].gold == "h i j");
    CHECK(pairs[2].key == "3");
    for (const auto& p : pairs) CHECK(p.ocr == p.gold);
    const auto sliding = make_pairs(text, none, 5, 1);
    CHECK(sliding.size() == 4);
    const auto spec = default_spec(0.3, 9);
    const auto x = make_pairs(gold_sample(), spec);
    const auto y = make_pairs(gold_sample(), spec);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].ocr == y[i].ocr);
}
