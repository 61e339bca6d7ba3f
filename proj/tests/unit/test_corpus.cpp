#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ocrfix/corpus.hpp"
#include "ocrfix/text.hpp"
#include "ocrfix/tsv.hpp"
#include "oracles.hpp"

using namespace ocrfix;
using namespace ocrfix::corpus;

namespace {

ShingleSet set_of(std::initializer_list<const char*> items) {
    ShingleSet s;
    for (const char* i : items) s.insert(i);
    return s;
}

ShingleSet random_set(std::mt19937_64& rng, std::size_t universe) {
    std::bernoulli_distribution keep(0.5);
    ShingleSet s;
    for (std::size_t i = 0; i < universe; ++i)
        if (keep(rng)) s.insert(std::to_string(i));
    if (s.empty()) s.insert("0");
    return s;
}

Snippet snip(std::string text, std::size_t line) {
    const auto n = split_tokens(text).size();
    return make_snippet(text, "b", 0, line, {0, n});
}

std::string random_line(std::mt19937_64& rng, std::size_t tokens) {
    std::uniform_int_distribution<int> len(2, 8), ch('a', 'z');
    std::string s;
    for (std::size_t t = 0; t < tokens; ++t) {
        if (t) s += ' ';
        for (int k = len(rng); k > 0; --k) s += static_cast<char>(ch(rng));
    }
    return s;
}

}  // namespace

TEST_CASE("shingle examples") {
    CHECK(shingle("und", 3) == set_of({"und"}));
    CHECK(shingle("ab", 3) == set_of({"ab"}));
    CHECK(shingle("vnd und", 3) == set_of({"vnd", "nd ", "d u", " un", "und"}));
    CHECK(shingle("vnd   und", 3) == shingle("vnd und", 3));
    CHECK(shingle("Und", 3) != shingle("und", 3));
    CHECK(shingle("ſein", 3) == set_of({"ſei", "ein"}));
    CHECK_THROWS_AS(shingle("   ", 3), EmptyInputError);
}

TEST_CASE("jaccard examples and properties") {
    const auto s = set_of({"a", "b"});
    CHECK(jaccard(s, s) == 1.0);
    CHECK(jaccard(set_of({"a"}), set_of({"b"})) == 0.0);
    CHECK(jaccard(set_of({"a", "b", "c"}), set_of({"b", "c", "d"})) == doctest::Approx(0.5));
    CHECK(jaccard({}, {}) == 0.0);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 300; ++i) {
        const auto a = random_set(rng, 8), b = random_set(rng, 8);
        const double j = jaccard(a, b);
        CHECK(j == jaccard(b, a));
        CHECK(j >= 0.0);
        CHECK(j <= 1.0);
        CHECK((j == 1.0) == (a == b));
    }
}

TEST_CASE("minhash determinism and shape") {
    const auto s = shingle("der Herr ſprach zu jm");
    CHECK(minhash(s, 64, 9) == minhash(s, 64, 9));
    CHECK(minhash(s, 64, 9) != minhash(s, 64, 10));
    CHECK(minhash(s, 1, 9).values.size() == 1);
    CHECK_THROWS(minhash({}, 16, 1));
}

TEST_CASE("minhash agreement estimates jaccard") {
    std::mt19937_64 rng(17);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const auto a = random_set(rng, 60), b = random_set(rng, 60);
        const double est = estimate_jaccard(minhash(a, 256, i), minhash(b, 256, i));
        worst = std::max(worst, std::abs(est - jaccard(a, b)));
    }
    CHECK(worst <= 0.15);

    // Mean over seeds converges to the exact value.
    const auto a = shingle("vnd als er nun kam in die Statt");
    const auto b = shingle("vnd als er nun kam in die Stadt");
    double mean = 0.0;
    for (int seed = 0; seed < 100; ++seed) mean += estimate_jaccard(minhash(a, 256, seed), minhash(b, 256, seed));
    CHECK(std::abs(mean / 100.0 - jaccard(a, b)) <= 0.05);
}

TEST_CASE("candidate probability") {
    CHECK(candidate_probability(1.0, 32, 4) == doctest::Approx(1.0));
    CHECK(candidate_probability(0.0, 32, 4) == 0.0);
    CHECK(candidate_probability(0.8, 32, 4) >= 0.999);
    CHECK(candidate_probability(0.9, 32, 4) == doctest::Approx(1.0 - std::pow(1.0 - std::pow(0.9, 4), 32)));
}

TEST_CASE("lsh index puts each snippet in every band") {
    LshIndex index(32, 4);
    for (std::uint32_t id = 0; id < 50; ++id) index.insert(id, minhash(shingle("text " + std::to_string(id)), 128, 1));
    for (std::uint32_t id = 0; id < 50; ++id) CHECK(index.bucket_occurrences(id) == 32);
    const auto c = index.candidates(minhash(shingle("text 7"), 128, 1));
    CHECK(std::find(c.begin(), c.end(), 7u) != c.end());
    CHECK(std::is_sorted(c.begin(), c.end()));
    CHECK_THROWS(index.insert(99, minhash(shingle("x"), 64, 1)));
}

TEST_CASE("lsh match examples") {
    const std::vector<Snippet> gold{snip("der Herr ſprach zu ſeinem Knecht", 0), snip("vnd es geſchah alſo bald darnach", 1),
                                    snip("in dem Jahr da man zehlet tauſent", 2)};
    const std::vector<Snippet> ocr{snip("vnd es geſchah alſo bald darnach", 0), snip("in dem Jahr da man zehlet", 1),
                                   snip("gantz fremde wort hier", 2)};
    const auto r = lsh_match(ocr, gold, 0.8, {});
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0].jaccard == 1.0);
    CHECK(r.pairs[0].gold.line_index == 1);
    // "in dem Jahr da man zehlet" against its longer gold scores below 0.8.
    CHECK(jaccard(shingle(ocr[1].text), shingle(gold[2].text)) < 0.8);
    CHECK(r.unmatched == std::vector<std::size_t>{1, 2});

    const auto loose = lsh_match(ocr, gold, 0.5, {});
    for (const auto& p : loose.pairs) CHECK(p.jaccard >= 0.5);
    CHECK_THROWS(lsh_match(ocr, gold, 0.0, {}));
    LshParams bad;
    bad.bands = 30;
    CHECK_THROWS(lsh_match(ocr, gold, 0.8, bad));
}

TEST_CASE("lsh match never emits pairs below threshold") {
    std::mt19937_64 rng(4);
    std::vector<Snippet> gold, ocr;
    for (std::size_t i = 0; i < 200; ++i) gold.push_back(snip(random_line(rng, 5), i));
    std::uniform_int_distribution<std::size_t> pick(0, gold.size() - 1), pos(0, 20);
    for (std::size_t i = 0; i < 200; ++i) {
        auto text = utf8_decode(gold[pick(rng)].text);
        for (int e = 0; e < 3; ++e) {
            const auto p = pos(rng) % text.size();
            if (text[p] != U' ') text[p] = U'q';
        }
        ocr.push_back(snip(utf8_encode(text), i));
    }
    for (double threshold : {0.5, 0.7, 0.8}) {
        const auto r = lsh_match(ocr, gold, threshold, {});
        CHECK(r.pairs.size() + r.unmatched.size() == ocr.size());
        for (const auto& p : r.pairs) {
            const double exact = jaccard(shingle(p.ocr.text), shingle(p.gold.text));
            CHECK(exact == p.jaccard);
            CHECK(exact >= threshold);
        }
    }
}

TEST_CASE("lsh match breaks ties by length difference then line") {
    const std::vector<Snippet> gold{snip("a b c d e a b c d e", 0), snip("a b c d e", 1), snip("a b c d e", 2)};
    const std::vector<Snippet> ocr{snip("a b c d e", 0)};
    const auto r = lsh_match(ocr, gold, 0.8, {});
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0].gold.line_index == 1);
}

TEST_CASE("local align trims whole tokens") {
    const auto same = local_align("der Herr ſprach", "der Herr ſprach");
    CHECK(same.ocr_text == "der Herr ſprach");
    CHECK(same.gold_text == "der Herr ſprach");
    for (const auto& s : same.alignment) CHECK(s.op == EditOp::match);

    const auto xx = local_align("xx abc", "abc yy");
    CHECK(xx.ocr_text == "abc");
    CHECK(xx.gold_text == "abc");

    const auto fig = local_align("fen der groſſen Gewalt vnd Macht", "der groſſen Gewalt vnd Macht Willkühr");
    CHECK(fig.ocr_text == "der groſſen Gewalt vnd Macht");
    CHECK(fig.gold_text == "der groſſen Gewalt vnd Macht");
}

TEST_CASE("local align keeps internal gaps in the alignment only") {
    const auto p = local_align("Zeit vnd Weil verg ieng", "Zeit und Weil vergieng");
    CHECK(p.ocr_text == "Zeit vnd Weil verg ieng");
    CHECK(p.gold_text == "Zeit und Weil vergieng");
    const auto [a, b] = replay_alignment(p);
    CHECK(utf8_encode(a) == p.ocr_text);
    CHECK(utf8_encode(b) == p.gold_text);
}

TEST_CASE("smith waterman score equals exhaustive local alignment") {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> len(1, 6), pick(0, 2);
    const std::u32string alphabet = U"ab ";
    for (int i = 0; i < 150; ++i) {
        std::u32string a(len(rng), U'a'), b(len(rng), U'a');
        for (auto& c : a) c = alphabet[pick(rng)];
        for (auto& c : b) c = alphabet[pick(rng)];
        const auto r = smith_waterman(a, b, {});
        CHECK(r.score == oracle::local_score(a, b, 2.0, -1.0, -1.0));
    }
}

TEST_CASE("snippet invariants") {
    CHECK_THROWS_AS(make_snippet("  ", "b", 0, 0, {0, 0}), EmptyInputError);
    CHECK_THROWS_AS(make_snippet("a b", "b", 0, 0, {0, 3}), std::invalid_argument);
    const auto s = make_snippet(" a   b ", "b", 0, 0, {4, 6});
    CHECK(s.text == "a b");
}

TEST_CASE("ocr and gold windows") {
    const auto lines = lines_from_text("a b c d e f g\nh i j");
    const auto ocr = ocr_snippets(lines, 5);
    REQUIRE(ocr.size() == 2);
    CHECK(ocr[0].text == "a b c d e f g");
    CHECK(ocr[1].text == "h i j");
    const auto three = ocr_snippets(lines_from_text("a b c d e f g h i j k l m"), 5);
    REQUIRE(three.size() == 2);
    CHECK(three[1].text == "f g h i j k l m");
    CHECK(three[1].token_span.begin == 5);

    const auto gold = gold_snippets(lines, 2);
    for (const auto& g : gold) {
        CHECK(g.token_span.size() >= 2);
        CHECK(g.token_span.size() <= 4);
    }
    CHECK(std::any_of(gold.begin(), gold.end(), [](const Snippet& g) { return g.text == "f g h i"; }));
    const auto short_gold = gold_snippets(lines, 5);
    CHECK(std::any_of(short_gold.begin(), short_gold.end(), [](const Snippet& g) { return g.text == "h i j"; }));
}

TEST_CASE("build corpus on identical text covers everything") {
    const auto text = read_text_file(OCRFIX_DATA_DIR "/chronik.txt");
    auto lines = lines_from_text(text.substr(0, 6000));
    lines.pop_back();
    const auto r = build_corpus(lines, lines, {});
    CHECK(r.coverage.total > 100);
    CHECK(r.coverage.coverage() == 1.0);
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
        CHECK(r.pairs[i].ocr_text == r.pairs[i].gold_text);
        CHECK(r.jaccard[i] == 1.0);
    }
}

TEST_CASE("build corpus drops unrelated lines") {
    const auto text = read_text_file(OCRFIX_DATA_DIR "/chronik.txt");
    auto gold = lines_from_text(text.substr(0, 12000));
    gold.pop_back();
    auto ocr = gold;
    std::mt19937_64 rng(21);
    for (std::size_t i = 3; i < ocr.size(); i += 10) ocr[i].text = random_line(rng, split_tokens(ocr[i].text).size());
    const auto snippets = ocr_snippets(ocr, 5);
    const auto replaced = std::count_if(snippets.begin(), snippets.end(),
                                        [](const Snippet& s) { return s.line_index % 10 == 3; });
    const auto r = build_corpus(ocr, gold, {});
    CHECK(r.coverage.total == snippets.size());
    CHECK(r.coverage.dropped == static_cast<std::size_t>(replaced));
    CHECK(r.coverage.coverage() == doctest::Approx(0.9).epsilon(0.03));
    for (double j : r.jaccard) CHECK(j >= 0.8);
    const auto json = coverage_to_json(r.coverage);
    CHECK(json.find("\"matched\"") != std::string::npos);
}
