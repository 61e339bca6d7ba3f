#include "ocrfix/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "ocrfix/text.hpp"

namespace ocrfix::corpus {

Snippet make_snippet(std::string_view text, std::string book_id, std::size_t page,
                     std::size_t line_index, TokenSpan span) {
    auto norm = normalize_whitespace(text);
    if (norm.empty()) throw EmptyInputError("snippet text is empty after normalization");
    const auto n_tokens = split_tokens(norm).size();
    if (span.end < span.begin || span.size() != n_tokens)
        throw std::invalid_argument("snippet token span does not match its token count");
    return Snippet{std::move(norm), std::move(book_id), page, line_index, span};
}

ShingleSet shingle(std::string_view text, std::size_t n) {
    if (n == 0) throw std::invalid_argument("shingle: n must be positive");
    const auto s = normalize_whitespace(utf8_decode(text));
    if (s.empty()) throw EmptyInputError("shingle: empty text");
    ShingleSet out;
    if (s.size() < n) {
        out.insert(utf8_encode(s));
        return out;
    }
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        out.insert(utf8_encode(std::u32string_view(s).substr(i, n)));
    return out;
}

double jaccard(const ShingleSet& a, const ShingleSet& b) {
    if (a.empty() && b.empty()) return 0.0;
    const ShingleSet& small = a.size() <= b.size() ? a : b;
    const ShingleSet& large = a.size() <= b.size() ? b : a;
    std::size_t inter = 0;
    for (const auto& s : small) inter += large.count(s);
    const std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

MinHasher::MinHasher(std::size_t num_perm, std::uint64_t seed) {
    if (num_perm == 0) throw std::invalid_argument("minhash: num_perm must be positive");
    std::mt19937_64 rng(seed);
    mult_.resize(num_perm);
    add_.resize(num_perm);
    for (std::size_t i = 0; i < num_perm; ++i) {
        const auto hi = rng();
        const auto lo = rng() | 1ULL;
        mult_[i] = (static_cast<unsigned __int128>(hi) << 64) | lo;
        add_[i] = (static_cast<unsigned __int128>(rng()) << 64) | rng();
    }
}

MinHashSignature MinHasher::operator()(const ShingleSet& shingles) const {
    if (shingles.empty()) throw EmptyInputError("minhash: empty shingle set");
    MinHashSignature sig;
    sig.values.assign(mult_.size(), std::numeric_limits<std::uint64_t>::max());
    for (const auto& s : shingles) {
        const auto x = static_cast<unsigned __int128>(fnv1a64(s));
        for (std::size_t i = 0; i < mult_.size(); ++i) {
            const auto h = static_cast<std::uint64_t>((mult_[i] * x + add_[i]) >> 64);
            sig.values[i] = std::min(sig.values[i], h);
        }
    }
    return sig;
}

MinHashSignature minhash(const ShingleSet& shingles, std::size_t num_perm, std::uint64_t seed) {
    return MinHasher(num_perm, seed)(shingles);
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
    if (a.num_perm() != b.num_perm() || a.num_perm() == 0)
        throw std::invalid_argument("estimate_jaccard: signature lengths differ");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.num_perm(); ++i) agree += a.values[i] == b.values[i];
    return static_cast<double>(agree) / static_cast<double>(a.num_perm());
}

double candidate_probability(double s, std::size_t bands, std::size_t rows) {
    return 1.0 - std::pow(1.0 - std::pow(s, static_cast<double>(rows)), static_cast<double>(bands));
}

LshIndex::LshIndex(std::size_t bands, std::size_t rows)
    : bands_(bands), rows_(rows), buckets_(bands) {
    if (bands == 0 || rows == 0) throw std::invalid_argument("LshIndex: bands and rows must be positive");
}

std::uint64_t LshIndex::band_key(const MinHashSignature& sig, std::size_t band) const {
    if (sig.num_perm() != bands_ * rows_)
        throw std::invalid_argument("LshIndex: signature length != bands * rows");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t r = 0; r < rows_; ++r) {
        std::uint64_t v = sig.values[band * rows_ + r];
        for (int k = 0; k < 8; ++k) {
            h ^= v & 0xFF;
            h *= 0x100000001b3ULL;
            v >>= 8;
        }
    }
    return h;
}

void LshIndex::insert(std::uint32_t id, const MinHashSignature& sig) {
    for (std::size_t b = 0; b < bands_; ++b) buckets_[b][band_key(sig, b)].push_back(id);
    ++size_;
}

std::vector<std::uint32_t> LshIndex::candidates(const MinHashSignature& sig) const {
    std::vector<std::uint32_t> out;
    for (std::size_t b = 0; b < bands_; ++b) {
        const auto it = buckets_[b].find(band_key(sig, b));
        if (it != buckets_[b].end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t LshIndex::bucket_occurrences(std::uint32_t id) const {
    std::size_t n = 0;
    for (const auto& band : buckets_)
        for (const auto& [key, ids] : band) n += static_cast<std::size_t>(std::count(ids.begin(), ids.end(), id));
    return n;
}

MatchResult lsh_match(std::span<const Snippet> ocr_snippets, std::span<const Snippet> gold_snippets,
                      double threshold, const LshParams& params) {
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw std::invalid_argument("lsh_match: threshold must lie in (0, 1]");
    if (params.bands * params.rows != params.num_perm)
        throw std::invalid_argument("lsh_match: bands * rows must equal num_perm");
    if (gold_snippets.size() > std::numeric_limits<std::uint32_t>::max())
        throw std::length_error("lsh_match: too many gold snippets");

    const MinHasher hasher(params.num_perm, params.seed);
    std::vector<ShingleSet> gold_sets(gold_snippets.size());
    std::vector<MinHashSignature> gold_sigs(gold_snippets.size());
    std::vector<std::size_t> gold_len(gold_snippets.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t i = 0; i < gold_snippets.size(); ++i) {
        gold_sets[i] = shingle(gold_snippets[i].text, params.shingle_size);
        gold_sigs[i] = hasher(gold_sets[i]);
        gold_len[i] = utf8_length(gold_snippets[i].text);
    }
    LshIndex index(params.bands, params.rows);
    for (std::size_t i = 0; i < gold_snippets.size(); ++i)
        index.insert(static_cast<std::uint32_t>(i), gold_sigs[i]);

    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> best(ocr_snippets.size(), kNone);
    std::vector<double> best_j(ocr_snippets.size(), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t q = 0; q < ocr_snippets.size(); ++q) {
        const auto set = shingle(ocr_snippets[q].text, params.shingle_size);
        const auto len = utf8_length(ocr_snippets[q].text);
        const auto cands = index.candidates(hasher(set));
        std::size_t arg = kNone;
        double bj = -1.0;
        std::size_t bdiff = 0;
        for (const auto c : cands) {
            const double j = jaccard(set, gold_sets[c]);
            const std::size_t diff = len > gold_len[c] ? len - gold_len[c] : gold_len[c] - len;
            bool better = false;
            if (arg == kNone || j > bj) {
                better = true;
            } else if (j == bj) {
                const auto& g = gold_snippets[c];
                const auto& cur = gold_snippets[arg];
                if (diff != bdiff) {
                    better = diff < bdiff;
                } else if (g.line_index != cur.line_index) {
                    better = g.line_index < cur.line_index;
                } else {
                    better = c < arg;
                }
            }
            if (better) {
                arg = c;
                bj = j;
                bdiff = diff;
            }
        }
        if (arg != kNone && bj >= threshold) {
            best[q] = arg;
            best_j[q] = bj;
        }
    }

    MatchResult result;
    for (std::size_t q = 0; q < ocr_snippets.size(); ++q) {
        if (best[q] == kNone) {
            result.unmatched.push_back(q);
        } else {
            result.pairs.push_back({ocr_snippets[q], gold_snippets[best[q]], best_j[q]});
        }
    }
    return result;
}

LocalRegion smith_waterman(std::u32string_view a, std::u32string_view b, const Scoring& scoring) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> h((n + 1) * (m + 1), 0.0);
    auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    double best = 0.0;
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double diag = h[at(i - 1, j - 1)] + (a[i - 1] == b[j - 1] ? scoring.match : scoring.mismatch);
            const double up = h[at(i - 1, j)] + scoring.gap;
            const double left = h[at(i, j - 1)] + scoring.gap;
            const double v = std::max({0.0, diag, up, left});
            h[at(i, j)] = v;
            if (v > best) {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    LocalRegion region;
    region.score = best;
    std::size_t i = bi;
    std::size_t j = bj;
    while (i > 0 && j > 0 && h[at(i, j)] > 0.0) {
        const double cur = h[at(i, j)];
        const bool same = a[i - 1] == b[j - 1];
        if (cur == h[at(i - 1, j - 1)] + (same ? scoring.match : scoring.mismatch)) {
            region.path.push_back({same ? EditOp::match : EditOp::substitute,
                                   static_cast<std::int32_t>(i - 1), static_cast<std::int32_t>(j - 1)});
            --i;
            --j;
        } else if (cur == h[at(i - 1, j)] + scoring.gap) {
            region.path.push_back({EditOp::insertion, static_cast<std::int32_t>(i - 1), -1});
            --i;
        } else {
            region.path.push_back({EditOp::deletion, -1, static_cast<std::int32_t>(j - 1)});
            --j;
        }
    }
    std::reverse(region.path.begin(), region.path.end());
    region.a_begin = i;
    region.a_end = bi;
    region.b_begin = j;
    region.b_end = bj;
    return region;
}

namespace {

struct TokenRange {
    std::size_t begin;
    std::size_t end;
};

std::vector<TokenRange> token_ranges(const std::u32string& s) {
    std::vector<TokenRange> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        if (i >= s.size()) break;
        const std::size_t start = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        out.push_back({start, i});
    }
    return out;
}

// Keeps the tokens between the first and last token that have at least half
// of their characters inside [lo, hi).
std::u32string trim_to_region(const std::u32string& s, std::size_t lo, std::size_t hi) {
    const auto toks = token_ranges(s);
    auto inside = [&](const TokenRange& t) {
        const std::size_t a = std::max(t.begin, lo);
        const std::size_t b = std::min(t.end, hi);
        const std::size_t covered = b > a ? b - a : 0;
        return 2 * covered >= t.end - t.begin;
    };
    std::size_t first = 0;
    while (first < toks.size() && !inside(toks[first])) ++first;
    if (first == toks.size()) return {};
    std::size_t last = toks.size() - 1;
    while (last > first && !inside(toks[last])) --last;
    return s.substr(toks[first].begin, toks[last].end - toks[first].begin);
}

}  // namespace

AlignedPair local_align(std::string_view a, std::string_view b, const Scoring& scoring) {
    const auto ua = normalize_whitespace(utf8_decode(a));
    const auto ub = normalize_whitespace(utf8_decode(b));
    if (ua.empty() || ub.empty()) throw EmptyInputError("local_align: empty input");
    const auto region = smith_waterman(ua, ub, scoring);
    const auto ra = trim_to_region(ua, region.a_begin, region.a_end);
    const auto rb = trim_to_region(ub, region.b_begin, region.b_end);
    return align_chars(utf8_encode(ra), utf8_encode(rb));
}

std::vector<DocumentLine> lines_from_text(std::string_view text, std::string book_id) {
    std::vector<DocumentLine> out;
    std::size_t page = 0;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        while (!line.empty() && line.front() == '\f') {
            ++page;
            line.remove_prefix(1);
        }
        out.push_back({book_id, page, line_no++, std::string(line)});
        if (end == text.size()) break;
        start = end + 1;
    }
    while (!out.empty() && normalize_whitespace(out.back().text).empty()) out.pop_back();
    return out;
}

std::vector<DocumentLine> read_document(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    if (path.extension() == ".jsonl") {
        std::vector<DocumentLine> out;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (normalize_whitespace(line).empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                DocumentLine d;
                d.book_id = j.contains("book_id") ? j.at("book_id").get<std::string>() : path.stem().string();
                d.page = j.contains("page") ? j.at("page").get<std::size_t>() : 0;
                d.text = j.at("text").get<std::string>();
                d.line_index = out.size();
                out.push_back(std::move(d));
            } catch (const nlohmann::json::exception& e) {
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        return out;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read error on " + path.string());
    return lines_from_text(text, path.stem().string());
}

std::vector<Snippet> ocr_snippets(std::span<const DocumentLine> lines, std::size_t window) {
    if (window == 0) throw std::invalid_argument("window must be positive");
    std::vector<Snippet> out;
    for (const auto& line : lines) {
        std::size_t offset = 0;
        for (const auto& sentence : split_sentences(line.text)) {
            const auto toks = split_tokens(sentence);
            for (std::size_t b = 0; b < toks.size(); b += window) {
                std::size_t e = std::min(b + window, toks.size());
                // a short remainder joins the window before it
                if (toks.size() - e < window) e = toks.size();
                out.push_back(make_snippet(join_tokens(toks, b, e), line.book_id, line.page,
                                           line.line_index, {offset + b, offset + e}));
                if (e == toks.size()) break;
            }
            offset += toks.size();
        }
    }
    return out;
}

std::vector<Snippet> gold_snippets(std::span<const DocumentLine> lines, std::size_t window) {
    if (window == 0) throw std::invalid_argument("window must be positive");
    struct Tok {
        std::string text;
        std::size_t page;
        std::size_t line;
    };
    std::map<std::string, std::vector<Tok>> streams;
    std::vector<std::string> order;
    std::vector<Snippet> out;
    for (const auto& line : lines) {
        if (!streams.contains(line.book_id)) order.push_back(line.book_id);
        auto& stream = streams[line.book_id];
        for (const auto& sentence : split_sentences(line.text)) {
            auto toks = split_tokens(sentence);
            if (toks.size() < window)
                out.push_back(make_snippet(sentence, line.book_id, line.page, line.line_index,
                                           {stream.size(), stream.size() + toks.size()}));
            for (auto& t : toks) stream.push_back({std::move(t), line.page, line.line_index});
        }
    }
    for (const auto& book : order) {
        const auto& stream = streams[book];
        std::vector<std::string> toks;
        toks.reserve(stream.size());
        for (const auto& t : stream) toks.push_back(t.text);
        for (std::size_t b = 0; b < toks.size(); ++b) {
            for (std::size_t len = window; len <= 2 * window; ++len) {
                if (b + len > toks.size()) {
                    // a stream shorter than the window still yields one snippet
                    if (len == window && b == 0)
                        out.push_back(make_snippet(join_tokens(toks), book, stream[0].page,
                                                   stream[0].line, {0, toks.size()}));
                    break;
                }
                out.push_back(make_snippet(join_tokens(toks, b, b + len), book, stream[b].page,
                                           stream[b].line, {b, b + len}));
            }
        }
    }
    return out;
}

std::string coverage_to_json(const CoverageReport& report, int indent) {
    nlohmann::ordered_json j;
    j["total"] = report.total;
    j["matched"] = report.matched;
    j["dropped"] = report.dropped;
    j["coverage"] = report.coverage();
    auto pages = nlohmann::ordered_json::array();
    for (const auto& p : report.pages) {
        nlohmann::ordered_json e;
        e["book_id"] = p.book_id;
        e["page"] = p.page;
        e["matched"] = p.matched;
        e["dropped"] = p.dropped;
        const auto total = p.matched + p.dropped;
        e["coverage"] = total == 0 ? 0.0 : static_cast<double>(p.matched) / static_cast<double>(total);
        pages.push_back(e);
    }
    j["pages"] = pages;
    return j.dump(indent);
}

CorpusResult build_corpus(std::span<const DocumentLine> ocr_lines,
                          std::span<const DocumentLine> gold_lines, const CorpusOptions& options) {
    const auto ocr = ocr_snippets(ocr_lines, options.window);
    const auto gold = gold_snippets(gold_lines, options.window);
    const auto matched = lsh_match(ocr, gold, options.threshold, options.lsh);

    CorpusResult result;
    std::map<std::pair<std::string, std::size_t>, PageCoverage> pages;
    for (const auto& s : ocr) {
        auto& p = pages[{s.book_id, s.page}];
        p.book_id = s.book_id;
        p.page = s.page;
    }

    std::vector<AlignedPair> refined(matched.pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < matched.pairs.size(); ++i)
        refined[i] = local_align(matched.pairs[i].ocr.text, matched.pairs[i].gold.text, options.scoring);

    for (std::size_t i = 0; i < matched.pairs.size(); ++i) {
        const auto& mp = matched.pairs[i];
        auto& page = pages[{mp.ocr.book_id, mp.ocr.page}];
        if (refined[i].ocr_text.empty() || refined[i].gold_text.empty()) {
            ++page.dropped;
            continue;
        }
        ++page.matched;
        result.pairs.push_back(std::move(refined[i]));
        result.jaccard.push_back(mp.jaccard);
    }
    for (const auto q : matched.unmatched) ++pages[{ocr[q].book_id, ocr[q].page}].dropped;

    for (auto& [key, p] : pages) {
        result.coverage.matched += p.matched;
        result.coverage.dropped += p.dropped;
        result.coverage.pages.push_back(p);
    }
    result.coverage.total = result.coverage.matched + result.coverage.dropped;
    return result;
}

}  // namespace ocrfix::corpus
