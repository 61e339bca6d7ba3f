#include "ocrfix/metrics.hpp"

#include <set>
#include <sstream>

#include <json.hpp>

#include "ocrfix/text.hpp"

namespace ocrfix::metrics {

namespace {

EditCounts word_edits(std::string_view hyp, std::string_view ref) {
    const auto h = split_tokens(utf8_decode(hyp));
    const auto r = split_tokens(utf8_decode(ref));
    return edit_distance(std::span<const std::u32string>(h), std::span<const std::u32string>(r));
}

EditCounts char_edits(std::string_view hyp, std::string_view ref) {
    const auto h = normalize_whitespace(utf8_decode(hyp));
    const auto r = normalize_whitespace(utf8_decode(ref));
    return edit_distance(std::span<const char32_t>(h), std::span<const char32_t>(r));
}

}  // namespace

double wer(std::string_view hyp, std::string_view ref) {
    const auto ref_words = split_tokens(utf8_decode(ref)).size();
    if (ref_words == 0) throw EmptyInputError("wer: reference has no words");
    return static_cast<double>(word_edits(hyp, ref).distance) / static_cast<double>(ref_words);
}

double cer(std::string_view hyp, std::string_view ref) {
    const auto ref_chars = normalize_whitespace(utf8_decode(ref)).size();
    if (ref_chars == 0) throw EmptyInputError("cer: reference is empty");
    return static_cast<double>(char_edits(hyp, ref).distance) / static_cast<double>(ref_chars);
}

ErrorCounts classify_errors(const AlignedPair& pair) {
    const auto o = utf8_decode(pair.ocr_text);
    const auto g = utf8_decode(pair.gold_text);

    // Gold token id per gold position, -1 on spaces.
    std::vector<int> token_of(g.size(), -1);
    int tok = -1;
    bool in_token = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (is_space(g[i])) {
            in_token = false;
            continue;
        }
        if (!in_token) ++tok;
        in_token = true;
        token_of[i] = tok;
    }

    // Token an OCR-only character sits next to: the gold token just consumed,
    // otherwise the one that follows.
    auto context_token = [&](std::size_t gold_cursor) -> int {
        if (gold_cursor > 0 && token_of[gold_cursor - 1] >= 0) return token_of[gold_cursor - 1];
        if (gold_cursor < g.size() && token_of[gold_cursor] >= 0) return token_of[gold_cursor];
        if (gold_cursor > 0) {
            for (std::size_t k = gold_cursor; k-- > 0;)
                if (token_of[k] >= 0) return token_of[k];
        }
        return -1;
    };

    ErrorCounts counts;
    std::set<int> word_errors;
    std::size_t gold_cursor = 0;
    for (const auto& s : pair.alignment) {
        switch (s.op) {
            case EditOp::match:
                ++gold_cursor;
                break;
            case EditOp::substitute: {
                const auto gp = static_cast<std::size_t>(s.gold_pos);
                const bool g_space = is_space(g[gp]);
                const bool o_space = is_space(o[static_cast<std::size_t>(s.ocr_pos)]);
                if (g_space) {
                    ++counts.over_seg;
                    const int t = context_token(gp);
                    if (t >= 0) word_errors.insert(t);
                } else {
                    if (o_space) ++counts.under_seg;
                    word_errors.insert(token_of[gp]);
                }
                ++gold_cursor;
                break;
            }
            case EditOp::deletion: {
                const auto gp = static_cast<std::size_t>(s.gold_pos);
                if (is_space(g[gp])) {
                    ++counts.over_seg;
                } else {
                    word_errors.insert(token_of[gp]);
                }
                ++gold_cursor;
                break;
            }
            case EditOp::insertion: {
                if (is_space(o[static_cast<std::size_t>(s.ocr_pos)])) {
                    ++counts.under_seg;
                } else {
                    const int t = context_token(gold_cursor);
                    if (t >= 0) word_errors.insert(t);
                }
                break;
            }
        }
    }
    counts.word_error = word_errors.size();
    return counts;
}

void accumulate_confusion(const AlignedPair& pair, ConfusionMap& confusion) {
    const auto o = utf8_decode(pair.ocr_text);
    const auto g = utf8_decode(pair.gold_text);
    for (const auto& s : pair.alignment) {
        if (s.op != EditOp::substitute) continue;
        ++confusion[utf8_encode(o[static_cast<std::size_t>(s.ocr_pos)])]
                   [utf8_encode(g[static_cast<std::size_t>(s.gold_pos)])];
    }
}

ConfusionMap confusion_matrix(std::span<const AlignedPair> pairs) {
    ConfusionMap confusion;
    for (const auto& p : pairs) accumulate_confusion(p, confusion);
    return confusion;
}

ErrorReport evaluate_pairs(std::span<const std::string> hyps, std::span<const std::string> refs) {
    if (hyps.size() != refs.size())
        throw std::invalid_argument("evaluate_pairs: hypothesis/reference count mismatch");
    ErrorReport report;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        const auto hyp = normalize_whitespace(hyps[i]);
        const auto ref = normalize_whitespace(refs[i]);
        if (ref.empty()) continue;
        ++report.pairs;
        report.ref_words += split_tokens(ref).size();
        report.ref_chars += utf8_length(ref);
        report.word_edits += word_edits(hyp, ref).distance;
        const auto aligned = align_chars(hyp, ref);
        report.char_edits += count_ops(aligned.alignment).distance;
        const auto c = classify_errors(aligned);
        report.over_seg += c.over_seg;
        report.under_seg += c.under_seg;
        report.word_error += c.word_error;
        accumulate_confusion(aligned, report.confusion);
    }
    if (report.ref_words > 0)
        report.wer = static_cast<double>(report.word_edits) / static_cast<double>(report.ref_words);
    if (report.ref_chars > 0)
        report.cer = static_cast<double>(report.char_edits) / static_cast<double>(report.ref_chars);
    return report;
}

std::string report_to_json(const ErrorReport& report, int indent) {
    nlohmann::ordered_json j;
    j["wer"] = report.wer;
    j["cer"] = report.cer;
    j["pairs"] = report.pairs;
    j["ref_words"] = report.ref_words;
    j["ref_chars"] = report.ref_chars;
    j["word_edits"] = report.word_edits;
    j["char_edits"] = report.char_edits;
    j["errors"] = {{"over_segmentation", report.over_seg},
                   {"under_segmentation", report.under_seg},
                   {"word_error", report.word_error}};
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    for (const auto& [from, row] : report.confusion) {
        nlohmann::ordered_json r = nlohmann::ordered_json::object();
        for (const auto& [to, n] : row) r[to] = n;
        conf[from] = r;
    }
    j["confusion"] = conf;
    return j.dump(indent);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string confusion_to_csv(const ConfusionMap& confusion) {
    std::ostringstream os;
    os << "ocr_char,gold_char,count\n";
    for (const auto& [from, row] : confusion)
        for (const auto& [to, n] : row) os << csv_field(from) << ',' << csv_field(to) << ',' << n << '\n';
    return os.str();
}

}  // namespace ocrfix::metrics
