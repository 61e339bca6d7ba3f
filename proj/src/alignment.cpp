#include "ocrfix/alignment.hpp"

#include <stdexcept>

#include "ocrfix/text.hpp"

namespace ocrfix {

EditCounts count_ops(std::span<const AlignStep> path) {
    EditCounts c;
    for (const auto& step : path) {
        switch (step.op) {
            case EditOp::match:
                break;
            case EditOp::substitute:
                ++c.substitutions;
                break;
            case EditOp::insertion:
                ++c.insertions;
                break;
            case EditOp::deletion:
                ++c.deletions;
                break;
        }
    }
    c.distance = c.substitutions + c.insertions + c.deletions;
    return c;
}

AlignedPair align_chars(std::string_view ocr, std::string_view gold) {
    const auto o = utf8_decode(ocr);
    const auto g = utf8_decode(gold);
    AlignedPair pair;
    pair.ocr_text = std::string(ocr);
    pair.gold_text = std::string(gold);
    pair.alignment = levenshtein_path(std::span<const char32_t>(o), std::span<const char32_t>(g));
    return pair;
}

std::pair<std::u32string, std::u32string> replay_alignment(const AlignedPair& pair) {
    const auto o = utf8_decode(pair.ocr_text);
    const auto g = utf8_decode(pair.gold_text);
    std::u32string ro;
    std::u32string rg;
    std::int32_t next_o = 0;
    std::int32_t next_g = 0;
    for (const auto& s : pair.alignment) {
        const bool uses_o = s.op != EditOp::deletion;
        const bool uses_g = s.op != EditOp::insertion;
        if (uses_o) {
            if (s.ocr_pos != next_o || s.ocr_pos >= static_cast<std::int32_t>(o.size()))
                throw std::logic_error("alignment skips or repeats an OCR position");
            ro.push_back(o[static_cast<std::size_t>(s.ocr_pos)]);
            ++next_o;
        } else if (s.ocr_pos != -1) {
            throw std::logic_error("deletion step carries an OCR position");
        }
        if (uses_g) {
            if (s.gold_pos != next_g || s.gold_pos >= static_cast<std::int32_t>(g.size()))
                throw std::logic_error("alignment skips or repeats a gold position");
            rg.push_back(g[static_cast<std::size_t>(s.gold_pos)]);
            ++next_g;
        } else if (s.gold_pos != -1) {
            throw std::logic_error("insertion step carries a gold position");
        }
        if (s.op == EditOp::match && ro.back() != rg.back())
            throw std::logic_error("match step joins different characters");
        if (s.op == EditOp::substitute && ro.back() == rg.back())
            throw std::logic_error("substitute step joins equal characters");
    }
    if (ro.size() != o.size() || rg.size() != g.size())
        throw std::logic_error("alignment does not cover both strings");
    return {ro, rg};
}

}  // namespace ocrfix
