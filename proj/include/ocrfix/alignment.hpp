#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ocrfix {

// Direction is always OCR -> gold: `insertion` is a character present only on
// the OCR side, `deletion` a gold character missing from the OCR side.
enum class EditOp : std::uint8_t { match, substitute, insertion, deletion };

struct AlignStep {
    EditOp op;
    std::int32_t ocr_pos;   // code point index, -1 for deletion
    std::int32_t gold_pos;  // code point index, -1 for insertion

    friend bool operator==(const AlignStep&, const AlignStep&) = default;
};

struct AlignedPair {
    std::string ocr_text;
    std::string gold_text;
    std::vector<AlignStep> alignment;
};

struct EditCounts {
    std::size_t distance = 0;
    std::size_t substitutions = 0;
    std::size_t insertions = 0;
    std::size_t deletions = 0;
};

// Unit-cost Levenshtein alignment of `hyp` against `ref`. Backtrace prefers
// the diagonal, then deletions, then insertions, so the path is deterministic.
template <class T>
std::vector<AlignStep> levenshtein_path(std::span<const T> hyp, std::span<const T> ref) {
    const std::size_t n = hyp.size();
    const std::size_t m = ref.size();
    std::vector<std::uint32_t> dp((n + 1) * (m + 1));
    auto at = [m](std::size_t i, std::size_t j) { return i * (m + 1) + j; };
    for (std::size_t i = 0; i <= n; ++i) dp[at(i, 0)] = static_cast<std::uint32_t>(i);
    for (std::size_t j = 0; j <= m; ++j) dp[at(0, j)] = static_cast<std::uint32_t>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::uint32_t diag = dp[at(i - 1, j - 1)] + (hyp[i - 1] == ref[j - 1] ? 0u : 1u);
            const std::uint32_t del = dp[at(i, j - 1)] + 1;
            const std::uint32_t ins = dp[at(i - 1, j)] + 1;
            dp[at(i, j)] = std::min({diag, del, ins});
        }
    }
    std::vector<AlignStep> path;
    path.reserve(n + m);
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        const std::uint32_t cur = dp[at(i, j)];
        if (i > 0 && j > 0) {
            const bool same = hyp[i - 1] == ref[j - 1];
            if (dp[at(i - 1, j - 1)] + (same ? 0u : 1u) == cur) {
                path.push_back({same ? EditOp::match : EditOp::substitute,
                                static_cast<std::int32_t>(i - 1), static_cast<std::int32_t>(j - 1)});
                --i;
                --j;
                continue;
            }
        }
        if (j > 0 && dp[at(i, j - 1)] + 1 == cur) {
            path.push_back({EditOp::deletion, -1, static_cast<std::int32_t>(j - 1)});
            --j;
            continue;
        }
        path.push_back({EditOp::insertion, static_cast<std::int32_t>(i - 1), -1});
        --i;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

EditCounts count_ops(std::span<const AlignStep> path);

// Global character alignment of an OCR/gold pair (code points).
AlignedPair align_chars(std::string_view ocr, std::string_view gold);

// Rebuilds (ocr, gold) from the alignment ops and the characters they carry.
// Throws if the alignment does not cover both strings exactly once, in order.
std::pair<std::u32string, std::u32string> replay_alignment(const AlignedPair& pair);

}  // namespace ocrfix
