#include "ocrfix/pagecorrect.hpp"

#include <json.hpp>

#include "ocrfix/alignment.hpp"
#include "ocrfix/text.hpp"
#include "ocrfix/training.hpp"

namespace ocrfix::pagecorrect {

namespace {

// Grows [lo, hi) outward to whole tokens; a lone space takes both neighbours.
std::string token_span(const std::u32string& s, std::size_t lo, std::size_t hi) {
    while (lo > 0 && !is_space(s[lo - 1])) --lo;
    while (hi < s.size() && !is_space(s[hi])) ++hi;
    return utf8_encode(s.substr(lo, hi - lo));
}

}  // namespace

char action_code(Action a) {
    switch (a) {
        case Action::S: return 'S';
        case Action::M: return 'M';
        case Action::R: return 'R';
    }
    return '?';
}

std::vector<ActionRecord> derive_actions(std::string_view before, std::string_view after, std::size_t line,
                                         std::size_t window) {
    const auto b = normalize_whitespace(utf8_decode(before));
    const auto a = normalize_whitespace(utf8_decode(after));
    const auto path = levenshtein_path(std::span<const char32_t>(b), std::span<const char32_t>(a));

    std::vector<ActionRecord> out;
    // Cursor positions before each step, and the open R run if any.
    std::size_t bi = 0, ai = 0;
    bool in_run = false;
    std::size_t run_b0 = 0, run_b1 = 0, run_a0 = 0, run_a1 = 0;
    auto close_run = [&] {
        if (!in_run) return;
        out.push_back({Action::R, line, window, token_span(b, run_b0, run_b1), token_span(a, run_a0, run_a1)});
        in_run = false;
    };
    for (const auto& step : path) {
        const bool b_space = step.ocr_pos >= 0 && is_space(b[bi]);
        const bool a_space = step.gold_pos >= 0 && is_space(a[ai]);
        const std::size_t bn = step.ocr_pos >= 0 ? 1 : 0;
        const std::size_t an = step.gold_pos >= 0 ? 1 : 0;
        if (step.op == EditOp::match) {
            close_run();
        } else if (b_space && !a_space) {
            close_run();
            out.push_back({Action::M, line, window, token_span(b, bi, bi + 1), token_span(a, ai, ai + an)});
        } else if (a_space && !b_space) {
            close_run();
            out.push_back({Action::S, line, window, token_span(b, bi, bi + bn), token_span(a, ai, ai + 1)});
        } else {
            if (!in_run) {
                in_run = true;
                run_b0 = bi;
                run_a0 = ai;
            }
            run_b1 = bi + bn;
            run_a1 = ai + an;
        }
        bi += bn;
        ai += an;
    }
    close_run();
    return out;
}

PageResult correct_page(std::span<const std::string> lines, const Corrector& corrector, std::size_t window) {
    if (window == 0) throw std::invalid_argument("correct_page: window must be positive");
    struct Piece {
        std::size_t line, index;
    };
    std::vector<std::string> inputs;
    std::vector<Piece> pieces;
    std::vector<std::vector<std::string>> line_windows(lines.size());
    for (std::size_t l = 0; l < lines.size(); ++l) {
        const auto tokens = split_tokens(lines[l]);
        for (std::size_t b = 0, w = 0; b < tokens.size(); b += window, ++w) {
            inputs.push_back(join_tokens(tokens, b, std::min(tokens.size(), b + window)));
            pieces.push_back({l, w});
            line_windows[l].push_back(inputs.back());
        }
    }
    const auto outputs = inputs.empty() ? std::vector<std::string>{} : corrector(inputs);
    if (outputs.size() != inputs.size()) throw std::runtime_error("corrector returned the wrong number of outputs");

    PageResult result;
    result.lines.assign(lines.begin(), lines.end());
    std::vector<bool> changed(lines.size(), false);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto fixed = normalize_whitespace(outputs[i]);
        if (fixed == inputs[i]) continue;
        const auto& piece = pieces[i];
        line_windows[piece.line][piece.index] = fixed;
        changed[piece.line] = true;
        auto acts = derive_actions(inputs[i], fixed, piece.line, piece.index);
        result.actions.insert(result.actions.end(), acts.begin(), acts.end());
    }
    for (std::size_t l = 0; l < lines.size(); ++l) {
        if (!changed[l]) continue;
        std::vector<std::string> parts;
        for (const auto& w : line_windows[l])
            if (!w.empty()) parts.push_back(w);
        result.lines[l] = join_tokens(parts);
    }
    return result;
}

PageResult correct_page(std::span<const std::string> lines, const model::CrModel& model, std::size_t window) {
    return correct_page(
        lines, [&model](std::span<const std::string> in) { return training::correct_all(model, in); }, window);
}

ActionCounts count_actions(std::span<const ActionRecord> actions) {
    ActionCounts c;
    for (const auto& a : actions) {
        switch (a.action) {
            case Action::S: ++c.split; break;
            case Action::M: ++c.merge; break;
            case Action::R: ++c.replace; break;
        }
    }
    return c;
}

std::string actions_to_json(std::span<const ActionRecord> actions) {
    const auto counts = count_actions(actions);
    nlohmann::ordered_json j;
    j["summary"] = {{"S", counts.split}, {"M", counts.merge}, {"R", counts.replace}, {"total", counts.total()}};
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& a : actions)
        list.push_back({{"action", std::string(1, action_code(a.action))},
                        {"line", a.line},
                        {"window", a.window},
                        {"before", a.before},
                        {"after", a.after}});
    j["actions"] = list;
    return j.dump(2);
}

}  // namespace ocrfix::pagecorrect
