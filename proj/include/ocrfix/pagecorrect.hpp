#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocrfix/model.hpp"

namespace ocrfix::pagecorrect {

// S splits a token, M merges two tokens, R replaces characters.
enum class Action { S, M, R };

char action_code(Action a);

struct ActionRecord {
    Action action;
    std::size_t line = 0;
    std::size_t window = 0;
    std::string before;  // affected input tokens
    std::string after;   // corresponding output tokens
};

// Edits turning `before` into `after`: a removed space gives M, an added
// space gives S, and each run of other edits gives one R.
std::vector<ActionRecord> derive_actions(std::string_view before, std::string_view after, std::size_t line = 0,
                                         std::size_t window = 0);

// Maps a batch of windows to their corrections, one output per input.
using Corrector = std::function<std::vector<std::string>(std::span<const std::string>)>;

struct PageResult {
    std::vector<std::string> lines;
    std::vector<ActionRecord> actions;
};

// Splits each line into consecutive `window`-token pieces (the last may be
// shorter), corrects them, and rejoins with single spaces. Lines without any
// changed window, including empty ones, are returned untouched.
PageResult correct_page(std::span<const std::string> lines, const Corrector& corrector, std::size_t window = 5);
PageResult correct_page(std::span<const std::string> lines, const model::CrModel& model, std::size_t window = 5);

struct ActionCounts {
    std::size_t split = 0;
    std::size_t merge = 0;
    std::size_t replace = 0;
    std::size_t total() const { return split + merge + replace; }
};

ActionCounts count_actions(std::span<const ActionRecord> actions);
std::string actions_to_json(std::span<const ActionRecord> actions);

}  // namespace ocrfix::pagecorrect
