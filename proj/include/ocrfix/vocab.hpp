#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ocrfix::model {

// Character <-> id bijection. Ids 0..3 are reserved for the special symbols
// and never map to a character.
class CharVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kSos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;
    static constexpr int kNumSpecials = 4;

    CharVocab() = default;
    explicit CharVocab(std::vector<char32_t> chars);

    // Sorted set of code points seen in `texts`.
    static CharVocab build(std::span<const std::string> texts);

    std::size_t size() const { return kNumSpecials + chars_.size(); }
    int id(char32_t c) const;
    bool contains(char32_t c) const { return index_.contains(c); }
    // Character for a non-special id.
    char32_t symbol(int id) const;
    static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

    // Unknown characters map to kUnk.
    std::vector<int> encode(std::string_view text) const;
    // Drops special ids.
    std::string decode(std::span<const int> ids) const;

    const std::vector<char32_t>& chars() const { return chars_; }

    friend bool operator==(const CharVocab& a, const CharVocab& b) { return a.chars_ == b.chars_; }

private:
    std::vector<char32_t> chars_;
    std::unordered_map<char32_t, int> index_;
};

}  // namespace ocrfix::model
