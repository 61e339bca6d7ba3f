#include "ocrfix/vocab.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "ocrfix/text.hpp"

namespace ocrfix::model {

CharVocab::CharVocab(std::vector<char32_t> chars) : chars_(std::move(chars)) {
    for (std::size_t i = 0; i < chars_.size(); ++i) {
        const auto [it, inserted] = index_.emplace(chars_[i], static_cast<int>(i) + kNumSpecials);
        if (!inserted) throw std::invalid_argument("CharVocab: duplicate character");
    }
}

CharVocab CharVocab::build(std::span<const std::string> texts) {
    std::set<char32_t> seen;
    for (const auto& t : texts)
        for (char32_t c : normalize_whitespace(utf8_decode(t))) seen.insert(c);
    return CharVocab(std::vector<char32_t>(seen.begin(), seen.end()));
}

int CharVocab::id(char32_t c) const {
    const auto it = index_.find(c);
    return it == index_.end() ? kUnk : it->second;
}

char32_t CharVocab::symbol(int id) const {
    if (id < kNumSpecials || static_cast<std::size_t>(id) >= size())
        throw std::out_of_range("CharVocab: id " + std::to_string(id) + " has no character");
    return chars_[static_cast<std::size_t>(id - kNumSpecials)];
}

std::vector<int> CharVocab::encode(std::string_view text) const {
    std::vector<int> ids;
    for (char32_t c : normalize_whitespace(utf8_decode(text))) ids.push_back(id(c));
    return ids;
}

std::string CharVocab::decode(std::span<const int> ids) const {
    std::u32string out;
    for (int id : ids)
        if (!is_special(id) && id >= 0 && static_cast<std::size_t>(id) < size()) out.push_back(symbol(id));
    return utf8_encode(out);
}

}  // namespace ocrfix::model
