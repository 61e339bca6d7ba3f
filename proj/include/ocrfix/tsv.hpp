#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ocrfix {

// One row of a parallel corpus file: ocr_text TAB gold_text [TAB key].
// The optional key column carries a split key (century, book group).
struct TextPair {
    std::string ocr;
    std::string gold;
    std::string key;
};

// Throws std::invalid_argument when a field contains a tab or line break.
void validate_tsv_field(const std::string& field);

std::vector<TextPair> read_pairs_tsv(const std::filesystem::path& path);
void write_pairs_tsv(const std::filesystem::path& path, const std::vector<TextPair>& pairs);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace ocrfix
