#include "ocrfix/tsv.hpp"

#include <fstream>
#include <stdexcept>

namespace ocrfix {

void validate_tsv_field(const std::string& field) {
    if (field.find_first_of("\t\n\r") != std::string::npos)
        throw std::invalid_argument("TSV field contains a tab or line break: '" + field + "'");
}

std::vector<TextPair> read_pairs_tsv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<TextPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        if (t1 == std::string::npos)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected two tab-separated columns");
        TextPair p;
        p.ocr = line.substr(0, t1);
        const auto t2 = line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            p.gold = line.substr(t1 + 1);
        } else {
            p.gold = line.substr(t1 + 1, t2 - t1 - 1);
            p.key = line.substr(t2 + 1);
            if (p.key.find('\t') != std::string::npos)
                throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": too many columns");
        }
        pairs.push_back(std::move(p));
    }
    if (in.bad()) throw std::runtime_error("read error on " + path.string());
    return pairs;
}

void write_pairs_tsv(const std::filesystem::path& path, const std::vector<TextPair>& pairs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& p : pairs) {
        validate_tsv_field(p.ocr);
        validate_tsv_field(p.gold);
        out << p.ocr << '\t' << p.gold;
        if (!p.key.empty()) {
            validate_tsv_field(p.key);
            out << '\t' << p.key;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write error on " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write error on " + path.string());
}

}  // namespace ocrfix
