#include "ocrfix/synth.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "ocrfix/text.hpp"

namespace ocrfix::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

char32_t single_char(const std::string& s, const char* what) {
    const auto u = utf8_decode(s);
    if (u.size() != 1) throw std::invalid_argument(std::string("noise spec: ") + what + " must be one character, got '" + s + "'");
    return u[0];
}

// Replacement candidates for `c`: table entries plus the residual alphabet.
std::vector<std::pair<char32_t, double>> candidates(const NoiseSpec& spec, char32_t c) {
    std::vector<std::pair<char32_t, double>> out;
    if (auto it = spec.confusion.find(c); it != spec.confusion.end()) out = it->second;
    if (spec.residual_weight > 0.0) {
        std::vector<char32_t> pool;
        for (char32_t r : spec.residual_alphabet)
            if (r != c) pool.push_back(r);
        for (char32_t r : pool) out.emplace_back(r, spec.residual_weight / static_cast<double>(pool.size()));
    }
    return out;
}

}  // namespace

void NoiseSpec::validate() const {
    for (double p : {p_over_seg, p_under_seg, p_word_error})
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise spec: probabilities must lie in [0, 1]");
    if (total() > 1.0 + 1e-12) throw std::invalid_argument("noise spec: error probabilities sum above 1");
    for (const auto& [from, row] : confusion) {
        if (is_space(from)) throw std::invalid_argument("noise spec: whitespace cannot be substituted");
        for (const auto& [to, w] : row) {
            if (!(w > 0.0)) throw std::invalid_argument("noise spec: confusion weights must be positive");
            if (to == from) throw std::invalid_argument("noise spec: a confusion must change the character");
            if (is_space(to)) throw std::invalid_argument("noise spec: a confusion cannot produce whitespace");
        }
    }
    for (char32_t r : residual_alphabet)
        if (is_space(r)) throw std::invalid_argument("noise spec: residual alphabet contains whitespace");
    if (!(residual_weight >= 0.0)) throw std::invalid_argument("noise spec: residual weight must be non-negative");
}

NoiseSpec default_spec(double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("noise rate must lie in [0, 1]");
    NoiseSpec s;
    s.p_over_seg = rate * 0.54;
    s.p_under_seg = rate * 0.03;
    s.p_word_error = rate * 0.43;
    const std::pair<char32_t, char32_t> pairs[] = {{U'ſ', U'f'}, {U'e', U'c'}, {U'u', U'v'}, {U'n', U'u'}};
    for (auto [a, b] : pairs) {
        s.confusion[a].emplace_back(b, 1.0);
        s.confusion[b].emplace_back(a, 1.0);
    }
    for (char32_t c = U'a'; c <= U'z'; ++c) s.residual_alphabet.push_back(c);
    s.residual_weight = 0.5;
    s.seed = seed;
    s.validate();
    return s;
}

NoiseSpec spec_from_json(std::string_view json) {
    const auto j = nlohmann::ordered_json::parse(json);
    NoiseSpec s;
    s.p_over_seg = j.value("p_over_seg", 0.0);
    s.p_under_seg = j.value("p_under_seg", 0.0);
    s.p_word_error = j.value("p_word_error", 0.0);
    if (j.contains("confusion")) {
        for (const auto& [from, row] : j.at("confusion").items()) {
            auto& dst = s.confusion[single_char(from, "confusion source")];
            for (const auto& [to, w] : row.items()) dst.emplace_back(single_char(to, "confusion target"), w.get<double>());
        }
    }
    if (j.contains("residual_alphabet")) {
        const auto alpha = utf8_decode(j.at("residual_alphabet").get<std::string>());
        s.residual_alphabet.assign(alpha.begin(), alpha.end());
    }
    s.residual_weight = j.value("residual_weight", 0.0);
    s.seed = j.value("seed", std::uint64_t{0});
    s.validate();
    return s;
}

std::string spec_to_json(const NoiseSpec& s) {
    nlohmann::ordered_json j;
    j["p_over_seg"] = s.p_over_seg;
    j["p_under_seg"] = s.p_under_seg;
    j["p_word_error"] = s.p_word_error;
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    for (const auto& [from, row] : s.confusion) {
        nlohmann::ordered_json r = nlohmann::ordered_json::object();
        for (const auto& [to, w] : row) r[utf8_encode(to)] = w;
        conf[utf8_encode(from)] = r;
    }
    j["confusion"] = conf;
    j["residual_alphabet"] = utf8_encode(std::u32string(s.residual_alphabet.begin(), s.residual_alphabet.end()));
    j["residual_weight"] = s.residual_weight;
    j["seed"] = s.seed;
    return j.dump(2);
}

Corruption corrupt_logged(std::string_view gold, const NoiseSpec& spec, std::uint64_t seed) {
    auto tokens = split_tokens(utf8_decode(gold));
    if (tokens.empty()) throw EmptyInputError("corrupt: empty gold text");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<bool> joined(tokens.size(), false);  // no space after token i
    Corruption out;

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double u = unit(rng);
        auto& tok = tokens[i];
        if (u < spec.p_over_seg) {
            if (i + 1 < tokens.size()) {
                joined[i] = true;
                out.log.push_back({i, ErrorKind::over_seg});
            }
        } else if (u < spec.p_over_seg + spec.p_under_seg) {
            if (tok.size() >= 2) {
                std::uniform_int_distribution<std::size_t> pos(1, tok.size() - 1);
                tok.insert(pos(rng), 1, U' ');
                out.log.push_back({i, ErrorKind::under_seg});
            }
        } else if (u < spec.total()) {
            std::vector<std::size_t> eligible;
            for (std::size_t p = 0; p < tok.size(); ++p)
                if (!candidates(spec, tok[p]).empty()) eligible.push_back(p);
            if (!eligible.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
                const std::size_t p = eligible[pick(rng)];
                const auto cands = candidates(spec, tok[p]);
                std::vector<double> weights;
                for (const auto& c : cands) weights.push_back(c.second);
                std::discrete_distribution<std::size_t> choose(weights.begin(), weights.end());
                tok[p] = cands[choose(rng)].first;
                out.log.push_back({i, ErrorKind::word_error});
            }
        }
    }
    std::u32string text;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        text += tokens[i];
        if (i + 1 < tokens.size() && !joined[i]) text.push_back(U' ');
    }
    out.text = utf8_encode(text);
    return out;
}

std::string corrupt(std::string_view gold, const NoiseSpec& spec, std::uint64_t seed) {
    return corrupt_logged(gold, spec, seed).text;
}

std::vector<TextPair> make_pairs(std::string_view text, const NoiseSpec& spec, std::size_t window, std::size_t stride) {
    if (window == 0) throw std::invalid_argument("make_pairs: window must be positive");
    if (stride == 0) stride = window;
    spec.validate();
    std::vector<TextPair> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find('\n', start), text.size());
        const auto tokens = split_tokens(text.substr(start, end - start));
        ++line_no;
        for (std::size_t b = 0; b < tokens.size(); b += stride) {
            const std::size_t e = std::min(tokens.size(), b + window);
            const auto gold = join_tokens(tokens, b, e);
            const auto seed = splitmix64(spec.seed ^ splitmix64(out.size()));
            out.push_back({corrupt(gold, spec, seed), gold, std::to_string(line_no)});
            if (e == tokens.size()) break;
        }
        start = end + 1;
    }
    return out;
}

}  // namespace ocrfix::synth
