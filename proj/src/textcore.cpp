#include "spanfact/textcore.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace spanfact {

namespace {

const char* kSpecials[] = {"[CLS]", "[SEP]", "[MASK]", "[PAD]", "[UNK]"};

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_punct(unsigned char c) { return std::ispunct(c) != 0; }

char lower(unsigned char c) { return static_cast<char>(std::tolower(c)); }

// Shared scanner: emits (char_start, char_end) word boundaries.
template <typename Emit>
void scan_words(const std::string& raw, Emit emit) {
    std::size_t i = 0;
    const std::size_t n = raw.size();
    while (i < n) {
        unsigned char c = raw[i];
        if (is_space(c)) {
            ++i;
        } else if (is_punct(c)) {
            emit(i, i + 1);
            ++i;
        } else {
            std::size_t j = i;
            while (j < n && !is_space(raw[j]) && !is_punct(static_cast<unsigned char>(raw[j]))) ++j;
            emit(i, j);
            i = j;
        }
    }
}

std::string lower_slice(const std::string& raw, std::size_t a, std::size_t b) {
    std::string out;
    out.reserve(b - a);
    for (std::size_t i = a; i < b; ++i) out.push_back(lower(raw[i]));
    return out;
}

}  // namespace

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id.find(token);
    return it == token_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token.size())
        throw std::out_of_range("vocabulary id out of range: " + std::to_string(id));
    return id_to_token[id];
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open vocabulary file for writing: " + path);
    for (const auto& tok : id_to_token) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open vocabulary file: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        v.token_to_id.emplace(line, static_cast<int>(v.id_to_token.size()));
        v.id_to_token.push_back(line);
    }
    for (int i = 0; i < kNumSpecials; ++i) {
        if (static_cast<std::size_t>(i) >= v.id_to_token.size() || v.id_to_token[i] != kSpecials[i])
            throw std::runtime_error("vocabulary file missing special tokens: " + path);
    }
    return v;
}

std::string TokenizedText::surface(std::size_t i) const {
    return raw.substr(offsets[i].first, offsets[i].second - offsets[i].first);
}

std::vector<std::string> TokenizedText::surfaces() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(surface(i));
    return out;
}

std::string TokenizedText::token_lower(std::size_t i) const {
    return lower_slice(raw, offsets[i].first, offsets[i].second);
}

std::string TokenizedText::detok_lower(std::size_t start, std::size_t end) const {
    std::string out;
    for (std::size_t i = start; i < end; ++i) {
        if (i > start) out.push_back(' ');
        out += token_lower(i);
    }
    return out;
}

std::string normalize(const std::string& raw) {
    std::string out;
    scan_words(raw, [&](std::size_t a, std::size_t b) {
        if (!out.empty()) out.push_back(' ');
        out += lower_slice(raw, a, b);
    });
    return out;
}

std::vector<std::string> split_words(const std::string& raw) {
    std::vector<std::string> out;
    scan_words(raw, [&](std::size_t a, std::size_t b) { out.push_back(lower_slice(raw, a, b)); });
    return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, int min_count) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
    std::unordered_map<std::string, long long> counts;
    for (const auto& doc : corpus)
        for (auto& w : split_words(doc)) ++counts[w];

    std::vector<std::pair<std::string, long long>> kept;
    for (auto& [tok, cnt] : counts)
        if (cnt >= min_count) kept.emplace_back(tok, cnt);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    for (const char* s : kSpecials) {
        v.token_to_id.emplace(s, static_cast<int>(v.id_to_token.size()));
        v.id_to_token.emplace_back(s);
    }
    for (auto& [tok, cnt] : kept) {
        (void)cnt;
        if (v.token_to_id.count(tok)) continue;  // guards raw "[CLS]" etc. in corpus
        v.token_to_id.emplace(tok, static_cast<int>(v.id_to_token.size()));
        v.id_to_token.push_back(tok);
    }
    return v;
}

TokenizedText tokenize(const std::string& raw, const Vocabulary& vocab) {
    TokenizedText t;
    t.raw = raw;
    scan_words(raw, [&](std::size_t a, std::size_t b) {
        t.token_ids.push_back(vocab.id(lower_slice(raw, a, b)));
        t.offsets.emplace_back(a, b);
    });
    return t;
}

}  // namespace spanfact
