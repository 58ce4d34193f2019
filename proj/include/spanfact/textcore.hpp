#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace spanfact {

// Word-level vocabulary. Ids are contiguous from 0; the five special
// tokens always occupy ids 0..4 in fixed order.
struct Vocabulary {
    static constexpr int kCls = 0;
    static constexpr int kSep = 1;
    static constexpr int kMask = 2;
    static constexpr int kPad = 3;
    static constexpr int kUnk = 4;
    static constexpr int kNumSpecials = 5;

    std::map<std::string, int> token_to_id;
    std::vector<std::string> id_to_token;

    int id(const std::string& token) const;  // UNK for unknown tokens
    const std::string& token(int id) const;
    std::size_t size() const { return id_to_token.size(); }

    // One token per line, line number = id, LF endings.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
};

struct TokenizedText {
    std::vector<int> token_ids;
    // [char_start, char_end) into raw, per token. Non-overlapping,
    // strictly increasing.
    std::vector<std::pair<std::size_t, std::size_t>> offsets;
    std::string raw;

    std::size_t size() const { return token_ids.size(); }
    // Raw (case-preserving) slice of token i.
    std::string surface(std::size_t i) const;
    std::vector<std::string> surfaces() const;
    // Lowercased form of token i.
    std::string token_lower(std::size_t i) const;
    // Lowercased detokenization of [start, end), single-space joined.
    std::string detok_lower(std::size_t start, std::size_t end) const;
};

// Lowercase, isolate ASCII punctuation as standalone words, collapse
// whitespace runs to single spaces, trim. tokenize/detokenize round-trip
// to exactly this form.
std::string normalize(const std::string& raw);

// Lowercased word list of normalize(raw), without offsets.
std::vector<std::string> split_words(const std::string& raw);

std::string detokenize(const std::vector<std::string>& tokens);

// Specials first, then tokens with count >= min_count by descending
// count, ties lexicographic. Throws on empty corpus.
Vocabulary build_vocab(const std::vector<std::string>& corpus, int min_count);

TokenizedText tokenize(const std::string& raw, const Vocabulary& vocab);

}  // namespace spanfact
