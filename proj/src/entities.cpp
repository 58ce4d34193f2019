#include "spanfact/entities.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace spanfact {

namespace {

const std::unordered_set<std::string>& months() {
    static const std::unordered_set<std::string> m = {
        "january", "february", "march",     "april",   "may",      "june",
        "july",    "august",   "september", "october", "november", "december"};
    return m;
}

const std::unordered_set<std::string>& number_words() {
    static const std::unordered_set<std::string> w = {
        "zero",    "one",     "two",      "three",    "four",    "five",   "six",
        "seven",   "eight",   "nine",     "ten",      "eleven",  "twelve", "thirteen",
        "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
        "thirty",  "forty",   "fifty",    "sixty",    "seventy", "eighty", "ninety",
        "hundred", "thousand"};
    return w;
}

const std::unordered_set<std::string>& units() {
    static const std::unordered_set<std::string> u = {
        "million", "billion", "dollars", "euros",  "percent", "%",  "km",
        "miles",   "kg",      "tonnes",  "metres", "meters",  "mph"};
    return u;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

const char* entity_kind_name(EntityKind kind) {
    switch (kind) {
        case EntityKind::Number: return "NUMBER";
        case EntityKind::Date: return "DATE";
        case EntityKind::Proper: return "PROPER";
        case EntityKind::Quantity: return "QUANTITY";
    }
    return "?";
}

RuleTagger::RuleTagger(std::unordered_set<std::string> proper_lexicon)
    : proper_(std::move(proper_lexicon)) {}

RuleTagger RuleTagger::from_lexicon_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open lexicon file: " + path);
    std::unordered_set<std::string> lex;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lex.insert(line);
    }
    return RuleTagger(std::move(lex));
}

std::vector<EntitySpan> RuleTagger::tag(const TokenizedText& text) const {
    const std::size_t n = text.size();
    std::vector<std::string> tok(n);
    for (std::size_t i = 0; i < n; ++i) tok[i] = text.token_lower(i);

    auto is_num = [&](std::size_t i) {
        return i < n && (all_digits(tok[i]) || number_words().count(tok[i]) > 0);
    };
    auto is_month = [&](std::size_t i) { return i < n && months().count(tok[i]) > 0; };
    auto is_unit = [&](std::size_t i) { return i < n && units().count(tok[i]) > 0; };
    auto is_proper = [&](std::size_t i) { return i < n && proper_.count(tok[i]) > 0; };

    std::vector<EntitySpan> out;
    auto emit = [&](std::size_t a, std::size_t b, EntityKind k) {
        out.push_back({a, b, text.detok_lower(a, b), k});
    };

    std::size_t i = 0;
    while (i < n) {
        if (is_month(i) || (is_num(i) && is_month(i + 1))) {
            // [number] month [number]
            std::size_t a = i;
            std::size_t m = is_month(i) ? i : i + 1;
            std::size_t b = m + 1;
            if (is_num(b)) ++b;
            emit(a, b, EntityKind::Date);
            i = b;
        } else if (is_num(i)) {
            std::size_t b = i + 1;
            while (is_num(b) && !is_month(b + 1)) ++b;  // leave "N month" for the date rule
            if (is_unit(b)) {
                while (is_unit(b)) ++b;
                emit(i, b, EntityKind::Quantity);
            } else {
                emit(i, b, EntityKind::Number);
            }
            i = b;
        } else if (is_proper(i)) {
            std::size_t b = i + 1;
            while (is_proper(b)) ++b;
            emit(i, b, EntityKind::Proper);
            i = b;
        } else {
            ++i;
        }
    }
    return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<std::size_t> prev(n + 1), cur(n + 1);
    for (std::size_t j = 0; j <= n; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= m; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= n; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

double fuzzy_similarity(const std::string& a, const std::string& b) {
    const double denom = static_cast<double>(std::max({a.size(), b.size(), std::size_t{1}}));
    return 1.0 - static_cast<double>(edit_distance(a, b)) / denom;
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(const TokenizedText& text) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const std::string t = text.token_lower(i);
        if (t == "." || t == "!" || t == "?") {
            out.emplace_back(start, i + 1);
            start = i + 1;
        }
    }
    if (start < text.size()) out.emplace_back(start, text.size());
    return out;
}

OccurrenceRanking rank_occurrences(const EntitySpan& entity, const std::string& query_sentence,
                                   const TokenizedText& source) {
    const std::size_t len = entity.token_end - entity.token_start;
    OccurrenceRanking ranking;
    if (len == 0 || source.size() < len) return ranking;

    const auto sentences = sentence_spans(source);
    auto sentence_of = [&](std::size_t pos) -> std::string {
        for (const auto& [a, b] : sentences)
            if (pos >= a && pos < b) return source.detok_lower(a, b);
        return source.detok_lower(0, source.size());
    };

    const std::string query_norm = normalize(query_sentence);
    for (std::size_t i = 0; i + len <= source.size(); ++i) {
        if (source.detok_lower(i, i + len) != entity.surface) continue;
        EntitySpan s{i, i + len, entity.surface, entity.kind};
        ranking.candidates.push_back({s, fuzzy_similarity(query_norm, sentence_of(i))});
    }
    std::stable_sort(ranking.candidates.begin(), ranking.candidates.end(),
                     [](const Occurrence& x, const Occurrence& y) { return x.score > y.score; });
    return ranking;
}

}  // namespace spanfact
