#include "spanfact/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <stdexcept>

#include "spanfact/textcore.hpp"

namespace spanfact {

namespace {

RougeScore from_counts(double overlap, double cand_total, double ref_total) {
    RougeScore s;
    if (cand_total > 0.0) s.precision = overlap / cand_total;
    if (ref_total > 0.0) s.recall = overlap / ref_total;
    if (s.precision + s.recall > 0.0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (tokens.size() < static_cast<std::size_t>(n)) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i) + n)];
    return counts;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
    if (n != 1 && n != 2) throw std::invalid_argument("rouge_n supports n in {1,2}");
    const auto cand = ngram_counts(candidate, n);
    const auto ref = ngram_counts(reference, n);
    double cand_total = 0.0, ref_total = 0.0, overlap = 0.0;
    for (const auto& [g, c] : cand) cand_total += static_cast<double>(c);
    for (const auto& [g, c] : ref) ref_total += static_cast<double>(c);
    for (const auto& [g, c] : cand) {
        auto it = ref.find(g);
        if (it != ref.end()) overlap += static_cast<double>(std::min(c, it->second));
    }
    return from_counts(overlap, cand_total, ref_total);
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
    const std::size_t m = candidate.size(), n = reference.size();
    if (m == 0 || n == 0) return {};
    std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                          : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    const double lcs = static_cast<double>(prev[n]);
    return from_counts(lcs, static_cast<double>(m), static_cast<double>(n));
}

double token_f1(const std::string& answer_a, const std::string& answer_b) {
    auto norm_tokens = [](const std::string& s) {
        std::vector<std::string> out;
        for (auto& w : split_words(s)) {
            std::string kept;
            for (char c : w)
                if (!std::ispunct(static_cast<unsigned char>(c))) kept.push_back(c);
            if (!kept.empty()) out.push_back(kept);
        }
        return out;
    };
    const auto a = norm_tokens(answer_a);
    const auto b = norm_tokens(answer_b);
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    std::map<std::string, std::size_t> counts;
    for (const auto& t : a) ++counts[t];
    double overlap = 0.0;
    for (const auto& t : b) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            overlap += 1.0;
        }
    }
    if (overlap == 0.0) return 0.0;
    const double p = overlap / static_cast<double>(b.size());
    const double r = overlap / static_cast<double>(a.size());
    return 2.0 * p * r / (p + r);
}

double entity_precision(const TokenizedText& summary, const TokenizedText& source,
                        const EntityTagger& tagger) {
    const auto entities = tagger.tag(summary);
    if (entities.empty()) return 1.0;
    std::size_t supported = 0;
    for (const auto& e : entities) {
        // verbatim token-sequence containment
        const std::size_t len = e.token_end - e.token_start;
        bool found = false;
        for (std::size_t i = 0; !found && i + len <= source.size(); ++i)
            found = source.detok_lower(i, i + len) == e.surface;
        if (found) ++supported;
    }
    return static_cast<double>(supported) / static_cast<double>(entities.size());
}

RestorationResult restoration_rate(const DocEntityOutcomes& outcomes,
                                   const std::vector<DocCorruptionLog>& logs) {
    RestorationResult r;
    std::map<std::string, std::map<std::size_t, const CorruptionRecord*>> by_doc;
    for (const auto& log : logs) {
        auto it = outcomes.find(log.doc_id);
        if (it == outcomes.end())
            throw std::runtime_error("corruption log references unknown doc_id: " + log.doc_id);
        for (const auto& rec : log.records) {
            if (rec.position >= it->second.size())
                throw std::runtime_error("corruption log position out of range for doc " +
                                         log.doc_id);
            if (!rec.skipped) by_doc[log.doc_id][rec.position] = &rec;
        }
    }
    for (const auto& [doc_id, entities] : outcomes) {
        const auto* doc_log = by_doc.count(doc_id) ? &by_doc.at(doc_id) : nullptr;
        for (std::size_t i = 0; i < entities.size(); ++i) {
            const auto& [draft_surface, corrected_surface] = entities[i];
            const CorruptionRecord* rec =
                doc_log && doc_log->count(i) ? doc_log->at(i) : nullptr;
            if (rec) {
                ++r.corrupted;
                if (normalize(corrected_surface) == normalize(rec->original)) ++r.restored;
            } else {
                ++r.uncorrupted;
                if (normalize(corrected_surface) != normalize(draft_surface)) ++r.false_changes;
            }
        }
    }
    if (r.corrupted > 0)
        r.restoration_rate = static_cast<double>(r.restored) / static_cast<double>(r.corrupted);
    if (r.uncorrupted > 0)
        r.false_change_rate =
            static_cast<double>(r.false_changes) / static_cast<double>(r.uncorrupted);
    return r;
}

}  // namespace spanfact
