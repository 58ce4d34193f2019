// Independent brute-force oracles for cross-checking the library. These
// deliberately use different algorithms from the implementations they
// verify (recursion + memo instead of rolling DP, exhaustive enumeration
// instead of incremental scans).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracles {

// Levenshtein distance, top-down recursion with memoization.
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go =
        [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        auto key = std::make_pair(i, j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        std::size_t best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
        best = std::min(best, go(i + 1, j) + 1);
        best = std::min(best, go(i, j + 1) + 1);
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

// Plain ijk triple-loop matrix product.
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t n, std::size_t m, std::size_t p) {
    std::vector<double> c(n * p, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k) s += a[i * m + k] * b[k * p + j];
            c[i * p + j] = s;
        }
    return c;
}

// Scalar softmax with max shift.
inline std::vector<double> softmax(const std::vector<double>& logits) {
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

struct SpanChoice {
    std::size_t start = 0;
    std::size_t end = 1;  // exclusive
    double score = 0.0;
    bool sentinel = false;
};

// Exhaustive constrained best-span search. The end distribution indexes
// the last in-span token; public spans are end-exclusive. The sentinel
// (0,1) wins only on a strictly greater score.
inline SpanChoice best_span(const std::vector<double>& a_start, const std::vector<double>& a_end,
                            std::size_t query_len, std::size_t k) {
    const std::size_t h = a_start.size();
    std::optional<SpanChoice> best;
    for (std::size_t s = query_len + 2; s < h; ++s)
        for (std::size_t j = s; j < h && j - s + 1 <= k; ++j) {
            const double sc = std::log(a_start[s]) + std::log(a_end[j]);
            if (!best || sc > best->score) best = SpanChoice{s, j + 1, sc, false};
        }
    const double sent = std::log(a_start[0]) + std::log(a_end[1]);
    if (!best || sent > best->score) return SpanChoice{0, 1, sent, true};
    return *best;
}

// Clipped n-gram ROUGE, quadratic matching without hash maps.
struct Prf {
    double p = 0.0, r = 0.0, f1 = 0.0;
};

inline Prf rouge_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                   std::size_t n) {
    auto grams = [n](const std::vector<std::string>& t) {
        std::vector<std::vector<std::string>> g;
        for (std::size_t i = 0; i + n <= t.size(); ++i)
            g.emplace_back(t.begin() + static_cast<std::ptrdiff_t>(i),
                           t.begin() + static_cast<std::ptrdiff_t>(i + n));
        return g;
    };
    auto cg = grams(cand);
    auto rg = grams(ref);
    std::vector<bool> used(rg.size(), false);
    double overlap = 0.0;
    for (const auto& g : cg)
        for (std::size_t j = 0; j < rg.size(); ++j)
            if (!used[j] && rg[j] == g) {
                used[j] = true;
                overlap += 1.0;
                break;
            }
    Prf out;
    if (!cg.empty()) out.p = overlap / static_cast<double>(cg.size());
    if (!rg.empty()) out.r = overlap / static_cast<double>(rg.size());
    if (out.p + out.r > 0.0) out.f1 = 2.0 * out.p * out.r / (out.p + out.r);
    return out;
}

// LCS length by memoized recursion.
inline std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go =
        [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size() || j == b.size()) return 0;
        auto key = std::make_pair(i, j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        std::size_t best =
            a[i] == b[j] ? go(i + 1, j + 1) + 1 : std::max(go(i + 1, j), go(i, j + 1));
        memo[key] = best;
        return best;
    };
    return go(0, 0);
}

inline Prf rouge_l(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    Prf out;
    if (cand.empty() || ref.empty()) return out;
    const double l = static_cast<double>(lcs(cand, ref));
    out.p = l / static_cast<double>(cand.size());
    out.r = l / static_cast<double>(ref.size());
    if (out.p + out.r > 0.0) out.f1 = 2.0 * out.p * out.r / (out.p + out.r);
    return out;
}

}  // namespace oracles
