#include "spanfact/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace spanfact {

using nlohmann::json;

std::vector<std::size_t> SpanExample::mask_positions() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < input_ids.size(); ++i)
        if (input_ids[i] == Vocabulary::kMask) out.push_back(i);
    return out;
}

void SpanExample::validate() const {
    if (input_ids.empty() || input_ids[0] != Vocabulary::kCls)
        throw std::runtime_error("span example must start with [CLS]");
    if (segment_ids.size() != input_ids.size())
        throw std::runtime_error("segment_ids length mismatch");
    if (sep_position() >= input_ids.size() || input_ids[sep_position()] != Vocabulary::kSep)
        throw std::runtime_error("missing [SEP] at query_len+1");
    for (std::size_t i = 0; i < input_ids.size(); ++i) {
        const int expect = i <= sep_position() ? 0 : 1;
        if (segment_ids[i] != expect) throw std::runtime_error("segment ids malformed");
        if (input_ids[i] == Vocabulary::kSep && i != sep_position())
            throw std::runtime_error("multiple [SEP] tokens");
    }
    if (input_ids.size() != query_len + 2 + source_len)
        throw std::runtime_error("length bookkeeping mismatch");
    for (const auto& [s, e] : gold_spans) {
        if (s == kClsSentinel.first && e == kClsSentinel.second) continue;
        if (!(s > sep_position() && s < e && e <= input_ids.size()))
            throw std::runtime_error("gold span out of source segment");
    }
}

std::string BuildReport::to_string() const {
    std::ostringstream os;
    os << "examples emitted: " << emitted << "\n"
       << "examples dropped (gold span truncated): " << dropped << "\n"
       << "sentinel gold spans: " << sentinel << "\n";
    return os.str();
}

SpanExample pack_input(const MaskedQuery& query, const TokenizedText& source,
                       std::size_t max_len) {
    if (query.tokens.size() + 2 > max_len) throw std::invalid_argument("query too long");
    SpanExample ex;
    ex.query_len = query.tokens.size();
    ex.source_len = std::min(source.size(), max_len - query.tokens.size() - 2);
    ex.input_ids.reserve(ex.query_len + 2 + ex.source_len);
    ex.input_ids.push_back(Vocabulary::kCls);
    ex.input_ids.insert(ex.input_ids.end(), query.tokens.begin(), query.tokens.end());
    ex.input_ids.push_back(Vocabulary::kSep);
    ex.input_ids.insert(ex.input_ids.end(), source.token_ids.begin(),
                        source.token_ids.begin() + static_cast<std::ptrdiff_t>(ex.source_len));
    ex.segment_ids.assign(ex.input_ids.size(), 1);
    std::fill(ex.segment_ids.begin(),
              ex.segment_ids.begin() + static_cast<std::ptrdiff_t>(ex.query_len + 2), 0);
    ex.masked_surfaces = query.masked_surfaces;
    return ex;
}

namespace {

// Replaces each selected entity's token range with one MASK id.
MaskedQuery mask_entities(const TokenizedText& summary, const std::vector<EntitySpan>& entities,
                          const std::vector<std::size_t>& which) {
    MaskedQuery q;
    std::size_t next = 0;
    std::size_t i = 0;
    while (i < summary.size()) {
        if (next < which.size() && entities[which[next]].token_start == i) {
            const EntitySpan& ent = entities[which[next]];
            q.mask_positions.push_back(q.tokens.size());
            q.masked_surfaces.push_back(ent.surface);
            q.tokens.push_back(Vocabulary::kMask);
            i = ent.token_end;
            ++next;
        } else {
            q.tokens.push_back(summary.token_ids[i]);
            ++i;
        }
    }
    return q;
}

// Gold span for one entity in packed coordinates; nullopt when truncated.
std::optional<std::pair<std::size_t, std::size_t>> gold_for(
    const SpanExample& ex, const EntitySpan& entity, const std::string& query_sentence,
    const TokenizedText& source, BuildReport& report) {
    const OccurrenceRanking ranking = rank_occurrences(entity, query_sentence, source);
    if (ranking.candidates.empty()) {
        ++report.sentinel;
        return kClsSentinel;
    }
    const EntitySpan& occ = ranking.candidates.front().span;
    const std::size_t start = ex.source_begin() + occ.token_start;
    const std::size_t end = ex.source_begin() + occ.token_end;
    if (end > ex.input_ids.size()) return std::nullopt;  // truncated away
    return std::make_pair(start, end);
}

std::string enclosing_sentence(const TokenizedText& text, std::size_t token_pos) {
    for (const auto& [a, b] : sentence_spans(text))
        if (token_pos >= a && token_pos < b) return text.detok_lower(a, b);
    return text.detok_lower(0, text.size());
}

}  // namespace

std::vector<SpanExample> build_single_mask_examples(const TokenizedText& source,
                                                    const TokenizedText& summary,
                                                    const EntityTagger& tagger,
                                                    std::size_t max_len, BuildReport& report) {
    const auto entities = tagger.tag(summary);
    std::vector<SpanExample> out;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        MaskedQuery q = mask_entities(summary, entities, {i});
        SpanExample ex = pack_input(q, source, max_len);
        auto gold = gold_for(ex, entities[i], enclosing_sentence(summary, entities[i].token_start),
                             source, report);
        if (!gold) {
            ++report.dropped;
            continue;
        }
        ex.gold_spans.push_back(*gold);
        ex.validate();
        ++report.emitted;
        out.push_back(std::move(ex));
    }
    return out;
}

std::optional<SpanExample> build_all_mask_example(const TokenizedText& source,
                                                  const TokenizedText& summary,
                                                  const EntityTagger& tagger,
                                                  std::size_t max_len, BuildReport& report) {
    const auto entities = tagger.tag(summary);
    if (entities.empty()) return std::nullopt;
    std::vector<std::size_t> all(entities.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    MaskedQuery q = mask_entities(summary, entities, all);
    SpanExample ex = pack_input(q, source, max_len);
    for (std::size_t i = 0; i < entities.size(); ++i) {
        auto gold = gold_for(ex, entities[i], enclosing_sentence(summary, entities[i].token_start),
                             source, report);
        if (!gold) {
            ++report.dropped;
            return std::nullopt;
        }
        ex.gold_spans.push_back(*gold);
    }
    ex.validate();
    ++report.emitted;
    return ex;
}

const std::vector<std::string>& EntityPool::of(EntityKind kind) const {
    switch (kind) {
        case EntityKind::Number: return numbers;
        case EntityKind::Date: return dates;
        case EntityKind::Proper: return propers;
        case EntityKind::Quantity: return quantities;
    }
    return numbers;
}

void EntityPool::add(const EntitySpan& span) {
    auto& vec = [&]() -> std::vector<std::string>& {
        switch (span.kind) {
            case EntityKind::Date: return dates;
            case EntityKind::Proper: return propers;
            case EntityKind::Quantity: return quantities;
            case EntityKind::Number: break;
        }
        return numbers;
    }();
    if (std::find(vec.begin(), vec.end(), span.surface) == vec.end()) vec.push_back(span.surface);
}

CorruptionResult corrupt_summary(const TokenizedText& source, const TokenizedText& summary,
                                 double rate, std::uint64_t seed, const EntityTagger& tagger,
                                 const EntityPool* global_pool) {
    if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("corruption rate must be in [0,1]");
    const auto summary_entities = tagger.tag(summary);
    const auto source_entities = tagger.tag(source);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    CorruptionResult result;
    std::vector<std::pair<std::size_t, std::string>> replacements;  // entity idx -> text
    for (std::size_t i = 0; i < summary_entities.size(); ++i) {
        const EntitySpan& ent = summary_entities[i];
        if (coin(rng) >= rate) continue;
        // Candidate surfaces: same kind, different text, deduped, stable order.
        std::set<std::string> cand;
        for (const auto& s : source_entities)
            if (s.kind == ent.kind && s.surface != ent.surface) cand.insert(s.surface);
        if (cand.empty() && global_pool)
            for (const auto& s : global_pool->of(ent.kind))
                if (s != ent.surface) cand.insert(s);
        if (cand.empty()) {
            result.records.push_back({i, ent.surface, "", true});
            continue;
        }
        std::vector<std::string> ordered(cand.begin(), cand.end());
        std::uniform_int_distribution<std::size_t> pick(0, ordered.size() - 1);
        const std::string& repl = ordered[pick(rng)];
        result.records.push_back({i, ent.surface, repl, false});
        replacements.emplace_back(i, repl);
    }

    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < summary.size(); ++i) tokens.push_back(summary.token_lower(i));
    for (auto it = replacements.rbegin(); it != replacements.rend(); ++it) {
        const EntitySpan& ent = summary_entities[it->first];
        const auto repl_tokens = split_words(it->second);
        tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(ent.token_start),
                     tokens.begin() + static_cast<std::ptrdiff_t>(ent.token_end));
        tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(ent.token_start),
                      repl_tokens.begin(), repl_tokens.end());
    }
    result.corrupted_raw = detokenize(tokens);
    return result;
}

// ---- JSONL persistence ----

namespace {

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<json> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed JSON line: " + e.what());
        }
    }
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    return out;
}

}  // namespace

std::vector<DocumentPair> read_pairs_jsonl(const std::string& path) {
    std::vector<DocumentPair> out;
    std::size_t lineno = 0;
    for (const auto& j : read_jsonl(path)) {
        ++lineno;
        if (!j.contains("doc_id") || !j.contains("source") || !j.contains("summary"))
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": pair line missing doc_id/source/summary");
        out.push_back({j.at("doc_id").get<std::string>(), j.at("source").get<std::string>(),
                       j.at("summary").get<std::string>()});
    }
    return out;
}

void write_pairs_jsonl(const std::string& path, const std::vector<DocumentPair>& pairs) {
    auto out = open_out(path);
    for (const auto& p : pairs) {
        json j{{"doc_id", p.doc_id}, {"source", p.source}, {"summary", p.summary}};
        out << j.dump() << '\n';
    }
}

void write_examples_jsonl(const std::string& path, const std::vector<SpanExample>& examples) {
    auto out = open_out(path);
    for (const auto& ex : examples) {
        json spans = json::array();
        for (const auto& [s, e] : ex.gold_spans) spans.push_back({s, e});
        json j{{"input_ids", ex.input_ids},       {"segment_ids", ex.segment_ids},
               {"gold_spans", spans},             {"query_len", ex.query_len},
               {"source_len", ex.source_len},     {"masked_surfaces", ex.masked_surfaces}};
        out << j.dump() << '\n';
    }
}

std::vector<SpanExample> read_examples_jsonl(const std::string& path) {
    std::vector<SpanExample> out;
    for (const auto& j : read_jsonl(path)) {
        SpanExample ex;
        ex.input_ids = j.at("input_ids").get<std::vector<int>>();
        ex.segment_ids = j.at("segment_ids").get<std::vector<int>>();
        for (const auto& s : j.at("gold_spans"))
            ex.gold_spans.emplace_back(s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>());
        ex.query_len = j.at("query_len").get<std::size_t>();
        ex.source_len = j.at("source_len").get<std::size_t>();
        ex.masked_surfaces = j.at("masked_surfaces").get<std::vector<std::string>>();
        ex.validate();
        out.push_back(std::move(ex));
    }
    return out;
}

void write_corruption_log_jsonl(const std::string& path,
                                const std::vector<DocCorruptionLog>& logs) {
    auto out = open_out(path);
    for (const auto& log : logs)
        for (const auto& r : log.records) {
            json j{{"doc_id", log.doc_id},
                   {"position", r.position},
                   {"original", r.original},
                   {"replacement", r.replacement}};
            if (r.skipped) j["skipped"] = true;
            out << j.dump() << '\n';
        }
}

std::vector<DocCorruptionLog> read_corruption_log_jsonl(const std::string& path) {
    std::vector<DocCorruptionLog> out;
    for (const auto& j : read_jsonl(path)) {
        const std::string id = j.at("doc_id").get<std::string>();
        if (out.empty() || out.back().doc_id != id) out.push_back({id, {}});
        CorruptionRecord r;
        r.position = j.at("position").get<std::size_t>();
        r.original = j.at("original").get<std::string>();
        r.replacement = j.at("replacement").get<std::string>();
        r.skipped = j.value("skipped", false);
        out.back().records.push_back(std::move(r));
    }
    return out;
}

}  // namespace spanfact
