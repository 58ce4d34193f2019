#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spanfact/entities.hpp"
#include "spanfact/textcore.hpp"

namespace spanfact {

// Sentinel gold span: points at the [CLS] position, meaning "answer not
// in source"; the engine keeps the original entity.
inline constexpr std::pair<std::size_t, std::size_t> kClsSentinel{0, 1};

struct MaskedQuery {
    std::vector<int> tokens;                    // contains >=1 MASK ids
    std::vector<std::size_t> mask_positions;    // query indices holding MASK
    std::vector<std::string> masked_surfaces;   // parallel to mask_positions
    std::size_t mask_count() const { return mask_positions.size(); }
};

struct SpanExample {
    std::vector<int> input_ids;    // [CLS] q [SEP] x, source right-truncated
    std::vector<int> segment_ids;  // 0 over [CLS] q [SEP], 1 over x
    // Per mask, (start,end) into input_ids, end exclusive, or kClsSentinel.
    std::vector<std::pair<std::size_t, std::size_t>> gold_spans;
    std::size_t query_len = 0;
    std::size_t source_len = 0;
    std::vector<std::string> masked_surfaces;

    std::size_t sep_position() const { return query_len + 1; }
    std::size_t source_begin() const { return query_len + 2; }
    std::vector<std::size_t> mask_positions() const;  // MASK positions in input_ids
    void validate() const;                            // type invariants; throws
};

struct BuildReport {
    std::size_t emitted = 0;
    std::size_t dropped = 0;   // gold span truncated away
    std::size_t sentinel = 0;  // gold span absent from source
    std::string to_string() const;
};

// Packs [CLS] q [SEP] x with segment ids; source truncated from the right
// to fit max_len. Throws "query too long" when |q|+2 > max_len.
SpanExample pack_input(const MaskedQuery& query, const TokenizedText& source,
                       std::size_t max_len);

// One example per summary entity, that entity alone masked. Gold span =
// top-ranked source occurrence, or the CLS sentinel when absent. Examples
// whose gold span is truncated away are dropped and counted.
std::vector<SpanExample> build_single_mask_examples(const TokenizedText& source,
                                                    const TokenizedText& summary,
                                                    const EntityTagger& tagger,
                                                    std::size_t max_len, BuildReport& report);

// Single example with all T entities masked, gold spans left-to-right.
// nullopt when the summary has no entities or a gold span was truncated.
std::optional<SpanExample> build_all_mask_example(const TokenizedText& source,
                                                  const TokenizedText& summary,
                                                  const EntityTagger& tagger,
                                                  std::size_t max_len, BuildReport& report);

// ---- corruption benchmark ----

struct CorruptionRecord {
    std::size_t position = 0;  // entity index within the summary's tag order
    std::string original;
    std::string replacement;
    bool skipped = false;  // no same-kind replacement available
};

struct EntityPool {
    std::vector<std::string> numbers, dates, propers, quantities;
    void add(const EntitySpan& span);
    const std::vector<std::string>& of(EntityKind kind) const;
};

struct CorruptionResult {
    std::string corrupted_raw;
    std::vector<CorruptionRecord> records;
};

// Each summary entity independently, with probability rate, replaced by a
// different same-kind entity sampled from the source (fallback: global
// pool). Deterministic given seed.
CorruptionResult corrupt_summary(const TokenizedText& source, const TokenizedText& summary,
                                 double rate, std::uint64_t seed, const EntityTagger& tagger,
                                 const EntityPool* global_pool = nullptr);

// ---- JSONL persistence ----

struct DocumentPair {
    std::string doc_id;
    std::string source;
    std::string summary;
};

std::vector<DocumentPair> read_pairs_jsonl(const std::string& path);
void write_pairs_jsonl(const std::string& path, const std::vector<DocumentPair>& pairs);

void write_examples_jsonl(const std::string& path, const std::vector<SpanExample>& examples);
std::vector<SpanExample> read_examples_jsonl(const std::string& path);

struct DocCorruptionLog {
    std::string doc_id;
    std::vector<CorruptionRecord> records;
};

void write_corruption_log_jsonl(const std::string& path, const std::vector<DocCorruptionLog>& logs);
std::vector<DocCorruptionLog> read_corruption_log_jsonl(const std::string& path);

}  // namespace spanfact
