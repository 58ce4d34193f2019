#include "spanfact/corrector.hpp"

#include <algorithm>
#include <stdexcept>

namespace spanfact {

namespace {

struct WorkingSummary {
    std::vector<int> ids;
    std::vector<std::string> surfaces;                         // raw-cased
    std::vector<std::pair<std::size_t, std::size_t>> ranges;   // per entity, shifts as we edit

    static WorkingSummary from(const TokenizedText& draft,
                               const std::vector<EntitySpan>& entities) {
        WorkingSummary w;
        w.ids = draft.token_ids;
        w.surfaces = draft.surfaces();
        for (const auto& e : entities) w.ranges.emplace_back(e.token_start, e.token_end);
        return w;
    }

    std::string surface_of(std::size_t entity) const {
        std::string out;
        for (std::size_t i = ranges[entity].first; i < ranges[entity].second; ++i) {
            if (i > ranges[entity].first) out.push_back(' ');
            out += surfaces[i];
        }
        return out;
    }

    // Replaces entity i's tokens; shifts the ranges of later entities.
    void substitute(std::size_t entity, const std::vector<int>& new_ids,
                    const std::vector<std::string>& new_surfaces) {
        const auto [a, b] = ranges[entity];
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(a),
                  ids.begin() + static_cast<std::ptrdiff_t>(b));
        ids.insert(ids.begin() + static_cast<std::ptrdiff_t>(a), new_ids.begin(), new_ids.end());
        surfaces.erase(surfaces.begin() + static_cast<std::ptrdiff_t>(a),
                       surfaces.begin() + static_cast<std::ptrdiff_t>(b));
        surfaces.insert(surfaces.begin() + static_cast<std::ptrdiff_t>(a), new_surfaces.begin(),
                        new_surfaces.end());
        const std::ptrdiff_t delta =
            static_cast<std::ptrdiff_t>(new_ids.size()) - static_cast<std::ptrdiff_t>(b - a);
        ranges[entity].second = a + new_ids.size();
        for (std::size_t j = entity + 1; j < ranges.size(); ++j) {
            ranges[j].first += delta;
            ranges[j].second += delta;
        }
    }

    // Query with the listed entities masked; snapshot uses "[MASK]".
    MaskedQuery masked(const std::vector<std::size_t>& which, std::string* snapshot) const {
        MaskedQuery q;
        std::vector<std::string> snap;
        std::size_t next = 0;
        std::size_t i = 0;
        while (i < ids.size()) {
            if (next < which.size() && ranges[which[next]].first == i) {
                q.mask_positions.push_back(q.tokens.size());
                q.masked_surfaces.push_back(surface_of(which[next]));
                q.tokens.push_back(Vocabulary::kMask);
                snap.push_back("[MASK]");
                i = ranges[which[next]].second;
                ++next;
            } else {
                q.tokens.push_back(ids[i]);
                snap.push_back(surfaces[i]);
                ++i;
            }
        }
        if (snapshot) *snapshot = detokenize(snap);
        return q;
    }
};

// Raw-cased source tokens for a predicted span in packed coordinates.
void span_tokens(const TokenizedText& source, const SpanExample& ex, const SpanPrediction& pred,
                 std::vector<int>& ids, std::vector<std::string>& surfaces) {
    const std::size_t a = pred.start - ex.source_begin();
    const std::size_t b = pred.end - ex.source_begin();
    if (pred.start < ex.source_begin() || b > source.size())
        throw std::logic_error("predicted span outside the source segment");
    for (std::size_t i = a; i < b; ++i) {
        ids.push_back(source.token_ids[i]);
        surfaces.push_back(source.surface(i));
    }
}

CorrectionTrace finalize(WorkingSummary&& w, std::string engine,
                         std::vector<TraceRecord>&& records) {
    CorrectionTrace trace;
    trace.engine = std::move(engine);
    trace.records = std::move(records);
    trace.corrected_tokens = std::move(w.surfaces);
    trace.corrected_raw = detokenize(trace.corrected_tokens);
    return trace;
}

}  // namespace

SpanPredictor make_predictor(const QaModel& model, std::size_t k) {
    return [&model, k](const SpanExample& ex) { return model.predict(ex, k); };
}

SequencePredictor make_predictor(const ArModel& model, std::size_t b, std::size_t k) {
    return [&model, b, k](const SpanExample& ex) { return model.predict(ex, b, k); };
}

CorrectionTrace correct_iterative(const TokenizedText& source, const TokenizedText& draft,
                                  const EntityTagger& tagger, const SpanPredictor& predictor,
                                  std::size_t max_len) {
    const auto entities = tagger.tag(draft);
    WorkingSummary w = WorkingSummary::from(draft, entities);
    std::vector<TraceRecord> records;
    for (std::size_t i = 0; i < entities.size(); ++i) {
        TraceRecord rec;
        rec.original = w.surface_of(i);
        MaskedQuery q = w.masked({i}, &rec.query_snapshot);
        SpanExample ex = pack_input(q, source, max_len);
        rec.predicted = predictor(ex);
        rec.logprob = rec.predicted.score;
        rec.sentinel = rec.predicted.is_sentinel;
        if (rec.sentinel) {
            rec.substituted = rec.original;  // replace back the original entity
        } else {
            std::vector<int> ids;
            std::vector<std::string> surfaces;
            span_tokens(source, ex, rec.predicted, ids, surfaces);
            rec.substituted = detokenize(surfaces);
            w.substitute(i, ids, surfaces);
        }
        records.push_back(std::move(rec));
    }
    return finalize(std::move(w), "qa", std::move(records));
}

CorrectionTrace correct_autoregressive(const TokenizedText& source, const TokenizedText& draft,
                                       const EntityTagger& tagger,
                                       const SequencePredictor& predictor, std::size_t max_len) {
    const auto entities = tagger.tag(draft);
    WorkingSummary w = WorkingSummary::from(draft, entities);
    std::vector<TraceRecord> records;
    if (!entities.empty()) {
        std::vector<std::size_t> all(entities.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        std::string snapshot;
        MaskedQuery q = w.masked(all, &snapshot);
        SpanExample ex = pack_input(q, source, max_len);
        const auto spans = predictor(ex);
        if (spans.size() != entities.size())
            throw std::logic_error("sequence predictor returned wrong span count");
        for (std::size_t i = 0; i < entities.size(); ++i) {
            TraceRecord rec;
            rec.query_snapshot = snapshot;
            rec.original = w.surface_of(i);
            rec.predicted = spans[i];
            rec.logprob = spans[i].score;
            rec.sentinel = spans[i].is_sentinel;
            if (rec.sentinel) {
                rec.substituted = rec.original;
            } else {
                std::vector<int> ids;
                std::vector<std::string> surfaces;
                span_tokens(source, ex, spans[i], ids, surfaces);
                rec.substituted = detokenize(surfaces);
                w.substitute(i, ids, surfaces);
            }
            records.push_back(std::move(rec));
        }
    }
    return finalize(std::move(w), "ar", std::move(records));
}

}  // namespace spanfact
