#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bm25.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "rng.hpp"
#include "span_oracle.hpp"

namespace bookqa {

enum class PairLabel { positive, negative };
enum class Provenance { intersection, complement };
enum class NegativePool { union_minus_intersection, whole_book };

inline std::string_view to_string(PairLabel l) { return l == PairLabel::positive ? "positive" : "negative"; }
inline std::string_view to_string(Provenance p) { return p == Provenance::intersection ? "intersection" : "complement"; }
inline std::string_view to_string(NegativePool p) {
    return p == NegativePool::union_minus_intersection ? "union" : "book";
}

/// Ranker training example. positive => filter_score > pos_threshold and
/// provenance == intersection; negative => filter_score < neg_threshold.
struct SupervisionPair {
    std::string question_id;
    std::string book_id;
    std::size_t para_index = 0;
    PairLabel label = PairLabel::negative;
    double filter_score = 0;
    Provenance provenance = Provenance::complement;
};

struct SupervisionConfig {
    std::size_t k_retrieve = 32;
    double pos_threshold = 0.7;
    double neg_threshold = 0.4;
    std::size_t negatives_per_positive = 1;
    NegativePool negative_pool = NegativePool::union_minus_intersection;
    std::uint64_t rng_seed = 0;

    void validate() const {
        require(k_retrieve >= 1, "k_retrieve must be >= 1");
        require(0.0 <= neg_threshold && neg_threshold < pos_threshold && pos_threshold <= 1.0,
                "thresholds must satisfy 0 <= neg < pos <= 1");
    }
};

/// Counters kept while generating pairs for one question.
struct SupervisionTrace {
    std::string question_id;
    std::string book_id;
    std::size_t n_question_only = 0;  // |C_Q|
    std::size_t n_oracle = 0;         // |C_{Q+A}|
    std::size_t n_intersection = 0;
    std::size_t n_examined = 0;   // candidates whose filter score was computed
    std::size_t n_dead_zone = 0;  // of those, scores in [neg_threshold, pos_threshold]
};

struct SupervisionResult {
    std::vector<SupervisionPair> pairs;
    SupervisionTrace trace;
};

/// Distant supervision from two BM25 retrievals: positives come from the
/// intersection of the question-only and question+answer top-k lists and
/// must clear pos_threshold; negatives are sampled from the complement pool
/// and must fall below neg_threshold, up to negatives_per_positive per
/// positive. The filter score is the paragraph's best-span Rouge-L against
/// any reference answer.
inline SupervisionResult generate_pairs_traced(const Bm25Index& index, std::span<const Paragraph> paragraphs,
                                               const QaExample& q, const SupervisionConfig& cfg) {
    cfg.validate();
    require(index.book_id() == q.book_id,
            "index for '" + index.book_id() + "' used for question of '" + q.book_id + "'");
    require(paragraphs.size() == index.n_docs(), "paragraph list does not match index");

    SupervisionResult out;
    auto& trace = out.trace;
    trace.question_id = q.question_id;
    trace.book_id = q.book_id;

    const auto by_q = index.retrieve(q.question, cfg.k_retrieve);
    const auto by_qa = index.retrieve(oracle_query(q), cfg.k_retrieve);
    trace.n_question_only = by_q.size();
    trace.n_oracle = by_qa.size();

    std::set<std::size_t> in_qa;
    for (const auto& h : by_qa) {
        in_qa.insert(h.para_index);
    }
    std::vector<std::size_t> intersection;
    std::set<std::size_t> in_both;
    for (const auto& h : by_q) {
        if (in_qa.contains(h.para_index)) {
            intersection.push_back(h.para_index);
            in_both.insert(h.para_index);
        }
    }
    trace.n_intersection = intersection.size();

    const auto filter = [&](std::size_t para) {
        ++trace.n_examined;
        const double s = coverage_rouge(paragraphs[para], q.answers);
        if (s >= cfg.neg_threshold && s <= cfg.pos_threshold) {
            ++trace.n_dead_zone;
        }
        return s;
    };

    for (const auto para : intersection) {
        const double s = filter(para);
        if (s > cfg.pos_threshold) {
            out.pairs.push_back({q.question_id, q.book_id, para, PairLabel::positive, s, Provenance::intersection});
        }
    }
    const std::size_t quota = cfg.negatives_per_positive * out.pairs.size();
    if (quota == 0) {
        return out;
    }

    std::vector<std::size_t> pool;
    if (cfg.negative_pool == NegativePool::union_minus_intersection) {
        for (const auto& h : by_q) {
            if (!in_both.contains(h.para_index)) {
                pool.push_back(h.para_index);
            }
        }
        for (const auto& h : by_qa) {
            if (!in_both.contains(h.para_index)) {
                pool.push_back(h.para_index);
            }
        }
    } else {
        for (std::size_t i = 0; i < paragraphs.size(); ++i) {
            if (!in_both.contains(i)) {
                pool.push_back(i);
            }
        }
    }
    auto rng = stream_for(cfg.rng_seed, q.question_id);
    rng.shuffle(pool);
    std::size_t taken = 0;
    for (const auto para : pool) {
        if (taken == quota) {
            break;
        }
        const double s = filter(para);
        if (s < cfg.neg_threshold) {
            out.pairs.push_back({q.question_id, q.book_id, para, PairLabel::negative, s, Provenance::complement});
            ++taken;
        }
    }
    return out;
}

inline std::vector<SupervisionPair> generate_pairs(const Bm25Index& index, std::span<const Paragraph> paragraphs,
                                                   const QaExample& q, const SupervisionConfig& cfg) {
    return generate_pairs_traced(index, paragraphs, q, cfg).pairs;
}

struct SupervisionSummary {
    std::size_t n_pairs = 0;
    std::size_t n_positive = 0;
    std::size_t n_negative = 0;
    std::size_t n_questions = 0;                // distinct question ids seen (pairs or traces)
    std::size_t n_questions_with_positive = 0;
    double balance = 0;        // positives / pairs
    double dead_zone_rate = 0;  // dead-zone scores / examined candidates (traces only)
    std::map<std::string, std::size_t> positives_per_book;
};

inline SupervisionSummary supervision_stats(std::span<const SupervisionPair> pairs,
                                            std::span<const SupervisionTrace> traces = {}) {
    SupervisionSummary s;
    std::set<std::string> questions;
    std::set<std::string> with_positive;
    for (const auto& p : pairs) {
        ++s.n_pairs;
        questions.insert(p.question_id);
        if (p.label == PairLabel::positive) {
            ++s.n_positive;
            ++s.positives_per_book[p.book_id];
            with_positive.insert(p.question_id);
        } else {
            ++s.n_negative;
        }
    }
    std::size_t examined = 0;
    std::size_t dead = 0;
    for (const auto& t : traces) {
        questions.insert(t.question_id);
        examined += t.n_examined;
        dead += t.n_dead_zone;
    }
    s.n_questions = questions.size();
    s.n_questions_with_positive = with_positive.size();
    s.balance = s.n_pairs == 0 ? 0.0 : static_cast<double>(s.n_positive) / static_cast<double>(s.n_pairs);
    s.dead_zone_rate = examined == 0 ? 0.0 : static_cast<double>(dead) / static_cast<double>(examined);
    return s;
}

inline std::string supervision_record(const SupervisionPair& p) {
    return "{\"question_id\":" + jsonl::quote(p.question_id) + ",\"book_id\":" + jsonl::quote(p.book_id) +
           ",\"para_index\":" + std::to_string(p.para_index) + ",\"label\":\"" + std::string(to_string(p.label)) +
           "\",\"filter_score\":" + jsonl::fixed(p.filter_score, 6) + ",\"provenance\":\"" +
           std::string(to_string(p.provenance)) + "\"}";
}

inline std::string supervision_summary_record(const SupervisionSummary& s) {
    std::string books = "{";
    bool first = true;
    for (const auto& [book, n] : s.positives_per_book) {
        books += (first ? "" : ",") + jsonl::quote(book) + ":" + std::to_string(n);
        first = false;
    }
    books += "}";
    return "{\"n_pairs\":" + std::to_string(s.n_pairs) + ",\"n_positive\":" + std::to_string(s.n_positive) +
           ",\"n_negative\":" + std::to_string(s.n_negative) + ",\"n_questions\":" + std::to_string(s.n_questions) +
           ",\"n_questions_with_positive\":" + std::to_string(s.n_questions_with_positive) +
           ",\"balance\":" + jsonl::fixed(s.balance, 6) + ",\"dead_zone_rate\":" + jsonl::fixed(s.dead_zone_rate, 6) +
           ",\"positives_per_book\":" + books + "}";
}

}  // namespace bookqa
