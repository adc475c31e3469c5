#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bm25.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "reranker.hpp"
#include "span_oracle.hpp"

namespace bookqa {

enum class Selection { bm25_top, ranker_top, upperbound, oracle_top };

inline std::string_view to_string(Selection s) {
    switch (s) {
    case Selection::bm25_top: return "bm25_top";
    case Selection::ranker_top: return "ranker_top";
    case Selection::upperbound: return "upperbound";
    case Selection::oracle_top: return "oracle_top";
    }
    return "unknown";
}

struct QuestionCoverage {
    bool em = false;
    double rouge = 0;
};

/// Answer coverage of a per-question paragraph selection.
struct CoverageReport {
    Selection selection = Selection::bm25_top;
    double em_coverage = 0;
    double rouge_coverage = 0;
    std::size_t n_questions = 0;
    std::vector<QuestionCoverage> per_question;
};

/// `selections[i]` lists the para_index values chosen for `questions[i]`.
/// An empty selection (retrieval found nothing) covers nothing but still
/// counts in the denominator.
inline CoverageReport evaluate_selection(const ParagraphStore& store, std::span<const QaExample> questions,
                                         std::span<const std::vector<std::size_t>> selections, Selection kind,
                                         std::size_t jobs = 1) {
    if (selections.size() != questions.size()) {
        fail(ErrorKind::invalid_argument, "evaluate_selection: " + std::to_string(questions.size()) + " questions but " +
                                              std::to_string(selections.size()) + " selections");
    }
    CoverageReport report;
    report.selection = kind;
    report.n_questions = questions.size();
    report.per_question.resize(questions.size());
    parallel_for(questions.size(), jobs, [&](std::size_t i) {
        const auto& q = questions[i];
        const auto it = store.find(q.book_id);
        if (it == store.end()) {
            fail(ErrorKind::data, "no paragraphs for book '" + q.book_id + "'");
        }
        std::vector<const Paragraph*> chosen;
        for (const auto idx : selections[i]) {
            if (idx >= it->second.size()) {
                fail(ErrorKind::invalid_argument,
                     "selection for '" + q.question_id + "' has out-of-range para_index " + std::to_string(idx));
            }
            chosen.push_back(&it->second[idx]);
        }
        report.per_question[i] = {contains_answer(chosen, q.answers), coverage_rouge(chosen, q.answers)};
    });
    for (const auto& c : report.per_question) {
        report.em_coverage += c.em ? 1.0 : 0.0;
        report.rouge_coverage += c.rouge;
    }
    if (!questions.empty()) {
        report.em_coverage /= static_cast<double>(questions.size());
        report.rouge_coverage /= static_cast<double>(questions.size());
    }
    return report;
}

/// Checkpoint score for ranker selection: mean of EM and Rouge-L coverage.
inline double model_selection_score(const CoverageReport& r) { return (r.em_coverage + r.rouge_coverage) / 2.0; }

struct AblationConfig {
    std::size_t k_base = 32;
    std::size_t k_top = 5;
};

/// The four rows of the ranker ablation, in display order:
/// BM25 top-k, reranked top-k, BM25 top-k_base upper bound, oracle-query top-k.
struct AblationTable {
    AblationConfig config;
    std::string reranker;
    std::vector<CoverageReport> rows;

    const CoverageReport& row(Selection s) const {
        for (const auto& r : rows) {
            if (r.selection == s) {
                return r;
            }
        }
        fail(ErrorKind::invalid_argument, "ablation table has no row " + std::string(to_string(s)));
    }
};

/// Per-question selections behind an ablation run, kept for inspection.
struct AblationSelections {
    std::vector<std::vector<std::size_t>> base;      // BM25 top-k_base
    std::vector<std::vector<std::size_t>> reranked;  // reranker top-k_top
    std::vector<std::vector<std::size_t>> oracle;    // oracle query top-k_top
};

inline RerankRequest make_rerank_request(const QaExample& q, std::span<const Paragraph> paragraphs,
                                         std::span<const ScoredParagraph> candidates) {
    RerankRequest r{q.question_id, q.question_text, {}};
    for (const auto& c : candidates) {
        r.candidates.push_back({c.para_index, join(paragraphs[c.para_index].tokens)});
    }
    return r;
}

namespace detail {

inline std::vector<std::size_t> take(std::span<const std::size_t> ids, std::size_t k) {
    return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(k, ids.size()))};
}

inline std::vector<std::size_t> indices(std::span<const ScoredParagraph> hits) {
    std::vector<std::size_t> out;
    for (const auto& h : hits) {
        out.push_back(h.para_index);
    }
    return out;
}

}  // namespace detail

/// BM25 top-k_base per question; empty when the question shares no terms
/// with its book.
inline std::vector<std::vector<ScoredParagraph>> baseline_candidates(const std::map<std::string, Bm25Index>& indexes,
                                                                     std::span<const QaExample> questions,
                                                                     std::size_t k_base, std::size_t jobs = 1) {
    std::vector<std::vector<ScoredParagraph>> out(questions.size());
    parallel_for(questions.size(), jobs, [&](std::size_t i) {
        const auto it = indexes.find(questions[i].book_id);
        if (it == indexes.end()) {
            fail(ErrorKind::data, "no index for book '" + questions[i].book_id + "'");
        }
        out[i] = it->second.retrieve(questions[i].question, k_base);
    });
    return out;
}

/// Runs the ablation protocol. The reranker only ever sees the baseline
/// top-k_base candidates. Any reranker failure aborts the run with an error
/// naming every failed question.
inline AblationTable run_ablation(const ParagraphStore& store, const std::map<std::string, Bm25Index>& indexes,
                                  std::span<const QaExample> questions, Reranker& reranker,
                                  AblationConfig cfg = {}, std::size_t jobs = 1,
                                  AblationSelections* selections_out = nullptr) {
    require(cfg.k_base >= 1 && cfg.k_top >= 1, "ablation sizes must be >= 1");
    const std::size_t n = questions.size();
    const auto base = baseline_candidates(indexes, questions, cfg.k_base, jobs);

    AblationSelections sel;
    sel.base.resize(n);
    sel.reranked.resize(n);
    sel.oracle.resize(n);
    std::vector<RerankRequest> requests(n);
    parallel_for(n, jobs, [&](std::size_t i) {
        const auto& q = questions[i];
        const auto& index = indexes.at(q.book_id);
        sel.base[i] = detail::indices(base[i]);
        sel.oracle[i] = detail::indices(index.retrieve(oracle_query(q), cfg.k_top));
        if (!base[i].empty()) {
            requests[i] = make_rerank_request(q, store.at(q.book_id), base[i]);
        }
    });

    std::vector<std::size_t> to_score;
    for (std::size_t i = 0; i < n; ++i) {
        if (!base[i].empty()) {
            to_score.push_back(i);
        }
    }
    std::vector<std::string> failures(n);
    const auto apply = [&](std::size_t i, const RerankResponse& resp) {
        const auto ranked = rerank(requests[i], resp);
        for (std::size_t r = 0; r < ranked.size() && r < cfg.k_top; ++r) {
            sel.reranked[i].push_back(ranked[r].para_index);
        }
    };
    if (reranker.concurrent_safe()) {
        parallel_for(to_score.size(), jobs, [&](std::size_t t) {
            const std::size_t i = to_score[t];
            try {
                apply(i, reranker.score(requests[i]));
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        });
    } else {
        std::vector<RerankRequest> batch;
        for (auto i : to_score) {
            batch.push_back(requests[i]);
        }
        try {
            const auto responses = reranker.score_batch(batch);
            for (std::size_t t = 0; t < to_score.size(); ++t) {
                try {
                    apply(to_score[t], responses[t]);
                } catch (const std::exception& e) {
                    failures[to_score[t]] = e.what();
                }
            }
        } catch (const std::exception& e) {
            for (auto i : to_score) {
                failures[i] = e.what();
            }
        }
    }
    std::string summary;
    std::size_t n_failed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!failures[i].empty()) {
            ++n_failed;
            if (n_failed <= 20) {
                summary += "\n  " + questions[i].question_id + ": " + failures[i];
            }
        }
    }
    if (n_failed != 0) {
        fail(ErrorKind::protocol, "reranker '" + reranker.name() + "' failed on " + std::to_string(n_failed) + " of " +
                                      std::to_string(to_score.size()) + " questions:" + summary);
    }

    std::vector<std::vector<std::size_t>> bm25_top(n);
    for (std::size_t i = 0; i < n; ++i) {
        bm25_top[i] = detail::take(sel.base[i], cfg.k_top);
    }
    AblationTable table;
    table.config = cfg;
    table.reranker = reranker.name();
    table.rows.push_back(evaluate_selection(store, questions, bm25_top, Selection::bm25_top, jobs));
    table.rows.push_back(evaluate_selection(store, questions, sel.reranked, Selection::ranker_top, jobs));
    table.rows.push_back(evaluate_selection(store, questions, sel.base, Selection::upperbound, jobs));
    table.rows.push_back(evaluate_selection(store, questions, sel.oracle, Selection::oracle_top, jobs));

    // A top-k_top subset can never cover more than the k_base superset.
    const auto& upper = table.rows[2].per_question;
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = table.rows[r].per_question[i];
            if ((c.em && !upper[i].em) || c.rouge > upper[i].rouge) {
                fail(ErrorKind::data, "coverage invariant violated for '" + questions[i].question_id + "'");
            }
        }
    }
    if (selections_out) {
        *selections_out = std::move(sel);
    }
    return table;
}

inline std::string row_label(Selection s, const AblationConfig& cfg, std::string_view reranker) {
    switch (s) {
    case Selection::bm25_top: return "BM25 top-" + std::to_string(cfg.k_top);
    case Selection::ranker_top: return "Reranked (" + std::string(reranker) + ") top-" + std::to_string(cfg.k_top);
    case Selection::upperbound: return "Upperbound (BM25 top-" + std::to_string(cfg.k_base) + ")";
    case Selection::oracle_top: return "Oracle (BM25 w/ Q+A) top-" + std::to_string(cfg.k_top);
    }
    return "";
}

/// Aligned plain-text table, percentages with two decimals.
inline std::string format_ablation_text(const AblationTable& t) {
    std::vector<std::string> labels;
    std::size_t width = std::string("IR Method").size();
    for (const auto& r : t.rows) {
        labels.push_back(row_label(r.selection, t.config, t.reranker));
        width = std::max(width, labels.back().size());
    }
    const auto pad = [&](std::string s) {
        s.resize(width, ' ');
        return s;
    };
    const auto right = [](std::string s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
    std::string out = pad("IR Method") + "  " + right("EM", 7) + "  " + right("Rouge-L", 7) + "\n";
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        out += pad(labels[i]) + "  " + right(jsonl::fixed(100 * t.rows[i].em_coverage, 2), 7) + "  " +
               right(jsonl::fixed(100 * t.rows[i].rouge_coverage, 2), 7) + "\n";
    }
    return out;
}

inline std::string format_ablation_json(const AblationTable& t) {
    std::string out = "{\"k_base\":" + std::to_string(t.config.k_base) + ",\"k_top\":" + std::to_string(t.config.k_top) +
                      ",\"reranker\":" + jsonl::quote(t.reranker) + ",\"rows\":[";
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        out += (i ? "," : "") + std::string("{\"selection\":\"") + std::string(to_string(r.selection)) +
               "\",\"label\":" + jsonl::quote(row_label(r.selection, t.config, t.reranker)) +
               ",\"em\":" + jsonl::fixed(100 * r.em_coverage, 2) + ",\"rouge_l\":" + jsonl::fixed(100 * r.rouge_coverage, 2) +
               ",\"model_selection\":" + jsonl::fixed(100 * model_selection_score(r), 2) +
               ",\"n_questions\":" + std::to_string(r.n_questions) + "}";
    }
    out += "]}";
    return out;
}

}  // namespace bookqa
