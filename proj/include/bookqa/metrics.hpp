#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "text.hpp"

namespace bookqa {

using Tokens = std::span<const Token>;

// ---------------------------------------------------------------------------
// Rouge-L

/// Longest common subsequence length, O(|a||b|) time, O(min(|a|,|b|)) space.
inline std::size_t lcs_length(Tokens a, Tokens b) {
    if (a.size() < b.size()) {
        std::swap(a, b);
    }
    if (b.empty()) {
        return 0;
    }
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (const auto& x : a) {
        std::size_t diag = 0;  // row[j-1] from the previous iteration of x
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = (x == b[j - 1]) ? diag + 1 : std::max(up, row[j - 1]);
            diag = up;
        }
    }
    return row.back();
}

inline constexpr double kRougeBeta = 1.2;

/// Rouge-L F-measure from an LCS length and the two sequence lengths.
inline double rouge_l_from_lcs(std::size_t lcs, std::size_t cand_len, std::size_t ref_len,
                               double beta = kRougeBeta) {
    if (lcs == 0 || cand_len == 0 || ref_len == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(lcs) / static_cast<double>(cand_len);
    const double r = static_cast<double>(lcs) / static_cast<double>(ref_len);
    const double b2 = beta * beta;
    return ((1.0 + b2) * p * r) / (r + b2 * p);
}

inline double rouge_l(Tokens candidate, Tokens reference, double beta = kRougeBeta) {
    return rouge_l_from_lcs(lcs_length(candidate, reference), candidate.size(), reference.size(), beta);
}

inline double rouge_l_max(Tokens candidate, std::span<const TokenSeq> references, double beta = kRougeBeta) {
    double best = 0;
    for (const auto& r : references) {
        best = std::max(best, rouge_l(candidate, r.tokens, beta));
    }
    return best;
}

// ---------------------------------------------------------------------------
// BLEU

/// Sufficient statistics for corpus BLEU; sums are order independent.
struct BleuStats {
    std::vector<std::uint64_t> matches;  // clipped n-gram matches, index n-1
    std::vector<std::uint64_t> totals;   // candidate n-grams, index n-1
    std::uint64_t cand_len = 0;
    std::uint64_t ref_len = 0;  // closest reference length, summed

    explicit BleuStats(std::size_t max_n = 4) : matches(max_n, 0), totals(max_n, 0) {}

    BleuStats& operator+=(const BleuStats& o) {
        for (std::size_t n = 0; n < matches.size(); ++n) {
            matches[n] += o.matches[n];
            totals[n] += o.totals[n];
        }
        cand_len += o.cand_len;
        ref_len += o.ref_len;
        return *this;
    }
};

namespace detail {

inline std::map<std::vector<Token>, std::uint64_t> ngram_counts(Tokens seq, std::size_t n) {
    std::map<std::vector<Token>, std::uint64_t> out;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
        ++out[std::vector<Token>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                 seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return out;
}

}  // namespace detail

/// Per-sentence statistics: multi-reference clipping and closest reference
/// length (shorter wins a tie).
inline BleuStats bleu_stats(Tokens candidate, std::span<const TokenSeq> references, std::size_t max_n = 4) {
    BleuStats s(max_n);
    s.cand_len = candidate.size();
    std::size_t best_len = 0;
    std::size_t best_diff = SIZE_MAX;
    for (const auto& r : references) {
        const std::size_t diff = r.size() > candidate.size() ? r.size() - candidate.size() : candidate.size() - r.size();
        if (diff < best_diff || (diff == best_diff && r.size() < best_len)) {
            best_diff = diff;
            best_len = r.size();
        }
    }
    s.ref_len = best_len;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto cand = detail::ngram_counts(candidate, n);
        std::map<std::vector<Token>, std::uint64_t> max_ref;
        for (const auto& r : references) {
            for (const auto& [gram, c] : detail::ngram_counts(r.tokens, n)) {
                auto& m = max_ref[gram];
                m = std::max(m, c);
            }
        }
        for (const auto& [gram, c] : cand) {
            s.totals[n - 1] += c;
            if (const auto it = max_ref.find(gram); it != max_ref.end()) {
                s.matches[n - 1] += std::min(c, it->second);
            }
        }
    }
    return s;
}

/// Unsmoothed BLEU: geometric mean of modified precisions times the brevity
/// penalty. Zero when any precision is zero (or has no candidate n-grams).
inline double bleu_from_stats(const BleuStats& s) {
    if (s.cand_len == 0) {
        return 0.0;
    }
    double log_sum = 0;
    for (std::size_t n = 0; n < s.matches.size(); ++n) {
        if (s.matches[n] == 0 || s.totals[n] == 0) {
            return 0.0;
        }
        log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
    }
    const double bp = s.cand_len > s.ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(s.ref_len) / static_cast<double>(s.cand_len));
    return bp * std::exp(log_sum / static_cast<double>(s.matches.size()));
}

inline double bleu_corpus(std::span<const TokenSeq> predictions, std::span<const std::vector<TokenSeq>> references,
                          std::size_t max_n) {
    require(predictions.size() == references.size(), "bleu_corpus: predictions and references differ in length");
    require(!predictions.empty(), "bleu_corpus: empty corpus");
    require(max_n >= 1, "bleu_corpus: max_n must be >= 1");
    BleuStats total(max_n);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        total += bleu_stats(predictions[i].tokens, references[i], max_n);
    }
    return bleu_from_stats(total);
}

// ---------------------------------------------------------------------------
// Meteor (exact-match module only)

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
    bool exact = true;  // false if the search budget ran out and greedy was used
};

namespace detail {

// Exhaustive search over alignments with memoization on
// (candidate position, used reference positions, previous reference match).
// Objective: most matches, then fewest chunks (= most adjacent continuations).
class MeteorAligner {
  public:
    static constexpr std::size_t kStateBudget = 1u << 18;

    MeteorAligner(Tokens cand, Tokens ref) : m_cand(cand), m_ref(ref), m_words((ref.size() + 63) / 64) {
        for (std::size_t i = 0; i < cand.size(); ++i) {
            std::vector<std::size_t> pos;
            for (std::size_t j = 0; j < ref.size(); ++j) {
                if (cand[i] == ref[j]) {
                    pos.push_back(j);
                }
            }
            m_options.push_back(std::move(pos));
        }
    }

    MeteorAlignment run() {
        std::vector<std::uint64_t> used(m_words, 0);
        try {
            const long best = search(0, used, kNone);
            const auto scale = static_cast<long>(m_cand.size() + 1);
            const auto matches = static_cast<std::size_t>(best / scale);
            const auto continuations = static_cast<std::size_t>(best % scale);
            return {matches, matches - continuations, true};
        } catch (const BudgetExceeded&) {
            return greedy();
        }
    }

  private:
    struct BudgetExceeded {};
    static constexpr std::size_t kNone = SIZE_MAX;

    // Encodes (matches, continuations) as matches * (|cand|+1) + continuations.
    long search(std::size_t i, std::vector<std::uint64_t>& used, std::size_t prev) {
        if (i == m_cand.size()) {
            return 0;
        }
        if (m_options[i].empty()) {
            return search(i + 1, used, kNone);
        }
        if (prev != kNone && std::find(m_options[i].begin(), m_options[i].end(), prev + 1) == m_options[i].end()) {
            prev = kNone;  // cannot extend a chunk here, so the value does not depend on it
        }
        std::string key;
        key.reserve(16 + used.size() * 8);
        key.append(reinterpret_cast<const char*>(&i), sizeof i);
        key.append(reinterpret_cast<const char*>(&prev), sizeof prev);
        key.append(reinterpret_cast<const char*>(used.data()), used.size() * sizeof(std::uint64_t));
        if (const auto it = m_memo.find(key); it != m_memo.end()) {
            return it->second;
        }
        if (m_memo.size() >= kStateBudget) {
            throw BudgetExceeded{};
        }
        const auto scale = static_cast<long>(m_cand.size() + 1);
        long best = search(i + 1, used, kNone);
        for (const std::size_t j : m_options[i]) {
            auto& word = used[j / 64];
            const std::uint64_t bit = std::uint64_t{1} << (j % 64);
            if (word & bit) {
                continue;
            }
            word |= bit;
            const long gain = scale + ((prev != kNone && prev + 1 == j) ? 1 : 0);
            best = std::max(best, gain + search(i + 1, used, j));
            word &= ~bit;
        }
        m_memo.emplace(std::move(key), best);
        return best;
    }

    // Left to right, preferring the reference position that extends the
    // current chunk, else the first unused one. Still a maximum matching.
    MeteorAlignment greedy() const {
        std::vector<bool> used(m_ref.size(), false);
        MeteorAlignment a{0, 0, false};
        std::size_t prev = kNone;
        for (std::size_t i = 0; i < m_cand.size(); ++i) {
            std::size_t pick = kNone;
            for (const std::size_t j : m_options[i]) {
                if (used[j]) {
                    continue;
                }
                if (prev != kNone && j == prev + 1) {
                    pick = j;
                    break;
                }
                if (pick == kNone) {
                    pick = j;
                }
            }
            if (pick == kNone) {
                prev = kNone;
                continue;
            }
            used[pick] = true;
            ++a.matches;
            if (prev == kNone || pick != prev + 1) {
                ++a.chunks;
            }
            prev = pick;
        }
        return a;
    }

    Tokens m_cand;
    Tokens m_ref;
    std::size_t m_words;
    std::vector<std::vector<std::size_t>> m_options;
    std::unordered_map<std::string, long> m_memo;
};

}  // namespace detail

/// Unigram alignment with the maximum number of exact matches and, among
/// those, the minimum number of chunks.
inline MeteorAlignment meteor_align(Tokens candidate, Tokens reference) {
    return detail::MeteorAligner(candidate, reference).run();
}

inline double meteor_from_alignment(const MeteorAlignment& a, std::size_t cand_len, std::size_t ref_len) {
    if (a.matches == 0) {
        return 0.0;
    }
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(cand_len);
    const double r = m / static_cast<double>(ref_len);
    const double fmean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(a.chunks) / m;
    const double penalty = 0.5 * frag * frag * frag;
    return fmean * (1.0 - penalty);
}

inline double meteor_exact(Tokens candidate, Tokens reference) {
    return meteor_from_alignment(meteor_align(candidate, reference), candidate.size(), reference.size());
}

inline double meteor_max(Tokens candidate, std::span<const TokenSeq> references) {
    double best = 0;
    for (const auto& r : references) {
        best = std::max(best, meteor_exact(candidate, r.tokens));
    }
    return best;
}

// ---------------------------------------------------------------------------
// SQuAD-style EM / F1

inline bool exact_match(std::string_view prediction, std::span<const std::string> references) {
    require(!references.empty(), "exact_match: no references");
    const auto pred = normalize_squad(prediction);
    return std::any_of(references.begin(), references.end(),
                       [&](const std::string& r) { return normalize_squad(r) == pred; });
}

/// Bag-of-tokens F1 on normalize_squad output. Two empty sequences score 1
/// so that an exact match always has F1 = 1.
inline double token_f1_normalized(Tokens pred, Tokens gold) {
    if (pred.empty() || gold.empty()) {
        return (pred.empty() && gold.empty()) ? 1.0 : 0.0;
    }
    std::unordered_map<std::string_view, long> counts;
    for (const auto& t : gold) {
        ++counts[t];
    }
    long same = 0;
    for (const auto& t : pred) {
        if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(same) / static_cast<double>(pred.size());
    const double r = static_cast<double>(same) / static_cast<double>(gold.size());
    return 2 * p * r / (p + r);
}

inline double token_f1(std::string_view prediction, std::span<const std::string> references) {
    require(!references.empty(), "token_f1: no references");
    const auto pred = normalize_squad(prediction);
    double best = 0;
    for (const auto& r : references) {
        best = std::max(best, token_f1_normalized(pred.tokens, normalize_squad(r).tokens));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Corpus evaluation

/// All values in [0, 1].
struct MetricReport {
    double bleu1 = 0;
    double bleu4 = 0;
    double meteor = 0;
    double rouge_l = 0;
    double em = 0;
    double f1 = 0;
    std::size_t n_questions = 0;
};

struct QuestionScores {
    double meteor = 0;
    double rouge_l = 0;
    bool em = false;
    double f1 = 0;
};

inline QuestionScores score_question(std::string_view prediction, std::span<const std::string> answers) {
    const auto pred = normalize_eval(prediction);
    std::vector<TokenSeq> refs;
    for (const auto& a : answers) {
        refs.push_back(normalize_eval(a));
    }
    return QuestionScores{meteor_max(pred.tokens, refs), rouge_l_max(pred.tokens, refs),
                          exact_match(prediction, answers), token_f1(prediction, answers)};
}

/// Reads {question_id, answer} records; duplicate ids are rejected.
inline std::map<std::string, std::string> load_predictions(const std::string& path) {
    std::map<std::string, std::string> out;
    jsonl::for_each_record(path, [&](const jsonl::json& rec, const jsonl::RecordRef& ref) {
        auto qid = jsonl::get_string(rec, ref, "question_id");
        auto answer = jsonl::get_string(rec, ref, "answer");
        if (!out.emplace(std::move(qid), std::move(answer)).second) {
            ref.fail("question_id", "duplicate prediction");
        }
    });
    return out;
}

/// BLEU is corpus level; Meteor, Rouge-L, EM and F1 are max over references
/// per question, then averaged over questions.
inline MetricReport evaluate_qa(const std::map<std::string, std::string>& predictions,
                                std::span<const QaExample> gold, std::size_t jobs = 1) {
    require(!gold.empty(), "evaluate_qa: no gold questions");
    std::vector<std::string> missing;
    std::map<std::string, bool> gold_ids;
    for (const auto& q : gold) {
        gold_ids[q.question_id] = true;
        if (!predictions.contains(q.question_id)) {
            missing.push_back(q.question_id);
        }
    }
    std::vector<std::string> extra;
    for (const auto& [qid, _] : predictions) {
        if (!gold_ids.contains(qid)) {
            extra.push_back(qid);
        }
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "prediction/gold mismatch:";
        for (const auto& m : missing) {
            msg += " missing=" + m;
        }
        for (const auto& e : extra) {
            msg += " extra=" + e;
        }
        fail(ErrorKind::data, msg);
    }

    std::vector<QuestionScores> scores(gold.size());
    std::vector<BleuStats> b1(gold.size(), BleuStats(1));
    std::vector<BleuStats> b4(gold.size(), BleuStats(4));
    parallel_for(gold.size(), jobs, [&](std::size_t i) {
        const auto& q = gold[i];
        const auto& prediction = predictions.at(q.question_id);
        scores[i] = score_question(prediction, q.answers);
        const auto pred = normalize_eval(prediction);
        std::vector<TokenSeq> refs;
        for (const auto& a : q.answers) {
            refs.push_back(normalize_eval(a));
        }
        b1[i] = bleu_stats(pred.tokens, refs, 1);
        b4[i] = bleu_stats(pred.tokens, refs, 4);
    });

    MetricReport report;
    BleuStats t1(1);
    BleuStats t4(4);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        report.meteor += scores[i].meteor;
        report.rouge_l += scores[i].rouge_l;
        report.em += scores[i].em ? 1.0 : 0.0;
        report.f1 += scores[i].f1;
        t1 += b1[i];
        t4 += b4[i];
    }
    const auto n = static_cast<double>(gold.size());
    report.meteor /= n;
    report.rouge_l /= n;
    report.em /= n;
    report.f1 /= n;
    report.bleu1 = bleu_from_stats(t1);
    report.bleu4 = bleu_from_stats(t4);
    report.n_questions = gold.size();
    return report;
}

/// Percentages with two decimals.
inline std::string metric_report_record(const MetricReport& r) {
    const auto pct = [](double v) { return jsonl::fixed(100.0 * v, 2); };
    return "{\"bleu1\":" + pct(r.bleu1) + ",\"bleu4\":" + pct(r.bleu4) + ",\"meteor\":" + pct(r.meteor) +
           ",\"rouge_l\":" + pct(r.rouge_l) + ",\"em\":" + pct(r.em) + ",\"f1\":" + pct(r.f1) +
           ",\"n_questions\":" + std::to_string(r.n_questions) + "}";
}

}  // namespace bookqa
