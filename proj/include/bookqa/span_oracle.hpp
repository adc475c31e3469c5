#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "metrics.hpp"

namespace bookqa {

/// Weak extractive label. start/end index the paragraph's normalized terms
/// (Paragraph::terms), half-open.
struct WeakSpanLabel {
    std::string question_id;
    std::string book_id;
    std::size_t para_index = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0;
};

/// Best contiguous window of length min(|answer|, |paragraph|) by Rouge-L
/// against the answer; earliest start wins ties. `answer` is normalized
/// with normalize_eval before use.
///
/// All windows share a length, so Rouge-L is monotone in the LCS length and
/// the search compares integer LCS values.
inline WeakSpanLabel best_span(const Paragraph& paragraph, const TokenSeq& answer) {
    const TokenSeq ans = normalize_tokens(answer);
    require(!ans.empty(), "best_span: answer is empty after normalization");
    const auto& terms = paragraph.terms.tokens;
    WeakSpanLabel label;
    label.book_id = paragraph.book_id;
    label.para_index = paragraph.para_index;
    if (terms.empty()) {
        return label;
    }
    const std::size_t width = std::min(ans.size(), terms.size());
    std::size_t best_lcs = 0;
    std::size_t best_start = 0;
    const bool any_shared = std::any_of(ans.begin(), ans.end(), [&](const Token& t) {
        return std::find(terms.begin(), terms.end(), t) != terms.end();
    });
    if (any_shared) {
        const std::span<const Token> all(terms);
        for (std::size_t s = 0; s + width <= terms.size(); ++s) {
            const std::size_t lcs = lcs_length(all.subspan(s, width), ans.tokens);
            if (lcs > best_lcs) {
                best_lcs = lcs;
                best_start = s;
                if (lcs == width) {
                    break;  // cannot be beaten
                }
            }
        }
    }
    label.start = best_start;
    label.end = best_start + width;
    label.score = rouge_l_from_lcs(best_lcs, width, ans.size());
    return label;
}

inline WeakSpanLabel best_span(const Paragraph& paragraph, std::string_view answer) {
    return best_span(paragraph, normalize_eval(answer));
}

/// Maximum best_span score over every (paragraph, answer) pair. Answers that
/// normalize to nothing are skipped.
inline double coverage_rouge(std::span<const Paragraph* const> paragraphs, std::span<const std::string> answers) {
    require(!answers.empty(), "coverage_rouge: no answers");
    std::vector<TokenSeq> norm;
    for (const auto& a : answers) {
        if (auto t = normalize_eval(a); !t.empty()) {
            norm.push_back(std::move(t));
        }
    }
    double best = 0;
    for (const Paragraph* p : paragraphs) {
        for (const auto& a : norm) {
            best = std::max(best, best_span(*p, a).score);
            if (best >= 1.0) {
                return best;
            }
        }
    }
    return best;
}

inline double coverage_rouge(const Paragraph& paragraph, std::span<const std::string> answers) {
    const Paragraph* one[] = {&paragraph};
    return coverage_rouge(std::span<const Paragraph* const>(one), answers);
}

/// True iff some answer's normalized tokens occur contiguously in the
/// paragraph's normalized tokens.
inline bool contains_answer(const Paragraph& paragraph, std::span<const std::string> answers) {
    const auto& terms = paragraph.terms.tokens;
    for (const auto& a : answers) {
        const auto norm = normalize_eval(a);
        if (norm.empty()) {
            continue;
        }
        if (std::search(terms.begin(), terms.end(), norm.begin(), norm.end()) != terms.end()) {
            return true;
        }
    }
    return false;
}

inline bool contains_answer(std::span<const Paragraph* const> paragraphs, std::span<const std::string> answers) {
    return std::any_of(paragraphs.begin(), paragraphs.end(),
                       [&](const Paragraph* p) { return contains_answer(*p, answers); });
}

inline std::string weak_label_record(const WeakSpanLabel& l, std::size_t answer_index) {
    return "{\"question_id\":" + jsonl::quote(l.question_id) + ",\"book_id\":" + jsonl::quote(l.book_id) +
           ",\"answer_index\":" + std::to_string(answer_index) + ",\"para_index\":" + std::to_string(l.para_index) +
           ",\"start\":" + std::to_string(l.start) + ",\"end\":" + std::to_string(l.end) +
           ",\"score\":" + jsonl::fixed(l.score, 6) + "}";
}

}  // namespace bookqa
