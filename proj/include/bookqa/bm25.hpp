#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"

namespace bookqa {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t para_index;
    std::uint32_t tf;
};

struct ScoredParagraph {
    std::size_t para_index;
    double score;

    friend bool operator==(const ScoredParagraph&, const ScoredParagraph&) = default;
};

enum class QueryMode { question_only, question_plus_answer };

inline std::string_view to_string(QueryMode m) { return m == QueryMode::question_only ? "q" : "qa"; }

struct RetrievalResult {
    std::string question_id;
    QueryMode mode = QueryMode::question_only;
    std::vector<ScoredParagraph> ranked;
};

/// Okapi BM25 over the paragraphs of one book. Immutable once built.
///
/// IDF uses the non-negative form ln(1 + (N - df + 0.5) / (df + 0.5)), so a
/// term present in every paragraph still scores slightly above zero.
class Bm25Index {
  public:
    static Bm25Index build(std::span<const Paragraph> paragraphs, Bm25Params params = {}) {
        require(!paragraphs.empty(), "cannot index an empty paragraph list");
        Bm25Index index;
        index.m_book_id = paragraphs.front().book_id;
        index.m_params = params;
        index.m_doc_len.reserve(paragraphs.size());
        double total = 0;
        for (std::size_t i = 0; i < paragraphs.size(); ++i) {
            const auto& p = paragraphs[i];
            require(p.book_id == index.m_book_id,
                    "mixed book_ids in one index: '" + index.m_book_id + "' and '" + p.book_id + "'");
            require(p.para_index == i, "paragraph indices must be dense and ordered");
            std::unordered_map<std::string_view, std::uint32_t> tf;
            for (const auto& t : p.terms) {
                ++tf[t];
            }
            for (const auto& t : p.terms) {
                auto it = tf.find(t);
                if (it->second != 0) {
                    index.m_postings[t].push_back({static_cast<std::uint32_t>(i), it->second});
                    it->second = 0;
                }
            }
            index.m_doc_len.push_back(static_cast<std::uint32_t>(p.terms.size()));
            total += static_cast<double>(p.terms.size());
        }
        index.m_avg_doc_len = total / static_cast<double>(paragraphs.size());
        return index;
    }

    const std::string& book_id() const noexcept { return m_book_id; }
    const Bm25Params& params() const noexcept { return m_params; }
    std::size_t n_docs() const noexcept { return m_doc_len.size(); }
    double avg_doc_len() const noexcept { return m_avg_doc_len; }
    std::uint32_t doc_len(std::size_t para_index) const { return m_doc_len.at(para_index); }
    std::size_t vocabulary_size() const noexcept { return m_postings.size(); }

    std::span<const Posting> postings(const std::string& term) const {
        const auto it = m_postings.find(term);
        return it == m_postings.end() ? std::span<const Posting>{} : std::span<const Posting>(it->second);
    }

    /// Terms in lexicographic order (for serialization).
    std::vector<std::string> terms() const {
        std::vector<std::string> out;
        out.reserve(m_postings.size());
        for (const auto& [t, _] : m_postings) {
            out.push_back(t);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    double idf(std::size_t df) const {
        const auto n = static_cast<double>(n_docs());
        const auto d = static_cast<double>(df);
        return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
    }

    /// Contribution of one (term, paragraph) pair with the given statistics.
    double term_weight(std::size_t df, std::uint32_t tf, std::uint32_t dl) const {
        if (tf == 0 || m_avg_doc_len <= 0) {
            return 0.0;
        }
        const double f = tf;
        const double norm = m_params.k1 * (1.0 - m_params.b + m_params.b * dl / m_avg_doc_len);
        return idf(df) * f * (m_params.k1 + 1.0) / (f + norm);
    }

    double score(const TokenSeq& query, std::size_t para_index) const {
        if (para_index >= n_docs()) {
            fail(ErrorKind::invalid_argument, "para_index " + std::to_string(para_index) + " not in index");
        }
        double total = 0;
        for (const auto& term : unique_terms(query)) {
            const auto list = postings(term);
            const auto it = std::lower_bound(list.begin(), list.end(), para_index,
                                             [](const Posting& p, std::size_t i) { return p.para_index < i; });
            if (it != list.end() && it->para_index == para_index) {
                total += term_weight(list.size(), it->tf, m_doc_len[para_index]);
            }
        }
        return total;
    }

    /// Top-k paragraphs by descending score, ties by ascending para_index.
    /// Paragraphs scoring zero are never returned.
    std::vector<ScoredParagraph> retrieve(const TokenSeq& query, std::size_t k) const {
        require(k >= 1, "retrieve: k must be >= 1");
        std::vector<double> acc(n_docs(), 0.0);
        for (const auto& term : unique_terms(query)) {
            const auto list = postings(term);
            for (const auto& p : list) {
                acc[p.para_index] += term_weight(list.size(), p.tf, m_doc_len[p.para_index]);
            }
        }
        std::vector<ScoredParagraph> hits;
        for (std::size_t i = 0; i < acc.size(); ++i) {
            if (acc[i] > 0) {
                hits.push_back({i, acc[i]});
            }
        }
        const auto better = [](const ScoredParagraph& a, const ScoredParagraph& b) {
            return a.score != b.score ? a.score > b.score : a.para_index < b.para_index;
        };
        const std::size_t keep = std::min(k, hits.size());
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
        hits.resize(keep);
        return hits;
    }

    /// Query terms after normalize_eval, deduplicated in first-occurrence order.
    static std::vector<std::string> unique_terms(const TokenSeq& query) {
        const TokenSeq norm = normalize_tokens(query);
        std::vector<std::string> out;
        std::unordered_set<std::string> seen;
        for (const auto& t : norm) {
            if (seen.insert(t).second) {
                out.push_back(t);
            }
        }
        return out;
    }

    /// Rebuilds an index from serialized parts, re-validating the invariants.
    static Bm25Index from_parts(std::string book_id, Bm25Params params,
                                std::unordered_map<std::string, std::vector<Posting>> postings,
                                std::vector<std::uint32_t> doc_len) {
        require(!doc_len.empty(), "index without paragraphs");
        Bm25Index index;
        index.m_book_id = std::move(book_id);
        index.m_params = params;
        double total = 0;
        for (auto dl : doc_len) {
            total += dl;
        }
        for (auto& [term, list] : postings) {
            for (std::size_t i = 0; i < list.size(); ++i) {
                require(list[i].para_index < doc_len.size() && list[i].tf >= 1,
                        "posting out of range for term '" + term + "'");
                require(i == 0 || list[i - 1].para_index < list[i].para_index,
                        "postings not sorted for term '" + term + "'");
            }
        }
        index.m_postings = std::move(postings);
        index.m_doc_len = std::move(doc_len);
        index.m_avg_doc_len = total / static_cast<double>(index.m_doc_len.size());
        return index;
    }

  private:
    Bm25Index() = default;

    std::string m_book_id;
    Bm25Params m_params;
    std::unordered_map<std::string, std::vector<Posting>> m_postings;
    std::vector<std::uint32_t> m_doc_len;
    double m_avg_doc_len = 0;
};

inline Bm25Index build_index(std::span<const Paragraph> paragraphs, Bm25Params params = {}) {
    return Bm25Index::build(paragraphs, params);
}

/// Question tokens followed by every reference answer's tokens (normalized),
/// duplicates kept.
inline TokenSeq oracle_query(const QaExample& q) {
    require(!q.answers.empty(), "oracle_query: question has no answers");
    TokenSeq out = normalize_tokens(q.question);
    out.offsets.clear();
    for (const auto& a : q.answers) {
        for (auto& t : normalize_eval(a).tokens) {
            out.tokens.push_back(std::move(t));
        }
    }
    return out;
}

inline TokenSeq query_for(const QaExample& q, QueryMode mode) {
    return mode == QueryMode::question_only ? q.question : oracle_query(q);
}

inline RetrievalResult retrieve(const Bm25Index& index, const QaExample& q, QueryMode mode, std::size_t k) {
    return RetrievalResult{q.question_id, mode, index.retrieve(query_for(q, mode), k)};
}

/// One index per line: {book_id, k1, b, doc_len: [...], postings: {term: [[para_index, tf], ...]}}.
inline std::string index_record(const Bm25Index& index) {
    jsonl::json postings = jsonl::json::object();
    for (const auto& term : index.terms()) {
        auto& list = postings[term];
        list = jsonl::json::array();
        for (const auto& p : index.postings(term)) {
            list.push_back({p.para_index, p.tf});
        }
    }
    std::vector<std::uint32_t> lens;
    for (std::size_t i = 0; i < index.n_docs(); ++i) {
        lens.push_back(index.doc_len(i));
    }
    jsonl::json rec = {{"book_id", index.book_id()},
                       {"k1", index.params().k1},
                       {"b", index.params().b},
                       {"doc_len", lens},
                       {"postings", std::move(postings)}};
    return rec.dump();
}

inline std::map<std::string, Bm25Index> load_indexes(const std::string& path) {
    std::map<std::string, Bm25Index> out;
    jsonl::for_each_record(path, [&](const jsonl::json& rec, const jsonl::RecordRef& ref) {
        auto book = jsonl::get_string(rec, ref, "book_id");
        const Bm25Params params{jsonl::get_number(rec, ref, "k1"), jsonl::get_number(rec, ref, "b")};
        std::vector<std::uint32_t> lens;
        std::unordered_map<std::string, std::vector<Posting>> postings;
        try {
            lens = rec.at("doc_len").get<std::vector<std::uint32_t>>();
            for (const auto& [term, list] : rec.at("postings").items()) {
                auto& dst = postings[term];
                for (const auto& pair : list) {
                    dst.push_back({pair.at(0).get<std::uint32_t>(), pair.at(1).get<std::uint32_t>()});
                }
            }
            out.emplace(book, Bm25Index::from_parts(book, params, std::move(postings), std::move(lens)));
        } catch (const jsonl::json::exception& e) {
            ref.fail("postings", e.what());
        } catch (const Error& e) {
            ref.fail("postings", e.what());
        }
    });
    return out;
}

/// {question_id, mode, ranked: [{para_index, score}]} with 6-decimal scores.
inline std::string retrieval_record(const RetrievalResult& r) {
    std::string out = "{\"question_id\":" + jsonl::quote(r.question_id) + ",\"mode\":\"" +
                      std::string(to_string(r.mode)) + "\",\"ranked\":[";
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
        if (i) {
            out += ",";
        }
        out += "{\"para_index\":" + std::to_string(r.ranked[i].para_index) +
               ",\"score\":" + jsonl::fixed(r.ranked[i].score, 6) + "}";
    }
    out += "]}";
    return out;
}

}  // namespace bookqa
