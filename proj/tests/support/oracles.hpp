#pragma once

// Brute-force reference implementations. Nothing here calls into the
// production headers' algorithms; inputs are plain token vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

inline std::string show(const Seq& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += (i ? " " : "") + s[i];
    }
    return out + "]";
}

inline bool is_subsequence(const Seq& small, const Seq& big) {
    std::size_t j = 0;
    for (std::size_t i = 0; i < big.size() && j < small.size(); ++i) {
        if (big[i] == small[j]) {
            ++j;
        }
    }
    return j == small.size();
}

/// Enumerates every subsequence of the shorter side (2^n, n <= ~16).
inline std::size_t lcs(const Seq& a, const Seq& b) {
    const Seq& s = a.size() <= b.size() ? a : b;
    const Seq& l = a.size() <= b.size() ? b : a;
    std::size_t best = 0;
    const std::uint32_t n = static_cast<std::uint32_t>(s.size());
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        const auto bits = static_cast<std::size_t>(__builtin_popcount(mask));
        if (bits <= best) {
            continue;
        }
        Seq sub;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                sub.push_back(s[i]);
            }
        }
        if (is_subsequence(sub, l)) {
            best = bits;
        }
    }
    return best;
}

inline double rouge_l(const Seq& cand, const Seq& ref, double beta = 1.2) {
    if (cand.empty() || ref.empty()) {
        return 0.0;
    }
    const double m = static_cast<double>(lcs(cand, ref));
    if (m == 0) {
        return 0.0;
    }
    const double p = m / static_cast<double>(cand.size());
    const double r = m / static_cast<double>(ref.size());
    return (1 + beta * beta) * p * r / (r + beta * beta * p);
}

struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0;
};

/// Every window of length min(|answer|, |paragraph|); first maximum wins.
inline Span best_span(const Seq& paragraph, const Seq& answer) {
    Span best;
    if (paragraph.empty()) {
        return best;
    }
    const std::size_t w = std::min(answer.size(), paragraph.size());
    best.end = w;
    bool first = true;
    for (std::size_t s = 0; s + w <= paragraph.size(); ++s) {
        const Seq window(paragraph.begin() + static_cast<std::ptrdiff_t>(s),
                         paragraph.begin() + static_cast<std::ptrdiff_t>(s + w));
        const double score = rouge_l(window, answer);
        if (first || score > best.score) {
            best = {s, s + w, score};
            first = false;
        }
    }
    return best;
}

/// BM25 straight from raw counts.
inline double bm25(const std::vector<Seq>& docs, const Seq& query, std::size_t doc, double k1 = 1.2,
                   double b = 0.75) {
    double total_len = 0;
    for (const auto& d : docs) {
        total_len += static_cast<double>(d.size());
    }
    const double avgdl = total_len / static_cast<double>(docs.size());
    Seq seen;
    double score = 0;
    for (const auto& term : query) {
        if (std::find(seen.begin(), seen.end(), term) != seen.end()) {
            continue;
        }
        seen.push_back(term);
        double df = 0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) {
                df += 1;
            }
        }
        const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
        if (tf == 0) {
            continue;
        }
        const double n = static_cast<double>(docs.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double dl = static_cast<double>(docs[doc].size());
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
    }
    return score;
}

struct Alignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

namespace detail {

inline std::size_t count_chunks(std::vector<std::pair<std::size_t, std::size_t>> links) {
    std::sort(links.begin(), links.end());
    std::size_t chunks = 0;
    for (std::size_t k = 0; k < links.size(); ++k) {
        if (k == 0 || links[k].first != links[k - 1].first + 1 || links[k].second != links[k - 1].second + 1) {
            ++chunks;
        }
    }
    return chunks;
}

// All ways to pick `m` items from `pool` (combinations).
inline void combinations(const std::vector<std::size_t>& pool, std::size_t m, std::size_t from,
                         std::vector<std::size_t>& cur, std::vector<std::vector<std::size_t>>& out) {
    if (cur.size() == m) {
        out.push_back(cur);
        return;
    }
    for (std::size_t i = from; i < pool.size(); ++i) {
        cur.push_back(pool[i]);
        combinations(pool, m, i + 1, cur, out);
        cur.pop_back();
    }
}

}  // namespace detail

/// Enumerates every maximum exact-match alignment (per word type: choose
/// which candidate and reference occurrences pair up, and how) and returns
/// the one with the fewest chunks.
inline Alignment meteor_align(const Seq& cand, const Seq& ref) {
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_type;
    for (std::size_t i = 0; i < cand.size(); ++i) {
        by_type[cand[i]].first.push_back(i);
    }
    for (std::size_t j = 0; j < ref.size(); ++j) {
        by_type[ref[j]].second.push_back(j);
    }
    // Per type, all candidate link sets.
    std::vector<std::vector<std::vector<std::pair<std::size_t, std::size_t>>>> options;
    std::size_t matches = 0;
    for (const auto& [_, pos] : by_type) {
        const auto& [cp, rp] = pos;
        const std::size_t m = std::min(cp.size(), rp.size());
        if (m == 0) {
            continue;
        }
        matches += m;
        std::vector<std::vector<std::size_t>> cs;
        std::vector<std::vector<std::size_t>> rs;
        std::vector<std::size_t> cur;
        detail::combinations(cp, m, 0, cur, cs);
        detail::combinations(rp, m, 0, cur, rs);
        std::vector<std::vector<std::pair<std::size_t, std::size_t>>> type_options;
        for (const auto& c : cs) {
            for (auto r : rs) {
                std::sort(r.begin(), r.end());
                do {
                    std::vector<std::pair<std::size_t, std::size_t>> links;
                    for (std::size_t k = 0; k < m; ++k) {
                        links.emplace_back(c[k], r[k]);
                    }
                    type_options.push_back(std::move(links));
                } while (std::next_permutation(r.begin(), r.end()));
            }
        }
        options.push_back(std::move(type_options));
    }
    Alignment best{matches, matches};
    if (matches == 0) {
        best.chunks = 0;
        return best;
    }
    std::vector<std::size_t> pick(options.size(), 0);
    while (true) {
        std::vector<std::pair<std::size_t, std::size_t>> links;
        for (std::size_t t = 0; t < options.size(); ++t) {
            const auto& o = options[t][pick[t]];
            links.insert(links.end(), o.begin(), o.end());
        }
        best.chunks = std::min(best.chunks, detail::count_chunks(links));
        std::size_t t = 0;
        while (t < options.size() && ++pick[t] == options[t].size()) {
            pick[t] = 0;
            ++t;
        }
        if (t == options.size()) {
            break;
        }
    }
    return best;
}

inline double meteor(const Seq& cand, const Seq& ref) {
    const auto a = meteor_align(cand, ref);
    if (a.matches == 0) {
        return 0.0;
    }
    const double m = static_cast<double>(a.matches);
    const double p = m / static_cast<double>(cand.size());
    const double r = m / static_cast<double>(ref.size());
    const double fmean = 10 * p * r / (r + 9 * p);
    return fmean * (1 - 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3));
}

/// n-gram multiset of a sequence, keyed by the space-joined gram.
inline std::map<std::string, std::size_t> ngrams(const Seq& s, std::size_t n) {
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
        std::string key;
        for (std::size_t k = 0; k < n; ++k) {
            key += (k ? " " : "") + s[i + k];
        }
        ++out[key];
    }
    return out;
}

/// Sentence BLEU by the textbook formula (used on one-sentence corpora).
inline double sentence_bleu(const Seq& cand, const std::vector<Seq>& refs, std::size_t max_n) {
    if (cand.empty()) {
        return 0.0;
    }
    double log_p = 0;
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto c = ngrams(cand, n);
        std::size_t total = 0;
        std::size_t clipped = 0;
        for (const auto& [g, k] : c) {
            total += k;
            std::size_t max_ref = 0;
            for (const auto& r : refs) {
                const auto rc = ngrams(r, n);
                if (auto it = rc.find(g); it != rc.end()) {
                    max_ref = std::max(max_ref, it->second);
                }
            }
            clipped += std::min(k, max_ref);
        }
        if (clipped == 0 || total == 0) {
            return 0.0;
        }
        log_p += std::log(static_cast<double>(clipped) / static_cast<double>(total));
    }
    std::size_t r_len = refs.front().size();
    for (const auto& r : refs) {
        const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
        if (d(r.size()) < d(r_len) || (d(r.size()) == d(r_len) && r.size() < r_len)) {
            r_len = r.size();
        }
    }
    const double c = static_cast<double>(cand.size());
    const double bp = c > static_cast<double>(r_len) ? 1.0 : std::exp(1.0 - static_cast<double>(r_len) / c);
    return bp * std::exp(log_p / static_cast<double>(max_n));
}

}  // namespace oracle
