#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bm25.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "jsonl.hpp"
#include "span_oracle.hpp"

namespace bookqa {

inline constexpr int kProtocolVersion = 1;

struct RerankCandidate {
    std::size_t para_index = 0;
    std::string text;

    friend bool operator==(const RerankCandidate&, const RerankCandidate&) = default;
};

struct RerankRequest {
    std::string question_id;
    std::string question;
    std::vector<RerankCandidate> candidates;

    friend bool operator==(const RerankRequest&, const RerankRequest&) = default;
};

struct RerankResponse {
    std::string question_id;
    std::vector<double> scores;  // aligned with RerankRequest::candidates

    friend bool operator==(const RerankResponse&, const RerankResponse&) = default;
};

// ---------------------------------------------------------------------------
// Wire format: one JSON object per line.

inline std::string request_to_line(const RerankRequest& r) {
    jsonl::json cands = jsonl::json::array();
    for (const auto& c : r.candidates) {
        cands.push_back({{"para_index", c.para_index}, {"text", c.text}});
    }
    return jsonl::json{{"question_id", r.question_id}, {"question", r.question}, {"candidates", std::move(cands)}}
        .dump();
}

inline std::string response_to_line(const RerankResponse& r) {
    return jsonl::json{{"question_id", r.question_id}, {"scores", r.scores}}.dump();
}

inline void validate_request(const RerankRequest& r) {
    if (r.candidates.empty()) {
        fail(ErrorKind::protocol, "request '" + r.question_id + "' has no candidates");
    }
    std::set<std::size_t> seen;
    for (const auto& c : r.candidates) {
        if (!seen.insert(c.para_index).second) {
            fail(ErrorKind::protocol, "request '" + r.question_id + "' repeats para_index " +
                                          std::to_string(c.para_index));
        }
    }
}

inline RerankRequest request_from_line(std::string_view line) {
    const auto j = jsonl::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        fail(ErrorKind::protocol, "rerank request is not a JSON object");
    }
    RerankRequest r;
    try {
        r.question_id = j.at("question_id").get<std::string>();
        r.question = j.at("question").get<std::string>();
        for (const auto& c : j.at("candidates")) {
            r.candidates.push_back({c.at("para_index").get<std::size_t>(), c.at("text").get<std::string>()});
        }
    } catch (const jsonl::json::exception& e) {
        fail(ErrorKind::protocol, std::string("malformed rerank request: ") + e.what());
    }
    validate_request(r);
    return r;
}

inline RerankResponse response_from_line(std::string_view line) {
    const auto j = jsonl::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        fail(ErrorKind::protocol, "rerank response is not a JSON object: " + std::string(line.substr(0, 120)));
    }
    RerankResponse r;
    try {
        r.question_id = j.at("question_id").get<std::string>();
        for (const auto& s : j.at("scores")) {
            if (!s.is_number()) {
                fail(ErrorKind::protocol, "response '" + r.question_id + "' has a non-numeric score");
            }
            r.scores.push_back(s.get<double>());
        }
    } catch (const jsonl::json::exception& e) {
        fail(ErrorKind::protocol, std::string("malformed rerank response: ") + e.what());
    }
    return r;
}

inline void validate_response(const RerankRequest& req, const RerankResponse& resp) {
    if (resp.question_id != req.question_id) {
        fail(ErrorKind::protocol,
             "response for '" + resp.question_id + "' does not match request '" + req.question_id + "'");
    }
    if (resp.scores.size() != req.candidates.size()) {
        fail(ErrorKind::protocol, "response '" + resp.question_id + "' has " + std::to_string(resp.scores.size()) +
                                      " scores for " + std::to_string(req.candidates.size()) + " candidates");
    }
    for (double s : resp.scores) {
        if (!std::isfinite(s)) {
            fail(ErrorKind::protocol, "response '" + resp.question_id + "' has a non-finite score");
        }
    }
}

/// Candidates sorted by descending score; equal scores keep request order.
inline std::vector<RerankCandidate> rerank(const RerankRequest& req, const RerankResponse& resp) {
    validate_request(req);
    validate_response(req, resp);
    std::vector<std::size_t> order(req.candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return resp.scores[a] > resp.scores[b]; });
    std::vector<RerankCandidate> out;
    out.reserve(order.size());
    for (auto i : order) {
        out.push_back(req.candidates[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scorers

class Reranker {
  public:
    virtual ~Reranker() = default;

    virtual RerankResponse score(const RerankRequest& request) = 0;

    /// Scores a batch in order. External scorers override this to pipeline.
    virtual std::vector<RerankResponse> score_batch(std::span<const RerankRequest> requests) {
        std::vector<RerankResponse> out;
        out.reserve(requests.size());
        for (const auto& r : requests) {
            out.push_back(score(r));
        }
        return out;
    }

    /// Whether score() may be called from several threads at once.
    virtual bool concurrent_safe() const { return false; }

    virtual std::string name() const = 0;
};

/// Scores every candidate equally, so rerank() returns the upstream order.
class IdentityReranker final : public Reranker {
  public:
    RerankResponse score(const RerankRequest& r) override {
        return {r.question_id, std::vector<double>(r.candidates.size(), 0.0)};
    }
    bool concurrent_safe() const override { return true; }
    std::string name() const override { return "none"; }
};

/// BM25 of the question against each candidate, with document statistics
/// taken over the candidate set only.
class LexicalReranker final : public Reranker {
  public:
    explicit LexicalReranker(Bm25Params params = {}) : m_params(params) {}

    RerankResponse score(const RerankRequest& r) override {
        validate_request(r);
        std::vector<Paragraph> micro;
        micro.reserve(r.candidates.size());
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            micro.emplace_back("candidates", i, tokenize(r.candidates[i].text));
        }
        const auto index = Bm25Index::build(micro, m_params);
        const auto query = tokenize(r.question);
        RerankResponse resp{r.question_id, {}};
        for (std::size_t i = 0; i < micro.size(); ++i) {
            resp.scores.push_back(index.score(query, i));
        }
        return resp;
    }
    bool concurrent_safe() const override { return true; }
    std::string name() const override { return "lexical"; }

  private:
    Bm25Params m_params;
};

/// Scores candidates by their answer coverage (best-span Rouge-L). Needs the
/// gold answers, so it is an upper-bound diagnostic rather than a ranker.
class OracleScoreReranker final : public Reranker {
  public:
    explicit OracleScoreReranker(std::span<const QaExample> questions) {
        for (const auto& q : questions) {
            m_answers.emplace(q.question_id, q.answers);
        }
    }

    RerankResponse score(const RerankRequest& r) override {
        const auto it = m_answers.find(r.question_id);
        if (it == m_answers.end()) {
            fail(ErrorKind::protocol, "oracle scorer has no answers for '" + r.question_id + "'");
        }
        RerankResponse resp{r.question_id, {}};
        for (std::size_t i = 0; i < r.candidates.size(); ++i) {
            const Paragraph p("candidate", i, tokenize(r.candidates[i].text));
            resp.scores.push_back(coverage_rouge(p, it->second));
        }
        return resp;
    }
    bool concurrent_safe() const override { return true; }
    std::string name() const override { return "oracle"; }

  private:
    std::map<std::string, std::vector<std::string>> m_answers;
};

/// File-exchange mode: scores computed offline (e.g. batch GPU scoring of a
/// dumped requests file) and read back as response lines.
class FileReranker final : public Reranker {
  public:
    explicit FileReranker(const std::string& path) : m_path(path) {
        const std::string content = jsonl::read_file(path);
        std::size_t start = 0;
        std::size_t line_no = 0;
        while (start < content.size()) {
            std::size_t end = content.find('\n', start);
            if (end == std::string::npos) {
                end = content.size();
            }
            ++line_no;
            std::string_view line(content.data() + start, end - start);
            if (!line.empty() && line.back() == '\r') {
                line.remove_suffix(1);
            }
            if (line.find_first_not_of(" \t") != std::string_view::npos) {
                auto resp = response_from_line(line);
                const auto qid = resp.question_id;
                if (!m_responses.emplace(qid, std::move(resp)).second) {
                    fail(ErrorKind::protocol, path + ":" + std::to_string(line_no) + ": duplicate response '" + qid + "'");
                }
            }
            start = end + 1;
        }
    }

    RerankResponse score(const RerankRequest& r) override {
        const auto it = m_responses.find(r.question_id);
        if (it == m_responses.end()) {
            fail(ErrorKind::protocol, m_path + ": no scores for '" + r.question_id + "'");
        }
        return it->second;
    }
    bool concurrent_safe() const override { return true; }
    std::string name() const override { return "file:" + m_path; }

  private:
    std::string m_path;
    std::map<std::string, RerankResponse> m_responses;
};

}  // namespace bookqa
