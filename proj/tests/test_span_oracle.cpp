#include <catch_amalgamated.hpp>

#include <bookqa/rng.hpp>
#include <bookqa/span_oracle.hpp>

#include "support/oracles.hpp"

using namespace bookqa;
using Catch::Approx;
using V = std::vector<std::string>;

namespace {

Paragraph para(std::string_view text, std::size_t index = 0) { return Paragraph("b", index, tokenize(text)); }

V random_words(SplitMix64& rng, std::size_t min_len, std::size_t max_len, std::size_t alphabet) {
    V out(min_len + rng.below(max_len - min_len + 1));
    for (auto& w : out) {
        w = std::string(1, static_cast<char>('a' + rng.below(alphabet)));
    }
    return out;
}

}  // namespace

TEST_CASE("verbatim answers score one at their earliest occurrence", "[span_oracle]") {
    const auto p = para("x y the old mill z the old mill");
    const auto l = best_span(p, "The old mill");
    CHECK(l.score == 1.0);
    CHECK(l.start == 2);
    CHECK(l.end == 5);
}

TEST_CASE("an answer sharing nothing gets the first window with score zero", "[span_oracle]") {
    const auto l = best_span(para("a b c d"), "x y");
    CHECK(l.score == 0.0);
    CHECK(l.start == 0);
    CHECK(l.end == 2);
}

TEST_CASE("the window shrinks to a short paragraph", "[span_oracle]") {
    const auto l = best_span(para("old mill"), "the old grey mill");
    CHECK(l.start == 0);
    CHECK(l.end == 2);
    CHECK(l.score == Approx(oracle::rouge_l({"old", "mill"}, {"the", "old", "grey", "mill"})).margin(1e-15));
}

TEST_CASE("spans index the normalized terms", "[span_oracle]") {
    // punctuation tokens are not terms: "," and "." are skipped
    const auto p = para("Well , the mill . burned");
    const auto l = best_span(p, "mill burned");
    CHECK(l.score == 1.0);
    CHECK(std::vector<std::string>(p.terms.tokens.begin() + static_cast<std::ptrdiff_t>(l.start),
                                   p.terms.tokens.begin() + static_cast<std::ptrdiff_t>(l.end)) ==
          V{"mill", "burned"});
}

TEST_CASE("empty normalized answers are rejected", "[span_oracle]") {
    CHECK_THROWS_AS(best_span(para("a b"), "?!"), Error);
}

TEST_CASE("best_span matches window enumeration", "[span_oracle]") {
    auto rng = SplitMix64(31);
    for (int trial = 0; trial < 500; ++trial) {
        const auto p_words = random_words(rng, 1, 60, 4);
        const auto answer = random_words(rng, 1, 8, 5);
        const Paragraph p("b", 0, TokenSeq(p_words));
        const auto got = best_span(p, TokenSeq(answer));
        const auto want = oracle::best_span(p_words, answer);
        INFO(oracle::show(p_words) << " / " << oracle::show(answer));
        CHECK(got.start == want.start);
        CHECK(got.end == want.end);
        CHECK(got.score == Approx(want.score).margin(1e-12));
        CHECK(got.end - got.start == std::min(answer.size(), p_words.size()));
    }
}

TEST_CASE("extending a paragraph never lowers its best score", "[span_oracle]") {
    auto rng = SplitMix64(37);
    for (int trial = 0; trial < 300; ++trial) {
        auto words = random_words(rng, 1, 30, 4);
        const auto answer = random_words(rng, 1, 6, 4);
        const double before = best_span(Paragraph("b", 0, TokenSeq(words)), TokenSeq(answer)).score;
        const auto extra = random_words(rng, 0, 10, 4);
        words.insert(words.end(), extra.begin(), extra.end());
        // only meaningful once the window width is fixed by the answer
        if (words.size() - extra.size() >= answer.size()) {
            CHECK(best_span(Paragraph("b", 0, TokenSeq(words)), TokenSeq(answer)).score >= before);
        }
    }
}

TEST_CASE("contains_answer normalizes and requires contiguity", "[span_oracle]") {
    const std::vector<std::string> france = {"france"};
    CHECK(contains_answer(para("She went to France."), france));
    const std::vector<std::string> two = {"old mill"};
    CHECK_FALSE(contains_answer(para("the old grey mill"), two));
    CHECK(contains_answer(para("the Old  Mill ,"), two));
}

TEST_CASE("containment implies a perfect best span", "[span_oracle]") {
    auto rng = SplitMix64(41);
    for (int trial = 0; trial < 500; ++trial) {
        const auto words = random_words(rng, 1, 20, 3);
        const auto answer = random_words(rng, 1, 3, 3);
        std::string joined;
        for (const auto& a : answer) {
            joined += a + " ";
        }
        const Paragraph p("b", 0, TokenSeq(words));
        const std::vector<std::string> answers = {joined};
        if (contains_answer(p, answers)) {
            CHECK(best_span(p, TokenSeq(answer)).score == 1.0);
            CHECK(coverage_rouge(p, answers) == 1.0);
        }
    }
}

TEST_CASE("coverage is the maximum over paragraphs and answers", "[span_oracle]") {
    auto rng = SplitMix64(43);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Paragraph> ps;
        std::vector<V> raw;
        for (auto n = 1 + rng.below(4); n > 0; --n) {
            raw.push_back(random_words(rng, 1, 15, 4));
            ps.emplace_back("b", ps.size(), TokenSeq(raw.back()));
        }
        std::vector<std::string> answers;
        std::vector<V> answer_words;
        for (auto n = 1 + rng.below(2); n > 0; --n) {
            answer_words.push_back(random_words(rng, 1, 4, 4));
            std::string s;
            for (const auto& w : answer_words.back()) {
                s += w + " ";
            }
            answers.push_back(s);
        }
        double want = 0;
        for (const auto& r : raw) {
            for (const auto& a : answer_words) {
                want = std::max(want, oracle::best_span(r, a).score);
            }
        }
        std::vector<const Paragraph*> ptrs;
        for (const auto& p : ps) {
            ptrs.push_back(&p);
        }
        CHECK(coverage_rouge(ptrs, answers) == Approx(want).margin(1e-12));
    }
}

TEST_CASE("weak label records", "[span_oracle]") {
    WeakSpanLabel l{"q1", "b", 4, 2, 5, 2.0 / 3.0};
    CHECK(weak_label_record(l, 1) ==
          R"({"question_id":"q1","book_id":"b","answer_index":1,"para_index":4,"start":2,"end":5,"score":0.666667})");
}
