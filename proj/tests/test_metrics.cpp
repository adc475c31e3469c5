#include <catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include <bookqa/metrics.hpp>
#include <bookqa/rng.hpp>

#include "support/oracles.hpp"

using namespace bookqa;
using Catch::Approx;
using V = std::vector<std::string>;

namespace {

std::vector<V> all_sequences(std::size_t max_len, std::size_t alphabet) {
    std::vector<V> out = {{}};
    std::vector<V> frontier = {{}};
    const char* letters[] = {"a", "b", "c", "d"};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<V> next;
        for (const auto& s : frontier) {
            for (std::size_t c = 0; c < alphabet; ++c) {
                auto t = s;
                t.push_back(letters[c]);
                next.push_back(t);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

V random_words(SplitMix64& rng, std::size_t max_len, std::size_t alphabet) {
    V out(rng.below(max_len + 1));
    for (auto& w : out) {
        w = std::string(1, static_cast<char>('a' + rng.below(alphabet)));
    }
    return out;
}

}  // namespace

TEST_CASE("lcs examples", "[metrics]") {
    CHECK(lcs_length(V{"a", "b", "c"}, V{"b", "d", "c"}) == 2);
    CHECK(lcs_length(V{"x", "y"}, V{"x", "y"}) == 2);
    CHECK(lcs_length(V{"x", "y"}, V{}) == 0);
}

TEST_CASE("lcs equals subsequence enumeration on every short pair", "[metrics]") {
    const auto seqs = all_sequences(5, 3);
    for (const auto& a : seqs) {
        for (const auto& b : seqs) {
            if (lcs_length(a, b) != oracle::lcs(a, b)) {
                FAIL("mismatch on " << oracle::show(a) << " / " << oracle::show(b));
            }
        }
    }
}

TEST_CASE("rouge-l analytic values", "[metrics]") {
    // P = 2/3, R = 1: F = 2.44 * (2/3) / (1 + 1.44 * 2/3)
    CHECK(rouge_l(V{"the", "cat", "sat"}, V{"the", "cat"}) == Approx(0.8299319727891156).margin(1e-12));
    CHECK(rouge_l(V{"a", "b"}, V{"a", "b"}) == 1.0);
    CHECK(rouge_l(V{"a"}, V{"b"}) == 0.0);
    CHECK(rouge_l(V{}, V{"b"}) == 0.0);
    CHECK(rouge_l(V{"b"}, V{}) == 0.0);
}

TEST_CASE("bleu analytic values", "[metrics]") {
    const std::vector<TokenSeq> preds = {TokenSeq(V{"a", "b"})};
    const std::vector<std::vector<TokenSeq>> refs = {{TokenSeq(V{"a", "b", "c", "d"})}};
    // p1 = 1, BP = exp(1 - 4/2)
    CHECK(bleu_corpus(preds, refs, 1) == Approx(0.36787944117144233).margin(1e-12));

    const std::vector<TokenSeq> same = {TokenSeq(V{"x", "y", "z", "w"}), TokenSeq(V{"p", "q", "r", "s", "t"})};
    const std::vector<std::vector<TokenSeq>> same_refs = {{TokenSeq(V{"no"}), TokenSeq(V{"x", "y", "z", "w"})},
                                                          {TokenSeq(V{"p", "q", "r", "s", "t"})}};
    CHECK(bleu_corpus(same, same_refs, 4) == Approx(1.0).margin(1e-15));

    const std::vector<TokenSeq> disjoint = {TokenSeq(V{"u", "v"})};
    CHECK(bleu_corpus(disjoint, refs, 1) == 0.0);
    CHECK_THROWS_AS(bleu_corpus(disjoint, std::vector<std::vector<TokenSeq>>{}, 1), Error);
}

TEST_CASE("bleu clips counts by the best reference", "[metrics]") {
    // "the the the the" against "the cat": clipped count 1 of 4.
    const std::vector<TokenSeq> preds = {TokenSeq(V{"the", "the", "the", "the"})};
    const std::vector<std::vector<TokenSeq>> refs = {{TokenSeq(V{"the", "cat"}), TokenSeq(V{"the", "the", "x", "y"})}};
    CHECK(bleu_corpus(preds, refs, 1) == Approx(0.5).margin(1e-15));
}

TEST_CASE("single-prediction bleu equals the sentence formula", "[metrics]") {
    auto rng = SplitMix64(5);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto cand = random_words(rng, 8, 4);
        std::vector<V> refs(1 + rng.below(3));
        for (auto& r : refs) {
            r = random_words(rng, 8, 4);
            if (r.empty()) {
                r.push_back("a");
            }
        }
        std::vector<TokenSeq> ref_seqs;
        for (const auto& r : refs) {
            ref_seqs.emplace_back(r);
        }
        const std::vector<TokenSeq> preds = {TokenSeq(cand)};
        const std::vector<std::vector<TokenSeq>> all_refs = {ref_seqs};
        for (std::size_t n : {1u, 2u, 4u}) {
            INFO(oracle::show(cand) << " n=" << n);
            CHECK(bleu_corpus(preds, all_refs, n) == Approx(oracle::sentence_bleu(cand, refs, n)).margin(1e-12));
        }
    }
}

TEST_CASE("meteor analytic values", "[metrics]") {
    // one chunk of two matches: penalty 0.5 * (1/2)^3
    CHECK(meteor_exact(V{"the", "cat"}, V{"the", "cat"}) == Approx(0.9375).margin(1e-12));
    // swapped order: two chunks, penalty 0.5
    CHECK(meteor_exact(V{"b", "a"}, V{"a", "b"}) == Approx(0.5).margin(1e-12));
    CHECK(meteor_exact(V{"x"}, V{"y"}) == 0.0);
    CHECK(meteor_exact(V{}, V{"y"}) == 0.0);
}

TEST_CASE("meteor prefers the alignment with fewer chunks", "[metrics]") {
    // Matching the second "a" keeps "a b" contiguous.
    const auto al = meteor_align(V{"a", "b"}, V{"a", "x", "a", "b"});
    CHECK(al.matches == 2);
    CHECK(al.chunks == 1);
    CHECK(al.exact);
}

TEST_CASE("metric maxima on identical inputs", "[metrics]") {
    auto rng = SplitMix64(17);
    for (int trial = 0; trial < 500; ++trial) {
        auto x = random_words(rng, 10, 6);
        if (x.empty()) {
            x.push_back("q");
        }
        CHECK(rouge_l(x, x) == Approx(1.0).margin(1e-15));
        const double m = static_cast<double>(x.size());
        CHECK(meteor_exact(x, x) == Approx(1.0 - 0.5 * std::pow(1.0 / m, 3)).margin(1e-12));
    }
}

TEST_CASE("meteor falls back to a greedy alignment on huge inputs", "[metrics]") {
    V cand;
    V ref;
    for (int i = 0; i < 120; ++i) {
        cand.push_back(std::string(1, static_cast<char>('a' + i % 3)));
        ref.push_back(std::string(1, static_cast<char>('a' + (i * 2) % 3)));
    }
    const auto al = meteor_align(cand, ref);
    CHECK_FALSE(al.exact);
    CHECK(al.matches == 120);
    const double s = meteor_exact(cand, ref);
    CHECK(s >= 0.0);
    CHECK(s < 1.0);
}

TEST_CASE("exact match and F1 examples", "[metrics]") {
    const std::vector<std::string> france = {"france", "France."};
    CHECK(exact_match("France", france));
    const std::vector<std::string> tb = {"Tuberculosis", "Tuberculosis"};
    CHECK_FALSE(exact_match("Lung cancer", tb));
    const std::vector<std::string> brother = {"Brother"};
    CHECK(exact_match("the brother", brother));

    CHECK(token_f1("brothers", std::vector<std::string>{"brother"}) == 0.0);
    // after article removal: [boarding, school, in, france] vs [france]
    CHECK(token_f1("a boarding school in france", std::vector<std::string>{"france"}) == Approx(0.4).margin(1e-12));
    CHECK(token_f1("The Cat", std::vector<std::string>{"cat"}) == 1.0);
}

TEST_CASE("exact match implies F1 of one", "[metrics]") {
    const V pieces = {"a", "the", "an", "cat", "Cat", ".", ",", "dog", "  ", "!", "x"};
    auto rng = SplitMix64(23);
    for (int trial = 0; trial < 5000; ++trial) {
        std::string p;
        std::string r;
        for (auto n = rng.below(5); n > 0; --n) {
            p += rng.pick(pieces) + " ";
        }
        for (auto n = rng.below(5); n > 0; --n) {
            r += rng.pick(pieces) + " ";
        }
        const std::vector<std::string> refs = {r};
        const double f1 = token_f1(p, refs);
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
        if (exact_match(p, refs)) {
            INFO("[" << p << "] vs [" << r << "]");
            CHECK(f1 == 1.0);
        }
    }
}

TEST_CASE("evaluate_qa on perfect and empty predictions", "[metrics]") {
    const std::vector<QaExample> gold = {{"q1", "b", "?", {"the old mill", "mill"}}, {"q2", "b", "?", {"Paris"}}};
    const std::map<std::string, std::string> perfect = {{"q1", "the old mill"}, {"q2", "Paris"}};
    const auto r = evaluate_qa(perfect, gold);
    CHECK(r.em == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK(r.rouge_l == 1.0);
    CHECK(r.bleu1 == Approx(1.0).margin(1e-15));
    CHECK(r.n_questions == 2);

    const std::map<std::string, std::string> empty = {{"q1", ""}, {"q2", ""}};
    const auto z = evaluate_qa(empty, gold);
    CHECK(z.em == 0.0);
    CHECK(z.f1 == 0.0);
    CHECK(z.rouge_l == 0.0);
    CHECK(z.bleu1 == 0.0);
}

TEST_CASE("evaluate_qa lists missing and extra predictions", "[metrics]") {
    const std::vector<QaExample> gold = {{"q1", "b", "?", {"x"}}, {"q2", "b", "?", {"y"}}};
    const std::map<std::string, std::string> preds = {{"q1", "x"}, {"q9", "z"}};
    try {
        evaluate_qa(preds, gold);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("missing=q2"));
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("extra=q9"));
    }
}

TEST_CASE("evaluate_qa reproduces the hand-computed golden report", "[metrics]") {
    const std::string dir = BOOKQA_FIXTURES "/eval_qa";
    const auto gold = load_questions(dir + "/qa.jsonl");
    const auto preds = load_predictions(dir + "/predictions.jsonl");
    std::ifstream in(dir + "/expected.json");
    std::string expected;
    std::getline(in, expected);
    CHECK(metric_report_record(evaluate_qa(preds, gold)) == expected);
    CHECK(metric_report_record(evaluate_qa(preds, gold, 4)) == expected);
}

TEST_CASE("metric report percentages", "[metrics]") {
    MetricReport r{1.0, 0.0, 0.123456, 0.5, 1.0 / 3.0, 2.0 / 3.0, 3};
    CHECK(metric_report_record(r) ==
          R"({"bleu1":100.00,"bleu4":0.00,"meteor":12.35,"rouge_l":50.00,"em":33.33,"f1":66.67,"n_questions":3})");
}
