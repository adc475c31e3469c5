#include <catch_amalgamated.hpp>

#include <set>

#include <bookqa/span_oracle.hpp>
#include <bookqa/synth.hpp>

using namespace bookqa;

TEST_CASE("synthetic corpora are a pure function of the config", "[synth]") {
    const auto a = synth_corpus({.seed = 3});
    const auto b = synth_corpus({.seed = 3});
    const auto c = synth_corpus({.seed = 4});
    REQUIRE(a.books.size() == b.books.size());
    for (std::size_t i = 0; i < a.books.size(); ++i) {
        CHECK(book_record(a.books[i]) == book_record(b.books[i]));
        CHECK(book_record(a.books[i]) != book_record(c.books[i]));
    }
    for (std::size_t i = 0; i < a.questions.size(); ++i) {
        CHECK(question_record(a.questions[i]) == question_record(b.questions[i]));
        CHECK(truth_record(a.truth[i]) == truth_record(b.truth[i]));
    }
}

TEST_CASE("filler and rare vocabularies are disjoint", "[synth]") {
    const auto& vocab = synth::distractor_vocabulary();
    CHECK(vocab.size() == synth::kVocabularySize);
    CHECK(std::set<std::string>(vocab.begin(), vocab.end()).size() == vocab.size());
    auto rng = SplitMix64(1);
    const std::set<std::string> filler(vocab.begin(), vocab.end());
    for (int i = 0; i < 2000; ++i) {
        CHECK_FALSE(filler.contains(synth::rare_word(rng)));
    }
    for (const auto& [m, s] : synth::kSynonyms) {
        CHECK_FALSE(filler.contains(std::string(m)));
        CHECK_FALSE(filler.contains(std::string(s)));
    }
}

TEST_CASE("books chunk into the configured paragraph count", "[synth]") {
    const SynthConfig cfg{.seed = 2, .n_books = 2, .paras_per_book = 7, .questions_per_book = 5, .width = 50};
    const auto c = synth_corpus(cfg);
    for (const auto& b : c.books) {
        const auto ps = chunk_book(b, cfg.width);
        CHECK(ps.size() == cfg.paras_per_book);
        for (const auto& p : ps) {
            CHECK(p.tokens.size() == cfg.width);
        }
    }
}

TEST_CASE("answers are planted where the truth says", "[synth]") {
    for (bool paraphrase : {false, true}) {
        const SynthConfig cfg{.seed = 11, .paraphrase = paraphrase};
        const auto c = synth_corpus(cfg);
        const auto store = chunk_corpus(c.books, cfg.width);
        REQUIRE(c.questions.size() == cfg.n_books * cfg.questions_per_book);
        for (std::size_t i = 0; i < c.questions.size(); ++i) {
            const auto& q = c.questions[i];
            const auto& t = c.truth[i];
            CHECK(t.question_id == q.question_id);
            const auto& p = store.at(t.book_id)[t.para_index];
            const auto& toks = p.tokens.tokens;
            REQUIRE(t.token_start + synth::kPlantLength <= toks.size());
            CHECK(toks[t.token_start + 1] == "hid");
            // the question names the planted entity and object
            CHECK_THAT(q.question_text, Catch::Matchers::ContainsSubstring(toks[t.token_start]));
            CHECK_THAT(q.question_text, Catch::Matchers::ContainsSubstring(toks[t.token_start + 3]));
            CHECK(contains_answer(p, q.answers) == !paraphrase);
        }
    }
}

TEST_CASE("synth config is validated", "[synth]") {
    CHECK_THROWS_AS(synth_corpus({.n_books = 0}), Error);
    CHECK_THROWS_AS(synth_corpus({.width = 10}), Error);
    CHECK_THROWS_AS(synth_corpus({.paras_per_book = 1, .questions_per_book = 20, .width = 32}), Error);
    CHECK_NOTHROW(synth_corpus({.paras_per_book = 1, .questions_per_book = 2, .width = 32}));
}
