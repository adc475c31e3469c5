#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace bookqa {

/// Seeded synthetic corpus with planted answers, for desk-scale checks of
/// the retrieval and supervision pipeline.
///
/// Each book is paras_per_book * width tokens of filler drawn from a closed
/// pseudo-word vocabulary (consonant-vowel triples over "bdklmnprst") mixed
/// with ".", "the" and "a", so chunking at `width` reproduces the paragraph
/// boundaries exactly and most paragraphs share a few query terms. Each
/// question plants one sentence
///     <Entity> hid the <object> in a <modifier> <name> .
/// inside one paragraph and asks "Where did <Entity> hide the <object> ?"
/// with answers "<modifier> <name>" and "a <modifier> <name>". Entity, object
/// and name are rare pseudo-words (syllables over "fghvwyz") unique within
/// the book. With paraphrase on, the planted modifier is replaced by its
/// synonym. Entities and objects are also scattered into a few decoy
/// paragraphs so question-only retrieval has competition.
struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t n_books = 3;
    std::size_t paras_per_book = 40;
    std::size_t questions_per_book = 10;
    bool paraphrase = false;
    std::size_t width = kDefaultChunkWidth;
};

/// Hidden ground truth: where the answer sentence was planted.
struct SynthTruth {
    std::string question_id;
    std::string book_id;
    std::size_t para_index = 0;
    std::size_t token_start = 0;  // within the paragraph
};

struct SynthCorpus {
    std::vector<Book> books;
    std::vector<QaExample> questions;
    std::vector<SynthTruth> truth;
};

namespace synth {

inline constexpr std::size_t kSlotWidth = 16;
inline constexpr std::size_t kPlantLength = 9;
inline constexpr std::size_t kVocabularySize = 500;

inline constexpr std::array<std::pair<std::string_view, std::string_view>, 16> kSynonyms = {{
    {"quiet", "calm"},      {"large", "huge"},      {"small", "tiny"},       {"old", "ancient"},
    {"dark", "gloomy"},     {"cold", "chilly"},     {"bright", "shiny"},     {"narrow", "slim"},
    {"hidden", "secret"},   {"distant", "faraway"}, {"wooden", "timber"},    {"golden", "gilded"},
    {"empty", "vacant"},    {"crowded", "packed"},  {"broken", "shattered"}, {"green", "verdant"},
}};

/// Function words used by plants and questions.
inline constexpr std::array<std::string_view, 8> kFrameWords = {"hid", "the", "in", "a", "where", "did", "hide", "?"};

inline std::string syllable_word(SplitMix64& rng, std::string_view consonants, std::string_view vowels) {
    std::string w;
    for (int s = 0; s < 3; ++s) {
        w.push_back(consonants[rng.below(consonants.size())]);
        w.push_back(vowels[rng.below(vowels.size())]);
    }
    return w;
}

/// Closed filler vocabulary, identical for every seed.
inline const std::vector<std::string>& distractor_vocabulary() {
    static const std::vector<std::string> vocab = [] {
        SplitMix64 rng(0xD157AC7ULL);
        std::set<std::string> seen;
        std::vector<std::string> out;
        while (out.size() < kVocabularySize) {
            auto w = syllable_word(rng, "bdklmnprst", "aeiou");
            if (seen.insert(w).second) {
                out.push_back(std::move(w));
            }
        }
        return out;
    }();
    return vocab;
}

inline std::string rare_word(SplitMix64& rng) { return syllable_word(rng, "fghvwyz", "aeiou"); }

inline std::string capitalize(std::string w) {
    if (!w.empty() && w[0] >= 'a' && w[0] <= 'z') {
        w[0] = static_cast<char>(w[0] - 32);
    }
    return w;
}

}  // namespace synth

inline SynthCorpus synth_corpus(const SynthConfig& cfg) {
    require(cfg.n_books >= 1 && cfg.paras_per_book >= 1 && cfg.questions_per_book >= 1,
            "synth: all counts must be >= 1");
    require(cfg.width >= synth::kSlotWidth, "synth: width must be >= " + std::to_string(synth::kSlotWidth));
    const std::size_t slots = cfg.width / synth::kSlotWidth;
    require(cfg.questions_per_book <= cfg.paras_per_book * slots,
            "synth: at most " + std::to_string(slots) + " questions per paragraph");
    require(cfg.questions_per_book * 3 <= 20000, "synth: too many questions per book");

    const auto& vocab = synth::distractor_vocabulary();
    SynthCorpus out;
    for (std::size_t b = 0; b < cfg.n_books; ++b) {
        const std::string book_id = "s" + std::to_string(cfg.seed) + "-b" + std::to_string(b);
        auto rng = stream_for(cfg.seed, book_id);

        const std::size_t total = cfg.paras_per_book * cfg.width;
        std::vector<std::string> tokens(total);
        std::vector<bool> reserved(total, false);
        for (auto& t : tokens) {
            const auto roll = rng.below(100);
            t = roll < 10 ? "." : roll < 15 ? "the" : roll < 18 ? "a" : rng.pick(vocab);
        }

        std::vector<std::size_t> order(cfg.paras_per_book);
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        rng.shuffle(order);

        std::set<std::string> used_rare;
        const auto fresh_rare = [&] {
            while (true) {
                auto w = synth::rare_word(rng);
                if (used_rare.insert(w).second) {
                    return w;
                }
            }
        };

        struct Decoy {
            std::string word;
            std::size_t plant_para;
            int copies;
        };
        std::vector<Decoy> decoys;
        for (std::size_t q = 0; q < cfg.questions_per_book; ++q) {
            const std::string entity = synth::capitalize(fresh_rare());
            const std::string object = fresh_rare();
            const std::string name = fresh_rare();
            const auto& [modifier, synonym] = synth::kSynonyms[rng.below(synth::kSynonyms.size())];
            const std::size_t para = order[q % cfg.paras_per_book];
            const std::size_t slot = q / cfg.paras_per_book;
            const std::size_t jitter = rng.below(synth::kSlotWidth - synth::kPlantLength + 1);
            const std::size_t start = slot * synth::kSlotWidth + jitter;
            const std::array<std::string, synth::kPlantLength> plant = {
                entity, "hid", "the", object, "in", "a", std::string(cfg.paraphrase ? synonym : modifier), name, "."};
            for (std::size_t k = 0; k < plant.size(); ++k) {
                tokens[para * cfg.width + start + k] = plant[k];
                reserved[para * cfg.width + start + k] = true;
            }
            const std::string qid = book_id + "-q" + std::to_string(q);
            const std::string mod(modifier);
            out.questions.emplace_back(qid, book_id, "Where did " + entity + " hide the " + object + " ?",
                                       std::vector<std::string>{mod + " " + name, "a " + mod + " " + name});
            out.truth.push_back({qid, book_id, para, start});
            decoys.push_back({entity, para, 2});
            decoys.push_back({object, para, 1});
        }

        // Decoys go into unreserved filler positions of other paragraphs.
        for (const auto& d : decoys) {
            if (cfg.paras_per_book < 2) {
                break;
            }
            for (int c = 0; c < d.copies; ++c) {
                for (int attempt = 0; attempt < 64; ++attempt) {
                    const std::size_t para = rng.below(cfg.paras_per_book);
                    const std::size_t pos = para * cfg.width + rng.below(cfg.width);
                    if (para != d.plant_para && !reserved[pos]) {
                        tokens[pos] = d.word;
                        reserved[pos] = true;
                        break;
                    }
                }
            }
        }

        TokenSeq seq(std::move(tokens));
        out.books.emplace_back(book_id, "Synthetic book " + std::to_string(b), std::move(seq));
    }
    return out;
}

inline std::string book_record(const Book& b) {
    return "{\"book_id\":" + jsonl::quote(b.book_id()) + ",\"title\":" + jsonl::quote(b.title()) +
           ",\"text\":" + jsonl::quote(join(b.tokens())) + "}";
}

inline std::string question_record(const QaExample& q) {
    std::string answers = "[";
    for (std::size_t i = 0; i < q.answers.size(); ++i) {
        answers += (i ? "," : "") + jsonl::quote(q.answers[i]);
    }
    answers += "]";
    return "{\"question_id\":" + jsonl::quote(q.question_id) + ",\"book_id\":" + jsonl::quote(q.book_id) +
           ",\"question\":" + jsonl::quote(q.question_text) + ",\"answers\":" + answers + "}";
}

inline std::string truth_record(const SynthTruth& t) {
    return "{\"question_id\":" + jsonl::quote(t.question_id) + ",\"book_id\":" + jsonl::quote(t.book_id) +
           ",\"para_index\":" + std::to_string(t.para_index) + ",\"token_start\":" + std::to_string(t.token_start) + "}";
}

}  // namespace bookqa
