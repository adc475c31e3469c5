#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "jsonl.hpp"
#include "text.hpp"

namespace bookqa {

inline constexpr std::size_t kDefaultChunkWidth = 200;

/// A full book or movie script. Never empty.
class Book {
  public:
    Book(std::string book_id, std::string title, TokenSeq tokens)
        : m_book_id(std::move(book_id)), m_title(std::move(title)), m_tokens(std::move(tokens)) {
        if (m_book_id.empty()) {
            fail(ErrorKind::data, "book with empty book_id");
        }
        if (m_tokens.empty()) {
            fail(ErrorKind::data, "book '" + m_book_id + "' has no tokens");
        }
    }

    static Book from_text(std::string book_id, std::string title, std::string_view text) {
        return Book(std::move(book_id), std::move(title), tokenize(text));
    }

    const std::string& book_id() const noexcept { return m_book_id; }
    const std::string& title() const noexcept { return m_title; }
    const TokenSeq& tokens() const noexcept { return m_tokens; }

  private:
    std::string m_book_id;
    std::string m_title;
    TokenSeq m_tokens;
};

/// Retrieval unit: a window of at most `width` consecutive book tokens.
/// `terms` is the normalize_eval view used for indexing and span search.
struct Paragraph {
    std::string book_id;
    std::size_t para_index = 0;
    TokenSeq tokens;
    TokenSeq terms;

    Paragraph() = default;
    Paragraph(std::string book, std::size_t index, TokenSeq toks)
        : book_id(std::move(book)), para_index(index), tokens(std::move(toks)),
          terms(normalize_tokens(tokens)) {}
};

struct QaExample {
    std::string question_id;
    std::string book_id;
    std::string question_text;
    TokenSeq question;
    std::vector<std::string> answers;

    QaExample() = default;
    QaExample(std::string qid, std::string book, std::string question_str, std::vector<std::string> refs)
        : question_id(std::move(qid)), book_id(std::move(book)), question_text(std::move(question_str)),
          question(tokenize(question_text)), answers(std::move(refs)) {
        const bool has_answer = std::any_of(answers.begin(), answers.end(),
                                            [](const std::string& a) { return !normalize_eval(a).empty(); });
        if (!has_answer) {
            fail(ErrorKind::data, "question '" + question_id + "' has no non-empty answer");
        }
    }
};

/// Cuts a book into non-overlapping windows of `width` tokens; the final
/// window keeps whatever remains, so the partition is lossless.
inline std::vector<Paragraph> chunk_book(const Book& book, std::size_t width = kDefaultChunkWidth) {
    require(width >= 1, "chunk width must be >= 1");
    const auto& src = book.tokens();
    std::vector<Paragraph> out;
    out.reserve((src.size() + width - 1) / width);
    for (std::size_t begin = 0; begin < src.size(); begin += width) {
        const std::size_t end = std::min(src.size(), begin + width);
        TokenSeq window;
        window.tokens.assign(src.tokens.begin() + begin, src.tokens.begin() + end);
        if (src.has_offsets()) {
            window.offsets.assign(src.offsets.begin() + begin, src.offsets.begin() + end);
        }
        out.emplace_back(book.book_id(), out.size(), std::move(window));
    }
    return out;
}

/// Paragraphs grouped by book, ordered by book_id.
using ParagraphStore = std::map<std::string, std::vector<Paragraph>>;

struct Corpus {
    std::vector<Book> books;
    std::vector<QaExample> questions;
};

namespace detail {

inline std::vector<Book> load_books_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Book> books;
    for (const auto& f : files) {
        const std::string text = jsonl::read_file(f.string());
        if (!is_valid_utf8(text)) {
            fail(ErrorKind::schema, f.string() + ": invalid UTF-8");
        }
        const std::string id = f.stem().string();
        books.push_back(Book::from_text(id, id, text));
    }
    return books;
}

inline std::vector<Book> load_books_jsonl(const std::string& path) {
    std::vector<Book> books;
    jsonl::for_each_record(path, [&](const jsonl::json& rec, const jsonl::RecordRef& ref) {
        auto id = jsonl::get_string(rec, ref, "book_id");
        auto title = jsonl::get_string(rec, ref, "title");
        const auto text = jsonl::get_string(rec, ref, "text");
        if (id.empty()) {
            ref.fail("book_id", "empty");
        }
        auto tokens = tokenize(text);
        if (tokens.empty()) {
            ref.fail("text", "book has no tokens");
        }
        books.emplace_back(std::move(id), std::move(title), std::move(tokens));
    });
    return books;
}

}  // namespace detail

/// Books come from a newline-delimited file of {book_id, title, text} or a
/// directory of <book_id>.txt files.
inline std::vector<Book> load_books(const std::string& path) {
    std::vector<Book> books = std::filesystem::is_directory(path) ? detail::load_books_dir(path)
                                                                  : detail::load_books_jsonl(path);
    std::set<std::string> seen;
    for (const auto& b : books) {
        if (!seen.insert(b.book_id()).second) {
            fail(ErrorKind::data, path + ": duplicate book_id '" + b.book_id() + "'");
        }
    }
    return books;
}

inline std::vector<QaExample> load_questions(const std::string& path) {
    std::vector<QaExample> out;
    std::set<std::string> seen;
    jsonl::for_each_record(path, [&](const jsonl::json& rec, const jsonl::RecordRef& ref) {
        auto qid = jsonl::get_string(rec, ref, "question_id");
        auto book = jsonl::get_string(rec, ref, "book_id");
        auto question = jsonl::get_string(rec, ref, "question");
        const auto it = rec.find("answers");
        if (it == rec.end() || !it->is_array() || it->empty()) {
            ref.fail("answers", "expected a non-empty array of strings");
        }
        std::vector<std::string> answers;
        for (const auto& a : *it) {
            if (!a.is_string()) {
                ref.fail("answers", "expected a non-empty array of strings");
            }
            answers.push_back(a.get<std::string>());
        }
        if (!seen.insert(qid).second) {
            ref.fail("question_id", "duplicate '" + qid + "'");
        }
        const bool has_answer = std::any_of(answers.begin(), answers.end(),
                                            [](const std::string& a) { return !normalize_eval(a).empty(); });
        if (!has_answer) {
            ref.fail("answers", "no non-empty answer");
        }
        out.emplace_back(std::move(qid), std::move(book), std::move(question), std::move(answers));
    });
    return out;
}

/// Every question must reference a known book; all orphans are reported at once.
inline void check_references(const std::set<std::string>& book_ids, const std::vector<QaExample>& questions,
                             std::string_view qa_path) {
    std::vector<std::string> orphans;
    for (const auto& q : questions) {
        if (!book_ids.contains(q.book_id)) {
            orphans.push_back(q.question_id + " -> " + q.book_id);
        }
    }
    if (!orphans.empty()) {
        std::string msg = std::string(qa_path) + ": " + std::to_string(orphans.size()) +
                          " question(s) reference unknown books:";
        for (const auto& o : orphans) {
            msg += " " + o;
        }
        fail(ErrorKind::data, msg);
    }
}

inline Corpus load_corpus(const std::string& books_path, const std::string& qa_path) {
    Corpus corpus{load_books(books_path), load_questions(qa_path)};
    std::set<std::string> ids;
    for (const auto& b : corpus.books) {
        ids.insert(b.book_id());
    }
    check_references(ids, corpus.questions, qa_path);
    return corpus;
}

inline ParagraphStore chunk_corpus(const std::vector<Book>& books, std::size_t width = kDefaultChunkWidth) {
    ParagraphStore store;
    for (const auto& b : books) {
        store.emplace(b.book_id(), chunk_book(b, width));
    }
    return store;
}

/// Paragraph file records: {book_id, para_index, text}, text being the
/// space-joined paragraph tokens. Indices must be dense per book.
inline ParagraphStore load_paragraphs(const std::string& path) {
    ParagraphStore store;
    jsonl::for_each_record(path, [&](const jsonl::json& rec, const jsonl::RecordRef& ref) {
        auto book = jsonl::get_string(rec, ref, "book_id");
        const auto index = jsonl::get_index(rec, ref, "para_index");
        const auto text = jsonl::get_string(rec, ref, "text");
        auto& paras = store[book];
        if (index != paras.size()) {
            ref.fail("para_index", "expected " + std::to_string(paras.size()) + " (indices must be dense and ordered)");
        }
        paras.emplace_back(std::move(book), index, tokenize(text));
    });
    return store;
}

inline std::string paragraph_record(const Paragraph& p) {
    return "{\"book_id\":" + jsonl::quote(p.book_id) + ",\"para_index\":" + std::to_string(p.para_index) +
           ",\"text\":" + jsonl::quote(join(p.tokens)) + "}";
}

}  // namespace bookqa
