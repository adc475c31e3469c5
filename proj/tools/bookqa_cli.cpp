// bookqa: stage-oriented command line for the retrieval, supervision and
// evaluation pipeline. Every artifact is written next to a <file>.meta.json
// sidecar that records the run configuration and input digests.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <bookqa/bookqa.hpp>
#include <bookqa/exec_reranker.hpp>

namespace fs = std::filesystem;
using bookqa::ErrorKind;
using bookqa::jsonl::json;

namespace {

constexpr int kExitUsage = 2;

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return 3;
    case ErrorKind::io: return 4;
    case ErrorKind::schema: return 5;
    case ErrorKind::data: return 6;
    case ErrorKind::protocol: return 7;
    }
    return 1;
}

std::string hex_sha256(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        bookqa::fail(ErrorKind::io, "sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

// A directory of books is digested over its sorted *.txt names and contents.
std::string digest_path(const std::string& path) {
    if (!fs::is_directory(path)) {
        return hex_sha256(bookqa::jsonl::read_file(path));
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::string manifest;
    for (const auto& f : files) {
        manifest += f.filename().string() + " " + hex_sha256(bookqa::jsonl::read_file(f.string())) + "\n";
    }
    return hex_sha256(manifest);
}

/// Run configuration as echoed into sidecars. --jobs is not recorded; it
/// never changes an output.
struct RunConfig {
    std::string subcommand;
    json options = json::object();
    json inputs = json::object();

    void input(const std::string& role, const std::string& path) {
        if (path.empty()) {
            return;
        }
        inputs[role] = {{"path", path}, {"sha256", digest_path(path)}};
    }

    std::string sidecar(const std::string& artifact) const {
        json meta = {{"tool", "bookqa"},
                     {"subcommand", subcommand},
                     {"artifact", fs::path(artifact).filename().string()},
                     {"config", options},
                     {"inputs", inputs}};
        return meta.dump(2) + "\n";
    }
};

void write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            bookqa::fail(ErrorKind::io, "cannot write '" + path + "'");
        }
        out << content;
        if (!out.flush()) {
            bookqa::fail(ErrorKind::io, "write to '" + path + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        bookqa::fail(ErrorKind::io, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
    }
}

void write_artifact(const RunConfig& cfg, const std::string& path, const std::string& content) {
    write_file(path, content);
    write_file(path + ".meta.json", cfg.sidecar(path));
}

// Report-style commands print to stdout unless --out is given.
void emit_report(const RunConfig& cfg, const std::string& out, const std::string& content) {
    if (out.empty()) {
        std::cout << content << std::flush;
    } else {
        write_artifact(cfg, out, content);
    }
}

std::string lines(const std::vector<std::string>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r;
        out += '\n';
    }
    return out;
}

struct Options {
    std::size_t jobs = bookqa::default_jobs();

    // synth
    bookqa::SynthConfig synth;
    std::string out_dir;

    // shared inputs/outputs
    std::string books;
    std::string paragraphs;
    std::string index;
    std::string qa;
    std::string predictions;
    std::string out;
    std::string stats_out;

    std::size_t width = bookqa::kDefaultChunkWidth;
    bookqa::Bm25Params bm25;
    std::size_t k = 32;
    std::string mode = "q";
    std::size_t span_k = 5;

    bookqa::SupervisionConfig supervision;
    std::string negative_pool = "union";

    std::size_t top = 5;
    std::size_t candidates = 32;
    std::string reranker = "none";
    std::string format = "text";
};

json bm25_json(const Options& o) { return {{"k1", o.bm25.k1}, {"b", o.bm25.b}}; }

bookqa::QueryMode parse_mode(const std::string& m) {
    return m == "qa" ? bookqa::QueryMode::question_plus_answer : bookqa::QueryMode::question_only;
}

/// Paragraphs, questions checked against them, and one BM25 index per book
/// (loaded from --index or built in memory).
struct Workspace {
    bookqa::ParagraphStore store;
    std::vector<bookqa::QaExample> questions;
    std::map<std::string, bookqa::Bm25Index> indexes;
};

std::map<std::string, bookqa::Bm25Index> build_indexes(const bookqa::ParagraphStore& store, bookqa::Bm25Params params,
                                                       std::size_t jobs) {
    std::vector<const std::vector<bookqa::Paragraph>*> books;
    for (const auto& [_, paras] : store) {
        books.push_back(&paras);
    }
    std::vector<std::optional<bookqa::Bm25Index>> built(books.size());
    bookqa::parallel_for(books.size(), jobs, [&](std::size_t i) { built[i] = bookqa::build_index(*books[i], params); });
    std::map<std::string, bookqa::Bm25Index> out;
    for (auto& b : built) {
        auto id = b->book_id();
        out.emplace(std::move(id), std::move(*b));
    }
    return out;
}

Workspace load_workspace(const Options& o, RunConfig& cfg) {
    cfg.input("paragraphs", o.paragraphs);
    cfg.input("qa", o.qa);
    cfg.input("index", o.index);
    Workspace ws;
    ws.store = bookqa::load_paragraphs(o.paragraphs);
    ws.questions = bookqa::load_questions(o.qa);
    std::set<std::string> ids;
    for (const auto& [id, _] : ws.store) {
        ids.insert(id);
    }
    bookqa::check_references(ids, ws.questions, o.qa);
    if (o.index.empty()) {
        cfg.options["bm25"] = bm25_json(o);
        ws.indexes = build_indexes(ws.store, o.bm25, o.jobs);
        return ws;
    }
    ws.indexes = bookqa::load_indexes(o.index);
    for (const auto& [id, paras] : ws.store) {
        const auto it = ws.indexes.find(id);
        if (it == ws.indexes.end()) {
            bookqa::fail(ErrorKind::data, o.index + ": no index for book '" + id + "'");
        }
        if (it->second.n_docs() != paras.size()) {
            bookqa::fail(ErrorKind::data, o.index + ": index for '" + id + "' has " +
                                              std::to_string(it->second.n_docs()) + " paragraphs, paragraph file has " +
                                              std::to_string(paras.size()));
        }
    }
    return ws;
}

// ---------------------------------------------------------------------------

void run_synth(const Options& o) {
    RunConfig cfg{"synth"};
    const auto& s = o.synth;
    cfg.options = {{"seed", s.seed},
                   {"books", s.n_books},
                   {"paras", s.paras_per_book},
                   {"questions", s.questions_per_book},
                   {"paraphrase", s.paraphrase},
                   {"width", s.width}};
    const auto corpus = bookqa::synth_corpus(s);
    std::vector<std::string> books;
    std::vector<std::string> questions;
    std::vector<std::string> truth;
    for (const auto& b : corpus.books) {
        books.push_back(bookqa::book_record(b));
    }
    for (const auto& q : corpus.questions) {
        questions.push_back(bookqa::question_record(q));
    }
    for (const auto& t : corpus.truth) {
        truth.push_back(bookqa::truth_record(t));
    }
    std::error_code ec;
    fs::create_directories(o.out_dir, ec);
    if (ec) {
        bookqa::fail(ErrorKind::io, "cannot create '" + o.out_dir + "': " + ec.message());
    }
    const fs::path dir(o.out_dir);
    write_artifact(cfg, (dir / "books.jsonl").string(), lines(books));
    write_artifact(cfg, (dir / "qa.jsonl").string(), lines(questions));
    write_artifact(cfg, (dir / "truth.jsonl").string(), lines(truth));
}

void run_chunk(const Options& o) {
    RunConfig cfg{"chunk"};
    cfg.options = {{"width", o.width}};
    bookqa::require(o.width >= 1, "--width must be >= 1");
    cfg.input("books", o.books);
    const auto books = bookqa::load_books(o.books);
    std::vector<std::string> per_book(books.size());
    bookqa::parallel_for(books.size(), o.jobs, [&](std::size_t i) {
        for (const auto& p : bookqa::chunk_book(books[i], o.width)) {
            per_book[i] += bookqa::paragraph_record(p) + "\n";
        }
    });
    std::string content;
    for (const auto& b : per_book) {
        content += b;
    }
    write_artifact(cfg, o.out, content);
}

void run_index(const Options& o) {
    RunConfig cfg{"index"};
    cfg.options = {{"bm25", bm25_json(o)}};
    cfg.input("paragraphs", o.paragraphs);
    bookqa::require(o.bm25.k1 >= 0 && o.bm25.b >= 0 && o.bm25.b <= 1, "BM25 needs k1 >= 0 and 0 <= b <= 1");
    const auto store = bookqa::load_paragraphs(o.paragraphs);
    const auto indexes = build_indexes(store, o.bm25, o.jobs);
    std::vector<std::string> records;
    for (const auto& [_, index] : indexes) {
        records.push_back(bookqa::index_record(index));
    }
    write_artifact(cfg, o.out, lines(records));
}

void run_retrieve(const Options& o) {
    RunConfig cfg{"retrieve"};
    cfg.options = {{"k", o.k}, {"mode", o.mode}};
    bookqa::require(o.k >= 1, "--k must be >= 1");
    const auto ws = load_workspace(o, cfg);
    const auto mode = parse_mode(o.mode);
    std::vector<std::string> records(ws.questions.size());
    bookqa::parallel_for(ws.questions.size(), o.jobs, [&](std::size_t i) {
        const auto& q = ws.questions[i];
        records[i] = bookqa::retrieval_record(bookqa::retrieve(ws.indexes.at(q.book_id), q, mode, o.k));
    });
    write_artifact(cfg, o.out, lines(records));
}

void run_supervise(const Options& o) {
    RunConfig cfg{"supervise"};
    auto sc = o.supervision;
    sc.negative_pool = o.negative_pool == "book" ? bookqa::NegativePool::whole_book
                                                 : bookqa::NegativePool::union_minus_intersection;
    sc.validate();
    cfg.options = {{"k", sc.k_retrieve},
                   {"pos_threshold", sc.pos_threshold},
                   {"neg_threshold", sc.neg_threshold},
                   {"negatives_per_positive", sc.negatives_per_positive},
                   {"negative_pool", std::string(bookqa::to_string(sc.negative_pool))},
                   {"seed", sc.rng_seed}};
    const auto ws = load_workspace(o, cfg);
    std::vector<bookqa::SupervisionResult> results(ws.questions.size());
    bookqa::parallel_for(ws.questions.size(), o.jobs, [&](std::size_t i) {
        const auto& q = ws.questions[i];
        results[i] = bookqa::generate_pairs_traced(ws.indexes.at(q.book_id), ws.store.at(q.book_id), q, sc);
    });
    std::vector<std::string> records;
    std::vector<bookqa::SupervisionPair> pairs;
    std::vector<bookqa::SupervisionTrace> traces;
    for (const auto& r : results) {
        for (const auto& p : r.pairs) {
            records.push_back(bookqa::supervision_record(p));
            pairs.push_back(p);
        }
        traces.push_back(r.trace);
    }
    write_artifact(cfg, o.out, lines(records));
    if (!o.stats_out.empty()) {
        write_artifact(cfg, o.stats_out, bookqa::supervision_summary_record(bookqa::supervision_stats(pairs, traces)) + "\n");
    }
}

void run_span_oracle(const Options& o) {
    RunConfig cfg{"span-oracle"};
    cfg.options = {{"k", o.span_k}, {"mode", o.mode}};
    bookqa::require(o.span_k >= 1, "--k must be >= 1");
    const auto ws = load_workspace(o, cfg);
    const auto mode = parse_mode(o.mode);
    std::vector<std::string> per_question(ws.questions.size());
    bookqa::parallel_for(ws.questions.size(), o.jobs, [&](std::size_t i) {
        const auto& q = ws.questions[i];
        const auto& paras = ws.store.at(q.book_id);
        for (const auto& hit : bookqa::retrieve(ws.indexes.at(q.book_id), q, mode, o.span_k).ranked) {
            for (std::size_t a = 0; a < q.answers.size(); ++a) {
                const auto answer = bookqa::normalize_eval(q.answers[a]);
                if (answer.empty()) {
                    continue;
                }
                auto label = bookqa::best_span(paras[hit.para_index], answer);
                label.question_id = q.question_id;
                per_question[i] += bookqa::weak_label_record(label, a) + "\n";
            }
        }
    });
    std::string content;
    for (const auto& s : per_question) {
        content += s;
    }
    write_artifact(cfg, o.out, content);
}

void run_eval_qa(const Options& o) {
    RunConfig cfg{"eval-qa"};
    cfg.input("predictions", o.predictions);
    cfg.input("qa", o.qa);
    const auto predictions = bookqa::load_predictions(o.predictions);
    const auto gold = bookqa::load_questions(o.qa);
    const auto report = bookqa::evaluate_qa(predictions, gold, o.jobs);
    emit_report(cfg, o.out, bookqa::metric_report_record(report) + "\n");
}

std::unique_ptr<bookqa::Reranker> make_reranker(const std::string& choice, const Options& o,
                                                const std::vector<bookqa::QaExample>& questions, RunConfig& cfg) {
    if (choice == "none") {
        return std::make_unique<bookqa::IdentityReranker>();
    }
    if (choice == "lexical") {
        return std::make_unique<bookqa::LexicalReranker>(o.bm25);
    }
    if (choice == "oracle") {
        return std::make_unique<bookqa::OracleScoreReranker>(questions);
    }
    if (choice.rfind("exec:", 0) == 0 && choice.size() > 5) {
        return std::make_unique<bookqa::ExecReranker>(choice.substr(5));
    }
    if (choice.rfind("file:", 0) == 0 && choice.size() > 5) {
        cfg.input("scores", choice.substr(5));
        return std::make_unique<bookqa::FileReranker>(choice.substr(5));
    }
    bookqa::fail(ErrorKind::invalid_argument, "unknown --reranker '" + choice + "' (none|lexical|oracle|exec:CMD|file:PATH)");
}

void run_eval_ir(const Options& o) {
    RunConfig cfg{"eval-ir"};
    cfg.options = {{"top", o.top}, {"candidates", o.candidates}, {"reranker", o.reranker}, {"format", o.format}};
    bookqa::require(o.top >= 1 && o.candidates >= 1, "--top and --candidates must be >= 1");
    const auto ws = load_workspace(o, cfg);
    auto reranker = make_reranker(o.reranker, o, ws.questions, cfg);
    const auto table = bookqa::run_ablation(ws.store, ws.indexes, ws.questions, *reranker, {o.candidates, o.top}, o.jobs);
    emit_report(cfg, o.out,
                o.format == "json" ? bookqa::format_ablation_json(table) + "\n" : bookqa::format_ablation_text(table));
}

void run_export_requests(const Options& o) {
    RunConfig cfg{"export-requests"};
    cfg.options = {{"candidates", o.candidates}};
    bookqa::require(o.candidates >= 1, "--candidates must be >= 1");
    const auto ws = load_workspace(o, cfg);
    const auto base = bookqa::baseline_candidates(ws.indexes, ws.questions, o.candidates, o.jobs);
    std::vector<std::string> records(ws.questions.size());
    bookqa::parallel_for(ws.questions.size(), o.jobs, [&](std::size_t i) {
        if (!base[i].empty()) {
            const auto& q = ws.questions[i];
            records[i] = bookqa::request_to_line(bookqa::make_rerank_request(q, ws.store.at(q.book_id), base[i])) + "\n";
        }
    });
    std::string content;
    for (const auto& r : records) {
        content += r;
    }
    write_artifact(cfg, o.out, content);
}

// ---------------------------------------------------------------------------

void add_jobs(CLI::App* cmd, Options& o) {
    cmd->add_option("--jobs,-j", o.jobs, "Worker threads (default: logical cores)")->check(CLI::PositiveNumber);
}

void add_workspace(CLI::App* cmd, Options& o) {
    cmd->add_option("--paragraphs", o.paragraphs, "Paragraph file from `chunk`")->required();
    cmd->add_option("--qa", o.qa, "Question file {question_id, book_id, question, answers}")->required();
    cmd->add_option("--index", o.index, "Index file from `index` (built in memory when omitted)");
    cmd->add_option("--k1", o.bm25.k1, "BM25 k1 when building in memory")->capture_default_str();
    cmd->add_option("--b", o.bm25.b, "BM25 b when building in memory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Book-scale question answering: chunking, BM25 retrieval, distant supervision and evaluation"};
    app.require_subcommand(1);
    Options o;
    std::function<void()> action;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted answers");
    synth->add_option("--seed", o.synth.seed, "Generator seed")->capture_default_str();
    synth->add_option("--books", o.synth.n_books, "Number of books")->capture_default_str();
    synth->add_option("--paras", o.synth.paras_per_book, "Paragraphs per book")->capture_default_str();
    synth->add_option("--questions", o.synth.questions_per_book, "Questions per book")->capture_default_str();
    synth->add_flag("--paraphrase", o.synth.paraphrase, "Plant a synonym of the answer modifier");
    synth->add_option("--width", o.synth.width, "Paragraph width in tokens")->capture_default_str();
    synth->add_option("--out-dir", o.out_dir, "Directory for books.jsonl, qa.jsonl, truth.jsonl")->required();
    add_jobs(synth, o);
    synth->callback([&] { action = [&] { run_synth(o); }; });

    auto* chunk = app.add_subcommand("chunk", "Split books into fixed-width paragraphs");
    chunk->add_option("--books", o.books, "Books file {book_id, title, text} or directory of <book_id>.txt")->required();
    chunk->add_option("--width", o.width, "Tokens per paragraph")->capture_default_str();
    chunk->add_option("--out", o.out, "Paragraph file to write")->required();
    add_jobs(chunk, o);
    chunk->callback([&] { action = [&] { run_chunk(o); }; });

    auto* index = app.add_subcommand("index", "Build one BM25 index per book");
    index->add_option("--paragraphs", o.paragraphs, "Paragraph file from `chunk`")->required();
    index->add_option("--k1", o.bm25.k1, "BM25 term-frequency saturation")->capture_default_str();
    index->add_option("--b", o.bm25.b, "BM25 length normalization")->capture_default_str();
    index->add_option("--out", o.out, "Index file to write")->required();
    add_jobs(index, o);
    index->callback([&] { action = [&] { run_index(o); }; });

    auto* retrieve = app.add_subcommand("retrieve", "Top-k BM25 paragraphs per question");
    add_workspace(retrieve, o);
    retrieve->add_option("--k", o.k, "Paragraphs per question")->capture_default_str();
    retrieve->add_option("--mode", o.mode, "q: question only; qa: question plus answers")
        ->capture_default_str()
        ->check(CLI::IsMember({"q", "qa"}));
    retrieve->add_option("--out", o.out, "Retrieval file to write")->required();
    add_jobs(retrieve, o);
    retrieve->callback([&] { action = [&] { run_retrieve(o); }; });

    auto* supervise = app.add_subcommand("supervise", "Ranker training pairs from the two retrievals");
    add_workspace(supervise, o);
    supervise->add_option("--k", o.supervision.k_retrieve, "Retrieval depth for both lists")->capture_default_str();
    supervise->add_option("--pos-threshold", o.supervision.pos_threshold, "Positives need filter score above this")
        ->capture_default_str();
    supervise->add_option("--neg-threshold", o.supervision.neg_threshold, "Negatives need filter score below this")
        ->capture_default_str();
    supervise->add_option("--negatives-per-positive", o.supervision.negatives_per_positive, "Negative quota")
        ->capture_default_str();
    supervise->add_option("--negative-pool", o.negative_pool, "union: retrieved but not in both lists; book: whole book")
        ->capture_default_str()
        ->check(CLI::IsMember({"union", "book"}));
    supervise->add_option("--seed", o.supervision.rng_seed, "Negative sampling seed")->capture_default_str();
    supervise->add_option("--out", o.out, "Pair file to write")->required();
    supervise->add_option("--stats-out", o.stats_out, "Optional summary file");
    add_jobs(supervise, o);
    supervise->callback([&] { action = [&] { run_supervise(o); }; });

    auto* span = app.add_subcommand("span-oracle", "Weak span labels for the top retrieved paragraphs");
    add_workspace(span, o);
    span->add_option("--k", o.span_k, "Paragraphs labelled per question")->capture_default_str();
    span->add_option("--mode", o.mode, "Retrieval query: q or qa")->capture_default_str()->check(CLI::IsMember({"q", "qa"}));
    span->add_option("--out", o.out, "Label file to write")->required();
    add_jobs(span, o);
    span->callback([&] { action = [&] { run_span_oracle(o); }; });

    auto* eval_qa = app.add_subcommand("eval-qa", "Bleu-1/4, Meteor, Rouge-L, EM and F1 of predicted answers");
    eval_qa->add_option("--predictions", o.predictions, "Prediction file {question_id, answer}")->required();
    eval_qa->add_option("--qa", o.qa, "Gold question file")->required();
    eval_qa->add_option("--out", o.out, "Report file (stdout when omitted)");
    add_jobs(eval_qa, o);
    eval_qa->callback([&] { action = [&] { run_eval_qa(o); }; });

    auto* eval_ir = app.add_subcommand("eval-ir", "Answer coverage of BM25, reranked, upper-bound and oracle selections");
    add_workspace(eval_ir, o);
    eval_ir->add_option("--top", o.top, "Paragraphs kept per question")->capture_default_str();
    eval_ir->add_option("--candidates", o.candidates, "BM25 candidates handed to the reranker")->capture_default_str();
    eval_ir->add_option("--reranker", o.reranker, "none | lexical | oracle | exec:COMMAND | file:SCORES")
        ->capture_default_str();
    eval_ir->add_option("--format", o.format, "text or json")->capture_default_str()->check(CLI::IsMember({"text", "json"}));
    eval_ir->add_option("--out", o.out, "Report file (stdout when omitted)");
    add_jobs(eval_ir, o);
    eval_ir->callback([&] { action = [&] { run_eval_ir(o); }; });

    auto* exp = app.add_subcommand("export-requests", "Write rerank requests for offline scoring (see file:SCORES)");
    add_workspace(exp, o);
    exp->add_option("--candidates", o.candidates, "BM25 candidates per request")->capture_default_str();
    exp->add_option("--out", o.out, "Request file to write")->required();
    add_jobs(exp, o);
    exp->callback([&] { action = [&] { run_export_requests(o); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: usage: " << msg << "\n";
        return kExitUsage;
    }

    try {
        action();
    } catch (const bookqa::Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "error: " << bookqa::to_string(e.kind()) << ": " << msg << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
