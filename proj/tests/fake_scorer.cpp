// Test double for the external scorer protocol.
//   fake_scorer [mode]
// modes: serial (default), concurrent, no-handshake, old-version,
//        wrong-count, crash-after-1, garbage

#include <iostream>
#include <set>
#include <string>

#include <bookqa/reranker.hpp>

int main(int argc, char** argv) {
    const std::string mode = argc > 1 ? argv[1] : "serial";
    std::ios::sync_with_stdio(false);
    if (mode == "no-handshake") {
        std::cout << "hello\n" << std::flush;
        return 0;
    }
    const int version = mode == "old-version" ? 0 : bookqa::kProtocolVersion;
    std::cout << R"({"protocol_version":)" << version << R"(,"concurrent":)"
              << (mode == "concurrent" ? "true" : "false") << "}\n"
              << std::flush;

    std::string line;
    int served = 0;
    while (std::getline(std::cin, line)) {
        if (mode == "crash-after-1" && served == 1) {
            return 3;
        }
        const auto req = bookqa::request_from_line(line);
        if (mode == "garbage") {
            std::cout << "{not json\n" << std::flush;
            continue;
        }
        // overlap between question and candidate terms
        const auto q = bookqa::normalize_eval(req.question).tokens;
        const std::set<std::string> qs(q.begin(), q.end());
        bookqa::RerankResponse resp{req.question_id, {}};
        for (const auto& c : req.candidates) {
            double s = 0;
            for (const auto& t : bookqa::normalize_eval(c.text).tokens) {
                s += qs.count(t);
            }
            resp.scores.push_back(s);
        }
        if (mode == "wrong-count") {
            resp.scores.push_back(0);
        }
        std::cout << bookqa::response_to_line(resp) << "\n" << std::flush;
        ++served;
    }
    return 0;
}
