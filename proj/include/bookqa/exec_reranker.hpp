#pragma once

// POSIX only: spawns an external scorer and talks to it over its stdin/stdout.

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <spawn.h>
#include <string>
#include <sys/types.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "reranker.hpp"

extern char** environ;

namespace bookqa {

/// External scorer process. It must print the handshake line
/// {"protocol_version": 1, "concurrent": bool} first, then answer each
/// request line with exactly one response line, in order. When the scorer
/// declares concurrent=true, batches are pipelined (all requests written
/// before responses are drained); otherwise one request is in flight.
class ExecReranker final : public Reranker {
  public:
    /// `command` runs through /bin/sh -c, so it may carry arguments.
    explicit ExecReranker(std::string command) : m_command(std::move(command)) {
        std::signal(SIGPIPE, SIG_IGN);  // a dead scorer must surface as an error, not kill us
        int to_child[2];
        int from_child[2];
        if (pipe2(to_child, O_CLOEXEC) != 0 || pipe2(from_child, O_CLOEXEC) != 0) {
            fail(ErrorKind::io, "pipe: " + std::string(std::strerror(errno)));
        }
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
        std::string sh = "/bin/sh";
        std::string dash_c = "-c";
        char* argv[] = {sh.data(), dash_c.data(), m_command.data(), nullptr};
        const int rc = posix_spawn(&m_pid, "/bin/sh", &actions, nullptr, argv, environ);
        posix_spawn_file_actions_destroy(&actions);
        close(to_child[0]);
        close(from_child[1]);
        m_in = to_child[1];
        m_out = from_child[0];
        if (rc != 0) {
            close(m_in);
            close(m_out);
            fail(ErrorKind::io, "cannot spawn scorer '" + m_command + "': " + std::strerror(rc));
        }
        try {
            handshake();
        } catch (...) {
            shutdown();
            throw;
        }
    }

    ExecReranker(const ExecReranker&) = delete;
    ExecReranker& operator=(const ExecReranker&) = delete;

    ~ExecReranker() override { shutdown(); }

    RerankResponse score(const RerankRequest& r) override {
        validate_request(r);
        write_line(request_to_line(r));
        auto resp = response_from_line(read_line());
        validate_response(r, resp);
        return resp;
    }

    std::vector<RerankResponse> score_batch(std::span<const RerankRequest> requests) override {
        if (!m_pipelined) {
            return Reranker::score_batch(requests);
        }
        for (const auto& r : requests) {
            validate_request(r);
        }
        std::string write_error;
        const int fd = m_in;
        std::thread writer([&, fd] {
            try {
                for (const auto& r : requests) {
                    write_all(fd, request_to_line(r));
                }
            } catch (const Error& e) {
                write_error = e.what();
            }
        });
        std::vector<RerankResponse> out;
        try {
            for (const auto& r : requests) {
                auto resp = response_from_line(read_line());
                validate_response(r, resp);
                out.push_back(std::move(resp));
            }
        } catch (...) {
            kill(m_pid, SIGTERM);  // unblocks the writer with EPIPE
            writer.join();
            shutdown();
            throw;
        }
        writer.join();
        if (!write_error.empty()) {
            fail(ErrorKind::protocol, write_error);
        }
        return out;
    }

    bool pipelined() const noexcept { return m_pipelined; }
    std::string name() const override { return "exec:" + m_command; }

  private:
    void shutdown() {
        if (m_in >= 0) {
            close(m_in);
            m_in = -1;
        }
        if (m_out >= 0) {
            close(m_out);
            m_out = -1;
        }
        if (m_pid > 0) {
            int status = 0;
            waitpid(m_pid, &status, 0);
            m_pid = -1;
        }
    }

    void handshake() {
        const auto line = read_line();
        const auto j = jsonl::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("protocol_version")) {
            fail(ErrorKind::protocol, "scorer '" + m_command + "' sent no handshake");
        }
        if (j["protocol_version"] != kProtocolVersion) {
            fail(ErrorKind::protocol, "scorer '" + m_command + "' speaks protocol " + j["protocol_version"].dump() +
                                          ", expected " + std::to_string(kProtocolVersion));
        }
        m_pipelined = j.value("concurrent", false);
    }

    void write_line(std::string line) {
        if (m_in < 0) {
            fail(ErrorKind::protocol, "scorer input already closed");
        }
        write_all(m_in, std::move(line));
    }

    void write_all(int fd, std::string line) const {
        line.push_back('\n');
        std::size_t done = 0;
        while (done < line.size()) {
            const ssize_t n = write(fd, line.data() + done, line.size() - done);
            if (n < 0) {
                if (errno == EINTR) {
                    continue;
                }
                fail(ErrorKind::protocol, "scorer '" + m_command + "' stopped reading: " + std::strerror(errno));
            }
            done += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        while (true) {
            if (const auto nl = m_buffer.find('\n'); nl != std::string::npos) {
                std::string line = m_buffer.substr(0, nl);
                m_buffer.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') {
                    line.pop_back();
                }
                return line;
            }
            char chunk[65536];
            const ssize_t n = read(m_out, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) {
                continue;
            }
            if (n <= 0) {
                fail(ErrorKind::protocol, "scorer '" + m_command + "' exited or closed its output");
            }
            m_buffer.append(chunk, static_cast<std::size_t>(n));
        }
    }

    std::string m_command;
    pid_t m_pid = -1;
    int m_in = -1;
    int m_out = -1;
    bool m_pipelined = false;
    std::string m_buffer;
};

}  // namespace bookqa
