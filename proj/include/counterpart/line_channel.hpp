#pragma once

// Newline-delimited JSON over a byte stream: the standard I/O of a child
// process or a TCP connection. One request line, one response line, in order.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "counterpart/errors.hpp"

namespace counterpart {

/// Where an external agent, encoder or predictor lives.
///
/// Text form: `cmd=<shell command>` or `tcp=<host>:<port>`, optionally
/// preceded by `timeout_ms=<n>;`.
struct Endpoint {
    enum class Kind { Subprocess, Tcp };

    Kind kind = Kind::Subprocess;
    std::string command;
    std::string host;
    int port = 0;
    std::chrono::milliseconds timeout{30000};

    static Endpoint parse(std::string_view text) {
        Endpoint e;
        if (text.starts_with("timeout_ms=")) {
            const auto semi = text.find(';');
            if (semi == std::string_view::npos) throw ConfigError("endpoint: timeout_ms needs a ';' separator");
            try {
                e.timeout = std::chrono::milliseconds(std::stol(std::string(text.substr(11, semi - 11))));
            } catch (const std::exception&) {
                throw ConfigError("endpoint: bad timeout in '" + std::string(text) + "'");
            }
            text.remove_prefix(semi + 1);
        }
        if (text.starts_with("cmd=")) {
            e.kind = Kind::Subprocess;
            e.command = std::string(text.substr(4));
            if (e.command.empty()) throw ConfigError("endpoint: empty command");
        } else if (text.starts_with("tcp=")) {
            e.kind = Kind::Tcp;
            const auto addr = text.substr(4);
            const auto colon = addr.rfind(':');
            if (colon == std::string_view::npos) throw ConfigError("endpoint: tcp needs host:port");
            e.host = std::string(addr.substr(0, colon));
            try {
                e.port = std::stoi(std::string(addr.substr(colon + 1)));
            } catch (const std::exception&) {
                throw ConfigError("endpoint: bad port in '" + std::string(text) + "'");
            }
        } else {
            throw ConfigError("endpoint: expected cmd=... or tcp=host:port, got '" + std::string(text) + "'");
        }
        return e;
    }

    std::string describe() const {
        return kind == Kind::Subprocess ? "cmd=" + command : "tcp=" + host + ":" + std::to_string(port);
    }
};

class LineChannel {
public:
    explicit LineChannel(const Endpoint& endpoint) : timeout_(endpoint.timeout) {
        ::signal(SIGPIPE, SIG_IGN);
        if (endpoint.kind == Endpoint::Kind::Subprocess)
            spawn(endpoint.command);
        else
            connect_tcp(endpoint.host, endpoint.port);
    }

    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;
    LineChannel(LineChannel&& o) noexcept { *this = std::move(o); }
    LineChannel& operator=(LineChannel&& o) noexcept {
        if (this != &o) {
            shutdown();
            read_fd_ = std::exchange(o.read_fd_, -1);
            write_fd_ = std::exchange(o.write_fd_, -1);
            child_ = std::exchange(o.child_, -1);
            buffer_ = std::move(o.buffer_);
            timeout_ = o.timeout_;
        }
        return *this;
    }
    ~LineChannel() { shutdown(); }

    void send_line(const std::string& line) {
        std::string data = line;
        data.push_back('\n');
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("write to peer failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() {
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        for (;;) {
            if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return line;
            }
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw TimeoutError("no reply within " + std::to_string(timeout_.count()) + " ms");
            pollfd pfd{read_fd_, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) continue;
            char chunk[65536];
            const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("read from peer failed: ") + std::strerror(errno));
            }
            if (n == 0) throw ProtocolError("peer closed the stream");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    /// One request, one response. A reply carrying "error" is a protocol error.
    nlohmann::json request(const nlohmann::json& message) {
        send_line(message.dump());
        const std::string line = read_line();
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ProtocolError("reply is not JSON: " + line.substr(0, 200));
        }
        if (!reply.is_object()) throw ProtocolError("reply is not a JSON object");
        if (reply.contains("error")) throw ProtocolError("peer error: " + reply["error"].dump());
        return reply;
    }

private:
    void spawn(const std::string& command) {
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
            throw ProtocolError(std::string("pipe failed: ") + std::strerror(errno));
        const pid_t pid = ::fork();
        if (pid < 0) throw ProtocolError(std::string("fork failed: ") + std::strerror(errno));
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
        ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        child_ = pid;
    }

    void connect_tcp(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0)
            throw ProtocolError("cannot resolve " + host);
        int fd = -1;
        for (addrinfo* p = res; p; p = p->ai_next) {
            fd = ::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(res);
        if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + std::to_string(port));
        read_fd_ = fd;
        write_fd_ = fd;
    }

    void shutdown() noexcept {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        read_fd_ = write_fd_ = -1;
        if (child_ > 0) {
            // Give the peer a moment to exit on EOF, then make sure it is gone.
            for (int i = 0; i < 50; ++i) {
                if (::waitpid(child_, nullptr, WNOHANG) == child_) {
                    child_ = -1;
                    return;
                }
                ::usleep(2000);
            }
            ::kill(child_, SIGKILL);
            ::waitpid(child_, nullptr, 0);
            child_ = -1;
        }
    }

    int read_fd_ = -1;
    int write_fd_ = -1;
    pid_t child_ = -1;
    std::string buffer_;
    std::chrono::milliseconds timeout_;
};

}  // namespace counterpart
