#include "echoia/service.hpp"

#include <cstring>
#include <string>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

namespace echoia {

TcpServer::TcpServer(ControlServer& server, std::uint16_t port)
    : server_(server), port_(port) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        throw Error("TcpServer: socket() failed");
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port_);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error("TcpServer: bind failed on port " + std::to_string(port_));
    }
    if (port_ == 0) {
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw Error("TcpServer: listen failed");
    }
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void TcpServer::stop() {
    if (!running_.exchange(false)) {
        return;
    }
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    std::lock_guard lock(workers_mu_);
    for (auto& t : workers_) {
        if (t.joinable()) {
            t.join();
        }
    }
    workers_.clear();
}

void TcpServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) {
                break;
            }
            continue;
        }
        std::lock_guard lock(workers_mu_);
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void TcpServer::serve_connection(int fd) {
    ConnectionState conn;
    std::string pending;
    char buf[4096];
    while (running_ && !conn.closed) {
        const ssize_t got = ::recv(fd, buf, sizeof(buf), 0);
        if (got <= 0) {
            break;
        }
        pending.append(buf, static_cast<std::size_t>(got));
        std::size_t nl;
        while (!conn.closed && (nl = pending.find('\n')) != std::string::npos) {
            const std::string line = pending.substr(0, nl);
            pending.erase(0, nl + 1);
            if (line.empty()) {
                continue;
            }
            for (const auto& out : server_.handle_line(conn, line)) {
                std::string framed = out + "\n";
                std::size_t sent = 0;
                while (sent < framed.size()) {
                    const ssize_t n = ::send(fd, framed.data() + sent, framed.size() - sent, 0);
                    if (n <= 0) {
                        conn.closed = true;
                        break;
                    }
                    sent += static_cast<std::size_t>(n);
                }
            }
        }
    }
    ::close(fd);
}

} // namespace echoia
