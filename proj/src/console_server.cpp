#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "etw/console.hpp"
#include "etw/error.hpp"

namespace etw::console {

namespace {

constexpr std::size_t kMaxLine = 1 << 20;

void send_all(int fd, const std::string& text) {
    std::size_t off = 0;
    while (off < text.size()) {
        const ssize_t n = ::send(fd, text.data() + off, text.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return;
        }
        off += static_cast<std::size_t>(n);
    }
}

}  // namespace

ConsoleServer::ConsoleServer(ConsoleSession& session, int port) : session_(&session) {
    if (port < 0 || port > 65535) fail(ErrorCode::Argument, "port must be 0..65535");
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) fail(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 4) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listen_fd_);
        fail(ErrorCode::Io, "cannot listen on 127.0.0.1:" + std::to_string(port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

ConsoleServer::~ConsoleServer() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void ConsoleServer::run() {
    int client = -1;
    std::string buffer;
    while (!stop_.load()) {
        pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {client, POLLIN, 0}};
        const int n = ::poll(fds, client >= 0 ? 2 : 1, 50);
        if (n < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (fds[0].revents & POLLIN) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd >= 0) {
                if (client >= 0) {
                    send_all(fd, R"({"ok":false,"type":"BUSY","message":"another operator is connected"})" "\n");
                    ::close(fd);
                } else {
                    client = fd;
                    buffer.clear();
                }
            }
        }
        if (client >= 0 && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) {
            char chunk[4096];
            const ssize_t got = ::recv(client, chunk, sizeof chunk, 0);
            if (got <= 0) {
                if (got < 0 && errno == EINTR) continue;
                ::close(client);
                client = -1;
                continue;
            }
            buffer.append(chunk, static_cast<std::size_t>(got));
            std::size_t pos;
            while ((pos = buffer.find('\n')) != std::string::npos) {
                std::string line = buffer.substr(0, pos);
                buffer.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (line.find_first_not_of(" \t") == std::string::npos) continue;
                send_all(client, session_->handle_line(line) + "\n");
            }
            if (buffer.size() > kMaxLine) {
                send_all(client, R"({"ok":false,"type":"ERROR","code":"Parse","message":"line too long"})" "\n");
                ::close(client);
                client = -1;
            }
        }
    }
    if (client >= 0) ::close(client);
    session_->shutdown();
}

}  // namespace etw::console
