#include "edl/tcp_transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <stdexcept>

namespace edl {

namespace {

constexpr uint8_t kHelloKind = 0xFF;

bool write_all(int fd, const void* data, size_t n) {
  const auto* p = static_cast<const uint8_t*>(data);
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w <= 0) {
      if (w < 0 && errno == EINTR) continue;
      return false;
    }
    p += w;
    n -= static_cast<size_t>(w);
  }
  return true;
}

bool read_all(int fd, void* data, size_t n) {
  auto* p = static_cast<uint8_t*>(data);
  while (n > 0) {
    ssize_t r = ::recv(fd, p, n, 0);
    if (r <= 0) {
      if (r < 0 && errno == EINTR) continue;
      return false;
    }
    p += r;
    n -= static_cast<size_t>(r);
  }
  return true;
}

bool write_frame(int fd, uint8_t kind, const uint8_t* payload, size_t len) {
  uint32_t body = static_cast<uint32_t>(len + 1);
  uint8_t hdr[5];
  hdr[0] = static_cast<uint8_t>(body >> 24);
  hdr[1] = static_cast<uint8_t>(body >> 16);
  hdr[2] = static_cast<uint8_t>(body >> 8);
  hdr[3] = static_cast<uint8_t>(body);
  hdr[4] = kind;
  if (!write_all(fd, hdr, sizeof hdr)) return false;
  return len == 0 || write_all(fd, payload, len);
}

bool read_frame(int fd, uint8_t& kind, std::vector<uint8_t>& payload, size_t max_payload) {
  uint8_t hdr[4];
  if (!read_all(fd, hdr, sizeof hdr)) return false;
  uint32_t body = (uint32_t(hdr[0]) << 24) | (uint32_t(hdr[1]) << 16) | (uint32_t(hdr[2]) << 8) |
                  uint32_t(hdr[3]);
  if (body == 0 || body - 1 > max_payload) return false;
  if (!read_all(fd, &kind, 1)) return false;
  payload.resize(body - 1);
  return payload.empty() || read_all(fd, payload.data(), payload.size());
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

TcpFabric::TcpFabric(Options opts) : opts_(std::move(opts)), next_port_(opts_.port_base) {}

TcpFabric::~TcpFabric() {
  stop_.store(true);
  std::map<std::string, std::shared_ptr<Endpoint>> eps;
  {
    std::lock_guard lk(mu_);
    eps = endpoints_;
    endpoints_.clear();
    for (auto& [key, conn] : out_) {
      if (conn.fd >= 0) ::close(conn.fd);
    }
    out_.clear();
  }
  for (auto& [id, ep] : eps) {
    {
      std::lock_guard lk(ep->mu);
      ep->closing = true;
      if (ep->listen_fd >= 0) ::shutdown(ep->listen_fd, SHUT_RDWR);
      if (ep->listen_fd >= 0) ::close(ep->listen_fd);
      ep->listen_fd = -1;
      for (int fd : ep->conn_fds) ::shutdown(fd, SHUT_RDWR);
    }
    if (ep->acceptor.joinable()) ep->acceptor.join();
    for (auto& t : ep->readers)
      if (t.joinable()) t.join();
    {
      std::lock_guard lk(ep->mu);
      for (int fd : ep->conn_fds) ::close(fd);
      ep->conn_fds.clear();
    }
    ep->box->close();
  }
}

std::shared_ptr<Mailbox> TcpFabric::attach(const std::string& id, int channels,
                                           Mailbox::Router router) {
  auto ep = std::make_shared<Endpoint>();
  ep->box = std::make_shared<Mailbox>(channels, std::move(router));

  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  ::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr);

  uint16_t port = 0;
  {
    std::lock_guard lk(mu_);
    for (uint16_t i = 0; i < opts_.port_count; ++i) {
      uint16_t candidate = static_cast<uint16_t>(opts_.port_base +
                                                 (next_port_ - opts_.port_base + i) % opts_.port_count);
      addr.sin_port = htons(candidate);
      if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0) {
        port = candidate;
        next_port_ = static_cast<uint16_t>(candidate + 1);
        break;
      }
    }
  }
  if (port == 0) {
    ::close(fd);
    throw std::runtime_error("no free port in configured range");
  }
  if (::listen(fd, 64) != 0) {
    ::close(fd);
    throw std::runtime_error("listen() failed");
  }
  ep->port = port;
  ep->listen_fd = fd;
  ep->acceptor = std::thread([this, raw = ep.get()] { acceptor_loop(raw); });

  std::lock_guard lk(mu_);
  endpoints_[id] = ep;
  return ep->box;
}

void TcpFabric::detach(const std::string& id) {
  std::shared_ptr<Endpoint> ep;
  {
    std::lock_guard lk(mu_);
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) return;
    ep = it->second;
    endpoints_.erase(it);
    for (auto it2 = out_.begin(); it2 != out_.end();) {
      if (it2->first.first == id || it2->first.second == id) {
        if (it2->second.fd >= 0) ::close(it2->second.fd);
        it2 = out_.erase(it2);
      } else {
        ++it2;
      }
    }
  }
  {
    std::lock_guard lk(ep->mu);
    ep->closing = true;
    if (ep->listen_fd >= 0) ::shutdown(ep->listen_fd, SHUT_RDWR);
    if (ep->listen_fd >= 0) ::close(ep->listen_fd);
    ep->listen_fd = -1;
    for (int fd : ep->conn_fds) ::shutdown(fd, SHUT_RDWR);
  }
  if (ep->acceptor.joinable()) ep->acceptor.join();
  for (auto& t : ep->readers)
    if (t.joinable()) t.join();
  {
    std::lock_guard lk(ep->mu);
    for (int fd : ep->conn_fds) ::close(fd);
    ep->conn_fds.clear();
  }
  ep->box->close();
}

SendStatus TcpFabric::send(const std::string& dst, Envelope env) {
  if (env.payload.size() > opts_.max_payload) return SendStatus::TooLarge;
  std::pair<std::string, std::string> key{env.sender, dst};
  int fd = -1;
  std::mutex* write_mu = nullptr;
  {
    std::lock_guard lk(mu_);
    auto it = out_.find(key);
    if (it != out_.end()) {
      fd = it->second.fd;
      write_mu = it->second.write_mu.get();
    }
  }
  if (fd < 0) {
    uint16_t port = 0;
    {
      std::lock_guard lk(mu_);
      auto it = endpoints_.find(dst);
      if (it == endpoints_.end()) return SendStatus::PeerGone;
      port = it->second->port;
    }
    int nfd = connect_to(port);
    if (nfd < 0) return SendStatus::PeerGone;
    if (!write_frame(nfd, kHelloKind, reinterpret_cast<const uint8_t*>(env.sender.data()),
                     env.sender.size())) {
      ::close(nfd);
      return SendStatus::PeerGone;
    }
    std::lock_guard lk(mu_);
    auto [it, inserted] = out_.try_emplace(key);
    if (inserted) {
      it->second.fd = nfd;
    } else {
      ::close(nfd);  // raced with another sender on the same link
    }
    fd = it->second.fd;
    write_mu = it->second.write_mu.get();
  }
  bool ok;
  {
    std::lock_guard wl(*write_mu);
    ok = write_frame(fd, static_cast<uint8_t>(env.kind), env.payload.data(), env.payload.size());
  }
  if (!ok) {
    std::lock_guard lk(mu_);
    auto it = out_.find(key);
    if (it != out_.end() && it->second.fd == fd) {
      ::close(it->second.fd);
      out_.erase(it);
    }
    return SendStatus::PeerGone;
  }
  return SendStatus::Ok;
}

bool TcpFabric::peer_known(const std::string& id) {
  std::lock_guard lk(mu_);
  return endpoints_.count(id) > 0;
}

uint16_t TcpFabric::port_of(const std::string& id) {
  std::lock_guard lk(mu_);
  auto it = endpoints_.find(id);
  return it == endpoints_.end() ? 0 : it->second->port;
}

int TcpFabric::connect_to(uint16_t port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return -1;
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  ::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return -1;
  }
  set_nodelay(fd);
  return fd;
}

void TcpFabric::acceptor_loop(Endpoint* ep) {
  for (;;) {
    int lfd;
    {
      std::lock_guard lk(ep->mu);
      if (ep->closing) return;
      lfd = ep->listen_fd;
    }
    if (lfd < 0) return;
    int fd = ::accept(lfd, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listener closed
    }
    set_nodelay(fd);
    std::lock_guard lk(ep->mu);
    if (ep->closing) {
      ::close(fd);
      return;
    }
    ep->conn_fds.push_back(fd);
    ep->readers.emplace_back([this, ep, fd] { reader_loop(ep, fd); });
  }
}

void TcpFabric::reader_loop(Endpoint* ep, int fd) {
  uint8_t kind;
  std::vector<uint8_t> payload;
  if (!read_frame(fd, kind, payload, opts_.max_payload) || kind != kHelloKind) return;
  std::string sender(payload.begin(), payload.end());
  for (;;) {
    if (stop_.load(std::memory_order_relaxed)) return;
    if (!read_frame(fd, kind, payload, opts_.max_payload)) return;
    if (kind == kHelloKind || kind > static_cast<uint8_t>(MsgKind::StopResume)) return;
    Envelope env;
    env.kind = static_cast<MsgKind>(kind);
    env.payload = std::move(payload);
    env.sender = sender;
    payload.clear();
    {
      std::lock_guard lk(ep->mu);
      if (ep->closing) return;
    }
    ep->box->deliver(std::move(env));
  }
}

}  // namespace edl
