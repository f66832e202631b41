#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "edl/transport.hpp"

namespace edl {

// Stream-socket backend over loopback TCP. Frames are
//   [4-byte big-endian length][1-byte kind][payload]
// where length counts the kind byte plus the payload. Nagle's algorithm is
// disabled on every socket; one connection per ordered (src, dst) pair keeps
// per-link FIFO delivery. A connection opens with a hello frame (reserved
// kind 0xFF) whose payload is the sender's endpoint id.
class TcpFabric final : public Fabric {
 public:
  struct Options {
    std::string host = "127.0.0.1";
    uint16_t port_base = 18500;
    uint16_t port_count = 512;
    size_t max_payload = 16u << 20;
  };

  explicit TcpFabric(Options opts = {});
  ~TcpFabric() override;

  std::shared_ptr<Mailbox> attach(const std::string& id, int channels = 1,
                                  Mailbox::Router router = nullptr) override;
  void detach(const std::string& id) override;
  SendStatus send(const std::string& dst, Envelope env) override;
  SendStatus inject_latency(const std::string&, const std::string&, LinkProfile) override {
    return SendStatus::Unsupported;
  }
  bool peer_known(const std::string& id) override;

  uint16_t port_of(const std::string& id);

 private:
  struct Endpoint {
    std::shared_ptr<Mailbox> box;
    uint16_t port = 0;
    int listen_fd = -1;
    std::thread acceptor;
    std::vector<std::thread> readers;
    std::vector<int> conn_fds;
    std::mutex mu;
    bool closing = false;
  };
  struct OutConn {
    int fd = -1;
    std::unique_ptr<std::mutex> write_mu = std::make_unique<std::mutex>();
  };

  void acceptor_loop(Endpoint* ep);
  void reader_loop(Endpoint* ep, int fd);
  int connect_to(uint16_t port);

  Options opts_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Endpoint>> endpoints_;
  std::map<std::pair<std::string, std::string>, OutConn> out_;  // (src,dst) -> conn
  uint16_t next_port_;
  std::atomic<bool> stop_{false};
};

}  // namespace edl
