#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "edl/clock.hpp"
#include "edl/queue.hpp"

namespace edl {

// Message tags exchanged between workers, the leader, and the scheduler.
// Handling must be exhaustive; unknown tags are a framing error.
enum class MsgKind : uint8_t {
  Register = 0,
  Ready = 1,
  Ok = 2,
  TensorReady = 3,
  ReadyToReduce = 4,
  ShardRequest = 5,
  ShardReply = 6,
  Progress = 7,
  ScaleCmd = 8,
  Retry = 9,
  Ack = 10,
  ModelBroadcast = 11,
  Exit = 12,
  Topology = 13,
  ReduceChunk = 14,
  Handoff = 15,
  Recovery = 16,
  StopResume = 17,
};

const char* msg_kind_name(MsgKind k);

struct Envelope {
  MsgKind kind{};
  std::vector<uint8_t> payload;
  std::string sender;
};

enum class SendStatus : uint8_t { Ok, PeerGone, TooLarge, Unsupported };

// Receiving side of an endpoint. Messages are routed into channels by kind so
// independent consumers (control loop, collective, data fetch) never contend;
// per-link FIFO order is preserved within a channel.
class Mailbox {
 public:
  using Router = std::function<int(MsgKind)>;

  explicit Mailbox(int channels = 1, Router router = nullptr)
      : router_(std::move(router)), channels_(static_cast<size_t>(channels)) {
    for (auto& c : channels_) c = std::make_unique<BlockingQueue<Envelope>>();
  }

  BlockingQueue<Envelope>& channel(int i = 0) { return *channels_.at(static_cast<size_t>(i)); }

  void deliver(Envelope env) {
    int idx = router_ ? router_(env.kind) : 0;
    channels_.at(static_cast<size_t>(idx))->push(std::move(env));
  }

  void close() {
    for (auto& c : channels_) c->close();
  }

 private:
  Router router_;
  std::vector<std::unique_ptr<BlockingQueue<Envelope>>> channels_;
};

// Per-link delay profile for the in-process backend. Delay for each message is
// fixed_delay + U[0, jitter], drawn from a per-link seeded stream; deliveries
// on a link never reorder.
struct LinkProfile {
  Duration fixed_delay{};
  Duration jitter{};
  uint64_t seed = 0;
};

class Fabric {
 public:
  virtual ~Fabric() = default;
  virtual std::shared_ptr<Mailbox> attach(const std::string& id, int channels = 1,
                                          Mailbox::Router router = nullptr) = 0;
  virtual void detach(const std::string& id) = 0;
  virtual SendStatus send(const std::string& dst, Envelope env) = 0;
  virtual SendStatus inject_latency(const std::string& src, const std::string& dst,
                                    LinkProfile profile) = 0;
  virtual bool peer_known(const std::string& id) = 0;
};

// Deterministic in-process channel fabric. Zero-latency links deliver inline
// on the sender's thread; delayed links go through a scheduler thread driven
// by the injected clock.
class InProcFabric final : public Fabric {
 public:
  struct Options {
    size_t max_payload = 16u << 20;
  };

  explicit InProcFabric(Clock& clock, Options opts = {});
  ~InProcFabric() override;

  std::shared_ptr<Mailbox> attach(const std::string& id, int channels = 1,
                                  Mailbox::Router router = nullptr) override;
  void detach(const std::string& id) override;
  SendStatus send(const std::string& dst, Envelope env) override;
  SendStatus inject_latency(const std::string& src, const std::string& dst,
                            LinkProfile profile) override;
  bool peer_known(const std::string& id) override;

  // Planned delivery times recorded for delayed sends, for determinism checks.
  std::vector<TimePoint> delivery_schedule(const std::string& src, const std::string& dst);

 private:
  struct Link {
    LinkProfile profile;
    std::mt19937_64 rng;
    TimePoint last_delivery{};
    std::vector<TimePoint> schedule;
  };
  struct Pending {
    TimePoint at;
    uint64_t seq;
    std::string dst;
    Envelope env;
    bool operator>(const Pending& o) const {
      return at != o.at ? at > o.at : seq > o.seq;
    }
  };

  void scheduler_loop();

  Clock& clock_;
  Options opts_;
  std::mutex mu_;
  std::condition_variable_any cv_;
  std::map<std::string, std::shared_ptr<Mailbox>> boxes_;
  std::map<std::pair<std::string, std::string>, Link> links_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> heap_;
  uint64_t seq_ = 0;
  bool stop_ = false;
  std::thread scheduler_;
};

}  // namespace edl
