#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "edl/clock.hpp"
#include "edl/topology.hpp"
#include "edl/transport.hpp"

namespace edl {

struct TensorId {
  std::string name;
  uint64_t len = 0;
  bool operator==(const TensorId&) const = default;
  auto operator<=>(const TensorId&) const = default;
};

enum class ReduceOp : uint8_t { Sum, Average };

// One hop of the collective. Chunks are tagged with the topology version and
// round so participants detect a missed switch and discard stale traffic.
struct ChunkMsg {
  uint64_t version = 0;
  uint64_t round = 0;
  uint8_t phase = 0;  // 0 reduce-scatter, 1 allgather
  uint16_t step = 0;
  uint16_t chunk = 0;
  std::vector<double> data;

  std::vector<uint8_t> encode() const;
  static ChunkMsg decode(std::span<const uint8_t> payload);
};

enum class ReduceStatus : uint8_t { Ok, VersionMismatch, PeerGone, Timeout };

struct ReduceOutcome {
  ReduceStatus status = ReduceStatus::Ok;
  std::vector<double> data;
  int transfers = 0;  // neighbor sends performed by this participant
  std::string gone_peer;
};

// Transport seam for one participant: send to the ring successor, receive
// from the predecessor.
class ChunkIO {
 public:
  virtual ~ChunkIO() = default;
  virtual SendStatus send_chunk(const ChunkMsg& msg) = 0;
  virtual std::optional<ChunkMsg> recv_chunk(Duration timeout) = 0;
};

// ChunkIO over a Fabric, reading from the worker's collective channel.
class FabricChunkIO final : public ChunkIO {
 public:
  FabricChunkIO(Fabric& fabric, BlockingQueue<Envelope>& rx, std::string self,
                std::string successor)
      : fabric_(fabric), rx_(rx), self_(std::move(self)), successor_(std::move(successor)) {}

  SendStatus send_chunk(const ChunkMsg& msg) override {
    Envelope env{MsgKind::ReduceChunk, msg.encode(), self_};
    return fabric_.send(successor_, std::move(env));
  }

  std::optional<ChunkMsg> recv_chunk(Duration timeout) override {
    auto env = rx_.pop(timeout);
    if (!env) return std::nullopt;
    return ChunkMsg::decode(env->payload);
  }

 private:
  Fabric& fabric_;
  BlockingQueue<Envelope>& rx_;
  std::string self_;
  std::string successor_;
};

// Element range of chunk c when a length-`len` vector is cut into n chunks:
// [c*len/n, (c+1)*len/n). Lengths not divisible by n leave some chunks short
// or empty; empty chunks still travel so every collective performs exactly
// 2(n-1) transfers per worker.
std::pair<size_t, size_t> chunk_range(size_t len, int n, int c);

// Ring allreduce: n-1 reduce-scatter steps then n-1 allgather steps over ring
// neighbors. Within a chunk, values aggregate along the ring walk starting at
// the chunk's own rank, so results are bit-identical across runs under a
// fixed topology. All participants must share topo.version and vector length.
ReduceOutcome ring_allreduce(std::span<const double> local, const Topology& topo,
                             const std::string& self, ReduceOp op, ChunkIO& io,
                             uint64_t round = 0, Duration step_timeout = std::chrono::seconds(10));

// Reference reduction matching the collective's aggregation order exactly:
// chunk c folds ranks c, c+1, ..., c+n-1 left to right. Used by tests as the
// order-matched oracle.
std::vector<double> ring_order_reduce(const std::vector<std::vector<double>>& inputs, ReduceOp op);

// Leader-side gradient synchronization bookkeeping for one topology. Tensors
// become ready once every live worker has announced them; announcement
// arrival also doubles as liveness evidence.
class RoundCoordinator {
 public:
  void reset(std::vector<std::string> members);

  struct AnnounceResult {
    bool len_mismatch = false;
    std::vector<TensorId> ready;  // tensors completed by this announcement
  };
  AnnounceResult announce(const std::string& worker, const TensorId& tensor, TimePoint now);

  // Workers with no announcement for a tensor some peer announced more than
  // `window` ago.
  std::vector<std::string> stalled(TimePoint now, Duration window) const;

  bool idle() const { return pending_.empty(); }
  const std::vector<std::string>& members() const { return members_; }
  std::vector<std::string> missing_for_oldest() const;

 private:
  struct PendingTensor {
    std::set<std::string> announced;
    TimePoint first_announce{};
  };
  std::vector<std::string> members_;
  std::map<TensorId, PendingTensor> pending_;
};

}  // namespace edl
