#include "edl/allreduce.hpp"

#include <algorithm>
#include <cstring>

#include "edl/bytes.hpp"

namespace edl {

std::vector<uint8_t> ChunkMsg::encode() const {
  BinaryWriter w;
  w.u64(version);
  w.u64(round);
  w.u8(phase);
  w.u16(step);
  w.u16(chunk);
  w.f64_vec(data);
  return w.take();
}

ChunkMsg ChunkMsg::decode(std::span<const uint8_t> payload) {
  BinaryReader r(payload);
  ChunkMsg m;
  m.version = r.u64();
  m.round = r.u64();
  m.phase = r.u8();
  m.step = r.u16();
  m.chunk = r.u16();
  m.data = r.f64_vec();
  return m;
}

std::pair<size_t, size_t> chunk_range(size_t len, int n, int c) {
  size_t lo = len * static_cast<size_t>(c) / static_cast<size_t>(n);
  size_t hi = len * static_cast<size_t>(c + 1) / static_cast<size_t>(n);
  return {lo, hi};
}

namespace {

// Receives the next chunk for (version, round), discarding traffic from
// earlier rounds or versions left over from an aborted collective.
struct ChunkRecv {
  ReduceStatus status = ReduceStatus::Ok;
  ChunkMsg msg;
};

ChunkRecv recv_expected(ChunkIO& io, uint64_t version, uint64_t round, Duration timeout) {
  for (;;) {
    auto m = io.recv_chunk(timeout);
    if (!m) return {ReduceStatus::Timeout, {}};
    if (m->version < version || (m->version == version && m->round < round)) continue;
    if (m->version > version) return {ReduceStatus::VersionMismatch, std::move(*m)};
    return {ReduceStatus::Ok, std::move(*m)};
  }
}

}  // namespace

ReduceOutcome ring_allreduce(std::span<const double> local, const Topology& topo,
                             const std::string& self, ReduceOp op, ChunkIO& io,
                             uint64_t round, Duration step_timeout) {
  ReduceOutcome out;
  out.data.assign(local.begin(), local.end());
  const int n = topo.size();
  const int rank = topo.rank_of(self);
  if (rank < 0) {
    out.status = ReduceStatus::VersionMismatch;
    return out;
  }
  if (n == 1) {
    return out;
  }
  const size_t len = local.size();

  auto send_chunk_of = [&](int c, uint8_t phase, uint16_t step) -> SendStatus {
    auto [lo, hi] = chunk_range(len, n, c);
    ChunkMsg m;
    m.version = topo.version;
    m.round = round;
    m.phase = phase;
    m.step = step;
    m.chunk = static_cast<uint16_t>(c);
    m.data.assign(out.data.begin() + static_cast<long>(lo), out.data.begin() + static_cast<long>(hi));
    return io.send_chunk(m);
  };

  // Reduce-scatter: after n-1 steps rank r holds the full sum of chunk (r+1)%n.
  for (int s = 0; s < n - 1; ++s) {
    int send_c = (rank - s + n) % n;
    int recv_c = (rank - s - 1 + n) % n;
    if (send_chunk_of(send_c, 0, static_cast<uint16_t>(s)) != SendStatus::Ok) {
      out.status = ReduceStatus::PeerGone;
      out.gone_peer = topo.successor(rank);
      return out;
    }
    out.transfers++;
    auto r = recv_expected(io, topo.version, round, step_timeout);
    if (r.status != ReduceStatus::Ok) {
      out.status = r.status;
      return out;
    }
    auto [lo, hi] = chunk_range(len, n, recv_c);
    for (size_t i = lo; i < hi; ++i) out.data[i] = r.msg.data[i - lo] + out.data[i];
  }

  // Allgather: circulate each finished chunk around the ring.
  for (int s = 0; s < n - 1; ++s) {
    int send_c = (rank + 1 - s + n) % n;
    int recv_c = (rank - s + n) % n;
    if (send_chunk_of(send_c, 1, static_cast<uint16_t>(s)) != SendStatus::Ok) {
      out.status = ReduceStatus::PeerGone;
      out.gone_peer = topo.successor(rank);
      return out;
    }
    out.transfers++;
    auto r = recv_expected(io, topo.version, round, step_timeout);
    if (r.status != ReduceStatus::Ok) {
      out.status = r.status;
      return out;
    }
    auto [lo, hi] = chunk_range(len, n, recv_c);
    std::copy(r.msg.data.begin(), r.msg.data.end(), out.data.begin() + static_cast<long>(lo));
  }

  if (op == ReduceOp::Average) {
    for (auto& v : out.data) v /= n;
  }
  return out;
}

std::vector<double> ring_order_reduce(const std::vector<std::vector<double>>& inputs, ReduceOp op) {
  const int n = static_cast<int>(inputs.size());
  const size_t len = inputs.at(0).size();
  std::vector<double> out(len, 0.0);
  for (int c = 0; c < n; ++c) {
    auto [lo, hi] = chunk_range(len, n, c);
    for (size_t i = lo; i < hi; ++i) {
      double acc = inputs[static_cast<size_t>(c)][i];
      for (int k = 1; k < n; ++k) acc = acc + inputs[static_cast<size_t>((c + k) % n)][i];
      out[i] = acc;
    }
  }
  if (op == ReduceOp::Average) {
    for (auto& v : out) v /= n;
  }
  return out;
}

void RoundCoordinator::reset(std::vector<std::string> members) {
  members_ = std::move(members);
  pending_.clear();
}

RoundCoordinator::AnnounceResult RoundCoordinator::announce(const std::string& worker,
                                                            const TensorId& tensor,
                                                            TimePoint now) {
  AnnounceResult res;
  // Identical name with a different length is a contract violation.
  for (const auto& [t, p] : pending_) {
    if (t.name == tensor.name && t.len != tensor.len) {
      res.len_mismatch = true;
      return res;
    }
  }
  auto& p = pending_[tensor];
  if (p.announced.empty()) p.first_announce = now;
  p.announced.insert(worker);
  if (p.announced.size() == members_.size()) {
    res.ready.push_back(tensor);
    pending_.erase(tensor);
  }
  return res;
}

std::vector<std::string> RoundCoordinator::stalled(TimePoint now, Duration window) const {
  std::set<std::string> missing;
  for (const auto& [t, p] : pending_) {
    if (now - p.first_announce > window) {
      for (const auto& m : members_) {
        if (!p.announced.count(m)) missing.insert(m);
      }
    }
  }
  return {missing.begin(), missing.end()};
}

std::vector<std::string> RoundCoordinator::missing_for_oldest() const {
  if (pending_.empty()) return {};
  const PendingTensor* oldest = nullptr;
  for (const auto& [t, p] : pending_) {
    if (!oldest || p.first_announce < oldest->first_announce) oldest = &p;
  }
  std::vector<std::string> missing;
  for (const auto& m : members_) {
    if (!oldest->announced.count(m)) missing.push_back(m);
  }
  return missing;
}

}  // namespace edl
