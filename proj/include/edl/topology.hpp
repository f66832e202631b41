#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edl/bytes.hpp"

namespace edl {

// Versioned ordered ring of live workers. Each scaling, migration, or
// recovery event installs a new topology with a strictly larger version.
struct Topology {
  uint64_t version = 0;
  std::vector<std::string> ring;  // worker ids in ring order
  std::vector<int> splits;        // per-rank mini-batch sizes; sums to B

  int size() const { return static_cast<int>(ring.size()); }

  int rank_of(const std::string& id) const {
    for (size_t i = 0; i < ring.size(); ++i)
      if (ring[i] == id) return static_cast<int>(i);
    return -1;
  }

  const std::string& successor(int rank) const { return ring[(rank + 1) % ring.size()]; }
  const std::string& predecessor(int rank) const {
    return ring[(rank + ring.size() - 1) % ring.size()];
  }

  void encode(BinaryWriter& w) const {
    w.u64(version);
    w.str_vec(ring);
    w.u64(splits.size());
    for (int s : splits) w.i64(s);
  }

  static Topology decode(BinaryReader& r) {
    Topology t;
    t.version = r.u64();
    t.ring = r.str_vec();
    uint64_t n = r.u64();
    t.splits.reserve(n);
    for (uint64_t i = 0; i < n; ++i) t.splits.push_back(static_cast<int>(r.i64()));
    return t;
  }

  bool operator==(const Topology& o) const {
    return version == o.version && ring == o.ring && splits == o.splits;
  }
};

}  // namespace edl
