#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "edl/bytes.hpp"

namespace edl {

// Leader-owned dynamic data assignment. The dataset is tiled into d logical
// partitions at the meta-data level; each epoch hands out a fresh random
// permutation of partition indexes on demand. Partially consumed partitions
// returned by exiting or failed workers are re-served before fresh ones, so
// every sample is consumed exactly once per epoch under arbitrary scaling.

struct PartitionMeta {
  uint32_t index = 0;
  std::string locator;
  uint64_t offset = 0;  // first global sample index
  uint64_t length = 0;  // sample count
  bool operator==(const PartitionMeta&) const = default;
};

struct ProgressRecord {
  std::string worker;
  uint32_t partition = 0;
  uint64_t next_sample_offset = 0;  // within the partition, in [0, length]
};

struct Shard {
  PartitionMeta meta;
  uint64_t resume_offset = 0;
};

struct EpochEnd {
  uint64_t epoch = 0;
};

// Epoch tail: no unassigned partition remains but some in-flight shard is
// still being consumed. The caller parks the request and retries when
// progress or a reclaim arrives.
struct ShardPending {};

using NextShard = std::variant<Shard, EpochEnd, ShardPending>;

enum class PipeStatus : uint8_t { Ok, UnknownWorker, StaleShard, ShapeMismatch };

// Default partition count: max(4 x expected workers, 64).
int default_partition_count(int max_expected_workers);

class ShardManager {
 public:
  ShardManager(uint64_t dataset_size, int partitions, uint64_t seed, std::string locator);

  void register_worker(const std::string& worker);
  void unregister_worker(const std::string& worker);
  bool is_registered(const std::string& worker) const;

  struct NextResult {
    PipeStatus status = PipeStatus::Ok;
    NextShard value = ShardPending{};
  };
  NextResult next_shard(const std::string& worker);

  // Progress reports are idempotent; a report for a partition no longer
  // assigned to the worker is stale.
  PipeStatus report_progress(const ProgressRecord& rec);

  // Moves every in-flight shard of `worker` into the reclaimed pool at its
  // last reported offset (fully consumed shards vanish instead).
  void reclaim(const std::string& worker);

  // Recovery variant: reclaim at explicitly supplied offsets (the offsets at
  // the last globally completed mini-batch), overriding later reports.
  void reclaim_at(const std::string& worker,
                  const std::vector<std::pair<uint32_t, uint64_t>>& offsets);

  // Reclaims in-flight shards of every worker not in `live` and drops those
  // workers from the registry.
  void reclaim_missing(const std::set<std::string>& live);

  PartitionMeta partition_meta(uint32_t index) const;

  std::vector<uint8_t> snapshot() const;
  PipeStatus restore(std::span<const uint8_t> snap);

  uint64_t epoch() const { return epoch_; }
  uint64_t epochs_completed() const { return epochs_completed_; }
  uint64_t cursor() const { return cursor_; }
  const std::vector<uint32_t>& permutation() const { return perm_; }
  size_t reclaimed_count() const { return reclaimed_.size(); }
  size_t in_flight_count() const { return in_flight_.size(); }
  uint64_t dataset_size() const { return size_; }
  int partitions() const { return d_; }

  // Last reported offset per in-flight shard of `worker`, for graceful-exit
  // reports.
  std::vector<std::pair<uint32_t, uint64_t>> worker_shards(const std::string& worker) const;

 private:
  void fresh_permutation();

  uint64_t size_;
  int d_;
  std::string locator_;
  std::mt19937_64 rng_;

  uint64_t epoch_ = 0;
  uint64_t epochs_completed_ = 0;
  std::vector<uint32_t> perm_;
  uint64_t cursor_ = 0;
  std::deque<std::pair<uint32_t, uint64_t>> reclaimed_;  // (partition, resume_offset)

  struct Assignment {
    std::string worker;
    uint64_t offset = 0;  // last reported next-sample offset
  };
  std::map<uint32_t, Assignment> in_flight_;
  std::set<std::string> workers_;
};

}  // namespace edl
