#include "edl/datapipeline.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace edl {

int default_partition_count(int max_expected_workers) {
  return std::max(4 * max_expected_workers, 64);
}

ShardManager::ShardManager(uint64_t dataset_size, int partitions, uint64_t seed,
                           std::string locator)
    : size_(dataset_size), d_(partitions), locator_(std::move(locator)), rng_(seed) {
  fresh_permutation();
}

void ShardManager::fresh_permutation() {
  perm_.resize(static_cast<size_t>(d_));
  std::iota(perm_.begin(), perm_.end(), 0u);
  std::shuffle(perm_.begin(), perm_.end(), rng_);
  cursor_ = 0;
}

void ShardManager::register_worker(const std::string& worker) { workers_.insert(worker); }

void ShardManager::unregister_worker(const std::string& worker) { workers_.erase(worker); }

bool ShardManager::is_registered(const std::string& worker) const {
  return workers_.count(worker) > 0;
}

PartitionMeta ShardManager::partition_meta(uint32_t index) const {
  PartitionMeta m;
  m.index = index;
  m.locator = locator_;
  m.offset = size_ * index / static_cast<uint64_t>(d_);
  m.length = size_ * (index + 1) / static_cast<uint64_t>(d_) - m.offset;
  return m;
}

ShardManager::NextResult ShardManager::next_shard(const std::string& worker) {
  if (!workers_.count(worker)) return {PipeStatus::UnknownWorker, ShardPending{}};
  if (!reclaimed_.empty()) {
    auto [p, off] = reclaimed_.front();
    reclaimed_.pop_front();
    in_flight_[p] = {worker, off};
    return {PipeStatus::Ok, Shard{partition_meta(p), off}};
  }
  if (cursor_ < static_cast<uint64_t>(d_)) {
    uint32_t p = perm_[cursor_++];
    in_flight_[p] = {worker, 0};
    return {PipeStatus::Ok, Shard{partition_meta(p), 0}};
  }
  if (!in_flight_.empty()) return {PipeStatus::Ok, ShardPending{}};
  uint64_t done = epoch_;
  epoch_ += 1;
  epochs_completed_ += 1;
  fresh_permutation();
  return {PipeStatus::Ok, EpochEnd{done}};
}

PipeStatus ShardManager::report_progress(const ProgressRecord& rec) {
  if (!workers_.count(rec.worker)) return PipeStatus::UnknownWorker;
  auto it = in_flight_.find(rec.partition);
  if (it == in_flight_.end() || it->second.worker != rec.worker) return PipeStatus::StaleShard;
  it->second.offset = rec.next_sample_offset;
  if (it->second.offset >= partition_meta(rec.partition).length) in_flight_.erase(it);
  return PipeStatus::Ok;
}

void ShardManager::reclaim(const std::string& worker) {
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    if (it->second.worker == worker) {
      if (it->second.offset < partition_meta(it->first).length) {
        reclaimed_.emplace_back(it->first, it->second.offset);
      }
      it = in_flight_.erase(it);
    } else {
      ++it;
    }
  }
}

void ShardManager::reclaim_at(const std::string& worker,
                              const std::vector<std::pair<uint32_t, uint64_t>>& offsets) {
  for (const auto& [p, off] : offsets) {
    auto it = in_flight_.find(p);
    if (it != in_flight_.end() && it->second.worker == worker) it->second.offset = off;
  }
  reclaim(worker);
}

void ShardManager::reclaim_missing(const std::set<std::string>& live) {
  std::vector<std::string> gone;
  for (const auto& w : workers_) {
    if (!live.count(w)) gone.push_back(w);
  }
  for (const auto& w : gone) {
    reclaim(w);
    workers_.erase(w);
  }
}

std::vector<std::pair<uint32_t, uint64_t>> ShardManager::worker_shards(
    const std::string& worker) const {
  std::vector<std::pair<uint32_t, uint64_t>> out;
  for (const auto& [p, a] : in_flight_) {
    if (a.worker == worker) out.emplace_back(p, a.offset);
  }
  return out;
}

std::vector<uint8_t> ShardManager::snapshot() const {
  BinaryWriter w;
  w.u64(size_);
  w.i64(d_);
  w.str(locator_);
  w.u64(epoch_);
  w.u64(epochs_completed_);
  w.u64(cursor_);
  w.u64(perm_.size());
  for (uint32_t p : perm_) w.u32(p);
  w.u64(reclaimed_.size());
  for (const auto& [p, off] : reclaimed_) {
    w.u32(p);
    w.u64(off);
  }
  w.u64(in_flight_.size());
  for (const auto& [p, a] : in_flight_) {
    w.u32(p);
    w.str(a.worker);
    w.u64(a.offset);
  }
  w.u64(workers_.size());
  for (const auto& ww : workers_) w.str(ww);
  std::ostringstream rs;
  rs << rng_;
  w.str(rs.str());
  return w.take();
}

PipeStatus ShardManager::restore(std::span<const uint8_t> snap) {
  BinaryReader r(snap);
  uint64_t size = r.u64();
  int d = static_cast<int>(r.i64());
  if (size != size_ || d != d_) return PipeStatus::ShapeMismatch;
  locator_ = r.str();
  epoch_ = r.u64();
  epochs_completed_ = r.u64();
  cursor_ = r.u64();
  uint64_t pn = r.u64();
  perm_.resize(pn);
  for (auto& p : perm_) p = r.u32();
  reclaimed_.clear();
  uint64_t rn = r.u64();
  for (uint64_t i = 0; i < rn; ++i) {
    uint32_t p = r.u32();
    uint64_t off = r.u64();
    reclaimed_.emplace_back(p, off);
  }
  in_flight_.clear();
  uint64_t fn = r.u64();
  for (uint64_t i = 0; i < fn; ++i) {
    uint32_t p = r.u32();
    Assignment a;
    a.worker = r.str();
    a.offset = r.u64();
    in_flight_[p] = std::move(a);
  }
  workers_.clear();
  uint64_t wn = r.u64();
  for (uint64_t i = 0; i < wn; ++i) workers_.insert(r.str());
  std::istringstream rs(r.str());
  rs >> rng_;
  return PipeStatus::Ok;
}

}  // namespace edl
