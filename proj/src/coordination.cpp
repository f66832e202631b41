#include "edl/coordination.hpp"

#include <atomic>

namespace edl {

LeaseStore::LeaseStore(Clock& clock, Options opts) : clock_(clock), opts_(opts) {
  if (opts_.start_poller) {
    poller_ = std::thread([this] {
      while (!stop_.load(std::memory_order_relaxed)) {
        clock_.sleep_for(opts_.poll_interval);
        if (stop_.load(std::memory_order_relaxed)) break;
        poll_expirations();
      }
    });
  }
}

LeaseStore::~LeaseStore() {
  stop_.store(true);
  // A ManualClock sleeper only wakes on advance; stop() there is the owner's
  // job. SystemClock sleepers wake on their own within one poll interval.
  if (poller_.joinable()) poller_.join();
}

ElectionResult LeaseStore::cas_put_if_absent_or_expired(const std::string& job_handle,
                                                        const std::string& address,
                                                        std::optional<Duration> ttl) {
  Duration t = ttl.value_or(opts_.default_ttl);
  CoordEvent ev;
  {
    std::lock_guard lk(mu_);
    auto& slot = slots_[job_handle];
    TimePoint now = clock_.now();
    if (slot.present && now <= slot.rec.lease_deadline) {
      return {CasStatus::Lost, slot.rec.generation, slot.rec.address};
    }
    slot.present = true;
    slot.ttl = t;
    slot.rec.address = address;
    slot.rec.lease_deadline = now + t;
    slot.rec.generation = ++slot.last_generation;
    ev = {CoordEvent::Kind::Elected, job_handle, address, slot.rec.generation, now};
  }
  notify(ev);
  return {CasStatus::Won, ev.generation, address};
}

CoordStatus LeaseStore::refresh(const std::string& job_handle, const std::string& address) {
  std::lock_guard lk(mu_);
  auto it = slots_.find(job_handle);
  if (it == slots_.end() || !it->second.present) return CoordStatus::NotLeader;
  auto& slot = it->second;
  TimePoint now = clock_.now();
  if (now > slot.rec.lease_deadline || slot.rec.address != address) return CoordStatus::NotLeader;
  slot.rec.lease_deadline = now + slot.ttl;
  return CoordStatus::Ok;
}

CoordStatus LeaseStore::erase(const std::string& job_handle, const std::string& address) {
  CoordEvent ev;
  {
    std::lock_guard lk(mu_);
    auto it = slots_.find(job_handle);
    if (it == slots_.end() || !it->second.present) return CoordStatus::NotLeader;
    if (it->second.rec.address != address) return CoordStatus::NotLeader;
    it->second.present = false;
    ev = {CoordEvent::Kind::Expired, job_handle, "", 0, clock_.now()};
  }
  notify(ev);
  return CoordStatus::Ok;
}

std::optional<LeaderRecord> LeaseStore::get(const std::string& job_handle) const {
  std::lock_guard lk(mu_);
  auto it = slots_.find(job_handle);
  if (it == slots_.end() || !it->second.present) return std::nullopt;
  return it->second.rec;
}

LeaseStore::WatchId LeaseStore::watch(const std::string& job_handle, WatchFn fn) {
  std::lock_guard lk(mu_);
  WatchId id = next_watch_++;
  watches_[id] = {job_handle, std::move(fn)};
  return id;
}

void LeaseStore::unwatch(WatchId id) {
  std::lock_guard lk(mu_);
  watches_.erase(id);
}

void LeaseStore::poll_expirations() {
  std::vector<CoordEvent> evs;
  {
    std::lock_guard lk(mu_);
    TimePoint now = clock_.now();
    for (auto& [job, slot] : slots_) {
      if (slot.present && now > slot.rec.lease_deadline) {
        slot.present = false;
        evs.push_back({CoordEvent::Kind::Expired, job, "", 0, now});
      }
    }
  }
  for (const auto& ev : evs) notify(ev);
}

void LeaseStore::notify(const CoordEvent& ev) {
  std::vector<WatchFn> fns;
  {
    std::lock_guard lk(mu_);
    for (auto& [id, w] : watches_) {
      if (w.job == ev.job_handle) fns.push_back(w.fn);
    }
  }
  for (auto& fn : fns) fn(ev);
}

}  // namespace edl
