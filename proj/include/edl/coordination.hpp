#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "edl/clock.hpp"
#include "edl/queue.hpp"

namespace edl {

// In-process lease-backed key-value store with compare-and-swap election
// semantics: a key may be claimed when its record is absent, expired, or
// erased; the claim is atomic with respect to concurrent candidates.
//
// Defaults: ttl 3s, refresh period ttl/3 (callers' concern), expiry poll ttl/10.

struct LeaderRecord {
  std::string address;
  TimePoint lease_deadline;
  uint64_t generation = 0;
};

enum class CasStatus : uint8_t { Won, Lost };
enum class CoordStatus : uint8_t { Ok, NotLeader };

struct ElectionResult {
  CasStatus status;
  uint64_t generation = 0;       // valid when Won
  std::string current_address;   // the winner's address (own address when Won)
};

struct CoordEvent {
  enum class Kind : uint8_t { Elected, Expired } kind;
  std::string job_handle;
  std::string address;     // Elected only
  uint64_t generation = 0; // Elected only
  TimePoint at{};          // store clock time at delivery
};

class LeaseStore {
 public:
  struct Options {
    Duration default_ttl = ms(3000);
    Duration poll_interval = ms(300);
    bool start_poller = true;  // background expiry poller on the injected clock
  };

  explicit LeaseStore(Clock& clock, Options opts = {});
  ~LeaseStore();

  LeaseStore(const LeaseStore&) = delete;
  LeaseStore& operator=(const LeaseStore&) = delete;

  // Claims the slot if it is empty or expired. Exactly one concurrent caller
  // wins; the rest observe Lost with the winner's address.
  ElectionResult cas_put_if_absent_or_expired(const std::string& job_handle,
                                              const std::string& address,
                                              std::optional<Duration> ttl = std::nullopt);

  // Extends the lease by ttl when the caller still holds the record.
  CoordStatus refresh(const std::string& job_handle, const std::string& address);

  // Removes the record when the caller holds it; watchers see Expired.
  CoordStatus erase(const std::string& job_handle, const std::string& address);

  std::optional<LeaderRecord> get(const std::string& job_handle) const;

  // Watch subscriptions deliver Elected after each successful CAS and Expired
  // within one poll interval of lease expiry (or immediately on erase).
  using WatchId = uint64_t;
  using WatchFn = std::function<void(const CoordEvent&)>;
  WatchId watch(const std::string& job_handle, WatchFn fn);
  void unwatch(WatchId id);

  // Scans for expired records and notifies watchers. The background poller
  // calls this on its interval; tests may call it directly.
  void poll_expirations();

  Duration default_ttl() const { return opts_.default_ttl; }

 private:
  void notify(const CoordEvent& ev);

  Clock& clock_;
  Options opts_;

  mutable std::mutex mu_;
  struct Slot {
    LeaderRecord rec;
    Duration ttl{};
    bool present = false;
    uint64_t last_generation = 0;  // survives erase/expiry; future wins increment it
  };
  std::map<std::string, Slot> slots_;
  struct Watch {
    std::string job;
    WatchFn fn;
  };
  std::map<WatchId, Watch> watches_;
  WatchId next_watch_ = 1;

  std::atomic<bool> stop_{false};
  std::thread poller_;
};

// Queue adapter for consuming watch events as a stream.
class WatchStream {
 public:
  WatchStream(LeaseStore& store, const std::string& job)
      : store_(store), id_(store.watch(job, [this](const CoordEvent& ev) { q_.push(ev); })) {}
  ~WatchStream() { store_.unwatch(id_); }
  std::optional<CoordEvent> next(Duration timeout) { return q_.pop(timeout); }
  std::optional<CoordEvent> try_next() { return q_.try_pop(); }

 private:
  LeaseStore& store_;
  BlockingQueue<CoordEvent> q_;
  LeaseStore::WatchId id_;
};

}  // namespace edl
