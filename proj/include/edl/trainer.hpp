#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "edl/dataset.hpp"
#include "edl/topology.hpp"

namespace edl {

// Desk-scale stand-ins for DNN training: dense least-squares and logistic
// regression, both with oracle-checkable gradients. All arithmetic is double
// precision.
enum class ModelKind : uint8_t { LeastSquares, Logistic };

struct HyperParams {
  double eta = 0.05;   // eta_t = eta / (1 + decay * t)
  double decay = 0.0;
  int batch_size = 64;  // aggregate batch size B
  uint64_t epochs = 1;
};

inline double eta_at(const HyperParams& hp, uint64_t t) {
  return hp.eta / (1.0 + hp.decay * static_cast<double>(t));
}

// Per-sample loss gradient added into grad (size must equal w's).
// Least squares: f = 1/2 (w.a - b)^2, grad f = (w.a - b) a.
// Logistic (b in {-1, 1}): f = log(1 + exp(-b w.a)), grad f = -b a sigmoid(-b w.a).
void accumulate_gradient(ModelKind kind, std::span<const double> w, const Sample& s,
                         std::span<double> grad);

struct GradResult {
  std::vector<double> grad_sum;
  uint64_t count = 0;
};

// grad_sum over the local batch; empty batches yield zeros with count 0.
// Throws std::invalid_argument on dimension mismatch.
GradResult local_gradient(ModelKind kind, std::span<const double> w,
                          std::span<const Sample> batch);

double batch_loss(ModelKind kind, std::span<const double> w, std::span<const Sample> batch);

// w' = w - (eta / count) * grad_sum. Throws std::invalid_argument when count
// is zero.
void sgd_step(std::span<double> w, std::span<const double> grad_sum, uint64_t count, double eta);

// ---------------------------------------------------------------------------
// Assignment log: the exact mini-batch composition of a run, written once per
// completed (applied) mini-batch, plus topology installs and checkpoint
// restores. A restore invalidates every earlier record with t beyond the
// restore point.

struct LogRecord {
  enum class Kind : uint8_t { Batch, Topo, Restore } kind = Kind::Batch;
  // Batch
  uint64_t t = 0;
  std::string worker;
  std::vector<std::pair<uint64_t, uint64_t>> samples;  // (epoch, sample id) in draw order
  // Topo: ring effective from mini-batch t+1
  uint64_t version = 0;
  std::vector<std::string> ring;
  // Restore: resume point
  uint64_t restore_t = 0;
};

class AssignmentLog {
 public:
  void append(LogRecord rec) {
    std::lock_guard lk(mu_);
    records_.push_back(std::move(rec));
  }
  std::vector<LogRecord> records() const {
    std::lock_guard lk(mu_);
    return records_;
  }
  void clear() {
    std::lock_guard lk(mu_);
    records_.clear();
  }

 private:
  mutable std::mutex mu_;
  std::vector<LogRecord> records_;
};

// Applies restore truncation: drops records superseded by a later restart.
std::vector<LogRecord> effective_log(const std::vector<LogRecord>& raw);

void write_log_file(const std::string& path, const std::vector<LogRecord>& records);
std::vector<LogRecord> read_log_file(const std::string& path);

// Exactly-once audit over the effective log: each fully traversed epoch must
// consume sample ids [0, dataset_size) exactly once; the trailing partial
// epoch must be duplicate-free.
struct CoverageReport {
  bool ok = false;
  uint64_t full_epochs = 0;
  std::string detail;  // first violation, empty when ok
};
CoverageReport check_coverage(const std::vector<LogRecord>& log, uint64_t dataset_size);

// ---------------------------------------------------------------------------
// Replay oracles. Both run single-process SGD over the logged compositions.
//  - RingOrder reproduces the distributed reduction order exactly (per-worker
//    subtotals combined along the logged ring), so an uncorrupted run matches
//    bit for bit under a fixed topology.
//  - Concatenated accumulates per-sample gradients across the whole logged
//    batch in rank order, an independent associativity that must agree within
//    1e-9 relative.
enum class ReplayOrder : uint8_t { RingOrder, Concatenated };

struct ReplayResult {
  bool ok = false;
  std::string error;  // LogCorrupt detail
  std::vector<double> w;
  uint64_t batches = 0;
};

ReplayResult oracle_replay(const std::vector<LogRecord>& log, ModelKind kind,
                           const Dataset& dataset, std::vector<double> w0,
                           const HyperParams& hp, ReplayOrder order);

double max_rel_diff(std::span<const double> a, std::span<const double> b);

}  // namespace edl
