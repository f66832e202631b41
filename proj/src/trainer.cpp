#include "edl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "edl/allreduce.hpp"

namespace edl {

void accumulate_gradient(ModelKind kind, std::span<const double> w, const Sample& s,
                         std::span<double> grad) {
  if (w.size() != s.features.size() || grad.size() != w.size())
    throw std::invalid_argument("gradient dimension mismatch");
  double z = 0.0;
  for (size_t i = 0; i < w.size(); ++i) z += w[i] * s.features[i];
  double scale;
  if (kind == ModelKind::LeastSquares) {
    scale = z - s.label;
  } else {
    double m = -s.label * z;
    scale = -s.label / (1.0 + std::exp(-m));
  }
  for (size_t i = 0; i < w.size(); ++i) grad[i] += scale * s.features[i];
}

GradResult local_gradient(ModelKind kind, std::span<const double> w,
                          std::span<const Sample> batch) {
  GradResult r;
  r.grad_sum.assign(w.size(), 0.0);
  for (const auto& s : batch) {
    accumulate_gradient(kind, w, s, r.grad_sum);
    r.count++;
  }
  return r;
}

double batch_loss(ModelKind kind, std::span<const double> w, std::span<const Sample> batch) {
  double total = 0.0;
  for (const auto& s : batch) {
    double z = 0.0;
    for (size_t i = 0; i < w.size(); ++i) z += w[i] * s.features[i];
    if (kind == ModelKind::LeastSquares) {
      double e = z - s.label;
      total += 0.5 * e * e;
    } else {
      total += std::log1p(std::exp(-s.label * z));
    }
  }
  return total;
}

void sgd_step(std::span<double> w, std::span<const double> grad_sum, uint64_t count, double eta) {
  if (count == 0) throw std::invalid_argument("sgd_step with zero sample count");
  if (w.size() != grad_sum.size()) throw std::invalid_argument("sgd_step dimension mismatch");
  double scale = eta / static_cast<double>(count);
  for (size_t i = 0; i < w.size(); ++i) w[i] -= scale * grad_sum[i];
}

std::vector<LogRecord> effective_log(const std::vector<LogRecord>& raw) {
  std::vector<LogRecord> out;
  for (const auto& rec : raw) {
    if (rec.kind == LogRecord::Kind::Restore) {
      std::erase_if(out, [&](const LogRecord& r) {
        if (r.kind == LogRecord::Kind::Batch) return r.t > rec.restore_t;
        if (r.kind == LogRecord::Kind::Topo) return r.t > rec.restore_t;
        return false;
      });
      continue;
    }
    out.push_back(rec);
  }
  return out;
}

void write_log_file(const std::string& path, const std::vector<LogRecord>& records) {
  std::ofstream out(path);
  for (const auto& r : records) {
    switch (r.kind) {
      case LogRecord::Kind::Batch: {
        out << "batch " << r.t << " " << r.worker << " " << r.samples.size();
        for (const auto& [e, id] : r.samples) out << " " << e << ":" << id;
        out << "\n";
        break;
      }
      case LogRecord::Kind::Topo: {
        out << "topo " << r.t << " " << r.version << " " << r.ring.size();
        for (const auto& w : r.ring) out << " " << w;
        out << "\n";
        break;
      }
      case LogRecord::Kind::Restore:
        out << "restore " << r.restore_t << "\n";
        break;
    }
  }
}

std::vector<LogRecord> read_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open assignment log: " + path);
  std::vector<LogRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    LogRecord r;
    if (tag == "batch") {
      r.kind = LogRecord::Kind::Batch;
      size_t n;
      ls >> r.t >> r.worker >> n;
      for (size_t i = 0; i < n; ++i) {
        std::string pair;
        ls >> pair;
        auto colon = pair.find(':');
        r.samples.emplace_back(std::stoull(pair.substr(0, colon)),
                               std::stoull(pair.substr(colon + 1)));
      }
    } else if (tag == "topo") {
      r.kind = LogRecord::Kind::Topo;
      size_t n;
      ls >> r.t >> r.version >> n;
      for (size_t i = 0; i < n; ++i) {
        std::string w;
        ls >> w;
        r.ring.push_back(w);
      }
    } else if (tag == "restore") {
      r.kind = LogRecord::Kind::Restore;
      ls >> r.restore_t;
    } else {
      throw std::runtime_error("unknown log record: " + tag);
    }
    out.push_back(std::move(r));
  }
  return out;
}

CoverageReport check_coverage(const std::vector<LogRecord>& log, uint64_t dataset_size) {
  CoverageReport rep;
  std::map<uint64_t, std::map<uint64_t, int>> per_epoch;  // epoch -> id -> count
  for (const auto& r : log) {
    if (r.kind != LogRecord::Kind::Batch) continue;
    for (const auto& [e, id] : r.samples) per_epoch[e][id]++;
  }
  if (per_epoch.empty()) {
    rep.ok = true;
    return rep;
  }
  const uint64_t last_epoch = per_epoch.rbegin()->first;
  uint64_t expected_epoch = 0;
  for (const auto& [e, counts] : per_epoch) {
    if (e != expected_epoch) {
      rep.detail = "epoch " + std::to_string(expected_epoch) + " missing entirely";
      return rep;
    }
    for (const auto& [id, c] : counts) {
      if (c != 1) {
        rep.detail = "epoch " + std::to_string(e) + " sample " + std::to_string(id) +
                     " consumed " + std::to_string(c) + " times";
        return rep;
      }
      if (id >= dataset_size) {
        rep.detail = "epoch " + std::to_string(e) + " sample " + std::to_string(id) +
                     " out of range";
        return rep;
      }
    }
    if (counts.size() == dataset_size) {
      rep.full_epochs++;
    } else if (e != last_epoch) {
      rep.detail = "epoch " + std::to_string(e) + " incomplete (" +
                   std::to_string(counts.size()) + "/" + std::to_string(dataset_size) +
                   ") but a later epoch ran";
      return rep;
    }
    expected_epoch++;
  }
  rep.ok = true;
  return rep;
}

ReplayResult oracle_replay(const std::vector<LogRecord>& log, ModelKind kind,
                           const Dataset& dataset, std::vector<double> w0,
                           const HyperParams& hp, ReplayOrder order) {
  ReplayResult res;
  res.w = std::move(w0);
  const size_t dim = res.w.size();

  // Group batch records by t; track the ring in effect per t.
  std::map<uint64_t, std::map<std::string, std::vector<std::pair<uint64_t, uint64_t>>>> by_t;
  std::map<uint64_t, std::vector<std::string>> ring_from;  // effective for t' > t
  for (const auto& r : log) {
    if (r.kind == LogRecord::Kind::Batch) {
      auto& per_worker = by_t[r.t][r.worker];
      per_worker.insert(per_worker.end(), r.samples.begin(), r.samples.end());
    } else if (r.kind == LogRecord::Kind::Topo) {
      ring_from[r.t] = r.ring;
    } else {
      res.error = "restore marker in effective log";
      return res;
    }
  }
  if (by_t.empty()) {
    res.ok = true;
    return res;
  }

  uint64_t expect = by_t.begin()->first;
  for (const auto& [t, workers] : by_t) {
    if (t != expect) {
      res.error = "mini-batch gap at t=" + std::to_string(t);
      return res;
    }
    expect = t + 1;

    // Ring in effect for mini-batch t: latest install with effective-from < t.
    std::vector<std::string> ring;
    for (const auto& [from, rg] : ring_from) {
      if (from < t) ring = rg;
    }
    if (ring.empty()) {
      for (const auto& [w, ids] : workers) ring.push_back(w);
    }
    for (const auto& [w, ids] : workers) {
      if (std::find(ring.begin(), ring.end(), w) == ring.end()) {
        res.error = "worker " + w + " logged batch t=" + std::to_string(t) + " outside ring";
        return res;
      }
    }

    uint64_t count = 0;
    std::vector<double> total(dim + 1, 0.0);
    if (order == ReplayOrder::RingOrder) {
      // Per-worker subtotals combined exactly as the collective does.
      std::vector<std::vector<double>> vecs;
      vecs.reserve(ring.size());
      for (const auto& w : ring) {
        std::vector<double> g(dim + 1, 0.0);
        auto it = workers.find(w);
        if (it != workers.end()) {
          for (const auto& [e, id] : it->second) {
            accumulate_gradient(kind, res.w, dataset.get(id), std::span(g.data(), dim));
          }
          g[dim] = static_cast<double>(it->second.size());
        }
        vecs.push_back(std::move(g));
      }
      total = ring_order_reduce(vecs, ReduceOp::Sum);
    } else {
      // One pass over the concatenated batch in rank order.
      for (const auto& w : ring) {
        auto it = workers.find(w);
        if (it == workers.end()) continue;
        for (const auto& [e, id] : it->second) {
          accumulate_gradient(kind, res.w, dataset.get(id), std::span(total.data(), dim));
        }
      }
      double c = 0;
      for (const auto& [w, ids] : workers) c += static_cast<double>(ids.size());
      total[dim] = c;
    }
    count = static_cast<uint64_t>(total[dim]);
    if (count > 0) {
      sgd_step(res.w, std::span(total.data(), dim), count, eta_at(hp, t));
    }
    res.batches++;
  }
  res.ok = true;
  return res;
}

double max_rel_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-30});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace edl
