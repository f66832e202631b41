#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace edl {

struct Sample {
  uint64_t id = 0;  // global index within the dataset
  std::vector<double> features;
  double label = 0.0;
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual uint64_t size() const = 0;
  virtual int feature_dim() const = 0;
  virtual Sample get(uint64_t index) const = 0;
  virtual std::string locator() const = 0;
};

// Content-addressable synthetic regression data: sample i is a pure function
// of (seed, i), so any worker can materialize any index range locally and
// oracles can recompute exact batch contents from logged ids alone.
// Features are uniform in [-1, 1]; labels are w_true·a plus optional noise
// (sign of that value for classification use).
class SyntheticDataset final : public Dataset {
 public:
  struct Spec {
    uint64_t size = 0;
    int dim = 0;
    uint64_t seed = 0;
    double noise = 0.0;
    bool sign_labels = false;
  };

  explicit SyntheticDataset(Spec spec);
  uint64_t size() const override { return spec_.size; }
  int feature_dim() const override { return spec_.dim; }
  Sample get(uint64_t index) const override;
  std::string locator() const override;
  const std::vector<double>& true_weights() const { return w_true_; }

 private:
  Spec spec_;
  std::vector<double> w_true_;
};

// Fixed-size-record files described by a JSON manifest:
//   {"record_bytes": N, "feature_dim": D, "total": M,
//    "files": [{"path": "...", "count": K}, ...]}
// Each record is (D+1) little-endian doubles: features then label. Paths are
// resolved relative to the manifest's directory.
class FileDataset final : public Dataset {
 public:
  static std::unique_ptr<FileDataset> open(const std::string& manifest_path);

  uint64_t size() const override { return total_; }
  int feature_dim() const override { return dim_; }
  Sample get(uint64_t index) const override;
  std::string locator() const override { return "file:" + manifest_path_; }

 private:
  struct FileSpan {
    std::string path;
    uint64_t first = 0;
    uint64_t count = 0;
  };
  std::string manifest_path_;
  uint64_t total_ = 0;
  int dim_ = 0;
  size_t record_bytes_ = 0;
  std::vector<FileSpan> files_;
};

// Materializes `src` into record files under `dir` and writes the manifest;
// returns the manifest path.
std::string write_file_dataset(const std::string& dir, const Dataset& src,
                               uint64_t records_per_file);

}  // namespace edl
