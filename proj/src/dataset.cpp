#include "edl/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace edl {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_double(uint64_t bits) {
  // [0, 1) from the top 53 bits
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace

SyntheticDataset::SyntheticDataset(Spec spec) : spec_(spec) {
  w_true_.resize(static_cast<size_t>(spec_.dim));
  uint64_t s = splitmix64(spec_.seed ^ 0x77ee55aa11cc33ddULL);
  for (auto& w : w_true_) {
    s = splitmix64(s);
    w = 2.0 * unit_double(s) - 1.0;
  }
}

Sample SyntheticDataset::get(uint64_t index) const {
  if (index >= spec_.size) throw std::out_of_range("sample index");
  Sample s;
  s.id = index;
  s.features.resize(static_cast<size_t>(spec_.dim));
  uint64_t state = splitmix64(spec_.seed ^ (index * 0xd1342543de82ef95ULL + 1));
  for (auto& f : s.features) {
    state = splitmix64(state);
    f = 2.0 * unit_double(state) - 1.0;
  }
  double y = 0.0;
  for (int i = 0; i < spec_.dim; ++i) y += w_true_[static_cast<size_t>(i)] * s.features[static_cast<size_t>(i)];
  if (spec_.noise > 0.0) {
    state = splitmix64(state);
    y += spec_.noise * (2.0 * unit_double(state) - 1.0);
  }
  s.label = spec_.sign_labels ? (y >= 0.0 ? 1.0 : -1.0) : y;
  return s;
}

std::string SyntheticDataset::locator() const {
  return "synthetic:" + std::to_string(spec_.seed) + ":" + std::to_string(spec_.size);
}

std::unique_ptr<FileDataset> FileDataset::open(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  nlohmann::json j;
  in >> j;

  auto ds = std::unique_ptr<FileDataset>(new FileDataset());
  ds->manifest_path_ = manifest_path;
  ds->record_bytes_ = j.at("record_bytes").get<size_t>();
  ds->dim_ = j.at("feature_dim").get<int>();
  ds->total_ = j.at("total").get<uint64_t>();
  if (ds->record_bytes_ != (static_cast<size_t>(ds->dim_) + 1) * sizeof(double))
    throw std::runtime_error("manifest record_bytes disagrees with feature_dim");

  auto base = std::filesystem::path(manifest_path).parent_path();
  uint64_t first = 0;
  for (const auto& f : j.at("files")) {
    FileSpan span;
    span.path = (base / f.at("path").get<std::string>()).string();
    span.first = first;
    span.count = f.at("count").get<uint64_t>();
    first += span.count;
    ds->files_.push_back(std::move(span));
  }
  if (first != ds->total_) throw std::runtime_error("manifest file counts do not sum to total");
  return ds;
}

Sample FileDataset::get(uint64_t index) const {
  if (index >= total_) throw std::out_of_range("sample index");
  const FileSpan* span = nullptr;
  for (const auto& f : files_) {
    if (index >= f.first && index < f.first + f.count) {
      span = &f;
      break;
    }
  }
  if (!span) throw std::runtime_error("manifest span lookup failed");
  std::ifstream in(span->path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open record file: " + span->path);
  in.seekg(static_cast<std::streamoff>((index - span->first) * record_bytes_));
  std::vector<double> rec(static_cast<size_t>(dim_) + 1);
  in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(record_bytes_));
  if (!in) throw std::runtime_error("short read in record file: " + span->path);
  Sample s;
  s.id = index;
  s.features.assign(rec.begin(), rec.end() - 1);
  s.label = rec.back();
  return s;
}

std::string write_file_dataset(const std::string& dir, const Dataset& src,
                               uint64_t records_per_file) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::array();
  uint64_t written = 0;
  int file_no = 0;
  while (written < src.size()) {
    uint64_t count = std::min<uint64_t>(records_per_file, src.size() - written);
    std::string name = "records_" + std::to_string(file_no++) + ".bin";
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    for (uint64_t i = 0; i < count; ++i) {
      Sample s = src.get(written + i);
      out.write(reinterpret_cast<const char*>(s.features.data()),
                static_cast<std::streamsize>(s.features.size() * sizeof(double)));
      out.write(reinterpret_cast<const char*>(&s.label), sizeof(double));
    }
    files.push_back({{"path", name}, {"count", count}});
    written += count;
  }
  nlohmann::json manifest = {
      {"record_bytes", (static_cast<size_t>(src.feature_dim()) + 1) * sizeof(double)},
      {"feature_dim", src.feature_dim()},
      {"total", src.size()},
      {"files", files},
  };
  std::string path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(path);
  out << manifest.dump(2) << "\n";
  return path;
}

}  // namespace edl
