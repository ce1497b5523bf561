#include "mtb/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mtb/digest.hpp"
#include "mtb/error.hpp"
#include "mtb/rng.hpp"

namespace mtb {

namespace {

constexpr int kCifarDim = 32;
constexpr std::size_t kPixelBytes = 3 * 32 * 32;
constexpr std::size_t kRecordBytes = 1 + kPixelBytes;
constexpr int kCifarClasses = 10;

void read_batch(const std::string& path, LabeledDataset& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IngestionError("cifar10: cannot open batch file " + path);
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.empty()) {
    throw IngestionError("cifar10: empty batch file " + path);
  }
  if (bytes.size() % kRecordBytes != 0) {
    std::size_t full = bytes.size() / kRecordBytes;
    throw CorruptRecordError(
        "cifar10: truncated record " + std::to_string(full) + " in " + path, full);
  }
  std::size_t records = bytes.size() / kRecordBytes;
  std::size_t base_index = out.samples.size();
  for (std::size_t r = 0; r < records; ++r) {
    const auto* rec = reinterpret_cast<const std::uint8_t*>(bytes.data()) + r * kRecordBytes;
    int label = rec[0];
    if (label >= kCifarClasses) {
      throw CorruptRecordError("cifar10: label byte " + std::to_string(label) + " >= 10 at record " +
                                   std::to_string(base_index + r) + " in " + path,
                               base_index + r);
    }
    ImageSample s;
    s.label = label;
    s.image = Image::dequantize(rec + 1, kCifarDim, kCifarDim);
    out.samples.push_back(std::move(s));
  }
}

}  // namespace

std::string dataset_fingerprint(const LabeledDataset& d) {
  Sha256 h;
  h.update_u32(static_cast<std::uint32_t>(d.num_classes));
  h.update(d.split);
  h.update_u64(d.samples.size());
  for (const auto& s : d.samples) {
    std::uint8_t label = static_cast<std::uint8_t>(s.label);
    h.update(&label, 1);
    auto q = s.image.quantize();
    h.update(q.data(), q.size());
  }
  return h.hex();
}

void refresh_fingerprint(LabeledDataset& d) { d.fingerprint = dataset_fingerprint(d); }

LabeledDataset load_cifar10_files(const std::vector<std::string>& files, const std::string& split) {
  LabeledDataset out;
  out.num_classes = kCifarClasses;
  out.split = split;
  for (const auto& f : files) read_batch(f, out);
  refresh_fingerprint(out);
  return out;
}

Cifar10 load_cifar10(const std::string& directory) {
  namespace fs = std::filesystem;
  std::vector<std::string> train_files;
  for (int i = 1; i <= 5; ++i) {
    fs::path p = fs::path(directory) / ("data_batch_" + std::to_string(i) + ".bin");
    if (!fs::exists(p)) {
      throw IngestionError("cifar10: missing batch file " + p.string());
    }
    train_files.push_back(p.string());
  }
  fs::path test_path = fs::path(directory) / "test_batch.bin";
  if (!fs::exists(test_path)) {
    throw IngestionError("cifar10: missing batch file " + test_path.string());
  }
  Cifar10 ds;
  ds.train = load_cifar10_files(train_files, "train");
  ds.test = load_cifar10_files({test_path.string()}, "test");
  return ds;
}

LabeledDataset subset_dataset(const LabeledDataset& dataset, int per_class, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    by_class[dataset.samples[i].label].push_back(i);
  }
  for (int c = 0; c < dataset.num_classes; ++c) {
    if (static_cast<int>(by_class[c].size()) < per_class) {
      throw CapacityError("subset: class " + std::to_string(c) + " has only " +
                              std::to_string(by_class[c].size()) + " samples, need " +
                              std::to_string(per_class),
                          c);
    }
  }
  LabeledDataset out;
  out.num_classes = dataset.num_classes;
  out.split = dataset.split;
  auto eng = make_engine(derive_seed(seed, "subset"));
  for (int c = 0; c < dataset.num_classes; ++c) {
    auto& pool = by_class[c];
    std::shuffle(pool.begin(), pool.end(), eng);
    pool.resize(per_class);
    std::sort(pool.begin(), pool.end());
    for (std::size_t idx : pool) out.samples.push_back(dataset.samples[idx]);
  }
  refresh_fingerprint(out);
  return out;
}

}  // namespace mtb
