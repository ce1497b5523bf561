#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtb/image.hpp"

namespace mtb {

// Ordered, index-addressable set of labeled images. Immutable once built;
// plans and manifests refer to samples by index, so sample order is part of
// the contract.
struct LabeledDataset {
  std::vector<ImageSample> samples;
  int num_classes = 0;
  std::string split;        // "train" or "test"
  std::string fingerprint;  // content hash; see dataset_fingerprint

  std::size_t size() const { return samples.size(); }
};

// Content hash over (K, split, count, and every sample's label byte plus
// quantized pixel bytes). Changes iff any pixel or label byte changes;
// stable across machines.
std::string dataset_fingerprint(const LabeledDataset& d);

// Recomputes and stores the fingerprint.
void refresh_fingerprint(LabeledDataset& d);

// Reads the CIFAR-10 binary batches from `directory`:
//   train split <- data_batch_1.bin .. data_batch_5.bin
//   test  split <- test_batch.bin
// Each record is 1 label byte + 3072 pixel bytes (channel-planar R,G,B,
// row-major 32x32). Pixels are scaled to [0,1].
struct Cifar10 {
  LabeledDataset train;
  LabeledDataset test;
};
Cifar10 load_cifar10(const std::string& directory);

// Loads a single split from an explicit list of batch files.
LabeledDataset load_cifar10_files(const std::vector<std::string>& files, const std::string& split);

// Deterministic per-class subsample: exactly `per_class` samples of every
// class, selected under `seed`, original relative order not preserved
// (selection order is by class then draw order).
LabeledDataset subset_dataset(const LabeledDataset& dataset, int per_class, std::uint64_t seed);

}  // namespace mtb
