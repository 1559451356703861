#pragma once

#include <rfl/common.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace rfl::fl {

/// Samples are rows of x; labels in [0, num_classes).
struct Dataset {
  RMat x;
  std::vector<int> y;
  int num_classes = 0;

  [[nodiscard]] int size() const { return static_cast<int>(y.size()); }
  [[nodiscard]] int num_features() const { return static_cast<int>(x.cols()); }
  /// Rows listed in idx, in that order.
  [[nodiscard]] Dataset subset(const std::vector<int>& idx) const;
};

/// Gaussian clusters: class centres drawn with standard deviation
/// `separation` per coordinate, unit-variance noise around each centre.
/// Labels are balanced (round robin) before shuffling.
Dataset make_synthetic_blobs(int num_samples, int num_features, int num_classes,
                             double separation, std::uint64_t seed);

/// Same centres (seeded by `centre_seed`) with fresh samples from `sample_seed`,
/// for train/test splits of one task.
Dataset make_synthetic_blobs(int num_samples, int num_features, int num_classes,
                             double separation, std::uint64_t centre_seed,
                             std::uint64_t sample_seed);

/// Reads an IDX image/label pair (e.g. MNIST). Pixels are scaled to [0, 1].
/// `limit` > 0 keeps only the first `limit` samples.
Dataset load_idx(const std::string& images_path, const std::string& labels_path, int limit = 0);

enum class Partition { iid, non_iid };

struct PartitionResult {
  std::vector<Dataset> shards;
  std::vector<std::vector<int>> indices;  // rows of the input per shard
  int dropped = 0;                        // remainder not assigned
};

/// IID: K random equal shards. Non-IID: sort by label, cut 2K equal shards,
/// give each device two random shards. Throws ConfigError when K exceeds
/// the number of samples.
PartitionResult partition_dataset(const Dataset& data, int num_devices, Partition mode,
                                  std::uint64_t seed);

}  // namespace rfl::fl
