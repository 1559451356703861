#include <rfl/fl/data.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <numeric>

namespace rfl::fl {

Dataset Dataset::subset(const std::vector<int>& idx) const {
  Dataset d;
  d.num_classes = num_classes;
  d.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  d.y.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    d.x.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
    d.y.push_back(y[static_cast<std::size_t>(idx[i])]);
  }
  return d;
}

Dataset make_synthetic_blobs(int num_samples, int num_features, int num_classes,
                             double separation, std::uint64_t centre_seed,
                             std::uint64_t sample_seed) {
  if (num_samples < 1 || num_features < 1 || num_classes < 2)
    throw ConfigError("synthetic blobs need samples >= 1, features >= 1, classes >= 2");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Rng crng(centre_seed);
  RMat centres(num_classes, num_features);
  for (int c = 0; c < num_classes; ++c)
    for (int f = 0; f < num_features; ++f) centres(c, f) = separation * gauss(crng);

  Rng rng(sample_seed);
  std::vector<int> labels(static_cast<std::size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) labels[static_cast<std::size_t>(i)] = i % num_classes;
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset d;
  d.num_classes = num_classes;
  d.x.resize(num_samples, num_features);
  d.y = labels;
  for (int i = 0; i < num_samples; ++i)
    for (int f = 0; f < num_features; ++f) d.x(i, f) = centres(labels[static_cast<std::size_t>(i)], f) + gauss(rng);
  return d;
}

Dataset make_synthetic_blobs(int num_samples, int num_features, int num_classes,
                             double separation, std::uint64_t seed) {
  return make_synthetic_blobs(num_samples, num_features, num_classes, separation, mix_seed(seed, 0),
                              mix_seed(seed, 1));
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path, int limit) {
  std::ifstream img(images_path, std::ios::binary);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open " + images_path);
  if (!lab) throw std::runtime_error("cannot open " + labels_path);
  if (read_be32(img, images_path) != 0x00000803) throw std::runtime_error("bad image magic in " + images_path);
  if (read_be32(lab, labels_path) != 0x00000801) throw std::runtime_error("bad label magic in " + labels_path);
  int n = static_cast<int>(read_be32(img, images_path));
  const int rows = static_cast<int>(read_be32(img, images_path));
  const int cols = static_cast<int>(read_be32(img, images_path));
  const int nl = static_cast<int>(read_be32(lab, labels_path));
  if (nl != n) throw std::runtime_error("image/label count mismatch");
  if (limit > 0) n = std::min(n, limit);

  Dataset d;
  d.num_classes = 10;
  d.x.resize(n, rows * cols);
  d.y.resize(static_cast<std::size_t>(n));
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows * cols));
  for (int i = 0; i < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error("truncated IDX file: " + images_path);
    for (int p = 0; p < rows * cols; ++p) d.x(i, p) = buf[static_cast<std::size_t>(p)] / 255.0;
    char c = 0;
    if (!lab.get(c)) throw std::runtime_error("truncated IDX file: " + labels_path);
    d.y[static_cast<std::size_t>(i)] = static_cast<unsigned char>(c);
  }
  return d;
}

PartitionResult partition_dataset(const Dataset& data, int num_devices, Partition mode,
                                  std::uint64_t seed) {
  const int n = data.size();
  if (num_devices < 1) throw ConfigError("partition needs at least one device");
  if (num_devices > n) throw ConfigError("more devices than samples");
  Rng rng(seed);
  PartitionResult r;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  if (mode == Partition::iid) {
    std::shuffle(order.begin(), order.end(), rng);
    const int per = n / num_devices;
    for (int k = 0; k < num_devices; ++k)
      r.indices.emplace_back(order.begin() + k * per, order.begin() + (k + 1) * per);
    r.dropped = n - per * num_devices;
  } else {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return data.y[static_cast<std::size_t>(a)] < data.y[static_cast<std::size_t>(b)];
    });
    const int num_shards = 2 * num_devices;
    const int per = n / num_shards;
    if (per == 0) throw ConfigError("too few samples for 2 shards per device");
    std::vector<int> shard_ids(static_cast<std::size_t>(num_shards));
    std::iota(shard_ids.begin(), shard_ids.end(), 0);
    std::shuffle(shard_ids.begin(), shard_ids.end(), rng);
    for (int k = 0; k < num_devices; ++k) {
      std::vector<int> idx;
      for (int s : {shard_ids[static_cast<std::size_t>(2 * k)], shard_ids[static_cast<std::size_t>(2 * k + 1)]})
        idx.insert(idx.end(), order.begin() + s * per, order.begin() + (s + 1) * per);
      r.indices.push_back(std::move(idx));
    }
    r.dropped = n - per * num_shards;
  }
  if (r.dropped > 0) std::clog << "partition_dataset: dropped " << r.dropped << " remainder samples\n";
  for (const auto& idx : r.indices) r.shards.push_back(data.subset(idx));
  return r;
}

}  // namespace rfl::fl
