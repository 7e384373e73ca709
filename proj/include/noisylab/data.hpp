#pragma once

// Dataset ingestion (MNIST IDX, CIFAR-10 binary), mean-image normalization,
// synthetic Gaussian blobs, and mini-batch index generation.
//
// Train and test sets are distinct types. Only TrainSet carries noisy labels,
// so corruption cannot reach a test set, and training code receives a
// NoisyTrainingView that exposes no true labels at all.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "noisylab/errors.hpp"
#include "noisylab/math.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/noise.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

enum class Role { train, test };

struct FileDigest {
  std::string file;
  std::string fnv1a64;
  friend bool operator==(const FileDigest&, const FileDigest&) = default;
};

struct DatasetMeta {
  std::string name;
  std::size_t classes = 0;
  std::vector<FileDigest> sources;
  std::string preprocessing = "none";
};

/// Images (one flattened C,H,W sample per row) with their true labels.
struct ImageSet {
  Shape shape;
  Matrix images;
  std::vector<Label> true_labels;
  DatasetMeta meta;

  std::size_t size() const noexcept { return true_labels.size(); }
  std::size_t classes() const noexcept { return meta.classes; }
};

struct TrainSet : ImageSet {
  static constexpr Role role = Role::train;
  std::optional<std::vector<Label>> noisy_labels;
};

struct TestSet : ImageSet {
  static constexpr Role role = Role::test;
};

inline TrainSet as_train(ImageSet set) { return TrainSet{std::move(set), std::nullopt}; }
inline TestSet as_test(ImageSet set) { return TestSet{std::move(set)}; }

/// What a training loop may see: inputs and noisy labels only.
struct NoisyTrainingView {
  Shape shape;
  const Matrix* images = nullptr;
  std::span<const Label> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

inline NoisyTrainingView noisy_view(const TrainSet& set) {
  if (!set.noisy_labels)
    throw ContractError("training set has no noisy labels; corrupt it first (p = 0 is allowed)");
  return {set.shape, &set.images, *set.noisy_labels, set.classes()};
}

/// Draws the noisy labels of a training set from psi. Test sets are not
/// accepted.
inline void corrupt_training_labels(TrainSet& set, const NoiseMatrix& psi, Rng& rng) {
  if (psi.classes() != set.classes())
    throw ShapeError("noise matrix class count does not match the dataset");
  set.noisy_labels = corrupt_labels(set.true_labels, psi, rng);
}

// ---------------------------------------------------------------------------
// Digests

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Content digest over shape, image bit patterns and labels.
inline std::string dataset_digest(const ImageSet& set) {
  auto as_bytes = [](const void* p, std::size_t n) {
    return std::span<const std::uint8_t>(static_cast<const std::uint8_t*>(p), n);
  };
  const std::uint64_t dims[3] = {set.shape.channels, set.shape.height, set.shape.width};
  std::uint64_t h = fnv1a64(as_bytes(dims, sizeof dims));
  h = fnv1a64(as_bytes(set.images.data(), sizeof(double) * static_cast<std::size_t>(set.images.size())), h);
  h = fnv1a64(as_bytes(set.true_labels.data(), sizeof(Label) * set.true_labels.size()), h);
  return hex64(h);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

// ---------------------------------------------------------------------------
// MNIST IDX

namespace detail {
inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
         (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}
}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

/// Parses IDX image and label payloads. Pixels are scaled to [0, 1].
inline ImageSet parse_mnist_idx(std::span<const std::uint8_t> images,
                                std::span<const std::uint8_t> labels) {
  if (images.size() < 16) throw FormatError("IDX images: truncated header");
  if (labels.size() < 8) throw FormatError("IDX labels: truncated header");
  if (detail::read_be32(images, 0) != kIdxImageMagic)
    throw FormatError("IDX images: bad magic " + std::to_string(detail::read_be32(images, 0)));
  if (detail::read_be32(labels, 0) != kIdxLabelMagic)
    throw FormatError("IDX labels: bad magic " + std::to_string(detail::read_be32(labels, 0)));
  const std::uint64_t n = detail::read_be32(images, 4);
  const std::uint64_t rows = detail::read_be32(images, 8);
  const std::uint64_t cols = detail::read_be32(images, 12);
  const std::uint64_t n_labels = detail::read_be32(labels, 4);
  if (rows == 0 || cols == 0) throw FormatError("IDX images: zero image dimension");
  if (images.size() - 16 != n * rows * cols)
    throw FormatError("IDX images: payload size does not match header");
  if (labels.size() - 8 != n_labels) throw FormatError("IDX labels: payload size does not match header");
  if (n != n_labels)
    throw ConsistencyError("IDX: " + std::to_string(n) + " images but " +
                           std::to_string(n_labels) + " labels");

  ImageSet set;
  set.shape = Shape{1, rows, cols};
  set.meta.name = "mnist";
  set.meta.classes = 10;
  set.true_labels.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint8_t y = labels[8 + i];
    if (y >= 10) throw FormatError("IDX labels: label " + std::to_string(y) + " out of range");
    set.true_labels[i] = y;
  }
  const auto pixels = static_cast<Eigen::Index>(rows * cols);
  set.images.resize(static_cast<Eigen::Index>(n), pixels);
  const std::uint8_t* src = images.data() + 16;
  for (Eigen::Index i = 0; i < set.images.size(); ++i) set.images.data()[i] = src[i] / 255.0;
  return set;
}

inline ImageSet load_mnist_idx(const std::filesystem::path& images_path,
                               const std::filesystem::path& labels_path) {
  const auto images = read_file_bytes(images_path);
  const auto labels = read_file_bytes(labels_path);
  ImageSet set = parse_mnist_idx(images, labels);
  set.meta.sources = {{images_path.filename().string(), hex64(fnv1a64(images))},
                      {labels_path.filename().string(), hex64(fnv1a64(labels))}};
  return set;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary: records of 1 label byte + 3072 channel-planar pixel bytes.

inline constexpr std::size_t kCifarRecordBytes = 3073;

inline void append_cifar10_records(ImageSet& set, std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kCifarRecordBytes != 0)
    throw FormatError("CIFAR-10: file size " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073");
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  for (std::size_t r = 0; r < records; ++r)
    if (bytes[r * kCifarRecordBytes] > 9)
      throw FormatError("CIFAR-10: label byte " + std::to_string(bytes[r * kCifarRecordBytes]) +
                        " in record " + std::to_string(r));
  const Eigen::Index start = set.images.rows();
  set.images.conservativeResize(start + static_cast<Eigen::Index>(records), 3072);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    set.true_labels.push_back(rec[0]);
    double* row = set.images.row(start + static_cast<Eigen::Index>(r)).data();
    for (std::size_t k = 0; k < 3072; ++k) row[k] = rec[1 + k] / 255.0;
  }
}

inline ImageSet parse_cifar10(std::span<const std::uint8_t> bytes) {
  ImageSet set;
  set.shape = Shape{3, 32, 32};
  set.meta.name = "cifar10";
  set.meta.classes = 10;
  set.images.resize(0, 3072);
  append_cifar10_records(set, bytes);
  return set;
}

inline ImageSet load_cifar10_bin(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw InvalidInputError("CIFAR-10: no batch files given");
  ImageSet set;
  set.shape = Shape{3, 32, 32};
  set.meta.name = "cifar10";
  set.meta.classes = 10;
  set.images.resize(0, 3072);
  for (const auto& p : paths) {
    const auto bytes = read_file_bytes(p);
    append_cifar10_records(set, bytes);
    set.meta.sources.push_back({p.filename().string(), hex64(fnv1a64(bytes))});
  }
  return set;
}

// ---------------------------------------------------------------------------

/// Subtracts the training-set mean image from both sets.
template <typename Train, typename Test>
std::pair<Train, Test> normalize_mean_image(Train train, Test test) {
  if (!(train.shape == test.shape) || train.images.cols() != test.images.cols())
    throw ShapeError("normalize_mean_image: train and test shapes differ");
  if (train.images.rows() == 0) throw InvalidInputError("normalize_mean_image: empty train set");
  const Eigen::RowVectorXd mean = train.images.colwise().mean();
  train.images.rowwise() -= mean;
  test.images.rowwise() -= mean;
  train.meta.preprocessing = test.meta.preprocessing = "scale [0,1], subtract train mean image";
  return {std::move(train), std::move(test)};
}

/// c unit-variance Gaussian clusters in R^d. Cluster k is centred on axis
/// k mod d at distance separation * (1 + k / d) from the origin, so with
/// c <= d every pair of means is separation * sqrt(2) apart. Sample i
/// belongs to cluster i mod c.
inline ImageSet make_synthetic_blobs(Rng& rng, std::size_t n, std::size_t c, std::size_t d,
                                     double separation) {
  if (c < 2 || n < c || d < 1 || !(separation > 0.0))
    throw InvalidInputError("make_synthetic_blobs: need c >= 2, n >= c, d >= 1, separation > 0");
  ImageSet set;
  set.shape = Shape{d, 1, 1};
  set.meta.name = "blobs";
  set.meta.classes = c;
  set.images.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  set.true_labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Label>(i % c);
    set.true_labels[i] = k;
    for (std::size_t j = 0; j < d; ++j)
      set.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rng.normal() + (j == k % d ? separation * static_cast<double>(1 + k / d) : 0.0);
  }
  return set;
}

/// One epoch of shuffled index batches; the final partial batch is kept.
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                                     Rng& rng) {
  if (batch_size == 0) throw InvalidInputError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  return out;
}

inline std::vector<std::vector<std::size_t>> batches(const ImageSet& set, std::size_t batch_size,
                                                     Rng& rng) {
  return batches(set.size(), batch_size, rng);
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

/// First `n` samples of a set (all of it if n >= size).
template <typename Set>
Set take_first(Set set, std::size_t n) {
  if (n >= set.size()) return set;
  set.images.conservativeResize(static_cast<Eigen::Index>(n), set.images.cols());
  set.true_labels.resize(n);
  if constexpr (requires { set.noisy_labels; }) {
    if (set.noisy_labels) set.noisy_labels->resize(n);
  }
  return set;
}

}  // namespace noisylab
