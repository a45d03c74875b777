#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okdph/network.hpp"
#include "okdph/types.hpp"

namespace okdph {

struct Dataset {
  Matrix inputs;            // N x shape.size(), one example per row
  std::vector<int> labels;  // in [0, classes)
  DataShape shape;
  int classes = 0;
  std::string split;        // "train" or "test"

  Index size() const { return inputs.rows(); }
};

struct Transform {
  enum class Op { None, GaussianJitter, RandomShift, HorizontalFlip, Cutout, Rotate };
  Op op = Op::None;
  double value = 0.0;  // sigma | max_px | p | size | max_deg
};

/// Ordered transform pipeline for one model. `assignment` feeds per-example
/// seed derivation so each model's randomness is an independent stream.
struct AugmentationSpec {
  std::vector<Transform> transforms;
  int assignment = 0;
};

struct NoiseSpec {
  double mean = 0.0;
  double variance = 1.0;
};

/// A minibatch view plus the global example ids driving per-example
/// augmentation randomness.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;
  std::vector<Index> example_ids;
};

/// Interleaved 2-D spirals, standardized to zero mean / unit variance per
/// coordinate. With noise_sd == 0 the raw points satisfy, for class c and
/// index j (t = j/(n-1), or 0 when n == 1):
///   radius = t,  phi = 2*pi*(1.75*t + c/classes)
///   x = radius*cos(phi), y = radius*sin(phi)
Dataset gen_spirals(int n_per_class, int classes, double noise_sd, std::uint64_t seed,
                    const std::string& split = "train");

/// Synthetic single-channel shape images (square, disk, cross, stripes) with
/// jittered placement and pixel noise; up to 4 classes.
Dataset gen_shapes(int n_per_class, int classes, Index image_size, double noise_sd,
                   std::uint64_t seed, const std::string& split = "train");

/// IDX readers/writers (big-endian; magic 0x803 for u8 image tensors, 0x801
/// for label vectors). Pixels scale to [0,1] on load.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split = "train");
void save_idx(const Dataset& dataset, const std::string& images_path,
              const std::string& labels_path);

/// Per-example randomness is derived from (seed, assignment, epoch, example
/// id), so results do not depend on batch composition.
Batch augment(const Batch& batch, const AugmentationSpec& spec, const DataShape& shape,
              std::uint64_t augment_seed, long epoch);

/// X <- X + Gaussian(mean, variance) per element, applied once.
Dataset add_gaussian_noise(const Dataset& dataset, const NoiseSpec& spec, std::uint64_t seed);

/// Uniform subset without replacement, stratified per class (round to
/// nearest, at least 1 per class).
Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

/// CSV export/import with header x0,...,x{D-1},label.
void save_dataset_csv(const Dataset& dataset, const std::string& path);
Dataset load_dataset_csv(const std::string& path, const std::string& split = "train");

}  // namespace okdph
