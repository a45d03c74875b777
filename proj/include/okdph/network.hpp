#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okdph/types.hpp"

namespace okdph {

enum class LayerKind { Dense, Conv2d, Relu, MaxPool2d, Flatten };

std::string layer_kind_name(LayerKind kind);

/// Shape of one example between layers. Flat feature vectors are encoded as
/// (channels=features, height=1, width=1); batches store one example per row
/// with element index (c*H + y)*W + x.
struct DataShape {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const { return channels * height * width; }
  bool is_flat() const { return height == 1 && width == 1; }

  friend bool operator==(const DataShape&, const DataShape&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  // dense
  Index in_features = 0;
  Index out_features = 0;
  // conv2d / maxpool2d
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 0;
  Index stride = 1;
  Index pad = 0;

  static LayerSpec dense(Index in, Index out);
  static LayerSpec conv2d(Index in_c, Index out_c, Index kernel, Index stride = 1, Index pad = 0);
  static LayerSpec relu();
  static LayerSpec maxpool2d(Index kernel, Index stride);
  static LayerSpec flatten();

  Index param_count() const;
};

struct NetworkSpec {
  DataShape input;
  std::vector<LayerSpec> layers;
  Index classes = 0;

  /// Shapes at every layer boundary; [0] is the input shape, [i+1] the output
  /// of layer i. Throws ConfigError naming the offending layer pair on any
  /// mismatch, and checks the final layer emits exactly `classes` flat logits.
  std::vector<DataShape> shape_chain() const;

  ParamLayout layout() const;
  Index param_count() const { return layout().total(); }

  /// FNV-1a over the canonical spec serialization; stored in checkpoints.
  std::uint64_t hash() const;
  std::string to_string() const;
};

/// Builds a NetworkSpec from a compact id string:
///   "mlp:16,16"  hidden dense+relu stack (input flattened if needed)
///   "mlp:"       single dense layer input->classes
///   "cnn:6,12"   conv(k3,s1,p1)+relu+maxpool(2) blocks, then flatten+dense
NetworkSpec network_from_id(const std::string& id, DataShape input, Index classes);

/// Scaled-uniform fan-in init (dense/conv weights), zero biases.
/// Deterministic given (spec, seed).
ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardTrace {
  std::vector<Matrix> acts;  // acts[0]=input, acts[i+1]=output of layer i
  // per layer: B x out_size matrix of winning input flat indices (maxpool only)
  std::vector<Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>> pool_argmax;
};

/// Raw logits, B x classes. Pure function of (params, inputs).
Matrix forward(const NetworkSpec& spec, const ParamVector& params, const Matrix& inputs);

Matrix forward_with_trace(const NetworkSpec& spec, const ParamVector& params,
                          const Matrix& inputs, ForwardTrace& trace);

/// Analytic gradient of the scalar loss whose logit-gradient is supplied.
/// The caller owns the batch-mean convention via loss_grad_at_logits.
GradVector backward(const NetworkSpec& spec, const ParamVector& params,
                    const Matrix& inputs, const Matrix& loss_grad_at_logits);

/// Same, reusing a trace from forward_with_trace to skip the recompute.
GradVector backward_from_trace(const NetworkSpec& spec, const ParamVector& params,
                               const ForwardTrace& trace, const Matrix& loss_grad_at_logits);

struct SgdState {
  Vector momentum_buf;
  ParamLayout layout;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

SgdState make_sgd_state(const ParamLayout& layout, double lr, double momentum,
                        double weight_decay);

/// v <- momentum*v + (grad + wd*theta); theta <- theta - lr*v.
/// Throws (naming the layer) on non-finite gradients.
void sgd_step(ParamVector& params, const GradVector& grads, SgdState& state);

}  // namespace okdph
