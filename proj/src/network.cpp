#include "okdph/network.hpp"

#include <cmath>
#include <sstream>

#include "okdph/rng.hpp"

namespace okdph {

namespace {

using RowMajorMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMajorMutMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[noreturn]] void chain_error(int prev, int cur, const NetworkSpec& spec,
                              const std::string& detail) {
  std::ostringstream os;
  os << "network validation failed between layer " << prev << " (";
  os << (prev < 0 ? std::string("input") : layer_kind_name(spec.layers[prev].kind));
  os << ") and layer " << cur << " (" << layer_kind_name(spec.layers[cur].kind)
     << "): " << detail;
  throw ConfigError(os.str());
}

Index conv_out(Index in, Index kernel, Index stride, Index pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

Matrix conv_backward(const Matrix& x, const Matrix& delta, const LayerSpec& l,
                     const DataShape& in, const DataShape& out, const double* weights,
                     double* grad_out) {
  const Index batch = x.rows();
  const Index wcount = l.out_channels * l.in_channels * l.kernel * l.kernel;
  double* gw = grad_out;
  double* gb = grad_out + wcount;
  Matrix delta_in = Matrix::Zero(batch, in.size());
  Vector xrow(in.size());
  Vector drow(out.size());
  Vector dinrow(in.size());
  for (Index b = 0; b < batch; ++b) {
    xrow = x.row(b);
    drow = delta.row(b);
    dinrow.setZero();
    const double* xr = xrow.data();
    const double* dr = drow.data();
    double* dir = dinrow.data();
    for (Index oc = 0; oc < l.out_channels; ++oc) {
      const double* woc = weights + oc * l.in_channels * l.kernel * l.kernel;
      double* gwoc = gw + oc * l.in_channels * l.kernel * l.kernel;
      for (Index oy = 0; oy < out.height; ++oy) {
        for (Index ox = 0; ox < out.width; ++ox) {
          const double d = dr[(oc * out.height + oy) * out.width + ox];
          if (d == 0.0) continue;
          gb[oc] += d;
          for (Index ic = 0; ic < l.in_channels; ++ic) {
            const double* wic = woc + ic * l.kernel * l.kernel;
            double* gwic = gwoc + ic * l.kernel * l.kernel;
            const double* xic = xr + ic * in.height * in.width;
            double* dic = dir + ic * in.height * in.width;
            for (Index ky = 0; ky < l.kernel; ++ky) {
              const Index iy = oy * l.stride - l.pad + ky;
              if (iy < 0 || iy >= in.height) continue;
              for (Index kx = 0; kx < l.kernel; ++kx) {
                const Index ix = ox * l.stride - l.pad + kx;
                if (ix < 0 || ix >= in.width) continue;
                gwic[ky * l.kernel + kx] += d * xic[iy * in.width + ix];
                dic[iy * in.width + ix] += d * wic[ky * l.kernel + kx];
              }
            }
          }
        }
      }
    }
    delta_in.row(b) = dinrow;
  }
  return delta_in;
}

}  // namespace

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

LayerSpec LayerSpec::dense(Index in, Index out) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.in_features = in;
  l.out_features = out;
  return l;
}

LayerSpec LayerSpec::conv2d(Index in_c, Index out_c, Index kernel, Index stride, Index pad) {
  LayerSpec l;
  l.kind = LayerKind::Conv2d;
  l.in_channels = in_c;
  l.out_channels = out_c;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = LayerKind::Relu;
  return l;
}

LayerSpec LayerSpec::maxpool2d(Index kernel, Index stride) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool2d;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

Index LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::Dense: return in_features * out_features + out_features;
    case LayerKind::Conv2d: return out_channels * in_channels * kernel * kernel + out_channels;
    default: return 0;
  }
}

std::vector<DataShape> NetworkSpec::shape_chain() const {
  if (classes < 2) throw ConfigError("network spec: class count must be >= 2");
  if (layers.empty()) throw ConfigError("network spec: no layers");
  std::vector<DataShape> chain;
  chain.reserve(layers.size() + 1);
  chain.push_back(input);
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const LayerSpec& l = layers[i];
    const DataShape in = chain.back();
    DataShape out = in;
    switch (l.kind) {
      case LayerKind::Dense:
        if (!in.is_flat())
          chain_error(i - 1, i, *this, "dense layer needs flat input; insert flatten");
        if (in.channels != l.in_features) {
          std::ostringstream os;
          os << "dense expects " << l.in_features << " input features, got " << in.channels;
          chain_error(i - 1, i, *this, os.str());
        }
        out = DataShape{l.out_features, 1, 1};
        break;
      case LayerKind::Conv2d: {
        if (in.channels != l.in_channels) {
          std::ostringstream os;
          os << "conv2d expects " << l.in_channels << " input channels, got " << in.channels;
          chain_error(i - 1, i, *this, os.str());
        }
        if (l.kernel < 1 || l.stride < 1 || l.pad < 0)
          chain_error(i - 1, i, *this, "conv2d kernel/stride/pad out of range");
        const Index oh = conv_out(in.height, l.kernel, l.stride, l.pad);
        const Index ow = conv_out(in.width, l.kernel, l.stride, l.pad);
        if (oh < 1 || ow < 1)
          chain_error(i - 1, i, *this, "conv2d output would be empty");
        out = DataShape{l.out_channels, oh, ow};
        break;
      }
      case LayerKind::Relu:
        break;
      case LayerKind::MaxPool2d: {
        if (l.kernel < 1 || l.stride < 1)
          chain_error(i - 1, i, *this, "maxpool2d kernel/stride out of range");
        const Index oh = (in.height - l.kernel) / l.stride + 1;
        const Index ow = (in.width - l.kernel) / l.stride + 1;
        if (in.height < l.kernel || in.width < l.kernel || oh < 1 || ow < 1)
          chain_error(i - 1, i, *this, "maxpool2d window larger than input");
        out = DataShape{in.channels, oh, ow};
        break;
      }
      case LayerKind::Flatten:
        out = DataShape{in.size(), 1, 1};
        break;
    }
    chain.push_back(out);
  }
  const DataShape last = chain.back();
  if (!last.is_flat() || last.channels != classes) {
    std::ostringstream os;
    os << "final layer must emit exactly " << classes << " flat logits, got ("
       << last.channels << "," << last.height << "," << last.width << ")";
    throw ConfigError("network validation failed: " + os.str());
  }
  return chain;
}

ParamLayout NetworkSpec::layout() const {
  shape_chain();  // validate
  ParamLayout layout;
  Index offset = 0;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    const Index n = layers[i].param_count();
    if (n == 0) continue;
    layout.slices.push_back(ParamSlice{i, offset, n});
    offset += n;
  }
  return layout;
}

std::string NetworkSpec::to_string() const {
  std::ostringstream os;
  os << "in:" << input.channels << "x" << input.height << "x" << input.width
     << ";C:" << classes << ";";
  for (const auto& l : layers) {
    os << layer_kind_name(l.kind);
    switch (l.kind) {
      case LayerKind::Dense: os << "(" << l.in_features << "->" << l.out_features << ")"; break;
      case LayerKind::Conv2d:
        os << "(" << l.in_channels << "->" << l.out_channels << ",k" << l.kernel << ",s"
           << l.stride << ",p" << l.pad << ")";
        break;
      case LayerKind::MaxPool2d: os << "(k" << l.kernel << ",s" << l.stride << ")"; break;
      default: break;
    }
    os << ";";
  }
  return os.str();
}

std::uint64_t NetworkSpec::hash() const { return fnv1a(to_string()); }

NetworkSpec network_from_id(const std::string& id, DataShape input, Index classes) {
  const auto colon = id.find(':');
  if (colon == std::string::npos)
    throw ConfigError("network id must look like 'mlp:16,16' or 'cnn:6,12': " + id);
  const std::string family = id.substr(0, colon);
  std::vector<Index> dims;
  {
    std::string rest = id.substr(colon + 1);
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      try {
        size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size() || v < 1) throw std::invalid_argument(tok);
        dims.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("bad dimension '" + tok + "' in network id: " + id);
      }
    }
  }

  NetworkSpec spec;
  spec.input = input;
  spec.classes = classes;
  if (family == "mlp") {
    Index features = input.size();
    if (!input.is_flat()) spec.layers.push_back(LayerSpec::flatten());
    for (Index h : dims) {
      spec.layers.push_back(LayerSpec::dense(features, h));
      spec.layers.push_back(LayerSpec::relu());
      features = h;
    }
    spec.layers.push_back(LayerSpec::dense(features, classes));
  } else if (family == "cnn") {
    if (dims.empty()) throw ConfigError("cnn network id needs channel counts: " + id);
    DataShape cur = input;
    for (Index ch : dims) {
      spec.layers.push_back(LayerSpec::conv2d(cur.channels, ch, 3, 1, 1));
      spec.layers.push_back(LayerSpec::relu());
      spec.layers.push_back(LayerSpec::maxpool2d(2, 2));
      cur = DataShape{ch, (cur.height - 2) / 2 + 1, (cur.width - 2) / 2 + 1};
    }
    spec.layers.push_back(LayerSpec::flatten());
    spec.layers.push_back(LayerSpec::dense(cur.size(), classes));
  } else {
    throw ConfigError("unknown network family '" + family + "' in id: " + id);
  }
  spec.shape_chain();  // validate eagerly
  return spec;
}

ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed) {
  const ParamLayout layout = spec.layout();
  ParamVector params;
  params.layout = layout;
  params.values = Vector::Zero(layout.total());
  for (const auto& slice : layout.slices) {
    const LayerSpec& l = spec.layers[slice.layer];
    RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(slice.layer)));
    Index fan_in = 0;
    Index weight_count = 0;
    if (l.kind == LayerKind::Dense) {
      fan_in = l.in_features;
      weight_count = l.in_features * l.out_features;
    } else {
      fan_in = l.in_channels * l.kernel * l.kernel;
      weight_count = l.out_channels * l.in_channels * l.kernel * l.kernel;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < weight_count; ++i)
      params.values[slice.offset + i] = rng.uniform(-limit, limit);
    // biases stay zero
  }
  return params;
}

namespace {

struct LayerRunner {
  const NetworkSpec& spec;
  const std::vector<DataShape> chain;
  const ParamVector& params;

  LayerRunner(const NetworkSpec& s, const ParamVector& p)
      : spec(s), chain(s.shape_chain()), params(p) {
    if (params.values.size() != s.layout().total())
      throw std::runtime_error("forward: parameter vector length does not match spec");
  }

  const double* layer_params(int layer_idx) const {
    for (const auto& s : params.layout.slices)
      if (s.layer == layer_idx) return params.values.data() + s.offset;
    return nullptr;
  }

  Matrix run(const Matrix& inputs, ForwardTrace* trace) const {
    if (inputs.cols() != chain[0].size()) {
      std::ostringstream os;
      os << "forward: input has " << inputs.cols() << " features, spec expects "
         << chain[0].size();
      throw std::runtime_error(os.str());
    }
    const Index batch = inputs.rows();
    Matrix cur = inputs;
    if (trace) {
      trace->acts.clear();
      trace->pool_argmax.assign(spec.layers.size(), {});
      trace->acts.push_back(cur);
    }
    for (int i = 0; i < static_cast<int>(spec.layers.size()); ++i) {
      const LayerSpec& l = spec.layers[i];
      const DataShape& in = chain[i];
      const DataShape& out = chain[i + 1];
      Matrix next;
      switch (l.kind) {
        case LayerKind::Dense: {
          RowMajorMap w(layer_params(i), l.out_features, l.in_features);
          Eigen::Map<const Vector> b(layer_params(i) + l.in_features * l.out_features,
                                     l.out_features);
          next = cur * w.transpose();
          next.rowwise() += b.transpose();
          break;
        }
        case LayerKind::Relu:
          next = cur.cwiseMax(0.0);
          break;
        case LayerKind::Flatten:
          next = cur;
          break;
        case LayerKind::Conv2d:
          next = conv_forward(cur, l, in, out, layer_params(i));
          break;
        case LayerKind::MaxPool2d: {
          Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> argmax(batch, out.size());
          next = pool_forward(cur, l, in, out, argmax);
          if (trace) trace->pool_argmax[i] = std::move(argmax);
          break;
        }
      }
      cur = std::move(next);
      if (trace) trace->acts.push_back(cur);
    }
    return cur;
  }

  Matrix conv_forward(const Matrix& x, const LayerSpec& l, const DataShape& in,
                      const DataShape& out, const double* wp) const {
    const Index batch = x.rows();
    Matrix y(batch, out.size());
    const double* weights = wp;
    const double* bias = wp + l.out_channels * l.in_channels * l.kernel * l.kernel;
    Vector xrow(in.size());
    Vector yrow(out.size());
    for (Index b = 0; b < batch; ++b) {
      xrow = x.row(b);
      const double* xr = xrow.data();
      double* yr = yrow.data();
      for (Index oc = 0; oc < l.out_channels; ++oc) {
        const double* woc = weights + oc * l.in_channels * l.kernel * l.kernel;
        for (Index oy = 0; oy < out.height; ++oy) {
          for (Index ox = 0; ox < out.width; ++ox) {
            double acc = bias[oc];
            for (Index ic = 0; ic < l.in_channels; ++ic) {
              const double* wic = woc + ic * l.kernel * l.kernel;
              const double* xic = xr + ic * in.height * in.width;
              for (Index ky = 0; ky < l.kernel; ++ky) {
                const Index iy = oy * l.stride - l.pad + ky;
                if (iy < 0 || iy >= in.height) continue;
                for (Index kx = 0; kx < l.kernel; ++kx) {
                  const Index ix = ox * l.stride - l.pad + kx;
                  if (ix < 0 || ix >= in.width) continue;
                  acc += wic[ky * l.kernel + kx] * xic[iy * in.width + ix];
                }
              }
            }
            yr[(oc * out.height + oy) * out.width + ox] = acc;
          }
        }
      }
      y.row(b) = yrow;
    }
    return y;
  }

  Matrix pool_forward(const Matrix& x, const LayerSpec& l, const DataShape& in,
                      const DataShape& out,
                      Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>& argmax) const {
    const Index batch = x.rows();
    Matrix y(batch, out.size());
    Vector xrow(in.size());
    for (Index b = 0; b < batch; ++b) {
      xrow = x.row(b);
      const double* xr = xrow.data();
      for (Index c = 0; c < in.channels; ++c) {
        const double* xc = xr + c * in.height * in.width;
        for (Index oy = 0; oy < out.height; ++oy) {
          for (Index ox = 0; ox < out.width; ++ox) {
            Index best_idx = -1;
            double best = 0;
            for (Index ky = 0; ky < l.kernel; ++ky) {
              const Index iy = oy * l.stride + ky;
              if (iy >= in.height) continue;
              for (Index kx = 0; kx < l.kernel; ++kx) {
                const Index ix = ox * l.stride + kx;
                if (ix >= in.width) continue;
                const double v = xc[iy * in.width + ix];
                if (best_idx < 0 || v > best) {
                  best = v;
                  best_idx = c * in.height * in.width + iy * in.width + ix;
                }
              }
            }
            const Index oidx = (c * out.height + oy) * out.width + ox;
            y(b, oidx) = best;
            argmax(b, oidx) = best_idx;
          }
        }
      }
    }
    return y;
  }
};

}  // namespace

Matrix forward(const NetworkSpec& spec, const ParamVector& params, const Matrix& inputs) {
  return LayerRunner(spec, params).run(inputs, nullptr);
}

Matrix forward_with_trace(const NetworkSpec& spec, const ParamVector& params,
                          const Matrix& inputs, ForwardTrace& trace) {
  return LayerRunner(spec, params).run(inputs, &trace);
}

GradVector backward_from_trace(const NetworkSpec& spec, const ParamVector& params,
                               const ForwardTrace& trace, const Matrix& loss_grad_at_logits) {
  const std::vector<DataShape> chain = spec.shape_chain();
  const Index batch = trace.acts[0].rows();
  if (loss_grad_at_logits.rows() != batch || loss_grad_at_logits.cols() != spec.classes)
    throw std::runtime_error("backward: loss gradient shape does not match batch x classes");

  GradVector grads;
  grads.layout = params.layout;
  grads.values = Vector::Zero(params.values.size());

  LayerRunner runner(spec, params);
  Matrix delta = loss_grad_at_logits;  // dLoss/d(activation out of layer i)
  for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = spec.layers[i];
    const DataShape& in = chain[i];
    const DataShape& out = chain[i + 1];
    const Matrix& x = trace.acts[i];
    Matrix delta_in;
    switch (l.kind) {
      case LayerKind::Dense: {
        const double* wp = runner.layer_params(i);
        RowMajorMap w(wp, l.out_features, l.in_features);
        double* gp = nullptr;
        for (const auto& s : grads.layout.slices)
          if (s.layer == i) gp = grads.values.data() + s.offset;
        RowMajorMutMap gw(gp, l.out_features, l.in_features);
        Eigen::Map<Vector> gb(gp + l.in_features * l.out_features, l.out_features);
        gw = delta.transpose() * x;
        gb = delta.colwise().sum();
        delta_in = delta * w;
        break;
      }
      case LayerKind::Relu:
        delta_in = ((x.array() > 0.0).cast<double>() * delta.array()).matrix();
        break;
      case LayerKind::Flatten:
        delta_in = delta;
        break;
      case LayerKind::Conv2d: {
        double* gp = nullptr;
        for (const auto& s : grads.layout.slices)
          if (s.layer == i) gp = grads.values.data() + s.offset;
        delta_in = conv_backward(x, delta, l, in, out, runner.layer_params(i), gp);
        break;
      }
      case LayerKind::MaxPool2d: {
        delta_in = Matrix::Zero(batch, in.size());
        const auto& argmax = trace.pool_argmax[i];
        for (Index b = 0; b < batch; ++b)
          for (Index o = 0; o < out.size(); ++o)
            delta_in(b, argmax(b, o)) += delta(b, o);
        break;
      }
    }
    delta = std::move(delta_in);
  }
  return grads;
}

GradVector backward(const NetworkSpec& spec, const ParamVector& params, const Matrix& inputs,
                    const Matrix& loss_grad_at_logits) {
  ForwardTrace trace;
  forward_with_trace(spec, params, inputs, trace);
  return backward_from_trace(spec, params, trace, loss_grad_at_logits);
}

SgdState make_sgd_state(const ParamLayout& layout, double lr, double momentum,
                        double weight_decay) {
  if (lr < 0 || momentum < 0 || weight_decay < 0)
    throw ConfigError("sgd coefficients must be >= 0");
  SgdState s;
  s.layout = layout;
  s.momentum_buf = Vector::Zero(layout.total());
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

void sgd_step(ParamVector& params, const GradVector& grads, SgdState& state) {
  require_same_layout(params.layout, grads.layout, "sgd_step params vs grads");
  require_same_layout(params.layout, state.layout, "sgd_step params vs state");
  if (!all_finite(grads.values)) {
    for (const auto& s : grads.layout.slices) {
      if (!grads.values.segment(s.offset, s.length).allFinite()) {
        std::ostringstream os;
        os << "non-finite gradient in layer " << s.layer;
        throw std::runtime_error(os.str());
      }
    }
    throw std::runtime_error("non-finite gradient");
  }
  state.momentum_buf = state.momentum * state.momentum_buf +
                       (grads.values + state.weight_decay * params.values);
  params.values -= state.lr * state.momentum_buf;
}

}  // namespace okdph
