#include "okdph/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "okdph/rng.hpp"

namespace okdph {

namespace {

void standardize_columns(Matrix& x) {
  for (Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    x.col(c).array() -= mean;
    const double var = x.col(c).squaredNorm() / static_cast<double>(x.rows());
    const double sd = std::sqrt(var);
    if (sd > 0.0) x.col(c) /= sd;
  }
}

std::uint32_t read_be_u32(std::istream& in, const std::string& what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("idx: truncated file while reading " + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Dataset gen_spirals(int n_per_class, int classes, double noise_sd, std::uint64_t seed,
                    const std::string& split) {
  if (classes < 2) throw ConfigError("gen_spirals: classes must be >= 2");
  if (n_per_class < 1) throw ConfigError("gen_spirals: n_per_class must be >= 1");
  const Index n = static_cast<Index>(n_per_class) * classes;
  Dataset ds;
  ds.shape = DataShape{2, 1, 1};
  ds.classes = classes;
  ds.split = split;
  ds.inputs.resize(n, 2);
  ds.labels.resize(n);
  RngStream rng(derive_seed(seed, 0x5917a15ULL));
  Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int j = 0; j < n_per_class; ++j, ++row) {
      const double t = n_per_class == 1 ? 0.0
                                        : static_cast<double>(j) / (n_per_class - 1);
      const double radius = t;
      const double phi = 2.0 * M_PI * (1.75 * t + static_cast<double>(c) / classes);
      ds.inputs(row, 0) = radius * std::cos(phi) + noise_sd * rng.normal();
      ds.inputs(row, 1) = radius * std::sin(phi) + noise_sd * rng.normal();
      ds.labels[row] = c;
    }
  }
  standardize_columns(ds.inputs);
  return ds;
}

Dataset gen_shapes(int n_per_class, int classes, Index image_size, double noise_sd,
                   std::uint64_t seed, const std::string& split) {
  if (classes < 2 || classes > 4) throw ConfigError("gen_shapes: classes must be in [2,4]");
  if (n_per_class < 1) throw ConfigError("gen_shapes: n_per_class must be >= 1");
  if (image_size < 8) throw ConfigError("gen_shapes: image_size must be >= 8");
  const Index hw = image_size;
  const Index n = static_cast<Index>(n_per_class) * classes;
  Dataset ds;
  ds.shape = DataShape{1, hw, hw};
  ds.classes = classes;
  ds.split = split;
  ds.inputs = Matrix::Zero(n, hw * hw);
  ds.labels.resize(n);

  Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int j = 0; j < n_per_class; ++j, ++row) {
      RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(c),
                                static_cast<std::uint64_t>(j)));
      const double amp = rng.uniform(0.6, 1.0);
      const Index half = 2 + rng.uniform_int(0, 1);            // shape half-extent
      const Index cx = rng.uniform_int(half + 1, hw - half - 2);
      const Index cy = rng.uniform_int(half + 1, hw - half - 2);
      auto px = [&](Index y, Index x) -> double& { return ds.inputs(row, y * hw + x); };
      switch (c) {
        case 0:  // filled square
          for (Index y = cy - half; y <= cy + half; ++y)
            for (Index x = cx - half; x <= cx + half; ++x) px(y, x) = amp;
          break;
        case 1:  // disk
          for (Index y = 0; y < hw; ++y)
            for (Index x = 0; x < hw; ++x) {
              const double d2 = double(y - cy) * (y - cy) + double(x - cx) * (x - cx);
              if (d2 <= double(half + 0.5) * (half + 0.5)) px(y, x) = amp;
            }
          break;
        case 2:  // plus / cross
          for (Index y = cy - half; y <= cy + half; ++y) px(y, cx) = amp;
          for (Index x = cx - half; x <= cx + half; ++x) px(cy, x) = amp;
          break;
        case 3:  // diagonal stripes through the whole frame
          for (Index y = 0; y < hw; ++y)
            for (Index x = 0; x < hw; ++x)
              if ((y + x + cx) % 4 == 0) px(y, x) = amp;
          break;
      }
      for (Index k = 0; k < hw * hw; ++k) {
        double v = ds.inputs(row, k) + noise_sd * rng.normal();
        ds.inputs(row, k) = std::clamp(v, 0.0, 1.0);
      }
      ds.labels[row] = c;
    }
  }
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const std::string& split) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ConfigError("idx: cannot open images file: " + images_path);
  const std::uint32_t magic = read_be_u32(img, "images magic");
  if (magic != kIdxImagesMagic) {
    std::ostringstream os;
    os << "idx: bad images magic, expected 0x" << std::hex << kIdxImagesMagic << ", got 0x"
       << magic << " in " << images_path;
    throw ConfigError(os.str());
  }
  const std::uint32_t count = read_be_u32(img, "image count");
  const std::uint32_t rows = read_be_u32(img, "image rows");
  const std::uint32_t cols = read_be_u32(img, "image cols");
  std::vector<unsigned char> pixels(static_cast<size_t>(count) * rows * cols);
  img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!img) throw ConfigError("idx: truncated images file: " + images_path);

  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw ConfigError("idx: cannot open labels file: " + labels_path);
  const std::uint32_t lmagic = read_be_u32(lbl, "labels magic");
  if (lmagic != kIdxLabelsMagic) {
    std::ostringstream os;
    os << "idx: bad labels magic, expected 0x" << std::hex << kIdxLabelsMagic << ", got 0x"
       << lmagic << " in " << labels_path;
    throw ConfigError(os.str());
  }
  const std::uint32_t lcount = read_be_u32(lbl, "label count");
  if (lcount != count) {
    std::ostringstream os;
    os << "idx: image/label count mismatch: " << count << " images vs " << lcount << " labels";
    throw ConfigError(os.str());
  }
  std::vector<unsigned char> raw_labels(lcount);
  lbl.read(reinterpret_cast<char*>(raw_labels.data()), lcount);
  if (!lbl) throw ConfigError("idx: truncated labels file: " + labels_path);

  Dataset ds;
  ds.shape = DataShape{1, static_cast<Index>(rows), static_cast<Index>(cols)};
  ds.split = split;
  ds.inputs.resize(count, static_cast<Index>(rows) * cols);
  ds.labels.resize(count);
  int max_label = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t p = 0; p < rows * cols; ++p)
      ds.inputs(i, p) = pixels[static_cast<size_t>(i) * rows * cols + p] / 255.0;
    ds.labels[i] = raw_labels[i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.classes = max_label + 1;
  return ds;
}

void save_idx(const Dataset& dataset, const std::string& images_path,
              const std::string& labels_path) {
  if (dataset.shape.channels != 1)
    throw std::runtime_error("save_idx: only single-channel images supported");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("save_idx: cannot write " + images_path);
  write_be_u32(img, kIdxImagesMagic);
  write_be_u32(img, static_cast<std::uint32_t>(dataset.size()));
  write_be_u32(img, static_cast<std::uint32_t>(dataset.shape.height));
  write_be_u32(img, static_cast<std::uint32_t>(dataset.shape.width));
  for (Index i = 0; i < dataset.size(); ++i)
    for (Index p = 0; p < dataset.shape.size(); ++p) {
      const double v = std::clamp(dataset.inputs(i, p), 0.0, 1.0);
      const unsigned char b = static_cast<unsigned char>(std::lround(v * 255.0));
      img.write(reinterpret_cast<const char*>(&b), 1);
    }

  std::ofstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw std::runtime_error("save_idx: cannot write " + labels_path);
  write_be_u32(lbl, kIdxLabelsMagic);
  write_be_u32(lbl, static_cast<std::uint32_t>(dataset.size()));
  for (int label : dataset.labels) {
    const unsigned char b = static_cast<unsigned char>(label);
    lbl.write(reinterpret_cast<const char*>(&b), 1);
  }
}

namespace {

bool is_image_only(Transform::Op op) {
  switch (op) {
    case Transform::Op::RandomShift:
    case Transform::Op::HorizontalFlip:
    case Transform::Op::Cutout:
      return true;
    default:
      return false;
  }
}

void apply_transform(Vector& x, const Transform& t, const DataShape& shape, RngStream& rng) {
  switch (t.op) {
    case Transform::Op::None:
      break;
    case Transform::Op::GaussianJitter: {
      const double sigma = t.value;
      for (Index i = 0; i < x.size(); ++i) {
        const double n = rng.normal();
        if (sigma > 0.0) x[i] += sigma * n;
      }
      break;
    }
    case Transform::Op::RandomShift: {
      const long m = static_cast<long>(t.value);
      const long dx = rng.uniform_int(-m, m);
      const long dy = rng.uniform_int(-m, m);
      if (dx == 0 && dy == 0) break;
      Vector out = Vector::Zero(x.size());
      const Index H = shape.height, W = shape.width;
      for (Index c = 0; c < shape.channels; ++c)
        for (Index y = 0; y < H; ++y)
          for (Index xx = 0; xx < W; ++xx) {
            const Index sy = y - dy, sx = xx - dx;
            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
            out[(c * H + y) * W + xx] = x[(c * H + sy) * W + sx];
          }
      x = std::move(out);
      break;
    }
    case Transform::Op::HorizontalFlip: {
      const double u = rng.uniform();
      if (u >= t.value) break;
      const Index H = shape.height, W = shape.width;
      for (Index c = 0; c < shape.channels; ++c)
        for (Index y = 0; y < H; ++y)
          for (Index xx = 0; xx < W / 2; ++xx)
            std::swap(x[(c * H + y) * W + xx], x[(c * H + y) * W + (W - 1 - xx)]);
      break;
    }
    case Transform::Op::Cutout: {
      const Index s = static_cast<Index>(t.value);
      if (s == 0) break;
      const Index H = shape.height, W = shape.width;
      if (s > H || s > W)
        throw std::runtime_error("augment: cutout size larger than image");
      const Index top = rng.uniform_int(0, H - s);
      const Index left = rng.uniform_int(0, W - s);
      for (Index c = 0; c < shape.channels; ++c)
        for (Index y = top; y < top + s; ++y)
          for (Index xx = left; xx < left + s; ++xx) x[(c * H + y) * W + xx] = 0.0;
      break;
    }
    case Transform::Op::Rotate: {
      const double deg = rng.uniform(-t.value, t.value);
      const double rad = deg * M_PI / 180.0;
      const double ca = std::cos(rad), sa = std::sin(rad);
      if (shape.is_flat()) {
        if (shape.channels != 2)
          throw std::runtime_error("augment: rotate on flat data needs 2-D points");
        const double x0 = x[0], x1 = x[1];
        x[0] = ca * x0 - sa * x1;
        x[1] = sa * x0 + ca * x1;
      } else {
        // nearest-neighbour rotation about the image centre
        const Index H = shape.height, W = shape.width;
        const double cyc = (H - 1) / 2.0, cxc = (W - 1) / 2.0;
        Vector out = Vector::Zero(x.size());
        for (Index c = 0; c < shape.channels; ++c)
          for (Index y = 0; y < H; ++y)
            for (Index xx = 0; xx < W; ++xx) {
              // inverse map: source = R(-rad) * (dst - centre) + centre
              const double dy = y - cyc, dx = xx - cxc;
              const Index sy = static_cast<Index>(std::lround(ca * dy + sa * dx + cyc));
              const Index sx = static_cast<Index>(std::lround(-sa * dy + ca * dx + cxc));
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              out[(c * H + y) * W + xx] = x[(c * H + sy) * W + sx];
            }
        x = std::move(out);
      }
      break;
    }
  }
}

}  // namespace

Batch augment(const Batch& batch, const AugmentationSpec& spec, const DataShape& shape,
              std::uint64_t augment_seed, long epoch) {
  for (const auto& t : spec.transforms) {
    if (shape.is_flat() && is_image_only(t.op))
      throw std::runtime_error("augment: transform inapplicable to 2-D point data");
    if (t.op == Transform::Op::GaussianJitter && t.value < 0)
      throw std::runtime_error("augment: jitter sigma must be >= 0");
    if (t.op == Transform::Op::HorizontalFlip && (t.value < 0 || t.value > 1))
      throw std::runtime_error("augment: flip probability outside [0,1]");
    if (t.op == Transform::Op::Cutout && t.value < 0)
      throw std::runtime_error("augment: cutout size must be >= 0");
  }
  Batch out;
  out.labels = batch.labels;
  out.example_ids = batch.example_ids;
  out.inputs.resize(batch.inputs.rows(), batch.inputs.cols());
  Vector x(batch.inputs.cols());
  for (Index i = 0; i < batch.inputs.rows(); ++i) {
    x = batch.inputs.row(i);
    RngStream rng(derive_seed(augment_seed, static_cast<std::uint64_t>(spec.assignment),
                              static_cast<std::uint64_t>(epoch),
                              static_cast<std::uint64_t>(batch.example_ids[i])));
    for (const auto& t : spec.transforms) apply_transform(x, t, shape, rng);
    out.inputs.row(i) = x;
  }
  return out;
}

Dataset add_gaussian_noise(const Dataset& dataset, const NoiseSpec& spec, std::uint64_t seed) {
  if (spec.variance < 0.0) throw ConfigError("add_gaussian_noise: variance must be >= 0");
  Dataset out = dataset;
  const double sd = std::sqrt(spec.variance);
  RngStream rng(derive_seed(seed, 0x6015eULL));
  for (Index i = 0; i < out.inputs.rows(); ++i)
    for (Index j = 0; j < out.inputs.cols(); ++j)
      out.inputs(i, j) += spec.mean + sd * rng.normal();
  return out;
}

Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw ConfigError("subsample: fraction must be in (0,1]");
  std::vector<Index> keep;
  for (int c = 0; c < dataset.classes; ++c) {
    std::vector<Index> members;
    for (Index i = 0; i < dataset.size(); ++i)
      if (dataset.labels[i] == c) members.push_back(i);
    if (members.empty()) continue;
    const Index want = std::max<Index>(
        1, static_cast<Index>(std::llround(fraction * static_cast<double>(members.size()))));
    RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    // partial Fisher-Yates
    for (Index k = 0; k < want && k < static_cast<Index>(members.size()); ++k) {
      const Index j = k + rng.uniform_int(0, static_cast<long>(members.size()) - 1 - k);
      std::swap(members[k], members[j]);
      keep.push_back(members[k]);
    }
  }
  std::sort(keep.begin(), keep.end());
  Dataset out;
  out.shape = dataset.shape;
  out.classes = dataset.classes;
  out.split = dataset.split;
  out.inputs.resize(static_cast<Index>(keep.size()), dataset.inputs.cols());
  out.labels.resize(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) {
    out.inputs.row(static_cast<Index>(i)) = dataset.inputs.row(keep[i]);
    out.labels[i] = dataset.labels[keep[i]];
  }
  return out;
}

void save_dataset_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset_csv: cannot write " + path);
  for (Index c = 0; c < dataset.inputs.cols(); ++c) out << "x" << c << ",";
  out << "label\n";
  char buf[64];
  for (Index i = 0; i < dataset.size(); ++i) {
    for (Index c = 0; c < dataset.inputs.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", dataset.inputs(i, c));
      out << buf << ",";
    }
    out << dataset.labels[i] << "\n";
  }
}

Dataset load_dataset_csv(const std::string& path, const std::string& split) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_dataset_csv: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("load_dataset_csv: empty file " + path);
  Index dims = 0;
  {
    std::stringstream ss(header);
    std::string col;
    std::vector<std::string> cols;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.empty() || cols.back() != "label")
      throw ConfigError("load_dataset_csv: header must end with 'label'");
    dims = static_cast<Index>(cols.size()) - 1;
    for (Index c = 0; c < dims; ++c)
      if (cols[c] != "x" + std::to_string(c))
        throw ConfigError("load_dataset_csv: unexpected column '" + cols[c] + "'");
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  int max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> vals;
    while (std::getline(ss, tok, ',')) {
      double v = 0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ConfigError("load_dataset_csv: bad number '" + tok + "'");
      vals.push_back(v);
    }
    if (static_cast<Index>(vals.size()) != dims + 1)
      throw ConfigError("load_dataset_csv: row width mismatch");
    labels.push_back(static_cast<int>(vals.back()));
    max_label = std::max(max_label, labels.back());
    vals.pop_back();
    rows.push_back(std::move(vals));
  }
  Dataset ds;
  ds.shape = DataShape{dims, 1, 1};
  ds.classes = max_label + 1;
  ds.split = split;
  ds.inputs.resize(static_cast<Index>(rows.size()), dims);
  ds.labels = std::move(labels);
  for (size_t i = 0; i < rows.size(); ++i)
    for (Index c = 0; c < dims; ++c) ds.inputs(static_cast<Index>(i), c) = rows[i][c];
  return ds;
}

}  // namespace okdph
