#include "okdph/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace okdph {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kCkptMagic[4] = {'O', 'K', 'D', 'C'};
constexpr char kSnapMagic[4] = {'O', 'K', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_pod(std::istream& in, T& v, const std::string& what) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("truncated file while reading " + what);
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& what) {
  std::uint32_t n = 0;
  read_pod(in, n, what + " length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("truncated file while reading " + what);
  return s;
}

void write_layout(std::ostream& out, const ParamLayout& layout) {
  write_pod(out, static_cast<std::uint32_t>(layout.slices.size()));
  for (const auto& s : layout.slices) {
    write_pod(out, static_cast<std::int32_t>(s.layer));
    write_pod(out, static_cast<std::uint64_t>(s.offset));
    write_pod(out, static_cast<std::uint64_t>(s.length));
  }
}

ParamLayout read_layout(std::istream& in) {
  std::uint32_t n = 0;
  read_pod(in, n, "layout slice count");
  ParamLayout layout;
  layout.slices.resize(n);
  for (auto& s : layout.slices) {
    std::int32_t layer;
    std::uint64_t offset, length;
    read_pod(in, layer, "slice layer");
    read_pod(in, offset, "slice offset");
    read_pod(in, length, "slice length");
    s.layer = layer;
    s.offset = static_cast<Index>(offset);
    s.length = static_cast<Index>(length);
  }
  return layout;
}

void write_values(std::ostream& out, const Vector& v) {
  write_pod(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Vector read_values(std::istream& in, const std::string& what) {
  std::uint64_t n = 0;
  read_pod(in, n, what + " count");
  Vector v(static_cast<Index>(n));
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated file while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCkptMagic, 4);
  write_pod(out, kFormatVersion);
  write_pod(out, ckpt.spec_hash);
  write_string(out, ckpt.network_id);
  write_layout(out, ckpt.params.layout);
  write_values(out, ckpt.params.values);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw ConfigError("not a checkpoint file (bad magic): " + path);
  std::uint32_t version = 0;
  read_pod(in, version, "checkpoint version");
  if (version != kFormatVersion)
    throw ConfigError("unsupported checkpoint version in " + path);
  Checkpoint ckpt;
  read_pod(in, ckpt.spec_hash, "spec hash");
  ckpt.network_id = read_string(in, "network id");
  ckpt.params.layout = read_layout(in);
  ckpt.params.values = read_values(in, "parameters");
  if (ckpt.params.values.size() != ckpt.params.layout.total())
    throw ConfigError("checkpoint corrupt: value count does not match layout: " + path);
  return ckpt;
}

void save_snapshots(const SnapshotLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write snapshots: " + path);
  out.write(kSnapMagic, 4);
  write_pod(out, kFormatVersion);
  write_pod(out, log.spec_hash);
  write_string(out, log.network_id);
  write_layout(out, log.layout);
  write_pod(out, static_cast<std::uint64_t>(log.entries.size()));
  for (const auto& e : log.entries) {
    write_pod(out, static_cast<std::int64_t>(e.batch));
    write_string(out, e.tag);
    write_values(out, e.values);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

SnapshotLog load_snapshots(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open snapshots: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kSnapMagic, 4) != 0)
    throw ConfigError("not a snapshot file (bad magic): " + path);
  std::uint32_t version = 0;
  read_pod(in, version, "snapshot version");
  if (version != kFormatVersion) throw ConfigError("unsupported snapshot version in " + path);
  SnapshotLog log;
  read_pod(in, log.spec_hash, "spec hash");
  log.network_id = read_string(in, "network id");
  log.layout = read_layout(in);
  std::uint64_t count = 0;
  read_pod(in, count, "entry count");
  log.entries.resize(count);
  for (auto& e : log.entries) {
    std::int64_t batch;
    read_pod(in, batch, "entry batch");
    e.batch = static_cast<long>(batch);
    e.tag = read_string(in, "entry tag");
    e.values = read_values(in, "entry values");
    if (e.values.size() != log.layout.total())
      throw ConfigError("snapshot corrupt: value count does not match layout: " + path);
  }
  return log;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double_strict(const std::string& s) {
  double v = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw std::runtime_error("bad numeric field: '" + s + "'");
  return v;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::runtime_error("csv row width does not match header: " + path);
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    if (line.back() == ',') fields.push_back("");
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw std::runtime_error("csv row width does not match header: " + path);
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw std::runtime_error("empty csv: " + path);
  return table;
}

}  // namespace okdph
