#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "okdph/types.hpp"

namespace okdph {

/// Checkpoint: fixed header (format version, network spec hash, network id,
/// layout descriptor) followed by little-endian 64-bit floats in layout order.
struct Checkpoint {
  std::uint64_t spec_hash = 0;
  std::string network_id;
  ParamVector params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct SnapshotEntry {
  long batch = 0;
  std::string tag;  // "s1".."sM" or "hwm"
  Vector values;
};

/// Ordered parameter snapshots sharing one layout.
struct SnapshotLog {
  std::uint64_t spec_hash = 0;
  std::string network_id;
  ParamLayout layout;
  std::vector<SnapshotEntry> entries;
};

void save_snapshots(const SnapshotLog& log, const std::string& path);
SnapshotLog load_snapshots(const std::string& path);

/// Locale-independent %.17g formatting; round-trips doubles exactly.
std::string format_g17(double v);
double parse_double_strict(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
CsvTable read_csv(const std::string& path);

}  // namespace okdph
