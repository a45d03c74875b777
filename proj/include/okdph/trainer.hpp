#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "okdph/data.hpp"
#include "okdph/hybrid.hpp"
#include "okdph/io.hpp"
#include "okdph/losses.hpp"
#include "okdph/network.hpp"

namespace okdph {

enum class Method { Okdph, Base, Dml, Ema, Swa };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

enum class HwmGradMode { Chain, Full };

struct DeltaSpec {
  long value = 1;
  bool unit_epochs = true;
};

struct LrSchedule {
  enum class Kind { Constant, Step } kind = Kind::Constant;
  std::vector<int> milestones;
  double factor = 0.1;

  double at(double base_lr, int epoch) const;
};

struct StreamSeeds {
  std::uint64_t init = 0;
  std::uint64_t dirichlet = 0;
  std::uint64_t augment = 0;
  std::uint64_t shuffle = 0;
};

struct TrainConfig {
  Method method = Method::Okdph;
  int students = 2;  // M
  double omega = 0.8;
  double beta = 0.8;
  double gamma = 0.5;
  DeltaSpec delta;
  double tau = 3.0;
  Vector alpha;  // length M; empty means all-ones
  HwmGradMode hwm_grad_mode = HwmGradMode::Chain;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 100;
  int batch_size = 128;
  long seed = 1;
  StreamSeeds seeds;  // derived from `seed` unless explicitly set
  std::string network_id = "mlp:16,16";
  double ema_decay = 0.999;
  int swa_start_epoch = 0;  // 0 means auto: max(1, 3*epochs/4)
  long snapshot_every = 50;
  int eval_every = 1;
  LrSchedule lr_schedule;
  std::vector<AugmentationSpec> student_aug;  // cycled over students; empty = jitter defaults
  AugmentationSpec hwm_aug;

  void validate() const;
  /// Fills seeds from the master seed; called by the config loader and by
  /// run_training when seeds were left all-zero.
  void derive_stream_seeds();
  Vector effective_alpha() const;
  int effective_swa_start() const;
};

/// One student: parameters, optimizer state, augmentation pipeline index.
struct StudentState {
  ParamVector params;
  SgdState sgd;
  int aug_index = 0;
};

struct MetricsRow {
  int epoch = 0;
  std::string method;
  long seed = 0;
  std::string model;
  double train_ce = 0.0;
  double train_kd = 0.0;
  double train_hwm_ce = 0.0;
  double test_acc = 0.0;
  double wall_s = 0.0;
};

struct RunMetrics {
  std::vector<MetricsRow> rows;
};

struct BestCheckpoint {
  double acc = -1.0;
  int epoch = 0;
  std::string model;
  ParamVector params;
};

struct TrainResult {
  RunMetrics metrics;
  SnapshotLog snapshots;
  BestCheckpoint best;
  std::uint64_t spec_hash = 0;
  std::string network_id;
  double real_seconds = 0.0;  // measured wall time; not part of the csv contract
};

/// Runs the configured method. All methods with equal seeds consume identical
/// shuffle and augmentation streams, so cross-method differences are
/// attributable to the algorithm. Optional initial students override the
/// seeded initialization (layouts must match the spec).
TrainResult run_training(const TrainConfig& config, const Dataset& train, const Dataset& test,
                         const std::vector<ParamVector>* initial_students = nullptr);

double evaluate_accuracy(const NetworkSpec& spec, const ParamVector& params,
                         const Dataset& dataset, int batch_size);

/// Highest test accuracy over all evaluated checkpoints; ties broken by
/// earliest epoch, then lowest student index, HWM (and other derived models)
/// last. The "ensemble" rows are diagnostics, not checkpoints.
std::pair<int, std::string> select_best(const RunMetrics& metrics);

std::vector<std::string> metrics_csv_header();
std::vector<std::vector<std::string>> metrics_csv_rows(const RunMetrics& metrics);

}  // namespace okdph
