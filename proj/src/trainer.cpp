#include "okdph/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "okdph/rng.hpp"

namespace okdph {

std::string method_name(Method m) {
  switch (m) {
    case Method::Okdph: return "okdph";
    case Method::Base: return "base";
    case Method::Dml: return "dml";
    case Method::Ema: return "ema";
    case Method::Swa: return "swa";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "okdph") return Method::Okdph;
  if (name == "base") return Method::Base;
  if (name == "dml") return Method::Dml;
  if (name == "ema") return Method::Ema;
  if (name == "swa") return Method::Swa;
  throw ConfigError("unknown method: " + name);
}

double LrSchedule::at(double base_lr, int epoch) const {
  if (kind == Kind::Constant) return base_lr;
  double lr = base_lr;
  for (int m : milestones)
    if (epoch >= m) lr *= factor;
  return lr;
}

void TrainConfig::validate() const {
  if (students < 1) throw ConfigError("config: students must be >= 1");
  if (omega < 0.0 || omega > 1.0) throw ConfigError("config: omega outside [0,1]");
  if (beta < 0.0) throw ConfigError("config: beta must be >= 0");
  if (gamma < 0.0 || gamma > 1.0) throw ConfigError("config: gamma outside [0,1]");
  if (!(tau > 0.0)) throw ConfigError("config: tau must be > 0");
  if (delta.value < 1) throw ConfigError("config: delta must be >= 1");
  if (lr < 0 || momentum < 0 || weight_decay < 0)
    throw ConfigError("config: optimizer coefficients must be >= 0");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (snapshot_every < 1) throw ConfigError("config: snapshot_every must be >= 1");
  if (eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
  if (ema_decay < 0.0 || ema_decay > 1.0) throw ConfigError("config: ema_decay outside [0,1]");
  if ((method == Method::Ema || method == Method::Swa) && students != 1)
    throw ConfigError("config: ema/swa run a single student (students = 1)");
  if (alpha.size() != 0 && alpha.size() != students)
    throw ConfigError("config: alpha length must equal student count");
  if (alpha.size() != 0)
    for (Index i = 0; i < alpha.size(); ++i)
      if (!(alpha[i] > 0.0)) throw ConfigError("config: alpha entries must be > 0");
  if (swa_start_epoch < 0 || swa_start_epoch > epochs)
    throw ConfigError("config: swa_start_epoch outside [0, epochs]");
}

void TrainConfig::derive_stream_seeds() {
  const auto s = static_cast<std::uint64_t>(seed);
  seeds.init = derive_seed(s, 1);
  seeds.dirichlet = derive_seed(s, 2);
  seeds.augment = derive_seed(s, 3);
  seeds.shuffle = derive_seed(s, 4);
}

Vector TrainConfig::effective_alpha() const {
  if (alpha.size() == students) return alpha;
  return Vector::Ones(students);
}

int TrainConfig::effective_swa_start() const {
  if (swa_start_epoch > 0) return swa_start_epoch;
  return std::max(1, (3 * epochs) / 4);
}

double evaluate_accuracy(const NetworkSpec& spec, const ParamVector& params,
                         const Dataset& dataset, int batch_size) {
  long correct = 0;
  for (Index start = 0; start < dataset.size(); start += batch_size) {
    const Index n = std::min<Index>(batch_size, dataset.size() - start);
    const Matrix logits = forward(spec, params, dataset.inputs.middleRows(start, n));
    for (Index i = 0; i < n; ++i) {
      Index pred = 0;
      logits.row(i).maxCoeff(&pred);
      if (static_cast<int>(pred) == dataset.labels[start + i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

namespace {

int model_rank(const std::string& tag) {
  if (tag.size() > 1 && tag[0] == 's') {
    try {
      return std::stoi(tag.substr(1));
    } catch (const std::exception&) {
    }
  }
  if (tag == "ensemble") return -1;  // not a checkpoint
  return 1 << 20;                    // hwm / ema / swa come last
}

struct Engine {
  const TrainConfig& cfg;
  const Dataset& train;
  const Dataset& test;
  NetworkSpec spec;
  long batches_per_epoch = 0;
  std::vector<StudentState> students;
  std::vector<AugmentationSpec> pipelines;  // one per student
  RngStream dirichlet_rng;
  RunMetrics metrics;
  SnapshotLog snapshots;
  BestCheckpoint best;
  std::uint64_t work_units = 0;  // processed example passes; drives wall_s

  Engine(const TrainConfig& c, const Dataset& tr, const Dataset& te)
      : cfg(c), train(tr), test(te), dirichlet_rng(c.seeds.dirichlet) {
    if (train.shape != test.shape || train.classes != test.classes)
      throw ConfigError("train and test splits disagree on shape or classes");
    spec = network_from_id(cfg.network_id, train.shape, train.classes);
    batches_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    snapshots.spec_hash = spec.hash();
    snapshots.network_id = cfg.network_id;
    snapshots.layout = spec.layout();
  }

  void init_students(const std::vector<ParamVector>* initial) {
    const ParamLayout layout = spec.layout();
    for (int m = 0; m < cfg.students; ++m) {
      StudentState s;
      if (initial) {
        if (static_cast<int>(initial->size()) != cfg.students)
          throw ConfigError("initial student count does not match config");
        s.params = (*initial)[m];
        require_same_layout(s.params.layout, layout, "initial students vs spec");
      } else {
        s.params = init_network(spec, derive_seed(cfg.seeds.init, static_cast<std::uint64_t>(m)));
      }
      s.sgd = make_sgd_state(layout, cfg.lr, cfg.momentum, cfg.weight_decay);
      s.aug_index = m;
      students.push_back(std::move(s));
    }
    pipelines.clear();
    for (int m = 0; m < cfg.students; ++m) {
      AugmentationSpec p = cfg.student_aug.empty()
                               ? AugmentationSpec{}
                               : cfg.student_aug[m % cfg.student_aug.size()];
      p.assignment = cfg.student_aug.empty() ? 0 : static_cast<int>(m % cfg.student_aug.size());
      pipelines.push_back(std::move(p));
    }
  }

  std::vector<Index> epoch_order(int epoch) {
    std::vector<Index> order(train.size());
    std::iota(order.begin(), order.end(), Index{0});
    RngStream rng(derive_seed(cfg.seeds.shuffle, static_cast<std::uint64_t>(epoch)));
    for (Index i = train.size() - 1; i > 0; --i) {
      const Index j = rng.uniform_int(0, i);
      std::swap(order[i], order[j]);
    }
    return order;
  }

  Batch gather(const std::vector<Index>& order, long k) {
    const Index start = k * cfg.batch_size;
    const Index n = std::min<Index>(cfg.batch_size, train.size() - start);
    Batch b;
    b.inputs.resize(n, train.inputs.cols());
    b.labels.resize(n);
    b.example_ids.resize(n);
    for (Index i = 0; i < n; ++i) {
      const Index src = order[start + i];
      b.inputs.row(i) = train.inputs.row(src);
      b.labels[i] = train.labels[src];
      b.example_ids[i] = src;
    }
    return b;
  }

  void snapshot_students(long batch) {
    for (int m = 0; m < cfg.students; ++m)
      snapshots.entries.push_back(
          SnapshotEntry{batch, "s" + std::to_string(m + 1), students[m].params.values});
  }

  void record_row(int epoch, const std::string& model, double ce, double kd, double hwm_ce,
                  double acc) {
    MetricsRow row;
    row.epoch = epoch;
    row.method = method_name(cfg.method);
    row.seed = cfg.seed;
    row.model = model;
    row.train_ce = ce;
    row.train_kd = kd;
    row.train_hwm_ce = hwm_ce;
    row.test_acc = acc;
    row.wall_s = static_cast<double>(work_units) * 1e-6;
    metrics.rows.push_back(std::move(row));
  }

  void consider_best(double acc, int epoch, const std::string& model, const ParamVector& params) {
    if (acc > best.acc) {
      best.acc = acc;
      best.epoch = epoch;
      best.model = model;
      best.params = params;
    }
  }

  double eval_model(const ParamVector& params) {
    work_units += static_cast<std::uint64_t>(test.size());
    return evaluate_accuracy(spec, params, test, cfg.batch_size);
  }

  Matrix eval_logits(const ParamVector& params) {
    work_units += static_cast<std::uint64_t>(test.size());
    Matrix logits(test.size(), spec.classes);
    for (Index start = 0; start < test.size(); start += cfg.batch_size) {
      const Index n = std::min<Index>(cfg.batch_size, test.size() - start);
      logits.middleRows(start, n) = forward(spec, params, test.inputs.middleRows(start, n));
    }
    return logits;
  }

  static double accuracy_of_logits(const Matrix& logits, const std::vector<int>& labels) {
    long correct = 0;
    for (Index i = 0; i < logits.rows(); ++i) {
      Index pred = 0;
      logits.row(i).maxCoeff(&pred);
      if (static_cast<int>(pred) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
  }

  void set_epoch_lr(int epoch) {
    const double lr = cfg.lr_schedule.at(cfg.lr, epoch);
    for (auto& s : students) s.sgd.lr = lr;
  }

  // ---- OKDPH / Base (Base is the degenerate operating point of the same loop) ----

  TrainResult run_okdph() {
    const bool is_base = cfg.method == Method::Base;
    const double omega = is_base ? 1.0 : cfg.omega;
    const double beta = is_base ? 0.0 : cfg.beta;
    const double gamma = is_base ? 0.0 : cfg.gamma;
    const Vector alpha = cfg.effective_alpha();
    FusionPolicy fusion{cfg.delta.value, cfg.delta.unit_epochs, gamma};
    AugmentationSpec hwm_pipe = cfg.hwm_aug;
    hwm_pipe.assignment = static_cast<int>(cfg.student_aug.empty() ? 1 : cfg.student_aug.size());

    HwmState hwm = build_hwm(collect_params(), sample_dirichlet(alpha, dirichlet_rng, 0));
    snapshot_students(0);
    snapshots.entries.push_back(SnapshotEntry{0, "hwm", hwm.params.values});

    long t = 0;  // global batch counter
    const long total_batches = static_cast<long>(cfg.epochs) * batches_per_epoch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      set_epoch_lr(epoch);
      const std::vector<Index> order = epoch_order(epoch);
      Vector ce_sum = Vector::Zero(cfg.students);
      Vector kd_sum = Vector::Zero(cfg.students);
      double hwm_ce_sum = 0.0;
      for (long k = 0; k < batches_per_epoch; ++k) {
        ++t;
        const Batch batch = gather(order, k);
        const Index bsz = batch.inputs.rows();

        std::vector<ForwardTrace> traces(cfg.students);
        std::vector<Logits> z(cfg.students);
        for (int m = 0; m < cfg.students; ++m) {
          const Batch aug = augment(batch, pipelines[m], train.shape, cfg.seeds.augment, epoch);
          z[m] = Logits{forward_with_trace(spec, students[m].params, aug.inputs, traces[m]),
                        "s" + std::to_string(m + 1)};
          work_units += static_cast<std::uint64_t>(bsz);
        }
        const Batch hwm_batch = augment(batch, hwm_pipe, train.shape, cfg.seeds.augment, epoch);
        ForwardTrace hwm_trace;
        const Logits z_hwm{forward_with_trace(spec, hwm.params, hwm_batch.inputs, hwm_trace),
                           "hwm"};
        work_units += static_cast<std::uint64_t>(bsz);

        const Logits z_en = ensemble_logits(z, z_hwm);

        // HWM CE gradient is shared across students; one backward, routed per
        // hwm_grad_mode with the (1-omega) weight applied before routing.
        GradVector hwm_grad;
        const bool need_hwm_grad = (1.0 - omega) > 0.0;
        std::vector<GradVector> grads(cfg.students);
        for (int m = 0; m < cfg.students; ++m) {
          const TotalLossResult loss =
              total_student_loss(z[m], z_hwm, z_en, batch.labels, omega, beta, cfg.tau);
          ce_sum[m] += loss.breakdown.ce_student;
          kd_sum[m] += loss.breakdown.kd;
          if (m == 0) hwm_ce_sum += loss.breakdown.ce_hwm;
          if (m == 0 && need_hwm_grad) {
            // loss.grad_hwm already carries the (1-omega) weight
            hwm_grad = backward_from_trace(spec, hwm.params, hwm_trace, loss.grad_hwm);
            work_units += static_cast<std::uint64_t>(bsz);
          }
          grads[m] = backward_from_trace(spec, students[m].params, traces[m], loss.grad_student);
          work_units += static_cast<std::uint64_t>(bsz);
          if (need_hwm_grad) {
            if (cfg.hwm_grad_mode == HwmGradMode::Chain)
              grads[m].values += hwm.weights.r[m] * hwm_grad.values;
            else
              grads[m].values += hwm_grad.values;
          }
        }
        for (int m = 0; m < cfg.students; ++m)
          sgd_step(students[m].params, grads[m], students[m].sgd);

        hwm = build_hwm(collect_params(), sample_dirichlet(alpha, dirichlet_rng, t));
        apply_fusion(hwm, fusion, t);

        if (t % cfg.snapshot_every == 0 || t == total_batches) {
          snapshot_students(t);
          snapshots.entries.push_back(SnapshotEntry{t, "hwm", hwm.params.values});
        }
      }

      if (epoch % cfg.eval_every == 0) {
        std::vector<Logits> test_logits(cfg.students);
        for (int m = 0; m < cfg.students; ++m) {
          test_logits[m] = Logits{eval_logits(students[m].params), "s" + std::to_string(m + 1)};
          const double acc = accuracy_of_logits(test_logits[m].values, test.labels);
          record_row(epoch, test_logits[m].tag, ce_sum[m] / batches_per_epoch,
                     kd_sum[m] / batches_per_epoch, hwm_ce_sum / batches_per_epoch, acc);
          consider_best(acc, epoch, test_logits[m].tag, students[m].params);
        }
        const Logits hwm_test{eval_logits(hwm.params), "hwm"};
        const double hwm_acc = accuracy_of_logits(hwm_test.values, test.labels);
        record_row(epoch, "hwm", hwm_ce_sum / batches_per_epoch, 0.0,
                   hwm_ce_sum / batches_per_epoch, hwm_acc);
        consider_best(hwm_acc, epoch, "hwm", hwm.params);
        const Logits en = ensemble_logits(test_logits, hwm_test);
        record_row(epoch, "ensemble", 0.0, 0.0, 0.0,
                   accuracy_of_logits(en.values, test.labels));
      }
    }
    return finish();
  }

  // ---- DML: CE + beta * tau^2 * mean-over-peers KL(peer || own) ----

  TrainResult run_dml() {
    snapshot_students(0);
    long t = 0;
    const long total_batches = static_cast<long>(cfg.epochs) * batches_per_epoch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      set_epoch_lr(epoch);
      const std::vector<Index> order = epoch_order(epoch);
      Vector ce_sum = Vector::Zero(cfg.students);
      Vector kd_sum = Vector::Zero(cfg.students);
      for (long k = 0; k < batches_per_epoch; ++k) {
        ++t;
        const Batch batch = gather(order, k);
        const Index bsz = batch.inputs.rows();
        std::vector<ForwardTrace> traces(cfg.students);
        std::vector<Logits> z(cfg.students);
        std::vector<SoftDistribution> soft(cfg.students);
        for (int m = 0; m < cfg.students; ++m) {
          const Batch aug = augment(batch, pipelines[m], train.shape, cfg.seeds.augment, epoch);
          z[m] = Logits{forward_with_trace(spec, students[m].params, aug.inputs, traces[m]),
                        "s" + std::to_string(m + 1)};
          soft[m] = soften(z[m], cfg.tau);
          work_units += static_cast<std::uint64_t>(bsz);
        }
        std::vector<GradVector> grads(cfg.students);
        for (int m = 0; m < cfg.students; ++m) {
          const CeResult ce = cross_entropy(z[m], batch.labels);
          ce_sum[m] += ce.loss;
          Matrix dz = ce.grad;
          double kd_value = 0.0;
          if (cfg.students > 1 && cfg.beta > 0.0) {
            Matrix kd_grad = Matrix::Zero(dz.rows(), dz.cols());
            for (int j = 0; j < cfg.students; ++j) {
              if (j == m) continue;
              const KlResult kl = kl_with_temperature(soft[m], soft[j]);
              kd_value += kl.loss;
              kd_grad += kl.grad_student;
            }
            kd_value /= (cfg.students - 1);
            kd_grad /= static_cast<double>(cfg.students - 1);
            dz += cfg.beta * kd_grad;
          }
          kd_sum[m] += kd_value;
          grads[m] = backward_from_trace(spec, students[m].params, traces[m], dz);
          work_units += static_cast<std::uint64_t>(bsz);
        }
        for (int m = 0; m < cfg.students; ++m)
          sgd_step(students[m].params, grads[m], students[m].sgd);
        if (t % cfg.snapshot_every == 0 || t == total_batches) snapshot_students(t);
      }
      if (epoch % cfg.eval_every == 0) {
        std::vector<Logits> test_logits(cfg.students);
        for (int m = 0; m < cfg.students; ++m) {
          test_logits[m] = Logits{eval_logits(students[m].params), "s" + std::to_string(m + 1)};
          const double acc = accuracy_of_logits(test_logits[m].values, test.labels);
          record_row(epoch, test_logits[m].tag, ce_sum[m] / batches_per_epoch,
                     kd_sum[m] / batches_per_epoch, 0.0, acc);
          consider_best(acc, epoch, test_logits[m].tag, students[m].params);
        }
        Matrix en = test_logits[0].values;
        for (int m = 1; m < cfg.students; ++m) en += test_logits[m].values;
        en /= static_cast<double>(cfg.students);
        record_row(epoch, "ensemble", 0.0, 0.0, 0.0, accuracy_of_logits(en, test.labels));
      }
    }
    return finish();
  }

  // ---- EMA: shadow <- d*shadow + (1-d)*theta per batch ----

  TrainResult run_ema() {
    ParamVector shadow = students[0].params;
    snapshot_students(0);
    snapshots.entries.push_back(SnapshotEntry{0, "ema", shadow.values});
    long t = 0;
    const long total_batches = static_cast<long>(cfg.epochs) * batches_per_epoch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      set_epoch_lr(epoch);
      const std::vector<Index> order = epoch_order(epoch);
      double ce_acc = 0.0;
      for (long k = 0; k < batches_per_epoch; ++k) {
        ++t;
        const Batch batch = gather(order, k);
        const Index bsz = batch.inputs.rows();
        const Batch aug = augment(batch, pipelines[0], train.shape, cfg.seeds.augment, epoch);
        ForwardTrace trace;
        const Logits z{forward_with_trace(spec, students[0].params, aug.inputs, trace), "s1"};
        work_units += static_cast<std::uint64_t>(bsz);
        const CeResult ce = cross_entropy(z, batch.labels);
        ce_acc += ce.loss;
        const GradVector g = backward_from_trace(spec, students[0].params, trace, ce.grad);
        work_units += static_cast<std::uint64_t>(bsz);
        sgd_step(students[0].params, g, students[0].sgd);
        shadow.values =
            cfg.ema_decay * shadow.values + (1.0 - cfg.ema_decay) * students[0].params.values;
        if (t % cfg.snapshot_every == 0 || t == total_batches) {
          snapshot_students(t);
          snapshots.entries.push_back(SnapshotEntry{t, "ema", shadow.values});
        }
      }
      if (epoch % cfg.eval_every == 0) {
        const double acc = eval_model(students[0].params);
        record_row(epoch, "s1", ce_acc / batches_per_epoch, 0.0, 0.0, acc);
        consider_best(acc, epoch, "s1", students[0].params);
        const double ema_acc = eval_model(shadow);
        record_row(epoch, "ema", 0.0, 0.0, 0.0, ema_acc);
        consider_best(ema_acc, epoch, "ema", shadow);
      }
    }
    return finish();
  }

  // ---- SWA: equal-weight average of epoch-end parameters from a start epoch ----

  TrainResult run_swa() {
    const int start = cfg.effective_swa_start();
    Vector swa_sum = Vector::Zero(students[0].params.values.size());
    long swa_count = 0;
    snapshot_students(0);
    long t = 0;
    const long total_batches = static_cast<long>(cfg.epochs) * batches_per_epoch;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      set_epoch_lr(epoch);
      const std::vector<Index> order = epoch_order(epoch);
      double ce_acc = 0.0;
      for (long k = 0; k < batches_per_epoch; ++k) {
        ++t;
        const Batch batch = gather(order, k);
        const Index bsz = batch.inputs.rows();
        const Batch aug = augment(batch, pipelines[0], train.shape, cfg.seeds.augment, epoch);
        ForwardTrace trace;
        const Logits z{forward_with_trace(spec, students[0].params, aug.inputs, trace), "s1"};
        work_units += static_cast<std::uint64_t>(bsz);
        const CeResult ce = cross_entropy(z, batch.labels);
        ce_acc += ce.loss;
        const GradVector g = backward_from_trace(spec, students[0].params, trace, ce.grad);
        work_units += static_cast<std::uint64_t>(bsz);
        sgd_step(students[0].params, g, students[0].sgd);
        if (t % cfg.snapshot_every == 0 || t == total_batches) snapshot_students(t);
      }
      if (epoch >= start) {
        swa_sum += students[0].params.values;
        ++swa_count;
      }
      if (epoch % cfg.eval_every == 0) {
        const double acc = eval_model(students[0].params);
        record_row(epoch, "s1", ce_acc / batches_per_epoch, 0.0, 0.0, acc);
        consider_best(acc, epoch, "s1", students[0].params);
        ParamVector swa_params = students[0].params;
        if (swa_count > 0) swa_params.values = swa_sum / static_cast<double>(swa_count);
        const double swa_acc = eval_model(swa_params);
        record_row(epoch, "swa", 0.0, 0.0, 0.0, swa_acc);
        consider_best(swa_acc, epoch, "swa", swa_params);
      }
    }
    return finish();
  }

  std::vector<ParamVector> collect_params() const {
    std::vector<ParamVector> out;
    out.reserve(students.size());
    for (const auto& s : students) out.push_back(s.params);
    return out;
  }

  bool apply_fusion(const HwmState& hwm, const FusionPolicy& policy, long t) {
    std::vector<ParamVector> ps;
    ps.reserve(students.size());
    for (auto& s : students) ps.push_back(std::move(s.params));
    const bool fired = fuse_students(ps, hwm, policy, t, batches_per_epoch);
    for (size_t m = 0; m < students.size(); ++m) students[m].params = std::move(ps[m]);
    return fired;
  }

  TrainResult finish() {
    TrainResult res;
    res.metrics = std::move(metrics);
    res.snapshots = std::move(snapshots);
    res.best = std::move(best);
    res.spec_hash = spec.hash();
    res.network_id = cfg.network_id;
    return res;
  }
};

}  // namespace

TrainResult run_training(const TrainConfig& config, const Dataset& train, const Dataset& test,
                         const std::vector<ParamVector>* initial_students) {
  TrainConfig cfg = config;
  const StreamSeeds zero{};
  if (cfg.seeds.init == zero.init && cfg.seeds.dirichlet == zero.dirichlet &&
      cfg.seeds.augment == zero.augment && cfg.seeds.shuffle == zero.shuffle)
    cfg.derive_stream_seeds();
  cfg.validate();
  if (train.size() < 1 || test.size() < 1) throw ConfigError("empty dataset split");

  const auto t0 = std::chrono::steady_clock::now();
  Engine engine(cfg, train, test);
  engine.init_students(initial_students);
  TrainResult res;
  switch (cfg.method) {
    case Method::Okdph:
    case Method::Base:
      res = engine.run_okdph();
      break;
    case Method::Dml:
      res = engine.run_dml();
      break;
    case Method::Ema:
      res = engine.run_ema();
      break;
    case Method::Swa:
      res = engine.run_swa();
      break;
  }
  if (res.best.acc < 0) throw std::runtime_error("no evaluation occurred; raise epochs or lower eval_every");
  res.real_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::pair<int, std::string> select_best(const RunMetrics& metrics) {
  const MetricsRow* winner = nullptr;
  for (const auto& row : metrics.rows) {
    if (model_rank(row.model) < 0) continue;
    if (!winner || row.test_acc > winner->test_acc) {
      winner = &row;
    } else if (row.test_acc == winner->test_acc) {
      if (row.epoch < winner->epoch ||
          (row.epoch == winner->epoch && model_rank(row.model) < model_rank(winner->model)))
        winner = &row;
    }
  }
  if (!winner) throw std::runtime_error("select_best: no evaluations recorded");
  return {winner->epoch, winner->model};
}

std::vector<std::string> metrics_csv_header() {
  return {"epoch", "method", "seed", "model", "train_ce", "train_kd", "train_hwm_ce",
          "test_acc", "wall_s"};
}

std::vector<std::vector<std::string>> metrics_csv_rows(const RunMetrics& metrics) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(metrics.rows.size());
  for (const auto& r : metrics.rows) {
    rows.push_back({std::to_string(r.epoch), r.method, std::to_string(r.seed), r.model,
                    format_g17(r.train_ce), format_g17(r.train_kd), format_g17(r.train_hwm_ce),
                    format_g17(r.test_acc), format_g17(r.wall_s)});
  }
  return rows;
}

}  // namespace okdph
