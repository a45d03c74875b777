#pragma once

#include <string>
#include <vector>

#include "okdph/types.hpp"

namespace okdph {

/// Raw class scores, B x C, tagged with the producing model
/// ("s1".."sM", "hwm", "ensemble").
struct Logits {
  Matrix values;
  std::string tag;
};

/// Row-wise temperature softmax output. Log-probabilities are kept alongside
/// so downstream KL stays finite for any finite logits.
struct SoftDistribution {
  Matrix probs;
  Matrix log_probs;
  double tau = 1.0;
};

struct LossBreakdown {
  double ce_student = 0.0;
  double ce_hwm = 0.0;
  double kd = 0.0;
  double total = 0.0;
  double omega = 1.0;
  double beta = 0.0;
};

struct CeResult {
  double loss = 0.0;
  Matrix grad;  // dLoss/dlogits, (softmax - onehot)/B
};

/// Mean over the batch of -log softmax(z)[y], max-subtracted for stability.
CeResult cross_entropy(const Logits& logits, const std::vector<int>& labels);

/// Row-wise softmax of z/tau.
SoftDistribution soften(const Logits& logits, double tau);

struct KlResult {
  double loss = 0.0;     // tau^2-scaled, mean over batch
  Matrix grad_student;   // tau*(p_student - p_target)/B
};

/// tau^2 * KL(target || student) summed over classes, mean over batch; the
/// second argument is the target and is treated as a constant.
KlResult kl_with_temperature(const SoftDistribution& student,
                             const SoftDistribution& target);

/// Elementwise mean over the M student logits and the HWM logits.
Logits ensemble_logits(const std::vector<Logits>& students, const Logits& hwm);

struct TotalLossResult {
  LossBreakdown breakdown;
  Matrix grad_student;  // at z_m
  Matrix grad_hwm;      // at z_hwm, from the (1-omega) CE term only
};

/// total = omega*CE(z_m,y) + (1-omega)*CE(z_hwm,y) + beta*tau^2*KL(en || m).
/// z_en is a constant target; no gradient is returned for it.
TotalLossResult total_student_loss(const Logits& z_m, const Logits& z_hwm,
                                   const Logits& z_en, const std::vector<int>& labels,
                                   double omega, double beta, double tau);

}  // namespace okdph
