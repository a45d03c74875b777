#pragma once

#include <vector>

#include "okdph/rng.hpp"
#include "okdph/types.hpp"

namespace okdph {

/// One Dirichlet sample on the M-simplex; the convex weights of the HWM.
struct HybridWeights {
  Vector r;
  long batch_index = 0;
};

struct HwmState {
  ParamVector params;       // sum_m r_m * theta_m, in student order
  HybridWeights weights;    // the sample used to build it
  long built_at_batch = 0;
};

struct FusionPolicy {
  long interval = 1;        // in batches unless unit_epochs
  bool unit_epochs = true;
  double ratio = 0.5;       // gamma in [0,1]
};

/// Gamma-method Dirichlet draw: g_m ~ Gamma(alpha_m, 1), r_m = g_m / sum(g).
HybridWeights sample_dirichlet(const Vector& alpha, RngStream& rng, long batch_index = 0);

HwmState build_hwm(const std::vector<ParamVector>& students, const HybridWeights& weights);

/// If mod(t, interval-in-batches) == 0: theta_m <- ratio*theta_hwm +
/// (1-ratio)*theta_m for every student, returning true. t is the global batch
/// counter starting at 1.
bool fuse_students(std::vector<ParamVector>& students, const HwmState& hwm,
                   const FusionPolicy& policy, long t, long batches_per_epoch);

/// Chain rule through theta_hwm = sum r_m theta_m: student m receives
/// r_m * grad_at_hwm.
std::vector<GradVector> route_hwm_gradient(const GradVector& grad_at_hwm,
                                           const HybridWeights& weights);

}  // namespace okdph
