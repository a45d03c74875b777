#include "okdph/hybrid.hpp"

#include <sstream>

namespace okdph {

HybridWeights sample_dirichlet(const Vector& alpha, RngStream& rng, long batch_index) {
  if (alpha.size() < 1) throw std::runtime_error("sample_dirichlet: empty alpha");
  for (Index m = 0; m < alpha.size(); ++m) {
    if (!(alpha[m] > 0.0)) {
      std::ostringstream os;
      os << "sample_dirichlet: alpha[" << m << "] = " << alpha[m] << " must be > 0";
      throw std::runtime_error(os.str());
    }
  }
  HybridWeights w;
  w.batch_index = batch_index;
  w.r.resize(alpha.size());
  double sum = 0.0;
  for (Index m = 0; m < alpha.size(); ++m) {
    w.r[m] = rng.gamma(alpha[m]);
    sum += w.r[m];
  }
  w.r /= sum;
  return w;
}

HwmState build_hwm(const std::vector<ParamVector>& students, const HybridWeights& weights) {
  if (students.empty()) throw std::runtime_error("build_hwm: no students");
  if (weights.r.size() != static_cast<Index>(students.size()))
    throw std::runtime_error("build_hwm: weight count does not match student count");
  for (size_t m = 1; m < students.size(); ++m)
    require_same_layout(students[0].layout, students[m].layout, "build_hwm students");

  HwmState hwm;
  hwm.weights = weights;
  hwm.built_at_batch = weights.batch_index;
  hwm.params.layout = students[0].layout;
  hwm.params.values = weights.r[0] * students[0].values;
  for (size_t m = 1; m < students.size(); ++m)
    hwm.params.values += weights.r[m] * students[m].values;
  return hwm;
}

bool fuse_students(std::vector<ParamVector>& students, const HwmState& hwm,
                   const FusionPolicy& policy, long t, long batches_per_epoch) {
  if (policy.interval < 1) throw std::runtime_error("fuse_students: interval must be >= 1");
  if (policy.ratio < 0.0 || policy.ratio > 1.0)
    throw std::runtime_error("fuse_students: ratio outside [0,1]");
  if (t < 1) throw std::runtime_error("fuse_students: batch counter starts at 1");
  const long interval_batches =
      policy.unit_epochs ? policy.interval * batches_per_epoch : policy.interval;
  if (t % interval_batches != 0) return false;
  if (policy.ratio == 0.0) return true;  // fires, but leaves parameters untouched
  for (auto& s : students) {
    require_same_layout(s.layout, hwm.params.layout, "fuse_students vs hwm");
    s.values = policy.ratio * hwm.params.values + (1.0 - policy.ratio) * s.values;
  }
  return true;
}

std::vector<GradVector> route_hwm_gradient(const GradVector& grad_at_hwm,
                                           const HybridWeights& weights) {
  std::vector<GradVector> routed;
  routed.reserve(weights.r.size());
  for (Index m = 0; m < weights.r.size(); ++m) {
    GradVector g;
    g.layout = grad_at_hwm.layout;
    g.values = weights.r[m] * grad_at_hwm.values;
    routed.push_back(std::move(g));
  }
  return routed;
}

}  // namespace okdph
