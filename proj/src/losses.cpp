#include "okdph/losses.hpp"

#include <cmath>
#include <sstream>

namespace okdph {

CeResult cross_entropy(const Logits& logits, const std::vector<int>& labels) {
  const Matrix& z = logits.values;
  const Index batch = z.rows();
  const Index classes = z.cols();
  if (batch == 0) throw std::runtime_error("cross_entropy: empty batch");
  if (static_cast<Index>(labels.size()) != batch)
    throw std::runtime_error("cross_entropy: label count does not match batch");
  for (Index i = 0; i < batch; ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      std::ostringstream os;
      os << "cross_entropy: label " << labels[i] << " outside [0," << classes << ") at row " << i;
      throw std::runtime_error(os.str());
    }
  }

  CeResult res;
  res.grad.resize(batch, classes);
  double loss_sum = 0.0;
  for (Index i = 0; i < batch; ++i) {
    const double zmax = z.row(i).maxCoeff();
    double sum = 0.0;
    for (Index c = 0; c < classes; ++c) sum += std::exp(z(i, c) - zmax);
    const double lse = zmax + std::log(sum);
    loss_sum += lse - z(i, labels[i]);
    for (Index c = 0; c < classes; ++c)
      res.grad(i, c) = std::exp(z(i, c) - lse);
    res.grad(i, labels[i]) -= 1.0;
  }
  const double inv_b = 1.0 / static_cast<double>(batch);
  res.loss = loss_sum * inv_b;
  res.grad *= inv_b;
  return res;
}

SoftDistribution soften(const Logits& logits, double tau) {
  if (!(tau > 0.0)) throw std::runtime_error("soften: temperature must be > 0");
  const Matrix& z = logits.values;
  SoftDistribution out;
  out.tau = tau;
  out.probs.resize(z.rows(), z.cols());
  out.log_probs.resize(z.rows(), z.cols());
  for (Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    double sum = 0.0;
    for (Index c = 0; c < z.cols(); ++c) sum += std::exp((z(i, c) - zmax) / tau);
    const double log_sum = std::log(sum);
    for (Index c = 0; c < z.cols(); ++c) {
      const double lp = (z(i, c) - zmax) / tau - log_sum;
      out.log_probs(i, c) = lp;
      out.probs(i, c) = std::exp(lp);
    }
  }
  return out;
}

KlResult kl_with_temperature(const SoftDistribution& student, const SoftDistribution& target) {
  if (student.tau != target.tau)
    throw std::runtime_error("kl_with_temperature: temperature mismatch between distributions");
  if (student.probs.rows() != target.probs.rows() ||
      student.probs.cols() != target.probs.cols())
    throw std::runtime_error("kl_with_temperature: shape mismatch");
  const double tau = student.tau;
  const Index batch = student.probs.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);

  double acc = 0.0;
  for (Index i = 0; i < batch; ++i) {
    for (Index c = 0; c < student.probs.cols(); ++c) {
      const double pt = target.probs(i, c);
      if (pt > 0.0)
        acc += pt * (target.log_probs(i, c) - student.log_probs(i, c));
    }
  }
  KlResult res;
  res.loss = tau * tau * acc * inv_b;
  res.grad_student = tau * inv_b * (student.probs - target.probs);
  return res;
}

Logits ensemble_logits(const std::vector<Logits>& students, const Logits& hwm) {
  if (students.empty()) throw std::runtime_error("ensemble_logits: need at least one student");
  const Index rows = hwm.values.rows();
  const Index cols = hwm.values.cols();
  for (const auto& s : students)
    if (s.values.rows() != rows || s.values.cols() != cols)
      throw std::runtime_error("ensemble_logits: shape mismatch between models");
  Matrix sum = students[0].values;
  for (size_t m = 1; m < students.size(); ++m) sum += students[m].values;
  sum += hwm.values;
  sum /= static_cast<double>(students.size() + 1);
  return Logits{std::move(sum), "ensemble"};
}

TotalLossResult total_student_loss(const Logits& z_m, const Logits& z_hwm, const Logits& z_en,
                                   const std::vector<int>& labels, double omega, double beta,
                                   double tau) {
  if (omega < 0.0 || omega > 1.0)
    throw std::runtime_error("total_student_loss: omega outside [0,1]");
  if (beta < 0.0) throw std::runtime_error("total_student_loss: beta must be >= 0");
  if (!(tau > 0.0)) throw std::runtime_error("total_student_loss: tau must be > 0");

  const CeResult ce_m = cross_entropy(z_m, labels);
  const CeResult ce_h = cross_entropy(z_hwm, labels);
  const KlResult kd = kl_with_temperature(soften(z_m, tau), soften(z_en, tau));

  TotalLossResult res;
  res.breakdown.ce_student = ce_m.loss;
  res.breakdown.ce_hwm = ce_h.loss;
  res.breakdown.kd = kd.loss;
  res.breakdown.omega = omega;
  res.breakdown.beta = beta;
  res.breakdown.total = omega * ce_m.loss + (1.0 - omega) * ce_h.loss + beta * kd.loss;
  res.grad_student = omega * ce_m.grad + beta * kd.grad_student;
  res.grad_hwm = (1.0 - omega) * ce_h.grad;
  return res;
}

}  // namespace okdph
