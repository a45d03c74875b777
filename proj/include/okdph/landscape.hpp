#pragma once

#include <functional>
#include <string>
#include <vector>

#include "okdph/data.hpp"
#include "okdph/network.hpp"
#include "okdph/types.hpp"

namespace okdph {

/// 2-D affine subspace of parameter space: mean snapshot plus the top two
/// principal directions of the recorded snapshots.
struct PcaPlane {
  Vector origin;
  Vector basis1;
  Vector basis2;
  double fraction1 = 0.0;  // explained variance fractions, fraction1 >= fraction2
  double fraction2 = 0.0;
};

struct GridExtents {
  double u_min = -1, u_max = 1;
  double v_min = -1, v_max = 1;
};

struct LossGrid {
  PcaPlane plane;
  GridExtents extents;
  Index resolution = 0;          // G; the grid is G x G
  Matrix losses;                 // losses(i,j) at (u_i, v_j); flagged cells hold +inf
  std::string dataset_tag;
  std::uint64_t spec_hash = 0;

  double u_at(Index i) const;
  double v_at(Index j) const;
};

struct Projection {
  double u = 0, v = 0, residual = 0;
};

struct SharpnessReport {
  std::string center_id;
  double sigma = 0.0;
  int samples = 0;
  double mean_increase = 0.0;
  double max_increase = 0.0;
  double baseline_loss = 0.0;
};

struct TrajectoryPoint {
  std::string model;
  long batch = 0;
  double u = 0, v = 0, residual = 0;
};

/// Top-2 PCA via the Gram-matrix method (S x S eigendecomposition; no P x P
/// work). Sign convention: each basis vector's largest-magnitude coordinate is
/// positive. Needs >= 3 snapshots of rank >= 2.
PcaPlane pca_plane(const std::vector<Vector>& snapshots);

Projection project(const PcaPlane& plane, const Vector& params);

/// Mean CE training loss at theta = origin + u*b1 + v*b2 for each grid point.
/// Non-finite cells are flagged (stored as +inf), not an abort.
LossGrid eval_loss_grid(const PcaPlane& plane, const GridExtents& extents, Index resolution,
                        const NetworkSpec& spec, const Dataset& dataset, int batch_size);

/// Mean/max loss increase over K random unit directions scaled by sigma.
SharpnessReport sharpness(const ParamVector& checkpoint, const NetworkSpec& spec,
                          const Dataset& dataset, double sigma, int samples,
                          std::uint64_t seed, const std::string& center_id = "");

/// Same core over an arbitrary loss function; used by sharpness and by tests
/// with closed-form losses.
SharpnessReport sharpness_core(const std::function<double(const Vector&)>& loss,
                               const Vector& center, double sigma, int samples,
                               std::uint64_t seed, const std::string& center_id = "");

/// Mean CE over the full dataset, batched.
double dataset_mean_ce(const NetworkSpec& spec, const ParamVector& params,
                       const Dataset& dataset, int batch_size);

/// Writes grid.csv (u,v,loss row-major), trajectories.csv
/// (model,batch,u,v,residual) and a self-contained landscape.svg.
void export_landscape(const LossGrid& grid, const std::vector<TrajectoryPoint>& trajectories,
                      const std::string& out_dir);

}  // namespace okdph
