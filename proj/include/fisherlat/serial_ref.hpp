#pragma once

#include <cstdint>
#include <vector>

#include "fisherlat/geometry.hpp"
#include "fisherlat/grid.hpp"
#include "fisherlat/mlp.hpp"
#include "fisherlat/posterior.hpp"

// Plain single-threaded reference implementations of the OpenMP kernels.
// They follow the same arithmetic (including summation order and the fixed
// chunk structure of the reductions), so the parallel kernels must reproduce
// them bit for bit at any thread count. Used by the consistency tests and the
// benchmark; not part of the production path.

namespace fisherlat::ref {

FeatureTable build_feature_table(const ParamGrid& grid, const SamplerSpec& spec, int replicas,
                                 std::uint64_t seed);

PosteriorField posterior_from_features(const FeatureTable& table, double n_eff,
                                       Weighting weighting);

void mlp_value_batch(const Mlp& net, const Point2* pts, int batch, double* out);

std::vector<double> mlp_param_gradient(const Mlp& net, const Point2* pts, int batch,
                                       const double* adj);

MetricField hessian_field_from_values(const std::vector<double>& values, const ParamGrid& grid,
                                      double floor_scale = 1e-6);

double mse_bregman_loss(const std::vector<double>& values_a, const std::vector<double>& values_b,
                        const ParamGrid& grid);

}  // namespace fisherlat::ref
