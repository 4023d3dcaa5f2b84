#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fisherlat/field.hpp"
#include "fisherlat/grid.hpp"
#include "fisherlat/mlp.hpp"

namespace fisherlat {

// 2x2 symmetric tensor stored as (a11, a12, a22).
struct Sym2 {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0;

    double quad(Point2 d) const { return a11 * d.x * d.x + 2.0 * a12 * d.x * d.y + a22 * d.y * d.y; }
    void eigenvalues(double& lo, double& hi) const;
};

Sym2 clamp_eigenvalues(const Sym2& g, double floor_eps, bool* clamped = nullptr);

// Per-cell metric tensors g(t) = Hessian of the potential, eigen-clamped so
// every tensor satisfies lambda_min >= floor_eps > 0.
struct MetricField {
    ParamGrid grid;
    std::vector<Sym2> tensors;
    double floor_eps = 0.0;
    int clamped_cells = 0;  // cells that hit the eigenvalue floor

    const Sym2& at_cell(int c) const { return tensors[static_cast<std::size_t>(c)]; }
};

enum class HessianMode { analytic, finite_diff };
HessianMode hessian_mode_from_string(const std::string& s);

// floor_scale sets floor_eps = floor_scale * mean positive trace (with a tiny
// absolute fallback for degenerate fields). Analytic mode needs softplus.
MetricField hessian_field(const Mlp& model, const ParamGrid& grid, HessianMode mode, double h,
                          double floor_scale = 1e-6);

// Finite differences of plain grid values; central 3/4-point second-difference
// stencils, shifted one-sided at the boundary.
MetricField hessian_field_from_values(const std::vector<double>& values, const ParamGrid& grid,
                                      double floor_scale = 1e-6);

// Componentwise bilinear interpolation over the cell-center lattice (clamped
// beyond the outermost centers), re-clamped to the field's eigenvalue floor.
Sym2 metric_at(const MetricField& field, Point2 p);
// Interpolated tensor plus its spatial derivative from the bilinear weights.
void metric_at_with_grad(const MetricField& field, Point2 p, Sym2& g, Sym2& dg_dx, Sym2& dg_dy);

double path_length(const std::vector<Point2>& path, const MetricField& field);

struct GeodesicConfig {
    long long iterations = 4000;
    double lr = 0.0;  // <= 0 selects 0.002 * min(domain extent)
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_tol = 1e-10;  // stop when the energy gradient is this small
};

struct GeodesicPath {
    std::vector<Point2> points;
    double length = 0.0;
    std::vector<double> energy_history;
    bool converged = false;
};

// Interior points start on the straight segment and descend the discrete path
// energy sum_k d_k^T g(mid_k) d_k (energy, not length, for parameterization
// stability). The best-length iterate is returned, so the result never beats
// the straight initialization by less than zero.
GeodesicPath geodesic(const MetricField& field, Point2 a, Point2 b, int n_points,
                      const GeodesicConfig& cfg = {});

// Mean turning angle per unit length over interior points.
double path_curvature(const std::vector<Point2>& path);

struct PhaseMap {
    ScalarField roughness;            // Frobenius norm of the tensor-field gradient
    std::vector<std::uint8_t> flags;  // 1 where roughness exceeds the quantile threshold
    double threshold = 0.0;
};

PhaseMap phase_map(const MetricField& field, double quantile = 0.95);

void write_metric_csv(const MetricField& field, const std::string& path);
MetricField read_metric_csv(const std::string& path, const ParamGrid& grid);
void write_path_csv(const std::vector<Point2>& path, const std::string& file);
std::vector<Point2> read_path_csv(const std::string& file);

}  // namespace fisherlat
