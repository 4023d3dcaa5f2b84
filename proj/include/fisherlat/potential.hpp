#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fisherlat/grid.hpp"
#include "fisherlat/mlp.hpp"
#include "fisherlat/posterior.hpp"

namespace fisherlat {

// Jensen-Shannon divergence between two density rows on the same grid
// (cell-area weighted). Always in [0, ln 2]; natural log.
double jsd(const double* p, const double* q, int n, double cell_area);
double jsd(const std::vector<double>& p, const std::vector<double>& q, double cell_area);

// Bregman divergence phi(t) - phi(t') - <grad phi(t'), t - t'> of a scalar
// field sampled on the grid; the source gradient uses central differences,
// one-sided at the boundary (flagged).
struct BregmanResult {
    double value = 0.0;
    bool one_sided = false;
};
BregmanResult bregman(const std::vector<double>& phi, const ParamGrid& grid, int c, int c_src);

// Values, source gradients and normalized kernel rows
//   q[c'][c] ~ exp(+<t_c, g(t_c')> - v_c)
// of a potential: the direct expansion of exp(-D(t, t')) up to t'-only
// factors. With the opposite sign the rows would not concentrate at t = t'
// for convex potentials.
struct ModelRowSet {
    ParamGrid grid;
    std::vector<double> values;  // v at cell centers
    std::vector<double> grad;    // 2 per cell
    std::vector<double> rows;    // densities, cells x cells

    const double* row(int c_src) const { return &rows[static_cast<std::size_t>(c_src) * grid.cells()]; }
};

// h1/h2 <= 0 select one grid spacing; the model is evaluated off-grid for the
// central differences, so no boundary special-casing is needed.
ModelRowSet kernel_rows(const Mlp& model, const ParamGrid& grid, double h1 = 0.0, double h2 = 0.0);

// Same construction from plain grid values (gradients one-sided at boundary).
ModelRowSet kernel_rows_from_values(const std::vector<double>& values, const ParamGrid& grid);

struct TrainConfig {
    long long iterations = 800;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 1;
    Activation activation = Activation::softplus;
    std::vector<int> hidden = {128, 128, 128};
    double grad_h1 = 0.0;        // spacing for the source-gradient finite differences
    double grad_h2 = 0.0;        // (<= 0 selects one grid spacing)
    double output_scale = 0.0;   // <= 0 selects calibration from target row covariances
    // The source gradients are finite differences of plain evaluations, so the
    // exact loss gradient needs only first-order backprop through the stencil
    // points. Holding them constant instead (true) makes the update cheaper
    // but is not a descent direction; it is kept for comparison runs.
    bool detach_source_gradient = false;

    void validate() const;
};

struct TrainResult {
    Mlp model;
    std::vector<double> loss_history;  // one entry per iteration (plus initial for iterations=0)
    double final_loss = 0.0;
    bool trend_ok = true;  // 100-iteration window means never increased by > 10%
};

// Minimizes the mean over source cells of JSD(target row, kernel row). Source
// gradients are held constant within each step (no second-order parameter
// derivatives); at a stationary point this does not move the optimum.
TrainResult train_potential(const PosteriorField& target, const TrainConfig& cfg);

// Loss of a model against a target without training (diagnostics).
double potential_loss(const Mlp& model, const PosteriorField& target, const TrainConfig& cfg);

// Discretized double integral of |e^{-D_A} - e^{-D_B}|^2 over the grid.
// Diagnostics only; JSD is the training loss.
double mse_bregman_loss(const std::vector<double>& values_a, const std::vector<double>& values_b,
                        const ParamGrid& grid);

void write_loss_history(const std::vector<double>& history, const std::string& path);

}  // namespace fisherlat
