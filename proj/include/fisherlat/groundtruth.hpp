#pragma once

#include <cstdint>
#include <vector>

#include "fisherlat/field.hpp"
#include "fisherlat/grid.hpp"
#include "fisherlat/posterior.hpp"

namespace fisherlat {

// Piecewise exact TASEP free energy: 1/4 in the maximal-current phase,
// a(1-a) in the low-density phase, b(1-b) in the high-density phase.
double tasep_free_energy(double alpha, double beta);
ScalarField tasep_free_energy_field(const ParamGrid& grid);

// Onsager free energy per site at H = 0 (ferromagnetic convention, J = 1):
//   -F/T = ln 2 + (1/(2 pi^2)) Int_0^pi Int_0^pi ln[cosh^2(2/T)
//           - sinh(2/T)(cos q1 + cos q2)] dq1 dq2,
// evaluated with fixed-order Gauss-Legendre quadrature.
double onsager_free_energy(double T, int quad_order = 256);

// Least-squares potential F for given forward-difference targets:
//   min_F ||D1 F - d1||^2 + ||D2 F - d2||^2,  gauge F(cell 0) = 0,
// solved by conjugate gradients on the normal equations.
struct IntegrateOptions {
    double rel_tol = 1e-8;
    long long max_iters = 0;  // 0 selects 100 * cells
};
struct IntegrateResult {
    ScalarField F;
    double residual = 0.0;  // sqrt of the final objective value
    long long iterations = 0;
};
IntegrateResult integrate_derivative_field(const ScalarField& d1, const ScalarField& d2,
                                           const IntegrateOptions& opt = {});

// Least squares over A(F)(t) = s F(t) + c1 t1 + c2 t2 + b.
struct AffineFit {
    double s = 0.0, c1 = 0.0, c2 = 0.0, b = 0.0;
    double rmse = 0.0;
    bool degenerate = false;  // rank-deficient design, refit with s = 0

    double apply(double f, double t1, double t2) const { return s * f + c1 * t1 + c2 * t2 + b; }
};

// generic fit y ~ s x + c1 t1 + c2 t2 + b with optional slope columns
AffineFit affine_fit(const std::vector<double>& x, const std::vector<double>& t1,
                     const std::vector<double>& t2, const std::vector<double>& y, bool use_t1,
                     bool use_t2);

AffineFit affine_rmse(const ScalarField& f_rec, const ScalarField& f_gt);

// Posterior-mean-as-statistics baseline: a regressor features -> t trained on
// the raw replica rows; the per-cell mean predictions act as derivative fields
// which are then integrated into a potential.
struct MeanAsStatConfig {
    long long iterations = 400;
    double lr = 1e-3;
    int batch = 4096;  // deterministic minibatches over the replica rows
    std::vector<int> hidden = {64, 64};
    std::uint64_t seed = 7;
};
struct MeanAsStatResult {
    ScalarField s_t1;  // predicted t1 per cell
    ScalarField s_t2;
    ScalarField F;     // integrated potential
    std::vector<double> loss_history;
    bool degenerate = false;  // constant predictions
};
MeanAsStatResult mean_as_stat(const FeatureTable& features, const MeanAsStatConfig& cfg = {});

// Monte Carlo (E, M) reference fields on the grid, symmetrized via
// M(T,-H) = -M(T,H) and E(T,-H) = E(T,H) when the H-range is symmetric.
struct IsingReferenceFields {
    ScalarField E;
    ScalarField M;
};
IsingReferenceFields ising_reference_fields(const ParamGrid& grid, const SamplerSpec& spec,
                                            int replicas, std::uint64_t seed);
// Same extraction from an already-built feature table (features must be (e, m)).
IsingReferenceFields ising_reference_fields_from(const FeatureTable& table);

}  // namespace fisherlat
