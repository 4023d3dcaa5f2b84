#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fisherlat/grid.hpp"
#include "fisherlat/samplers.hpp"

namespace fisherlat {

enum class System { ising, tasep, oracle, external };

System system_from_string(const std::string& s);
std::string to_string(System s);

// What to sample at each grid point and which statistics to extract.
struct SamplerSpec {
    System system = System::oracle;
    int ising_side = 32;
    long long ising_sweeps = 1000;
    int tasep_sites = 256;
    long long tasep_attempts = 0;  // 0 selects the 8*M^2 default
    int tasep_bins = 8;
    int oracle_spins = 64;

    int feature_dim() const;
};

// One replica's feature vector at parameter point t.
std::vector<double> sample_features(const SamplerSpec& spec, Point2 t, std::uint64_t seed);

// Per-cell feature means and (unbiased) variances. Raw replica rows are kept
// for the Mean-as-Stat baseline.
struct FeatureTable {
    ParamGrid grid;
    int dim = 0;
    std::vector<int> counts;        // replicas per cell
    std::vector<double> means;      // cells x dim
    std::vector<double> variances;  // cells x dim
    std::vector<double> rows;       // total_rows x dim, grouped by cell
    std::vector<int> row_cell;      // cell id of each raw row

    const double* mean(int c) const { return &means[static_cast<std::size_t>(c) * dim]; }
    const double* variance(int c) const { return &variances[static_cast<std::size_t>(c) * dim]; }
    int min_count() const;
};

FeatureTable build_feature_table(const ParamGrid& grid, const SamplerSpec& spec, int replicas,
                                 std::uint64_t seed);

// Row-normalized densities P[c'][c] with sum_c P[c'][c] * cell_area == 1.
struct PosteriorField {
    ParamGrid grid;
    double n_eff = 0.0;
    std::vector<double> rows;  // cells x cells, row-major by source cell

    const double* row(int c_src) const {
        return &rows[static_cast<std::size_t>(c_src) * grid.cells()];
    }
    double* row(int c_src) { return &rows[static_cast<std::size_t>(c_src) * grid.cells()]; }
    // max |sum_c row * area - 1| over rows
    double max_row_normalization_error() const;
};

enum class Weighting { uniform, inverse_variance };
Weighting weighting_from_string(const std::string& s);

// P[c'][c] ~ exp(-(n_eff/2) sum_k w_k (mu_k(t_c) - mu_k(t_c'))^2), uniform
// prior over the grid. n_eff <= 0 selects the auto calibration below.
PosteriorField posterior_from_features(const FeatureTable& table, double n_eff,
                                       Weighting weighting, std::string* warning = nullptr);

// Largest n_eff such that every row keeps >= min_support cells above 1% of
// its max; keeps the JSD training signal away from the vanishing-gradient
// regime while staying as sharp as the features allow.
double auto_n_eff(const FeatureTable& table, Weighting weighting, int min_support = 5);

// Exact Bayes posterior row for the oracle model given the summed sufficient
// statistic of N samples: P[c] ~ exp(<t_c, f_sum> - N log Z(t_c)).
std::vector<double> oracle_posterior_row(const ParamGrid& grid, int n_spins, double f1_sum,
                                         double f2_sum, long long n_samples);

// Same row in the log domain (up to an additive constant). P^(1/N) underflows
// as densities once N D_B exceeds ~700, so the Theorem-3.1 convergence checks
// take the root here: P[c]^{1/N} (rescaled to max 1) = exp((a_c - max_a)/N).
std::vector<double> oracle_posterior_log_row(const ParamGrid& grid, int n_spins, double f1_sum,
                                             double f2_sum, long long n_samples);

// Field version: draws N oracle samples at every source cell center.
PosteriorField oracle_posterior(const ParamGrid& grid, int n_spins, long long n_samples,
                                std::uint64_t seed);

// Idealized (sampling-noise-free) oracle posterior: the empirical statistic is
// replaced by its exact expectation, so row c' equals the normalized Bregman
// kernel exp(-N D_{logZ}(t, t_c')). This is the N -> infinity limit object.
PosteriorField oracle_exact_posterior(const ParamGrid& grid, int n_spins, long long n_samples);

// Smoothed training target: rows ~ exp(-||t - t'||^2 / (2 sigma^2)).
PosteriorField smoothed_target(const ParamGrid& grid, double sigma);

// Feature CSV: header "t1,t2,f0,...,f{k-1}", one row per replica.
void dump_features(const FeatureTable& table, const std::string& path);
FeatureTable ingest_features(const std::string& path, const ParamGrid& grid,
                             std::string* warning = nullptr);

// Posterior dump: CSV "row_index,col_index,density" plus a JSON sidecar with
// the grid bounds and n_eff.
void dump_posterior(const PosteriorField& field, const std::string& csv_path,
                    const std::string& sidecar_path);
PosteriorField read_posterior(const std::string& csv_path, const std::string& sidecar_path);

}  // namespace fisherlat
