#pragma once

#include <cstdint>
#include <vector>

#include "fisherlat/rng.hpp"

namespace fisherlat {

// Square-lattice spin configuration, periodic boundary conditions.
struct IsingState {
    int side = 0;
    std::vector<std::int8_t> spins;  // row-major, values in {-1,+1}

    std::int8_t at(int i, int j) const { return spins[static_cast<std::size_t>(i) * side + j]; }
};

struct TasepState {
    int sites = 0;
    std::vector<std::uint8_t> occupancy;  // values in {0,1}
};

struct SamplerParams {
    double t1 = 0.0;  // T for Ising, alpha for TASEP, h1 for the oracle
    double t2 = 0.0;  // H for Ising, beta for TASEP, h2 for the oracle
    long long sweeps = 1000;
    std::uint64_t seed = 1;
};

// Heat-bath single-spin dynamics for the ferromagnetic 2D Ising model,
//   p(x | T, H) ~ exp( (1/T) ( sum_<ij> s_i s_j + H sum_i s_i ) ),
// the sign convention with an ordered low-temperature phase and T_cr ~ 2.27.
// One sweep = side^2 single-site update attempts. Spins start aligned with
// sign(H) (+1 at H = 0), so the ordered branch is reached within a
// 10^3-sweep budget at low T; a random quench would strand roughly a third
// of the chains in long-lived stripe states.
IsingState ising_sample(const SamplerParams& params, int side);

// (e, m): bond sum over all 2L^2 periodic bonds and spin sum, both per site.
struct IsingStats {
    double e = 0.0;
    double m = 0.0;
};
IsingStats ising_stats(const IsingState& state);

// Detailed-balance diagnostic: runs the same heat-bath kernel on a tiny
// lattice and counts how often each of the 2^(L^2) states is visited.
std::vector<long long> ising_visit_histogram(const SamplerParams& params, int side,
                                             long long steps);

// Random-sequential TASEP with open boundaries: each move attempt picks one of
// M+1 action slots uniformly (entry | M-1 internal bonds | exit). Entry fills
// site 0 with probability alpha if empty; exit drains site M-1 with
// probability beta if occupied. `attempts` <= 0 selects the 8*M^2 default.
TasepState tasep_sample(const SamplerParams& params, int sites, long long attempts = 0);

// Per-bin mean occupancies plus first/last site occupancy (boundary-current
// proxies). bins must divide sites.
std::vector<double> tasep_stats(const TasepState& state, int bins);

// Exactly solvable two-block independent-spin model: spin i in block k is +1
// with probability e^{h_k} / (e^{h_k} + e^{-h_k}). Exact sampling, no burn-in.
std::vector<std::int8_t> oracle_sample(const SamplerParams& params, int n_spins);

// log Z(h1, h2) = (n/2) (ln 2cosh h1 + ln 2cosh h2) and its derivatives.
double oracle_logz(double h1, double h2, int n_spins);
void oracle_logz_grad(double h1, double h2, int n_spins, double& g1, double& g2);
void oracle_logz_hess(double h1, double h2, int n_spins, double& h11, double& h22);

// Sufficient statistic f(x) = (block-1 spin sum, block-2 spin sum).
void oracle_suff_stat(const std::vector<std::int8_t>& spins, double& f1, double& f2);

}  // namespace fisherlat
