#include "fisherlat/samplers.hpp"

#include <cmath>
#include <stdexcept>

namespace fisherlat {

namespace {
// Heat-bath chain shared by the sampler and the detailed-balance diagnostic.
// Flip probability 1/(1 + exp(dE/T)) with dE = 2 s (nn_sum + H); nn_sum takes
// values {-4,-2,0,2,4}, so the 10 probabilities are precomputed.
struct IsingChain {
    int side;
    std::vector<std::int8_t> spins;
    double flip_prob[2][5];
    Rng rng;

    IsingChain(const SamplerParams& params, int side_) : side(side_), rng(params.seed) {
        const double T = params.t1;
        const double H = params.t2;
        if (!(T > 0.0)) throw std::invalid_argument("ising_sample: temperature must be positive");
        if (side < 2) throw std::invalid_argument("ising_sample: side must be >= 2");
        const std::int8_t init = (H >= 0.0) ? std::int8_t{1} : std::int8_t{-1};
        spins.assign(static_cast<std::size_t>(side) * side, init);
        for (int si = 0; si < 2; ++si) {
            const double s = si == 0 ? -1.0 : 1.0;
            for (int k = 0; k < 5; ++k) {
                const double nn = 2.0 * k - 4.0;
                flip_prob[si][k] = 1.0 / (1.0 + std::exp(2.0 * s * (nn + H) / T));
            }
        }
    }

    void attempt() {
        const int n = side * side;
        const int site = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(n)));
        const int i = site / side;
        const int j = site % side;
        const int up = (i == 0 ? side - 1 : i - 1) * side + j;
        const int dn = (i == side - 1 ? 0 : i + 1) * side + j;
        const int lf = i * side + (j == 0 ? side - 1 : j - 1);
        const int rt = i * side + (j == side - 1 ? 0 : j + 1);
        const int nn_sum = spins[static_cast<std::size_t>(up)] + spins[static_cast<std::size_t>(dn)] +
                           spins[static_cast<std::size_t>(lf)] + spins[static_cast<std::size_t>(rt)];
        const std::int8_t s = spins[static_cast<std::size_t>(site)];
        if (rng.uniform() < flip_prob[(s + 1) >> 1][(nn_sum + 4) >> 1])
            spins[static_cast<std::size_t>(site)] = static_cast<std::int8_t>(-s);
    }
};
}  // namespace

IsingState ising_sample(const SamplerParams& params, int side) {
    if (params.sweeps < 1) throw std::invalid_argument("ising_sample: sweeps must be >= 1");
    IsingChain chain(params, side);
    const long long total_attempts = params.sweeps * static_cast<long long>(side) * side;
    for (long long a = 0; a < total_attempts; ++a) chain.attempt();
    IsingState state;
    state.side = side;
    state.spins = std::move(chain.spins);
    return state;
}

std::vector<long long> ising_visit_histogram(const SamplerParams& params, int side,
                                             long long steps) {
    if (side * side > 20)
        throw std::invalid_argument("ising_visit_histogram: lattice too large to enumerate");
    IsingChain chain(params, side);
    std::vector<long long> hist(static_cast<std::size_t>(1) << (side * side), 0);
    for (long long a = 0; a < steps; ++a) {
        chain.attempt();
        std::size_t mask = 0;
        for (int k = 0; k < side * side; ++k)
            if (chain.spins[static_cast<std::size_t>(k)] > 0) mask |= std::size_t{1} << k;
        hist[mask]++;
    }
    return hist;
}

IsingStats ising_stats(const IsingState& state) {
    const int L = state.side;
    if (L < 2 || state.spins.size() != static_cast<std::size_t>(L) * L)
        throw std::invalid_argument("ising_stats: invalid state");
    long long bond = 0;
    long long spin = 0;
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < L; ++j) {
            const int s = state.at(i, j);
            const int right = state.at(i, j == L - 1 ? 0 : j + 1);
            const int down = state.at(i == L - 1 ? 0 : i + 1, j);
            bond += s * (right + down);
            spin += s;
        }
    }
    const double n = static_cast<double>(L) * L;
    return {static_cast<double>(bond) / n, static_cast<double>(spin) / n};
}

TasepState tasep_sample(const SamplerParams& params, int sites, long long attempts) {
    const double alpha = params.t1;
    const double beta = params.t2;
    if (!(alpha > 0.0) || alpha > 1.0 || !(beta > 0.0) || beta > 1.0)
        throw std::invalid_argument("tasep_sample: alpha, beta must lie in (0,1]");
    if (sites < 2) throw std::invalid_argument("tasep_sample: sites must be >= 2");
    const long long min_attempts = 8LL * sites * sites;
    if (attempts <= 0) attempts = min_attempts;
    if (attempts < min_attempts)
        throw std::invalid_argument("tasep_sample: need at least 8*M^2 move attempts");

    TasepState state;
    state.sites = sites;
    state.occupancy.assign(static_cast<std::size_t>(sites), 0);

    Rng rng(params.seed);
    for (auto& o : state.occupancy) o = rng.bernoulli(0.5) ? 1 : 0;

    auto* occ = state.occupancy.data();
    const int slots = sites + 1;
    for (long long a = 0; a < attempts; ++a) {
        const int slot = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(slots)));
        if (slot == 0) {
            if (!occ[0] && rng.uniform() < alpha) occ[0] = 1;
        } else if (slot == sites) {
            if (occ[sites - 1] && rng.uniform() < beta) occ[sites - 1] = 0;
        } else {
            // internal bond slot - 1 -> slot
            if (occ[slot - 1] && !occ[slot]) {
                occ[slot - 1] = 0;
                occ[slot] = 1;
            }
        }
    }
    return state;
}

std::vector<double> tasep_stats(const TasepState& state, int bins) {
    const int M = state.sites;
    if (bins < 1 || M % bins != 0)
        throw std::invalid_argument("tasep_stats: bins must divide sites");
    const int w = M / bins;
    std::vector<double> out(static_cast<std::size_t>(bins) + 2, 0.0);
    for (int b = 0; b < bins; ++b) {
        long long c = 0;
        for (int i = b * w; i < (b + 1) * w; ++i) c += state.occupancy[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(b)] = static_cast<double>(c) / w;
    }
    out[static_cast<std::size_t>(bins)] = state.occupancy.front();
    out[static_cast<std::size_t>(bins) + 1] = state.occupancy.back();
    return out;
}

std::vector<std::int8_t> oracle_sample(const SamplerParams& params, int n_spins) {
    if (n_spins < 2 || n_spins % 2 != 0)
        throw std::invalid_argument("oracle_sample: n_spins must be even and >= 2");
    if (!std::isfinite(params.t1) || !std::isfinite(params.t2))
        throw std::invalid_argument("oracle_sample: parameters must be finite");
    // P(s=+1) = e^h / (e^h + e^{-h}) = 1 / (1 + e^{-2h})
    const double p1 = 1.0 / (1.0 + std::exp(-2.0 * params.t1));
    const double p2 = 1.0 / (1.0 + std::exp(-2.0 * params.t2));
    Rng rng(params.seed);
    std::vector<std::int8_t> spins(static_cast<std::size_t>(n_spins));
    const int half = n_spins / 2;
    for (int i = 0; i < half; ++i) spins[static_cast<std::size_t>(i)] = rng.bernoulli(p1) ? 1 : -1;
    for (int i = half; i < n_spins; ++i) spins[static_cast<std::size_t>(i)] = rng.bernoulli(p2) ? 1 : -1;
    return spins;
}

namespace {
double ln_2cosh(double h) {
    // log(2 cosh h) = |h| + log1p(exp(-2|h|)), overflow-safe
    const double a = std::fabs(h);
    return a + std::log1p(std::exp(-2.0 * a));
}
}  // namespace

double oracle_logz(double h1, double h2, int n_spins) {
    return 0.5 * n_spins * (ln_2cosh(h1) + ln_2cosh(h2));
}

void oracle_logz_grad(double h1, double h2, int n_spins, double& g1, double& g2) {
    g1 = 0.5 * n_spins * std::tanh(h1);
    g2 = 0.5 * n_spins * std::tanh(h2);
}

void oracle_logz_hess(double h1, double h2, int n_spins, double& h11, double& h22) {
    const double c1 = std::cosh(h1);
    const double c2 = std::cosh(h2);
    h11 = 0.5 * n_spins / (c1 * c1);
    h22 = 0.5 * n_spins / (c2 * c2);
}

void oracle_suff_stat(const std::vector<std::int8_t>& spins, double& f1, double& f2) {
    const std::size_t half = spins.size() / 2;
    long long a = 0, b = 0;
    for (std::size_t i = 0; i < half; ++i) a += spins[i];
    for (std::size_t i = half; i < spins.size(); ++i) b += spins[i];
    f1 = static_cast<double>(a);
    f2 = static_cast<double>(b);
}

}  // namespace fisherlat
