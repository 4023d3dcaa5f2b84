#include "fisherlat/serial_ref.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fisherlat/parallel.hpp"
#include "fisherlat/rng.hpp"

namespace fisherlat::ref {

namespace {
constexpr std::uint64_t kSampleStageTag = 0x5341u;  // must match the parallel kernel

// independent walker for the documented parameter layout:
// per layer W (out x in, row-major) then b
struct Layout {
    std::vector<int> sizes;
    std::vector<std::size_t> w_off, b_off;

    explicit Layout(const Mlp& net) : sizes(net.layer_sizes()) {
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            w_off.push_back(total);
            total += static_cast<std::size_t>(sizes[l + 1]) * sizes[l];
            b_off.push_back(total);
            total += static_cast<std::size_t>(sizes[l + 1]);
        }
    }
};

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }
double sigmoid(double z) {
    const double e = std::exp(-std::fabs(z));
    return z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

void forward(const Mlp& net, const Layout& lay, const double* u,
             std::vector<std::vector<double>>& act, std::vector<std::vector<double>>& pre) {
    const auto& L = lay.sizes;
    act.assign(L.size(), {});
    pre.assign(L.size() - 1, {});
    act[0].assign(u, u + L[0]);
    const auto& p = net.params();
    for (std::size_t l = 0; l + 1 < L.size(); ++l) {
        const double* W = &p[lay.w_off[l]];
        const double* b = &p[lay.b_off[l]];
        const bool last = (l + 2 == L.size());
        pre[l].assign(static_cast<std::size_t>(L[l + 1]), 0.0);
        act[l + 1].assign(static_cast<std::size_t>(L[l + 1]), 0.0);
        for (int i = 0; i < L[l + 1]; ++i) {
            double z = b[i];
            for (int j = 0; j < L[l]; ++j)
                z += W[static_cast<std::size_t>(i) * L[l] + j] * act[l][static_cast<std::size_t>(j)];
            pre[l][static_cast<std::size_t>(i)] = z;
            act[l + 1][static_cast<std::size_t>(i)] =
                last ? z
                     : (net.activation() == Activation::relu ? (z > 0.0 ? z : 0.0) : softplus(z));
        }
    }
}
}  // namespace

void mlp_value_batch(const Mlp& net, const Point2* pts, int batch, double* out) {
    const Layout lay(net);
    std::vector<std::vector<double>> act, pre;
    for (int b = 0; b < batch; ++b) {
        const double raw[2] = {pts[b].x, pts[b].y};
        double u[2];
        net.normalize_input(raw, u);
        forward(net, lay, u, act, pre);
        out[b] = net.output_scale * act.back()[0];
    }
}

std::vector<double> mlp_param_gradient(const Mlp& net, const Point2* pts, int batch,
                                       const double* adj) {
    const Layout lay(net);
    const auto& L = lay.sizes;
    std::vector<double> grad(net.params().size(), 0.0);
    // mirror the fixed-chunk accumulation order of the parallel kernel
    const std::size_t nchunks = (static_cast<std::size_t>(batch) + kReduceChunk - 1) / kReduceChunk;
    std::vector<std::vector<double>> act, pre;
    for (std::size_t c = 0; c < nchunks; ++c) {
        std::vector<double> buf(grad.size(), 0.0);
        const std::size_t lo = c * kReduceChunk;
        const std::size_t hi =
            std::min<std::size_t>(lo + kReduceChunk, static_cast<std::size_t>(batch));
        for (std::size_t b = lo; b < hi; ++b) {
            const double raw[2] = {pts[b].x, pts[b].y};
            double u[2];
            net.normalize_input(raw, u);
            forward(net, lay, u, act, pre);
            std::vector<double> delta(act.back().size());
            for (std::size_t k = 0; k < delta.size(); ++k)
                delta[k] = net.output_scale * adj[b * delta.size() + k];
            for (int l = static_cast<int>(L.size()) - 2; l >= 0; --l) {
                const std::size_t ul = static_cast<std::size_t>(l);
                const double* W = &net.params()[lay.w_off[ul]];
                for (int i = 0; i < L[ul + 1]; ++i) {
                    buf[lay.b_off[ul] + static_cast<std::size_t>(i)] += delta[static_cast<std::size_t>(i)];
                    for (int jj = 0; jj < L[ul]; ++jj)
                        buf[lay.w_off[ul] + static_cast<std::size_t>(i) * L[ul] + jj] +=
                            delta[static_cast<std::size_t>(i)] * act[ul][static_cast<std::size_t>(jj)];
                }
                if (l == 0) break;
                std::vector<double> prev(static_cast<std::size_t>(L[ul]), 0.0);
                for (int jj = 0; jj < L[ul]; ++jj) {
                    double acc = 0.0;
                    for (int i = 0; i < L[ul + 1]; ++i)
                        acc += delta[static_cast<std::size_t>(i)] * W[static_cast<std::size_t>(i) * L[ul] + jj];
                    const double z = pre[ul - 1][static_cast<std::size_t>(jj)];
                    prev[static_cast<std::size_t>(jj)] =
                        acc * (net.activation() == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : sigmoid(z));
                }
                delta.swap(prev);
            }
        }
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += buf[k];
    }
    return grad;
}

FeatureTable build_feature_table(const ParamGrid& grid, const SamplerSpec& spec, int replicas,
                                 std::uint64_t seed) {
    if (replicas < 2) throw std::invalid_argument("ref::build_feature_table: replicas must be >= 2");
    FeatureTable t;
    t.grid = grid;
    t.dim = spec.feature_dim();
    const int n = grid.cells();
    t.counts.assign(static_cast<std::size_t>(n), replicas);
    t.rows.assign(static_cast<std::size_t>(n) * replicas * t.dim, 0.0);
    t.row_cell.resize(static_cast<std::size_t>(n) * replicas);
    for (int c = 0; c < n; ++c) {
        const Point2 tc = grid.center_flat(c);
        for (int r = 0; r < replicas; ++r) {
            t.row_cell[static_cast<std::size_t>(c) * replicas + r] = c;
            const std::uint64_t s = derive_seed(
                seed, {kSampleStageTag, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r)});
            const auto f = sample_features(spec, tc, s);
            std::copy(f.begin(), f.end(),
                      t.rows.begin() + (static_cast<std::size_t>(c) * replicas + r) * t.dim);
        }
    }
    // means and unbiased variances per cell, same accumulation order
    t.means.assign(static_cast<std::size_t>(n) * t.dim, 0.0);
    t.variances.assign(static_cast<std::size_t>(n) * t.dim, 0.0);
    for (int c = 0; c < n; ++c) {
        double* mu = &t.means[static_cast<std::size_t>(c) * t.dim];
        for (int r = 0; r < replicas; ++r)
            for (int k = 0; k < t.dim; ++k)
                mu[k] += t.rows[(static_cast<std::size_t>(c) * replicas + r) * t.dim + k];
        for (int k = 0; k < t.dim; ++k) mu[k] /= replicas;
        double* var = &t.variances[static_cast<std::size_t>(c) * t.dim];
        for (int r = 0; r < replicas; ++r)
            for (int k = 0; k < t.dim; ++k) {
                const double d = t.rows[(static_cast<std::size_t>(c) * replicas + r) * t.dim + k] - mu[k];
                var[k] += d * d;
            }
        for (int k = 0; k < t.dim; ++k) var[k] /= (replicas - 1.0);
    }
    return t;
}

PosteriorField posterior_from_features(const FeatureTable& table, double n_eff,
                                       Weighting weighting) {
    if (!(n_eff > 0.0))
        throw std::invalid_argument("ref::posterior_from_features: explicit n_eff required");
    const int n = table.grid.cells();
    // pooled inverse-variance weights, same formulas as the parallel kernel
    std::vector<double> w(static_cast<std::size_t>(table.dim), 1.0);
    if (weighting == Weighting::inverse_variance) {
        std::vector<double> pooled(static_cast<std::size_t>(table.dim), 0.0);
        for (int c = 0; c < n; ++c)
            for (int k = 0; k < table.dim; ++k) pooled[static_cast<std::size_t>(k)] += table.variance(c)[k];
        for (auto& v : pooled) v /= n;
        std::vector<double> positive;
        for (double v : pooled)
            if (v > 0.0) positive.push_back(1.0 / v);
        if (!positive.empty()) {
            std::nth_element(positive.begin(), positive.begin() + positive.size() / 2, positive.end());
            const double cap = 1e6 * positive[positive.size() / 2];
            for (int k = 0; k < table.dim; ++k) {
                const double v = pooled[static_cast<std::size_t>(k)];
                w[static_cast<std::size_t>(k)] = std::min(v > 0.0 ? 1.0 / v : cap, cap);
            }
        }
    }
    PosteriorField field;
    field.grid = table.grid;
    field.n_eff = n_eff;
    field.rows.assign(static_cast<std::size_t>(n) * n, 0.0);
    const double area = table.grid.cell_area();
    for (int i = 0; i < n; ++i) {
        double* row = field.row(i);
        const double* mi = table.mean(i);
        double amax = -1e300;
        for (int j = 0; j < n; ++j) {
            const double* mj = table.mean(j);
            double d2 = 0.0;
            for (int k = 0; k < table.dim; ++k) {
                const double d = mi[k] - mj[k];
                d2 += w[static_cast<std::size_t>(k)] * d * d;
            }
            row[j] = -0.5 * n_eff * d2;
            amax = std::max(amax, row[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - amax);
            sum += row[j];
        }
        const double inv = 1.0 / (sum * area);
        for (int j = 0; j < n; ++j) row[j] *= inv;
    }
    return field;
}

MetricField hessian_field_from_values(const std::vector<double>& values, const ParamGrid& grid,
                                      double floor_scale) {
    const int n = grid.cells();
    if (values.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("ref::hessian_field_from_values: size mismatch");
    auto V = [&](int i, int j) { return values[static_cast<std::size_t>(grid.index(i, j))]; };
    const double hx = grid.dx(), hy = grid.dy();
    std::vector<Sym2> raw(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        const int ix = c % grid.nx, iy = c / grid.nx;
        const int i0 = std::clamp(ix, 1, grid.nx - 2);
        const int j0 = std::clamp(iy, 1, grid.ny - 2);
        raw[static_cast<std::size_t>(c)] = {
            (V(i0 + 1, iy) - 2.0 * V(i0, iy) + V(i0 - 1, iy)) / (hx * hx),
            (V(i0 + 1, j0 + 1) - V(i0 + 1, j0 - 1) - V(i0 - 1, j0 + 1) + V(i0 - 1, j0 - 1)) /
                (4.0 * hx * hy),
            (V(ix, j0 + 1) - 2.0 * V(ix, j0) + V(ix, j0 - 1)) / (hy * hy)};
    }
    MetricField f;
    f.grid = grid;
    double mean_trace = 0.0;
    for (const auto& t : raw) mean_trace += std::fabs(t.a11 + t.a22);
    mean_trace /= static_cast<double>(raw.size());
    f.floor_eps = std::max(floor_scale * mean_trace, 1e-12);
    f.tensors.resize(raw.size());
    f.clamped_cells = 0;
    for (std::size_t c = 0; c < raw.size(); ++c) {
        bool clamped = false;
        f.tensors[c] = clamp_eigenvalues(raw[c], f.floor_eps, &clamped);
        if (clamped) ++f.clamped_cells;
    }
    return f;
}

double mse_bregman_loss(const std::vector<double>& values_a, const std::vector<double>& values_b,
                        const ParamGrid& grid) {
    const int n = grid.cells();
    auto grad_of = [&](const std::vector<double>& v, int c, double& gx, double& gy) {
        const int ix = c % grid.nx, iy = c / grid.nx;
        auto V = [&](int i, int j) { return v[static_cast<std::size_t>(grid.index(i, j))]; };
        if (ix == 0)
            gx = (V(1, iy) - V(0, iy)) / grid.dx();
        else if (ix == grid.nx - 1)
            gx = (V(ix, iy) - V(ix - 1, iy)) / grid.dx();
        else
            gx = (V(ix + 1, iy) - V(ix - 1, iy)) / (2.0 * grid.dx());
        if (iy == 0)
            gy = (V(ix, 1) - V(ix, 0)) / grid.dy();
        else if (iy == grid.ny - 1)
            gy = (V(ix, iy) - V(ix, iy - 1)) / grid.dy();
        else
            gy = (V(ix, iy + 1) - V(ix, iy - 1)) / (2.0 * grid.dy());
    };
    const double area2 = grid.cell_area() * grid.cell_area();
    // same fixed-chunk outer reduction as chunked_sum
    const std::size_t nchunks = (static_cast<std::size_t>(n) + kReduceChunk - 1) / kReduceChunk;
    double total = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) {
        double part = 0.0;
        const std::size_t lo = c * kReduceChunk;
        const std::size_t hi = std::min<std::size_t>(lo + kReduceChunk, static_cast<std::size_t>(n));
        for (std::size_t i = lo; i < hi; ++i) {
            double gax, gay, gbx, gby;
            grad_of(values_a, static_cast<int>(i), gax, gay);
            grad_of(values_b, static_cast<int>(i), gbx, gby);
            const Point2 ti = grid.center_flat(static_cast<int>(i));
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                const Point2 tj = grid.center_flat(j);
                const double dxp = tj.x - ti.x;
                const double dyp = tj.y - ti.y;
                const double da = values_a[static_cast<std::size_t>(j)] - values_a[i] - (gax * dxp + gay * dyp);
                const double db = values_b[static_cast<std::size_t>(j)] - values_b[i] - (gbx * dxp + gby * dyp);
                const double diff = std::exp(-da) - std::exp(-db);
                acc += diff * diff;
            }
            part += acc * area2;
        }
        total += part;
    }
    return total;
}

}  // namespace fisherlat::ref
