#include "fisherlat/groundtruth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fisherlat/mlp.hpp"
#include "fisherlat/parallel.hpp"
#include "fisherlat/rng.hpp"

namespace fisherlat {

double tasep_free_energy(double alpha, double beta) {
    if (!(alpha > 0.0) || alpha > 1.0 || !(beta > 0.0) || beta > 1.0)
        throw std::invalid_argument("tasep_free_energy: alpha, beta must lie in (0,1]");
    if (alpha > 0.5 && beta > 0.5) return 0.25;
    if (alpha <= beta) return alpha * (1.0 - alpha);  // ties take the common value
    return beta * (1.0 - beta);
}

ScalarField tasep_free_energy_field(const ParamGrid& grid) {
    ScalarField f(grid, "F_tasep");
    for (int c = 0; c < grid.cells(); ++c) {
        const Point2 t = grid.center_flat(c);
        f.values[static_cast<std::size_t>(c)] = tasep_free_energy(t.x, t.y);
    }
    return f;
}

namespace {
// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.resize(static_cast<std::size_t>(n));
    w.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p0 / pp;
            if (std::fabs(z - z1) < 1e-15) break;
        }
        x[static_cast<std::size_t>(i)] = -z;
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
}
}  // namespace

double onsager_free_energy(double T, int quad_order) {
    if (!(T > 0.0)) throw std::invalid_argument("onsager_free_energy: T must be positive");
    const double k = 2.0 / T;
    const double c2 = std::cosh(k) * std::cosh(k);
    const double s = std::sinh(k);
    std::vector<double> x, w;
    gauss_legendre(quad_order, x, w);
    const double pi = 3.14159265358979323846;
    // map nodes to [0, pi]
    std::vector<double> cosq(x.size()), wq(w.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        cosq[i] = std::cos(0.5 * pi * (x[i] + 1.0));
        wq[i] = 0.5 * pi * w[i];
    }
    const double integral = chunked_sum(x.size(), [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            acc += wq[j] * std::log(c2 - s * (cosq[i] + cosq[j]));
        return wq[i] * acc;
    });
    if (!std::isfinite(integral)) {
        std::ostringstream ss;
        ss << "onsager_free_energy: quadrature non-finite at T=" << T
           << " (close to T_c; raise quad_order)";
        throw std::runtime_error(ss.str());
    }
    const double neg_beta_f = std::log(2.0) + integral / (2.0 * pi * pi);
    return -T * neg_beta_f;
}

namespace {

// A x for the normal equations of the forward-difference objective, with the
// gauge component x[0] pinned to zero.
void normal_matvec(const ParamGrid& g, const std::vector<double>& x, std::vector<double>& y) {
    const int nx = g.nx, ny = g.ny;
    const double ix2 = 1.0 / (g.dx() * g.dx());
    const double iy2 = 1.0 / (g.dy() * g.dy());
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nx * ny; ++c) {
        if (c == 0) {
            y[0] = 0.0;
            continue;
        }
        const int i = c % nx;
        const int j = c / nx;
        const double xc = x[static_cast<std::size_t>(c)];
        double acc = 0.0;
        if (i > 0) acc += ix2 * (xc - x[static_cast<std::size_t>(c) - 1]);
        if (i < nx - 1) acc += ix2 * (xc - x[static_cast<std::size_t>(c) + 1]);
        if (j > 0) acc += iy2 * (xc - x[static_cast<std::size_t>(c) - static_cast<std::size_t>(nx)]);
        if (j < ny - 1) acc += iy2 * (xc - x[static_cast<std::size_t>(c) + static_cast<std::size_t>(nx)]);
        y[static_cast<std::size_t>(c)] = acc;
    }
}

}  // namespace

IntegrateResult integrate_derivative_field(const ScalarField& d1, const ScalarField& d2,
                                           const IntegrateOptions& opt) {
    if (!(d1.grid == d2.grid))
        throw std::invalid_argument("integrate_derivative_field: grids differ");
    const ParamGrid& g = d1.grid;
    const int n = g.cells();
    const int nx = g.nx, ny = g.ny;
    const double ihx = 1.0 / g.dx();
    const double ihy = 1.0 / g.dy();

    // b = -div of the target fields under the forward-difference convention:
    // b[i,j] = (d1[i-1,j] - d1[i,j])/hx + (d2[i,j-1] - d2[i,j])/hy
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    for (int c = 0; c < n; ++c) {
        const int i = c % nx;
        const int j = c / nx;
        double acc = 0.0;
        if (i < nx - 1) acc -= ihx * d1.values[static_cast<std::size_t>(c)];
        if (i > 0) acc += ihx * d1.values[static_cast<std::size_t>(c) - 1];
        if (j < ny - 1) acc -= ihy * d2.values[static_cast<std::size_t>(c)];
        if (j > 0) acc += ihy * d2.values[static_cast<std::size_t>(c) - static_cast<std::size_t>(nx)];
        b[static_cast<std::size_t>(c)] = acc;
    }
    b[0] = 0.0;  // gauge

    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    std::vector<double> r = b, p = b, Ap(static_cast<std::size_t>(n), 0.0);
    const double bnorm = std::sqrt(chunked_sum(b.size(), [&](std::size_t i) { return b[i] * b[i]; }));
    const long long max_iters = opt.max_iters > 0 ? opt.max_iters : 100LL * n;
    long long it = 0;
    if (bnorm > 0.0) {
        double rs = chunked_sum(r.size(), [&](std::size_t i) { return r[i] * r[i]; });
        for (; it < max_iters; ++it) {
            if (std::sqrt(rs) <= opt.rel_tol * bnorm) break;
            normal_matvec(g, p, Ap);
            const double pAp = chunked_sum(p.size(), [&](std::size_t i) { return p[i] * Ap[i]; });
            const double alpha = rs / pAp;
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) {
                x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
                r[static_cast<std::size_t>(i)] -= alpha * Ap[static_cast<std::size_t>(i)];
            }
            const double rs_new = chunked_sum(r.size(), [&](std::size_t i) { return r[i] * r[i]; });
            const double beta = rs_new / rs;
            rs = rs_new;
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i)
                p[static_cast<std::size_t>(i)] = r[static_cast<std::size_t>(i)] + beta * p[static_cast<std::size_t>(i)];
        }
        if (std::sqrt(rs) > opt.rel_tol * bnorm)
            throw std::runtime_error("integrate_derivative_field: CG did not converge");
    }

    IntegrateResult result;
    result.F = ScalarField(g, x, "F_integrated");
    result.iterations = it;
    // report the remaining least-squares objective (nonzero for curl-carrying input)
    double obj = 0.0;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const double d = (result.F.at(i + 1, j) - result.F.at(i, j)) * ihx - d1.at(i, j);
            obj += d * d;
        }
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double d = (result.F.at(i, j + 1) - result.F.at(i, j)) * ihy - d2.at(i, j);
            obj += d * d;
        }
    result.residual = std::sqrt(obj);
    return result;
}

AffineFit affine_fit(const std::vector<double>& x, const std::vector<double>& t1,
                     const std::vector<double>& t2, const std::vector<double>& y, bool use_t1,
                     bool use_t2) {
    const std::size_t n = y.size();
    if (x.size() != n || (use_t1 && t1.size() != n) || (use_t2 && t2.size() != n))
        throw std::invalid_argument("affine_fit: size mismatch");

    // columns: [x?] [t1?] [t2?] [1]
    std::vector<const std::vector<double>*> cols;
    cols.push_back(&x);
    if (use_t1) cols.push_back(&t1);
    if (use_t2) cols.push_back(&t2);
    static const std::vector<double> kEmpty;
    cols.push_back(&kEmpty);  // ones column marker

    auto col_val = [&](std::size_t k, std::size_t i) -> double {
        return (k + 1 == cols.size()) ? 1.0 : (*cols[k])[i];
    };
    const std::size_t m = cols.size();

    // normal equations over the active columns, Gaussian elimination with
    // partial pivoting; returns false on a rank-deficient design
    auto solve_plain = [&](bool drop_x, double* out, double& rmse) -> bool {
        std::vector<std::size_t> active;
        for (std::size_t k = (drop_x ? 1 : 0); k < m; ++k) active.push_back(k);
        const std::size_t dim = active.size();
        std::vector<double> A(dim * dim, 0.0), rhs(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < dim; ++a) {
                const double va = col_val(active[a], i);
                rhs[a] += va * y[i];
                for (std::size_t c = 0; c < dim; ++c) A[a * dim + c] += va * col_val(active[c], i);
            }
        double scale = 0.0;
        for (std::size_t k = 0; k < dim; ++k) scale = std::max(scale, std::fabs(A[k * dim + k]));
        for (std::size_t k = 0; k < dim; ++k) {
            std::size_t best = k;
            for (std::size_t r2 = k + 1; r2 < dim; ++r2)
                if (std::fabs(A[r2 * dim + k]) > std::fabs(A[best * dim + k])) best = r2;
            if (best != k) {
                for (std::size_t c = 0; c < dim; ++c) std::swap(A[k * dim + c], A[best * dim + c]);
                std::swap(rhs[k], rhs[best]);
            }
            const double pivv = A[k * dim + k];
            if (!(std::fabs(pivv) > 1e-12 * std::max(1.0, scale))) return false;
            for (std::size_t r2 = k + 1; r2 < dim; ++r2) {
                const double f = A[r2 * dim + k] / pivv;
                for (std::size_t c = k; c < dim; ++c) A[r2 * dim + c] -= f * A[k * dim + c];
                rhs[r2] -= f * rhs[k];
            }
        }
        std::vector<double> sol(dim, 0.0);
        for (std::size_t k = dim; k-- > 0;) {
            double acc = rhs[k];
            for (std::size_t c = k + 1; c < dim; ++c) acc -= A[k * dim + c] * sol[c];
            sol[k] = acc / A[k * dim + k];
        }
        for (std::size_t k = 0; k < m; ++k) out[k] = 0.0;
        for (std::size_t a = 0; a < dim; ++a) out[active[a]] = sol[a];
        double se = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double pred = 0.0;
            for (std::size_t k = 0; k < m; ++k) pred += out[k] * col_val(k, i);
            const double d = pred - y[i];
            se += d * d;
        }
        rmse = std::sqrt(se / n);
        return true;
    };

    AffineFit fit;
    std::vector<double> out(m, 0.0);
    double rmse = 0.0;
    if (!solve_plain(false, out.data(), rmse)) {
        fit.degenerate = true;
        if (!solve_plain(true, out.data(), rmse))
            throw std::runtime_error("affine_fit: design matrix is rank-deficient even without x");
    }
    std::size_t idx = 0;
    fit.s = out[idx++];
    fit.c1 = use_t1 ? out[idx++] : 0.0;
    fit.c2 = use_t2 ? out[idx++] : 0.0;
    fit.b = out[idx];
    fit.rmse = rmse;
    return fit;
}

AffineFit affine_rmse(const ScalarField& f_rec, const ScalarField& f_gt) {
    if (!(f_rec.grid == f_gt.grid)) throw std::invalid_argument("affine_rmse: grids differ");
    const int n = f_rec.grid.cells();
    std::vector<double> t1(static_cast<std::size_t>(n)), t2(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        const Point2 t = f_rec.grid.center_flat(c);
        t1[static_cast<std::size_t>(c)] = t.x;
        t2[static_cast<std::size_t>(c)] = t.y;
    }
    return affine_fit(f_rec.values, t1, t2, f_gt.values, true, true);
}

MeanAsStatResult mean_as_stat(const FeatureTable& features, const MeanAsStatConfig& cfg) {
    const ParamGrid& g = features.grid;
    const int n = g.cells();
    const int dim = features.dim;
    const std::size_t n_rows = features.row_cell.size();
    if (n_rows == 0) throw std::invalid_argument("mean_as_stat: empty feature table");

    std::vector<int> layers;
    layers.push_back(dim);
    for (int h : cfg.hidden) layers.push_back(h);
    layers.push_back(2);
    Mlp net(layers, Activation::softplus, cfg.seed);
    {
        std::vector<double> mins(static_cast<std::size_t>(dim), 1e300);
        std::vector<double> maxs(static_cast<std::size_t>(dim), -1e300);
        for (std::size_t r = 0; r < n_rows; ++r)
            for (int k = 0; k < dim; ++k) {
                const double v = features.rows[r * static_cast<std::size_t>(dim) + k];
                mins[static_cast<std::size_t>(k)] = std::min(mins[static_cast<std::size_t>(k)], v);
                maxs[static_cast<std::size_t>(k)] = std::max(maxs[static_cast<std::size_t>(k)], v);
            }
        net.set_input_normalization(mins, maxs);
    }

    // targets: the cell-center parameters of each row
    std::vector<double> targets(n_rows * 2);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const Point2 t = g.center_flat(features.row_cell[r]);
        targets[r * 2 + 0] = t.x;
        targets[r * 2 + 1] = t.y;
    }

    Adam opt;
    opt.lr = cfg.lr;
    Rng shuffler(derive_seed(cfg.seed, {0x4d41u}));
    std::vector<std::size_t> order(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) order[i] = i;
    const std::size_t batch = std::min<std::size_t>(n_rows, static_cast<std::size_t>(std::max(1, cfg.batch)));

    MeanAsStatResult result;
    std::vector<double> bx(batch * static_cast<std::size_t>(dim));
    std::vector<double> by(batch * 2), pred(batch * 2), adj(batch * 2);
    std::size_t cursor = n_rows;  // trigger a shuffle on first use
    for (long long it = 0; it < cfg.iterations; ++it) {
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor >= n_rows) {
                // Fisher-Yates reshuffle
                for (std::size_t i = n_rows; i-- > 1;) {
                    const std::size_t j = static_cast<std::size_t>(shuffler.uniform_below(i + 1));
                    std::swap(order[i], order[j]);
                }
                cursor = 0;
            }
            const std::size_t r = order[cursor++];
            for (int k = 0; k < dim; ++k)
                bx[b * static_cast<std::size_t>(dim) + k] = features.rows[r * static_cast<std::size_t>(dim) + k];
            by[b * 2 + 0] = targets[r * 2 + 0];
            by[b * 2 + 1] = targets[r * 2 + 1];
        }
        net.value_batch(bx.data(), static_cast<int>(batch), pred.data());
        double loss = 0.0;
        for (std::size_t i = 0; i < batch * 2; ++i) {
            const double d = pred[i] - by[i];
            loss += d * d;
            adj[i] = 2.0 * d / static_cast<double>(batch);
        }
        loss /= static_cast<double>(batch);
        if (!std::isfinite(loss)) {
            std::ostringstream ss;
            ss << "mean_as_stat: regression diverged at iteration " << it;
            throw std::runtime_error(ss.str());
        }
        result.loss_history.push_back(loss);
        const auto grad = net.param_gradient(bx.data(), static_cast<int>(batch), adj.data());
        opt.step(net.params(), grad);
    }

    // per-cell mean prediction over that cell's replica rows
    result.s_t1 = ScalarField(g, "s_t1");
    result.s_t2 = ScalarField(g, "s_t2");
    std::vector<double> cell_pred(static_cast<std::size_t>(n) * 2, 0.0);
    {
        std::vector<double> all_pred(n_rows * 2);
        net.value_batch(features.rows.data(), static_cast<int>(n_rows), all_pred.data());
        std::vector<int> cnt(static_cast<std::size_t>(n), 0);
        for (std::size_t r = 0; r < n_rows; ++r) {
            const int c = features.row_cell[r];
            cell_pred[static_cast<std::size_t>(c) * 2 + 0] += all_pred[r * 2 + 0];
            cell_pred[static_cast<std::size_t>(c) * 2 + 1] += all_pred[r * 2 + 1];
            cnt[static_cast<std::size_t>(c)]++;
        }
        for (int c = 0; c < n; ++c) {
            result.s_t1.values[static_cast<std::size_t>(c)] = cell_pred[static_cast<std::size_t>(c) * 2 + 0] / cnt[static_cast<std::size_t>(c)];
            result.s_t2.values[static_cast<std::size_t>(c)] = cell_pred[static_cast<std::size_t>(c) * 2 + 1] / cnt[static_cast<std::size_t>(c)];
        }
    }
    {
        double lo1 = result.s_t1.values[0], hi1 = lo1;
        double lo2 = result.s_t2.values[0], hi2 = lo2;
        for (int c = 0; c < n; ++c) {
            lo1 = std::min(lo1, result.s_t1.values[static_cast<std::size_t>(c)]);
            hi1 = std::max(hi1, result.s_t1.values[static_cast<std::size_t>(c)]);
            lo2 = std::min(lo2, result.s_t2.values[static_cast<std::size_t>(c)]);
            hi2 = std::max(hi2, result.s_t2.values[static_cast<std::size_t>(c)]);
        }
        result.degenerate = (hi1 - lo1) < 1e-12 && (hi2 - lo2) < 1e-12;
    }
    result.F = integrate_derivative_field(result.s_t1, result.s_t2).F;
    result.F.label = "F_mean_as_stat";
    return result;
}

IsingReferenceFields ising_reference_fields_from(const FeatureTable& table) {
    if (table.dim != 2)
        throw std::invalid_argument("ising_reference_fields: expected (e, m) features");
    const ParamGrid& g = table.grid;
    IsingReferenceFields out{ScalarField(g, "E"), ScalarField(g, "M")};
    for (int c = 0; c < g.cells(); ++c) {
        out.E.values[static_cast<std::size_t>(c)] = table.mean(c)[0];
        out.M.values[static_cast<std::size_t>(c)] = table.mean(c)[1];
    }
    // symmetrize when the H-range is symmetric about zero
    if (std::fabs(g.t2_min + g.t2_max) < 1e-12 * (std::fabs(g.t2_min) + std::fabs(g.t2_max) + 1.0)) {
        for (int iy = 0; iy < g.ny; ++iy) {
            const int my = g.ny - 1 - iy;
            if (my < iy) break;
            for (int ix = 0; ix < g.nx; ++ix) {
                const double e = 0.5 * (out.E.at(ix, iy) + out.E.at(ix, my));
                const double m = 0.5 * (out.M.at(ix, iy) - out.M.at(ix, my));
                out.E.at(ix, iy) = e;
                out.E.at(ix, my) = e;
                out.M.at(ix, iy) = m;
                out.M.at(ix, my) = -m;
            }
        }
    }
    return out;
}

IsingReferenceFields ising_reference_fields(const ParamGrid& grid, const SamplerSpec& spec,
                                            int replicas, std::uint64_t seed) {
    if (spec.system != System::ising)
        throw std::invalid_argument("ising_reference_fields: spec must select the ising system");
    const FeatureTable table = build_feature_table(grid, spec, replicas, seed);
    return ising_reference_fields_from(table);
}

}  // namespace fisherlat
