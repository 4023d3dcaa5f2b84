#include "fisherlat/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "fisherlat/io.hpp"
#include "fisherlat/parallel.hpp"

namespace fisherlat {

// Densities below this count as zero: around 5e-324 the midpoint (p+q)/2 can
// round to exactly zero while p stays positive, turning log(p/m) into +inf.
// Any contribution this small is below 1e-297 nats.
constexpr double kMassFloor = 1e-300;

double jsd(const double* p, const double* q, int n, double cell_area) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double pi = p[i];
        const double qi = q[i];
        if (pi < 0.0 || qi < 0.0) throw std::invalid_argument("jsd: negative density");
        if (pi <= kMassFloor && qi <= kMassFloor) continue;
        const double mi = 0.5 * (pi + qi);
        // single accumulator update per cell: the p/q halves are joined by one
        // commutative addition, which keeps jsd(p,q) == jsd(q,p) bit-exact
        const double tp = pi > 0.0 ? pi * std::log(pi / mi) : 0.0;
        const double tq = qi > 0.0 ? qi * std::log(qi / mi) : 0.0;
        acc += tp + tq;
    }
    const double v = 0.5 * cell_area * acc;
    // clip the tiny negative round-off that shows up when p == q
    return v < 0.0 ? 0.0 : v;
}

double jsd(const std::vector<double>& p, const std::vector<double>& q, double cell_area) {
    if (p.size() != q.size()) throw std::invalid_argument("jsd: size mismatch");
    return jsd(p.data(), q.data(), static_cast<int>(p.size()), cell_area);
}

namespace {
// central-difference gradient of grid values, one-sided at the boundary
void grad_fd(const std::vector<double>& v, const ParamGrid& g, int c, double& gx, double& gy,
             bool& one_sided) {
    const int ix = g.ix_of(c), iy = g.iy_of(c);
    one_sided = false;
    auto V = [&](int i, int j) { return v[static_cast<std::size_t>(g.index(i, j))]; };
    if (ix == 0) {
        gx = (V(1, iy) - V(0, iy)) / g.dx();
        one_sided = true;
    } else if (ix == g.nx - 1) {
        gx = (V(ix, iy) - V(ix - 1, iy)) / g.dx();
        one_sided = true;
    } else {
        gx = (V(ix + 1, iy) - V(ix - 1, iy)) / (2.0 * g.dx());
    }
    if (iy == 0) {
        gy = (V(ix, 1) - V(ix, 0)) / g.dy();
        one_sided = true;
    } else if (iy == g.ny - 1) {
        gy = (V(ix, iy) - V(ix, iy - 1)) / g.dy();
        one_sided = true;
    } else {
        gy = (V(ix, iy + 1) - V(ix, iy - 1)) / (2.0 * g.dy());
    }
}
}  // namespace

BregmanResult bregman(const std::vector<double>& phi, const ParamGrid& grid, int c, int c_src) {
    if (phi.size() != static_cast<std::size_t>(grid.cells()))
        throw std::invalid_argument("bregman: field size mismatch");
    BregmanResult r;
    double gx, gy;
    grad_fd(phi, grid, c_src, gx, gy, r.one_sided);
    const Point2 t = grid.center_flat(c);
    const Point2 ts = grid.center_flat(c_src);
    r.value = phi[static_cast<std::size_t>(c)] - phi[static_cast<std::size_t>(c_src)] -
              (gx * (t.x - ts.x) + gy * (t.y - ts.y));
    return r;
}

namespace {
void rows_from_values_and_grads(ModelRowSet& set) {
    const ParamGrid& g = set.grid;
    const int n = g.cells();
    set.rows.assign(static_cast<std::size_t>(n) * n, 0.0);
    const double area = g.cell_area();
    int bad_row = -1;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* row = &set.rows[static_cast<std::size_t>(i) * n];
        const double g1 = set.grad[static_cast<std::size_t>(i) * 2 + 0];
        const double g2 = set.grad[static_cast<std::size_t>(i) * 2 + 1];
        double amax = -1e300;
        for (int j = 0; j < n; ++j) {
            const Point2 t = g.center_flat(j);
            row[j] = t.x * g1 + t.y * g2 - set.values[static_cast<std::size_t>(j)];
            amax = std::max(amax, row[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - amax);
            sum += row[j];
        }
        const double inv = 1.0 / (sum * area);
        bool bad = !(sum > 0.0) || !std::isfinite(inv);
        for (int j = 0; j < n; ++j) {
            row[j] *= inv;
            if (!std::isfinite(row[j])) bad = true;
        }
        if (bad) {
#pragma omp critical
            if (bad_row < 0 || i < bad_row) bad_row = i;
        }
    }
    if (bad_row >= 0) {
        std::ostringstream ss;
        ss << "kernel_rows: non-finite kernel in row " << bad_row;
        throw std::runtime_error(ss.str());
    }
}
}  // namespace

ModelRowSet kernel_rows(const Mlp& model, const ParamGrid& grid, double h1, double h2) {
    if (h1 <= 0.0) h1 = grid.dx();
    if (h2 <= 0.0) h2 = grid.dy();
    const int n = grid.cells();
    ModelRowSet set;
    set.grid = grid;
    set.values.resize(static_cast<std::size_t>(n));
    set.grad.resize(static_cast<std::size_t>(n) * 2);

    // one fused batch: centers plus the four gradient stencil shifts
    std::vector<Point2> pts(static_cast<std::size_t>(n) * 5);
    for (int c = 0; c < n; ++c) {
        const Point2 t = grid.center_flat(c);
        pts[static_cast<std::size_t>(c)] = t;
        pts[static_cast<std::size_t>(n) + c] = {t.x + h1, t.y};
        pts[2 * static_cast<std::size_t>(n) + c] = {t.x - h1, t.y};
        pts[3 * static_cast<std::size_t>(n) + c] = {t.x, t.y + h2};
        pts[4 * static_cast<std::size_t>(n) + c] = {t.x, t.y - h2};
    }
    std::vector<double> out(pts.size());
    model.value_batch(pts.data(), static_cast<int>(pts.size()), out.data());
    for (int c = 0; c < n; ++c) {
        set.values[static_cast<std::size_t>(c)] = out[static_cast<std::size_t>(c)];
        set.grad[static_cast<std::size_t>(c) * 2 + 0] =
            (out[static_cast<std::size_t>(n) + c] - out[2 * static_cast<std::size_t>(n) + c]) / (2.0 * h1);
        set.grad[static_cast<std::size_t>(c) * 2 + 1] =
            (out[3 * static_cast<std::size_t>(n) + c] - out[4 * static_cast<std::size_t>(n) + c]) / (2.0 * h2);
    }
    rows_from_values_and_grads(set);
    return set;
}

ModelRowSet kernel_rows_from_values(const std::vector<double>& values, const ParamGrid& grid) {
    if (values.size() != static_cast<std::size_t>(grid.cells()))
        throw std::invalid_argument("kernel_rows_from_values: size mismatch");
    const int n = grid.cells();
    ModelRowSet set;
    set.grid = grid;
    set.values = values;
    set.grad.resize(static_cast<std::size_t>(n) * 2);
    for (int c = 0; c < n; ++c) {
        bool ignored;
        grad_fd(values, grid, c, set.grad[static_cast<std::size_t>(c) * 2 + 0],
                set.grad[static_cast<std::size_t>(c) * 2 + 1], ignored);
    }
    rows_from_values_and_grads(set);
    return set;
}

void TrainConfig::validate() const {
    if (iterations < 0) throw std::invalid_argument("TrainConfig: iterations must be >= 0");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("TrainConfig: Adam betas must lie in [0,1)");
    if (hidden.empty()) throw std::invalid_argument("TrainConfig: need at least one hidden layer");
}

namespace {

// median per-row curvature scale of the target in normalized coordinates;
// used to pick the output scale so the raw network stays O(1)
double calibrate_output_scale(const PosteriorField& target) {
    const ParamGrid& g = target.grid;
    const int n = g.cells();
    const double area = g.cell_area();
    std::vector<double> lam;
    lam.reserve(static_cast<std::size_t>(n));
    const double hx = 0.5 * (g.t1_max - g.t1_min);
    const double hy = 0.5 * (g.t2_max - g.t2_min);
    for (int i = 0; i < n; ++i) {
        const double* row = target.row(i);
        double mx = 0.0, my = 0.0;
        for (int j = 0; j < n; ++j) {
            const Point2 t = g.center_flat(j);
            const double m = row[j] * area;
            mx += m * (t.x - g.t1_min - hx) / hx;
            my += m * (t.y - g.t2_min - hy) / hy;
        }
        double vx = 0.0, vy = 0.0;
        for (int j = 0; j < n; ++j) {
            const Point2 t = g.center_flat(j);
            const double m = row[j] * area;
            const double ux = (t.x - g.t1_min - hx) / hx - mx;
            const double uy = (t.y - g.t2_min - hy) / hy - my;
            vx += m * ux * ux;
            vy += m * uy * uy;
        }
        const double tr = vx + vy;
        if (tr > 1e-12) lam.push_back(2.0 / tr);
    }
    if (lam.empty()) return 1.0;
    std::nth_element(lam.begin(), lam.begin() + lam.size() / 2, lam.end());
    return std::max(1.0, lam[lam.size() / 2]);
}

struct RowWork {
    double loss = 0.0;                 // summed JSD over the chunk's rows
    std::vector<double> adj;           // summed dJSD/dv over the chunk's rows
};

// Loss, center adjoints and (optionally) stencil adjoints for rows [lo, hi).
// The kernel reads the model at the 5n points [centers | x+ | x- | y+ | y-];
// the chain rule through the finite-difference source gradient needs only the
// four per-row stencil slots, which no other row touches, so those entries
// are written directly while the shared center adjoints go through the
// chunked reduction.
void accumulate_rows(const PosteriorField& target, const std::vector<double>& v,
                     const std::vector<double>& grad, const std::vector<Point2>& centers,
                     double h1, double h2, int lo, int hi, std::vector<double>& qbuf,
                     RowWork& work, double* stencil_adj) {
    const ParamGrid& g = target.grid;
    const int n = g.cells();
    const double area = g.cell_area();
    for (int i = lo; i < hi; ++i) {
        const double g1 = grad[static_cast<std::size_t>(i) * 2 + 0];
        const double g2 = grad[static_cast<std::size_t>(i) * 2 + 1];
        double amax = -1e300;
        for (int j = 0; j < n; ++j) {
            qbuf[static_cast<std::size_t>(j)] = centers[static_cast<std::size_t>(j)].x * g1 +
                                                centers[static_cast<std::size_t>(j)].y * g2 -
                                                v[static_cast<std::size_t>(j)];
            amax = std::max(amax, qbuf[static_cast<std::size_t>(j)]);
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            // exp underflows to exactly zero below ~-745; skip the libm call
            const double e = qbuf[static_cast<std::size_t>(j)] - amax;
            const double q = e < -746.0 ? 0.0 : std::exp(e);
            qbuf[static_cast<std::size_t>(j)] = q;
            sum += q;
        }
        const double inv = 1.0 / sum;  // qbuf becomes the kernel row as masses
        const double* prow = target.row(i);
        // JSD terms and S = sum_b qm_b ln(qm_b / mm_b)
        static const double kLn2 = std::log(2.0);
        double loss_i = 0.0;
        double S = 0.0;
        for (int j = 0; j < n; ++j) {
            const double qm = qbuf[static_cast<std::size_t>(j)] * inv;
            const double pm = prow[j] * area;
            if (qm <= kMassFloor) {
                // mm = pm/2 up to a sub-1e-300 shift: the p-term is pm ln 2
                if (pm > kMassFloor) loss_i += pm * kLn2;
                qbuf[static_cast<std::size_t>(j)] = 0.0;
                continue;
            }
            const double mm = 0.5 * (pm + qm);
            if (pm > 0.0) loss_i += pm * std::log(pm / mm);
            const double lq = std::log(qm / mm);
            loss_i += qm * lq;
            S += qm * lq;
            qbuf[static_cast<std::size_t>(j)] = qm;  // keep masses for the adjoint pass
        }
        loss_i *= 0.5;
        work.loss += loss_i;
        // W_c = dJSD/da_c = 1/2 qm_c (ln(qm_c/mm_c) - S); da_c/dv_c = -1 and
        // da_c/dg = t_c through the source gradient
        double ux = 0.0, uy = 0.0;
        for (int j = 0; j < n; ++j) {
            const double qm = qbuf[static_cast<std::size_t>(j)];
            if (qm <= 0.0) continue;
            const double pm = prow[j] * area;
            const double mm = 0.5 * (pm + qm);
            const double w = 0.5 * qm * (std::log(qm / mm) - S);
            work.adj[static_cast<std::size_t>(j)] -= w;
            ux += w * centers[static_cast<std::size_t>(j)].x;
            uy += w * centers[static_cast<std::size_t>(j)].y;
        }
        if (stencil_adj) {
            stencil_adj[static_cast<std::size_t>(i)] = ux / (2.0 * h1);
            stencil_adj[static_cast<std::size_t>(n) + i] = -ux / (2.0 * h1);
            stencil_adj[2 * static_cast<std::size_t>(n) + i] = uy / (2.0 * h2);
            stencil_adj[3 * static_cast<std::size_t>(n) + i] = -uy / (2.0 * h2);
        }
    }
}

// Loss plus the full adjoint over the 5n evaluation points (deterministic for
// any thread count). adj_out, when present, is sized 5n with the layout of
// the evaluation batch; the stencil part is zeroed in detached mode.
double loss_and_adjoint(const PosteriorField& target, const std::vector<double>& v,
                        const std::vector<double>& grad, const std::vector<Point2>& centers,
                        double h1, double h2, bool detach_source_gradient,
                        std::vector<double>* adj_out) {
    const int n = target.grid.cells();
    const int chunk = static_cast<int>(kReduceChunk);
    const int nchunks = (n + chunk - 1) / chunk;
    std::vector<RowWork> partial(static_cast<std::size_t>(nchunks));
    std::vector<double> stencil(adj_out && !detach_source_gradient ? static_cast<std::size_t>(n) * 4
                                                                   : 0);
#pragma omp parallel
    {
        std::vector<double> qbuf(static_cast<std::size_t>(n));
#pragma omp for schedule(static)
        for (int c = 0; c < nchunks; ++c) {
            auto& w = partial[static_cast<std::size_t>(c)];
            w.adj.assign(static_cast<std::size_t>(n), 0.0);
            accumulate_rows(target, v, grad, centers, h1, h2, c * chunk,
                            std::min(n, (c + 1) * chunk), qbuf, w,
                            stencil.empty() ? nullptr : stencil.data());
        }
    }
    double loss = 0.0;
    if (adj_out) adj_out->assign(static_cast<std::size_t>(n) * 5, 0.0);
    for (const auto& w : partial) {
        loss += w.loss;
        if (adj_out)
            for (int j = 0; j < n; ++j) (*adj_out)[static_cast<std::size_t>(j)] += w.adj[static_cast<std::size_t>(j)];
    }
    loss /= n;
    if (adj_out) {
        for (int j = 0; j < n; ++j) (*adj_out)[static_cast<std::size_t>(j)] /= n;
        if (!stencil.empty())
            for (int k = 0; k < 4 * n; ++k)
                (*adj_out)[static_cast<std::size_t>(n) + k] = stencil[static_cast<std::size_t>(k)] / n;
    }
    return loss;
}

// evaluation batch [centers | x+ | x- | y+ | y-] and the derived source gradients
void model_values_and_grads(const Mlp& model, const std::vector<Point2>& centers, double h1,
                            double h2, std::vector<Point2>& pts, std::vector<double>& out,
                            std::vector<double>& v, std::vector<double>& grad) {
    const int n = static_cast<int>(centers.size());
    pts.resize(static_cast<std::size_t>(n) * 5);
    for (int c = 0; c < n; ++c) {
        const Point2 t = centers[static_cast<std::size_t>(c)];
        pts[static_cast<std::size_t>(c)] = t;
        pts[static_cast<std::size_t>(n) + c] = {t.x + h1, t.y};
        pts[2 * static_cast<std::size_t>(n) + c] = {t.x - h1, t.y};
        pts[3 * static_cast<std::size_t>(n) + c] = {t.x, t.y + h2};
        pts[4 * static_cast<std::size_t>(n) + c] = {t.x, t.y - h2};
    }
    out.resize(pts.size());
    model.value_batch(pts.data(), static_cast<int>(pts.size()), out.data());
    v.resize(static_cast<std::size_t>(n));
    grad.resize(static_cast<std::size_t>(n) * 2);
    for (int c = 0; c < n; ++c) {
        v[static_cast<std::size_t>(c)] = out[static_cast<std::size_t>(c)];
        grad[static_cast<std::size_t>(c) * 2 + 0] =
            (out[static_cast<std::size_t>(n) + c] - out[2 * static_cast<std::size_t>(n) + c]) / (2.0 * h1);
        grad[static_cast<std::size_t>(c) * 2 + 1] =
            (out[3 * static_cast<std::size_t>(n) + c] - out[4 * static_cast<std::size_t>(n) + c]) / (2.0 * h2);
    }
}

}  // namespace

TrainResult train_potential(const PosteriorField& target, const TrainConfig& cfg) {
    cfg.validate();
    const ParamGrid& g = target.grid;
    const int n = g.cells();
    const double h1 = cfg.grad_h1 > 0.0 ? cfg.grad_h1 : g.dx();
    const double h2 = cfg.grad_h2 > 0.0 ? cfg.grad_h2 : g.dy();

    std::vector<int> layers;
    layers.push_back(2);
    for (int h : cfg.hidden) layers.push_back(h);
    layers.push_back(1);

    TrainResult result;
    result.model = Mlp(layers, cfg.activation, cfg.seed);
    result.model.set_input_normalization(g.t1_min, g.t1_max, g.t2_min, g.t2_max);
    result.model.output_scale =
        cfg.output_scale > 0.0 ? cfg.output_scale : calibrate_output_scale(target);

    std::vector<Point2> centers(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) centers[static_cast<std::size_t>(c)] = g.center_flat(c);

    Adam opt;
    opt.lr = cfg.lr;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.eps;

    // fixed evaluation batch: centers plus the four source-gradient stencils
    std::vector<Point2> pts(static_cast<std::size_t>(n) * 5);
    for (int c = 0; c < n; ++c) {
        const Point2 t = centers[static_cast<std::size_t>(c)];
        pts[static_cast<std::size_t>(c)] = t;
        pts[static_cast<std::size_t>(n) + c] = {t.x + h1, t.y};
        pts[2 * static_cast<std::size_t>(n) + c] = {t.x - h1, t.y};
        pts[3 * static_cast<std::size_t>(n) + c] = {t.x, t.y + h2};
        pts[4 * static_cast<std::size_t>(n) + c] = {t.x, t.y - h2};
    }
    MlpBatch batch(result.model);
    std::vector<double> out(pts.size()), v(static_cast<std::size_t>(n)),
        grad(static_cast<std::size_t>(n) * 2), adj;
    for (long long it = 0; it < cfg.iterations; ++it) {
        batch.forward(pts.data(), static_cast<int>(pts.size()), out.data());
        for (int c = 0; c < n; ++c) {
            v[static_cast<std::size_t>(c)] = out[static_cast<std::size_t>(c)];
            grad[static_cast<std::size_t>(c) * 2 + 0] =
                (out[static_cast<std::size_t>(n) + c] - out[2 * static_cast<std::size_t>(n) + c]) /
                (2.0 * h1);
            grad[static_cast<std::size_t>(c) * 2 + 1] =
                (out[3 * static_cast<std::size_t>(n) + c] - out[4 * static_cast<std::size_t>(n) + c]) /
                (2.0 * h2);
        }
        const double loss = loss_and_adjoint(target, v, grad, centers, h1, h2,
                                             cfg.detach_source_gradient, &adj);
        if (!std::isfinite(loss)) {
            std::ostringstream ss;
            ss << "train_potential: non-finite loss at iteration " << it;
            throw std::runtime_error(ss.str());
        }
        result.loss_history.push_back(loss);
        const auto pgrad = batch.backward(adj.data());
        opt.step(result.model.params(), pgrad);
        for (double p : result.model.params())
            if (!std::isfinite(p)) {
                std::ostringstream ss;
                ss << "train_potential: non-finite parameter update at iteration " << it;
                throw std::runtime_error(ss.str());
            }
    }
    // final (or initial, for iterations == 0) loss
    {
        std::vector<Point2> unused_pts;
        std::vector<double> unused_out;
        model_values_and_grads(result.model, centers, h1, h2, unused_pts, unused_out, v, grad);
    }
    result.final_loss =
        loss_and_adjoint(target, v, grad, centers, h1, h2, cfg.detach_source_gradient, nullptr);
    if (result.loss_history.empty()) result.loss_history.push_back(result.final_loss);

    // trend check over 100-iteration windows (full-batch Adam may oscillate,
    // but the window means should not climb)
    std::vector<double> wmeans;
    for (std::size_t w = 0; w + 100 <= result.loss_history.size(); w += 100) {
        double acc = 0.0;
        for (std::size_t i = w; i < w + 100; ++i) acc += result.loss_history[i];
        wmeans.push_back(acc / 100.0);
    }
    for (std::size_t k = 1; k < wmeans.size(); ++k)
        if (wmeans[k] > wmeans[k - 1] * 1.10 + 1e-12) result.trend_ok = false;
    if (!result.trend_ok)
        std::fprintf(stderr, "train_potential: loss trend check failed (window means climbed)\n");
    return result;
}

double potential_loss(const Mlp& model, const PosteriorField& target, const TrainConfig& cfg) {
    const ParamGrid& g = target.grid;
    const int n = g.cells();
    const double h1 = cfg.grad_h1 > 0.0 ? cfg.grad_h1 : g.dx();
    const double h2 = cfg.grad_h2 > 0.0 ? cfg.grad_h2 : g.dy();
    std::vector<Point2> centers(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) centers[static_cast<std::size_t>(c)] = g.center_flat(c);
    std::vector<Point2> pts;
    std::vector<double> out, v, grad;
    model_values_and_grads(model, centers, h1, h2, pts, out, v, grad);
    return loss_and_adjoint(target, v, grad, centers, h1, h2, true, nullptr);
}

double mse_bregman_loss(const std::vector<double>& values_a, const std::vector<double>& values_b,
                        const ParamGrid& grid) {
    const int n = grid.cells();
    if (values_a.size() != static_cast<std::size_t>(n) || values_b.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("mse_bregman_loss: size mismatch");
    std::vector<double> ga(static_cast<std::size_t>(n) * 2), gb(static_cast<std::size_t>(n) * 2);
    for (int c = 0; c < n; ++c) {
        bool ignored;
        grad_fd(values_a, grid, c, ga[static_cast<std::size_t>(c) * 2], ga[static_cast<std::size_t>(c) * 2 + 1], ignored);
        grad_fd(values_b, grid, c, gb[static_cast<std::size_t>(c) * 2], gb[static_cast<std::size_t>(c) * 2 + 1], ignored);
    }
    const double area2 = grid.cell_area() * grid.cell_area();
    return chunked_sum(static_cast<std::size_t>(n), [&](std::size_t i) {
        const Point2 ti = grid.center_flat(static_cast<int>(i));
        const double va_i = values_a[i];
        const double vb_i = values_b[i];
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const Point2 tj = grid.center_flat(j);
            const double dxp = tj.x - ti.x;
            const double dyp = tj.y - ti.y;
            const double da = values_a[static_cast<std::size_t>(j)] - va_i -
                              (ga[i * 2] * dxp + ga[i * 2 + 1] * dyp);
            const double db = values_b[static_cast<std::size_t>(j)] - vb_i -
                              (gb[i * 2] * dxp + gb[i * 2 + 1] * dyp);
            const double diff = std::exp(-da) - std::exp(-db);
            acc += diff * diff;
        }
        return acc * area2;
    });
}

void write_loss_history(const std::vector<double>& history, const std::string& path) {
    std::ostringstream out;
    out << "iter,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i)
        out << i << ',' << format_double(history[i]) << '\n';
    write_text_file(path, out.str());
}

}  // namespace fisherlat
