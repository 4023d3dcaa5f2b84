#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fisherlat/potential.hpp"
#include "fisherlat/rng.hpp"
#include "fisherlat/samplers.hpp"

using namespace fisherlat;

namespace {

std::vector<double> field_on_grid(const ParamGrid& g, double (*fn)(Point2)) {
    std::vector<double> v(static_cast<std::size_t>(g.cells()));
    for (int c = 0; c < g.cells(); ++c) v[static_cast<std::size_t>(c)] = fn(g.center_flat(c));
    return v;
}

double quad_half(Point2 t) { return 0.5 * (t.x * t.x + t.y * t.y); }
double quartic(Point2 t) {
    const double r2 = t.x * t.x + t.y * t.y;
    return r2 * r2;
}

}  // namespace

TEST_CASE("jsd: identity, disjoint supports, two-cell value, symmetry, range") {
    std::vector<double> p{0.5, 0.5, 0.0, 0.0};
    std::vector<double> q{0.0, 0.0, 0.25, 0.75};
    CHECK(jsd(p, p, 1.0) == 0.0);
    CHECK(jsd(p, q, 1.0) == doctest::Approx(std::log(2.0)));

    // p=(1,0), q=(1/2,1/2) on two unit cells
    CHECK(jsd({1.0, 0.0}, {0.5, 0.5}, 1.0) == doctest::Approx(0.21576155433883565).epsilon(1e-12));

    // symmetry and range over random normalized rows
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(16), b(16);
        double sa = 0.0, sb = 0.0;
        for (int i = 0; i < 16; ++i) {
            a[static_cast<std::size_t>(i)] = rng.uniform();
            b[static_cast<std::size_t>(i)] = rng.uniform();
            sa += a[static_cast<std::size_t>(i)];
            sb += b[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < 16; ++i) {
            a[static_cast<std::size_t>(i)] /= sa;
            b[static_cast<std::size_t>(i)] /= sb;
        }
        const double ab = jsd(a, b, 1.0);
        CHECK(ab == jsd(b, a, 1.0));  // exact
        CHECK(ab >= 0.0);
        CHECK(ab <= std::log(2.0) + 1e-15);
    }
    CHECK_THROWS_AS(jsd({-0.1, 1.1}, {0.5, 0.5}, 1.0), std::invalid_argument);
}

TEST_CASE("bregman: quadratic identity, zero at t=t', one-sided flag") {
    // centers at -1, -0.5, 0, 0.5, 1 in both axes
    ParamGrid g(-1.25, 1.25, -1.25, 1.25, 5, 5);
    const auto phi = field_on_grid(g, quad_half);
    const int src = g.index(2, 2);   // (0, 0), interior
    const int tgt = g.index(4, 2);   // (1, 0), on the boundary (fine: only src grad matters)
    const auto r = bregman(phi, g, tgt, src);
    CHECK(!r.one_sided);
    CHECK(r.value == doctest::Approx(0.5).epsilon(1e-12));  // central FD exact for quadratics
    CHECK(bregman(phi, g, src, src).value == doctest::Approx(0.0));
    CHECK(bregman(phi, g, src, g.index(0, 2)).one_sided);
}

TEST_CASE("bregman on a quartic field converges at second order") {
    auto analytic = [](Point2 t, Point2 ts) {
        const double r2s = ts.x * ts.x + ts.y * ts.y;
        const double gx = 4.0 * r2s * ts.x, gy = 4.0 * r2s * ts.y;
        return quartic(t) - quartic(ts) - (gx * (t.x - ts.x) + gy * (t.y - ts.y));
    };
    auto max_err = [&](int n) {
        ParamGrid g(-1.0, 1.0, -1.0, 1.0, n, n);
        const auto phi = field_on_grid(g, quartic);
        const int src = g.index(n / 2 + 1, n / 2 - 1);  // interior
        double worst = 0.0;
        for (int c = 0; c < g.cells(); ++c)
            worst = std::max(worst, std::fabs(bregman(phi, g, c, src).value -
                                              analytic(g.center_flat(c), g.center_flat(src))));
        return worst;
    };
    const double e8 = max_err(8);
    const double e16 = max_err(16);
    CHECK(e16 < e8);
    CHECK(e8 / e16 > 2.5);  // O(h^2) would give ~4 (centers shift between grids)
}

TEST_CASE("kernel rows: constant potential is uniform, quadratic peaks at source") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 12, 12);
    const auto uniform_rows = kernel_rows_from_values(std::vector<double>(144, 3.7), g);
    for (double v : uniform_rows.rows) CHECK(v == doctest::Approx(1.0 / g.volume()).epsilon(1e-12));

    // sharpened quadratic so rows resolve on the grid
    std::vector<double> v(static_cast<std::size_t>(g.cells()));
    for (int c = 0; c < g.cells(); ++c) v[static_cast<std::size_t>(c)] = 40.0 * quad_half(g.center_flat(c));
    const auto rows = kernel_rows_from_values(v, g);
    for (int i = 0; i < g.cells(); ++i) {
        const double* row = rows.row(i);
        const int arg = static_cast<int>(std::max_element(row, row + g.cells()) - row);
        const Point2 ti = g.center_flat(i);
        const Point2 ta = g.center_flat(arg);
        CHECK(std::fabs(ta.x - ti.x) <= g.dx() + 1e-12);
        CHECK(std::fabs(ta.y - ti.y) <= g.dy() + 1e-12);
    }
}

TEST_CASE("kernel rows of oracle logZ match exp(-KL) rows at second order") {
    const int n_spins = 64;
    auto sup_err = [&](int n) {
        ParamGrid g(-1.0, 1.0, -1.0, 1.0, n, n);
        std::vector<double> lz(static_cast<std::size_t>(g.cells()));
        for (int c = 0; c < g.cells(); ++c) {
            const Point2 t = g.center_flat(c);
            lz[static_cast<std::size_t>(c)] = oracle_logz(t.x, t.y, n_spins);
        }
        const auto rows = kernel_rows_from_values(lz, g);
        const auto exact = oracle_exact_posterior(g, n_spins, 1);  // normalized exp(-D_B)
        double sup = 0.0;
        // interior sources: the boundary rows use one-sided gradients
        for (int iy = 1; iy + 1 < g.ny; ++iy)
            for (int ix = 1; ix + 1 < g.nx; ++ix) {
                const int i = g.index(ix, iy);
                for (int j = 0; j < g.cells(); ++j)
                    sup = std::max(sup, std::fabs(rows.row(i)[j] - exact.row(i)[j]) * g.cell_area());
            }
        return sup;
    };
    const double e16 = sup_err(16);
    const double e32 = sup_err(32);
    CHECK(e32 < e16);
    CHECK(e16 / e32 > 3.0);  // O(h^2)
}

TEST_CASE("kernel affine-gauge invariance to 1e-10") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 10, 10);
    Rng rng(8);
    std::vector<double> v(static_cast<std::size_t>(g.cells()));
    for (auto& x : v) x = 5.0 * rng.uniform();
    std::vector<double> v2 = v;
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        v2[static_cast<std::size_t>(c)] += 1.7 * t.x - 2.3 * t.y + 0.9;
    }
    const auto r1 = kernel_rows_from_values(v, g);
    const auto r2 = kernel_rows_from_values(v2, g);
    for (std::size_t i = 0; i < r1.rows.size(); ++i)
        CHECK(std::fabs(r1.rows[i] - r2.rows[i]) <= 1e-10 * std::max(1.0, r1.rows[i]));
}

TEST_CASE("mse_bregman_loss: zero on identical and affine-shifted fields, positive otherwise") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 8, 8);
    const auto v = field_on_grid(g, quad_half);
    CHECK(mse_bregman_loss(v, v, g) == 0.0);

    std::vector<double> affine = v;
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        affine[static_cast<std::size_t>(c)] += 0.8 * t.x - 0.4 * t.y + 2.0;
    }
    CHECK(mse_bregman_loss(v, affine, g) <= 1e-10);

    Rng rng(3);
    std::vector<double> a(v.size()), b(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        a[i] = rng.uniform();
        b[i] = rng.uniform();
    }
    CHECK(mse_bregman_loss(a, b, g) > 0.0);
}

TEST_CASE("param_gradient against central finite differences (softplus)") {
    Mlp net({2, 8, 8, 1}, Activation::softplus, 42);
    net.set_input_normalization(-1.0, 1.0, -1.0, 1.0);
    net.output_scale = 2.5;
    std::vector<Point2> pts{{0.3, -0.2}, {-0.7, 0.6}, {0.1, 0.9}, {-0.4, -0.8}, {0.0, 0.0}};
    std::vector<double> adj{0.7, -1.1, 0.4, 0.9, -0.3};

    const auto grad = net.param_gradient(pts.data(), 5, adj.data());
    const double eps = 1e-5;
    double num2 = 0.0, den2 = 0.0;
    std::vector<double> out(5);
    for (int k = 0; k < net.n_params(); ++k) {
        const double save = net.params()[static_cast<std::size_t>(k)];
        auto loss_at = [&](double p) {
            net.params()[static_cast<std::size_t>(k)] = p;
            net.value_batch(pts.data(), 5, out.data());
            double l = 0.0;
            for (int b = 0; b < 5; ++b) l += adj[static_cast<std::size_t>(b)] * out[static_cast<std::size_t>(b)];
            return l;
        };
        const double fd = (loss_at(save + eps) - loss_at(save - eps)) / (2.0 * eps);
        net.params()[static_cast<std::size_t>(k)] = save;
        const double d = fd - grad[static_cast<std::size_t>(k)];
        num2 += d * d;
        den2 += grad[static_cast<std::size_t>(k)] * grad[static_cast<std::size_t>(k)];
    }
    CHECK(std::sqrt(num2 / den2) <= 1e-4);

    // zero adjoints give the exact zero gradient
    std::vector<double> zero(5, 0.0);
    for (double gk : net.param_gradient(pts.data(), 5, zero.data())) CHECK(gk == 0.0);

    // single-sample adjoint equals per-example backprop (linearity)
    std::vector<double> one{1.0};
    const auto single = net.param_gradient(pts.data(), 1, one.data());
    std::vector<double> picked(5, 0.0);
    picked[0] = 1.0;
    const auto from_batch = net.param_gradient(pts.data(), 5, picked.data());
    for (int k = 0; k < net.n_params(); ++k)
        CHECK(single[static_cast<std::size_t>(k)] == from_batch[static_cast<std::size_t>(k)]);
}

TEST_CASE("softplus analytic input Hessian matches finite differences at O(h^2)") {
    Mlp net({2, 16, 16, 1}, Activation::softplus, 7);
    net.set_input_normalization(-2.0, 2.0, -2.0, 2.0);
    net.output_scale = 3.0;
    const Point2 t{0.37, -0.81};
    double v, grad[2], hess[3];
    net.value_hess(t, v, grad, hess);
    CHECK(v == doctest::Approx(net.value(t)));

    auto fd_hess = [&](double h, double out[3]) {
        const double c0 = net.value(t);
        out[0] = (net.value({t.x + h, t.y}) - 2 * c0 + net.value({t.x - h, t.y})) / (h * h);
        out[2] = (net.value({t.x, t.y + h}) - 2 * c0 + net.value({t.x, t.y - h})) / (h * h);
        out[1] = (net.value({t.x + h, t.y + h}) - net.value({t.x + h, t.y - h}) -
                  net.value({t.x - h, t.y + h}) + net.value({t.x - h, t.y - h})) /
                 (4 * h * h);
    };
    double h1[3], h2[3];
    fd_hess(1e-2, h1);
    fd_hess(5e-3, h2);
    for (int k = 0; k < 3; ++k) {
        const double e1 = std::fabs(h1[k] - hess[k]);
        const double e2 = std::fabs(h2[k] - hess[k]);
        CHECK(e2 < e1);            // shrinking with h
        CHECK(e1 / (e2 + 1e-14) > 2.0);  // roughly O(h^2)
    }
}

TEST_CASE("checkpoint round trip preserves the model exactly") {
    Mlp net({2, 8, 8, 1}, Activation::softplus, 11);
    net.set_input_normalization(0.0, 4.0, -1.0, 3.0);
    net.output_scale = 17.0;
    const Mlp back = Mlp::from_json(net.to_json());
    for (double x : {-0.9, 0.1, 0.8})
        for (double y : {-0.5, 0.5, 2.2})
            CHECK(net.value({x + 1.5, y}) == back.value({x + 1.5, y}));
}

TEST_CASE("train_potential: uniform target yields an affine potential") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 8, 8);
    PosteriorField target;
    target.grid = g;
    target.n_eff = 0.0;
    target.rows.assign(static_cast<std::size_t>(g.cells()) * g.cells(), 1.0 / g.volume());

    TrainConfig cfg;
    cfg.iterations = 400;
    cfg.hidden = {16, 16};
    cfg.seed = 3;
    const TrainResult res = train_potential(target, cfg);
    CHECK(res.final_loss < res.loss_history.front() / 5.0);
    CHECK(res.final_loss < 2e-4);

    // Hessian of the trained potential is small: compare with a potential that
    // visibly curves on this grid (unit quadratic)
    double max_h = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
        double v, gr[2], hh[3];
        res.model.value_hess(g.center_flat(c), v, gr, hh);
        for (double x : hh) max_h = std::max(max_h, std::fabs(x));
    }
    CHECK(max_h < 0.35);
}

TEST_CASE("train_potential: zero iterations returns a finite loss within the JSD bound") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 6, 6);
    const auto target = smoothed_target(g, 0.3);
    TrainConfig cfg;
    cfg.iterations = 0;
    cfg.hidden = {8};
    const TrainResult res = train_potential(target, cfg);
    CHECK(std::isfinite(res.final_loss));
    CHECK(res.final_loss <= std::log(2.0));
    CHECK(res.loss_history.size() == 1);
}

TEST_CASE("train_potential: loss trend is non-increasing over 100-iteration windows") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 12, 12);
    const auto target = oracle_exact_posterior(g, 32, 2);
    TrainConfig cfg;
    cfg.iterations = 500;
    cfg.hidden = {32, 32};
    cfg.seed = 5;
    const TrainResult res = train_potential(target, cfg);
    REQUIRE(res.loss_history.size() == 500);
    std::vector<double> window_means;
    for (std::size_t w = 0; w + 100 <= res.loss_history.size(); w += 100) {
        double acc = 0.0;
        for (std::size_t i = w; i < w + 100; ++i) acc += res.loss_history[i];
        window_means.push_back(acc / 100.0);
    }
    for (std::size_t k = 1; k < window_means.size(); ++k)
        CHECK(window_means[k] <= window_means[k - 1] * (1.0 + 1e-3) + 1e-12);
    CHECK(res.final_loss < res.loss_history.front());
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.beta1 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig{};
    cfg.hidden.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
