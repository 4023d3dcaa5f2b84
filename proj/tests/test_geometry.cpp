#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "fisherlat/geometry.hpp"
#include "fisherlat/rng.hpp"
#include "fisherlat/samplers.hpp"

using namespace fisherlat;

namespace {

MetricField constant_metric(const ParamGrid& g, Sym2 t) {
    MetricField f;
    f.grid = g;
    f.tensors.assign(static_cast<std::size_t>(g.cells()), t);
    f.floor_eps = 1e-9;
    return f;
}

std::vector<double> values_on_grid(const ParamGrid& g, double (*fn)(Point2)) {
    std::vector<double> v(static_cast<std::size_t>(g.cells()));
    for (int c = 0; c < g.cells(); ++c) v[static_cast<std::size_t>(c)] = fn(g.center_flat(c));
    return v;
}

// smooth high-cost ridge: g = (1 + A exp(-(x-xc)^2/(2 w^2)) S(y)) I with a
// smooth cutoff S that releases the ridge above y = y_top
MetricField strip_metric(const ParamGrid& g, double amp, double xc, double w, double y_top) {
    MetricField f;
    f.grid = g;
    f.tensors.resize(static_cast<std::size_t>(g.cells()));
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        const double bump = std::exp(-0.5 * (t.x - xc) * (t.x - xc) / (w * w));
        const double cut = 1.0 / (1.0 + std::exp((t.y - y_top) / 0.10));
        const double s = 1.0 + amp * bump * cut;
        f.tensors[static_cast<std::size_t>(c)] = {s, 0.0, s};
    }
    f.floor_eps = 1e-9;
    return f;
}

// 16-neighbor Dijkstra over cell centers; edge weight = metric length of the
// straight segment, midpoint-sampled in 4 pieces. Overestimates the true
// geodesic by at most ~2% (sec(pi/16) - 1) plus discretization error.
double dijkstra_length(const MetricField& field, Point2 a, Point2 b) {
    const ParamGrid& g = field.grid;
    const int n = g.cells();
    const int offs[16][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1}, {-1, 1}, {-1, -1},
                             {1, 2},  {1, -2}, {-1, 2}, {-1, -2}, {2, 1},  {2, -1}, {-2, 1}, {-2, -1}};
    auto seg_len = [&](Point2 p, Point2 q) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
            const double s0 = k / 4.0, s1 = (k + 1) / 4.0;
            const Point2 mid = 0.5 * ((p + s0 * (q - p)) + (p + s1 * (q - p)));
            const Point2 d = 0.25 * (q - p);
            acc += std::sqrt(metric_at(field, mid).quad(d));
        }
        return acc;
    };
    std::vector<double> dist(static_cast<std::size_t>(n), 1e300);
    const int src = g.nearest(a), dst = g.nearest(b);
    dist[static_cast<std::size_t>(src)] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({0.0, src});
    while (!pq.empty()) {
        const auto [d, c] = pq.top();
        pq.pop();
        if (d > dist[static_cast<std::size_t>(c)]) continue;
        if (c == dst) break;
        const int ix = g.ix_of(c), iy = g.iy_of(c);
        for (const auto& o : offs) {
            const int jx = ix + o[0], jy = iy + o[1];
            if (jx < 0 || jx >= g.nx || jy < 0 || jy >= g.ny) continue;
            const int cj = g.index(jx, jy);
            const double w = seg_len(g.center_flat(c), g.center_flat(cj));
            if (dist[static_cast<std::size_t>(c)] + w < dist[static_cast<std::size_t>(cj)]) {
                dist[static_cast<std::size_t>(cj)] = dist[static_cast<std::size_t>(c)] + w;
                pq.push({dist[static_cast<std::size_t>(cj)], cj});
            }
        }
    }
    // account for the endpoint snap
    return dist[static_cast<std::size_t>(dst)] + seg_len(a, g.center_flat(src)) +
           seg_len(g.center_flat(dst), b);
}

double quad_aniso(Point2 t) { return 0.5 * (t.x * t.x + 4.0 * t.y * t.y); }

}  // namespace

TEST_CASE("hessian of a quadratic field is exact, affine fields hit the floor") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 8, 8);
    const MetricField f = hessian_field_from_values(values_on_grid(g, quad_aniso), g);
    for (const auto& t : f.tensors) {
        CHECK(t.a11 == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(t.a22 == doctest::Approx(4.0).epsilon(1e-10));
        CHECK(std::fabs(t.a12) < 1e-10);
    }
    CHECK(f.clamped_cells == 0);

    const MetricField aff = hessian_field_from_values(
        values_on_grid(g, [](Point2 t) { return 2.0 * t.x - t.y + 0.5; }), g);
    CHECK(aff.clamped_cells == g.cells());
    for (const auto& t : aff.tensors) {
        CHECK(t.a11 == doctest::Approx(aff.floor_eps));
        CHECK(t.a22 == doctest::Approx(aff.floor_eps));
    }
}

TEST_CASE("oracle logZ hessian recovered at second order by finite differences") {
    const int n_spins = 32;
    auto max_err = [&](int n) {
        ParamGrid g(-1.0, 1.0, -1.0, 1.0, n, n);
        std::vector<double> lz(static_cast<std::size_t>(g.cells()));
        for (int c = 0; c < g.cells(); ++c) {
            const Point2 t = g.center_flat(c);
            lz[static_cast<std::size_t>(c)] = oracle_logz(t.x, t.y, n_spins);
        }
        const MetricField f = hessian_field_from_values(lz, g);
        double worst = 0.0;
        for (int iy = 1; iy + 1 < g.ny; ++iy)
            for (int ix = 1; ix + 1 < g.nx; ++ix) {
                const Point2 t = g.center(ix, iy);
                double h11, h22;
                oracle_logz_hess(t.x, t.y, n_spins, h11, h22);
                const Sym2& m = f.tensors[static_cast<std::size_t>(g.index(ix, iy))];
                worst = std::max({worst, std::fabs(m.a11 - h11), std::fabs(m.a22 - h22),
                                  std::fabs(m.a12)});
            }
        return worst;
    };
    const double e8 = max_err(8);
    const double e16 = max_err(16);
    CHECK(e16 < e8);
    CHECK(e8 / e16 > 3.0);
}

TEST_CASE("analytic and finite-diff hessian of an mlp agree") {
    Mlp net({2, 16, 16, 1}, Activation::softplus, 21);
    net.set_input_normalization(-1.0, 1.0, -1.0, 1.0);
    net.output_scale = 5.0;
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 6, 6);
    const MetricField an = hessian_field(net, g, HessianMode::analytic, 0.0);
    const MetricField fd = hessian_field(net, g, HessianMode::finite_diff, 1e-3);
    for (int c = 0; c < g.cells(); ++c) {
        CHECK(fd.tensors[static_cast<std::size_t>(c)].a11 ==
              doctest::Approx(an.tensors[static_cast<std::size_t>(c)].a11).epsilon(1e-4));
        CHECK(fd.tensors[static_cast<std::size_t>(c)].a22 ==
              doctest::Approx(an.tensors[static_cast<std::size_t>(c)].a22).epsilon(1e-4));
    }
    CHECK_THROWS_AS(hessian_field(net, g, HessianMode::finite_diff, -1.0), std::invalid_argument);
    Mlp relu({2, 8, 1}, Activation::relu, 2);
    CHECK_THROWS_AS(hessian_field(relu, g, HessianMode::analytic, 0.0), std::invalid_argument);
}

TEST_CASE("metric field invariants: symmetry and eigenvalue floor") {
    ParamGrid g(-1.0, 1.0, -1.0, 1.0, 8, 8);
    Rng rng(17);
    std::vector<double> noisy(static_cast<std::size_t>(g.cells()));
    for (auto& v : noisy) v = rng.uniform();  // rough field: many non-PD hessians
    const MetricField f = hessian_field_from_values(noisy, g);
    CHECK(f.floor_eps > 0.0);
    for (const auto& t : f.tensors) {
        double lo, hi;
        t.eigenvalues(lo, hi);
        CHECK(lo >= f.floor_eps * (1.0 - 1e-9));
    }
    CHECK(f.clamped_cells > 0);
}

TEST_CASE("metric affine-gauge invariance to 1e-10") {
    ParamGrid g(0.0, 2.0, 0.0, 2.0, 8, 8);
    Rng rng(9);
    std::vector<double> v(static_cast<std::size_t>(g.cells()));
    for (auto& x : v) x = 3.0 * rng.uniform();
    std::vector<double> v2 = v;
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        v2[static_cast<std::size_t>(c)] += 4.0 * t.x - 1.5 * t.y + 7.0;
    }
    const MetricField f1 = hessian_field_from_values(v, g);
    const MetricField f2 = hessian_field_from_values(v2, g);
    for (std::size_t c = 0; c < f1.tensors.size(); ++c) {
        CHECK(std::fabs(f1.tensors[c].a11 - f2.tensors[c].a11) <= 1e-10);
        CHECK(std::fabs(f1.tensors[c].a12 - f2.tensors[c].a12) <= 1e-10);
        CHECK(std::fabs(f1.tensors[c].a22 - f2.tensors[c].a22) <= 1e-10);
    }
}

TEST_CASE("metric_at: centers, midpoints, constants, out-of-bounds") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 4, 4);
    MetricField f = constant_metric(g, {2.0, 0.3, 1.0});
    f.tensors[static_cast<std::size_t>(g.index(1, 1))] = {4.0, 0.1, 2.0};
    const Sym2 at_center = metric_at(f, g.center(1, 1));
    CHECK(at_center.a11 == doctest::Approx(4.0));
    CHECK(at_center.a12 == doctest::Approx(0.1));

    const Point2 mid = 0.5 * (g.center(1, 1) + g.center(2, 1));
    const Sym2 at_mid = metric_at(f, mid);
    CHECK(at_mid.a11 == doctest::Approx(3.0));
    CHECK(at_mid.a12 == doctest::Approx(0.2));

    const MetricField c = constant_metric(g, {1.5, -0.2, 2.5});
    for (double x : {0.01, 0.37, 0.83})
        for (double y : {0.05, 0.5, 0.99}) {
            const Sym2 m = metric_at(c, {x, y});
            CHECK(m.a11 == doctest::Approx(1.5));
            CHECK(m.a12 == doctest::Approx(-0.2));
            CHECK(m.a22 == doctest::Approx(2.5));
        }
    CHECK_THROWS_AS(metric_at(c, {1.5, 0.5}), std::domain_error);
}

TEST_CASE("path_length: euclidean checks, scaling, reversal, concatenation, refinement") {
    ParamGrid g(-1.0, 5.0, -1.0, 5.0, 8, 8);
    const MetricField id = constant_metric(g, {1.0, 0.0, 1.0});
    const std::vector<Point2> straight{{0.0, 0.0}, {1.5, 2.0}, {3.0, 4.0}};
    CHECK(path_length(straight, id) == doctest::Approx(5.0));
    const MetricField four = constant_metric(g, {4.0, 0.0, 4.0});
    CHECK(path_length(straight, four) == doctest::Approx(10.0));

    // reversal invariance and additivity at a shared endpoint
    ParamGrid g2(0.0, 1.0, 0.0, 1.0, 8, 8);
    MetricField smooth;
    smooth.grid = g2;
    smooth.tensors.resize(static_cast<std::size_t>(g2.cells()));
    for (int c = 0; c < g2.cells(); ++c) {
        const Point2 t = g2.center_flat(c);
        smooth.tensors[static_cast<std::size_t>(c)] = {1.0 + t.x, 0.2 * t.x * t.y, 1.0 + t.y};
    }
    smooth.floor_eps = 1e-9;
    const std::vector<Point2> p1{{0.1, 0.1}, {0.3, 0.5}, {0.5, 0.4}};
    const std::vector<Point2> p2{{0.5, 0.4}, {0.7, 0.8}, {0.9, 0.6}};
    std::vector<Point2> joined = p1;
    joined.insert(joined.end(), p2.begin() + 1, p2.end());
    std::vector<Point2> rev = joined;
    std::reverse(rev.begin(), rev.end());
    CHECK(path_length(joined, smooth) == doctest::Approx(path_length(rev, smooth)).epsilon(1e-12));
    CHECK(path_length(joined, smooth) ==
          doctest::Approx(path_length(p1, smooth) + path_length(p2, smooth)).epsilon(1e-12));

    // refining a straight path on a smooth field barely changes its length
    auto linspace = [](Point2 a, Point2 b, int n) {
        std::vector<Point2> out;
        for (int k = 0; k < n; ++k) {
            const double s = static_cast<double>(k) / (n - 1);
            out.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
        }
        return out;
    };
    const double l1 = path_length(linspace({0.1, 0.2}, {0.9, 0.7}, 17), smooth);
    const double l2 = path_length(linspace({0.1, 0.2}, {0.9, 0.7}, 33), smooth);
    CHECK(std::fabs(l2 - l1) / l1 < 1e-3);
}

TEST_CASE("geodesic on constant and euclidean-hessian metrics stays straight") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 8, 8);
    const MetricField id = constant_metric(g, {1.3, 0.2, 0.9});
    GeodesicConfig cfg;
    cfg.iterations = 500;
    const GeodesicPath path = geodesic(id, {0.1, 0.2}, {0.9, 0.8}, 17, cfg);
    CHECK(path.points.front().x == 0.1);
    CHECK(path.points.back().y == 0.8);
    // collinearity: max distance from the segment
    const Point2 a = path.points.front(), b = path.points.back();
    const double nrm = std::sqrt(dot(b - a, b - a));
    for (const auto& p : path.points) {
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        CHECK(std::fabs(cross) / nrm <= 1e-6);
    }
    CHECK(path.length <= path_length({a, b}, id) + 1e-9);

    // metric from the hessian of 0.5||t||^2 is the identity: same behavior
    const auto vals = values_on_grid(g, [](Point2 t) { return 0.5 * (t.x * t.x + t.y * t.y); });
    const GeodesicPath p2 = geodesic(hessian_field_from_values(vals, g), {0.2, 0.1}, {0.8, 0.9}, 17, cfg);
    const Point2 a2 = p2.points.front(), b2 = p2.points.back();
    const double n2 = std::sqrt(dot(b2 - a2, b2 - a2));
    for (const auto& p : p2.points) {
        const double cross = (b2.x - a2.x) * (p.y - a2.y) - (b2.y - a2.y) * (p.x - a2.x);
        CHECK(std::fabs(cross) / n2 <= 1e-6);
    }
}

TEST_CASE("geodesic bends around a high-cost strip and matches the Dijkstra oracle") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 64, 64);
    const MetricField f = strip_metric(g, 80.0, 0.5, 0.06, 0.55);
    const Point2 a{0.1, 0.3}, b{0.9, 0.3};

    GeodesicConfig cfg;
    cfg.iterations = 6000;
    const GeodesicPath path = geodesic(f, a, b, 49, cfg);

    const double straight = path_length({a, b}, f);
    CHECK(path.length < straight);  // strictly below the through-strip line

    const double oracle = dijkstra_length(f, a, b);
    CHECK(std::fabs(path.length - oracle) / oracle <= 0.05);

    // the optimized path must actually leave the straight line
    double max_dev = 0.0;
    for (const auto& p : path.points) max_dev = std::max(max_dev, std::fabs(p.y - 0.3));
    CHECK(max_dev > 0.1);
}

TEST_CASE("path_curvature: exact zero for straight, right angle, circle limit") {
    // integer coordinates: consecutive differences are bitwise equal
    CHECK(path_curvature({{0, 0}, {1, 1}, {2, 2}, {3, 3}}) == 0.0);
    CHECK(path_curvature({{0, 0}, {1, 0}, {1, 1}}) ==
          doctest::Approx(3.14159265358979323846 / 2.0));

    const double r = 2.0;
    auto polygon_curvature = [&](int n) {
        std::vector<Point2> pts;
        for (int k = 0; k <= n; ++k) {
            const double a = 2.0 * 3.14159265358979323846 * k / n;
            pts.push_back({r * std::cos(a), r * std::sin(a)});
        }
        return path_curvature(pts);
    };
    const double k64 = polygon_curvature(64);
    const double k256 = polygon_curvature(256);
    CHECK(std::fabs(k256 - 1.0 / r) < std::fabs(k64 - 1.0 / r));
    CHECK(k256 == doctest::Approx(1.0 / r).epsilon(1e-3));

    CHECK_THROWS_AS(path_curvature({{0, 0}, {0, 0}, {1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(path_curvature({{0, 0}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("phase_map: silent on constant fields, flags exactly a step line") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 16, 16);
    const MetricField c = constant_metric(g, {2.0, 0.0, 2.0});
    const PhaseMap quiet = phase_map(c);
    for (double v : quiet.roughness.values) CHECK(v == 0.0);
    for (auto f : quiet.flags) CHECK(f == 0);

    // tensor step at ix = 8
    MetricField step = constant_metric(g, {1.0, 0.0, 1.0});
    for (int c2 = 0; c2 < g.cells(); ++c2)
        if (g.ix_of(c2) >= 8) step.tensors[static_cast<std::size_t>(c2)] = {5.0, 0.0, 5.0};
    const PhaseMap pm = phase_map(step, 0.5);
    for (int c2 = 0; c2 < g.cells(); ++c2) {
        const bool near_step = g.ix_of(c2) == 7 || g.ix_of(c2) == 8;
        CHECK(static_cast<bool>(pm.flags[static_cast<std::size_t>(c2)]) == near_step);
    }
}
