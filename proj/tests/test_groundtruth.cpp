#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "fisherlat/field.hpp"
#include "fisherlat/groundtruth.hpp"
#include "fisherlat/rng.hpp"

using namespace fisherlat;

namespace {

// independent quadrature oracle for the Onsager integral: the inner integral
// over theta2 reduces analytically via Int_0^pi ln(a - b cos q) dq
//   = pi ln((a + sqrt(a^2 - b^2)) / 2), leaving a 1-d midpoint rule
double onsager_reduced_midpoint(double T, int n) {
    const double k = 2.0 / T, pi = 3.14159265358979323846;
    const double c2 = std::cosh(k) * std::cosh(k), s = std::sinh(k);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double q = pi * (i + 0.5) / n;
        const double a = c2 - s * std::cos(q);
        acc += pi * std::log(0.5 * (a + std::sqrt(a * a - s * s)));
    }
    acc *= pi / n;
    return -T * (std::log(2.0) + acc / (2.0 * pi * pi));
}

}  // namespace

TEST_CASE("tasep free energy: branch values and domain errors") {
    CHECK(tasep_free_energy(0.7, 0.8) == doctest::Approx(0.25));
    CHECK(tasep_free_energy(0.3, 0.6) == doctest::Approx(0.21));
    CHECK(tasep_free_energy(0.6, 0.2) == doctest::Approx(0.16));
    CHECK_THROWS_AS(tasep_free_energy(0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(tasep_free_energy(0.5, 1.2), std::invalid_argument);
}

TEST_CASE("tasep free energy: continuity and first-order derivative jump") {
    // continuity across alpha = beta < 1/2 and across the second-order lines
    for (double b : {0.1, 0.2, 0.3, 0.4, 0.45}) {
        const double delta = 1e-13;
        const double jump =
            std::fabs(tasep_free_energy(b - delta, b) - tasep_free_energy(b + delta, b));
        CHECK(jump < 1e-12);
    }
    for (double b : {0.6, 0.7, 0.9}) {
        const double delta = 1e-13;
        CHECK(std::fabs(tasep_free_energy(0.5 - delta, b) - tasep_free_energy(0.5 + delta, b)) <
              1e-12);
        CHECK(std::fabs(tasep_free_energy(b, 0.5 - delta) - tasep_free_energy(b, 0.5 + delta)) <
              1e-12);
    }
    // the alpha-derivative jumps across alpha = beta < 1/2 (first-order line)
    const double b = 0.3, h = 1e-6;
    const double left = (tasep_free_energy(b - h, b) - tasep_free_energy(b - 2 * h, b)) / h;
    const double right = (tasep_free_energy(b + 2 * h, b) - tasep_free_energy(b + h, b)) / h;
    CHECK(std::fabs(left - right) > 0.1);
}

TEST_CASE("onsager free energy: entropy limit, ground state, quadrature cross-check") {
    CHECK(onsager_free_energy(100.0) / (-100.0) == doctest::Approx(std::log(2.0)).epsilon(1e-3));
    CHECK(onsager_free_energy(0.5) == doctest::Approx(-2.0).epsilon(1e-2));
    const double gl = onsager_free_energy(2.27);
    const double mid = onsager_reduced_midpoint(2.27, 10000);
    CHECK(std::fabs(gl - mid) < 1e-6);
    CHECK_THROWS_AS(onsager_free_energy(-1.0), std::invalid_argument);
}

TEST_CASE("integrate_derivative_field: exact recovery from midpoint-sampled gradients") {
    ParamGrid g(0.0, 2.0, -1.0, 1.0, 12, 12);
    // F = 0.5 x^2 + x y + 2 y^2: forward differences of a quadratic equal the
    // analytic gradient at the pair midpoint, so the objective reaches zero
    auto F = [](Point2 t) { return 0.5 * t.x * t.x + t.x * t.y + 2.0 * t.y * t.y; };
    ScalarField d1(g), d2(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const Point2 t = g.center(ix, iy);
            d1.at(ix, iy) = (t.x + 0.5 * g.dx()) + t.y;        // dF/dx at (x + h/2, y)
            d2.at(ix, iy) = t.x + 4.0 * (t.y + 0.5 * g.dy());  // dF/dy at (x, y + h/2)
        }
    const IntegrateResult res = integrate_derivative_field(d1, d2);
    CHECK(res.residual < 1e-6);  // limited by the CG stopping tolerance
    const double offset = F(g.center_flat(0));  // gauge: F(cell 0) = 0
    double worst = 0.0;
    for (int c = 0; c < g.cells(); ++c)
        worst = std::max(worst, std::fabs(res.F.values[static_cast<std::size_t>(c)] -
                                          (F(g.center_flat(c)) - offset)));
    CHECK(worst < 1e-6);
}

TEST_CASE("integrate_derivative_field: least-squares projection of curl-carrying input") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 8, 8);
    ScalarField d1(g), d2(g);
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        d1.values[static_cast<std::size_t>(c)] = -t.y;  // rotational field, not a gradient
        d2.values[static_cast<std::size_t>(c)] = t.x;
    }
    const IntegrateResult res = integrate_derivative_field(d1, d2);
    CHECK(res.residual > 0.1);
    for (double v : res.F.values) CHECK(std::isfinite(v));
}

TEST_CASE("integrate after forward_diff is the identity up to the gauge constant") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 10, 10);
    Rng rng(12);
    ScalarField f(g);
    for (auto& v : f.values) v = rng.uniform() * 3.0 - 1.0;
    ScalarField d1, d2;
    forward_diff(f, d1, d2);
    const IntegrateResult res = integrate_derivative_field(d1, d2);
    const double offset = f.values[0];
    for (int c = 0; c < g.cells(); ++c)
        CHECK(res.F.values[static_cast<std::size_t>(c)] ==
              doctest::Approx(f.values[static_cast<std::size_t>(c)] - offset).epsilon(1e-6));
}

TEST_CASE("affine_rmse: identity, exact family member, gauge completeness, degeneracy") {
    ParamGrid g(0.0, 1.0, -1.0, 1.0, 8, 8);
    Rng rng(77);
    ScalarField f_gt(g);
    for (auto& v : f_gt.values) v = rng.uniform();

    AffineFit fit = affine_rmse(f_gt, f_gt);
    CHECK(fit.rmse == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.s == doctest::Approx(1.0));
    CHECK(std::fabs(fit.c1) < 1e-9);
    CHECK(std::fabs(fit.b) < 1e-9);

    // F_rec = 2 F_gt + 3 t1 - 1 is in the gauge family
    ScalarField f_rec(g);
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        f_rec.values[static_cast<std::size_t>(c)] =
            2.0 * f_gt.values[static_cast<std::size_t>(c)] + 3.0 * t.x - 1.0;
    }
    CHECK(affine_rmse(f_rec, f_gt).rmse <= 1e-10);

    // gauge completeness: affine images of F fit exactly
    for (const auto& coefs : std::vector<std::array<double, 4>>{
             {1.0, 0.0, 0.0, 0.0}, {-2.0, 1.0, 0.5, 3.0}, {0.3, -4.0, 2.0, -1.0}}) {
        ScalarField img(g);
        for (int c = 0; c < g.cells(); ++c) {
            const Point2 t = g.center_flat(c);
            img.values[static_cast<std::size_t>(c)] =
                coefs[0] * f_gt.values[static_cast<std::size_t>(c)] + coefs[1] * t.x +
                coefs[2] * t.y + coefs[3];
        }
        CHECK(affine_rmse(f_gt, img).rmse <= 1e-9);
    }

    ScalarField rnd(g);
    for (auto& v : rnd.values) v = rng.uniform();
    CHECK(affine_rmse(rnd, f_gt).rmse > 0.0);

    // the comparison is invariant to the reconstruction's own affine gauge
    ScalarField regauged(g);
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        regauged.values[static_cast<std::size_t>(c)] =
            -1.7 * rnd.values[static_cast<std::size_t>(c)] + 0.4 * t.x - 2.0 * t.y + 5.0;
    }
    CHECK(affine_rmse(regauged, f_gt).rmse ==
          doctest::Approx(affine_rmse(rnd, f_gt).rmse).epsilon(1e-9));

    // constant F_rec: rank-deficient design refit with s = 0 and flagged
    ScalarField flat(g);
    for (auto& v : flat.values) v = 4.2;
    fit = affine_rmse(flat, f_gt);
    CHECK(fit.degenerate);
    CHECK(fit.s == 0.0);
}

TEST_CASE("mean_as_stat recovers oracle parameters within a grid spacing") {
    ParamGrid g(-0.8, 0.8, -0.8, 0.8, 8, 8);
    SamplerSpec spec;
    spec.system = System::oracle;
    spec.oracle_spins = 256;
    const FeatureTable table = build_feature_table(g, spec, 24, 42);
    MeanAsStatConfig cfg;
    cfg.iterations = 1500;
    cfg.hidden = {32, 32};
    const MeanAsStatResult res = mean_as_stat(table, cfg);
    CHECK(!res.degenerate);
    double se1 = 0.0, se2 = 0.0;
    for (int c = 0; c < g.cells(); ++c) {
        const Point2 t = g.center_flat(c);
        se1 += (res.s_t1.values[static_cast<std::size_t>(c)] - t.x) *
               (res.s_t1.values[static_cast<std::size_t>(c)] - t.x);
        se2 += (res.s_t2.values[static_cast<std::size_t>(c)] - t.y) *
               (res.s_t2.values[static_cast<std::size_t>(c)] - t.y);
    }
    CHECK(std::sqrt(se1 / g.cells()) <= g.dx());
    CHECK(std::sqrt(se2 / g.cells()) <= g.dy());
}

TEST_CASE("mean_as_stat flags constant features as degenerate with an affine potential") {
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 6, 6);
    FeatureTable t;
    t.grid = g;
    t.dim = 2;
    const int reps = 4;
    t.counts.assign(static_cast<std::size_t>(g.cells()), reps);
    for (int c = 0; c < g.cells(); ++c)
        for (int r = 0; r < reps; ++r) {
            t.row_cell.push_back(c);
            t.rows.push_back(0.7);
            t.rows.push_back(-0.2);
        }
    t.means.assign(static_cast<std::size_t>(g.cells()) * 2, 0.0);
    t.variances.assign(static_cast<std::size_t>(g.cells()) * 2, 0.0);
    MeanAsStatConfig cfg;
    cfg.iterations = 200;
    cfg.hidden = {8};
    const MeanAsStatResult res = mean_as_stat(t, cfg);
    CHECK(res.degenerate);
    // integral of constant fields is affine: second differences vanish
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 1; ix + 1 < g.nx; ++ix) {
            const double second = res.F.at(ix + 1, iy) - 2.0 * res.F.at(ix, iy) + res.F.at(ix - 1, iy);
            CHECK(std::fabs(second) < 1e-6);
        }
}

TEST_CASE("ising reference fields: symmetry, saturation, monotone energy trend") {
    // narrow H-window around zero: M vanishes above T_c, E decreases in T
    {
        ParamGrid g(3.0, 4.5, -0.02, 0.02, 8, 4);
        SamplerSpec spec;
        spec.system = System::ising;
        spec.ising_side = 16;
        spec.ising_sweeps = 400;
        const auto ref = ising_reference_fields(g, spec, 16, 5);
        for (int c = 0; c < g.cells(); ++c) CHECK(std::fabs(ref.M.values[static_cast<std::size_t>(c)]) < 0.1);
        // exact antisymmetry in H after symmetrization
        for (int iy = 0; iy < g.ny / 2; ++iy)
            for (int ix = 0; ix < g.nx; ++ix)
                CHECK(ref.M.at(ix, iy) == doctest::Approx(-ref.M.at(ix, g.ny - 1 - iy)));
        // column-averaged E decreases with T
        std::vector<double> col(static_cast<std::size_t>(g.nx), 0.0);
        for (int ix = 0; ix < g.nx; ++ix) {
            for (int iy = 0; iy < g.ny; ++iy) col[static_cast<std::size_t>(ix)] += ref.E.at(ix, iy);
            col[static_cast<std::size_t>(ix)] /= g.ny;
        }
        for (int ix = 1; ix < g.nx; ++ix)
            CHECK(col[static_cast<std::size_t>(ix)] < col[static_cast<std::size_t>(ix) - 1]);
    }
    // saturated field: M(T=1, H=2) close to 1
    {
        ParamGrid g(0.9, 1.1, 1.9, 2.1, 4, 4);
        SamplerSpec spec;
        spec.system = System::ising;
        spec.ising_side = 16;
        spec.ising_sweeps = 300;
        const auto ref = ising_reference_fields(g, spec, 8, 6);
        for (int c = 0; c < g.cells(); ++c)
            CHECK(ref.M.values[static_cast<std::size_t>(c)] == doctest::Approx(1.0).epsilon(0.02));
    }
}
