#include "fisherlat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fisherlat/io.hpp"

namespace fisherlat {

void Sym2::eigenvalues(double& lo, double& hi) const {
    const double mean = 0.5 * (a11 + a22);
    const double disc = std::sqrt(0.25 * (a11 - a22) * (a11 - a22) + a12 * a12);
    lo = mean - disc;
    hi = mean + disc;
}

Sym2 clamp_eigenvalues(const Sym2& g, double floor_eps, bool* clamped) {
    double lo, hi;
    g.eigenvalues(lo, hi);
    if (clamped) *clamped = false;
    if (lo >= floor_eps) return g;
    if (clamped) *clamped = true;
    // eigenvector of the smaller eigenvalue
    double vx, vy;
    if (std::fabs(g.a12) > 1e-300) {
        vx = g.a12;
        vy = lo - g.a11;
    } else {
        // diagonal tensor: pick the axis of the smaller entry
        if (g.a11 <= g.a22) {
            vx = 1.0;
            vy = 0.0;
        } else {
            vx = 0.0;
            vy = 1.0;
        }
    }
    const double nrm = std::sqrt(vx * vx + vy * vy);
    vx /= nrm;
    vy /= nrm;
    const double l1 = std::max(lo, floor_eps);
    const double l2 = std::max(hi, floor_eps);
    // g = l1 v v^T + l2 w w^T with w perpendicular to v
    const double wx = -vy, wy = vx;
    return {l1 * vx * vx + l2 * wx * wx, l1 * vx * vy + l2 * wx * wy, l1 * vy * vy + l2 * wy * wy};
}

HessianMode hessian_mode_from_string(const std::string& s) {
    if (s == "analytic") return HessianMode::analytic;
    if (s == "finite-diff" || s == "finite_diff") return HessianMode::finite_diff;
    throw std::invalid_argument("unknown hessian mode: " + s);
}

namespace {
MetricField finalize_metric(const ParamGrid& grid, std::vector<Sym2> raw, double floor_scale) {
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
}  // namespace

MetricField hessian_field(const Mlp& model, const ParamGrid& grid, HessianMode mode, double h,
                          double floor_scale) {
    const int n = grid.cells();
    std::vector<Sym2> raw(static_cast<std::size_t>(n));
    if (mode == HessianMode::analytic) {
        if (model.activation() != Activation::softplus)
            throw std::invalid_argument("hessian_field: analytic mode requires a smooth activation");
#pragma omp parallel for schedule(static)
        for (int c = 0; c < n; ++c) {
            double v, g[2], hh[3];
            model.value_hess(grid.center_flat(c), v, g, hh);
            raw[static_cast<std::size_t>(c)] = {hh[0], hh[1], hh[2]};
        }
    } else {
        if (!(h > 0.0)) throw std::invalid_argument("hessian_field: finite-diff spacing must be positive");
        // the model extends beyond the grid, so central stencils apply everywhere
#pragma omp parallel for schedule(static)
        for (int c = 0; c < n; ++c) {
            const Point2 t = grid.center_flat(c);
            const double c0 = model.value(t);
            const double xp = model.value({t.x + h, t.y});
            const double xm = model.value({t.x - h, t.y});
            const double yp = model.value({t.x, t.y + h});
            const double ym = model.value({t.x, t.y - h});
            const double pp = model.value({t.x + h, t.y + h});
            const double pm = model.value({t.x + h, t.y - h});
            const double mp = model.value({t.x - h, t.y + h});
            const double mm = model.value({t.x - h, t.y - h});
            raw[static_cast<std::size_t>(c)] = {(xp - 2.0 * c0 + xm) / (h * h),
                                                (pp - pm - mp + mm) / (4.0 * h * h),
                                                (yp - 2.0 * c0 + ym) / (h * h)};
        }
    }
    return finalize_metric(grid, std::move(raw), floor_scale);
}

MetricField hessian_field_from_values(const std::vector<double>& values, const ParamGrid& grid,
                                      double floor_scale) {
    const int n = grid.cells();
    if (values.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("hessian_field_from_values: size mismatch");
    auto V = [&](int i, int j) { return values[static_cast<std::size_t>(grid.index(i, j))]; };
    const double hx = grid.dx(), hy = grid.dy();
    std::vector<Sym2> raw(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
    for (int c = 0; c < n; ++c) {
        const int ix = grid.ix_of(c), iy = grid.iy_of(c);
        // shifted second-difference stencils at the boundary
        const int i0 = std::clamp(ix, 1, grid.nx - 2);
        const int j0 = std::clamp(iy, 1, grid.ny - 2);
        const double vxx = (V(i0 + 1, iy) - 2.0 * V(i0, iy) + V(i0 - 1, iy)) / (hx * hx);
        const double vyy = (V(ix, j0 + 1) - 2.0 * V(ix, j0) + V(ix, j0 - 1)) / (hy * hy);
        const double vxy = (V(i0 + 1, j0 + 1) - V(i0 + 1, j0 - 1) - V(i0 - 1, j0 + 1) + V(i0 - 1, j0 - 1)) /
                           (4.0 * hx * hy);
        raw[static_cast<std::size_t>(c)] = {vxx, vxy, vyy};
    }
    return finalize_metric(grid, std::move(raw), floor_scale);
}

namespace {
struct InterpCell {
    int i0, j0;
    double fx, fy;  // in [0,1]
    bool clamped_x, clamped_y;
};

InterpCell locate(const ParamGrid& g, Point2 p) {
    InterpCell c;
    double ux = (p.x - g.t1_min) / g.dx() - 0.5;
    double uy = (p.y - g.t2_min) / g.dy() - 0.5;
    c.clamped_x = ux <= 0.0 || ux >= g.nx - 1;
    c.clamped_y = uy <= 0.0 || uy >= g.ny - 1;
    ux = std::clamp(ux, 0.0, static_cast<double>(g.nx - 1));
    uy = std::clamp(uy, 0.0, static_cast<double>(g.ny - 1));
    c.i0 = std::min(static_cast<int>(ux), g.nx - 2);
    c.j0 = std::min(static_cast<int>(uy), g.ny - 2);
    c.fx = ux - c.i0;
    c.fy = uy - c.j0;
    return c;
}
}  // namespace

Sym2 metric_at(const MetricField& field, Point2 p) {
    const ParamGrid& g = field.grid;
    if (!g.contains(p)) {
        std::ostringstream ss;
        ss << "metric_at: point (" << p.x << ", " << p.y << ") outside grid bounds";
        throw std::domain_error(ss.str());
    }
    const InterpCell c = locate(g, p);
    auto T = [&](int i, int j) -> const Sym2& { return field.tensors[static_cast<std::size_t>(g.index(i, j))]; };
    const Sym2& t00 = T(c.i0, c.j0);
    const Sym2& t10 = T(c.i0 + 1, c.j0);
    const Sym2& t01 = T(c.i0, c.j0 + 1);
    const Sym2& t11 = T(c.i0 + 1, c.j0 + 1);
    const double w00 = (1.0 - c.fx) * (1.0 - c.fy);
    const double w10 = c.fx * (1.0 - c.fy);
    const double w01 = (1.0 - c.fx) * c.fy;
    const double w11 = c.fx * c.fy;
    Sym2 out{w00 * t00.a11 + w10 * t10.a11 + w01 * t01.a11 + w11 * t11.a11,
             w00 * t00.a12 + w10 * t10.a12 + w01 * t01.a12 + w11 * t11.a12,
             w00 * t00.a22 + w10 * t10.a22 + w01 * t01.a22 + w11 * t11.a22};
    return clamp_eigenvalues(out, field.floor_eps);
}

void metric_at_with_grad(const MetricField& field, Point2 p, Sym2& out, Sym2& dg_dx, Sym2& dg_dy) {
    const ParamGrid& g = field.grid;
    const InterpCell c = locate(g, p);
    auto T = [&](int i, int j) -> const Sym2& { return field.tensors[static_cast<std::size_t>(g.index(i, j))]; };
    const Sym2& t00 = T(c.i0, c.j0);
    const Sym2& t10 = T(c.i0 + 1, c.j0);
    const Sym2& t01 = T(c.i0, c.j0 + 1);
    const Sym2& t11 = T(c.i0 + 1, c.j0 + 1);
    const double w00 = (1.0 - c.fx) * (1.0 - c.fy);
    const double w10 = c.fx * (1.0 - c.fy);
    const double w01 = (1.0 - c.fx) * c.fy;
    const double w11 = c.fx * c.fy;
    out = {w00 * t00.a11 + w10 * t10.a11 + w01 * t01.a11 + w11 * t11.a11,
           w00 * t00.a12 + w10 * t10.a12 + w01 * t01.a12 + w11 * t11.a12,
           w00 * t00.a22 + w10 * t10.a22 + w01 * t01.a22 + w11 * t11.a22};
    // d/dx of the bilinear weights; zero in the clamped flat extension
    const double sx = c.clamped_x ? 0.0 : 1.0 / g.dx();
    const double sy = c.clamped_y ? 0.0 : 1.0 / g.dy();
    dg_dx = {sx * ((t10.a11 - t00.a11) * (1.0 - c.fy) + (t11.a11 - t01.a11) * c.fy),
             sx * ((t10.a12 - t00.a12) * (1.0 - c.fy) + (t11.a12 - t01.a12) * c.fy),
             sx * ((t10.a22 - t00.a22) * (1.0 - c.fy) + (t11.a22 - t01.a22) * c.fy)};
    dg_dy = {sy * ((t01.a11 - t00.a11) * (1.0 - c.fx) + (t11.a11 - t10.a11) * c.fx),
             sy * ((t01.a12 - t00.a12) * (1.0 - c.fx) + (t11.a12 - t10.a12) * c.fx),
             sy * ((t01.a22 - t00.a22) * (1.0 - c.fx) + (t11.a22 - t10.a22) * c.fx)};
}

double path_length(const std::vector<Point2>& path, const MetricField& field) {
    double len = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
        const Point2 d = path[k] - path[k - 1];
        const Point2 mid = 0.5 * (path[k] + path[k - 1]);
        const Sym2 g = metric_at(field, mid);
        len += std::sqrt(std::max(0.0, g.quad(d)));
    }
    return len;
}

GeodesicPath geodesic(const MetricField& field, Point2 a, Point2 b, int n_points,
                      const GeodesicConfig& cfg) {
    const ParamGrid& g = field.grid;
    if (!g.contains(a) || !g.contains(b))
        throw std::domain_error("geodesic: endpoints must lie inside the grid bounds");
    if (n_points < 3) throw std::invalid_argument("geodesic: need at least 3 points");

    GeodesicPath result;
    auto& pts = result.points;
    pts.resize(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k) {
        const double s = static_cast<double>(k) / (n_points - 1);
        pts[static_cast<std::size_t>(k)] = {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
    }
    pts.front() = a;
    pts.back() = b;

    const int nfree = n_points - 2;
    std::vector<double> grad(static_cast<std::size_t>(nfree) * 2, 0.0);
    std::vector<double> m(grad.size(), 0.0), v(grad.size(), 0.0);
    const double lr = cfg.lr > 0.0
                          ? cfg.lr
                          : 0.002 * std::min(g.t1_max - g.t1_min, g.t2_max - g.t2_min);

    std::vector<Point2> best = pts;
    double best_len = path_length(pts, field);

    double energy = 0.0;
    for (long long it = 0; it < cfg.iterations; ++it) {
        // energy and its gradient w.r.t. interior points
        std::fill(grad.begin(), grad.end(), 0.0);
        energy = 0.0;
        for (int k = 1; k < n_points; ++k) {
            const Point2 d = pts[static_cast<std::size_t>(k)] - pts[static_cast<std::size_t>(k) - 1];
            const Point2 mid = 0.5 * (pts[static_cast<std::size_t>(k)] + pts[static_cast<std::size_t>(k) - 1]);
            Sym2 gm, dgx, dgy;
            metric_at_with_grad(field, mid, gm, dgx, dgy);
            energy += gm.quad(d);
            const double gx = 2.0 * (gm.a11 * d.x + gm.a12 * d.y);
            const double gy = 2.0 * (gm.a12 * d.x + gm.a22 * d.y);
            const double qx = 0.5 * dgx.quad(d);
            const double qy = 0.5 * dgy.quad(d);
            // left endpoint of segment k is point k-1, right endpoint is k
            if (k - 1 >= 1) {
                grad[static_cast<std::size_t>(k - 2) * 2 + 0] += -gx + qx;
                grad[static_cast<std::size_t>(k - 2) * 2 + 1] += -gy + qy;
            }
            if (k <= nfree) {
                grad[static_cast<std::size_t>(k - 1) * 2 + 0] += gx + qx;
                grad[static_cast<std::size_t>(k - 1) * 2 + 1] += gy + qy;
            }
        }
        result.energy_history.push_back(energy);

        double gnorm2 = 0.0;
        for (double x : grad) gnorm2 += x * x;
        if (gnorm2 <= cfg.grad_tol * cfg.grad_tol) {
            result.converged = true;
            break;
        }

        // Adam step on interior points, then project back into bounds
        const long long t = it + 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < grad.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            const double step = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
            double* coord = (i % 2 == 0) ? &pts[i / 2 + 1].x : &pts[i / 2 + 1].y;
            *coord -= step;
        }
        for (int k = 1; k <= nfree; ++k) {
            pts[static_cast<std::size_t>(k)].x = std::clamp(pts[static_cast<std::size_t>(k)].x, g.t1_min, g.t1_max);
            pts[static_cast<std::size_t>(k)].y = std::clamp(pts[static_cast<std::size_t>(k)].y, g.t2_min, g.t2_max);
        }

        const double len = path_length(pts, field);
        if (len < best_len) {
            best_len = len;
            best = pts;
        }
    }
    if (result.energy_history.size() >= 2 && !result.converged) {
        // treat a flat energy tail as converged
        const double e0 = result.energy_history[result.energy_history.size() / 2];
        const double e1 = result.energy_history.back();
        result.converged = std::fabs(e0 - e1) <= 1e-9 * std::max(1.0, std::fabs(e1));
    }
    result.points = best;
    result.length = best_len;
    return result;
}

double path_curvature(const std::vector<Point2>& path) {
    if (path.size() < 3) throw std::invalid_argument("path_curvature: need at least 3 points");
    double acc = 0.0;
    int count = 0;
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        const Point2 v1 = path[i] - path[i - 1];
        const Point2 v2 = path[i + 1] - path[i];
        const double n1 = std::sqrt(dot(v1, v1));
        const double n2 = std::sqrt(dot(v2, v2));
        if (n1 == 0.0 || n2 == 0.0)
            throw std::invalid_argument("path_curvature: duplicate consecutive points");
        const double cross = v1.x * v2.y - v1.y * v2.x;
        const double angle = std::atan2(std::fabs(cross), dot(v1, v2));
        acc += angle / (0.5 * (n1 + n2));
        ++count;
    }
    return acc / count;
}

PhaseMap phase_map(const MetricField& field, double quantile) {
    const ParamGrid& g = field.grid;
    const int n = g.cells();
    PhaseMap map;
    map.roughness = ScalarField(g, "metric_roughness");
    auto T = [&](int i, int j) -> const Sym2& { return field.tensors[static_cast<std::size_t>(g.index(i, j))]; };
    for (int c = 0; c < n; ++c) {
        const int ix = g.ix_of(c), iy = g.iy_of(c);
        const int ixp = std::min(ix + 1, g.nx - 1), ixm = std::max(ix - 1, 0);
        const int iyp = std::min(iy + 1, g.ny - 1), iym = std::max(iy - 1, 0);
        const double wx = (ixp - ixm) * g.dx();
        const double wy = (iyp - iym) * g.dy();
        double acc = 0.0;
        const Sym2 &xp = T(ixp, iy), &xm = T(ixm, iy), &yp = T(ix, iyp), &ym = T(ix, iym);
        const double comps_x[3] = {(xp.a11 - xm.a11) / wx, (xp.a12 - xm.a12) / wx,
                                   (xp.a22 - xm.a22) / wx};
        const double comps_y[3] = {(yp.a11 - ym.a11) / wy, (yp.a12 - ym.a12) / wy,
                                   (yp.a22 - ym.a22) / wy};
        // off-diagonal counted twice (full 2x2x2 gradient tensor)
        const double mult[3] = {1.0, 2.0, 1.0};
        for (int k = 0; k < 3; ++k)
            acc += mult[k] * (comps_x[k] * comps_x[k] + comps_y[k] * comps_y[k]);
        map.roughness.values[static_cast<std::size_t>(c)] = std::sqrt(acc);
    }
    std::vector<double> sorted = map.roughness.values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t idx = static_cast<std::size_t>(quantile * (sorted.size() - 1));
    map.threshold = sorted[idx];
    map.flags.assign(static_cast<std::size_t>(n), 0);
    for (int c = 0; c < n; ++c)
        if (map.roughness.values[static_cast<std::size_t>(c)] > map.threshold)
            map.flags[static_cast<std::size_t>(c)] = 1;
    return map;
}

void write_metric_csv(const MetricField& field, const std::string& path) {
    std::ostringstream out;
    out << "i,j,g11,g12,g22\n";
    for (int iy = 0; iy < field.grid.ny; ++iy)
        for (int ix = 0; ix < field.grid.nx; ++ix) {
            const Sym2& t = field.tensors[static_cast<std::size_t>(field.grid.index(ix, iy))];
            out << ix << ',' << iy << ',' << format_double(t.a11) << ',' << format_double(t.a12)
                << ',' << format_double(t.a22) << '\n';
        }
    write_text_file(path, out.str());
}

MetricField read_metric_csv(const std::string& path, const ParamGrid& grid) {
    const CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"i", "j", "g11", "g12", "g22"})
        throw std::runtime_error(path + ": expected header i,j,g11,g12,g22");
    if (t.rows.size() != static_cast<std::size_t>(grid.cells()))
        throw std::runtime_error(path + ": wrong number of cells");
    MetricField f;
    f.grid = grid;
    f.tensors.assign(static_cast<std::size_t>(grid.cells()), Sym2{});
    double min_eig = 1e300;
    for (const auto& r : t.rows) {
        const int ix = static_cast<int>(r[0]);
        const int iy = static_cast<int>(r[1]);
        if (ix < 0 || ix >= grid.nx || iy < 0 || iy >= grid.ny)
            throw std::runtime_error(path + ": cell index out of range");
        const Sym2 g{r[2], r[3], r[4]};
        double lo, hi;
        g.eigenvalues(lo, hi);
        min_eig = std::min(min_eig, lo);
        f.tensors[static_cast<std::size_t>(grid.index(ix, iy))] = g;
    }
    f.floor_eps = std::max(min_eig, 1e-12);
    return f;
}

void write_path_csv(const std::vector<Point2>& path, const std::string& file) {
    std::ostringstream out;
    out << "k,t1,t2\n";
    for (std::size_t k = 0; k < path.size(); ++k)
        out << k << ',' << format_double(path[k].x) << ',' << format_double(path[k].y) << '\n';
    write_text_file(file, out.str());
}

std::vector<Point2> read_path_csv(const std::string& file) {
    const CsvTable t = read_csv(file);
    if (t.header != std::vector<std::string>{"k", "t1", "t2"})
        throw std::runtime_error(file + ": expected header k,t1,t2");
    std::vector<Point2> path;
    path.reserve(t.rows.size());
    for (const auto& r : t.rows) path.push_back({r[1], r[2]});
    return path;
}

}  // namespace fisherlat
