#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>

namespace fisherlat {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }

// Cell-centered rectangular discretization of the parameter domain.
// Flat cell index c = iy * nx + ix (x fastest).
struct ParamGrid {
    double t1_min = 0.0, t1_max = 1.0;
    double t2_min = 0.0, t2_max = 1.0;
    int nx = 32, ny = 32;

    ParamGrid() = default;
    ParamGrid(double a1, double b1, double a2, double b2, int nx_, int ny_)
        : t1_min(a1), t1_max(b1), t2_min(a2), t2_max(b2), nx(nx_), ny(ny_) {
        if (!(t1_min < t1_max) || !(t2_min < t2_max))
            throw std::invalid_argument("ParamGrid: bounds must satisfy min < max");
        if (nx < 4 || ny < 4)
            throw std::invalid_argument("ParamGrid: nx, ny must be >= 4");
    }

    int cells() const { return nx * ny; }
    double dx() const { return (t1_max - t1_min) / nx; }
    double dy() const { return (t2_max - t2_min) / ny; }
    double cell_area() const { return dx() * dy(); }
    double volume() const { return (t1_max - t1_min) * (t2_max - t2_min); }

    int index(int ix, int iy) const { return iy * nx + ix; }
    int ix_of(int c) const { return c % nx; }
    int iy_of(int c) const { return c / nx; }

    Point2 center(int ix, int iy) const {
        return {t1_min + (ix + 0.5) * dx(), t2_min + (iy + 0.5) * dy()};
    }
    Point2 center_flat(int c) const { return center(ix_of(c), iy_of(c)); }

    bool contains(Point2 p) const {
        return p.x >= t1_min && p.x <= t1_max && p.y >= t2_min && p.y <= t2_max;
    }

    // nearest cell to an arbitrary in-bounds point
    int nearest(Point2 p) const {
        int ix = static_cast<int>((p.x - t1_min) / dx());
        int iy = static_cast<int>((p.y - t2_min) / dy());
        if (ix < 0) ix = 0;
        if (ix >= nx) ix = nx - 1;
        if (iy < 0) iy = 0;
        if (iy >= ny) iy = ny - 1;
        return index(ix, iy);
    }

    bool operator==(const ParamGrid& o) const {
        return t1_min == o.t1_min && t1_max == o.t1_max && t2_min == o.t2_min &&
               t2_max == o.t2_max && nx == o.nx && ny == o.ny;
    }
};

}  // namespace fisherlat
