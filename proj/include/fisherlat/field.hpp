#pragma once

#include <string>
#include <vector>

#include "fisherlat/grid.hpp"

namespace fisherlat {

// Scalar field sampled at cell centers; values indexed by flat cell id.
struct ScalarField {
    ParamGrid grid;
    std::vector<double> values;
    std::string label;

    ScalarField() = default;
    ScalarField(const ParamGrid& g, std::string lbl = "")
        : grid(g), values(static_cast<std::size_t>(g.cells()), 0.0), label(std::move(lbl)) {}
    ScalarField(const ParamGrid& g, std::vector<double> v, std::string lbl = "")
        : grid(g), values(std::move(v)), label(std::move(lbl)) {}

    double& at(int ix, int iy) { return values[static_cast<std::size_t>(grid.index(ix, iy))]; }
    double at(int ix, int iy) const { return values[static_cast<std::size_t>(grid.index(ix, iy))]; }
};

// Forward differences stored at the left/bottom cell of each pair; the last
// column (resp. row) of the output is unused and left at zero. This is the
// discrete-gradient convention matched exactly by integrate_derivative_field.
inline void forward_diff(const ScalarField& f, ScalarField& d1, ScalarField& d2) {
    const auto& g = f.grid;
    d1 = ScalarField(g, f.label + "_d1");
    d2 = ScalarField(g, f.label + "_d2");
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix + 1 < g.nx; ++ix)
            d1.at(ix, iy) = (f.at(ix + 1, iy) - f.at(ix, iy)) / g.dx();
    for (int iy = 0; iy + 1 < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            d2.at(ix, iy) = (f.at(ix, iy + 1) - f.at(ix, iy)) / g.dy();
}

// Central differences at interior cells, one-sided at the boundary.
void central_diff(const ScalarField& f, ScalarField& d1, ScalarField& d2);

}  // namespace fisherlat
