#include "fisherlat/field.hpp"

namespace fisherlat {

void central_diff(const ScalarField& f, ScalarField& d1, ScalarField& d2) {
    const auto& g = f.grid;
    d1 = ScalarField(g, f.label + "_d1");
    d2 = ScalarField(g, f.label + "_d2");
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            if (ix == 0)
                d1.at(ix, iy) = (f.at(1, iy) - f.at(0, iy)) / g.dx();
            else if (ix == g.nx - 1)
                d1.at(ix, iy) = (f.at(ix, iy) - f.at(ix - 1, iy)) / g.dx();
            else
                d1.at(ix, iy) = (f.at(ix + 1, iy) - f.at(ix - 1, iy)) / (2.0 * g.dx());
            if (iy == 0)
                d2.at(ix, iy) = (f.at(ix, 1) - f.at(ix, 0)) / g.dy();
            else if (iy == g.ny - 1)
                d2.at(ix, iy) = (f.at(ix, iy) - f.at(ix, iy - 1)) / g.dy();
            else
                d2.at(ix, iy) = (f.at(ix, iy + 1) - f.at(ix, iy - 1)) / (2.0 * g.dy());
        }
    }
}

}  // namespace fisherlat
