#include "fisherlat/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fisherlat {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::uint64_t fnv1a_file(const std::string& path) {
    const std::string data = read_text_file(path);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.header.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        row.reserve(t.header.size());
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": not a number: '" + cell + "'");
            }
        }
        if (row.size() != t.header.size())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(t.header.size()) +
                                     " columns, got " + std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_scalar_field_csv(const ScalarField& f, const std::string& path) {
    std::ostringstream out;
    out << "i,j,value\n";
    for (int iy = 0; iy < f.grid.ny; ++iy)
        for (int ix = 0; ix < f.grid.nx; ++ix)
            out << ix << ',' << iy << ',' << format_double(f.at(ix, iy)) << '\n';
    write_text_file(path, out.str());
}

ScalarField read_scalar_field_csv(const std::string& path, const ParamGrid& grid) {
    const CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"i", "j", "value"})
        throw std::runtime_error(path + ": expected header i,j,value");
    ScalarField f(grid);
    if (t.rows.size() != static_cast<std::size_t>(grid.cells()))
        throw std::runtime_error(path + ": wrong number of cells");
    for (const auto& r : t.rows) {
        const int ix = static_cast<int>(r[0]);
        const int iy = static_cast<int>(r[1]);
        if (ix < 0 || ix >= grid.nx || iy < 0 || iy >= grid.ny)
            throw std::runtime_error(path + ": cell index out of range");
        f.at(ix, iy) = r[2];
    }
    return f;
}

void write_grid_sidecar(const ParamGrid& grid, const std::string& path,
                        const std::vector<std::pair<std::string, double>>& extras) {
    nlohmann::json j;
    j["t1_min"] = grid.t1_min;
    j["t1_max"] = grid.t1_max;
    j["t2_min"] = grid.t2_min;
    j["t2_max"] = grid.t2_max;
    j["nx"] = grid.nx;
    j["ny"] = grid.ny;
    for (const auto& [k, v] : extras) j[k] = v;
    write_text_file(path, j.dump(2) + "\n");
}

ParamGrid read_grid_sidecar(const std::string& path, double* n_eff_out) {
    const auto j = nlohmann::json::parse(read_text_file(path));
    ParamGrid g(j.at("t1_min").get<double>(), j.at("t1_max").get<double>(),
                j.at("t2_min").get<double>(), j.at("t2_max").get<double>(),
                j.at("nx").get<int>(), j.at("ny").get<int>());
    if (n_eff_out) *n_eff_out = j.value("n_eff", 0.0);
    return g;
}

void write_pgm(const std::vector<std::int8_t>& values01, int width, int height,
               const std::string& path) {
    std::ostringstream out;
    out << "P2\n" << width << ' ' << height << "\n255\n";
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            out << (values01[static_cast<std::size_t>(i) * width + j] > 0 ? 255 : 0);
            out << (j + 1 == width ? '\n' : ' ');
        }
    }
    write_text_file(path, out.str());
}

namespace {
// compact viridis-like ramp
void colormap(double u, int& r, int& g, int& b) {
    static const double stops[6][3] = {
        {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
        {0.164, 0.471, 0.558}, {0.478, 0.821, 0.318}, {0.993, 0.906, 0.144}};
    u = std::clamp(u, 0.0, 1.0) * 5.0;
    const int k = std::min(4, static_cast<int>(u));
    const double f = u - k;
    r = static_cast<int>(255.0 * (stops[k][0] + f * (stops[k + 1][0] - stops[k][0])));
    g = static_cast<int>(255.0 * (stops[k][1] + f * (stops[k + 1][1] - stops[k][1])));
    b = static_cast<int>(255.0 * (stops[k][2] + f * (stops[k + 1][2] - stops[k][2])));
}
}  // namespace

void write_svg_heatmap(const ScalarField& f, const std::string& path,
                       const std::vector<std::vector<Point2>>& overlays) {
    const auto& g = f.grid;
    const int cell_px = 12;
    const int w = g.nx * cell_px;
    const int h = g.ny * cell_px;
    double lo = f.values.empty() ? 0.0 : f.values[0];
    double hi = lo;
    for (double v : f.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? hi - lo : 1.0;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    out << "<!-- field: " << f.label << " range [" << format_double(lo) << ", "
        << format_double(hi) << "] -->\n";
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            int r, gg, b;
            colormap((f.at(ix, iy) - lo) / span, r, gg, b);
            // SVG y axis points down; flip so t2 grows upward
            out << "<rect x=\"" << ix * cell_px << "\" y=\"" << (g.ny - 1 - iy) * cell_px
                << "\" width=\"" << cell_px << "\" height=\"" << cell_px << "\" fill=\"rgb(" << r
                << ',' << gg << ',' << b << ")\"/>\n";
        }
    }
    for (const auto& pts : overlays) {
        out << "<polyline fill=\"none\" stroke=\"white\" stroke-width=\"2\" points=\"";
        for (const auto& p : pts) {
            const double px = (p.x - g.t1_min) / (g.t1_max - g.t1_min) * w;
            const double py = h - (p.y - g.t2_min) / (g.t2_max - g.t2_min) * h;
            out << px << ',' << py << ' ';
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

}  // namespace fisherlat
