#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fisherlat/field.hpp"
#include "fisherlat/grid.hpp"

namespace fisherlat {

// All floats are serialized with 17 significant digits so that parsing them
// back reproduces the exact double.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a over file bytes; used for the artifact manifest.
std::uint64_t fnv1a_file(const std::string& path);
std::string hex64(std::uint64_t v);

// Minimal CSV support: numeric tables with a single header line.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::string& path);

void write_scalar_field_csv(const ScalarField& f, const std::string& path);
ScalarField read_scalar_field_csv(const std::string& path, const ParamGrid& grid);

// Grid sidecar: bounds, nx, ny and optional extras (written as JSON).
void write_grid_sidecar(const ParamGrid& grid, const std::string& path,
                        const std::vector<std::pair<std::string, double>>& extras = {});
ParamGrid read_grid_sidecar(const std::string& path, double* n_eff_out = nullptr);

void write_pgm(const std::vector<std::int8_t>& values01, int width, int height,
               const std::string& path);

// SVG heatmap of a scalar field with optional path overlays.
void write_svg_heatmap(const ScalarField& f, const std::string& path,
                       const std::vector<std::vector<Point2>>& overlays = {});

}  // namespace fisherlat
