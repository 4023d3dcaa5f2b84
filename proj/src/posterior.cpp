#include "fisherlat/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fisherlat/io.hpp"
#include "fisherlat/parallel.hpp"

namespace fisherlat {

System system_from_string(const std::string& s) {
    if (s == "ising") return System::ising;
    if (s == "tasep") return System::tasep;
    if (s == "oracle") return System::oracle;
    if (s == "external") return System::external;
    throw std::invalid_argument("unknown system: " + s);
}

std::string to_string(System s) {
    switch (s) {
        case System::ising: return "ising";
        case System::tasep: return "tasep";
        case System::oracle: return "oracle";
        case System::external: return "external";
    }
    return "?";
}

Weighting weighting_from_string(const std::string& s) {
    if (s == "uniform") return Weighting::uniform;
    if (s == "inverse-variance") return Weighting::inverse_variance;
    throw std::invalid_argument("unknown weighting: " + s);
}

int SamplerSpec::feature_dim() const {
    switch (system) {
        case System::ising: return 2;
        case System::tasep: return tasep_bins + 2;
        case System::oracle: return 2;
        case System::external: break;
    }
    throw std::invalid_argument("sample_features: external system has no sampler");
}

std::vector<double> sample_features(const SamplerSpec& spec, Point2 t, std::uint64_t seed) {
    SamplerParams p;
    p.t1 = t.x;
    p.t2 = t.y;
    p.seed = seed;
    switch (spec.system) {
        case System::ising: {
            p.sweeps = spec.ising_sweeps;
            const IsingState st = ising_sample(p, spec.ising_side);
            const IsingStats s = ising_stats(st);
            return {s.e, s.m};
        }
        case System::tasep: {
            const TasepState st = tasep_sample(p, spec.tasep_sites, spec.tasep_attempts);
            return tasep_stats(st, spec.tasep_bins);
        }
        case System::oracle: {
            const auto spins = oracle_sample(p, spec.oracle_spins);
            double f1, f2;
            oracle_suff_stat(spins, f1, f2);
            const double half = 0.5 * spec.oracle_spins;
            return {f1 / half, f2 / half};  // block mean magnetizations
        }
        case System::external: break;
    }
    throw std::invalid_argument("sample_features: external system has no sampler");
}

int FeatureTable::min_count() const {
    int m = counts.empty() ? 0 : counts[0];
    for (int c : counts) m = std::min(m, c);
    return m;
}

namespace {
constexpr std::uint64_t kSampleStageTag = 0x5341u;  // "SA"

void finalize_moments(FeatureTable& t) {
    const int n = t.grid.cells();
    t.means.assign(static_cast<std::size_t>(n) * t.dim, 0.0);
    t.variances.assign(static_cast<std::size_t>(n) * t.dim, 0.0);
    std::vector<std::size_t> offset(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t r = 0; r < t.row_cell.size(); ++r)
        offset[static_cast<std::size_t>(t.row_cell[r]) + 1]++;
    for (int c = 0; c < n; ++c) offset[static_cast<std::size_t>(c) + 1] += offset[static_cast<std::size_t>(c)];
    // rows are stored grouped by cell, so offsets give each cell's slice
    for (int c = 0; c < n; ++c) {
        const std::size_t lo = offset[static_cast<std::size_t>(c)];
        const std::size_t hi = offset[static_cast<std::size_t>(c) + 1];
        const double cnt = static_cast<double>(hi - lo);
        double* mu = &t.means[static_cast<std::size_t>(c) * t.dim];
        for (std::size_t r = lo; r < hi; ++r)
            for (int k = 0; k < t.dim; ++k) mu[k] += t.rows[r * t.dim + k];
        for (int k = 0; k < t.dim; ++k) mu[k] /= cnt;
        if (hi - lo >= 2) {
            double* var = &t.variances[static_cast<std::size_t>(c) * t.dim];
            for (std::size_t r = lo; r < hi; ++r)
                for (int k = 0; k < t.dim; ++k) {
                    const double d = t.rows[r * t.dim + k] - mu[k];
                    var[k] += d * d;
                }
            for (int k = 0; k < t.dim; ++k) var[k] /= (cnt - 1.0);
        }
    }
}
}  // namespace

FeatureTable build_feature_table(const ParamGrid& grid, const SamplerSpec& spec, int replicas,
                                 std::uint64_t seed) {
    if (replicas < 2) throw std::invalid_argument("build_feature_table: replicas must be >= 2");
    FeatureTable t;
    t.grid = grid;
    t.dim = spec.feature_dim();
    const int n = grid.cells();
    t.counts.assign(static_cast<std::size_t>(n), replicas);
    t.rows.assign(static_cast<std::size_t>(n) * replicas * t.dim, 0.0);
    t.row_cell.resize(static_cast<std::size_t>(n) * replicas);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < replicas; ++r)
            t.row_cell[static_cast<std::size_t>(c) * replicas + r] = c;

    std::string failure;
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n; ++c) {
        const Point2 tc = grid.center_flat(c);
        for (int r = 0; r < replicas; ++r) {
            try {
                const std::uint64_t s = derive_seed(
                    seed, {kSampleStageTag, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r)});
                const auto f = sample_features(spec, tc, s);
                std::copy(f.begin(), f.end(),
                          t.rows.begin() + (static_cast<std::size_t>(c) * replicas + r) * t.dim);
            } catch (const std::exception& e) {
#pragma omp critical
                if (failure.empty()) {
                    std::ostringstream ss;
                    ss << "build_feature_table: sampler failed at cell " << c << " (t1=" << tc.x
                       << ", t2=" << tc.y << "): " << e.what();
                    failure = ss.str();
                }
            }
        }
    }
    if (!failure.empty()) throw std::runtime_error(failure);
    finalize_moments(t);
    return t;
}

double PosteriorField::max_row_normalization_error() const {
    const int n = grid.cells();
    const double area = grid.cell_area();
    double worst = 0.0;
    for (int c = 0; c < n; ++c) {
        double s = 0.0;
        const double* r = row(c);
        for (int j = 0; j < n; ++j) s += r[j];
        worst = std::max(worst, std::fabs(s * area - 1.0));
    }
    return worst;
}

namespace {

// normalize a row of exponents (log densities up to a constant) in place
void normalize_row_from_exponents(double* a, int n, double area) {
    double amax = a[0];
    for (int j = 1; j < n; ++j) amax = std::max(amax, a[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        a[j] = std::exp(a[j] - amax);
        sum += a[j];
    }
    const double inv = 1.0 / (sum * area);
    for (int j = 0; j < n; ++j) a[j] *= inv;
}

std::vector<double> feature_weights(const FeatureTable& table, Weighting weighting,
                                    std::string* warning) {
    std::vector<double> w(static_cast<std::size_t>(table.dim), 1.0);
    if (weighting == Weighting::uniform) return w;
    const int n = table.grid.cells();
    // pooled within-cell variance per feature
    std::vector<double> pooled(static_cast<std::size_t>(table.dim), 0.0);
    for (int c = 0; c < n; ++c)
        for (int k = 0; k < table.dim; ++k) pooled[static_cast<std::size_t>(k)] += table.variance(c)[k];
    for (auto& v : pooled) v /= n;

    std::vector<double> positive;
    for (double v : pooled)
        if (v > 0.0) positive.push_back(1.0 / v);
    bool clamped = false;
    if (positive.empty()) {
        // all features degenerate; fall back to uniform
        if (warning) *warning = "inverse-variance weighting: all feature variances are zero, using uniform weights";
        return w;
    }
    std::nth_element(positive.begin(), positive.begin() + positive.size() / 2, positive.end());
    const double cap = 1e6 * positive[positive.size() / 2];
    for (int k = 0; k < table.dim; ++k) {
        const double v = pooled[static_cast<std::size_t>(k)];
        double wk = (v > 0.0) ? 1.0 / v : cap;
        if (v <= 0.0 || wk > cap) {
            wk = std::min(wk, cap);
            clamped = true;
        }
        w[static_cast<std::size_t>(k)] = wk;
    }
    if (clamped && warning)
        *warning = "inverse-variance weighting: zero/near-zero variance feature weight clamped";
    return w;
}

// squared weighted feature distances, cells x cells (symmetric)
std::vector<double> feature_dist2(const FeatureTable& table, const std::vector<double>& w) {
    const int n = table.grid.cells();
    std::vector<double> d2(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* mi = table.mean(i);
        for (int j = 0; j < n; ++j) {
            const double* mj = table.mean(j);
            double s = 0.0;
            for (int k = 0; k < table.dim; ++k) {
                const double d = mi[k] - mj[k];
                s += w[static_cast<std::size_t>(k)] * d * d;
            }
            d2[static_cast<std::size_t>(i) * n + j] = s;
        }
    }
    return d2;
}

int min_row_support(const std::vector<double>& d2, int n, double n_eff) {
    // cells with exponent within ln(100) of the row max
    const double window = std::log(100.0);
    int worst = n;
#pragma omp parallel for schedule(static) reduction(min : worst)
    for (int i = 0; i < n; ++i) {
        const double* row = &d2[static_cast<std::size_t>(i) * n];
        double dmin = row[0];
        for (int j = 1; j < n; ++j) dmin = std::min(dmin, row[j]);
        int cnt = 0;
        for (int j = 0; j < n; ++j)
            if (0.5 * n_eff * (row[j] - dmin) <= window) ++cnt;
        worst = std::min(worst, cnt);
    }
    return worst;
}

}  // namespace

double auto_n_eff(const FeatureTable& table, Weighting weighting, int min_support) {
    std::string ignore;
    const auto w = feature_weights(table, weighting, &ignore);
    const auto d2 = feature_dist2(table, w);
    const int n = table.grid.cells();
    double lo = 1e-6, hi = 1e12;
    if (min_row_support(d2, n, hi) >= min_support) return hi;
    if (min_row_support(d2, n, lo) < min_support) return lo;
    for (int it = 0; it < 80; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (min_row_support(d2, n, mid) >= min_support)
            lo = mid;
        else
            hi = mid;
    }
    // the bisection limit sits exactly on the support transition; back off a
    // little so the marginal cell stays robustly above the 1% threshold
    return 0.995 * lo;
}

PosteriorField posterior_from_features(const FeatureTable& table, double n_eff,
                                       Weighting weighting, std::string* warning) {
    if (n_eff <= 0.0) n_eff = auto_n_eff(table, weighting);
    const auto w = feature_weights(table, weighting, warning);
    const auto d2 = feature_dist2(table, w);
    const int n = table.grid.cells();

    PosteriorField field;
    field.grid = table.grid;
    field.n_eff = n_eff;
    field.rows.assign(static_cast<std::size_t>(n) * n, 0.0);
    const double area = table.grid.cell_area();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* row = field.row(i);
        const double* d = &d2[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) row[j] = -0.5 * n_eff * d[j];
        normalize_row_from_exponents(row, n, area);
    }
    return field;
}

std::vector<double> oracle_posterior_log_row(const ParamGrid& grid, int n_spins, double f1_sum,
                                             double f2_sum, long long n_samples) {
    const int n = grid.cells();
    std::vector<double> row(static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        const Point2 t = grid.center_flat(c);
        row[static_cast<std::size_t>(c)] =
            t.x * f1_sum + t.y * f2_sum -
            static_cast<double>(n_samples) * oracle_logz(t.x, t.y, n_spins);
    }
    return row;
}

std::vector<double> oracle_posterior_row(const ParamGrid& grid, int n_spins, double f1_sum,
                                         double f2_sum, long long n_samples) {
    auto row = oracle_posterior_log_row(grid, n_spins, f1_sum, f2_sum, n_samples);
    normalize_row_from_exponents(row.data(), grid.cells(), grid.cell_area());
    return row;
}

PosteriorField oracle_posterior(const ParamGrid& grid, int n_spins, long long n_samples,
                                std::uint64_t seed) {
    const int n = grid.cells();
    PosteriorField field;
    field.grid = grid;
    field.n_eff = static_cast<double>(n_samples);
    field.rows.assign(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < n; ++c) {
        const Point2 t = grid.center_flat(c);
        double f1 = 0.0, f2 = 0.0;
        for (long long s = 0; s < n_samples; ++s) {
            SamplerParams p;
            p.t1 = t.x;
            p.t2 = t.y;
            p.seed = derive_seed(seed, {0x4f52u, static_cast<std::uint64_t>(c),
                                        static_cast<std::uint64_t>(s)});
            const auto spins = oracle_sample(p, n_spins);
            double a, b;
            oracle_suff_stat(spins, a, b);
            f1 += a;
            f2 += b;
        }
        const auto row = oracle_posterior_row(grid, n_spins, f1, f2, n_samples);
        std::copy(row.begin(), row.end(), field.row(c));
    }
    return field;
}

PosteriorField oracle_exact_posterior(const ParamGrid& grid, int n_spins, long long n_samples) {
    const int n = grid.cells();
    PosteriorField field;
    field.grid = grid;
    field.n_eff = static_cast<double>(n_samples);
    field.rows.assign(static_cast<std::size_t>(n) * n, 0.0);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < n; ++c) {
        const Point2 t = grid.center_flat(c);
        double g1, g2;
        oracle_logz_grad(t.x, t.y, n_spins, g1, g2);
        const double ns = static_cast<double>(n_samples);
        const auto row = oracle_posterior_row(grid, n_spins, ns * g1, ns * g2, n_samples);
        std::copy(row.begin(), row.end(), field.row(c));
    }
    return field;
}

PosteriorField smoothed_target(const ParamGrid& grid, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("smoothed_target: sigma must be positive");
    const int n = grid.cells();
    PosteriorField field;
    field.grid = grid;
    field.n_eff = 1.0 / (sigma * sigma);
    field.rows.assign(static_cast<std::size_t>(n) * n, 0.0);
    const double inv = -0.5 / (sigma * sigma);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const Point2 ti = grid.center_flat(i);
        double* row = field.row(i);
        for (int j = 0; j < n; ++j) {
            const Point2 tj = grid.center_flat(j);
            const Point2 d = tj - ti;
            row[j] = inv * dot(d, d);
        }
        normalize_row_from_exponents(row, n, grid.cell_area());
    }
    return field;
}

void dump_features(const FeatureTable& table, const std::string& path) {
    std::ostringstream out;
    out << "t1,t2";
    for (int k = 0; k < table.dim; ++k) out << ",f" << k;
    out << '\n';
    for (std::size_t r = 0; r < table.row_cell.size(); ++r) {
        const Point2 t = table.grid.center_flat(table.row_cell[r]);
        out << format_double(t.x) << ',' << format_double(t.y);
        for (int k = 0; k < table.dim; ++k)
            out << ',' << format_double(table.rows[r * table.dim + k]);
        out << '\n';
    }
    write_text_file(path, out.str());
}

FeatureTable ingest_features(const std::string& path, const ParamGrid& grid,
                             std::string* warning) {
    const CsvTable csv = read_csv(path);
    if (csv.header.size() < 3 || csv.header[0] != "t1" || csv.header[1] != "t2")
        throw std::runtime_error(path + ": expected header t1,t2,f0,...");
    for (std::size_t k = 2; k < csv.header.size(); ++k)
        if (csv.header[k] != "f" + std::to_string(k - 2))
            throw std::runtime_error(path + ": malformed feature column '" + csv.header[k] + "'");

    FeatureTable t;
    t.grid = grid;
    t.dim = static_cast<int>(csv.header.size()) - 2;
    const int n = grid.cells();
    t.counts.assign(static_cast<std::size_t>(n), 0);

    // group rows by nearest cell center
    std::vector<std::vector<std::size_t>> per_cell(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        for (double v : row)
            if (!std::isfinite(v))
                throw std::runtime_error(path + ": non-finite value in row " + std::to_string(r + 2));
        const Point2 p{row[0], row[1]};
        per_cell[static_cast<std::size_t>(grid.nearest(p))].push_back(r);
    }
    std::vector<int> missing;
    for (int c = 0; c < n; ++c)
        if (per_cell[static_cast<std::size_t>(c)].empty()) missing.push_back(c);
    if (!missing.empty()) {
        std::ostringstream ss;
        ss << path << ": " << missing.size() << " grid cells have no feature rows; first missing:";
        for (std::size_t i = 0; i < missing.size() && i < 8; ++i) {
            const Point2 p = grid.center_flat(missing[i]);
            ss << " (" << p.x << "," << p.y << ")";
        }
        throw std::runtime_error(ss.str());
    }

    t.rows.reserve(csv.rows.size() * static_cast<std::size_t>(t.dim));
    t.row_cell.reserve(csv.rows.size());
    bool single = false;
    for (int c = 0; c < n; ++c) {
        t.counts[static_cast<std::size_t>(c)] = static_cast<int>(per_cell[static_cast<std::size_t>(c)].size());
        if (t.counts[static_cast<std::size_t>(c)] == 1) single = true;
        for (std::size_t r : per_cell[static_cast<std::size_t>(c)]) {
            t.row_cell.push_back(c);
            for (int k = 0; k < t.dim; ++k) t.rows.push_back(csv.rows[r][static_cast<std::size_t>(k) + 2]);
        }
    }
    if (single && warning)
        *warning = "ingest_features: some cells have a single replica; their variances are zero";
    finalize_moments(t);
    return t;
}

void dump_posterior(const PosteriorField& field, const std::string& csv_path,
                    const std::string& sidecar_path) {
    std::ostringstream out;
    out << "row_index,col_index,density\n";
    const int n = field.grid.cells();
    for (int i = 0; i < n; ++i) {
        const double* r = field.row(i);
        for (int j = 0; j < n; ++j)
            out << i << ',' << j << ',' << format_double(r[j]) << '\n';
    }
    write_text_file(csv_path, out.str());
    write_grid_sidecar(field.grid, sidecar_path, {{"n_eff", field.n_eff}});
}

PosteriorField read_posterior(const std::string& csv_path, const std::string& sidecar_path) {
    double n_eff = 0.0;
    const ParamGrid grid = read_grid_sidecar(sidecar_path, &n_eff);
    const CsvTable csv = read_csv(csv_path);
    if (csv.header != std::vector<std::string>{"row_index", "col_index", "density"})
        throw std::runtime_error(csv_path + ": expected header row_index,col_index,density");
    const int n = grid.cells();
    PosteriorField field;
    field.grid = grid;
    field.n_eff = n_eff;
    field.rows.assign(static_cast<std::size_t>(n) * n, -1.0);
    if (csv.rows.size() != static_cast<std::size_t>(n) * n)
        throw std::runtime_error(csv_path + ": wrong number of entries");
    for (const auto& r : csv.rows) {
        const int i = static_cast<int>(r[0]);
        const int j = static_cast<int>(r[1]);
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw std::runtime_error(csv_path + ": index out of range");
        field.rows[static_cast<std::size_t>(i) * n + j] = r[2];
    }
    for (double v : field.rows)
        if (v < 0.0) throw std::runtime_error(csv_path + ": missing or negative density entry");
    return field;
}

}  // namespace fisherlat
