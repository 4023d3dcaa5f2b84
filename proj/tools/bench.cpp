// Benchmark: OpenMP kernels against their serial reference implementations.
// Run with a thread count to compare, e.g. FISHERLAT_THREADS=8 ./fisherlat_bench

#include <cstdio>
#include <cstdlib>

#include "fisherlat/parallel.hpp"
#include "fisherlat/posterior.hpp"
#include "fisherlat/potential.hpp"
#include "fisherlat/serial_ref.hpp"

using namespace fisherlat;

namespace {

template <typename F>
double timeit(F&& f, int reps = 3) {
    const double t0 = now_seconds();
    for (int i = 0; i < reps; ++i) f();
    return (now_seconds() - t0) / reps;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", name, serial * 1e3,
                parallel * 1e3, serial / parallel);
}

}  // namespace

int main() {
    const char* env = std::getenv("FISHERLAT_THREADS");
    if (env) set_threads(std::atoi(env));
    std::printf("threads: %d\n", max_threads());

    // Ising feature table, small grid
    {
        ParamGrid grid(1.0, 5.0, -2.0, 2.0, 8, 8);
        SamplerSpec spec;
        spec.system = System::ising;
        spec.ising_side = 16;
        spec.ising_sweeps = 100;
        const double ts = timeit([&] { (void)ref::build_feature_table(grid, spec, 8, 1); }, 1);
        const double tp = timeit([&] { (void)build_feature_table(grid, spec, 8, 1); }, 1);
        report("ising feature table", ts, tp);
    }
    // TASEP feature table
    {
        ParamGrid grid(0.0, 1.0, 0.0, 1.0, 8, 8);
        SamplerSpec spec;
        spec.system = System::tasep;
        spec.tasep_sites = 128;
        spec.tasep_bins = 8;
        const double ts = timeit([&] { (void)ref::build_feature_table(grid, spec, 4, 1); }, 1);
        const double tp = timeit([&] { (void)build_feature_table(grid, spec, 4, 1); }, 1);
        report("tasep feature table", ts, tp);
    }
    // posterior rows + mlp kernels on a 32x32 grid
    {
        ParamGrid grid(-1.0, 1.0, -1.0, 1.0, 32, 32);
        SamplerSpec spec;
        spec.system = System::oracle;
        spec.oracle_spins = 64;
        const FeatureTable table = build_feature_table(grid, spec, 16, 1);
        const double ts =
            timeit([&] { (void)ref::posterior_from_features(table, 100.0, Weighting::inverse_variance); });
        const double tp =
            timeit([&] { (void)posterior_from_features(table, 100.0, Weighting::inverse_variance); });
        report("posterior rows 32x32", ts, tp);

        Mlp net({2, 128, 128, 128, 1}, Activation::softplus, 3);
        net.set_input_normalization(-1.0, 1.0, -1.0, 1.0);
        const int n = grid.cells();
        std::vector<Point2> pts(static_cast<std::size_t>(n));
        for (int c = 0; c < n; ++c) pts[static_cast<std::size_t>(c)] = grid.center_flat(c);
        std::vector<double> out(static_cast<std::size_t>(n));
        const double fs = timeit([&] { ref::mlp_value_batch(net, pts.data(), n, out.data()); });
        const double fp = timeit([&] { net.value_batch(pts.data(), n, out.data()); });
        report("mlp forward 1024x(3x128)", fs, fp);

        std::vector<double> adj(static_cast<std::size_t>(n), 1.0 / n);
        const double gs = timeit([&] { (void)ref::mlp_param_gradient(net, pts.data(), n, adj.data()); });
        const double gp = timeit([&] { (void)net.param_gradient(pts.data(), n, adj.data()); });
        report("mlp param gradient", gs, gp);

        std::vector<double> vals(static_cast<std::size_t>(n));
        net.value_batch(pts.data(), n, vals.data());
        const double hs = timeit([&] { (void)ref::hessian_field_from_values(vals, grid); });
        const double hp = timeit([&] { (void)hessian_field_from_values(vals, grid); });
        report("hessian field (values)", hs, hp);

        std::vector<double> vals2 = vals;
        for (auto& v : vals2) v *= 1.01;
        const double ms = timeit([&] { (void)ref::mse_bregman_loss(vals, vals2, grid); }, 1);
        const double mp = timeit([&] { (void)mse_bregman_loss(vals, vals2, grid); }, 1);
        report("mse bregman loss", ms, mp);
    }
    return 0;
}
