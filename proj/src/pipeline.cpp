#include "fisherlat/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "fisherlat/groundtruth.hpp"
#include "fisherlat/io.hpp"
#include "fisherlat/parallel.hpp"
#include "fisherlat/rng.hpp"
#include "fisherlat/samplers.hpp"

namespace fisherlat {

namespace {
constexpr std::uint64_t kTagSample = 0x53u;
constexpr std::uint64_t kTagTrain = 0x54u;
constexpr std::uint64_t kTagOracle = 0x4fu;
constexpr std::uint64_t kTagBaseline = 0x4du;

std::string join(const std::string& dir, const std::string& name) { return dir + "/" + name; }
}  // namespace

Stage stage_from_string(const std::string& s) {
    if (s == "sample") return Stage::sample;
    if (s == "posterior") return Stage::posterior;
    if (s == "train") return Stage::train;
    if (s == "metric") return Stage::metric;
    if (s == "geodesic") return Stage::geodesic;
    if (s == "groundtruth") return Stage::groundtruth;
    if (s == "evaluate") return Stage::evaluate;
    if (s == "plot") return Stage::plot;
    throw std::invalid_argument("unknown stage: " + s);
}

namespace {
std::string stage_name(Stage s) {
    switch (s) {
        case Stage::sample: return "sample";
        case Stage::posterior: return "posterior";
        case Stage::train: return "train";
        case Stage::metric: return "metric";
        case Stage::geodesic: return "geodesic";
        case Stage::groundtruth: return "groundtruth";
        case Stage::evaluate: return "evaluate";
        case Stage::plot: return "plot";
    }
    return "?";
}
}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    const auto j = nlohmann::json::parse(read_text_file(path));
    ExperimentConfig cfg;
    cfg.system = system_from_string(j.at("system").get<std::string>());
    cfg.seed = j.value("seed", 1ULL);
    cfg.out_dir = j.value("out", std::string("out"));
    cfg.threads = j.value("threads", 0);

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        cfg.grid = ParamGrid(g.value("t1_min", 0.0), g.value("t1_max", 1.0), g.value("t2_min", 0.0),
                             g.value("t2_max", 1.0), g.value("nx", 32), g.value("ny", 32));
    } else {
        // per-system default domains
        switch (cfg.system) {
            case System::ising: cfg.grid = ParamGrid(1.0, 5.0, -2.0, 2.0, 32, 32); break;
            case System::tasep:
            case System::external: cfg.grid = ParamGrid(0.0, 1.0, 0.0, 1.0, 32, 32); break;
            case System::oracle: cfg.grid = ParamGrid(-1.0, 1.0, -1.0, 1.0, 32, 32); break;
        }
    }

    cfg.sampler.system = cfg.system;
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        cfg.replicas = s.value("replicas", 64);
        cfg.sampler.ising_side = s.value("ising_side", 32);
        cfg.sampler.ising_sweeps = s.value("ising_sweeps", 1000LL);
        cfg.sampler.tasep_sites = s.value("tasep_sites", 256);
        cfg.sampler.tasep_attempts = s.value("tasep_attempts", 0LL);
        cfg.sampler.tasep_bins = s.value("tasep_bins", 8);
        cfg.sampler.oracle_spins = s.value("oracle_spins", 64);
        cfg.oracle_samples = s.value("oracle_samples", 8LL);
        cfg.dump_pgm = s.value("dump_pgm", 0);
        const std::string route = s.value("oracle_route", std::string("exact"));
        if (route == "features")
            cfg.oracle_route = OracleRoute::features;
        else if (route == "bayes")
            cfg.oracle_route = OracleRoute::bayes;
        else if (route == "exact")
            cfg.oracle_route = OracleRoute::exact;
        else
            throw std::invalid_argument("unknown oracle_route: " + route);
    }
    cfg.external_features = j.value("external_features", std::string());

    if (j.contains("posterior")) {
        const auto& p = j.at("posterior");
        cfg.n_eff = p.value("n_eff", 0.0);
        cfg.weighting = weighting_from_string(p.value("weighting", std::string("inverse-variance")));
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.iterations = t.value("iterations", cfg.train.iterations);
        cfg.train.lr = t.value("lr", cfg.train.lr);
        cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
        cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
        cfg.train.eps = t.value("eps", cfg.train.eps);
        cfg.train.activation = activation_from_string(t.value("activation", std::string("softplus")));
        if (t.contains("hidden")) cfg.train.hidden = t.at("hidden").get<std::vector<int>>();
        cfg.train.grad_h1 = t.value("grad_h1", 0.0);
        cfg.train.grad_h2 = t.value("grad_h2", 0.0);
        cfg.train.output_scale = t.value("output_scale", 0.0);
    }

    if (j.contains("geometry")) {
        const auto& g = j.at("geometry");
        cfg.hessian_mode = hessian_mode_from_string(g.value("hessian_mode", std::string("analytic")));
        cfg.hessian_h = g.value("h", 0.0);
        cfg.floor_scale = g.value("floor_scale", 1e-6);
        cfg.phase_quantile = g.value("phase_quantile", 0.95);
        if (g.contains("geodesics")) {
            for (const auto& req : g.at("geodesics")) {
                GeodesicRequest r;
                r.a = {req.at("a")[0].get<double>(), req.at("a")[1].get<double>()};
                r.b = {req.at("b")[0].get<double>(), req.at("b")[1].get<double>()};
                r.n_points = req.value("n_points", 33);
                cfg.geodesics.push_back(r);
            }
        }
        cfg.geodesic_cfg.iterations = g.value("geodesic_iterations", cfg.geodesic_cfg.iterations);
        cfg.geodesic_cfg.lr = g.value("geodesic_lr", 0.0);
    }
    cfg.run_groundtruth = j.value("groundtruth", true);
    cfg.run_evaluate = j.value("evaluate", true);
    cfg.run_plot = j.value("plot", true);
    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    train.validate();
    if (replicas < 2) throw std::invalid_argument("config: replicas must be >= 2");
    if (system == System::external) {
        if (external_features.empty())
            throw std::invalid_argument("config: system 'external' needs external_features");
        if (!std::filesystem::exists(external_features))
            throw std::invalid_argument("config: external feature file not found: " + external_features);
    }
    for (const auto& r : geodesics) {
        if (!grid.contains(r.a) || !grid.contains(r.b))
            throw std::invalid_argument("config: geodesic endpoints outside grid bounds");
        if (r.n_points < 3) throw std::invalid_argument("config: geodesic n_points must be >= 3");
    }
    if (sampler.tasep_sites % sampler.tasep_bins != 0)
        throw std::invalid_argument("config: tasep_bins must divide tasep_sites");
}

std::string ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["system"] = to_string(system);
    j["seed"] = seed;
    j["out"] = out_dir;
    j["grid"] = {{"t1_min", grid.t1_min}, {"t1_max", grid.t1_max}, {"t2_min", grid.t2_min},
                 {"t2_max", grid.t2_max}, {"nx", grid.nx},         {"ny", grid.ny}};
    j["sampler"] = {{"replicas", replicas},
                    {"ising_side", sampler.ising_side},
                    {"ising_sweeps", sampler.ising_sweeps},
                    {"tasep_sites", sampler.tasep_sites},
                    {"tasep_attempts", sampler.tasep_attempts},
                    {"tasep_bins", sampler.tasep_bins},
                    {"oracle_spins", sampler.oracle_spins},
                    {"oracle_samples", oracle_samples}};
    j["posterior"] = {{"n_eff", n_eff}, {"weighting", weighting == Weighting::uniform ? "uniform" : "inverse-variance"}};
    j["train"] = {{"iterations", train.iterations}, {"lr", train.lr}, {"activation", to_string(train.activation)},
                  {"hidden", train.hidden}, {"output_scale", train.output_scale}};
    j["geometry"] = {{"hessian_mode", hessian_mode == HessianMode::analytic ? "analytic" : "finite-diff"},
                     {"floor_scale", floor_scale}, {"phase_quantile", phase_quantile}};
    return j.dump(2) + "\n";
}

namespace {

void stage_sample(const ExperimentConfig& cfg) {
    if (cfg.system == System::external) return;  // features come from outside
    if (cfg.system == System::oracle && cfg.oracle_route != OracleRoute::features)
        return;  // posterior is built in closed form
    const FeatureTable table =
        build_feature_table(cfg.grid, cfg.sampler, cfg.replicas, derive_seed(cfg.seed, {kTagSample}));
    dump_features(table, join(cfg.out_dir, "features.csv"));
    if (cfg.dump_pgm > 0 && cfg.system == System::ising) {
        for (int k = 0; k < cfg.dump_pgm; ++k) {
            SamplerParams p;
            const Point2 t = cfg.grid.center_flat(k % cfg.grid.cells());
            p.t1 = t.x;
            p.t2 = t.y;
            p.sweeps = cfg.sampler.ising_sweeps;
            p.seed = derive_seed(cfg.seed, {kTagSample, 0x50ULL, static_cast<std::uint64_t>(k)});
            const IsingState st = ising_sample(p, cfg.sampler.ising_side);
            char name[64];
            std::snprintf(name, sizeof(name), "state_%03d.pgm", k);
            write_pgm(st.spins, st.side, st.side, join(cfg.out_dir, name));
        }
    }
}

PosteriorField load_or_build_posterior(const ExperimentConfig& cfg) {
    return read_posterior(join(cfg.out_dir, "posterior.csv"), join(cfg.out_dir, "posterior.json"));
}

void stage_posterior(const ExperimentConfig& cfg) {
    PosteriorField field;
    std::string warning;
    if (cfg.system == System::oracle && cfg.oracle_route == OracleRoute::bayes) {
        field = oracle_posterior(cfg.grid, cfg.sampler.oracle_spins, cfg.oracle_samples,
                                 derive_seed(cfg.seed, {kTagOracle}));
    } else if (cfg.system == System::oracle && cfg.oracle_route == OracleRoute::exact) {
        field = oracle_exact_posterior(cfg.grid, cfg.sampler.oracle_spins, cfg.oracle_samples);
    } else {
        const std::string path = cfg.system == System::external ? cfg.external_features
                                                                : join(cfg.out_dir, "features.csv");
        const FeatureTable table = ingest_features(path, cfg.grid, &warning);
        field = posterior_from_features(table, cfg.n_eff, cfg.weighting, &warning);
    }
    if (!warning.empty()) std::fprintf(stderr, "[posterior] %s\n", warning.c_str());
    dump_posterior(field, join(cfg.out_dir, "posterior.csv"), join(cfg.out_dir, "posterior.json"));
}

void stage_train(const ExperimentConfig& cfg) {
    const PosteriorField target = load_or_build_posterior(cfg);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, {kTagTrain});
    const TrainResult res = train_potential(target, tc);
    write_text_file(join(cfg.out_dir, "model.json"), res.model.to_json());
    write_loss_history(res.loss_history, join(cfg.out_dir, "loss.csv"));
    ScalarField f_rec(cfg.grid, "F_rec");
    std::vector<Point2> centers(static_cast<std::size_t>(cfg.grid.cells()));
    for (int c = 0; c < cfg.grid.cells(); ++c) centers[static_cast<std::size_t>(c)] = cfg.grid.center_flat(c);
    res.model.value_batch(centers.data(), cfg.grid.cells(), f_rec.values.data());
    write_scalar_field_csv(f_rec, join(cfg.out_dir, "F_rec.csv"));
    write_grid_sidecar(cfg.grid, join(cfg.out_dir, "grid.json"), {{"n_eff", target.n_eff}});
}

Mlp load_model(const ExperimentConfig& cfg) {
    return Mlp::from_json(read_text_file(join(cfg.out_dir, "model.json")));
}

void stage_metric(const ExperimentConfig& cfg) {
    const Mlp model = load_model(cfg);
    double h = cfg.hessian_h;
    if (h <= 0.0) h = 0.5 * std::min(cfg.grid.dx(), cfg.grid.dy());
    HessianMode mode = cfg.hessian_mode;
    if (mode == HessianMode::analytic && model.activation() == Activation::relu)
        mode = HessianMode::finite_diff;  // relu has no useful analytic second derivative
    const MetricField metric = hessian_field(model, cfg.grid, mode, h, cfg.floor_scale);
    write_metric_csv(metric, join(cfg.out_dir, "metric.csv"));

    const PhaseMap pm = phase_map(metric, cfg.phase_quantile);
    std::ostringstream out;
    out << "i,j,roughness,flag\n";
    for (int iy = 0; iy < cfg.grid.ny; ++iy)
        for (int ix = 0; ix < cfg.grid.nx; ++ix) {
            const int c = cfg.grid.index(ix, iy);
            out << ix << ',' << iy << ',' << format_double(pm.roughness.values[static_cast<std::size_t>(c)])
                << ',' << static_cast<int>(pm.flags[static_cast<std::size_t>(c)]) << '\n';
        }
    write_text_file(join(cfg.out_dir, "phase.csv"), out.str());
}

void stage_geodesic(const ExperimentConfig& cfg) {
    if (cfg.geodesics.empty()) return;
    const MetricField metric = read_metric_csv(join(cfg.out_dir, "metric.csv"), cfg.grid);
    for (std::size_t k = 0; k < cfg.geodesics.size(); ++k) {
        const auto& req = cfg.geodesics[k];
        const GeodesicPath path = geodesic(metric, req.a, req.b, req.n_points, cfg.geodesic_cfg);
        char name[64];
        std::snprintf(name, sizeof(name), "geodesic_%zu.csv", k);
        write_path_csv(path.points, join(cfg.out_dir, name));
        if (!path.converged)
            std::fprintf(stderr, "[geodesic] path %zu returned best-so-far without convergence\n", k);
    }
}

void stage_groundtruth(const ExperimentConfig& cfg) {
    switch (cfg.system) {
        case System::tasep: {
            write_scalar_field_csv(tasep_free_energy_field(cfg.grid), join(cfg.out_dir, "F_gt.csv"));
            break;
        }
        case System::ising: {
            const FeatureTable table =
                ingest_features(join(cfg.out_dir, "features.csv"), cfg.grid, nullptr);
            const IsingReferenceFields ref = ising_reference_fields_from(table);
            write_scalar_field_csv(ref.E, join(cfg.out_dir, "E.csv"));
            write_scalar_field_csv(ref.M, join(cfg.out_dir, "M.csv"));
            const IntegrateResult integ = integrate_derivative_field(ref.E, ref.M);
            ScalarField f_gt = integ.F;
            f_gt.label = "F_gt";
            write_scalar_field_csv(f_gt, join(cfg.out_dir, "F_gt.csv"));
            MeanAsStatConfig mc;
            mc.seed = derive_seed(cfg.seed, {kTagBaseline});
            const MeanAsStatResult mas = mean_as_stat(table, mc);
            write_scalar_field_csv(mas.s_t1, join(cfg.out_dir, "s_t1.csv"));
            write_scalar_field_csv(mas.s_t2, join(cfg.out_dir, "s_t2.csv"));
            write_scalar_field_csv(mas.F, join(cfg.out_dir, "F_mas.csv"));
            break;
        }
        case System::oracle: {
            ScalarField logz(cfg.grid, "logZ");
            for (int c = 0; c < cfg.grid.cells(); ++c) {
                const Point2 t = cfg.grid.center_flat(c);
                logz.values[static_cast<std::size_t>(c)] =
                    oracle_logz(t.x, t.y, cfg.sampler.oracle_spins);
            }
            write_scalar_field_csv(logz, join(cfg.out_dir, "F_gt.csv"));
            break;
        }
        case System::external: break;  // no ground truth available
    }
}

void stage_plot(const ExperimentConfig& cfg) {
    const std::string frec_path = join(cfg.out_dir, "F_rec.csv");
    if (std::filesystem::exists(frec_path)) {
        const ScalarField f = read_scalar_field_csv(frec_path, cfg.grid);
        std::vector<std::vector<Point2>> overlays;
        for (std::size_t k = 0;; ++k) {
            char name[64];
            std::snprintf(name, sizeof(name), "geodesic_%zu.csv", k);
            const std::string p = join(cfg.out_dir, name);
            if (!std::filesystem::exists(p)) break;
            overlays.push_back(read_path_csv(p));
        }
        write_svg_heatmap(f, join(cfg.out_dir, "F_rec.svg"), overlays);
    }
    const std::string metric_path = join(cfg.out_dir, "metric.csv");
    if (std::filesystem::exists(metric_path)) {
        const MetricField m = read_metric_csv(metric_path, cfg.grid);
        ScalarField g11(cfg.grid, "g11");
        for (int c = 0; c < cfg.grid.cells(); ++c)
            g11.values[static_cast<std::size_t>(c)] = m.tensors[static_cast<std::size_t>(c)].a11;
        write_svg_heatmap(g11, join(cfg.out_dir, "metric_g11.svg"));
    }
    const std::string gt_path = join(cfg.out_dir, "F_gt.csv");
    if (std::filesystem::exists(gt_path)) {
        const ScalarField f = read_scalar_field_csv(gt_path, cfg.grid);
        write_svg_heatmap(f, join(cfg.out_dir, "F_gt.svg"));
    }
}

}  // namespace

std::string evaluate_artifacts(const ExperimentConfig& cfg) {
    nlohmann::json rep;
    rep["system"] = to_string(cfg.system);
    const ParamGrid& g = cfg.grid;
    const ScalarField f_rec = read_scalar_field_csv(join(cfg.out_dir, "F_rec.csv"), g);
    double n_eff = 0.0;
    (void)read_grid_sidecar(join(cfg.out_dir, "grid.json"), &n_eff);
    rep["n_eff"] = n_eff;

    auto deriv_fit_rmse = [](const std::vector<double>& rec, const std::vector<double>& ref) {
        const AffineFit fit = affine_fit(rec, {}, {}, ref, false, false);
        return fit.rmse;
    };

    if (cfg.system == System::tasep) {
        const ScalarField f_gt = read_scalar_field_csv(join(cfg.out_dir, "F_gt.csv"), g);
        const AffineFit fit = affine_rmse(f_rec, f_gt);
        rep["F_rmse"] = fit.rmse;
        rep["affine"] = {{"s", fit.s}, {"c1", fit.c1}, {"c2", fit.c2}, {"b", fit.b}};
        ScalarField r1, r2, g1, g2;
        central_diff(f_rec, r1, r2);
        central_diff(f_gt, g1, g2);
        rep["dFdalpha_rmse"] = deriv_fit_rmse(r1.values, g1.values);
        rep["dFdbeta_rmse"] = deriv_fit_rmse(r2.values, g2.values);
    } else if (cfg.system == System::ising) {
        const ScalarField f_gt = read_scalar_field_csv(join(cfg.out_dir, "F_gt.csv"), g);
        const ScalarField m_ref = read_scalar_field_csv(join(cfg.out_dir, "M.csv"), g);
        const AffineFit fit = affine_rmse(f_rec, f_gt);
        rep["F_rmse"] = fit.rmse;
        rep["affine"] = {{"s", fit.s}, {"c1", fit.c1}, {"c2", fit.c2}, {"b", fit.b}};

        // dF/dT at H = 0 against the Onsager-derived E(T) = dF_onsager/dT,
        // both via the same interior central differences on the T line
        const Mlp model = load_model(cfg);
        std::vector<double> f_line(static_cast<std::size_t>(g.nx));
        std::vector<double> f_ons(static_cast<std::size_t>(g.nx));
        for (int i = 0; i < g.nx; ++i) {
            const double T = g.center(i, 0).x;
            f_line[static_cast<std::size_t>(i)] = model.value({T, 0.0});
            f_ons[static_cast<std::size_t>(i)] = onsager_free_energy(T);
        }
        std::vector<double> d_rec, d_ons;
        for (int i = 1; i + 1 < g.nx; ++i) {
            d_rec.push_back((f_line[static_cast<std::size_t>(i) + 1] - f_line[static_cast<std::size_t>(i) - 1]) /
                            (2.0 * g.dx()));
            d_ons.push_back((f_ons[static_cast<std::size_t>(i) + 1] - f_ons[static_cast<std::size_t>(i) - 1]) /
                            (2.0 * g.dx()));
        }
        rep["dFdT_rmse"] = deriv_fit_rmse(d_rec, d_ons);

        // dF/dH against the symmetrized magnetization field
        ScalarField r1, r2;
        central_diff(f_rec, r1, r2);
        rep["dFdH_rmse"] = deriv_fit_rmse(r2.values, m_ref.values);

        // Mean-as-Stat baseline on the same references
        const std::string mas_path = join(cfg.out_dir, "F_mas.csv");
        if (std::filesystem::exists(mas_path)) {
            const ScalarField f_mas = read_scalar_field_csv(mas_path, g);
            rep["mas_F_rmse"] = affine_rmse(f_mas, f_gt).rmse;
            ScalarField m1, m2;
            central_diff(f_mas, m1, m2);
            rep["mas_dFdH_rmse"] = deriv_fit_rmse(m2.values, m_ref.values);
            // H = 0 line of the grid-valued baseline: average the two central columns
            std::vector<double> mas_line(static_cast<std::size_t>(g.nx));
            for (int i = 0; i < g.nx; ++i)
                mas_line[static_cast<std::size_t>(i)] =
                    0.5 * (f_mas.at(i, g.ny / 2 - 1) + f_mas.at(i, g.ny / 2));
            std::vector<double> d_mas;
            for (int i = 1; i + 1 < g.nx; ++i)
                d_mas.push_back((mas_line[static_cast<std::size_t>(i) + 1] - mas_line[static_cast<std::size_t>(i) - 1]) /
                                (2.0 * g.dx()));
            rep["mas_dFdT_rmse"] = deriv_fit_rmse(d_mas, d_ons);
        }
    } else if (cfg.system == System::oracle) {
        const ScalarField f_gt = read_scalar_field_csv(join(cfg.out_dir, "F_gt.csv"), g);
        const AffineFit fit = affine_rmse(f_rec, f_gt);
        rep["F_rmse"] = fit.rmse;
        rep["affine"] = {{"s", fit.s}, {"c1", fit.c1}, {"c2", fit.c2}, {"b", fit.b}};

        // Hessian recovery against the analytic diag((n/2) sech^2 h) field
        const Mlp model = load_model(cfg);
        const MetricField rec = hessian_field(model, g, HessianMode::analytic,
                                              0.5 * std::min(g.dx(), g.dy()), cfg.floor_scale);
        double num = 0.0, den = 0.0;
        std::vector<double> rel;
        std::vector<Sym2> an(static_cast<std::size_t>(g.cells()));
        for (int c = 0; c < g.cells(); ++c) {
            const Point2 t = g.center_flat(c);
            double h11, h22;
            oracle_logz_hess(t.x, t.y, cfg.sampler.oracle_spins, h11, h22);
            an[static_cast<std::size_t>(c)] = {h11, 0.0, h22};
            const Sym2& r = rec.at_cell(c);
            num += r.a11 * h11 + r.a22 * h22;  // <rec, an>_F with zero off-diagonals
            den += h11 * h11 + h22 * h22;
        }
        const double scale = num / den;
        for (int c = 0; c < g.cells(); ++c) {
            const Sym2& r = rec.at_cell(c);
            const Sym2& a = an[static_cast<std::size_t>(c)];
            const double dn = std::sqrt((r.a11 - scale * a.a11) * (r.a11 - scale * a.a11) +
                                        2.0 * r.a12 * r.a12 +
                                        (r.a22 - scale * a.a22) * (r.a22 - scale * a.a22));
            const double dd = scale * std::sqrt(a.a11 * a.a11 + a.a22 * a.a22);
            rel.push_back(dn / dd);
        }
        std::nth_element(rel.begin(), rel.begin() + rel.size() / 2, rel.end());
        rep["hessian_scale"] = scale;
        rep["hessian_median_rel_err"] = rel[rel.size() / 2];
    }

    const std::string text = rep.dump(2) + "\n";
    write_text_file(join(cfg.out_dir, "report.json"), text);
    return text;
}

void run_stage(const ExperimentConfig& cfg, Stage stage) {
    std::filesystem::create_directories(cfg.out_dir);
    try {
        switch (stage) {
            case Stage::sample: stage_sample(cfg); break;
            case Stage::posterior: stage_posterior(cfg); break;
            case Stage::train: stage_train(cfg); break;
            case Stage::metric: stage_metric(cfg); break;
            case Stage::geodesic: stage_geodesic(cfg); break;
            case Stage::groundtruth:
                if (cfg.run_groundtruth) stage_groundtruth(cfg);
                break;
            case Stage::evaluate:
                if (cfg.run_evaluate && cfg.system != System::external) evaluate_artifacts(cfg);
                break;
            case Stage::plot:
                if (cfg.run_plot) stage_plot(cfg);
                break;
        }
    } catch (const std::exception& e) {
        throw std::runtime_error("stage '" + stage_name(stage) + "' failed: " + e.what());
    }
}

PipelineResult write_manifest(const ExperimentConfig& cfg) {
    static const char* kNames[] = {"features.csv", "posterior.csv", "posterior.json", "model.json",
                                   "loss.csv",     "F_rec.csv",     "grid.json",      "metric.csv",
                                   "phase.csv",    "E.csv",         "M.csv",          "F_gt.csv",
                                   "s_t1.csv",     "s_t2.csv",      "F_mas.csv",      "report.json",
                                   "F_rec.svg",    "metric_g11.svg", "F_gt.svg"};
    PipelineResult result;
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(cfg.to_json());
    for (const char* name : kNames) {
        const std::string path = join(cfg.out_dir, name);
        if (!std::filesystem::exists(path)) continue;
        Artifact a{name, path, hex64(fnv1a_file(path))};
        j["artifacts"].push_back({{"name", a.name}, {"fnv64", a.fnv64}});
        result.artifacts.push_back(std::move(a));
    }
    for (std::size_t k = 0;; ++k) {
        char name[64];
        std::snprintf(name, sizeof(name), "geodesic_%zu.csv", k);
        const std::string path = join(cfg.out_dir, name);
        if (!std::filesystem::exists(path)) break;
        Artifact a{name, path, hex64(fnv1a_file(path))};
        j["artifacts"].push_back({{"name", a.name}, {"fnv64", a.fnv64}});
        result.artifacts.push_back(std::move(a));
    }
    const auto now = std::chrono::system_clock::now();
    j["timestamp_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    result.manifest_path = join(cfg.out_dir, "manifest.json");
    write_text_file(result.manifest_path, j.dump(2) + "\n");
    return result;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    if (cfg.threads > 0) set_threads(cfg.threads);
    for (Stage s : {Stage::sample, Stage::posterior, Stage::train, Stage::metric, Stage::geodesic,
                    Stage::groundtruth, Stage::evaluate, Stage::plot})
        run_stage(cfg, s);
    return write_manifest(cfg);
}

}  // namespace fisherlat
