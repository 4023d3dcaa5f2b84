// Command line front end: runs the full experiment pipeline from a JSON
// config, or any single stage against previously written artifacts.
//
// Exit codes: 0 ok, 2 config error, 3 stage failure.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fisherlat/dynamics.hpp"
#include "fisherlat/io.hpp"
#include "fisherlat/parallel.hpp"
#include "fisherlat/pipeline.hpp"

using namespace fisherlat;

namespace {

int threads_from_env() {
    const char* env = std::getenv("FISHERLAT_THREADS");
    if (!env) return 0;
    return std::atoi(env);
}

struct SweepSpec {
    double lo = 0.1, hi = 1.0;
    int count = 10;
};

// "--sweep sigma=0.1:1.0:10"
SweepSpec parse_sweep(const std::string& s) {
    SweepSpec spec;
    const auto eq = s.find('=');
    const std::string rest = eq == std::string::npos ? s : s.substr(eq + 1);
    if (std::sscanf(rest.c_str(), "%lf:%lf:%d", &spec.lo, &spec.hi, &spec.count) != 3 ||
        spec.count < 1)
        throw CLI::ValidationError("--sweep expects lo:hi:count");
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fisher metric reconstruction on 2-d parameter spaces"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    long long seed_override = -1;
    int threads = threads_from_env();
    std::string stage_name;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config JSON");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--seed", seed_override, "master seed override");
        cmd->add_option("--threads", threads, "worker thread count (0 = default)");
    };

    auto* run = app.add_subcommand("run", "run the full pipeline");
    add_common(run, true);
    run->add_option("--stage", stage_name, "run a single stage instead of all");

    for (const char* name : {"sample", "posterior", "train", "metric", "geodesic", "groundtruth"}) {
        auto* cmd = app.add_subcommand(name, std::string("run the ") + name + " stage");
        add_common(cmd, true);
    }
    auto* eval_cmd = app.add_subcommand("evaluate", "write the Table-1-style report");
    add_common(eval_cmd, true);
    auto* plot_cmd = app.add_subcommand("plot", "render SVG heatmaps of the artifacts");
    add_common(plot_cmd, true);

    auto* lyap = app.add_subcommand("lyapunov", "closed-form vs numeric Lyapunov exponents");
    double lyap_sigma = 0.5, lyap_beta = 1.0, lyap_t = 0.0, lyap_delta = 1e-5;
    std::string sweep_arg, lyap_out = "lyapunov.csv", traj_out;
    int traj_steps = 1000;
    double traj_t1 = 0.004;
    lyap->add_option("--sigma", lyap_sigma, "mode standard deviation");
    lyap->add_option("--beta", lyap_beta, "noise schedule constant");
    lyap->add_option("--t", lyap_t, "diffusion time");
    lyap->add_option("--delta", lyap_delta, "numeric derivative spacing");
    lyap->add_option("--sweep", sweep_arg, "sigma sweep lo:hi:count");
    lyap->add_option("--out", lyap_out, "output CSV");
    lyap->add_option("--trajectory", traj_out, "also integrate a trajectory pair to this CSV");
    lyap->add_option("--steps", traj_steps, "RK4 steps for the trajectory");
    lyap->add_option("--t1", traj_t1, "trajectory start time (integrates down to t)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    set_threads(threads);

    try {
        if (lyap->parsed()) {
            VpMixtureSpec spec{lyap_sigma, lyap_beta};
            std::string csv = "sigma,beta,t,lambda_closed,lambda_numeric\n";
            if (!sweep_arg.empty()) {
                const SweepSpec sw = parse_sweep(sweep_arg);
                for (int i = 0; i < sw.count; ++i) {
                    const double s = sw.count == 1
                                         ? sw.lo
                                         : sw.lo + (sw.hi - sw.lo) * i / (sw.count - 1);
                    VpMixtureSpec sp{s, lyap_beta};
                    csv += format_double(s) + "," + format_double(lyap_beta) + "," +
                           format_double(lyap_t) + "," + format_double(lyapunov_closed(sp, lyap_t)) +
                           "," + format_double(lyapunov_numeric(sp, lyap_t, lyap_delta)) + "\n";
                }
            } else {
                csv += format_double(lyap_sigma) + "," + format_double(lyap_beta) + "," +
                       format_double(lyap_t) + "," + format_double(lyapunov_closed(spec, lyap_t)) +
                       "," + format_double(lyapunov_numeric(spec, lyap_t, lyap_delta)) + "\n";
            }
            write_text_file(lyap_out, csv);
            std::printf("wrote %s\n", lyap_out.c_str());
            if (!traj_out.empty()) {
                const TrajectoryResult tr =
                    trajectory_divergence(spec, 0.0, 1e-8, traj_t1, lyap_t, traj_steps);
                std::string tcsv = "s,x_plus,x_minus\n";
                for (std::size_t k = 0; k < tr.s.size(); ++k)
                    tcsv += format_double(tr.s[k]) + "," + format_double(tr.x_plus[k]) + "," +
                            format_double(tr.x_minus[k]) + "\n";
                write_text_file(traj_out, tcsv);
                std::printf("trajectory rate %.6g (closed form %.6g)%s\n", tr.rate,
                            lyapunov_closed(spec, lyap_t), tr.completed ? "" : " [left window]");
            }
            return 0;
        }

        ExperimentConfig cfg;
        try {
            cfg = ExperimentConfig::from_json_file(config_path);
            if (!out_override.empty()) cfg.out_dir = out_override;
            if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
            if (threads > 0) cfg.threads = threads;
            cfg.validate();
        } catch (const std::exception& e) {
            std::fprintf(stderr, "config error: %s\n", e.what());
            return 2;
        }

        if (run->parsed()) {
            if (!stage_name.empty()) {
                run_stage(cfg, stage_from_string(stage_name));
                write_manifest(cfg);
            } else {
                run_pipeline(cfg);
            }
            std::printf("wrote %s/manifest.json\n", cfg.out_dir.c_str());
            return 0;
        }
        for (const char* name :
             {"sample", "posterior", "train", "metric", "geodesic", "groundtruth", "evaluate", "plot"}) {
            if (app.get_subcommand(name)->parsed()) {
                run_stage(cfg, stage_from_string(name));
                write_manifest(cfg);
                std::printf("stage %s done\n", name);
                return 0;
            }
        }
        std::fprintf(stderr, "no subcommand executed\n");
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
