#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "fisherlat/io.hpp"
#include "fisherlat/pipeline.hpp"

using namespace fisherlat;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

ExperimentConfig small_oracle_config(const std::string& out) {
    ExperimentConfig cfg;
    cfg.system = System::oracle;
    cfg.seed = 11;
    cfg.out_dir = out;
    cfg.grid = ParamGrid(-1.0, 1.0, -1.0, 1.0, 12, 12);
    cfg.sampler.system = System::oracle;
    cfg.sampler.oracle_spins = 32;
    cfg.oracle_samples = 4;
    cfg.oracle_route = OracleRoute::exact;
    cfg.train.iterations = 250;
    cfg.train.hidden = {32, 32};
    cfg.geodesics.push_back({{-0.8, -0.8}, {0.8, 0.8}, 17});
    cfg.geodesic_cfg.iterations = 400;
    return cfg;
}

std::map<std::string, std::string> manifest_hashes(const std::string& out) {
    const auto j = nlohmann::json::parse(read_text_file(out + "/manifest.json"));
    std::map<std::string, std::string> h;
    for (const auto& a : j.at("artifacts")) h[a.at("name")] = a.at("fnv64");
    return h;
}

}  // namespace

TEST_CASE("oracle pipeline end to end: artifacts, report keys, rerun determinism") {
    const std::string out = temp_dir("fisherlat_pipe_oracle");
    const ExperimentConfig cfg = small_oracle_config(out);
    const PipelineResult res = run_pipeline(cfg);
    CHECK(!res.artifacts.empty());
    for (const char* name : {"posterior.csv", "model.json", "loss.csv", "F_rec.csv", "metric.csv",
                             "phase.csv", "geodesic_0.csv", "F_gt.csv", "report.json", "F_rec.svg"})
        CHECK(fs::exists(out + "/" + name));

    const auto rep = nlohmann::json::parse(read_text_file(out + "/report.json"));
    CHECK(rep.contains("F_rmse"));
    CHECK(rep.contains("hessian_median_rel_err"));

    const auto h1 = manifest_hashes(out);
    // rerun in a fresh directory with the same seed: identical artifact bytes
    const std::string out2 = temp_dir("fisherlat_pipe_oracle2");
    ExperimentConfig cfg2 = cfg;
    cfg2.out_dir = out2;
    run_pipeline(cfg2);
    const auto h2 = manifest_hashes(out2);
    REQUIRE(h1.size() == h2.size());
    for (const auto& [name, hash] : h1) {
        INFO(name);
        CHECK(h2.at(name) == hash);
    }
}

TEST_CASE("stage isolation: rebuilding downstream stages reproduces identical hashes") {
    const std::string out = temp_dir("fisherlat_pipe_stages");
    const ExperimentConfig cfg = small_oracle_config(out);
    run_pipeline(cfg);
    const auto before = manifest_hashes(out);

    // wipe everything the train/metric/geodesic stages own, then rerun them
    for (const char* name : {"model.json", "loss.csv", "F_rec.csv", "grid.json", "metric.csv",
                             "phase.csv", "geodesic_0.csv"})
        fs::remove(out + "/" + name);
    run_stage(cfg, Stage::train);
    run_stage(cfg, Stage::metric);
    run_stage(cfg, Stage::geodesic);
    write_manifest(cfg);
    const auto after = manifest_hashes(out);
    for (const char* name : {"model.json", "loss.csv", "F_rec.csv", "metric.csv", "geodesic_0.csv"}) {
        INFO(name);
        CHECK(after.at(name) == before.at(name));
    }
}

TEST_CASE("config validation errors") {
    ExperimentConfig cfg;
    cfg.system = System::external;
    cfg.external_features = "/nonexistent/features_xyz.csv";
    try {
        cfg.validate();
        CHECK(false);
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("/nonexistent/features_xyz.csv") != std::string::npos);
    }

    ExperimentConfig bad = small_oracle_config("unused");
    bad.geodesics[0].b = {9.0, 9.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    ExperimentConfig bins = small_oracle_config("unused");
    bins.sampler.tasep_sites = 100;
    bins.sampler.tasep_bins = 7;
    CHECK_THROWS_AS(bins.validate(), std::invalid_argument);
}

TEST_CASE("config JSON round trip picks up every section") {
    const std::string out = temp_dir("fisherlat_pipe_cfg");
    const std::string path = out + "/config.json";
    write_text_file(path, R"({
      "system": "tasep",
      "seed": 321,
      "out": ")" + out + R"(",
      "grid": {"t1_min": 0.0, "t1_max": 1.0, "t2_min": 0.0, "t2_max": 1.0, "nx": 8, "ny": 8},
      "sampler": {"replicas": 4, "tasep_sites": 64, "tasep_bins": 8},
      "posterior": {"n_eff": 123.5, "weighting": "uniform"},
      "train": {"iterations": 42, "hidden": [16, 16], "activation": "softplus"},
      "geometry": {"hessian_mode": "analytic", "geodesics": [{"a": [0.2, 0.2], "b": [0.8, 0.8], "n_points": 9}]},
      "evaluate": false,
      "plot": false
    })");
    const ExperimentConfig cfg = ExperimentConfig::from_json_file(path);
    CHECK(cfg.system == System::tasep);
    CHECK(cfg.seed == 321);
    CHECK(cfg.grid.nx == 8);
    CHECK(cfg.replicas == 4);
    CHECK(cfg.sampler.tasep_sites == 64);
    CHECK(cfg.n_eff == 123.5);
    CHECK(cfg.weighting == Weighting::uniform);
    CHECK(cfg.train.iterations == 42);
    CHECK(cfg.train.hidden == std::vector<int>{16, 16});
    CHECK(cfg.geodesics.size() == 1);
    CHECK(!cfg.run_evaluate);
}

TEST_CASE("tasep pipeline at toy scale produces the Table-1 report keys") {
    const std::string out = temp_dir("fisherlat_pipe_tasep");
    ExperimentConfig cfg;
    cfg.system = System::tasep;
    cfg.seed = 5;
    cfg.out_dir = out;
    cfg.grid = ParamGrid(0.0, 1.0, 0.0, 1.0, 8, 8);
    cfg.sampler.system = System::tasep;
    cfg.sampler.tasep_sites = 64;
    cfg.sampler.tasep_bins = 8;
    cfg.replicas = 8;
    cfg.train.iterations = 150;
    cfg.train.hidden = {24, 24};
    cfg.run_plot = false;
    run_pipeline(cfg);
    const auto rep = nlohmann::json::parse(read_text_file(out + "/report.json"));
    CHECK(rep.contains("F_rmse"));
    CHECK(rep.contains("dFdalpha_rmse"));
    CHECK(rep.contains("dFdbeta_rmse"));
    CHECK(rep.at("F_rmse").get<double>() >= 0.0);
}

TEST_CASE("pgm dump of a spin state") {
    const std::string out = temp_dir("fisherlat_pipe_pgm");
    std::vector<std::int8_t> spins{1, -1, -1, 1};
    write_pgm(spins, 2, 2, out + "/state.pgm");
    const std::string pgm = read_text_file(out + "/state.pgm");
    CHECK(pgm.rfind("P2\n2 2\n255\n", 0) == 0);
    CHECK(pgm.find("255 0") != std::string::npos);
}

TEST_CASE("plot stage: constant field renders a uniform-color heatmap") {
    const std::string out = temp_dir("fisherlat_pipe_plot");
    ParamGrid g(0.0, 1.0, 0.0, 1.0, 4, 4);
    ScalarField f(g, "flat");
    for (auto& v : f.values) v = 2.5;
    write_svg_heatmap(f, out + "/flat.svg");
    const std::string svg = read_text_file(out + "/flat.svg");
    // all rects carry the same fill color
    const auto first = svg.find("fill=\"rgb(");
    REQUIRE(first != std::string::npos);
    const std::string color = svg.substr(first, svg.find(')', first) - first + 1);
    std::size_t pos = 0;
    int count = 0;
    while ((pos = svg.find("fill=\"rgb(", pos)) != std::string::npos) {
        CHECK(svg.substr(pos, color.size()) == color);
        ++count;
        ++pos;
    }
    CHECK(count == g.cells());
}

#ifdef FISHERLAT_CLI_PATH
TEST_CASE("cli smoke: run + evaluate exit codes and config errors") {
    const std::string out = temp_dir("fisherlat_cli_smoke");
    const std::string cfg_path = out + "/cfg.json";
    write_text_file(cfg_path, R"({
      "system": "oracle",
      "seed": 9,
      "out": ")" + out + R"(",
      "grid": {"t1_min": -1.0, "t1_max": 1.0, "t2_min": -1.0, "t2_max": 1.0, "nx": 8, "ny": 8},
      "sampler": {"replicas": 4, "oracle_spins": 16, "oracle_samples": 2},
      "train": {"iterations": 60, "hidden": [16]},
      "plot": false
    })");
    const std::string cli = FISHERLAT_CLI_PATH;
    CHECK(std::system((cli + " run --config " + cfg_path + " > /dev/null 2>&1").c_str()) == 0);
    CHECK(fs::exists(out + "/report.json"));

    // stage rerun through the CLI
    CHECK(std::system((cli + " evaluate --config " + cfg_path + " > /dev/null 2>&1").c_str()) == 0);

    // config error: exit code 2
    const std::string bad = out + "/bad.json";
    write_text_file(bad, R"({"system": "external", "external_features": "/no/such/file.csv"})");
    const int rc = std::system((cli + " run --config " + bad + " > /dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    // lyapunov sweep CSV
    const std::string sweep = out + "/lyap.csv";
    CHECK(std::system((cli + " lyapunov --sweep sigma=0.1:1.0:10 --out " + sweep +
                       " > /dev/null 2>&1").c_str()) == 0);
    const CsvTable t = read_csv(sweep);
    CHECK(t.header == std::vector<std::string>{"sigma", "beta", "t", "lambda_closed",
                                               "lambda_numeric"});
    REQUIRE(t.rows.size() == 10);
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        CHECK(t.rows[i][3] < t.rows[i - 1][3]);  // lambda decreases as sigma rises
}
#endif
