#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fisherlat/geometry.hpp"
#include "fisherlat/posterior.hpp"
#include "fisherlat/potential.hpp"

namespace fisherlat {

// How the posterior is obtained for the oracle system.
enum class OracleRoute { features, bayes, exact };

struct GeodesicRequest {
    Point2 a, b;
    int n_points = 33;
};

struct ExperimentConfig {
    System system = System::oracle;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 0;  // 0 keeps the environment setting

    ParamGrid grid;

    // sampling
    int replicas = 64;
    SamplerSpec sampler;
    OracleRoute oracle_route = OracleRoute::exact;
    long long oracle_samples = 8;  // N per source cell for the bayes/exact routes
    std::string external_features;  // CSV path for system = external
    int dump_pgm = 0;               // dump this many raw states for inspection

    // posterior
    double n_eff = 0.0;  // <= 0 -> auto
    Weighting weighting = Weighting::inverse_variance;

    TrainConfig train;

    // geometry
    HessianMode hessian_mode = HessianMode::analytic;
    double hessian_h = 0.0;  // <= 0 -> half the min grid spacing (finite-diff mode)
    double floor_scale = 1e-6;
    double phase_quantile = 0.95;
    std::vector<GeodesicRequest> geodesics;
    GeodesicConfig geodesic_cfg;

    bool run_groundtruth = true;
    bool run_evaluate = true;
    bool run_plot = true;

    static ExperimentConfig from_json_file(const std::string& path);
    std::string to_json() const;
    void validate() const;
};

enum class Stage { sample, posterior, train, metric, geodesic, groundtruth, evaluate, plot };
Stage stage_from_string(const std::string& s);

struct Artifact {
    std::string name;
    std::string path;
    std::string fnv64;
};

struct PipelineResult {
    std::vector<Artifact> artifacts;
    std::string manifest_path;
};

// Runs all applicable stages in order; every stage reads its inputs from the
// files written by the previous one, so single stages can be rerun in
// isolation with identical results.
PipelineResult run_pipeline(const ExperimentConfig& cfg);
void run_stage(const ExperimentConfig& cfg, Stage stage);

// Writes <out>/manifest.json from the artifacts currently present.
PipelineResult write_manifest(const ExperimentConfig& cfg);

// Table-1-style evaluation report; returns the JSON text it wrote.
std::string evaluate_artifacts(const ExperimentConfig& cfg);

}  // namespace fisherlat
