#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "toricdm/diffmap.hpp"
#include "toricdm/ensemble.hpp"
#include "toricdm/similarity.hpp"
#include "toricdm/vmc.hpp"

namespace toricdm {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- configuration ---------------------------------------------------------

// Seed stage: repeated VMC optimization from random initializations, labeled
// post hoc by the signs of the averaged Wilson loops. The annealed
// learning-rate schedule is what lets runs escape the frozen-excitation
// local minima of the ansatz.
struct SeedStageConfig {
    int n_inits = 12;
    double noise_scale = 0.9;
    double energy_cut_per_cell = -0.99;  // seed accepted when E <= cut * (j_p + j_s) * lx*ly at h = 0
    double warm_step = 0.05;             // field step for warm-started seeds at h > 0
    std::vector<double> stage_learning_rates = {0.05, 0.015, 0.004};
    int stage_iterations = 250;
};

struct SimilarityConfig {
    Measure measure = Measure::n;
    int n_g = 1000;        // greedy string-search moves (measure str)
    double fraction = 0.4; // replacement fraction (measure mixed)
};

struct DiffusionConfig {
    double eps_min = 1e-3;
    double eps_max = 1.0;
    int eps_count = 30;
    double eps_star = 0.05;  // fixed epsilon for the per-field spectra table
    double near_one_delta = 1e-3;
    double gap_threshold = 0.1;
    int min_persist = 3;
    int embed_dims = 3;
};

struct KmeansConfig {
    int k = 4;
    int n_restarts = 32;
    int max_iterations = 300;
    double tol = 1e-6;
};

struct FidelityConfig {
    double h_min = 0.40;
    double h_max = 0.70;
    double dh = 0.025;
};

struct ExperimentConfig {
    int schema_version = 1;
    int lx = 3;
    int ly = 3;
    ToricParams hamiltonian;  // h is the run's field value
    double temperature = 0.1;
    SeedStageConfig seeds;
    SamplerConfig sampler;        // shared by energy estimates everywhere
    OptimizerConfig optimizer;    // warm-start and fidelity optimizations
    int chains_per_seed = 2;
    int ensemble_steps = 250;
    int ensemble_keep = 250;
    double proposal_p_m = 0.3;
    double proposal_xi = 0.2;
    int thin = 4;
    SimilarityConfig similarity;
    DiffusionConfig diffusion;
    KmeansConfig kmeans;
    std::vector<double> field_grid;  // for the sweep verb
    FidelityConfig fidelity;
    std::uint64_t master_seed = 20240815;
    std::string output_dir = "out";
};

json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const json& j);
// empty when valid; otherwise human-readable problems
std::vector<std::string> validate_config(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// ---- manifest ---------------------------------------------------------------

struct StageRecord {
    std::string config_hash;
    double wall_clock_s = 0.0;
    std::map<std::string, std::string> artifacts;  // path -> content digest
    bool cached = false;
};

struct RunManifest {
    std::string config_hash;
    std::string version;
    std::map<std::string, StageRecord> stages;
    std::vector<std::string> warnings;
    json summary;

    json to_json() const;
    static RunManifest from_json(const json& j);
    void save(const fs::path& path) const;
};

// ---- stage outputs ----------------------------------------------------------

struct SectorSeed {
    RbmParams params;
    double energy_mean = 0.0;
    double energy_stderr = 0.0;
    double w1 = 0.0, w2 = 0.0;
    int quadrant = -1;  // (w1<0,w2<0)->0, (w1<0,w2>=0)->1, (w1>=0,w2<0)->2, (w1>=0,w2>=0)->3
    int init_index = -1;
};

int wilson_quadrant(double w1, double w2);

struct PipelineResult {
    RunManifest manifest;
    int n_members = 0;
    int detected_sectors = 0;
    SweepResult sweep;
    std::optional<DiffusionResult> at_eps_star;
    std::vector<int> cluster_labels;                    // k-means at the representative epsilon
    std::vector<std::pair<double, double>> member_wilson;
    std::vector<double> member_energy;
};

struct FieldPointSummary {
    double h = 0.0;
    int detected_sectors = 0;
    bool fourfold_at_eps_star = false;  // 4 near-1 eigenvalues with gap at eps_star
    std::vector<double> eigenvalues_at_eps_star;
};

struct FieldSweepResult {
    RunManifest manifest;
    std::vector<FieldPointSummary> points;
    std::vector<FidelityPoint> fidelity;
};

// ---- pipeline ---------------------------------------------------------------

// Stages write their artifacts under out_dir and are skipped on re-runs when
// the artifacts exist and the recorded stage hash matches (unless the stage
// name or "all" is in `force`).
class Pipeline {
public:
    Pipeline(ExperimentConfig cfg, std::set<std::string> force = {});

    const ExperimentConfig& config() const { return cfg_; }
    const fs::path& out_dir() const { return out_; }
    RunManifest& manifest() { return manifest_; }

    // h = 0 seed search (random initializations)
    std::vector<SectorSeed> stage_seeds();
    // warm-started seeds at field h (chains from the h = 0 seeds)
    std::vector<SectorSeed> stage_warm_seeds(double h);
    Ensemble stage_ensemble(double temperature, double h, const std::vector<SectorSeed>& seeds);
    // thinned member parameters (every cfg.thin-th member)
    std::vector<int> thinned_indices(const Ensemble& ens) const;
    SimilarityMatrix stage_similarity(double temperature, double h, Measure measure,
                                      const std::vector<RbmParams>& members);
    std::vector<FidelityPoint> stage_fidelity(const std::vector<SectorSeed>& h0_seeds);

    // single experiment at (cfg.temperature, cfg.hamiltonian.h)
    PipelineResult run();
    // per-h experiments over cfg.field_grid plus the fidelity table
    FieldSweepResult run_field_sweep();

    void save_manifest();

private:
    PipelineResult run_at(double temperature, double h, const std::vector<SectorSeed>& seeds);
    std::vector<SectorSeed> warm_chain_to(double h);
    SectorSeed measure_seed(const RbmParams& p, const McEstimate& e, int init_index) const;
    bool stage_is_cached(const std::string& name, const std::string& hash,
                         const std::vector<fs::path>& artifacts) const;
    void record_stage(const std::string& name, const std::string& hash, double seconds,
                      const std::vector<fs::path>& artifacts, bool cached);

    ExperimentConfig cfg_;
    fs::path out_;
    std::set<std::string> force_;
    Lattice lat_;
    RunManifest manifest_;
    std::map<std::string, std::vector<SectorSeed>> warm_cache_;  // by field tag
};

std::string field_tag(double temperature, double h);

// convenience wrappers used by the CLI
PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::set<std::string>& force = {});
FieldSweepResult run_field_sweep(const ExperimentConfig& cfg, const std::set<std::string>& force = {});
// re-export CSV tables from persisted artifacts without recomputation
void emit_tables(const fs::path& out_dir);

}  // namespace toricdm
