#include "toricdm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "toricdm/io.hpp"
#include "toricdm/rng.hpp"

namespace toricdm {

namespace {
constexpr const char* kVersion = "0.1.0";

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string gfmt(double v) { return io::format_double(v); }

json sampler_to_json(const SamplerConfig& sc) {
    return json{{"n_chains", sc.n_chains},
                {"n_steps", sc.n_steps},
                {"n_burn", sc.n_burn},
                {"p_spin_flip", sc.p_spin_flip}};
}
SamplerConfig sampler_from_json(const json& j, SamplerConfig d) {
    d.n_chains = j.value("n_chains", d.n_chains);
    d.n_steps = j.value("n_steps", d.n_steps);
    d.n_burn = j.value("n_burn", d.n_burn);
    d.p_spin_flip = j.value("p_spin_flip", d.p_spin_flip);
    return d;
}

json optimizer_to_json(const OptimizerConfig& oc) {
    return json{{"learning_rate", oc.learning_rate}, {"beta1", oc.beta1},
                {"beta2", oc.beta2},                 {"epsilon", oc.epsilon},
                {"n_iterations", oc.n_iterations},   {"plateau_window", oc.plateau_window},
                {"plateau_tol", oc.plateau_tol}};
}
OptimizerConfig optimizer_from_json(const json& j, OptimizerConfig d) {
    d.learning_rate = j.value("learning_rate", d.learning_rate);
    d.beta1 = j.value("beta1", d.beta1);
    d.beta2 = j.value("beta2", d.beta2);
    d.epsilon = j.value("epsilon", d.epsilon);
    d.n_iterations = j.value("n_iterations", d.n_iterations);
    d.plateau_window = j.value("plateau_window", d.plateau_window);
    d.plateau_tol = j.value("plateau_tol", d.plateau_tol);
    return d;
}
}  // namespace

std::string field_tag(double temperature, double h) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "T%g_h%g", temperature, h);
    return std::string(buf);
}

int wilson_quadrant(double w1, double w2) { return (w1 >= 0 ? 2 : 0) + (w2 >= 0 ? 1 : 0); }

// ---- config (de)serialization ------------------------------------------------

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["schema_version"] = c.schema_version;
    j["lattice"] = {{"lx", c.lx}, {"ly", c.ly}};
    j["hamiltonian"] = {{"j_p", c.hamiltonian.j_p}, {"j_s", c.hamiltonian.j_s}, {"h", c.hamiltonian.h}};
    j["temperature"] = c.temperature;
    j["seeds"] = {{"n_inits", c.seeds.n_inits},
                  {"noise_scale", c.seeds.noise_scale},
                  {"energy_cut_per_cell", c.seeds.energy_cut_per_cell},
                  {"warm_step", c.seeds.warm_step},
                  {"stage_learning_rates", c.seeds.stage_learning_rates},
                  {"stage_iterations", c.seeds.stage_iterations}};
    j["sampler"] = sampler_to_json(c.sampler);
    j["optimizer"] = optimizer_to_json(c.optimizer);
    j["ensemble"] = {{"chains_per_seed", c.chains_per_seed},
                     {"n_steps", c.ensemble_steps},
                     {"m_keep", c.ensemble_keep},
                     {"p_m", c.proposal_p_m},
                     {"xi", c.proposal_xi}};
    j["thin"] = c.thin;
    j["similarity"] = {{"measure", measure_name(c.similarity.measure)},
                       {"n_g", c.similarity.n_g},
                       {"fraction", c.similarity.fraction}};
    j["diffusion"] = {{"eps_min", c.diffusion.eps_min},
                      {"eps_max", c.diffusion.eps_max},
                      {"eps_count", c.diffusion.eps_count},
                      {"eps_star", c.diffusion.eps_star},
                      {"near_one_delta", c.diffusion.near_one_delta},
                      {"gap_threshold", c.diffusion.gap_threshold},
                      {"min_persist", c.diffusion.min_persist},
                      {"embed_dims", c.diffusion.embed_dims}};
    j["kmeans"] = {{"k", c.kmeans.k},
                   {"n_restarts", c.kmeans.n_restarts},
                   {"max_iterations", c.kmeans.max_iterations},
                   {"tol", c.kmeans.tol}};
    j["field_grid"] = c.field_grid;
    j["fidelity"] = {{"h_min", c.fidelity.h_min}, {"h_max", c.fidelity.h_max}, {"dh", c.fidelity.dh}};
    j["master_seed"] = c.master_seed;
    j["output_dir"] = c.output_dir;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.schema_version = j.value("schema_version", c.schema_version);
    if (j.contains("lattice")) {
        c.lx = j["lattice"].value("lx", c.lx);
        c.ly = j["lattice"].value("ly", c.ly);
    }
    if (j.contains("hamiltonian")) {
        c.hamiltonian.j_p = j["hamiltonian"].value("j_p", c.hamiltonian.j_p);
        c.hamiltonian.j_s = j["hamiltonian"].value("j_s", c.hamiltonian.j_s);
        c.hamiltonian.h = j["hamiltonian"].value("h", c.hamiltonian.h);
    }
    c.temperature = j.value("temperature", c.temperature);
    if (j.contains("seeds")) {
        const json& s = j["seeds"];
        c.seeds.n_inits = s.value("n_inits", c.seeds.n_inits);
        c.seeds.noise_scale = s.value("noise_scale", c.seeds.noise_scale);
        c.seeds.energy_cut_per_cell = s.value("energy_cut_per_cell", c.seeds.energy_cut_per_cell);
        c.seeds.warm_step = s.value("warm_step", c.seeds.warm_step);
        if (s.contains("stage_learning_rates"))
            c.seeds.stage_learning_rates = s["stage_learning_rates"].get<std::vector<double>>();
        c.seeds.stage_iterations = s.value("stage_iterations", c.seeds.stage_iterations);
    }
    if (j.contains("sampler")) c.sampler = sampler_from_json(j["sampler"], c.sampler);
    if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j["optimizer"], c.optimizer);
    if (j.contains("ensemble")) {
        const json& e = j["ensemble"];
        c.chains_per_seed = e.value("chains_per_seed", c.chains_per_seed);
        c.ensemble_steps = e.value("n_steps", c.ensemble_steps);
        c.ensemble_keep = e.value("m_keep", c.ensemble_keep);
        c.proposal_p_m = e.value("p_m", c.proposal_p_m);
        c.proposal_xi = e.value("xi", c.proposal_xi);
    }
    c.thin = j.value("thin", c.thin);
    if (j.contains("similarity")) {
        const json& s = j["similarity"];
        if (s.contains("measure")) c.similarity.measure = measure_from_name(s["measure"].get<std::string>());
        c.similarity.n_g = s.value("n_g", c.similarity.n_g);
        c.similarity.fraction = s.value("fraction", c.similarity.fraction);
    }
    if (j.contains("diffusion")) {
        const json& d = j["diffusion"];
        c.diffusion.eps_min = d.value("eps_min", c.diffusion.eps_min);
        c.diffusion.eps_max = d.value("eps_max", c.diffusion.eps_max);
        c.diffusion.eps_count = d.value("eps_count", c.diffusion.eps_count);
        c.diffusion.eps_star = d.value("eps_star", c.diffusion.eps_star);
        c.diffusion.near_one_delta = d.value("near_one_delta", c.diffusion.near_one_delta);
        c.diffusion.gap_threshold = d.value("gap_threshold", c.diffusion.gap_threshold);
        c.diffusion.min_persist = d.value("min_persist", c.diffusion.min_persist);
        c.diffusion.embed_dims = d.value("embed_dims", c.diffusion.embed_dims);
    }
    if (j.contains("kmeans")) {
        const json& k = j["kmeans"];
        c.kmeans.k = k.value("k", c.kmeans.k);
        c.kmeans.n_restarts = k.value("n_restarts", c.kmeans.n_restarts);
        c.kmeans.max_iterations = k.value("max_iterations", c.kmeans.max_iterations);
        c.kmeans.tol = k.value("tol", c.kmeans.tol);
    }
    if (j.contains("field_grid")) c.field_grid = j["field_grid"].get<std::vector<double>>();
    if (j.contains("fidelity")) {
        const json& f = j["fidelity"];
        c.fidelity.h_min = f.value("h_min", c.fidelity.h_min);
        c.fidelity.h_max = f.value("h_max", c.fidelity.h_max);
        c.fidelity.dh = f.value("dh", c.fidelity.dh);
    }
    c.master_seed = j.value("master_seed", c.master_seed);
    c.output_dir = j.value("output_dir", c.output_dir);
    return c;
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
    std::vector<std::string> errs;
    if (c.schema_version != 1) errs.push_back("schema_version must be 1");
    if (c.lx < 2 || c.ly < 2) errs.push_back("lattice: lx and ly must be >= 2");
    if (2 * c.lx * c.ly > kEnumerationBudget)
        errs.push_back("lattice too large for the exact-enumeration budget (n_spins <= 20)");
    if (!(c.temperature > 0)) errs.push_back("temperature must be > 0");
    if (c.seeds.n_inits < 1) errs.push_back("seeds.n_inits must be >= 1");
    if (!(c.seeds.noise_scale >= 0)) errs.push_back("seeds.noise_scale must be >= 0");
    if (!(c.seeds.warm_step > 0)) errs.push_back("seeds.warm_step must be > 0");
    if (c.seeds.stage_learning_rates.empty()) errs.push_back("seeds.stage_learning_rates must be non-empty");
    if (c.sampler.n_chains < 1) errs.push_back("sampler.n_chains must be >= 1");
    if (c.sampler.n_burn >= c.sampler.n_steps) errs.push_back("sampler.n_burn must be < n_steps");
    if (!(c.sampler.p_spin_flip > 0 && c.sampler.p_spin_flip < 1))
        errs.push_back("sampler.p_spin_flip must be in (0,1)");
    if (!(c.optimizer.learning_rate > 0)) errs.push_back("optimizer.learning_rate must be > 0");
    if (c.chains_per_seed < 1) errs.push_back("ensemble.chains_per_seed must be >= 1");
    if (c.ensemble_keep > c.ensemble_steps) errs.push_back("ensemble.m_keep must be <= n_steps");
    if (c.proposal_p_m < 0 || c.proposal_p_m > 1) errs.push_back("ensemble.p_m must be in [0,1]");
    if (!(c.proposal_xi > 0)) errs.push_back("ensemble.xi must be > 0");
    if (c.thin < 1) errs.push_back("thin must be >= 1");
    if (c.similarity.n_g < 0) errs.push_back("similarity.n_g must be >= 0");
    if (c.similarity.fraction < 0 || c.similarity.fraction > 1)
        errs.push_back("similarity.fraction must be in [0,1]");
    if (!(c.diffusion.eps_min > 0 && c.diffusion.eps_max > c.diffusion.eps_min))
        errs.push_back("diffusion: need 0 < eps_min < eps_max");
    if (c.diffusion.eps_count < 2) errs.push_back("diffusion.eps_count must be >= 2");
    if (!(c.diffusion.eps_star > 0)) errs.push_back("diffusion.eps_star must be > 0");
    if (c.diffusion.min_persist < 1) errs.push_back("diffusion.min_persist must be >= 1");
    if (c.kmeans.k < 1) errs.push_back("kmeans.k must be >= 1");
    if (c.kmeans.n_restarts < 1) errs.push_back("kmeans.n_restarts must be >= 1");
    for (std::size_t i = 1; i < c.field_grid.size(); ++i)
        if (c.field_grid[i] <= c.field_grid[i - 1]) {
            errs.push_back("field_grid must be strictly increasing");
            break;
        }
    if (!(c.fidelity.dh > 0)) errs.push_back("fidelity.dh must be > 0");
    if (c.fidelity.h_max < c.fidelity.h_min) errs.push_back("fidelity: h_max must be >= h_min");
    return errs;
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = config_to_json(cfg);
    j.erase("output_dir");  // location does not alter results
    return io::fnv1a64_hex(j.dump());
}

// ---- manifest ------------------------------------------------------------------

json RunManifest::to_json() const {
    json stages_j = json::object();
    for (const auto& [name, rec] : stages) {
        stages_j[name] = {{"config_hash", rec.config_hash},
                          {"wall_clock_s", rec.wall_clock_s},
                          {"artifacts", rec.artifacts},
                          {"cached", rec.cached}};
    }
    return json{{"config_hash", config_hash},
                {"version", version},
                {"stages", stages_j},
                {"warnings", warnings},
                {"summary", summary}};
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.config_hash = j.value("config_hash", "");
    m.version = j.value("version", "");
    if (j.contains("stages"))
        for (auto it = j["stages"].begin(); it != j["stages"].end(); ++it) {
            StageRecord rec;
            rec.config_hash = it.value().value("config_hash", "");
            rec.wall_clock_s = it.value().value("wall_clock_s", 0.0);
            rec.cached = it.value().value("cached", false);
            if (it.value().contains("artifacts"))
                rec.artifacts = it.value()["artifacts"].get<std::map<std::string, std::string>>();
            m.stages[it.key()] = rec;
        }
    if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
    if (j.contains("summary")) m.summary = j["summary"];
    return m;
}

void RunManifest::save(const fs::path& path) const { io::write_text(path, to_json().dump(2) + "\n"); }

// ---- pipeline --------------------------------------------------------------------

Pipeline::Pipeline(ExperimentConfig cfg, std::set<std::string> force)
    : cfg_(std::move(cfg)), out_(cfg_.output_dir), force_(std::move(force)), lat_(cfg_.lx, cfg_.ly) {
    auto errs = validate_config(cfg_);
    if (!errs.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw std::invalid_argument(msg);
    }
    fs::create_directories(out_);
    fs::path mpath = out_ / "manifest.json";
    if (fs::exists(mpath)) {
        try {
            manifest_ = RunManifest::from_json(json::parse(io::read_text(mpath)));
        } catch (const std::exception&) {
            manifest_ = RunManifest{};
        }
    }
    manifest_.config_hash = config_hash(cfg_);
    manifest_.version = kVersion;
    io::write_text(out_ / "config.json", config_to_json(cfg_).dump(2) + "\n");
}

void Pipeline::save_manifest() { manifest_.save(out_ / "manifest.json"); }

bool Pipeline::stage_is_cached(const std::string& name, const std::string& hash,
                               const std::vector<fs::path>& artifacts) const {
    if (force_.count("all") || force_.count(name)) return false;
    auto it = manifest_.stages.find(name);
    if (it == manifest_.stages.end() || it->second.config_hash != hash) return false;
    for (const auto& p : artifacts)
        if (!fs::exists(p)) return false;
    return true;
}

void Pipeline::record_stage(const std::string& name, const std::string& hash, double seconds,
                            const std::vector<fs::path>& artifacts, bool cached) {
    StageRecord rec;
    rec.config_hash = hash;
    rec.wall_clock_s = seconds;
    rec.cached = cached;
    for (const auto& p : artifacts) rec.artifacts[fs::relative(p, out_).string()] = io::file_digest(p);
    manifest_.stages[name] = rec;
    save_manifest();
}

SectorSeed Pipeline::measure_seed(const RbmParams& p, const McEstimate& e, int init_index) const {
    SectorSeed s;
    s.params = p;
    s.energy_mean = e.mean;
    s.energy_stderr = e.std_error;
    auto [w1, w2] = averaged_wilson_exact(lat_, p);
    s.w1 = w1;
    s.w2 = w2;
    s.quadrant = wilson_quadrant(w1, w2);
    s.init_index = init_index;
    return s;
}

namespace {
json seed_to_json(const SectorSeed& s, const std::string& file) {
    return json{{"file", file},         {"energy_mean", s.energy_mean},
                {"energy_stderr", s.energy_stderr}, {"w1", s.w1},
                {"w2", s.w2},           {"quadrant", s.quadrant},
                {"init_index", s.init_index}};
}

std::vector<SectorSeed> load_seed_set(const fs::path& dir, const json& meta) {
    std::vector<SectorSeed> out;
    for (const auto& sj : meta.at("seeds")) {
        SectorSeed s;
        s.params = io::load_params_binary(dir / sj.at("file").get<std::string>());
        s.energy_mean = sj.at("energy_mean").get<double>();
        s.energy_stderr = sj.at("energy_stderr").get<double>();
        s.w1 = sj.at("w1").get<double>();
        s.w2 = sj.at("w2").get<double>();
        s.quadrant = sj.at("quadrant").get<int>();
        s.init_index = sj.at("init_index").get<int>();
        out.push_back(std::move(s));
    }
    return out;
}
}  // namespace

std::vector<SectorSeed> Pipeline::stage_seeds() {
    const std::string name = "seeds";
    json hash_src = {{"lattice", {cfg_.lx, cfg_.ly}},
                     {"j", {cfg_.hamiltonian.j_p, cfg_.hamiltonian.j_s}},
                     {"seeds", config_to_json(cfg_)["seeds"]},
                     {"sampler", sampler_to_json(cfg_.sampler)},
                     {"master_seed", cfg_.master_seed}};
    std::string hash = io::fnv1a64_hex(hash_src.dump());
    fs::path dir = out_ / "seeds";
    fs::path meta_path = dir / "seeds.json";

    if (stage_is_cached(name, hash, {meta_path})) {
        json meta = json::parse(io::read_text(meta_path));
        auto seeds = load_seed_set(dir, meta);
        if (!seeds.empty()) return seeds;
    }

    double t0 = now_seconds();
    ToricParams tp = cfg_.hamiltonian;
    tp.h = 0.0;  // seeds are the zero-field sector representatives
    double cut = cfg_.seeds.energy_cut_per_cell * (tp.j_p + tp.j_s) * cfg_.lx * cfg_.ly;

    std::map<int, SectorSeed> best;  // quadrant -> best seed
    std::vector<fs::path> artifacts;
    for (int init = 0; init < cfg_.seeds.n_inits; ++init) {
        RbmParams p = random_params(lat_, derive_seed(cfg_.master_seed, {0x7365656431ULL, (std::uint64_t)init}),
                                    cfg_.seeds.noise_scale);
        McEstimate last_e;
        io::CsvWriter trace;
        trace.header({"iteration", "value", "std_error"});
        int iter_base = 0;
        for (std::size_t stage = 0; stage < cfg_.seeds.stage_learning_rates.size(); ++stage) {
            OptimizerConfig oc;
            oc.learning_rate = cfg_.seeds.stage_learning_rates[stage];
            oc.n_iterations = cfg_.seeds.stage_iterations;
            oc.plateau_window = 2 * cfg_.seeds.stage_iterations;  // run each stage to completion
            SamplerConfig sc = cfg_.sampler;
            sc.seed = derive_seed(cfg_.master_seed, {0x7365656432ULL, (std::uint64_t)init, stage});
            OptimizeResult r = optimize(lat_, p, tp, sc, oc);
            p = r.params;
            for (std::size_t i = 0; i < r.energy_trace.size(); ++i)
                trace.row({std::to_string(iter_base + (int)i), gfmt(r.energy_trace[i].mean),
                           gfmt(r.energy_trace[i].std_error)});
            iter_base += (int)r.energy_trace.size();
            last_e = r.energy_trace.back();
        }
        fs::path trace_path = dir / ("trace_init" + std::to_string(init) + ".csv");
        trace.save(trace_path);
        artifacts.push_back(trace_path);

        SectorSeed s = measure_seed(p, last_e, init);
        if (s.energy_mean <= cut) {
            auto it = best.find(s.quadrant);
            if (it == best.end() || s.energy_mean < it->second.energy_mean) best[s.quadrant] = s;
        }
        if (best.size() == 4) break;  // all sectors represented
    }

    if (best.size() < 4)
        manifest_.warnings.push_back("seed stage found only " + std::to_string(best.size()) +
                                     " of 4 Wilson quadrants after " + std::to_string(cfg_.seeds.n_inits) +
                                     " initializations");

    std::vector<SectorSeed> seeds;
    json meta_seeds = json::array();
    for (const auto& [quad, s] : best) {
        std::string file = "seed_q" + std::to_string(quad) + ".rbm";
        io::save_params_binary(dir / file, s.params);
        artifacts.push_back(dir / file);
        meta_seeds.push_back(seed_to_json(s, file));
        seeds.push_back(s);
    }
    json meta = {{"seeds", meta_seeds}, {"energy_cut", cut}};
    io::write_text(meta_path, meta.dump(2) + "\n");
    artifacts.push_back(meta_path);
    record_stage(name, hash, now_seconds() - t0, artifacts, false);
    if (seeds.empty()) throw std::runtime_error("seed stage produced no usable sector seeds");
    return seeds;
}

std::vector<SectorSeed> Pipeline::stage_warm_seeds(double h) {
    if (h == 0.0) return stage_seeds();
    return warm_chain_to(h);
}

std::vector<SectorSeed> Pipeline::warm_chain_to(double h_target) {
    char tagbuf[32];
    auto htag = [&](double h) {
        std::snprintf(tagbuf, sizeof(tagbuf), "h%g", h);
        return std::string(tagbuf);
    };

    // ladder of field values from warm_step up to h_target
    std::vector<double> ladder;
    for (double h = cfg_.seeds.warm_step; h < h_target - 1e-12; h += cfg_.seeds.warm_step)
        ladder.push_back(h);
    ladder.push_back(h_target);

    // resume from the highest already-computed ladder point
    std::vector<SectorSeed> current;
    int start = 0;
    for (int i = static_cast<int>(ladder.size()) - 1; i >= 0; --i) {
        auto it = warm_cache_.find(htag(ladder[i]));
        if (it != warm_cache_.end()) {
            current = it->second;
            start = i + 1;
            break;
        }
    }
    if (current.empty() && start == 0) {
        // try disk for every ladder point, highest first
        for (int i = static_cast<int>(ladder.size()) - 1; i >= 0; --i) {
            std::string name = "warm_" + htag(ladder[i]);
            fs::path dir = out_ / "warm" / htag(ladder[i]);
            json hash_src = {{"h", ladder[i]},
                             {"optimizer", optimizer_to_json(cfg_.optimizer)},
                             {"sampler", sampler_to_json(cfg_.sampler)},
                             {"warm_step", cfg_.seeds.warm_step},
                             {"master_seed", cfg_.master_seed}};
            std::string hash = io::fnv1a64_hex(hash_src.dump());
            if (stage_is_cached(name, hash, {dir / "warm.json"})) {
                json meta = json::parse(io::read_text(dir / "warm.json"));
                current = load_seed_set(dir, meta);
                warm_cache_[htag(ladder[i])] = current;
                start = i + 1;
                break;
            }
        }
    }
    if (current.empty() && start == 0) current = stage_seeds();

    for (int i = start; i < static_cast<int>(ladder.size()); ++i) {
        double h = ladder[i];
        ToricParams tp = cfg_.hamiltonian;
        tp.h = h;
        double t0 = now_seconds();
        std::vector<SectorSeed> next;
        for (std::size_t si = 0; si < current.size(); ++si) {
            SamplerConfig sc = cfg_.sampler;
            sc.seed = derive_seed(cfg_.master_seed, {0x7761726dULL, (std::uint64_t)i, si});
            OptimizeResult r = optimize(lat_, current[si].params, tp, sc, cfg_.optimizer);
            SectorSeed s = measure_seed(r.params, r.energy_trace.back(), current[si].init_index);
            s.quadrant = current[si].quadrant;  // provenance label from h = 0
            next.push_back(std::move(s));
        }
        current = next;
        warm_cache_[htag(h)] = current;

        std::string name = "warm_" + htag(h);
        fs::path dir = out_ / "warm" / htag(h);
        json hash_src = {{"h", h},
                         {"optimizer", optimizer_to_json(cfg_.optimizer)},
                         {"sampler", sampler_to_json(cfg_.sampler)},
                         {"warm_step", cfg_.seeds.warm_step},
                         {"master_seed", cfg_.master_seed}};
        std::string hash = io::fnv1a64_hex(hash_src.dump());
        std::vector<fs::path> artifacts;
        json meta_seeds = json::array();
        for (const auto& s : current) {
            std::string file = "seed_q" + std::to_string(s.quadrant) + ".rbm";
            io::save_params_binary(dir / file, s.params);
            artifacts.push_back(dir / file);
            meta_seeds.push_back(seed_to_json(s, file));
        }
        io::write_text(dir / "warm.json", json{{"seeds", meta_seeds}, {"h", h}}.dump(2) + "\n");
        artifacts.push_back(dir / "warm.json");
        record_stage(name, hash, now_seconds() - t0, artifacts, false);
    }
    return current;
}

Ensemble Pipeline::stage_ensemble(double temperature, double h, const std::vector<SectorSeed>& seeds) {
    std::string tag = field_tag(temperature, h);
    std::string name = "ens_" + tag;
    json hash_src = {{"T", temperature},
                     {"h", h},
                     {"j", {cfg_.hamiltonian.j_p, cfg_.hamiltonian.j_s}},
                     {"ensemble", config_to_json(cfg_)["ensemble"]},
                     {"sampler", sampler_to_json(cfg_.sampler)},
                     {"n_seeds", seeds.size()},
                     {"master_seed", cfg_.master_seed}};
    std::string hash = io::fnv1a64_hex(hash_src.dump());
    fs::path dir = out_ / "ens" / tag;

    if (stage_is_cached(name, hash, {dir / "metadata.json", dir / "manifest.csv"}))
        return io::load_ensemble(dir);

    double t0 = now_seconds();
    ToricParams tp = cfg_.hamiltonian;
    tp.h = h;
    EnsembleConfig ec;
    ec.temperature = temperature;
    ec.k_chains = cfg_.chains_per_seed * static_cast<int>(seeds.size());
    ec.n_steps = cfg_.ensemble_steps;
    ec.m_keep = cfg_.ensemble_keep;
    ec.p_m = cfg_.proposal_p_m;
    ec.xi = cfg_.proposal_xi;
    ec.seed = derive_seed(cfg_.master_seed, {0x656e7367ULL, std::hash<std::string>{}(tag)});

    std::vector<RbmParams> seed_params;
    for (const auto& s : seeds) seed_params.push_back(s.params);
    SamplerConfig sc = cfg_.sampler;
    Ensemble ens = generate(lat_, tp, ec, seed_params, sc);

    json seed_prov = json::array();
    for (const auto& s : seeds)
        seed_prov.push_back({{"quadrant", s.quadrant}, {"energy_mean", s.energy_mean},
                             {"w1", s.w1},             {"w2", s.w2}});
    json meta = {{"lattice", {{"lx", cfg_.lx}, {"ly", cfg_.ly}}},
                 {"hamiltonian", {{"j_p", tp.j_p}, {"j_s", tp.j_s}, {"h", tp.h}}},
                 {"ensemble",
                  {{"temperature", ec.temperature},
                   {"k_chains", ec.k_chains},
                   {"n_steps", ec.n_steps},
                   {"m_keep", ec.m_keep},
                   {"p_m", ec.p_m},
                   {"xi", ec.xi}}},
                 {"seed_provenance", seed_prov}};
    io::save_ensemble(dir, ens, meta);
    std::vector<fs::path> artifacts = {dir / "metadata.json", dir / "manifest.csv"};
    record_stage(name, hash, now_seconds() - t0, artifacts, false);
    return ens;
}

std::vector<int> Pipeline::thinned_indices(const Ensemble& ens) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < ens.members.size(); i += cfg_.thin) idx.push_back(static_cast<int>(i));
    return idx;
}

SimilarityMatrix Pipeline::stage_similarity(double temperature, double h, Measure measure,
                                            const std::vector<RbmParams>& members) {
    std::string tag = field_tag(temperature, h) + "_" + measure_name(measure);
    std::string name = "sim_" + tag;
    json hash_src = {{"tag", tag},
                     {"m", members.size()},
                     {"n_g", cfg_.similarity.n_g},
                     {"fraction", cfg_.similarity.fraction},
                     {"thin", cfg_.thin},
                     {"master_seed", cfg_.master_seed}};
    std::string hash = io::fnv1a64_hex(hash_src.dump());
    fs::path stem = out_ / "sim" / tag;

    if (stage_is_cached(name, hash, {fs::path(stem).concat(".json"), fs::path(stem).concat(".bin")}))
        return io::load_similarity(stem);

    double t0 = now_seconds();
    SimilarityMatrix S;
    switch (measure) {
        case Measure::n:
            S = similarity_matrix_network(lat_, members);
            break;
        case Measure::q:
            S = similarity_matrix_overlap(lat_, members);
            break;
        case Measure::eu:
            S = similarity_matrix_euclidean(members);
            break;
        case Measure::str:
            S = similarity_matrix_string(lat_, members, cfg_.similarity.n_g,
                                         derive_seed(cfg_.master_seed, {0x73747267ULL}));
            break;
        case Measure::mixed: {
            SimilarityMatrix Sn = stage_similarity(temperature, h, Measure::n, members);
            SimilarityMatrix Sq = stage_similarity(temperature, h, Measure::q, members);
            S = similarity_matrix_mixed(Sn, Sq, cfg_.similarity.fraction,
                                        derive_seed(cfg_.master_seed, {0x6d697867ULL}));
            break;
        }
    }
    io::save_similarity(stem, S);
    record_stage(name, hash, now_seconds() - t0,
                 {fs::path(stem).concat(".json"), fs::path(stem).concat(".bin")}, false);
    return S;
}

std::vector<FidelityPoint> Pipeline::stage_fidelity(const std::vector<SectorSeed>& h0_seeds) {
    const std::string name = "fidelity";
    json hash_src = {{"fidelity", config_to_json(cfg_)["fidelity"]},
                     {"optimizer", optimizer_to_json(cfg_.optimizer)},
                     {"sampler", sampler_to_json(cfg_.sampler)},
                     {"master_seed", cfg_.master_seed}};
    std::string hash = io::fnv1a64_hex(hash_src.dump());
    fs::path path = out_ / "fidelity" / "fidelity.csv";

    if (stage_is_cached(name, hash, {path})) {
        // reparse the table
        std::vector<FidelityPoint> pts;
        std::string csv = io::read_text(path);
        std::size_t pos = csv.find('\n') + 1;  // skip header
        while (pos < csv.size()) {
            std::size_t nl = csv.find('\n', pos);
            if (nl == std::string::npos) nl = csv.size();
            std::string line = csv.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            FidelityPoint p{};
            std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
            p.h = std::stod(line.substr(0, c1));
            std::string f = line.substr(c1 + 1, c2 - c1 - 1);
            p.fidelity_to_next = f.empty() ? std::nan("") : std::stod(f);
            p.energy.mean = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
            p.energy.std_error = std::stod(line.substr(c3 + 1));
            pts.push_back(p);
        }
        if (!pts.empty()) return pts;
    }

    double t0 = now_seconds();
    std::vector<double> grid;
    for (double h = cfg_.fidelity.h_min; h <= cfg_.fidelity.h_max + 1e-12; h += cfg_.fidelity.dh)
        grid.push_back(h);
    // start the chain from the (-,-) representative when present
    const SectorSeed* init = &h0_seeds.front();
    for (const auto& s : h0_seeds)
        if (s.quadrant == 0) init = &s;
    SamplerConfig sc = cfg_.sampler;
    sc.seed = derive_seed(cfg_.master_seed, {0x66696473ULL});
    auto pts = fidelity_scan(lat_, cfg_.hamiltonian.j_p, cfg_.hamiltonian.j_s, grid, init->params, sc,
                             cfg_.optimizer);

    io::CsvWriter w;
    w.header({"h", "fidelity", "energy_mean", "energy_stderr"});
    for (const auto& p : pts)
        w.row({gfmt(p.h), std::isnan(p.fidelity_to_next) ? "" : gfmt(p.fidelity_to_next),
               gfmt(p.energy.mean), gfmt(p.energy.std_error)});
    w.save(path);
    record_stage(name, hash, now_seconds() - t0, {path}, false);
    return pts;
}

PipelineResult Pipeline::run_at(double temperature, double h, const std::vector<SectorSeed>& seeds) {
    std::string tag = field_tag(temperature, h);
    PipelineResult res;

    Ensemble ens = stage_ensemble(temperature, h, seeds);
    std::vector<int> thin_idx = thinned_indices(ens);
    std::vector<RbmParams> members;
    members.reserve(thin_idx.size());
    for (int i : thin_idx) members.push_back(ens.members[i].params);
    res.n_members = static_cast<int>(members.size());

    // per-member observables (exact at this lattice size)
    {
        double t0 = now_seconds();
        std::string name = "wilson_" + tag;
        fs::path path = out_ / "wilson" / (tag + ".csv");
        json hash_src = {{"tag", tag}, {"thin", cfg_.thin}, {"m", members.size()}};
        std::string hash = io::fnv1a64_hex(hash_src.dump());
        res.member_wilson.resize(members.size());
        res.member_energy.resize(members.size());
        bool cached = stage_is_cached(name, hash, {path});
        if (cached) {
            std::string csv = io::read_text(path);
            std::size_t pos = csv.find('\n') + 1;
            std::size_t row = 0;
            while (pos < csv.size() && row < members.size()) {
                std::size_t nl = csv.find('\n', pos);
                if (nl == std::string::npos) nl = csv.size();
                std::string line = csv.substr(pos, nl - pos);
                pos = nl + 1;
                std::vector<double> cells;
                std::size_t p0 = 0;
                while (p0 <= line.size()) {
                    std::size_t c = line.find(',', p0);
                    if (c == std::string::npos) c = line.size();
                    cells.push_back(std::stod(line.substr(p0, c - p0)));
                    p0 = c + 1;
                }
                res.member_wilson[row] = {cells[5], cells[6]};
                res.member_energy[row] = cells[3];
                ++row;
            }
        } else {
            io::CsvWriter w;
            w.header({"member_id", "chain_id", "step", "energy_mean", "energy_stderr", "w1_bar", "w2_bar"});
            for (std::size_t i = 0; i < members.size(); ++i) {
                const auto& mb = ens.members[thin_idx[i]];
                AmplitudeTable t = build_amplitude_table(lat_, members[i]);
                auto [w1, w2] = averaged_wilson_exact(lat_, t);
                res.member_wilson[i] = {w1, w2};
                res.member_energy[i] = mb.energy.mean;
                w.row({std::to_string(i), std::to_string(mb.chain_id), std::to_string(mb.step_index),
                       gfmt(mb.energy.mean), gfmt(mb.energy.std_error), gfmt(w1), gfmt(w2)});
            }
            w.save(path);
            record_stage(name, hash, now_seconds() - t0, {path}, false);
        }
    }

    SimilarityMatrix S = stage_similarity(temperature, h, cfg_.similarity.measure, members);

    // diffusion-map sweep and the fixed-epsilon spectrum
    std::string mtag = tag + "_" + measure_name(cfg_.similarity.measure);
    {
        double t0 = now_seconds();
        SweepConfig sw;
        sw.eps_grid = log_spaced_grid(cfg_.diffusion.eps_min, cfg_.diffusion.eps_max, cfg_.diffusion.eps_count);
        sw.near_one_delta = cfg_.diffusion.near_one_delta;
        sw.gap_threshold = cfg_.diffusion.gap_threshold;
        sw.min_persist = cfg_.diffusion.min_persist;
        res.sweep = epsilon_sweep(S, sw);
        res.detected_sectors = res.sweep.detected_sectors;

        auto [p_star, z_star] = transition_matrix(build_kernel(S, cfg_.diffusion.eps_star));
        DiffusionResult star = spectrum(p_star, z_star, cfg_.diffusion.near_one_delta);
        star.epsilon = cfg_.diffusion.eps_star;
        res.at_eps_star = star;

        fs::path spath = out_ / "spectra" / (mtag + ".csv");
        io::CsvWriter w;
        std::vector<std::string> header = {"epsilon"};
        int n_lambda = std::min<int>(10, S.m);
        for (int i = 0; i < n_lambda; ++i) header.push_back("lambda" + std::to_string(i));
        header.push_back("degeneracy_count");
        header.push_back("gap");
        w.header(header);
        auto emit_row = [&](const DiffusionResult& r) {
            std::vector<std::string> cells = {gfmt(r.epsilon)};
            for (int i = 0; i < n_lambda; ++i) cells.push_back(gfmt(r.eigenvalues[i]));
            cells.push_back(std::to_string(r.degeneracy_count));
            cells.push_back(gfmt(r.gap));
            w.row(cells);
        };
        bool star_emitted = false;
        for (const auto& r : res.sweep.per_eps) {
            if (!star_emitted && star.epsilon < r.epsilon) {
                emit_row(star);
                star_emitted = true;
            }
            if (r.epsilon == star.epsilon) star_emitted = true;
            emit_row(r);
        }
        if (!star_emitted) emit_row(star);
        w.save(spath);
        record_stage("spectra_" + mtag, io::fnv1a64_hex(mtag), now_seconds() - t0, {spath}, false);
    }

    // clustering and the embedding table at the representative epsilon
    {
        double t0 = now_seconds();
        const DiffusionResult& at = res.sweep.per_eps[res.sweep.best_eps_index];
        ClusterAssignment ca = kmeans_embed(at, cfg_.kmeans.k, cfg_.kmeans.n_restarts,
                                            derive_seed(cfg_.master_seed, {0x6b6d65ULL, std::hash<std::string>{}(mtag)}));
        res.cluster_labels = ca.labels;

        fs::path epath = out_ / "embed" / (mtag + ".csv");
        io::CsvWriter w;
        w.header({"member_id", "psi1", "psi2", "psi3", "cluster", "w1_bar", "w2_bar", "energy"});
        int m = S.m;
        for (int i = 0; i < m; ++i) {
            auto comp = [&](int n) { return n < m ? at.eigenvectors(i, n) : 0.0; };
            w.row({std::to_string(i), gfmt(comp(1)), gfmt(comp(2)), gfmt(comp(3)),
                   std::to_string(ca.labels[i]), gfmt(res.member_wilson[i].first),
                   gfmt(res.member_wilson[i].second), gfmt(res.member_energy[i])});
        }
        w.save(epath);
        record_stage("embed_" + mtag, io::fnv1a64_hex(mtag), now_seconds() - t0, {epath}, false);
    }

    manifest_.summary["detected_sectors"][mtag] = res.detected_sectors;
    save_manifest();
    res.manifest = manifest_;
    return res;
}

PipelineResult Pipeline::run() {
    auto seeds = stage_warm_seeds(cfg_.hamiltonian.h);
    PipelineResult res = run_at(cfg_.temperature, cfg_.hamiltonian.h, seeds);
    save_manifest();
    return res;
}

FieldSweepResult Pipeline::run_field_sweep() {
    if (cfg_.field_grid.empty()) throw std::invalid_argument("run_field_sweep: empty field grid");
    FieldSweepResult out;
    auto h0_seeds = stage_seeds();
    out.fidelity = stage_fidelity(h0_seeds);

    for (double h : cfg_.field_grid) {
        auto seeds = stage_warm_seeds(h);
        PipelineResult r = run_at(cfg_.temperature, h, seeds);
        FieldPointSummary s;
        s.h = h;
        s.detected_sectors = r.detected_sectors;
        if (r.at_eps_star) {
            const DiffusionResult& star = *r.at_eps_star;
            s.fourfold_at_eps_star = star.degeneracy_count == 4 && star.gap > cfg_.diffusion.gap_threshold;
            for (int i = 0; i < std::min<int>(10, star.eigenvalues.size()); ++i)
                s.eigenvalues_at_eps_star.push_back(star.eigenvalues[i]);
        }
        out.points.push_back(std::move(s));
    }

    json sweep_summary = json::array();
    for (const auto& p : out.points)
        sweep_summary.push_back({{"h", p.h},
                                 {"detected_sectors", p.detected_sectors},
                                 {"fourfold_at_eps_star", p.fourfold_at_eps_star}});
    manifest_.summary["field_sweep"] = sweep_summary;
    save_manifest();
    out.manifest = manifest_;
    return out;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::set<std::string>& force) {
    Pipeline p(cfg, force);
    return p.run();
}

FieldSweepResult run_field_sweep(const ExperimentConfig& cfg, const std::set<std::string>& force) {
    Pipeline p(cfg, force);
    return p.run_field_sweep();
}

void emit_tables(const fs::path& out_dir) {
    fs::path sim_dir = out_dir / "sim";
    if (fs::exists(sim_dir)) {
        for (const auto& entry : fs::directory_iterator(sim_dir)) {
            if (entry.path().extension() != ".json") continue;
            fs::path stem = entry.path();
            stem.replace_extension();
            SimilarityMatrix S = io::load_similarity(stem);
            if (S.m <= 200) {
                fs::path csv = stem;
                csv.replace_extension(".csv");
                io::write_similarity_csv(csv, S);
            }
        }
    }
}

}  // namespace toricdm
