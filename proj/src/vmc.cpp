#include "toricdm/vmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "toricdm/rng.hpp"
#include "toricdm/similarity.hpp"

namespace toricdm {

namespace {
constexpr std::uint64_t kTagChain = 0x636861696eULL;     // "chain"
constexpr std::uint64_t kTagInit = 0x696e6974ULL;        // "init"
constexpr std::uint64_t kTagOptIter = 0x6f707469ULL;     // "opti"

void check_sampler(const SamplerConfig& sc) {
    if (sc.n_chains < 1) throw std::invalid_argument("SamplerConfig: n_chains must be >= 1");
    if (sc.n_burn >= sc.n_steps) throw std::invalid_argument("SamplerConfig: n_burn must be < n_steps");
    if (!(sc.p_spin_flip > 0.0 && sc.p_spin_flip < 1.0))
        throw std::invalid_argument("SamplerConfig: p_spin_flip must be in (0,1)");
}

// Batch-means error bar over per-chain sample streams.
struct BatchStats {
    int batch_size;
    std::vector<double> batch_means;
    double sum = 0.0;
    long n_used = 0;

    // running state
    double batch_sum = 0.0;
    int in_batch = 0;

    explicit BatchStats(int kept_per_chain, int batches_per_chain = 20) {
        batch_size = kept_per_chain / batches_per_chain;
        if (batch_size < 1) batch_size = 1;
    }
    void add(double v) {
        batch_sum += v;
        if (++in_batch == batch_size) {
            batch_means.push_back(batch_sum / batch_size);
            sum += batch_sum;
            n_used += batch_size;
            batch_sum = 0.0;
            in_batch = 0;
        }
    }
    void end_chain() {  // drop a trailing partial batch
        batch_sum = 0.0;
        in_batch = 0;
    }
    McEstimate finish() const {
        McEstimate e;
        std::size_t b = batch_means.size();
        if (b == 0) return e;
        e.mean = sum / static_cast<double>(n_used);
        e.n_samples = n_used;
        if (b > 1) {
            double var = 0.0;
            for (double m : batch_means) var += (m - e.mean) * (m - e.mean);
            e.std_error = std::sqrt(var / (static_cast<double>(b) * (static_cast<double>(b) - 1.0)));
        }
        return e;
    }
};
}  // namespace

bool metropolis_accept(double log_abs_ratio, bool ratio_is_zero, double u) {
    if (ratio_is_zero) return false;
    if (log_abs_ratio >= 0.0) return true;            // |ratio|^2 >= 1
    return u < std::exp(2.0 * log_abs_ratio);
}

SpinConfig find_nonzero_config(const Lattice& lat, const RbmParams& params, std::uint64_t seed) {
    SpinConfig all_up(lat.n_spins(), +1);
    if (!log_amplitude(lat, params, all_up).is_zero) return all_up;

    Rng rng(derive_seed(seed, {kTagInit}));
    SpinConfig c(lat.n_spins());
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (auto& s : c) s = rng.uniform01() < 0.5 ? +1 : -1;
        if (!log_amplitude(lat, params, c).is_zero) return c;
    }
    // Last resort: random star flips from the last random configuration.
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const auto& bonds = lat.star_bonds(rng.uniform_int(lat.n_stars()));
        for (int b : bonds) c[b] = static_cast<std::int8_t>(-c[b]);
        if (!log_amplitude(lat, params, c).is_zero) return c;
    }
    throw std::runtime_error("find_nonzero_config: no nonzero-amplitude configuration found");
}

void run_sampler(const Lattice& lat, const RbmParams& params, const SamplerConfig& sc,
                 const std::function<void(int, const WavefunctionState&)>& visit) {
    check_sampler(sc);
    const int n_spins = lat.n_spins();
    for (int chain = 0; chain < sc.n_chains; ++chain) {
        std::uint64_t chain_seed = derive_seed(sc.seed, {kTagChain, static_cast<std::uint64_t>(chain)});
        Rng rng(chain_seed);
        WavefunctionState st(lat, params, find_nonzero_config(lat, params, chain_seed));
        int flip1[1];
        for (int step = 0; step < sc.n_steps; ++step) {
            for (int k = 0; k < n_spins; ++k) {
                const int* bonds;
                int n_bonds;
                if (rng.uniform01() < sc.p_spin_flip) {
                    flip1[0] = rng.uniform_int(n_spins);
                    bonds = flip1;
                    n_bonds = 1;
                } else {
                    bonds = lat.star_bonds(rng.uniform_int(lat.n_stars())).data();
                    n_bonds = 4;
                }
                auto r = st.flip_ratio(bonds, n_bonds);
                if (metropolis_accept(r.log_abs, r.is_zero, rng.uniform01())) st.apply_flips(bonds, n_bonds);
            }
            if (step >= sc.n_burn) visit(chain, st);
        }
    }
}

std::vector<SpinConfig> sample_configs(const Lattice& lat, const RbmParams& params, const SamplerConfig& sc) {
    std::vector<SpinConfig> out;
    out.reserve(static_cast<std::size_t>(sc.n_chains) * (sc.n_steps - sc.n_burn));
    run_sampler(lat, params, sc, [&](int, const WavefunctionState& st) { out.push_back(st.spins()); });
    return out;
}

McEstimate estimate(const Lattice& lat, const RbmParams& params, const SamplerConfig& sc,
                    const std::function<double(const WavefunctionState&)>& local) {
    BatchStats stats(sc.n_steps - sc.n_burn);
    int prev_chain = -1;
    run_sampler(lat, params, sc, [&](int chain, const WavefunctionState& st) {
        if (chain != prev_chain) {
            stats.end_chain();
            prev_chain = chain;
        }
        stats.add(local(st));
    });
    return stats.finish();
}

McEstimate estimate_energy(const Lattice& lat, const RbmParams& params, const ToricParams& tp,
                           const SamplerConfig& sc) {
    return estimate(lat, params, sc, [&](const WavefunctionState& st) { return local_energy(st, tp); });
}

std::pair<McEstimate, McEstimate> averaged_wilson_sampled(const Lattice& lat, const RbmParams& params,
                                                          const SamplerConfig& sc) {
    auto loops_x = straight_dual_loops(lat, Axis::x);
    auto loops_y = straight_dual_loops(lat, Axis::y);
    BatchStats s1(sc.n_steps - sc.n_burn), s2(sc.n_steps - sc.n_burn);
    int prev_chain = -1;
    run_sampler(lat, params, sc, [&](int chain, const WavefunctionState& st) {
        if (chain != prev_chain) {
            s1.end_chain();
            s2.end_chain();
            prev_chain = chain;
        }
        double w1 = 0.0, w2 = 0.0;
        for (const auto& lp : loops_x) w1 += wilson_loop_value(st, lp);
        for (const auto& lp : loops_y) w2 += wilson_loop_value(st, lp);
        s1.add(w1 / loops_x.size());
        s2.add(w2 / loops_y.size());
    });
    return {s1.finish(), s2.finish()};
}

GradientEstimate energy_gradient(const Lattice& lat, const RbmParams& params, const ToricParams& tp,
                                 const SamplerConfig& sc) {
    const int np = params.n_params();
    const Lattice& l = lat;

    BatchStats estats(sc.n_steps - sc.n_burn);
    // per-batch accumulators for E, D_i and E*D_i
    int batch_size = estats.batch_size;
    std::vector<double> sum_d(np, 0.0), sum_ed(np, 0.0);
    double sum_e = 0.0;
    int in_batch = 0;
    // global accumulators
    std::vector<double> gsum_d(np, 0.0), gsum_ed(np, 0.0);
    double gsum_e = 0.0;
    long n_used = 0;
    std::vector<std::vector<double>> batch_grads;

    std::vector<double> d(np);
    auto flush_batch = [&]() {
        if (in_batch != batch_size) {  // partial batch at chain end: drop
            sum_e = 0.0;
            std::fill(sum_d.begin(), sum_d.end(), 0.0);
            std::fill(sum_ed.begin(), sum_ed.end(), 0.0);
            in_batch = 0;
            return;
        }
        std::vector<double> g(np);
        for (int i = 0; i < np; ++i)
            g[i] = 2.0 * (sum_ed[i] / batch_size - (sum_e / batch_size) * (sum_d[i] / batch_size));
        batch_grads.push_back(std::move(g));
        gsum_e += sum_e;
        for (int i = 0; i < np; ++i) {
            gsum_d[i] += sum_d[i];
            gsum_ed[i] += sum_ed[i];
        }
        n_used += batch_size;
        sum_e = 0.0;
        std::fill(sum_d.begin(), sum_d.end(), 0.0);
        std::fill(sum_ed.begin(), sum_ed.end(), 0.0);
        in_batch = 0;
    };

    int prev_chain = -1;
    run_sampler(lat, params, sc, [&](int chain, const WavefunctionState& st) {
        if (chain != prev_chain) {
            flush_batch();  // drops partials between chains
            estats.end_chain();
            prev_chain = chain;
        }
        double e = local_energy(st, tp);
        // D_i from the cached thetas
        const SpinConfig& s = st.spins();
        for (int cell = 0; cell < l.n_cells(); ++cell) {
            double t = std::tan(st.theta(cell));
            d[5 * cell] = -t;
            const auto& bonds = l.cell_bonds(cell);
            for (int k = 0; k < 4; ++k) d[5 * cell + 1 + k] = -s[bonds[k]] * t;
        }
        estats.add(e);
        sum_e += e;
        for (int i = 0; i < np; ++i) {
            sum_d[i] += d[i];
            sum_ed[i] += e * d[i];
        }
        if (++in_batch == batch_size) flush_batch();
    });
    flush_batch();

    GradientEstimate out;
    out.energy = estats.finish();
    out.gradient.assign(np, 0.0);
    out.gradient_std_error.assign(np, 0.0);
    if (n_used == 0) return out;
    double mean_e = gsum_e / n_used;
    for (int i = 0; i < np; ++i)
        out.gradient[i] = 2.0 * (gsum_ed[i] / n_used - mean_e * (gsum_d[i] / n_used));
    std::size_t nb = batch_grads.size();
    if (nb > 1) {
        for (int i = 0; i < np; ++i) {
            double bm = 0.0;
            for (const auto& g : batch_grads) bm += g[i];
            bm /= static_cast<double>(nb);
            double var = 0.0;
            for (const auto& g : batch_grads) var += (g[i] - bm) * (g[i] - bm);
            out.gradient_std_error[i] =
                std::sqrt(var / (static_cast<double>(nb) * (static_cast<double>(nb) - 1.0)));
        }
    }
    return out;
}

OptimizeResult optimize(const Lattice& lat, const RbmParams& init, const ToricParams& tp,
                        const SamplerConfig& sc, const OptimizerConfig& oc) {
    if (oc.learning_rate <= 0) throw std::invalid_argument("OptimizerConfig: learning_rate must be > 0");
    if (!(oc.beta1 > 0 && oc.beta1 < 1 && oc.beta2 > 0 && oc.beta2 < 1))
        throw std::invalid_argument("OptimizerConfig: betas must be in (0,1)");

    OptimizeResult res;
    res.params = init;
    const int np = init.n_params();
    std::vector<double> m(np, 0.0), v(np, 0.0);
    double e0 = std::numeric_limits<double>::quiet_NaN();

    for (int iter = 0; iter < oc.n_iterations; ++iter) {
        SamplerConfig sci = sc;
        sci.seed = derive_seed(sc.seed, {kTagOptIter, static_cast<std::uint64_t>(iter)});
        GradientEstimate ge = energy_gradient(lat, res.params, tp, sci);
        res.energy_trace.push_back(ge.energy);
        if (iter == 0) e0 = ge.energy.mean;
        if (ge.energy.mean - e0 > 10.0 * std::max(1.0, std::abs(e0)))
            throw std::runtime_error("optimize: energy diverged (exceeded initial estimate by 10x)");

        double b1t = 1.0 - std::pow(oc.beta1, iter + 1);
        double b2t = 1.0 - std::pow(oc.beta2, iter + 1);
        for (int i = 0; i < np; ++i) {
            m[i] = oc.beta1 * m[i] + (1.0 - oc.beta1) * ge.gradient[i];
            v[i] = oc.beta2 * v[i] + (1.0 - oc.beta2) * ge.gradient[i] * ge.gradient[i];
            res.params.values[i] -= oc.learning_rate * (m[i] / b1t) / (std::sqrt(v[i] / b2t) + oc.epsilon);
        }

        // plateau: compare the means of the two halves of the trailing window
        int w = oc.plateau_window;
        if (w >= 2 && static_cast<int>(res.energy_trace.size()) >= w) {
            int half = w / 2;
            double recent = 0.0, before = 0.0;
            int n = static_cast<int>(res.energy_trace.size());
            for (int i = n - half; i < n; ++i) recent += res.energy_trace[i].mean;
            for (int i = n - 2 * half; i < n - half; ++i) before += res.energy_trace[i].mean;
            recent /= half;
            before /= half;
            if (std::abs(recent - before) < oc.plateau_tol * std::max(1.0, std::abs(recent))) {
                res.plateaued = true;
                break;
            }
        }
    }
    return res;
}

std::vector<FidelityPoint> fidelity_scan(const Lattice& lat, double j_p, double j_s,
                                         const std::vector<double>& h_grid, const RbmParams& init,
                                         const SamplerConfig& sc, const OptimizerConfig& oc) {
    for (std::size_t i = 1; i < h_grid.size(); ++i)
        if (h_grid[i] < h_grid[i - 1]) throw std::invalid_argument("fidelity_scan: h grid must be non-decreasing");

    std::vector<FidelityPoint> out;
    std::vector<RbmParams> states;
    RbmParams current = init;
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
        if (i > 0 && h_grid[i] == h_grid[i - 1]) {
            states.push_back(states.back());  // identical state, fidelity exactly 1
            out.push_back({h_grid[i], 0.0, out.back().energy});
            continue;
        }
        ToricParams tp{j_p, j_s, h_grid[i]};
        SamplerConfig sci = sc;
        sci.seed = derive_seed(sc.seed, {0x66696465ULL, i});  // "fide"
        OptimizeResult r = optimize(lat, current, tp, sci, oc);
        current = r.params;
        states.push_back(current);
        out.push_back({h_grid[i], 0.0, r.energy_trace.back()});
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i + 1 < out.size())
            out[i].fidelity_to_next =
                (h_grid[i + 1] == h_grid[i]) ? 1.0 : overlap_exact(lat, states[i], states[i + 1]);
        else
            out[i].fidelity_to_next = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

}  // namespace toricdm
