#include "toricdm/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

namespace toricdm {

double local_energy(const Lattice& lat, const RbmParams& params, const ToricParams& tp, const SpinConfig& config) {
    WavefunctionState st(lat, params, config);
    return local_energy(st, tp);
}

double local_energy(const WavefunctionState& state, const ToricParams& tp) {
    const Lattice& lat = state.lattice();
    const SpinConfig& s = state.spins();

    double diag = 0.0;
    for (int p = 0; p < lat.n_plaquettes(); ++p) {
        const auto& bs = lat.plaquette_bonds(p);
        diag += -tp.j_p * (s[bs[0]] * s[bs[1]] * s[bs[2]] * s[bs[3]]);
    }
    if (tp.h != 0.0) {
        int sz = 0;
        for (auto v : s) sz += v;
        diag += -tp.h * sz;
    }

    double offdiag = 0.0;
    if (tp.j_s != 0.0) {
        for (int st = 0; st < lat.n_stars(); ++st) {
            auto r = state.flip_ratio(lat.star_bonds(st).data(), 4);
            offdiag += -tp.j_s * r.value();
        }
    }
    return diag + offdiag;
}

double wilson_loop_value(const Lattice& lat, const RbmParams& params, const SpinConfig& config, const LoopPath& loop) {
    WavefunctionState st(lat, params, config);
    return wilson_loop_value(st, loop);
}

double wilson_loop_value(const WavefunctionState& state, const LoopPath& loop) {
    return state.flip_ratio(loop.bonds).value();
}

// ---- exact enumeration ---------------------------------------------------

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

SpinConfig config_from_index(std::uint32_t index, int n_spins) {
    SpinConfig c(n_spins);
    for (int i = 0; i < n_spins; ++i) c[i] = (index >> i) & 1u ? -1 : +1;
    return c;
}

std::uint32_t bond_mask(const std::vector<int>& bonds) {
    std::uint32_t m = 0;
    for (int b : bonds) m |= (1u << b);
    return m;
}

double AmplitudeTable::norm2() const {
    std::vector<double> sq(amp.size());
    for (std::size_t i = 0; i < amp.size(); ++i) sq[i] = amp[i] * amp[i];
    return pairwise_sum(sq);
}

AmplitudeTable build_amplitude_table(const Lattice& lat, const RbmParams& params) {
    int n = lat.n_spins();
    if (n > kEnumerationBudget) throw std::invalid_argument("build_amplitude_table: enumeration budget exceeded");

    // Each cell contributes cos(b + sum w sigma) which only depends on the 4
    // bits of its bonds; tabulate the 16 values per cell once.
    int n_cells = lat.n_cells();
    std::vector<std::array<double, 16>> table(n_cells);
    std::vector<std::array<int, 4>> shifts(n_cells);
    for (int cell = 0; cell < n_cells; ++cell) {
        const auto& bonds = lat.cell_bonds(cell);
        for (int k = 0; k < 4; ++k) shifts[cell][k] = bonds[k];
        for (int m = 0; m < 16; ++m) {
            double th = params.bias(cell);
            for (int k = 0; k < 4; ++k) th += params.weight(cell, k) * ((m >> k) & 1 ? -1.0 : 1.0);
            double c = std::cos(th);
            table[cell][m] = std::abs(c) < kCosZeroTol ? 0.0 : c;
        }
    }

    AmplitudeTable t;
    t.n_spins = n;
    t.amp.resize(std::size_t(1) << n);
    for (std::uint32_t idx = 0; idx < t.amp.size(); ++idx) {
        double a = 1.0;
        for (int cell = 0; cell < n_cells; ++cell) {
            const auto& sh = shifts[cell];
            int m = ((idx >> sh[0]) & 1u) | (((idx >> sh[1]) & 1u) << 1) |
                    (((idx >> sh[2]) & 1u) << 2) | (((idx >> sh[3]) & 1u) << 3);
            a *= table[cell][m];
            if (a == 0.0) break;
        }
        t.amp[idx] = a;
    }
    return t;
}

namespace {
// sum over configs of amp[idx] * amp[idx ^ mask], pairwise-reduced
double xor_dot(const AmplitudeTable& t, std::uint32_t mask) {
    std::vector<double> prod(t.amp.size());
    for (std::uint32_t idx = 0; idx < t.amp.size(); ++idx) prod[idx] = t.amp[idx] * t.amp[idx ^ mask];
    return pairwise_sum(prod);
}

double checked_norm2(const AmplitudeTable& t) {
    double n2 = t.norm2();
    if (n2 <= 0.0) throw std::runtime_error("exact expectation: wavefunction has zero norm");
    return n2;
}
}  // namespace

double exact_energy(const Lattice& lat, const AmplitudeTable& t, const RbmParams& params, const ToricParams& tp) {
    (void)params;
    double n2 = checked_norm2(t);

    std::vector<double> diag(t.amp.size());
    for (std::uint32_t idx = 0; idx < t.amp.size(); ++idx) {
        double a2 = t.amp[idx] * t.amp[idx];
        if (a2 == 0.0) {
            diag[idx] = 0.0;
            continue;
        }
        double e = 0.0;
        for (int p = 0; p < lat.n_plaquettes(); ++p) {
            const auto& bs = lat.plaquette_bonds(p);
            int par = ((idx >> bs[0]) ^ (idx >> bs[1]) ^ (idx >> bs[2]) ^ (idx >> bs[3])) & 1u;
            e += -tp.j_p * (par ? -1.0 : 1.0);
        }
        if (tp.h != 0.0) {
            int down = 0;
            for (int i = 0; i < t.n_spins; ++i) down += (idx >> i) & 1u;
            e += -tp.h * (t.n_spins - 2 * down);
        }
        diag[idx] = a2 * e;
    }
    double total = pairwise_sum(diag);

    if (tp.j_s != 0.0) {
        for (int s = 0; s < lat.n_stars(); ++s) {
            std::uint32_t mask = 0;
            for (int b : lat.star_bonds(s)) mask |= (1u << b);
            total += -tp.j_s * xor_dot(t, mask);
        }
    }
    return total / n2;
}

double exact_energy(const Lattice& lat, const RbmParams& params, const ToricParams& tp) {
    AmplitudeTable t = build_amplitude_table(lat, params);
    return exact_energy(lat, t, params, tp);
}

double exact_wilson(const AmplitudeTable& t, const LoopPath& loop) {
    return xor_dot(t, bond_mask(loop.bonds)) / checked_norm2(t);
}

double exact_wilson(const Lattice& lat, const RbmParams& params, const LoopPath& loop) {
    AmplitudeTable t = build_amplitude_table(lat, params);
    return exact_wilson(t, loop);
}

double exact_sz_total(const AmplitudeTable& t) {
    double n2 = checked_norm2(t);
    std::vector<double> v(t.amp.size());
    for (std::uint32_t idx = 0; idx < t.amp.size(); ++idx) {
        int down = 0;
        for (int i = 0; i < t.n_spins; ++i) down += (idx >> i) & 1u;
        v[idx] = t.amp[idx] * t.amp[idx] * (t.n_spins - 2 * down);
    }
    return pairwise_sum(v) / n2;
}

double exact_sz_total(const Lattice& lat, const RbmParams& params) {
    AmplitudeTable t = build_amplitude_table(lat, params);
    return exact_sz_total(t);
}

std::pair<double, double> averaged_wilson_exact(const Lattice& lat, const AmplitudeTable& t) {
    double n2 = checked_norm2(t);
    double w1 = 0.0, w2 = 0.0;
    for (const auto& lp : straight_dual_loops(lat, Axis::x)) w1 += xor_dot(t, bond_mask(lp.bonds));
    for (const auto& lp : straight_dual_loops(lat, Axis::y)) w2 += xor_dot(t, bond_mask(lp.bonds));
    w1 /= lat.ly() * n2;
    w2 /= lat.lx() * n2;
    return {w1, w2};
}

std::pair<double, double> averaged_wilson_exact(const Lattice& lat, const RbmParams& params) {
    AmplitudeTable t = build_amplitude_table(lat, params);
    return averaged_wilson_exact(lat, t);
}

}  // namespace toricdm
