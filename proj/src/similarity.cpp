#include "toricdm/similarity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "toricdm/hamiltonian.hpp"
#include "toricdm/rng.hpp"

namespace toricdm {

namespace {
constexpr double kRatioLogClip = 30.0;  // |psi_b/psi_a| capped at e^30

// Normalized amplitude vector (unit 2-norm), built in double.
Eigen::VectorXd normalized_amplitudes(const Lattice& lat, const RbmParams& p) {
    AmplitudeTable t = build_amplitude_table(lat, p);
    double peak = 0.0;
    for (double a : t.amp) peak = std::max(peak, std::abs(a));
    if (peak == 0.0) throw std::runtime_error("overlap: wavefunction has zero norm");
    Eigen::VectorXd v(static_cast<Eigen::Index>(t.amp.size()));
    for (std::size_t i = 0; i < t.amp.size(); ++i) v[static_cast<Eigen::Index>(i)] = t.amp[i] / peak;
    v /= v.norm();
    return v;
}
}  // namespace

double overlap_exact(const Lattice& lat, const RbmParams& a, const RbmParams& b) {
    if (!a.same_layout(b)) throw std::invalid_argument("overlap_exact: parameter layouts differ");
    Eigen::VectorXd va = normalized_amplitudes(lat, a);
    Eigen::VectorXd vb = normalized_amplitudes(lat, b);
    double dot = va.dot(vb);
    double s = dot * dot;
    return std::clamp(s, 0.0, 1.0);
}

McEstimate overlap_sampled(const Lattice& lat, const RbmParams& a, const RbmParams& b,
                           const SamplerConfig& sc) {
    if (!a.same_layout(b)) throw std::invalid_argument("overlap_sampled: parameter layouts differ");
    bool clipped = false;
    // local value of psi_num(sigma) / psi_cur(sigma) at the sampler's state
    auto ratio_estimator = [&lat, &clipped](const RbmParams* num) {
        return [&lat, &clipped, num](const WavefunctionState& st) {
            Amplitude an = log_amplitude(lat, *num, st.spins());
            if (an.is_zero) return 0.0;
            Amplitude ad = st.amplitude();
            double lr = an.log_abs - ad.log_abs;
            if (lr > kRatioLogClip) {
                clipped = true;
                lr = kRatioLogClip;
            }
            return an.sign * ad.sign * std::exp(lr);
        };
    };
    SamplerConfig sc_a = sc;
    SamplerConfig sc_b = sc;
    sc_b.seed = derive_seed(sc.seed, {0x6f766c62ULL});  // second, independent stream
    McEstimate f = estimate(lat, a, sc_a, ratio_estimator(&b));
    McEstimate g = estimate(lat, b, sc_b, ratio_estimator(&a));

    McEstimate out;
    out.mean = f.mean * g.mean;
    out.std_error = std::sqrt(f.mean * f.mean * g.std_error * g.std_error +
                              g.mean * g.mean * f.std_error * f.std_error);
    out.n_samples = f.n_samples + g.n_samples;
    out.below_resolution = clipped || std::abs(f.mean) < 3.0 * f.std_error ||
                           std::abs(g.mean) < 3.0 * g.std_error;
    return out;
}

namespace {
// Contribution of one cell to the 10N-scaled similarity sum: the tau = +-1
// branches compare (b - a) and (b + a) angles; cos(2x) absorbs the pi shifts
// and the branch choice absorbs the sign flips.
double cell_contribution(const RbmParams& a, const RbmParams& b, int cell) {
    double plus = std::cos(2.0 * (a.bias(cell) - b.bias(cell)));
    double minus = std::cos(2.0 * (-a.bias(cell) - b.bias(cell)));
    for (int k = 0; k < 4; ++k) {
        double wa = a.weight(cell, k), wb = b.weight(cell, k);
        plus += std::cos(2.0 * (wa - wb));
        minus += std::cos(2.0 * (-wa - wb));
    }
    return std::max(plus, minus);
}
}  // namespace

double similarity_network(const Lattice& lat, const RbmParams& a, const RbmParams& b) {
    if (!a.same_layout(b)) throw std::invalid_argument("similarity_network: parameter layouts differ");
    double total = 0.0;
    for (int cell = 0; cell < lat.n_cells(); ++cell) total += cell_contribution(a, b, cell);
    return 0.5 + total / (10.0 * lat.n_spins());
}

namespace {
struct StringSearch {
    const Lattice& lat;
    RbmParams work;          // gauge-transformed copy of a
    const RbmParams& other;  // b
    std::vector<double> contrib;
    double total = 0.0;
    std::vector<LoopPath> moves;

    StringSearch(const Lattice& l, const RbmParams& a, const RbmParams& b) : lat(l), work(a), other(b) {
        contrib.resize(lat.n_cells());
        for (int cell = 0; cell < lat.n_cells(); ++cell) {
            contrib[cell] = cell_contribution(work, other, cell);
            total += contrib[cell];
        }
        for (int s = 0; s < lat.n_stars(); ++s)
            moves.push_back(elementary_loop(lat, {CellKind::star, s}));
        for (int p = 0; p < lat.n_plaquettes(); ++p)
            moves.push_back(elementary_loop(lat, {CellKind::plaquette, p}));
        moves.push_back(straight_direct_loops(lat, Axis::x)[0]);
        moves.push_back(straight_direct_loops(lat, Axis::y)[0]);
        moves.push_back(straight_dual_loops(lat, Axis::x)[0]);
        moves.push_back(straight_dual_loops(lat, Axis::y)[0]);
    }

    // Apply the pi/2 loop shifts; returns the positions touched so the move
    // can be reverted.
    void apply_loop(const LoopPath& lp, std::vector<std::pair<int, int>>& touched) {
        touched.clear();
        int n = lp.length();
        for (int k = 0; k < n; ++k) {
            int cell = lp.cells[k];
            int s_in = lat.slot_of(cell, lp.bonds[k]);
            int s_out = lat.slot_of(cell, lp.bonds[(k + 1) % n]);
            work.weight(cell, s_in) += std::numbers::pi / 2;
            work.weight(cell, s_out) += std::numbers::pi / 2;
            touched.emplace_back(cell, s_in);
            touched.emplace_back(cell, s_out);
        }
    }

    void run(int n_g, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<std::pair<int, int>> touched;
        std::vector<double> old_contrib;
        for (int g = 0; g < n_g; ++g) {
            const LoopPath& lp = moves[rng.uniform_int(static_cast<int>(moves.size()))];
            apply_loop(lp, touched);
            double delta = 0.0;
            old_contrib.clear();
            for (int k = 0; k < lp.length(); ++k) {
                int cell = lp.cells[k];
                old_contrib.push_back(contrib[cell]);
                double c = cell_contribution(work, other, cell);
                delta += c - contrib[cell];
                contrib[cell] = c;
            }
            if (delta >= 0.0) {
                total += delta;
            } else {  // revert
                for (const auto& [cell, slot] : touched) work.weight(cell, slot) -= std::numbers::pi / 2;
                for (int k = 0; k < lp.length(); ++k) contrib[lp.cells[k]] = old_contrib[k];
            }
        }
    }
};
}  // namespace

double similarity_string(const Lattice& lat, const RbmParams& a, const RbmParams& b, int n_g,
                         std::uint64_t seed) {
    if (!a.same_layout(b)) throw std::invalid_argument("similarity_string: parameter layouts differ");
    if (n_g < 0) throw std::invalid_argument("similarity_string: n_g must be >= 0");
    StringSearch search(lat, a, b);
    search.run(n_g, seed);
    return 0.5 + search.total / (10.0 * lat.n_spins());
}

double euclidean_sq_distance(const RbmParams& a, const RbmParams& b) {
    if (!a.same_layout(b)) throw std::invalid_argument("euclidean_sq_distance: parameter layouts differ");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        d2 += d * d;
    }
    return d2;
}

std::string measure_name(Measure m) {
    switch (m) {
        case Measure::q: return "q";
        case Measure::eu: return "eu";
        case Measure::n: return "n";
        case Measure::str: return "str";
        case Measure::mixed: return "mixed";
    }
    return "?";
}

Measure measure_from_name(const std::string& name) {
    if (name == "q") return Measure::q;
    if (name == "eu") return Measure::eu;
    if (name == "n") return Measure::n;
    if (name == "str") return Measure::str;
    if (name == "mixed") return Measure::mixed;
    throw std::invalid_argument("unknown similarity measure: " + name);
}

SimilarityMatrix similarity_matrix_network(const Lattice& lat, const std::vector<RbmParams>& members) {
    int m = static_cast<int>(members.size());
    SimilarityMatrix S(m, Measure::n);
    for (int i = 0; i < m; ++i) {
        S.set(i, i, 1.0);
        for (int j = i + 1; j < m; ++j)
            S.set(i, j, similarity_network(lat, members[i], members[j]));
    }
    return S;
}

SimilarityMatrix similarity_matrix_string(const Lattice& lat, const std::vector<RbmParams>& members,
                                          int n_g, std::uint64_t seed) {
    int m = static_cast<int>(members.size());
    SimilarityMatrix S(m, Measure::str);
    for (int i = 0; i < m; ++i) {
        S.set(i, i, 1.0);
        for (int j = i + 1; j < m; ++j) {
            std::uint64_t pair_seed = derive_seed(seed, {0x737472ULL, static_cast<std::uint64_t>(i),
                                                         static_cast<std::uint64_t>(j)});
            S.set(i, j, similarity_string(lat, members[i], members[j], n_g, pair_seed));
        }
    }
    return S;
}

SimilarityMatrix similarity_matrix_euclidean(const std::vector<RbmParams>& members) {
    int m = static_cast<int>(members.size());
    SimilarityMatrix S(m, Measure::eu);
    std::vector<double> d2(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            double d = euclidean_sq_distance(members[i], members[j]);
            d2[static_cast<std::size_t>(i) * m + j] = d;
            dists.push_back(std::sqrt(d));
        }
    }
    double s = 1.0;
    if (!dists.empty()) {
        std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
        s = dists[dists.size() / 2];
        if (s <= 0.0) s = 1.0;  // all members identical
    }
    for (int i = 0; i < m; ++i) {
        S.set(i, i, 1.0);
        for (int j = i + 1; j < m; ++j)
            S.set(i, j, std::exp(-d2[static_cast<std::size_t>(i) * m + j] / (s * s)));
    }
    return S;
}

SimilarityMatrix similarity_matrix_overlap(const Lattice& lat, const std::vector<RbmParams>& members,
                                           int block_size) {
    int m = static_cast<int>(members.size());
    SimilarityMatrix S(m, Measure::q);
    if (m == 0) return S;
    if (lat.n_spins() > kEnumerationBudget)
        throw std::invalid_argument("similarity_matrix_overlap: enumeration budget exceeded");

    const Eigen::Index dim = Eigen::Index(1) << lat.n_spins();
    int nb = (m + block_size - 1) / block_size;
    auto build_block = [&](int bi) {
        int lo = bi * block_size;
        int hi = std::min(m, lo + block_size);
        Eigen::MatrixXd A(dim, hi - lo);
        for (int c = lo; c < hi; ++c) A.col(c - lo) = normalized_amplitudes(lat, members[c]);
        return A;
    };
    for (int bi = 0; bi < nb; ++bi) {
        Eigen::MatrixXd Ai = build_block(bi);
        int ilo = bi * block_size;
        Eigen::MatrixXd Gii = Ai.transpose() * Ai;
        for (int r = 0; r < Gii.rows(); ++r)
            for (int c = r; c < Gii.cols(); ++c)
                S.set(ilo + r, ilo + c, std::clamp(Gii(r, c) * Gii(r, c), 0.0, 1.0));
        for (int bj = bi + 1; bj < nb; ++bj) {
            Eigen::MatrixXd Aj = build_block(bj);
            int jlo = bj * block_size;
            Eigen::MatrixXd Gij = Ai.transpose() * Aj;
            for (int r = 0; r < Gij.rows(); ++r)
                for (int c = 0; c < Gij.cols(); ++c)
                    S.set(ilo + r, jlo + c, std::clamp(Gij(r, c) * Gij(r, c), 0.0, 1.0));
        }
    }
    for (int i = 0; i < m; ++i) S.set(i, i, 1.0);
    return S;
}

SimilarityMatrix similarity_matrix_mixed(const SimilarityMatrix& s_n, const SimilarityMatrix& s_q,
                                         double f, std::uint64_t seed) {
    if (s_n.m != s_q.m) throw std::invalid_argument("similarity_matrix_mixed: size mismatch");
    if (f < 0.0 || f > 1.0) throw std::invalid_argument("similarity_matrix_mixed: f must be in [0,1]");
    int m = s_n.m;
    SimilarityMatrix S(m, Measure::mixed);
    S.fraction = f;
    S.replaced.assign(static_cast<std::size_t>(m) * m, 0);

    double min_q = 1.0, max_q = 0.0, min_n = 1.0, max_n = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            min_q = std::min(min_q, s_q.get(i, j));
            max_q = std::max(max_q, s_q.get(i, j));
            min_n = std::min(min_n, s_n.get(i, j));
            max_n = std::max(max_n, s_n.get(i, j));
        }
    }
    bool degenerate = !(max_q > min_q);
    auto rescale = [&](double q) {
        if (degenerate) return q;  // identity rescale fallback
        return (q - min_q) / (max_q - min_q) * (max_n - min_n) + min_n;
    };

    Rng rng(derive_seed(seed, {0x6d697865ULL}));  // "mixe"
    for (int i = 0; i < m; ++i) {
        S.set(i, i, 1.0);
        for (int j = i + 1; j < m; ++j) {
            bool use_q = rng.uniform01() < f;
            if (use_q) {
                S.set(i, j, rescale(s_q.get(i, j)));
                S.replaced[static_cast<std::size_t>(i) * m + j] = 1;
                S.replaced[static_cast<std::size_t>(j) * m + i] = 1;
            } else {
                S.set(i, j, s_n.get(i, j));
            }
        }
    }
    return S;
}

}  // namespace toricdm
