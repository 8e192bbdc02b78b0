#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toricdm/lattice.hpp"
#include "toricdm/rbm.hpp"
#include "toricdm/vmc.hpp"

namespace toricdm {

// |<Psi(a)|Psi(b)>|^2 with both states normalized, by full enumeration
// (n_spins <= 20). Scale-invariant and stable under small amplitudes.
double overlap_exact(const Lattice& lat, const RbmParams& a, const RbmParams& b);

// Sampled overlap via the two-distribution ratio estimator
//   |<a|b>|^2 = E_{|psi_a|^2}[psi_b/psi_a] * E_{|psi_b|^2}[psi_a/psi_b].
// Ratios are clipped at e^30; the below_resolution flag is set when either
// factor is consistent with zero or clipping occurred.
McEstimate overlap_sampled(const Lattice& lat, const RbmParams& a, const RbmParams& b,
                           const SamplerConfig& sc);

// Gauge-invariant network similarity (invariant under cell sign flips and pi
// shifts, both built into the cos(2 ...) / tau structure):
//   S_n = 1/2 + (1/10N) sum_X max_tau [ sum_j cos 2(tau w^a_Xj - w^b_Xj)
//                                       + cos 2(tau b^a_X - b^b_X) ].
double similarity_network(const Lattice& lat, const RbmParams& a, const RbmParams& b);

// S_n with a greedy stochastic search over the loop ("string") gauge moves:
// n_g times, draw one of {elementary loop around each star / plaquette,
// non-contractible direct and dual loops along x and y}, apply its pi/2
// shifts to a working copy of a, and keep the move iff the similarity did
// not decrease. Result >= similarity_network(a, b).
double similarity_string(const Lattice& lat, const RbmParams& a, const RbmParams& b, int n_g,
                         std::uint64_t seed);

// Squared Euclidean distance of the raw parameter vectors; the deliberately
// gauge-NON-invariant negative control.
double euclidean_sq_distance(const RbmParams& a, const RbmParams& b);

enum class Measure { q, eu, n, str, mixed };
std::string measure_name(Measure m);
Measure measure_from_name(const std::string& name);

struct SimilarityMatrix {
    int m = 0;
    Measure tag = Measure::n;
    double fraction = 0.0;               // mixed: replacement fraction f
    std::vector<double> values;          // dense m x m, symmetric
    std::vector<std::uint8_t> replaced;  // mixed: 1 where the entry is a rescaled overlap

    SimilarityMatrix() = default;
    SimilarityMatrix(int m_, Measure tag_) : m(m_), tag(tag_), values(static_cast<std::size_t>(m_) * m_, 0.0) {}

    double get(int i, int j) const { return values[static_cast<std::size_t>(i) * m + j]; }
    void set(int i, int j, double v) {
        values[static_cast<std::size_t>(i) * m + j] = v;
        values[static_cast<std::size_t>(j) * m + i] = v;
    }
};

SimilarityMatrix similarity_matrix_network(const Lattice& lat, const std::vector<RbmParams>& members);
SimilarityMatrix similarity_matrix_string(const Lattice& lat, const std::vector<RbmParams>& members,
                                          int n_g, std::uint64_t seed);
// exp(-d^2/s^2) with s the median pairwise distance.
SimilarityMatrix similarity_matrix_euclidean(const std::vector<RbmParams>& members);
// Exact pairwise overlaps via a blocked Gram product of the normalized
// amplitude tables.
SimilarityMatrix similarity_matrix_overlap(const Lattice& lat, const std::vector<RbmParams>& members,
                                           int block_size = 128);

// S_m: per unordered pair, with probability f use the rescaled overlap
//   S~_q = (S_q - min S_q)/(max S_q - min S_q) * (max S_n - min S_n) + min S_n
// (min/max over all off-diagonal pairs), otherwise S_n. One draw per pair,
// diagonal forced to 1. Degenerate rescaling falls back to the raw overlap.
SimilarityMatrix similarity_matrix_mixed(const SimilarityMatrix& s_n, const SimilarityMatrix& s_q,
                                         double f, std::uint64_t seed);

}  // namespace toricdm
