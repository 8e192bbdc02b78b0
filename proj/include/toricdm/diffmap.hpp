#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "toricdm/similarity.hpp"

namespace toricdm {

// k_eps(l, l') = exp(-(1 - S_ll') / eps)
Eigen::MatrixXd build_kernel(const SimilarityMatrix& S, double epsilon);

// p_ll' = k_ll' / z_l with z_l = sum_l' k_ll'; rows sum to 1.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> transition_matrix(const Eigen::MatrixXd& kernel);

// Eigendecomposition of p via the symmetric conjugate Z^{1/2} p Z^{-1/2}.
// Right eigenvectors psi_n are normalized to sum_l z_l psi_n(l)^2 = 1 and
// sign-fixed (largest-magnitude entry positive); with this normalization the
// spectral form of the diffusion distance matches the direct form exactly.
struct DiffusionResult {
    double epsilon = 0.0;
    Eigen::VectorXd eigenvalues;   // descending
    Eigen::MatrixXd eigenvectors;  // columns psi_n
    Eigen::VectorXd z;             // kernel degrees
    int degeneracy_count = 0;      // #{ lambda_n > 1 - near_one_delta }
    double gap = 0.0;              // lambda_{deg-1} - lambda_deg (0 when deg == m)
};

DiffusionResult spectrum(const Eigen::MatrixXd& p, const Eigen::VectorXd& z, double near_one_delta = 1e-3);

// D_2t(l, l'), direct form: sum_l'' (1/z_l'') [(p^t)_{l,l''} - (p^t)_{l',l''}]^2.
double diffusion_distance_direct(const Eigen::MatrixXd& p, const Eigen::VectorXd& z, int t, int l, int lp);
// Spectral form: sum_{n>=1} lambda_n^{2t} [psi_n(l) - psi_n(lp)]^2.
double diffusion_distance_spectral(const DiffusionResult& r, int t, int l, int lp);

std::vector<double> log_spaced_grid(double lo, double hi, int n);

struct SweepConfig {
    std::vector<double> eps_grid;  // increasing
    double near_one_delta = 1e-3;
    double gap_threshold = 0.1;
    int min_persist = 3;  // consecutive grid points a degeneracy must hold
};

// Detected sector count: the largest k < m whose degeneracy count persists,
// with gap above threshold, over >= min_persist consecutive grid points.
// best_eps_index points at the largest-gap grid point of that plateau.
struct SweepResult {
    std::vector<DiffusionResult> per_eps;
    int detected_sectors = 1;
    int best_eps_index = 0;
};

SweepResult epsilon_sweep(const SimilarityMatrix& S, const SweepConfig& cfg);

// k-means with plus-plus seeding and restarts on the first k-1 non-trivial
// eigenvector components.
struct ClusterAssignment {
    int k = 0;
    std::vector<int> labels;
    Eigen::MatrixXd centers;  // k x dim
    double inertia = 0.0;
};

ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, int n_restarts, int max_iterations,
                         double tol, std::uint64_t seed);
ClusterAssignment kmeans_embed(const DiffusionResult& r, int k, int n_restarts, std::uint64_t seed);

}  // namespace toricdm
