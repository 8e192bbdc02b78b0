#include "toricdm/diffmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "toricdm/rng.hpp"

namespace toricdm {

Eigen::MatrixXd build_kernel(const SimilarityMatrix& S, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("build_kernel: epsilon must be > 0");
    int m = S.m;
    Eigen::MatrixXd k(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) k(i, j) = std::exp(-(1.0 - S.get(i, j)) / epsilon);
    return k;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> transition_matrix(const Eigen::MatrixXd& kernel) {
    Eigen::VectorXd z = kernel.rowwise().sum();
    if ((z.array() <= 0.0).any()) throw std::runtime_error("transition_matrix: zero kernel degree");
    Eigen::MatrixXd p = z.cwiseInverse().asDiagonal() * kernel;
    return {p, z};
}

DiffusionResult spectrum(const Eigen::MatrixXd& p, const Eigen::VectorXd& z, double near_one_delta) {
    const int m = static_cast<int>(p.rows());
    Eigen::VectorXd sqrt_z = z.cwiseSqrt();
    // A = Z^{1/2} P Z^{-1/2} is symmetric because z_i p_ij = k_ij is.
    Eigen::MatrixXd a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = sqrt_z[i] * p(i, j) / sqrt_z[j];
    a = 0.5 * (a + a.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver failed");

    DiffusionResult r;
    r.z = z;
    r.eigenvalues.resize(m);
    r.eigenvectors.resize(m, m);
    // ascending from Eigen; store descending, psi_n = u_n / sqrt(z)
    for (int n = 0; n < m; ++n) {
        r.eigenvalues[n] = solver.eigenvalues()[m - 1 - n];
        r.eigenvectors.col(n) = solver.eigenvectors().col(m - 1 - n).cwiseQuotient(sqrt_z);
    }
    // sign fix: largest-magnitude entry positive (first one on ties)
    for (int n = 0; n < m; ++n) {
        int arg = 0;
        double best = -1.0;
        for (int i = 0; i < m; ++i) {
            double v = std::abs(r.eigenvectors(i, n));
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        if (r.eigenvectors(arg, n) < 0.0) r.eigenvectors.col(n) = -r.eigenvectors.col(n);
    }
    // canonical order for exactly degenerate eigenvalues: lexicographic
    // eigenvector comparison after sign fixing
    for (int n = 0; n + 1 < m; ++n) {
        if (r.eigenvalues[n] == r.eigenvalues[n + 1]) {
            for (int i = 0; i < m; ++i) {
                double d = r.eigenvectors(i, n) - r.eigenvectors(i, n + 1);
                if (d < 0.0) {
                    r.eigenvectors.col(n).swap(r.eigenvectors.col(n + 1));
                    break;
                }
                if (d > 0.0) break;
            }
        }
    }

    r.degeneracy_count = 0;
    for (int n = 0; n < m; ++n)
        if (r.eigenvalues[n] > 1.0 - near_one_delta) ++r.degeneracy_count;
    r.gap = (r.degeneracy_count >= 1 && r.degeneracy_count < m)
                ? r.eigenvalues[r.degeneracy_count - 1] - r.eigenvalues[r.degeneracy_count]
                : 0.0;
    return r;
}

double diffusion_distance_direct(const Eigen::MatrixXd& p, const Eigen::VectorXd& z, int t, int l, int lp) {
    if (t < 1) throw std::invalid_argument("diffusion_distance: t must be >= 1");
    Eigen::MatrixXd pt = p;
    for (int i = 1; i < t; ++i) pt = (pt * p).eval();
    double d = 0.0;
    for (int j = 0; j < p.rows(); ++j) {
        double diff = pt(l, j) - pt(lp, j);
        d += diff * diff / z[j];
    }
    return d;
}

double diffusion_distance_spectral(const DiffusionResult& r, int t, int l, int lp) {
    if (t < 1) throw std::invalid_argument("diffusion_distance: t must be >= 1");
    double d = 0.0;
    for (int n = 1; n < r.eigenvalues.size(); ++n) {
        double diff = r.eigenvectors(l, n) - r.eigenvectors(lp, n);
        d += std::pow(r.eigenvalues[n], 2 * t) * diff * diff;
    }
    return d;
}

std::vector<double> log_spaced_grid(double lo, double hi, int n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw std::invalid_argument("log_spaced_grid: bad range");
    std::vector<double> g(n);
    double llo = std::log(lo), lhi = std::log(hi);
    for (int i = 0; i < n; ++i) g[i] = std::exp(llo + (lhi - llo) * i / (n - 1));
    return g;
}

SweepResult epsilon_sweep(const SimilarityMatrix& S, const SweepConfig& cfg) {
    if (cfg.eps_grid.empty()) throw std::invalid_argument("epsilon_sweep: empty epsilon grid");
    SweepResult res;
    const int m = S.m;
    std::vector<int> deg;
    std::vector<bool> valid;
    for (double eps : cfg.eps_grid) {
        auto [p, z] = transition_matrix(build_kernel(S, eps));
        DiffusionResult r = spectrum(p, z, cfg.near_one_delta);
        r.epsilon = eps;
        deg.push_back(r.degeneracy_count);
        valid.push_back(r.degeneracy_count < m && r.gap > cfg.gap_threshold);
        res.per_eps.push_back(std::move(r));
    }

    // longest runs of constant, gapped degeneracy count
    int detected = 1;
    int n = static_cast<int>(deg.size());
    for (int i = 0; i < n;) {
        if (!valid[i]) {
            ++i;
            continue;
        }
        int j = i;
        while (j < n && valid[j] && deg[j] == deg[i]) ++j;
        if (j - i >= cfg.min_persist) detected = std::max(detected, deg[i]);
        i = j;
    }
    res.detected_sectors = detected;

    // representative epsilon: largest gap among plateau points (fallback:
    // global largest gap)
    int best = -1;
    for (int i = 0; i < n; ++i)
        if (valid[i] && deg[i] == detected && (best < 0 || res.per_eps[i].gap > res.per_eps[best].gap))
            best = i;
    if (best < 0)
        for (int i = 0; i < n; ++i)
            if (best < 0 || res.per_eps[i].gap > res.per_eps[best].gap) best = i;
    res.best_eps_index = best;
    return res;
}

namespace {
double sq_dist(const Eigen::MatrixXd& pts, int i, const Eigen::VectorXd& c) {
    return (pts.row(i).transpose() - c).squaredNorm();
}
}  // namespace

ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, int n_restarts, int max_iterations,
                         double tol, std::uint64_t seed) {
    const int m = static_cast<int>(points.rows());
    const int dim = static_cast<int>(points.cols());
    if (k < 1 || k > m) throw std::invalid_argument("kmeans: need 1 <= k <= number of points");

    ClusterAssignment best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < std::max(1, n_restarts); ++restart) {
        Rng rng(derive_seed(seed, {0x6b6d6e73ULL, static_cast<std::uint64_t>(restart)}));  // "kmns"
        // plus-plus seeding
        Eigen::MatrixXd centers(k, dim);
        centers.row(0) = points.row(rng.uniform_int(m));
        std::vector<double> d2(m);
        for (int c = 1; c < k; ++c) {
            double total = 0.0;
            for (int i = 0; i < m; ++i) {
                double dmin = std::numeric_limits<double>::infinity();
                for (int cc = 0; cc < c; ++cc)
                    dmin = std::min(dmin, sq_dist(points, i, centers.row(cc).transpose()));
                d2[i] = dmin;
                total += dmin;
            }
            if (total <= 0.0) {
                centers.row(c) = points.row(rng.uniform_int(m));
                continue;
            }
            double u = rng.uniform01() * total;
            int pick = 0;
            double acc = 0.0;
            for (int i = 0; i < m; ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
            centers.row(c) = points.row(pick);
        }

        std::vector<int> labels(m, 0);
        double inertia = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < max_iterations; ++iter) {
            double new_inertia = 0.0;
            for (int i = 0; i < m; ++i) {
                double dmin = std::numeric_limits<double>::infinity();
                int arg = 0;
                for (int c = 0; c < k; ++c) {
                    double d = sq_dist(points, i, centers.row(c).transpose());
                    if (d < dmin) {
                        dmin = d;
                        arg = c;
                    }
                }
                labels[i] = arg;
                new_inertia += dmin;
            }
            // update step; re-seed any emptied cluster with the farthest point
            Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
            std::vector<int> counts(k, 0);
            for (int i = 0; i < m; ++i) {
                sums.row(labels[i]) += points.row(i);
                ++counts[labels[i]];
            }
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0) {
                    centers.row(c) = sums.row(c) / counts[c];
                } else {
                    int far = 0;
                    double dmax = -1.0;
                    for (int i = 0; i < m; ++i) {
                        double d = sq_dist(points, i, centers.row(labels[i]).transpose());
                        if (d > dmax) {
                            dmax = d;
                            far = i;
                        }
                    }
                    centers.row(c) = points.row(far);
                }
            }
            if (inertia - new_inertia < tol * std::max(1.0, inertia) && iter > 0) {
                inertia = new_inertia;
                break;
            }
            inertia = new_inertia;
        }

        if (inertia < best.inertia) {
            best.k = k;
            best.labels = labels;
            best.centers = centers;
            best.inertia = inertia;
        }
    }
    return best;
}

ClusterAssignment kmeans_embed(const DiffusionResult& r, int k, int n_restarts, std::uint64_t seed) {
    const int m = static_cast<int>(r.eigenvectors.rows());
    if (k > m) throw std::invalid_argument("kmeans_embed: k exceeds sample count");
    int dim = std::max(1, k - 1);
    dim = std::min(dim, m - 1 > 0 ? m - 1 : 1);
    // components psi_1 .. psi_{k-1}; for k = 1 cluster on psi_1 alone
    Eigen::MatrixXd pts(m, dim);
    for (int d = 0; d < dim; ++d) pts.col(d) = r.eigenvectors.col(std::min(d + 1, m - 1));
    return kmeans(pts, k, n_restarts, 300, 1e-6, seed);
}

}  // namespace toricdm
