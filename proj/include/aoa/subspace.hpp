#pragma once

#include <cstdio>

#include "aoa/waveform.hpp"

namespace aoa {

/// Frequency-domain snapshots: one row per antenna, one column per
/// (sounding symbol, comb subcarrier) pair.
struct SnapshotMatrix {
    Eigen::MatrixXcd y;

    Eigen::Index n_antennas() const { return y.rows(); }
    Eigen::Index n_snapshots() const { return y.cols(); }
};

/// Hermitian sample covariance of the snapshots.
struct Covariance {
    Eigen::MatrixXcd r;
};

/// Eigenvalues sorted descending with matching orthonormal eigenvectors.
struct EigenDecomposition {
    Eigen::VectorXd values;
    Eigen::MatrixXcd vectors;
};

/// Column per (symbol, comb subcarrier), symbol-major; row per antenna.
inline SnapshotMatrix snapshots_from_grid(const std::vector<ResourceGrid>& rx_grids,
                                          const SrsConfig& config) {
    config.validate();
    if (rx_grids.empty()) throw DimensionError("snapshots_from_grid: no antenna grids");
    const int n_pilot = config.n_pilot_subcarriers();
    const int n_sym = std::min<int>(config.n_srs_symbols,
                                    static_cast<int>(rx_grids[0].n_symbols()));
    const auto n_ant = static_cast<Eigen::Index>(rx_grids.size());

    SnapshotMatrix snap;
    snap.y.resize(n_ant, static_cast<Eigen::Index>(n_pilot) * n_sym);
    for (Eigen::Index m = 0; m < n_ant; ++m) {
        const ResourceGrid& g = rx_grids[static_cast<std::size_t>(m)];
        if (g.n_subcarriers() != config.n_active_subcarriers || g.n_symbols() < n_sym)
            throw DimensionError("snapshots_from_grid: grid dimensions mismatch");
        for (int l = 0; l < n_sym; ++l)
            for (int k = 0; k < n_pilot; ++k)
                snap.y(m, static_cast<Eigen::Index>(l) * n_pilot + k) =
                    g.cells(k * config.comb_ktc, l);
    }
    return snap;
}

/// R = (1/N) Y Y^H, symmetrized so it is Hermitian to machine precision.
inline Covariance covariance(const SnapshotMatrix& snap) {
    if (snap.n_snapshots() < 1) throw DimensionError("covariance: no snapshots");
    Eigen::MatrixXcd r =
        (snap.y * snap.y.adjoint()) / static_cast<double>(snap.n_snapshots());
    Covariance cov;
    cov.r = 0.5 * (r + r.adjoint());
    return cov;
}

/// Self-adjoint eigendecomposition, descending order.
inline EigenDecomposition eigen_sorted(const Covariance& cov) {
    const auto m = cov.r.rows();
    if (m == 0 || cov.r.cols() != m) throw DimensionError("eigen_sorted: not square");
    double scale = std::max(cov.r.cwiseAbs().maxCoeff(), 1e-300);
    if (((cov.r - cov.r.adjoint()).cwiseAbs().maxCoeff()) > 1e-9 * scale)
        throw NumericError("eigen_sorted: input is not Hermitian");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(cov.r);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigen_sorted: eigendecomposition failed");

    EigenDecomposition eig;
    eig.values.resize(m);
    eig.vectors.resize(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        eig.values(i) = solver.eigenvalues()(m - 1 - i);
        eig.vectors.col(i) = solver.eigenvectors().col(m - 1 - i);
    }
    return eig;
}

/// Normalization of the likelihood ratio's arithmetic-mean denominator.
enum class LikelihoodNorm {
    trailing_mean,    // 1/(M-k), the standard form (default)
    fixed_m_minus_1,  // 1/(M-1), kept for curve comparison
};

/// L(k): geometric over arithmetic mean of the trailing M-k eigenvalues.
/// Equals 1 iff the trailing eigenvalues are all equal.
inline double likelihood_l(const Eigen::VectorXd& values, int k,
                           LikelihoodNorm norm = LikelihoodNorm::trailing_mean) {
    const int m = static_cast<int>(values.size());
    if (k < 0 || k >= m) throw OrderError("likelihood_l: k out of range");
    double log_geo = 0.0;
    double sum = 0.0;
    for (int i = k; i < m; ++i) {
        double z = values(i);
        if (z <= 0.0) {
            std::fprintf(stderr, "likelihood_l: clamping nonpositive eigenvalue %g\n", z);
            z = 1e-30;
        }
        log_geo += std::log(z);
        sum += z;
    }
    const int trailing = m - k;
    log_geo /= trailing;
    double denom = norm == LikelihoodNorm::trailing_mean ? sum / trailing : sum / (m - 1);
    return std::exp(log_geo - std::log(denom));
}

namespace order_detail {

template <typename PenaltyFn>
int argmin_criterion(const Eigen::VectorXd& values, long n_snapshots, PenaltyFn penalty,
                     LikelihoodNorm norm) {
    const int m = static_cast<int>(values.size());
    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
        double data_term =
            -2.0 * static_cast<double>(n_snapshots) * (m - k) * std::log(likelihood_l(values, k, norm));
        double value = data_term + penalty(k, m);
        if (value < best) {  // ties keep the smaller k
            best = value;
            best_k = k;
        }
    }
    return best_k;
}

}  // namespace order_detail

/// Akaike criterion: argmin_k -2N(M-k) ln L(k) + 2k(2M-k).
inline int aic_order(const Eigen::VectorXd& values, long n_snapshots,
                     LikelihoodNorm norm = LikelihoodNorm::trailing_mean) {
    if (n_snapshots < 1) throw ConfigError("aic_order: need at least one snapshot");
    return order_detail::argmin_criterion(
        values, n_snapshots, [](int k, int m) { return 2.0 * k * (2 * m - k); }, norm);
}

/// Minimum description length: argmin_k -2N(M-k) ln L(k) + (k/2)(2M-k) ln N.
inline int mdl_order(const Eigen::VectorXd& values, long n_snapshots,
                     LikelihoodNorm norm = LikelihoodNorm::trailing_mean) {
    if (n_snapshots < 1) throw ConfigError("mdl_order: need at least one snapshot");
    double log_n = std::log(static_cast<double>(n_snapshots));
    return order_detail::argmin_criterion(
        values, n_snapshots,
        [log_n](int k, int m) { return 0.5 * k * (2 * m - k) * log_n; }, norm);
}

/// Consecutive-eigenvalue-ratio criterion:
/// ECOD(l) = z_l / (z_{l-1} - 2 z_l) when l > 0 and z_l <= z_{l-1}/3, else 1;
/// returns argmin_l (ties toward the smallest l).
inline int ecod_order(const Eigen::VectorXd& values) {
    const int m = static_cast<int>(values.size());
    int best_l = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int l = 0; l < m; ++l) {
        double v = 1.0;
        if (l > 0 && values(l) <= values(l - 1) / 3.0) {
            double denom = values(l - 1) - 2.0 * values(l);
            v = denom > 0.0 ? values(l) / denom : 1.0;
        }
        if (v < best) {
            best = v;
            best_l = l;
        }
    }
    return best_l;
}

}  // namespace aoa
