#pragma once

#include <algorithm>

#include "aoa/array.hpp"
#include "aoa/subspace.hpp"

namespace aoa {

/// Angle estimates for one observation. delays_s is filled by the joint
/// angle-delay estimator only, paired index-wise with angles_deg.
struct AngleEstimate {
    std::vector<double> angles_deg;
    std::vector<double> delays_s;
    double selected_los_deg = 0.0;
    bool incomplete = false;  // fewer peaks found than requested
    bool clipped = false;     // an eigenvalue phase mapped outside |sin| <= 1
};

struct MusicSpectrum {
    std::vector<double> grid_deg;
    std::vector<double> pseudo_spectrum;
};

namespace doa_detail {

/// Phase advance per element at angle theta: a_m = exp(j m * phase(theta)).
inline double element_phase(const UlaGeometry& geom, double theta_deg) {
    return -2.0 * kPi * geom.carrier_hz * geom.spacing_m *
           std::sin(theta_deg * kPi / 180.0) / kSpeedOfLight;
}

/// Cached steering vectors over the search grid, keyed by geometry and step.
struct SteeringGrid {
    std::vector<double> grid_deg;
    Eigen::MatrixXcd a;  // M x n_grid
};

inline const SteeringGrid& steering_grid(const UlaGeometry& geom, double step_deg) {
    struct Key {
        int m;
        double spacing, carrier, step;
        bool operator==(const Key&) const = default;
    };
    thread_local std::vector<std::pair<Key, SteeringGrid>> cache;
    Key key{geom.m_elements, geom.spacing_m, geom.carrier_hz, step_deg};
    for (auto& [k, g] : cache)
        if (k == key) return g;

    SteeringGrid g;
    for (double theta = -90.0 + step_deg; theta < 90.0 - 0.5 * step_deg; theta += step_deg)
        g.grid_deg.push_back(theta);
    g.a.resize(geom.m_elements, static_cast<Eigen::Index>(g.grid_deg.size()));
    for (std::size_t i = 0; i < g.grid_deg.size(); ++i) {
        double step = element_phase(geom, g.grid_deg[i]);
        for (int m = 0; m < geom.m_elements; ++m)
            g.a(m, static_cast<Eigen::Index>(i)) = std::polar(1.0, step * m);
    }
    if (cache.size() >= 8) cache.erase(cache.begin());
    cache.emplace_back(key, std::move(g));
    return cache.back().second;
}

/// ||U_n^H a(theta)||^2, the quantity MUSIC minimizes.
inline double noise_projection(const Eigen::MatrixXcd& noise_subspace,
                               const UlaGeometry& geom, double theta_deg) {
    double step = element_phase(geom, theta_deg);
    Eigen::VectorXcd a(geom.m_elements);
    for (int m = 0; m < geom.m_elements; ++m) a(m) = std::polar(1.0, step * m);
    return (noise_subspace.adjoint() * a).squaredNorm();
}

/// Golden-section minimization of the projection around a grid peak. Removes
/// the grid bias so noiseless estimates are exact to machine precision.
inline double refine_peak(const Eigen::MatrixXcd& noise_subspace, const UlaGeometry& geom,
                          double lo, double hi) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = noise_projection(noise_subspace, geom, x1);
    double f2 = noise_projection(noise_subspace, geom, x2);
    for (int it = 0; it < 90 && b - a > 1e-13; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = noise_projection(noise_subspace, geom, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = noise_projection(noise_subspace, geom, x2);
        }
    }
    return 0.5 * (a + b);
}

/// theta = arcsin(-phase * lambda / (2 pi d)); clamps out-of-range arguments.
inline double phase_to_angle_deg(double phase, const UlaGeometry& geom, bool& clipped) {
    double s = -phase * geom.wavelength() / (2.0 * kPi * geom.spacing_m);
    if (s > 1.0) {
        s = 1.0;
        clipped = true;
    } else if (s < -1.0) {
        s = -1.0;
        clipped = true;
    }
    return std::asin(s) * 180.0 / kPi;
}

inline Eigen::MatrixXcd least_squares(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    return a.completeOrthogonalDecomposition().solve(b);
}

}  // namespace doa_detail

/**
 * MUSIC pseudo-spectrum search. The noise subspace is spanned by the
 * eigenvectors beyond the k strongest; the spectrum 1 / (a^H U_n U_n^H a) is
 * evaluated on a uniform grid and the k largest local maxima are refined off
 * the grid. Returns fewer angles with `incomplete` set when the spectrum has
 * fewer than k peaks.
 */
inline std::pair<MusicSpectrum, AngleEstimate> music(const EigenDecomposition& eig,
                                                     const UlaGeometry& geom, int k,
                                                     double grid_step_deg = 0.01) {
    geom.validate();
    const int m = static_cast<int>(eig.values.size());
    if (k < 1 || k >= m) throw OrderError("music: order must satisfy 1 <= k <= M-1");
    if (grid_step_deg <= 0.0) throw ConfigError("music: grid step must be positive");

    Eigen::MatrixXcd noise = eig.vectors.rightCols(m - k);
    const auto& sg = doa_detail::steering_grid(geom, grid_step_deg);
    const auto n_grid = static_cast<Eigen::Index>(sg.grid_deg.size());

    MusicSpectrum spectrum;
    spectrum.grid_deg = sg.grid_deg;
    spectrum.pseudo_spectrum.resize(sg.grid_deg.size());
    Eigen::MatrixXcd proj = noise.adjoint() * sg.a;  // (M-k) x n_grid
    for (Eigen::Index i = 0; i < n_grid; ++i) {
        double denom = std::max(proj.col(i).squaredNorm(), 1e-300);
        spectrum.pseudo_spectrum[static_cast<std::size_t>(i)] = 1.0 / denom;
    }

    // Interior local maxima, strongest first.
    std::vector<std::size_t> peaks;
    for (std::size_t i = 1; i + 1 < spectrum.pseudo_spectrum.size(); ++i)
        if (spectrum.pseudo_spectrum[i] >= spectrum.pseudo_spectrum[i - 1] &&
            spectrum.pseudo_spectrum[i] > spectrum.pseudo_spectrum[i + 1])
            peaks.push_back(i);
    std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
        return spectrum.pseudo_spectrum[a] > spectrum.pseudo_spectrum[b];
    });
    if (peaks.size() > static_cast<std::size_t>(k)) peaks.resize(static_cast<std::size_t>(k));

    AngleEstimate est;
    est.incomplete = peaks.size() < static_cast<std::size_t>(k);
    for (std::size_t idx : peaks) {
        double lo = sg.grid_deg[idx] - grid_step_deg;
        double hi = sg.grid_deg[idx] + grid_step_deg;
        est.angles_deg.push_back(doa_detail::refine_peak(noise, geom, lo, hi));
    }
    std::sort(est.angles_deg.begin(), est.angles_deg.end());
    if (!est.angles_deg.empty()) est.selected_los_deg = est.angles_deg.front();
    return {std::move(spectrum), std::move(est)};
}

/**
 * Subarray-rotation estimator. The k signal eigenvectors restricted to rows
 * 0..M-2 and 1..M-1 are related by S1 P = S2; the eigenvalue phases of the
 * least-squares P map to angles via arcsin.
 */
inline AngleEstimate esprit(const EigenDecomposition& eig, const UlaGeometry& geom, int k) {
    geom.validate();
    const int m = static_cast<int>(eig.values.size());
    if (k < 1 || k >= m) throw OrderError("esprit: order must satisfy 1 <= k <= M-1");

    Eigen::MatrixXcd s = eig.vectors.leftCols(k);
    Eigen::MatrixXcd s1 = s.topRows(m - 1);
    Eigen::MatrixXcd s2 = s.bottomRows(m - 1);
    Eigen::MatrixXcd p = doa_detail::least_squares(s1, s2);

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(p);
    if (solver.info() != Eigen::Success) throw NumericError("esprit: eigensolver failed");

    AngleEstimate est;
    for (int i = 0; i < k; ++i) {
        double phase = std::arg(solver.eigenvalues()(i));
        est.angles_deg.push_back(doa_detail::phase_to_angle_deg(phase, geom, est.clipped));
    }
    std::sort(est.angles_deg.begin(), est.angles_deg.end());
    est.selected_los_deg = est.angles_deg.front();
    return est;
}

/**
 * Joint angle-delay estimator on the channel matrix.
 *
 * The pilot-subcarrier x antenna CSI is smoothed into a block-Hankel matrix by
 * stacking m1 subcarrier-shifted copies (and m2 antenna shifts); its rank-k
 * column space factors as (delay response  (x)  antenna response) * gains, so
 * two shift-invariance equations share one similarity transform. A joint
 * eigenbasis of both rotation estimates pairs each angle with its delay.
 *
 * Delays are normalized by the pilot spacing carried in the CsiMatrix, so they
 * come out in seconds regardless of the comb factor.
 */
inline AngleEstimate esprit2d(const CsiMatrix& csi, const UlaGeometry& geom, int k,
                              int m1 = 5, int m2 = 1) {
    geom.validate();
    const int n_pilot = static_cast<int>(csi.h.rows());
    const int m = static_cast<int>(csi.h.cols());
    if (m != geom.m_elements) throw DimensionError("esprit2d: CSI antenna count mismatch");
    if (k < 1) throw OrderError("esprit2d: order must be positive");
    if (m1 < 2 || n_pilot <= m1) throw ConfigError("esprit2d: need 2 <= m1 < pilot count");
    if (m2 < 1 || m - m2 < 1) throw ConfigError("esprit2d: need 1 <= m2 <= M-1");
    if (csi.pilot_spacing_hz <= 0.0) throw ConfigError("esprit2d: missing pilot spacing");

    const int block = m - m2 + 1;           // antennas per (s, t) block
    const int rows = m1 * m2 * block;
    const int cols = n_pilot - m1 + 1;
    if (rows <= k || cols < k) throw OrderError("esprit2d: stacking too small for order");

    Eigen::MatrixXcd u(rows, cols);
    for (int s = 0; s < m1; ++s)
        for (int t = 0; t < m2; ++t)
            for (int a = 0; a < block; ++a) {
                int r = (s * m2 + t) * block + a;
                for (int f = 0; f < cols; ++f) u(r, f) = csi.h(f + s, a + t);
            }

    // Signal subspace from the Gram matrix (rows x rows, small).
    Eigen::MatrixXcd gram = u * u.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> gram_eig(gram);
    if (gram_eig.info() != Eigen::Success) throw NumericError("esprit2d: eigensolver failed");
    Eigen::VectorXd gvals = gram_eig.eigenvalues().reverse();
    double floor = std::max(gvals(0), 1e-300) * 1e-14;
    int rank = 0;
    for (int i = 0; i < rows; ++i)
        if (gvals(i) > floor) ++rank;
    if (k > rank)
        throw OrderError("esprit2d: order " + std::to_string(k) +
                         " exceeds numerical rank " + std::to_string(rank));
    Eigen::MatrixXcd us(rows, k);
    for (int i = 0; i < k; ++i) us.col(i) = gram_eig.eigenvectors().col(rows - 1 - i);

    // Shift-invariance selections: rows advanced by one subcarrier shift
    // (delay rotation) and rows advanced by one antenna (angle rotation).
    std::vector<int> tau1, tau2, ang1, ang2;
    for (int s = 0; s < m1; ++s)
        for (int t = 0; t < m2; ++t)
            for (int a = 0; a < block; ++a) {
                int r = (s * m2 + t) * block + a;
                if (s + 1 < m1) {
                    tau1.push_back(r);
                    tau2.push_back(r + m2 * block);
                }
                if (a + 1 < block) {
                    ang1.push_back(r);
                    ang2.push_back(r + 1);
                }
            }

    auto select = [&us](const std::vector<int>& idx) {
        Eigen::MatrixXcd out(static_cast<Eigen::Index>(idx.size()), us.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = us.row(idx[i]);
        return out;
    };

    Eigen::MatrixXcd f_tau = doa_detail::least_squares(select(tau1), select(tau2));
    Eigen::MatrixXcd f_ang = doa_detail::least_squares(select(ang1), select(ang2));

    // Joint diagonalization: eigenvectors of a fixed mix diagonalize both
    // rotations, pairing each angle with its delay.
    constexpr double beta = 0.6180339887498949;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> joint(f_tau + beta * f_ang);
    if (joint.info() != Eigen::Success) throw NumericError("esprit2d: joint eigensolver failed");
    Eigen::MatrixXcd v = joint.eigenvectors();
    Eigen::MatrixXcd v_inv = v.inverse();
    Eigen::VectorXcd psi = (v_inv * f_tau * v).diagonal();
    Eigen::VectorXcd xi = (v_inv * f_ang * v).diagonal();

    AngleEstimate est;
    std::vector<std::pair<double, double>> pairs;  // (delay, angle)
    for (int i = 0; i < k; ++i) {
        double tau = -std::arg(psi(i)) / (2.0 * kPi * csi.pilot_spacing_hz);
        double angle = doa_detail::phase_to_angle_deg(std::arg(xi(i)), geom, est.clipped);
        pairs.emplace_back(tau, angle);
    }
    std::sort(pairs.begin(), pairs.end());
    for (auto& [tau, angle] : pairs) {
        est.delays_s.push_back(tau);
        est.angles_deg.push_back(angle);
    }
    est.selected_los_deg = est.angles_deg.front();  // smallest delay
    return est;
}

/// Conventional beamformer power a^H(theta) R a(theta).
inline double beamformer_power(const Covariance& cov, const UlaGeometry& geom,
                               double theta_deg) {
    Eigen::VectorXcd a = steering_vector(geom, theta_deg);
    return std::real(cd(a.adjoint() * cov.r * a));
}

/// LOS pick for the covariance-domain estimators: the candidate with maximal
/// conventional beamformer power.
inline double select_los_beamformer(const AngleEstimate& est, const Covariance& cov,
                                    const UlaGeometry& geom) {
    if (est.angles_deg.empty()) throw ConfigError("select_los: no candidates");
    double best = est.angles_deg.front();
    double best_power = -std::numeric_limits<double>::infinity();
    for (double theta : est.angles_deg) {
        double p = beamformer_power(cov, geom, theta);
        if (p > best_power) {
            best_power = p;
            best = theta;
        }
    }
    return best;
}

/// LOS pick for paired angle/delay estimates: the smallest delay wins; exact
/// delay ties fall back to the matched-filter power of the (angle, delay) atom
/// against the channel matrix.
inline double select_los_min_delay(const AngleEstimate& est, const CsiMatrix& csi,
                                   const UlaGeometry& geom) {
    if (est.angles_deg.empty()) throw ConfigError("select_los: no candidates");
    if (est.delays_s.size() != est.angles_deg.size()) return est.angles_deg.front();

    auto matched_power = [&](double theta_deg, double tau) {
        Eigen::VectorXcd a = steering_vector(geom, theta_deg);
        cd acc{0.0, 0.0};
        for (Eigen::Index kk = 0; kk < csi.h.rows(); ++kk) {
            cd ramp = std::polar(1.0, -2.0 * kPi * csi.pilot_spacing_hz * tau *
                                          static_cast<double>(kk));
            for (Eigen::Index mm = 0; mm < csi.h.cols(); ++mm)
                acc += std::conj(a(mm) * ramp) * csi.h(kk, mm);
        }
        return std::norm(acc);
    };

    std::size_t best = 0;
    for (std::size_t i = 1; i < est.delays_s.size(); ++i) {
        if (est.delays_s[i] < est.delays_s[best] - 1e-15) {
            best = i;
        } else if (std::abs(est.delays_s[i] - est.delays_s[best]) <= 1e-15 &&
                   matched_power(est.angles_deg[i], est.delays_s[i]) >
                       matched_power(est.angles_deg[best], est.delays_s[best])) {
            best = i;
        }
    }
    return est.angles_deg[best];
}

/**
 * Single-source angle variance bound for the deterministic signal model, in
 * squared degrees:
 *
 *   var >= 6 / (N * snr * (2 pi d / lambda)^2 cos^2(theta) * M (M^2 - 1))
 *
 * snr_db is the per-element per-snapshot SNR. Decreases with SNR, N and M.
 */
inline double crb_single_source(const UlaGeometry& geom, double snr_db, long n_snapshots,
                                double theta_deg) {
    geom.validate();
    if (n_snapshots < 1) throw ConfigError("crb_single_source: need snapshots");
    double snr = db_to_linear(snr_db);
    if (!(snr > 0.0)) throw ConfigError("crb_single_source: SNR must be positive");
    if (std::isinf(snr)) return 0.0;
    double alpha = 2.0 * kPi * geom.spacing_m / geom.wavelength();
    double cos_t = std::cos(theta_deg * kPi / 180.0);
    double m = geom.m_elements;
    double fisher =
        2.0 * n_snapshots * snr * alpha * alpha * cos_t * cos_t * m * (m * m - 1.0) / 12.0;
    double var_rad = 1.0 / fisher;
    return var_rad * (180.0 / kPi) * (180.0 / kPi);
}

}  // namespace aoa
