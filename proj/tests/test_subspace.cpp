#include <catch2/catch_amalgamated.hpp>

#include "aoa/subspace.hpp"
#include "aoa/array.hpp"
#include "oracles.hpp"

using namespace aoa;
using Catch::Approx;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

/// Direct snapshot-domain simulation: y_k = sum_i a_i h_ik + n_k.
SnapshotMatrix simulate_snapshots(const UlaGeometry& geom,
                                  const std::vector<double>& thetas,
                                  const std::vector<double>& powers, long n,
                                  double noise_var, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    SnapshotMatrix snap;
    snap.y = Eigen::MatrixXcd::Zero(geom.m_elements, n);
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        Eigen::VectorXcd a = steering_vector(geom, thetas[i]);
        double amp = std::sqrt(powers[i]);
        for (long k = 0; k < n; ++k) {
            cd h = std::polar(amp, std::uniform_real_distribution<double>(-kPi, kPi)(rng));
            snap.y.col(k) += a * h;
        }
    }
    double s = std::sqrt(noise_var / 2.0);
    for (long k = 0; k < n; ++k)
        for (int m = 0; m < geom.m_elements; ++m)
            snap.y(m, k) += cd{dist(rng) * s, dist(rng) * s};
    return snap;
}

}  // namespace

TEST_CASE("snapshot assembly from per-antenna grids") {
    SrsConfig cfg = SrsConfig::standard();
    UlaGeometry geom = UlaGeometry::half_wavelength(3, 2.4e9);
    auto seq = generate_srs_sequence(cfg);
    ResourceGrid base = map_to_grid(seq, cfg);

    SECTION("default configuration yields 3 x 3192") {
        std::vector<ResourceGrid> grids{base, base, base};
        SnapshotMatrix snap = snapshots_from_grid(grids, cfg);
        CHECK(snap.n_antennas() == 3);
        CHECK(snap.n_snapshots() == 3192);
    }

    SECTION("zero grids give a zero matrix") {
        ResourceGrid z;
        z.cells = Eigen::MatrixXcd::Zero(cfg.n_active_subcarriers, cfg.n_slot_symbols);
        SnapshotMatrix snap = snapshots_from_grid({z, z, z}, cfg);
        CHECK(snap.y.norm() == 0.0);
    }

    SECTION("single path makes every column proportional to the steering vector") {
        Eigen::VectorXcd a = steering_vector(geom, 24.0);
        std::vector<ResourceGrid> grids;
        for (int m = 0; m < 3; ++m) {
            ResourceGrid g = base;
            g.cells *= a(m);
            grids.push_back(std::move(g));
        }
        SnapshotMatrix snap = snapshots_from_grid(grids, cfg);
        for (Eigen::Index k = 0; k < snap.n_snapshots(); k += 457) {
            // cross-product with the steering vector must vanish
            Eigen::VectorXcd col = snap.y.col(k);
            cd scale = col(0) / a(0);
            CHECK((col - scale * a).norm() < 1e-12);
        }
    }

    SECTION("mismatched grids are rejected") {
        ResourceGrid small;
        small.cells = Eigen::MatrixXcd::Zero(8, 14);
        CHECK_THROWS_AS(snapshots_from_grid({base, small}, cfg), DimensionError);
    }
}

TEST_CASE("covariance structure") {
    SECTION("one column gives the outer product") {
        SnapshotMatrix snap;
        snap.y.resize(3, 1);
        snap.y.col(0) << cd{1.0, 1.0}, cd{0.0, -2.0}, cd{0.5, 0.0};
        Covariance cov = covariance(snap);
        Eigen::MatrixXcd expect = snap.y.col(0) * snap.y.col(0).adjoint();
        CHECK((cov.r - expect).norm() < 1e-14);
    }

    SECTION("white noise concentrates to the identity") {
        Rng rng(42);
        UlaGeometry geom = UlaGeometry::half_wavelength(3, 2.4e9);
        SnapshotMatrix snap = simulate_snapshots(geom, {}, {}, 100000, 1.0, rng);
        Covariance cov = covariance(snap);
        double rel = (cov.r - Eigen::MatrixXcd::Identity(3, 3)).norm() /
                     Eigen::MatrixXcd::Identity(3, 3).norm();
        CHECK(rel < 0.02);
    }

    SECTION("noiseless single source is rank one with z1 = M p") {
        Rng rng(43);
        UlaGeometry geom = UlaGeometry::half_wavelength(3, 2.4e9);
        SnapshotMatrix snap = simulate_snapshots(geom, {17.0}, {2.5}, 4096, 0.0, rng);
        EigenDecomposition eig = eigen_sorted(covariance(snap));
        CHECK(eig.values(0) == Approx(3.0 * 2.5).epsilon(0.08));
        CHECK(std::abs(eig.values(1)) < 1e-10);
        CHECK(std::abs(eig.values(2)) < 1e-10);
    }

    SECTION("scale equivariance") {
        Rng rng(44);
        UlaGeometry geom = UlaGeometry::half_wavelength(3, 2.4e9);
        SnapshotMatrix snap = simulate_snapshots(geom, {5.0}, {1.0}, 64, 0.5, rng);
        Covariance base = covariance(snap);
        SnapshotMatrix scaled;
        scaled.y = snap.y * cd{2.0, 0.0};
        Covariance big = covariance(scaled);
        CHECK((big.r - 4.0 * base.r).norm() < 1e-10 * base.r.norm());
    }
}

TEST_CASE("eigendecomposition contract") {
    SECTION("identity and diagonal inputs") {
        Covariance cov;
        cov.r = Eigen::MatrixXcd::Identity(3, 3);
        EigenDecomposition eig = eigen_sorted(cov);
        for (int i = 0; i < 3; ++i) CHECK(eig.values(i) == Approx(1.0));

        cov.r = Eigen::Vector3d(3.0, 2.0, 1.0).asDiagonal().toDenseMatrix().cast<cd>();
        eig = eigen_sorted(cov);
        CHECK(eig.values(0) == Approx(3.0));
        CHECK(eig.values(1) == Approx(2.0));
        CHECK(eig.values(2) == Approx(1.0));
    }

    SECTION("random Hermitian matrices match the characteristic-polynomial roots") {
        Rng rng(7);
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int t = 0; t < 60; ++t) {
            Eigen::Matrix3cd b;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) b(i, j) = cd{dist(rng), dist(rng)};
            Eigen::Matrix3cd h = b * b.adjoint();
            Covariance cov;
            cov.r = h;
            EigenDecomposition eig = eigen_sorted(cov);
            Eigen::Vector3d roots = oracles::hermitian3_eigenvalues_charpoly(h);
            double scale = std::max(1.0, roots.cwiseAbs().maxCoeff());
            for (int i = 0; i < 3; ++i)
                CHECK(std::abs(eig.values(i) - roots(i)) < 1e-8 * scale);
            // residual and orthonormality
            for (int i = 0; i < 3; ++i) {
                Eigen::Vector3cd v = eig.vectors.col(i);
                CHECK((h * v - eig.values(i) * v).norm() < 1e-8 * scale);
            }
            CHECK((eig.vectors.adjoint() * eig.vectors -
                   Eigen::Matrix3cd::Identity()).norm() < 1e-10);
        }
    }

    SECTION("non-Hermitian input is rejected") {
        Covariance cov;
        cov.r = Eigen::MatrixXcd::Zero(3, 3);
        cov.r(0, 1) = cd{1.0, 0.0};
        CHECK_THROWS_AS(eigen_sorted(cov), NumericError);
    }
}

TEST_CASE("likelihood ratio L(k)") {
    CHECK(likelihood_l(vec({1, 1, 1}), 0) == Approx(1.0));
    CHECK(likelihood_l(vec({4, 1, 1}), 1) == Approx(1.0));
    // (4*2*1)^(1/3) / ((4+2+1)/3) = 2 / (7/3) = 6/7
    CHECK(likelihood_l(vec({4, 2, 1}), 0) == Approx(6.0 / 7.0));

    SECTION("upper bound and trailing-singleton identity") {
        Rng rng(3);
        std::uniform_real_distribution<double> u(0.01, 10.0);
        for (int t = 0; t < 200; ++t) {
            Eigen::VectorXd v(4);
            for (int i = 0; i < 4; ++i) v(i) = u(rng);
            std::sort(v.data(), v.data() + 4, std::greater<double>());
            for (int k = 0; k < 4; ++k) {
                double l = likelihood_l(v, k);
                CHECK(l > 0.0);
                CHECK(l <= 1.0 + 1e-12);
            }
            CHECK(likelihood_l(v, 3) == Approx(1.0));
        }
    }

    SECTION("printed fixed normalizer stays available") {
        double l = likelihood_l(vec({4, 2, 1}), 1, LikelihoodNorm::fixed_m_minus_1);
        // sqrt(2)/( (2+1)/2 ) = 0.9428
        CHECK(l == Approx(std::sqrt(2.0) / 1.5));
    }

    CHECK_THROWS_AS(likelihood_l(vec({1, 1, 1}), 3), OrderError);
}

TEST_CASE("order criteria on synthetic eigenvalues") {
    SECTION("equal eigenvalues select zero sources") {
        CHECK(aic_order(vec({2, 2, 2}), 3192) == 0);
        CHECK(mdl_order(vec({2, 2, 2}), 3192) == 0);
    }

    SECTION("criteria are invariant to eigenvalue scaling") {
        Rng rng(17);
        std::uniform_real_distribution<double> u(0.05, 20.0);
        for (int t = 0; t < 100; ++t) {
            Eigen::VectorXd v(3);
            for (int i = 0; i < 3; ++i) v(i) = u(rng);
            std::sort(v.data(), v.data() + 3, std::greater<double>());
            for (double scale : {0.01, 1.0, 137.0}) {
                CHECK(aic_order(v * scale, 500) == aic_order(v, 500));
                CHECK(mdl_order(v * scale, 500) == mdl_order(v, 500));
            }
        }
    }

    SECTION("MDL never exceeds AIC once N >= 55") {
        Rng rng(18);
        std::uniform_real_distribution<double> u(0.05, 20.0);
        for (long n : {55L, 56L, 200L, 3192L})
            for (int t = 0; t < 200; ++t) {
                Eigen::VectorXd v(4);
                for (int i = 0; i < 4; ++i) v(i) = u(rng);
                std::sort(v.data(), v.data() + 4, std::greater<double>());
                CHECK(mdl_order(v, n) <= aic_order(v, n));
            }
    }

    SECTION("results stay within the admissible range") {
        Rng rng(19);
        std::uniform_real_distribution<double> u(1e-6, 5.0);
        for (int t = 0; t < 200; ++t) {
            Eigen::VectorXd v(5);
            for (int i = 0; i < 5; ++i) v(i) = u(rng);
            std::sort(v.data(), v.data() + 5, std::greater<double>());
            int ka = aic_order(v, 77), km = mdl_order(v, 77), ke = ecod_order(v);
            for (int k : {ka, km, ke}) {
                CHECK(k >= 0);
                CHECK(k <= 4);
            }
        }
    }
}

TEST_CASE("order criteria detect sources in snapshot-domain Monte Carlo") {
    UlaGeometry geom = UlaGeometry::half_wavelength(3, 2.4e9);
    const long n = 3192;

    SECTION("one source at 20 dB: AIC picks k=1 at its asymptotic rate") {
        // AIC keeps a fixed overestimation probability: the k=1 vs k=2 score
        // gap behaves like a chi-square with 3 degrees of freedom against the
        // penalty difference 6, so P(k*=2) ~ P(chi2_3 > 6) ~ 0.11. The
        // Monte-Carlo oracle measures ~0.883 for this setup; frozen with
        // 3-sigma slack.
        int hits = 0;
        const int trials = 1000;
        for (int t = 0; t < trials; ++t) {
            Rng rng(10000 + t);
            auto snap = simulate_snapshots(geom, {10.0}, {db_to_linear(20.0)}, n, 1.0, rng);
            if (aic_order(eigen_sorted(covariance(snap)).values, n) == 1) ++hits;
        }
        CHECK(hits >= 850);
        CHECK(hits <= 920);
    }

    SECTION("one source at 30 dB: MDL picks k=1 in at least 95 percent") {
        int hits = 0;
        const int trials = 1000;
        for (int t = 0; t < trials; ++t) {
            Rng rng(20000 + t);
            auto snap = simulate_snapshots(geom, {10.0}, {db_to_linear(30.0)}, n, 1.0, rng);
            if (mdl_order(eigen_sorted(covariance(snap)).values, n) == 1) ++hits;
        }
        CHECK(hits >= 950);
    }
}

TEST_CASE("consecutive-eigenvalue-ratio criterion") {
    CHECK(ecod_order(vec({9, 1, 1})) == 1);
    CHECK(ecod_order(vec({2, 2, 2})) == 0);
    CHECK(ecod_order(vec({100, 1, 0.999})) == 1);
}
