#include <catch2/catch_amalgamated.hpp>

#include "aoa/doa.hpp"
#include "oracles.hpp"

using namespace aoa;
using Catch::Approx;

namespace {

const UlaGeometry kGeom = UlaGeometry::half_wavelength(3, 2.4e9);

EigenDecomposition eig_for(const std::vector<double>& thetas,
                           const std::vector<double>& powers) {
    return eigen_sorted(oracles::constructed_covariance(kGeom, thetas, powers));
}

}  // namespace

TEST_CASE("music finds constructed sources") {
    SECTION("single boresight source") {
        auto [spectrum, est] = music(eig_for({0.0}, {1.0}), kGeom, 1);
        REQUIRE(est.angles_deg.size() == 1);
        CHECK(std::abs(est.angles_deg[0]) < 1e-6);
        CHECK_FALSE(est.incomplete);
        for (double v : spectrum.pseudo_spectrum) CHECK(v > 0.0);
        for (std::size_t i = 1; i < spectrum.grid_deg.size(); ++i)
            CHECK(spectrum.grid_deg[i] > spectrum.grid_deg[i - 1]);
    }

    SECTION("two symmetric sources") {
        auto [spectrum, est] = music(eig_for({-30.0, 30.0}, {1.0, 1.0}), kGeom, 2);
        REQUIRE(est.angles_deg.size() == 2);
        CHECK(est.angles_deg[0] == Approx(-30.0).margin(0.01));
        CHECK(est.angles_deg[1] == Approx(30.0).margin(0.01));
    }

    SECTION("order bound is enforced") {
        CHECK_THROWS_AS(music(eig_for({0.0}, {1.0}), kGeom, 3), OrderError);
    }

    SECTION("covariance scaling moves no peaks") {
        auto eig = eig_for({12.5}, {1.0});
        auto [s1, e1] = music(eig, kGeom, 1);
        Covariance scaled;
        scaled.r = 42.0 * oracles::constructed_covariance(kGeom, {12.5}, {1.0}).r;
        auto [s2, e2] = music(eigen_sorted(scaled), kGeom, 1);
        CHECK(e1.angles_deg[0] == Approx(e2.angles_deg[0]).margin(1e-9));
    }
}

TEST_CASE("esprit closed-form recovery") {
    SECTION("single source away from boresight") {
        AngleEstimate est = esprit(eig_for({17.0}, {1.0}), kGeom, 1);
        REQUIRE(est.angles_deg.size() == 1);
        CHECK(est.angles_deg[0] == Approx(17.0).margin(1e-6));
        CHECK_FALSE(est.clipped);
    }

    SECTION("boresight source maps to a unit rotation") {
        AngleEstimate est = esprit(eig_for({0.0}, {1.0}), kGeom, 1);
        CHECK(std::abs(est.angles_deg[0]) < 1e-9);
    }

    SECTION("two sources") {
        AngleEstimate est = esprit(eig_for({-10.0, 25.0}, {1.0, 0.7}), kGeom, 2);
        REQUIRE(est.angles_deg.size() == 2);
        CHECK(est.angles_deg[0] == Approx(-10.0).margin(1e-6));
        CHECK(est.angles_deg[1] == Approx(25.0).margin(1e-6));
    }

    SECTION("agrees with music on random single-source cases") {
        Rng rng(31);
        std::uniform_real_distribution<double> ang(-75.0, 75.0);
        for (int t = 0; t < 25; ++t) {
            double theta = ang(rng);
            auto eig = eig_for({theta}, {1.0});
            double m = music(eig, kGeom, 1).second.angles_deg[0];
            double e = esprit(eig, kGeom, 1).angles_deg[0];
            CHECK(std::abs(m - e) < 0.02);
        }
    }
}

TEST_CASE("joint angle-delay estimation") {
    SrsConfig cfg = SrsConfig::standard();
    const int n_pilot = cfg.n_pilot_subcarriers();
    const double df = cfg.pilot_spacing_hz();

    SECTION("single path with zero delay") {
        CsiMatrix csi = oracles::constructed_csi(kGeom, n_pilot, df, {10.0},
                                                 {cd{1.0, 0.0}}, {0.0});
        AngleEstimate est = esprit2d(csi, kGeom, 1);
        REQUIRE(est.angles_deg.size() == 1);
        CHECK(est.angles_deg[0] == Approx(10.0).margin(1e-6));
        CHECK(std::abs(est.delays_s[0]) < 1e-12);
    }

    SECTION("two paths stay paired") {
        CsiMatrix csi = oracles::constructed_csi(kGeom, n_pilot, df, {0.0, 15.0},
                                                 {cd{1.0, 0.0}, cd{0.6, 0.2}},
                                                 {0.0, 100e-9});
        AngleEstimate est = esprit2d(csi, kGeom, 2);
        REQUIRE(est.angles_deg.size() == 2);
        // sorted by delay: (0 ns, 0 deg) then (100 ns, 15 deg)
        CHECK(std::abs(est.delays_s[0]) < 1e-12);
        CHECK(est.angles_deg[0] == Approx(0.0).margin(1e-6));
        CHECK(est.delays_s[1] == Approx(100e-9).margin(1e-12));
        CHECK(est.angles_deg[1] == Approx(15.0).margin(1e-6));
    }

    SECTION("order above the numerical rank is rejected with the rank") {
        CsiMatrix csi = oracles::constructed_csi(kGeom, n_pilot, df, {0.0, 15.0},
                                                 {cd{1.0, 0.0}, cd{0.5, 0.0}},
                                                 {0.0, 80e-9});
        try {
            esprit2d(csi, kGeom, 4);
            FAIL("expected OrderError");
        } catch (const OrderError& e) {
            CHECK(std::string(e.what()).find("rank") != std::string::npos);
        }
    }

    SECTION("stacking parameters are validated") {
        CsiMatrix csi = oracles::constructed_csi(kGeom, 10, df, {0.0}, {cd{1.0, 0.0}},
                                                 {0.0});
        CHECK_THROWS_AS(esprit2d(csi, kGeom, 1, 10, 1), ConfigError);
        CHECK_THROWS_AS(esprit2d(csi, kGeom, 1, 5, 3), ConfigError);
    }
}

TEST_CASE("angle negation mirrors all estimators") {
    SrsConfig cfg = SrsConfig::standard();
    Rng rng(57);
    std::uniform_real_distribution<double> ang(5.0, 70.0);
    for (int t = 0; t < 5; ++t) {
        double theta = ang(rng);
        AngleEstimate p = esprit(eig_for({theta}, {1.0}), kGeom, 1);
        AngleEstimate n = esprit(eig_for({-theta}, {1.0}), kGeom, 1);
        CHECK(p.angles_deg[0] == Approx(-n.angles_deg[0]).margin(1e-9));

        double mp = music(eig_for({theta}, {1.0}), kGeom, 1).second.angles_deg[0];
        double mn = music(eig_for({-theta}, {1.0}), kGeom, 1).second.angles_deg[0];
        CHECK(mp == Approx(-mn).margin(1e-9));

        CsiMatrix cp = oracles::constructed_csi(kGeom, cfg.n_pilot_subcarriers(),
                                                cfg.pilot_spacing_hz(), {theta},
                                                {cd{1.0, 0.0}}, {50e-9});
        CsiMatrix cn = oracles::constructed_csi(kGeom, cfg.n_pilot_subcarriers(),
                                                cfg.pilot_spacing_hz(), {-theta},
                                                {cd{1.0, 0.0}}, {50e-9});
        CHECK(esprit2d(cp, kGeom, 1).angles_deg[0] ==
              Approx(-esprit2d(cn, kGeom, 1).angles_deg[0]).margin(1e-9));
    }
}

TEST_CASE("line-of-sight selection") {
    SECTION("single candidate returns itself") {
        AngleEstimate est;
        est.angles_deg = {12.0};
        Covariance cov = oracles::constructed_covariance(kGeom, {12.0}, {1.0});
        CHECK(select_los_beamformer(est, cov, kGeom) == Approx(12.0));
    }

    SECTION("the stronger source wins the beamformer vote") {
        for (int t = 0; t < 50; ++t) {
            Rng rng(600 + t);
            std::uniform_real_distribution<double> ang(-60.0, 60.0);
            double los = ang(rng);
            double mpc = ang(rng);
            if (std::abs(los - mpc) < 15.0) continue;
            Covariance cov =
                oracles::constructed_covariance(kGeom, {los, mpc}, {2.0, 1.0});
            AngleEstimate est;
            est.angles_deg = {std::min(los, mpc), std::max(los, mpc)};
            CHECK(select_los_beamformer(est, cov, kGeom) ==
                  Approx(los).margin(1e-9));
        }
    }

    SECTION("joint estimates select the smallest delay") {
        SrsConfig cfg = SrsConfig::standard();
        AngleEstimate est;
        est.angles_deg = {0.0, 30.0};
        est.delays_s = {0.0, 200e-9};
        CsiMatrix csi = oracles::constructed_csi(kGeom, cfg.n_pilot_subcarriers(),
                                                 cfg.pilot_spacing_hz(), {0.0, 30.0},
                                                 {cd{1.0, 0.0}, cd{0.8, 0.0}},
                                                 {0.0, 200e-9});
        CHECK(select_los_min_delay(est, csi, kGeom) == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("single-source bound") {
    SECTION("scaling laws") {
        double base = crb_single_source(kGeom, 10.0, 1000, 5.0);
        CHECK(crb_single_source(kGeom, 10.0, 2000, 5.0) == Approx(base / 2.0));
        CHECK(crb_single_source(kGeom, 10.0 + linear_to_db(2.0), 1000, 5.0) ==
              Approx(base / 2.0));
        UlaGeometry wider = UlaGeometry::half_wavelength(4, 2.4e9);
        CHECK(crb_single_source(wider, 10.0, 1000, 5.0) < base);
    }

    SECTION("matches the numerical Fisher oracle") {
        double closed = crb_single_source(kGeom, 10.0, 3192, 0.0);
        double numeric =
            oracles::fim_crb_single_source_deg2(kGeom, db_to_linear(10.0), 3192, 0.0);
        CHECK(std::abs(closed / numeric - 1.0) < 0.01);

        UlaGeometry wider = UlaGeometry::half_wavelength(4, 3.5e9);
        closed = crb_single_source(wider, 6.0, 500, 25.0);
        numeric = oracles::fim_crb_single_source_deg2(wider, db_to_linear(6.0), 500, 25.0);
        CHECK(std::abs(closed / numeric - 1.0) < 0.01);
    }
}
