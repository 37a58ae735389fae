#include <catch2/catch_amalgamated.hpp>

#include "exact_rational.hpp"
#include "fliplab/line_maps.hpp"

using namespace flip;

namespace {
const CantorSeq<double> A = CantorSeq<double>::a(4, 3.0);
const CantorSeq<double> B = CantorSeq<double>::b(7.0);
const CantorSeq<DD> Add = CantorSeq<DD>::a(4, 3.0);
const CantorSeq<DD> Bdd = CantorSeq<DD>::b(7.0);
const int d = 8;
}  // namespace

TEST_CASE("endpoints and origin are fixed") {
    auto q = LineMap<double>::make(MapDir::AtoB, A, B, d);
    REQUIRE(q(1.0) == 1.0);
    REQUIRE(q(-1.0) == -1.0);
    REQUIRE(q(0.0) == 0.0);
}

TEST_CASE("q maps 0.5 to 0.5 (gap midpoint in both systems)") {
    CantorSeq<double> a3 = CantorSeq<double>::a(3, 3.0);
    auto q = LineMap<double>::make(MapDir::AtoB, a3, B, d);
    REQUIRE_THAT(q(0.5), Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("t(q(x)) = x within 1e-12 over 1e5 uniform samples") {
    auto q = LineMap<DD>::make(MapDir::AtoB, Add, Bdd, d);
    auto t = LineMap<DD>::make(MapDir::BtoA, Add, Bdd, d);
    Rng rng(101);
    double worst = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double x = rng.uniform(-1.0, 1.0);
        double back = to_double(t(q(DD(x))));
        worst = std::max(worst, std::abs(back - x));
    }
    REQUIRE(worst <= 1e-12);
}

TEST_CASE("strict monotonicity over sampled pairs") {
    // DD path: inside depth-8 surviving cubes the slope r_8/r~_8 ~ 1e-17 drops
    // image separations below double resolution
    auto q = LineMap<DD>::make(MapDir::AtoB, Add, Bdd, d);
    Rng rng(103);
    for (int i = 0; i < 100000; ++i) {
        double x = rng.uniform(-1.0, 1.0);
        double y = rng.uniform(-1.0, 1.0);
        if (x == y) continue;
        if (x > y) std::swap(x, y);
        REQUIRE(q(DD(x)) < q(DD(y)));
    }
}

TEST_CASE("gap slopes match the closed-form quotient") {
    SECTION("reciprocal identity") {
        for (int k = 0; k <= d - 1; ++k) {
            double prod = slope_on_gap(A, B, k, MapDir::AtoB) * slope_on_gap(A, B, k, MapDir::BtoA);
            REQUIRE_THAT(prod, Catch::Matchers::WithinRel(1.0, 1e-14));
        }
    }
    SECTION("K=3 alpha=3 beta=7 k=1 exact rational value") {
        CantorSeq<double> a3 = CantorSeq<double>::a(3, 3.0);
        oracle::Rat num = oracle::radius_b(7, 1) / 2 - oracle::radius_b(7, 2);
        oracle::Rat den = oracle::radius_a(3, 3, 1) / 2 - oracle::radius_a(3, 3, 2);
        REQUIRE_THAT(slope_on_gap(a3, B, 1, MapDir::AtoB),
                     Catch::Matchers::WithinRel(oracle::to_d(num / den), 1e-13));
    }
    SECTION("finite differences on gap interiors reproduce the slope") {
        auto q = LineMap<DD>::make(MapDir::AtoB, Add, Bdd, d);
        Rng rng(107);
        for (int k = 0; k <= 5; ++k) {
            for (int trial = 0; trial < 20; ++trial) {
                double piece = A.gap_diam(k);
                double x;
                do {
                    x = sample_gap1(rng, A, k);
                } while (locate1(x, A, d).rho > 0.5 * A.radius(k) - 0.1 * piece ||
                         locate1(x, A, d).rho < A.radius(k + 1) + 0.1 * piece);
                double h = piece / 100.0;
                DD xp = DD(x) + DD(h), xm = DD(x) - DD(h);
                double fd = to_double((q(xp) - q(xm)) / (xp - xm));
                REQUIRE_THAT(fd, Catch::Matchers::WithinRel(slope_on_gap(A, B, k, MapDir::AtoB),
                                                            1e-9));
            }
        }
    }
}

TEST_CASE("each A-gap piece maps onto the matching B-gap piece") {
    auto q = LineMap<DD>::make(MapDir::AtoB, Add, Bdd, d);
    Rng rng(109);
    for (int k = 0; k <= 5; ++k) {
        for (int trial = 0; trial < 20; ++trial) {
            Word1 w = random_word(rng, k + 1);
            int side = rng.sign();
            DD cA = center1(w, Add);
            DD cB = center1(w, Bdd);
            // endpoints of the same frame piece in both systems
            DD a0 = cA + DD(side) * Add.radius(k + 1);
            DD a1 = cA + DD(side) * ldexp2(Add.radius(k), -1);
            DD b0 = cB + DD(side) * Bdd.radius(k + 1);
            DD b1 = cB + DD(side) * ldexp2(Bdd.radius(k), -1);
            REQUIRE(std::abs(to_double(q(a0) - b0)) < 1e-12);
            REQUIRE(std::abs(to_double(q(a1) - b1)) < 1e-12);
        }
    }
}

TEST_CASE("cutoff profiles") {
    SECTION("outer gap piece midpoints sit at 1/2") {
        for (int k = 0; k <= 5; ++k) {
            Rng rng(211 + k);
            Word1 w = random_word(rng, k + 1);
            double c = center1(w, B);
            int side = w.back();  // outer side
            double mid = c + side * 0.5 * (B.radius(k + 1) + 0.5 * B.radius(k));
            REQUIRE_THAT(eval_cutoff(B, k, mid), Catch::Matchers::WithinAbs(0.5, 1e-9));
        }
    }
    SECTION("centers of surviving cubes sit at 1") {
        Rng rng(213);
        for (int k = 0; k <= 5; ++k) {
            Word1 w = random_word(rng, k + 1);
            REQUIRE(eval_cutoff(B, k, center1(w, B)) == 1.0);
        }
    }
    SECTION("zero in the generation-0 central gap") {
        for (int k = 1; k <= 6; ++k) REQUIRE(eval_cutoff(B, k, 0.0) == 0.0);
        // For k = 0 the origin lies in the middle component between the two
        // generation-1 cubes; both its ends touch U_1, so the profile is 1
        // there (linear interpolation between equal endpoint values).
        REQUIRE(eval_cutoff(B, 0, 0.0) == 1.0);
    }
    SECTION("values in [0,1], 1 on U_{k+1}, 0 off U_k") {
        Rng rng(217);
        for (int trial = 0; trial < 2000; ++trial) {
            int k = static_cast<int>(rng.uniform_int(5));
            double s = rng.uniform(-1.0, 1.0);
            double z = eval_cutoff(A, k, s);
            REQUIRE(z >= 0.0);
            REQUIRE(z <= 1.0);
            auto loc = locate1(s, A, k + 2);
            if (loc.survival(k + 2) >= k + 1) REQUIRE(z == 1.0);
            if (loc.survival(k + 2) < k) REQUIRE(z == 0.0);
        }
    }
}
