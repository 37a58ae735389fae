#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "fliplab/params.hpp"

using namespace flip;

TEST_CASE("derive_defaults") {
    SECTION("p=1 forces alpha=3") {
        Params q = derive_defaults(1.0, 4, 0, 8);
        REQUIRE(q.alpha == 3.0);
        REQUIRE(q.N == 8);
        REQUIRE(q.beta == 7.0);
        REQUIRE_THAT(q.eta, Catch::Matchers::WithinRel(std::pow(4.0, -4.0), 1e-15));
    }
    SECTION("p=1.4 gives alpha=17 by exact rational arithmetic") {
        // (2+1.4)/(3-2.8) = 3.4/0.2 = 17
        Params q = derive_defaults(1.4, 4, 0, 8);
        REQUIRE_THAT(q.alpha, Catch::Matchers::WithinRel(17.0, 1e-12));
    }
    SECTION("K=4 gives N=8 and eta=4^(-alpha-1)") {
        Params q = derive_defaults(1.0, 4, 0, 8);
        REQUIRE(q.N == 2 * q.K);
        REQUIRE_THAT(q.eta, Catch::Matchers::WithinRel(std::pow(4.0, -q.alpha - 1.0), 1e-15));
    }
    SECTION("rejects p outside [1, 1.5)") {
        REQUIRE_THROWS_AS(derive_defaults(1.5, 4, 0, 8), std::invalid_argument);
        REQUIRE_THROWS_AS(derive_defaults(0.9, 4, 0, 8), std::invalid_argument);
    }
    SECTION("deterministic") {
        Params a = derive_defaults(1.2, 5, 1, 6);
        Params b = derive_defaults(1.2, 5, 1, 6);
        REQUIRE(a.alpha == b.alpha);
        REQUIRE(a.eta == b.eta);
        REQUIRE(a.N == b.N);
    }
}

namespace {
const ConstraintLine* find_line(const std::vector<ConstraintLine>& rep, const std::string& name) {
    for (const auto& l : rep)
        if (l.name == name) return &l;
    return nullptr;
}
}  // namespace

TEST_CASE("validate reports instead of aborting") {
    Params q = derive_defaults(1.0, 4, 0, 8);
    q.t = 1.0 / 7.0;

    SECTION("K=4 N=8 M=1: 2K>=N satisfied") {
        q.M = 1;
        q.Mstar = 1;
        auto rep = validate(q);
        auto* line = find_line(rep, "2K>=N");
        REQUIRE(line);
        REQUIRE(line->status == ConstraintStatus::Satisfied);
    }
    SECTION("K=4 N=8 M=3: N>=3M+K violated (8 < 13)") {
        q.M = 3;
        q.Mstar = 3;
        auto rep = validate(q);
        auto* line = find_line(rep, "N>=3M+K");
        REQUIRE(line);
        REQUIRE(line->status == ConstraintStatus::Violated);
    }
    SECTION("alpha=3 p=1: alpha>=4/(2-p) violated (3 < 4)") {
        auto rep = validate(q);
        auto* line = find_line(rep, "alpha>=4/(2-p)");
        REQUIRE(line);
        REQUIRE(line->status == ConstraintStatus::Violated);
    }
    SECTION("asymptotic thresholds are flagged unverifiable") {
        auto rep = validate(q);
        auto* line = find_line(rep, "K>=N_0");
        REQUIRE(line);
        REQUIRE(line->status == ConstraintStatus::UnverifiableAtDeskScale);
    }
    SECTION("does not mutate params") {
        Params before = q;
        (void)validate(q);
        REQUIRE(before.alpha == q.alpha);
        REQUIRE(before.N == q.N);
        REQUIRE(before.eta == q.eta);
    }
}

TEST_CASE("config file round trip") {
    const char* path = "test_params_config.tmp";
    {
        std::ofstream out(path);
        out << "# comment\n";
        out << "p = 1.25\n";
        out << "K = 6\n";
        out << "eta = 0.01\n";
        out << "depth = 5\n";
    }
    Params q;
    apply_config(q, read_config_file(path));
    REQUIRE(q.p == 1.25);
    REQUIRE(q.K == 6);
    REQUIRE(q.eta == 0.01);
    REQUIRE(q.depth == 5);
    std::remove(path);

    {
        std::ofstream out(path);
        out << "bogus = 1\n";
    }
    Params r;
    REQUIRE_THROWS_AS(apply_config(r, read_config_file(path)), std::runtime_error);
    std::remove(path);
}
