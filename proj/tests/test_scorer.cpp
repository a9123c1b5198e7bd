#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cotc/scorer.hpp"
#include "support.hpp"

using namespace cotc;
using testing::disease;
using testing::edge;

namespace {

// Disease d with edges a (phi 1) and b (phi 0.8); IDF weights set by hand.
struct Toy {
    KnowledgeBase kb{{disease("d", {edge("a", 1.0), edge("b", 0.8)})}, testing::symptoms({"a", "b"}), {}};
    IdfTable idf{{"a", 0.9}, {"b", 0.6}};
};

std::map<DiseaseId, double> energies(std::initializer_list<std::pair<const char*, double>> items) {
    std::map<DiseaseId, double> out;
    for (const auto& [k, v] : items) out[k] = v;
    return out;
}

}  // namespace

TEST_CASE("energy closed forms") {
    Toy toy;
    ScoringParams p;
    p.gamma = 0.5;
    EvidenceSet ev;
    ev.positive = {"a"};
    // ln 0.9 + ln 1 for the match, ln(1 - 0.5 * 0.6) for the missing b
    CHECK(disease_energy(toy.kb, toy.idf, ev, "d", p) == doctest::Approx(std::log(0.9) + std::log(0.7)).epsilon(1e-15));
    CHECK(disease_energy(toy.kb, toy.idf, ev, "d", p) == doctest::Approx(-0.462035459597).epsilon(1e-11));

    p.gamma = 0.0;
    ev.positive = {"a", "b"};
    CHECK(disease_energy(toy.kb, toy.idf, ev, "d", p) == doctest::Approx(std::log(0.9) + std::log(0.6) + std::log(0.8)));

    const KnowledgeBase bare({disease("empty", {}), disease("d", {edge("a")})}, testing::symptoms({"a"}), {});
    EvidenceSet bare_ev;
    bare_ev.positive = {"a"};
    CHECK(disease_energy(bare, bare.idf(), bare_ev, "empty", p) == 0.0);
    CHECK_THROWS_AS(disease_energy(bare, bare.idf(), ev, "nope", p), ValidationError);
}

TEST_CASE("zero idf match contributes only phi") {
    const KnowledgeBase kb({disease("d", {edge("a", 0.7)})}, testing::symptoms({"a"}), {});
    REQUIRE(kb.idf().at("a") == 0.0);
    EvidenceSet ev;
    ev.positive = {"a"};
    CHECK(disease_energy(kb, kb.idf(), ev, "d", ScoringParams{}) == doctest::Approx(std::log(0.7)).epsilon(1e-15));
}

TEST_CASE("negative and unresolved findings are penalized like missing ones") {
    Toy toy;
    ScoringParams p;
    EvidenceSet missing, denied, unresolved;
    missing.positive = denied.positive = unresolved.positive = {"a"};
    denied.negative = {"b"};
    unresolved.asked_unresolved = {"b"};
    const double r = disease_energy(toy.kb, toy.idf, missing, "d", p);
    CHECK(disease_energy(toy.kb, toy.idf, denied, "d", p) == r);
    CHECK(disease_energy(toy.kb, toy.idf, unresolved, "d", p) == r);
}

TEST_CASE("penalty clamp keeps energies finite") {
    std::vector<Disease> dis;
    dis.push_back(disease("target", {edge("rare1"), edge("rare2")}));
    for (int i = 0; i < 9947; ++i) dis.push_back(disease("o" + std::to_string(i), {edge("common")}));
    const KnowledgeBase kb(std::move(dis), testing::symptoms({"rare1", "rare2", "common"}), {});
    REQUIRE(kb.idf().at("rare1") == doctest::Approx(std::log(9949.0 / 2.0)));
    ScoringParams p;
    p.gamma = 1.0;
    const double r = disease_energy(kb, kb.idf(), {}, "target", p);
    CHECK(std::isfinite(r));
    CHECK(r == doctest::Approx(2.0 * std::log(1e-6)).epsilon(1e-9));
}

TEST_CASE("adding a matched finding raises its disease only") {
    const KnowledgeBase kb({disease("x", {edge("s"), edge("t")}), disease("y", {edge("s"), edge("r")}), disease("f1", {edge("q")}),
                            disease("f2", {edge("q")}), disease("f3", {edge("q")}), disease("f4", {edge("q")})},
                           testing::symptoms({"s", "t", "r", "q"}), {});
    REQUIRE(kb.idf().at("t") > 1.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        ScoringParams p;
        p.gamma = g(rng);
        EvidenceSet e1, e2;
        e1.positive = {"s"};
        e2.positive = {"s", "t"};
        CHECK(disease_energy(kb, kb.idf(), e2, "x", p) > disease_energy(kb, kb.idf(), e1, "x", p));
        CHECK(disease_energy(kb, kb.idf(), e2, "y", p) == disease_energy(kb, kb.idf(), e1, "y", p));
    }
}

TEST_CASE("rank candidates") {
    ScoringParams p;
    p.energy_gate = -100.0;
    SUBCASE("single survivor") {
        const auto r = rank_candidates(energies({{"a", 1.0}}), p);
        CHECK(r.entries[0].mass == 1.0);
        CHECK(r.entropy == 0.0);
    }
    SUBCASE("symmetric pair") {
        const auto r = rank_candidates(energies({{"b", 2.0}, {"a", 2.0}}), p);
        CHECK(r.entries[0].id == "a");
        CHECK(r.entries[0].mass == 0.5);
        CHECK(r.entries[1].mass == 0.5);
        CHECK(r.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
    SUBCASE("closed-form softmax") {
        const auto r = rank_candidates(energies({{"a", 0.0}, {"b", std::log(3.0)}}), p);
        CHECK(r.entries[0].id == "b");
        CHECK(std::abs(r.entries[0].mass - 0.75) < 1e-15);
        CHECK(std::abs(r.entries[1].mass - 0.25) < 1e-15);
    }
    SUBCASE("gate precedes softmax") {
        ScoringParams g;
        const auto r = rank_candidates(energies({{"a", 0.5}, {"b", 0.2}, {"c", 0.3}}), g);
        CHECK(r.survivors == 2);
        CHECK(r.entries.size() == 3);
        CHECK(r.entries[2].id == "b");
        CHECK_FALSE(r.entries[2].survivor);
        CHECK(r.entries[2].mass == 0.0);
    }
    SUBCASE("nothing survives") {
        ScoringParams g;
        const auto r = rank_candidates(energies({{"a", -1.0}}), g);
        CHECK(r.empty());
        CHECK(r.entropy == 0.0);
        CHECK(r.top_mass() == 0.0);
    }
    CHECK_THROWS_AS(rank_candidates({}, p), ValidationError);
}

TEST_CASE("softmax masses: normalization and shift invariance") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    ScoringParams p;
    p.energy_gate = -1e9;
    for (int trial = 0; trial < 500; ++trial) {
        std::map<DiseaseId, double> e, shifted;
        const int n = 1 + trial % 12;
        const double c = u(rng);
        for (int i = 0; i < n; ++i) {
            const double v = u(rng);
            e["d" + std::to_string(i)] = v;
            shifted["d" + std::to_string(i)] = v + c;
        }
        const auto a = rank_candidates(e, p);
        const auto b = rank_candidates(shifted, p);
        const auto m = a.masses();
        CHECK(std::abs(std::accumulate(m.begin(), m.end(), 0.0) - 1.0) <= 1e-12);
        for (std::size_t i = 0; i < a.entries.size(); ++i) {
            CHECK(a.entries[i].id == b.entries[i].id);
            CHECK(std::abs(a.entries[i].mass - b.entries[i].mass) <= 1e-12);
        }
        for (std::size_t i = 1; i < a.entries.size(); ++i) CHECK(a.entries[i - 1].mass >= a.entries[i].mass);
    }
}

TEST_CASE("entropy") {
    const std::vector<double> point{1.0, 0.0};
    CHECK(posterior_entropy(point) == 0.0);
    const std::vector<double> uniform(7, 1.0 / 7.0);
    CHECK(posterior_entropy(uniform) == doctest::Approx(std::log(7.0)).epsilon(1e-14));
    const std::vector<double> q{0.25, 0.75};
    CHECK(posterior_entropy(q) == doctest::Approx(-0.25 * std::log(0.25) - 0.75 * std::log(0.75)).epsilon(1e-15));
    CHECK(posterior_entropy(q) == doctest::Approx(0.562335144618).epsilon(1e-11));
    const std::vector<double> bad{0.5, 0.4};
    CHECK_THROWS_AS(posterior_entropy(bad), ValidationError);
    const std::vector<double> neg{1.5, -0.5};
    CHECK_THROWS_AS(posterior_entropy(neg), ValidationError);
}

TEST_CASE("gap priority closed forms") {
    // masses (0.5, 0.3, 0.2) from energies ln 5, ln 3, ln 2
    const KnowledgeBase kb({disease("a", {edge("g1"), edge("g2", 1.0, true), edge("x")}, {"g1", "g2"}),
                            disease("b", {edge("g1"), edge("g3"), edge("x")}, {"g1", "g3"}),
                            disease("c", {edge("g1"), edge("x"), edge("lonely")}, {"g1"})},
                           testing::symptoms({"g1", "g2", "g3", "x", "lonely"}), {});
    ScoringParams p;
    p.energy_gate = -10.0;
    const auto ranked = rank_candidates(energies({{"a", std::log(5.0)}, {"b", std::log(3.0)}, {"c", std::log(2.0)}}), p);
    const PsiConfig psi;
    const auto gaps = gap_priority(kb, ranked, {}, psi, 5);
    REQUIRE(gaps.size() == 3);
    CHECK(gaps[0].finding == "g1");
    CHECK(gaps[0].priority == doctest::Approx(1.0).epsilon(1e-15));  // required everywhere
    CHECK(gaps[1].finding == "g2");
    CHECK(gaps[1].priority == doctest::Approx(1.0).epsilon(1e-15));  // 0.5 * 2
    CHECK(gaps[2].finding == "g3");
    CHECK(gaps[2].priority == doctest::Approx(0.3).epsilon(1e-15));
    for (const auto& g : gaps) CHECK(g.recompute() == g.priority);
    // lonely is an edge but not required
    EvidenceSet ev;
    ev.positive = {"g1"};
    ev.negative = {"g3"};
    const auto rest = gap_priority(kb, ranked, ev, psi, 5);
    REQUIRE(rest.size() == 1);
    CHECK(rest[0].finding == "g2");
    // top_k = 1 keeps only a
    CHECK(gap_priority(kb, ranked, {}, psi, 1).size() == 2);
}

TEST_CASE("trend gaps get the tsa boost when the estimand was emitted") {
    const KnowledgeBase kb({disease("a", {edge("s")}, {}, {edge("tr")}), disease("b", {edge("s")})},
                           testing::symptoms({"s"}), {{"tr", Estimand::slope, Direction::up, "rising", "lab"}});
    Disease a = kb.diseases()[0];
    a.required = {"tr"};
    const KnowledgeBase kb2({a, kb.diseases()[1]}, testing::symptoms({"s"}), kb.trends());
    ScoringParams p;
    p.energy_gate = -10.0;
    const auto ranked = rank_candidates(energies({{"a", 0.0}, {"b", 0.0}}), p);
    CHECK(gap_priority(kb2, ranked, {}, PsiConfig{}, 5)[0].priority == doctest::Approx(0.5));
    CHECK(gap_priority(kb2, ranked, {}, PsiConfig{}, 5, {Estimand::slope})[0].priority == doctest::Approx(0.75));
    CHECK(gap_priority(kb2, ranked, {}, PsiConfig{}, 5, {Estimand::cohort_z})[0].priority == doctest::Approx(0.5));
}

TEST_CASE("gap priority matches the brute-force oracle") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::bernoulli_distribution coin(0.2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto kb = testing::random_kb(rng, 1 + trial % 10, 5 + trial % 25);
        std::map<DiseaseId, double> e;
        for (const auto& d : kb.diseases()) e[d.id] = u(rng);
        ScoringParams p;
        p.energy_gate = -1.0;
        const auto ranked = rank_candidates(e, p);
        if (ranked.empty()) continue;
        EvidenceSet ev;
        for (const auto& s : kb.symptoms()) {
            if (coin(rng)) ev.positive.insert(s.id);
            else if (coin(rng)) ev.negative.insert(s.id);
        }
        const std::set<Estimand> emitted{Estimand::slope};
        const PsiConfig psi;
        const auto gaps = gap_priority(kb, ranked, ev, psi, 5, emitted);
        const auto oracle = testing::gap_oracle(kb, ranked, ev, psi, 5, emitted);
        REQUIRE(gaps.size() == oracle.size());
        for (const auto& g : gaps) {
            CHECK(g.priority == oracle.at(g.finding));
            CHECK(g.recompute() == g.priority);
            double bound = 0;
            for (const auto& r : g.requiring) bound += r.mass;
            CHECK(g.priority <= bound * psi.pathognomonic * psi.tsa + 1e-15);
        }
        for (std::size_t i = 1; i < gaps.size(); ++i)
            CHECK((gaps[i - 1].priority > gaps[i].priority ||
                   (gaps[i - 1].priority == gaps[i].priority && gaps[i - 1].finding < gaps[i].finding)));
    }
}

TEST_CASE("scoring params validation") {
    ScoringParams p;
    p.gamma = 1.5;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.gamma = 0.5;
    p.mass_gate = 0.0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.mass_gate = 0.9;
    p.top_k = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
}
