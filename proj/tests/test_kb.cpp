#include <doctest.h>

#include <fstream>

#include "cotc/kb.hpp"
#include "support.hpp"

using namespace cotc;
using testing::disease;
using testing::edge;
using testing::fixture;

namespace {

json raw(const std::string& name) {
    std::ifstream in(fixture(name));
    return json::parse(in);
}

}  // namespace

TEST_CASE("minimal KB loads with one disease") {
    const auto kb = load_kb(fixture("kb_minimal.json"));
    CHECK(kb.diseases().size() == 1);
    CHECK(kb.symptoms().size() == 1);
    CHECK(kb.edge_count() == 1);
    // universal symptom: ln(2/2)
    CHECK(kb.idf().at("s1") == 0.0);
}

TEST_CASE("phi below range is rejected naming the edge") {
    try {
        load_kb(fixture("kb_bad_phi.json"));
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("d1") != std::string::npos);
        CHECK(msg.find("'s1'") != std::string::npos);
        CHECK(msg.find("phi") != std::string::npos);
    }
}

TEST_CASE("50-disease fixture counts match the raw file") {
    const auto j = raw("kb_50.json");
    std::size_t edges = 0;
    for (const auto& d : j["diseases"]) edges += d["symptom_edges"].size() + d["trend_edges"].size();
    const auto kb = load_kb(fixture("kb_50.json"));
    CHECK(kb.diseases().size() == j["diseases"].size());
    CHECK(kb.diseases().size() == 50);
    CHECK(kb.symptoms().size() == j["symptoms"].size());
    CHECK(kb.trends().size() == j["trends"].size());
    CHECK(kb.edge_count() == edges);
}

TEST_CASE("schema violations") {
    auto j = raw("kb_minimal.json");
    SUBCASE("missing schema tag") {
        j.erase("schema");
        CHECK_THROWS_AS(kb_from_json(j), ValidationError);
    }
    SUBCASE("dangling edge") {
        j["diseases"][0]["symptom_edges"][0]["target_id"] = "nope";
        CHECK_THROWS_AS(kb_from_json(j), ValidationError);
    }
    SUBCASE("duplicate disease id") {
        j["diseases"].push_back(j["diseases"][0]);
        CHECK_THROWS_AS(kb_from_json(j), ValidationError);
    }
    SUBCASE("required outside the edges") {
        j["symptoms"].push_back({{"id", "s2"}, {"name", "fever"}});
        j["diseases"][0]["required"] = {"s2"};
        CHECK_THROWS_AS(kb_from_json(j), ValidationError);
    }
    SUBCASE("unknown key") {
        j["diseases"][0]["colour"] = "red";
        CHECK_THROWS_AS(kb_from_json(j), ValidationError);
    }
    SUBCASE("empty disease is only a warning") {
        j["diseases"].push_back({{"id", "d2"}, {"name", "bare"}, {"symptom_edges", json::array()}, {"trend_edges", json::array()}});
        const auto kb = kb_from_json(j);
        CHECK(kb.warnings().size() == 1);
    }
}

TEST_CASE("idf closed forms") {
    const KnowledgeBase kb({disease("a", {edge("s1"), edge("s2")}), disease("b", {edge("s1")})},
                           testing::symptoms({"s1", "s2", "s3"}), {});
    CHECK(kb.idf().at("s1") == 0.0);                      // every disease
    CHECK(kb.idf().at("s3") == doctest::Approx(std::log(3.0)).epsilon(1e-15));  // no disease
    CHECK(kb.idf().at("s2") == std::log(3.0 / 2.0));
    CHECK(compute_idf(kb) == kb.idf());
}

TEST_CASE("idf at catalogue scale") {
    // |D| = 9948 with the finding on two diseases
    std::vector<Disease> dis;
    for (int i = 0; i < 9948; ++i) dis.push_back(disease("d" + std::to_string(i), i < 2 ? std::vector<Edge>{edge("rare"), edge("x")} : std::vector<Edge>{edge("x")}));
    const KnowledgeBase kb(std::move(dis), testing::symptoms({"rare", "x"}), {});
    CHECK(kb.idf().at("rare") == doctest::Approx(std::log(9949.0 / 3.0)).epsilon(1e-14));
    CHECK(kb.idf().at("rare") == doctest::Approx(8.106615).epsilon(1e-6));
}

TEST_CASE("idf matches the brute-force oracle and is monotone") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto kb = testing::random_kb(rng, 8, 12);
        const auto oracle = testing::idf_oracle(kb);
        REQUIRE(oracle.size() == kb.idf().size());
        const auto prev = kb.prevalence();
        for (const auto& [id, w] : kb.idf()) {
            CHECK(std::abs(w - oracle.at(id)) <= 1e-12);
            CHECK(w >= 0.0);
            for (const auto& [id2, w2] : kb.idf())
                if (prev.at(id) < prev.at(id2)) CHECK(w > w2);
        }
    }
}

TEST_CASE("serialization round-trips") {
    const auto kb = load_kb(fixture("kb_50.json"));
    const auto again = kb_from_json(to_json(kb));
    CHECK(again == kb);
    CHECK(again.idf() == kb.idf());
    CHECK(kb_fingerprint(again) == kb_fingerprint(kb));
    const auto demo = load_kb(fixture("kb_demo.json"));
    CHECK(kb_from_json(to_json(demo)) == demo);
}

TEST_CASE("subsample identity and determinism") {
    const auto kb = load_kb(fixture("kb_50.json"));
    CHECK(subsample_edges(kb, 1.0, 3) == kb);
    const auto a = subsample_edges(kb, 0.5, 42);
    const auto b = subsample_edges(kb, 0.5, 42);
    CHECK(a == b);
    CHECK(kb.edge_count() == load_kb(fixture("kb_50.json")).edge_count());  // input untouched
    CHECK_THROWS_AS(subsample_edges(kb, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(subsample_edges(kb, 1.5, 1), ValidationError);
    CHECK_THROWS_AS(subsample_edges(KnowledgeBase{}, 0.5, 1), ValidationError);
}

TEST_CASE("400-edge fixture halves per stratum") {
    const auto j = raw("kb_400.json");
    std::size_t edges = 0;
    for (const auto& d : j["diseases"]) edges += d["symptom_edges"].size();
    REQUIRE(edges == 400);
    const auto kb = load_kb(fixture("kb_400.json"));
    const auto strata = prevalence_strata_sizes(kb);
    CHECK(strata == std::vector<std::size_t>{100, 100, 100, 100});
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto half = subsample_edges(kb, 0.5, seed);
        CHECK(half.edge_count() == 200);
        // idf recomputed from scratch
        CHECK(half.idf() == compute_idf(half));
        for (const auto& d : half.diseases())
            for (const auto& r : d.required) CHECK(d.edge_to(r) != nullptr);
    }
    // per-stratum counts: rebuild the stratum order independently
    std::map<std::string, int> prev;
    for (const auto& d : j["diseases"])
        for (const auto& e : d["symptom_edges"]) prev[e["target_id"]]++;
    std::vector<std::tuple<int, std::string, std::string>> order;
    for (const auto& d : j["diseases"])
        for (const auto& e : d["symptom_edges"]) order.emplace_back(prev[e["target_id"]], e["target_id"], d["id"]);
    std::sort(order.begin(), order.end());
    const auto half = subsample_edges(kb, 0.5, 9);
    std::array<int, 4> kept{};
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& [n, target, did] = order[i];
        if (half.find_disease(did)->edge_to(target)) kept[i / 100]++;
    }
    CHECK(kept == std::array<int, 4>{50, 50, 50, 50});
}

TEST_CASE("candidate set") {
    const auto kb = load_kb(fixture("kb_50.json"));
    CHECK(candidate_set(kb, {}).empty());
    EvidenceSet ev;
    ev.positive = {"s001", "s017", "s042"};
    std::set<DiseaseId> oracle;
    for (const auto& d : kb.diseases())
        for (const auto& e : d.symptom_edges)
            if (ev.positive.count(e.target_id)) oracle.insert(d.id);
    CHECK(candidate_set(kb, ev) == oracle);
    ev.negative = {"s002"};  // negatives do not implicate
    CHECK(candidate_set(kb, ev) == oracle);
    ev.positive.insert("missing");
    CHECK_THROWS_AS(candidate_set(kb, ev), ValidationError);

    const KnowledgeBase tiny({disease("d", {edge("s")}), disease("e", {edge("t")})}, testing::symptoms({"s", "t"}), {});
    EvidenceSet one;
    one.positive = {"s"};
    CHECK(candidate_set(tiny, one) == std::set<DiseaseId>{"d"});
}

TEST_CASE("coverage check") {
    const auto kb = load_kb(fixture("kb_demo.json"));
    TrendPredicate up;
    up.signal = "afp";
    up.estimand = Estimand::slope;
    up.direction = Direction::up;
    TrendPredicate jump = up;
    jump.estimand = Estimand::change_point_mass;
    TrendPredicate down = up;
    down.direction = Direction::down;
    TrendPredicate other = up;
    other.signal = "alt";
    TrendPredicate flat = up;
    flat.direction = Direction::flat;

    SUBCASE("all match") {
        const auto r = coverage_check(kb, {up, jump});
        CHECK_FALSE(r.low_coverage);
        CHECK(r.matched == 2);
        CHECK(r.unmatched_tokens.empty());
        CHECK(r.matched_ids == std::vector<FindingId>{"afp_jump", "afp_up"});
    }
    SUBCASE("none match") {
        const auto r = coverage_check(kb, {down, other});
        CHECK(r.low_coverage);
        CHECK(r.matched == 0);
        CHECK(r.unmatched_tokens == std::vector<std::string>{"afp:slope:down", "alt:slope:up"});
    }
    SUBCASE("two of five against a brute-force matcher") {
        const std::vector<TrendPredicate> preds{down, up, other, jump, flat};
        const auto r = coverage_check(kb, preds);
        std::size_t n = 0;
        for (const auto& p : preds) {
            bool hit = false;
            for (const auto& t : kb.trends())
                hit |= t.estimand == p.estimand && t.direction == p.direction && (t.signal.empty() || t.signal == p.signal);
            n += hit;
        }
        CHECK(n == 2);
        CHECK(r.matched == n);
        CHECK(r.unmatched_tokens.size() == 3);
        CHECK_FALSE(r.low_coverage);
    }
    SUBCASE("empty predicate list") {
        CHECK(coverage_check(kb, {}).low_coverage);
    }
}

TEST_CASE("symptom name resolution is exact") {
    const auto kb = load_kb(fixture("kb_demo.json"));
    CHECK(kb.resolve_symptom_name("vomiting blood") == std::optional<FindingId>("hematemesis"));
    CHECK(kb.resolve_symptom_name("abdominal pain") == std::optional<FindingId>("abdominal_pain"));
    CHECK_FALSE(kb.resolve_symptom_name("vomiting  blood").has_value());
}
