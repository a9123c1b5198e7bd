#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cotc/harness.hpp"
#include "support.hpp"

using namespace cotc;
using namespace cotc::harness;
using testing::fixture;

namespace {

Question ask(std::initializer_list<const char*> ids) {
    Question q;
    for (const char* id : ids) q.gaps.push_back(Gap{id, 1.0, {}});
    return q;
}

}  // namespace

TEST_CASE("patient record parsing") {
    const auto r = load_record(fixture("patient_demo.json"));
    CHECK(r.patient_id == "demo01");
    CHECK(r.gold_diseases == std::set<DiseaseId>{"peptic_ulcer"});
    REQUIRE(r.symptom_timelines.at("abdominal_pain").size() == 3);
    const auto& tl = r.symptom_timelines.at("abdominal_pain");
    CHECK(tl[1].t - tl[0].t == 14.0);
    CHECK(tl[2].level == SeverityLevel::Severe);
    CHECK(r.present_findings() == std::set<FindingId>{"abdominal_pain", "fatigue", "hematemesis"});
    CHECK(record_from_json(to_json(r)).present_findings() == r.present_findings());
    CHECK(r.age_band == "40-49");

    auto j = to_json(r);
    SUBCASE("present and absent overlap") {
        j["absent_findings"] = {"fatigue"};
        CHECK_THROWS_AS(record_from_json(j), ValidationError);
    }
    SUBCASE("presenting outside the record") {
        j["presenting_findings"] = {"jaundice"};
        CHECK_THROWS_AS(record_from_json(j), ValidationError);
    }
    SUBCASE("bad severity") {
        j["symptom_timelines"]["abdominal_pain"][0]["severity"] = "Awful";
        CHECK_THROWS_AS(record_from_json(j), ValidationError);
    }
    SUBCASE("unknown key") {
        j["mood"] = "fine";
        CHECK_THROWS_AS(record_from_json(j), ValidationError);
    }
}

TEST_CASE("scripted patient answers from the record") {
    const auto kb = load_kb(fixture("kb_demo.json"));
    const auto r = load_record(fixture("patient_demo.json"));
    const auto oracle = scripted_patient(r, kb);
    const auto a = oracle(ask({"abdominal_pain", "alcohol", "jaundice", "hematemesis"}));
    REQUIRE(a.structured.size() == 4);
    CHECK(a.structured[0].value == AnswerValue::yes);
    CHECK(a.structured[0].severity == SeverityLevel::Severe);
    CHECK(a.structured[1].value == AnswerValue::no);
    CHECK(a.structured[2].value == AnswerValue::unknown);
    CHECK(a.structured[3].value == AnswerValue::yes);
    CHECK_FALSE(a.structured[3].severity.has_value());
}

TEST_CASE("initial evidence uses the presenting findings") {
    const auto r = load_record(fixture("patient_demo.json"));
    const auto ev = initial_evidence(r);
    CHECK(ev.positive == std::set<FindingId>{"abdominal_pain", "fatigue"});
    CHECK(ev.severity.at("abdominal_pain") == SeverityLevel::Severe);
    auto all = r;
    all.presenting_findings.reset();
    CHECK(initial_evidence(all).positive == r.present_findings());
}

TEST_CASE("record predicates see the rising severity timeline") {
    const auto r = load_record(fixture("patient_demo.json"));
    BenchmarkConfig cfg;
    cfg.tsa_query = "is it getting worse?";
    const auto preds = record_predicates(r, cfg);
    REQUIRE_FALSE(preds.empty());
    bool up = false;
    for (const auto& p : preds) {
        CHECK(p.signal == "abdominal_pain");
        up |= p.direction == Direction::up;
    }
    CHECK(up);
}

TEST_CASE("demo patient session asks for and records the discriminator") {
    const auto kb = load_kb(fixture("kb_demo.json"));
    const auto r = load_record(fixture("patient_demo.json"));
    BenchmarkConfig cfg;
    cfg.consultation.scoring.gamma = 0.1;
    cfg.consultation.scoring.energy_gate = -100;
    const auto s = run_session(kb, r, cfg);
    REQUIRE(s.terminal);
    CHECK(s.evidence.positive.count("hematemesis"));
    CHECK(s.evidence.negative.count("alcohol"));
    CHECK(s.initial_ranking.entries.size() == 4);

    // the default gate rejects every candidate in this small KB
    const auto closed = run_session(kb, r, BenchmarkConfig{});
    CHECK(closed.ranked.survivors == 0);
    CHECK(closed.terminal->uncertainty_flag);
}

TEST_CASE("a record that pins one disease is right at round 0") {
    const KnowledgeBase kb({testing::disease("x", {testing::edge("s")}), testing::disease("y", {testing::edge("t")})},
                           testing::symptoms({"s", "t"}), {});
    PatientRecord r;
    r.patient_id = "p1";
    r.gold_diseases = {"x"};
    r.static_findings = {"s"};
    BenchmarkConfig cfg;
    cfg.consultation.scoring.energy_gate = -100;
    const auto rep = run_benchmark(kb, {r}, cfg);
    REQUIRE(rep.per_round_accuracy.size() == cfg.consultation.r_max + 1);
    for (double a : rep.per_round_accuracy) CHECK(a == 100.0);
    CHECK(rep.top1 == 100.0);
    CHECK(rep.macro_f1 == 1.0);
}

TEST_CASE("records that do not fit the KB are skipped with a reason") {
    const auto kb = load_kb(fixture("kb_demo.json"));
    auto good = load_record(fixture("patient_demo.json"));
    auto stray = good;
    stray.patient_id = "demo02";
    stray.gold_diseases = {"scurvy"};
    auto twin = good;
    const auto rep = run_benchmark(kb, {good, stray, twin}, BenchmarkConfig{});
    REQUIRE(rep.skipped.size() == 2);
    CHECK(rep.outcomes.size() == 1);
    CHECK(rep.skipped[0].reason == "duplicate patient_id");
    CHECK(rep.skipped[1].reason.find("scurvy") != std::string::npos);
    CHECK_THROWS_AS(run_benchmark(kb, {}, BenchmarkConfig{}), ValidationError);
}

TEST_CASE("synthetic cohort: consultation lifts accuracy") {
    const auto syn = make_ambiguous_cohort(100, 10, 0);
    const auto cfg = synthetic_benchmark_config();
    const auto rep = run_benchmark(syn.kb, syn.patients, cfg);
    REQUIRE(rep.outcomes.size() == 100);
    CHECK(rep.per_round_accuracy[0] <= 60.0);
    CHECK(rep.per_round_accuracy[1] >= 95.0);
    CHECK(rep.top1 >= 95.0);
    CHECK(rep.top2 >= rep.top1);
    for (double a : rep.per_round_accuracy) CHECK((a >= 0.0 && a <= 100.0));
    CHECK((rep.macro_f1 >= 0.0 && rep.macro_f1 <= 1.0));
    CHECK((rep.recall >= 0.0 && rep.recall <= 1.0));
    // round 0 ties are broken by id, so the "a" side wins
    std::size_t right = 0;
    for (const auto& p : syn.patients) right += p.gold_diseases.begin()->back() == 'a';
    CHECK(rep.per_round_accuracy[0] == doctest::Approx(100.0 * static_cast<double>(right) / 100.0));
}

TEST_CASE("benchmarks are deterministic") {
    const auto syn = make_ambiguous_cohort(40, 5, 3);
    const auto cfg = synthetic_benchmark_config();
    const auto a = to_json(run_benchmark(syn.kb, syn.patients, cfg), true).dump();
    const auto b = to_json(run_benchmark(syn.kb, syn.patients, cfg), true).dump();
    CHECK(a == b);
    auto shuffled = syn.patients;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(to_json(run_benchmark(syn.kb, shuffled, cfg), true).dump() == a);
    CHECK(make_ambiguous_cohort(40, 5, 3).patients.size() == 40);
}

TEST_CASE("cohort save and load") {
    const auto syn = make_ambiguous_cohort(6, 2, 1);
    const auto dir = std::filesystem::temp_directory_path() / "cotc_cohort_test";
    std::filesystem::remove_all(dir);
    save_cohort(syn.patients, dir);
    const auto back = load_cohort(dir);
    REQUIRE(back.size() == 6);
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(to_json(back[i]) == to_json(syn.patients[i]));
    std::filesystem::remove_all(dir);
}

TEST_CASE("round attribution") {
    const auto rows = round_attribution({82.14, 87.63, 89.51, 90.47});
    REQUIRE(rows.size() == 4);
    CHECK_FALSE(rows[0].gain.has_value());
    CHECK(*rows[1].gain == doctest::Approx(5.49).epsilon(1e-9));
    CHECK(*rows[2].gain == doctest::Approx(1.88).epsilon(1e-9));
    CHECK(*rows[3].gain == doctest::Approx(0.96).epsilon(1e-9));
    CHECK(std::abs(*rows[1].share - 65.9) <= 0.05);
    CHECK(*rows[3].share == doctest::Approx(100.0));

    const auto qwen = round_attribution({71.73, 74.12, 75.89, 76.84});
    CHECK(qwen.back().accuracy - qwen.front().accuracy == doctest::Approx(5.11));
    CHECK(*qwen[1].share == doctest::Approx(46.77).epsilon(1e-4));

    const auto flat = round_attribution({50, 50, 50});
    CHECK(flat[1].gain == 0.0);
    CHECK_FALSE(flat[1].share.has_value());
    CHECK(to_json(flat)[1]["cumulative_share"].is_null());
    CHECK(round_attribution({}).empty());
}

TEST_CASE("ablation sweep") {
    const auto syn = make_ambiguous_cohort(30, 5, 2);
    const auto cfg = synthetic_benchmark_config();
    const auto rows = kb_ablation_sweep(syn.kb, {0.25, 1.0}, syn.patients, cfg, {1, 2, 3, 4, 5});
    REQUIRE(rows.size() == 2);
    const double full = run_benchmark(syn.kb, syn.patients, cfg).top1;
    CHECK(rows[1].mean_accuracy == full);
    CHECK(rows[1].std_accuracy == 0.0);
    CHECK(rows[1].delta == 0.0);
    CHECK(rows[0].mean_accuracy <= rows[1].mean_accuracy);
    CHECK(rows[0].per_seed.size() == 5);
    const auto csv = ablation_csv(rows);
    CHECK(csv.rfind("subset,fraction,accuracy,std,delta\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK_THROWS_AS(kb_ablation_sweep(syn.kb, {0.0}, syn.patients, cfg, {1}), ValidationError);
    CHECK_THROWS_AS(kb_ablation_sweep(syn.kb, {0.5}, syn.patients, cfg, {}), ValidationError);
}

TEST_CASE("percentile and tau calibration") {
    CHECK(percentile({1, 2, 3, 4, 5}, 50) == 3.0);
    CHECK(percentile({10, 0}, 20) == doctest::Approx(2.0));
    CHECK(percentile({7}, 90) == 7.0);
    CHECK_THROWS_AS(percentile({}, 10), ValidationError);
    CHECK_THROWS_AS(percentile({1}, 101), ValidationError);

    const auto syn = make_ambiguous_cohort(20, 4, 5);
    auto cfg = synthetic_benchmark_config();
    const double tau = calibrate_tau_h(syn.kb, syn.patients, cfg);
    // independent: rerun with the entropy stop disabled and take the percentile
    cfg.consultation.tau_h = 0.0;
    std::vector<double> h;
    for (const auto& o : run_benchmark(syn.kb, syn.patients, cfg).outcomes) h.push_back(o.final_entropy);
    std::sort(h.begin(), h.end());
    const double rank = 0.2 * static_cast<double>(h.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    CHECK(tau == doctest::Approx(h[lo] + (rank - static_cast<double>(lo)) * (h[std::min(lo + 1, h.size() - 1)] - h[lo])));
    CHECK(tau >= 0.0);
}

TEST_CASE("per-round csv") {
    BenchmarkReport r;
    r.per_round_accuracy = {50, 100};
    CHECK(per_round_csv(r).rfind("round,accuracy\n0,", 0) == 0);
}
