#pragma once
// Scripted patients, cohort benchmarks, round attribution and KB ablation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cotc/engine.hpp"
#include "cotc/kb.hpp"
#include "cotc/router.hpp"
#include "cotc/tsa.hpp"

namespace cotc::harness {

struct PatientRecord {
    std::string patient_id;
    std::set<DiseaseId> gold_diseases;
    std::map<FindingId, std::vector<tsa::SeverityPoint>> symptom_timelines;
    std::map<std::string, std::vector<tsa::Point>> indicator_streams;
    std::set<FindingId> static_findings;
    std::set<FindingId> absent_findings;
    // Findings disclosed up front; absent means everything the record holds.
    std::optional<std::set<FindingId>> presenting_findings;
    std::string age_band;
    std::string sex;

    void validate() const;  // throws ValidationError
    // Static findings plus every symptom with a timeline.
    std::set<FindingId> present_findings() const;
};

// Timestamps may be numbers (days) or ISO-8601 strings.
PatientRecord record_from_json(const json& j);
json to_json(const PatientRecord& r);
PatientRecord load_record(const std::filesystem::path& path);
// A directory of *.json records, or one file holding a record or an array.
std::vector<PatientRecord> load_cohort(const std::filesystem::path& path);
void save_cohort(const std::vector<PatientRecord>& cohort, const std::filesystem::path& dir);

using AnswerOracle = std::function<Answer(const Question&)>;

// yes (with the latest non-None severity) for present findings, no for
// listed-absent ones, unknown otherwise.
AnswerOracle scripted_patient(const PatientRecord& record, const KnowledgeBase& kb);

struct BenchmarkConfig {
    ConsultationConfig consultation;
    router::RouterConfig router;
    std::string tsa_query = "is the trend stable?";
};

json to_json(const BenchmarkConfig& c);

// Predicates from the presenting symptom timelines and all indicator streams.
std::vector<TrendPredicate> record_predicates(const PatientRecord& record, const BenchmarkConfig& config);
EvidenceSet initial_evidence(const PatientRecord& record);

// Runs one scripted session to termination.
ConsultationState run_session(const KnowledgeBase& kb, const PatientRecord& record, const BenchmarkConfig& config);

struct PatientOutcome {
    std::string patient_id;
    std::vector<std::string> top1_by_round;  // r_max+1 entries; "" when the ranking is empty
    std::vector<DiseaseId> final_ranking;
    bool top1 = false;
    bool top2 = false;
    double recall = 0.0;
    std::string terminal;
    bool uncertainty_flag = false;
    std::size_t rounds = 0;
    double final_entropy = 0.0;
    json trace;
};

struct SkippedPatient {
    std::string patient_id;
    std::string reason;
};

struct BenchmarkReport {
    std::vector<double> per_round_accuracy;  // percent, r_max+1 entries
    double top1 = 0.0;                       // percent
    double top2 = 0.0;                       // percent
    double macro_f1 = 0.0;                   // over gold labels at rank 1
    double recall = 0.0;                     // mean |top-k ∩ gold| / |gold|
    std::vector<PatientOutcome> outcomes;    // sorted by patient id
    std::vector<SkippedPatient> skipped;
    std::string config_fingerprint;
};

// Sessions run in parallel; aggregation is ordered by patient id.
BenchmarkReport run_benchmark(const KnowledgeBase& kb, const std::vector<PatientRecord>& cohort,
                              const BenchmarkConfig& config);

json to_json(const BenchmarkReport& r, bool include_traces = false);
std::string per_round_csv(const BenchmarkReport& r);

struct AttributionRow {
    std::size_t round = 0;
    double accuracy = 0.0;
    std::optional<double> gain;   // absent for round 0
    std::optional<double> share;  // percent of the total lift; absent when there is none
};

std::vector<AttributionRow> round_attribution(const std::vector<double>& accuracy);
json to_json(const std::vector<AttributionRow>& rows);

struct AblationRow {
    std::string subset;
    double fraction = 1.0;
    double mean_accuracy = 0.0;  // final top-1, percent
    double std_accuracy = 0.0;   // sample standard deviation over seeds
    double delta = 0.0;          // vs the unablated benchmark
    std::vector<double> per_seed;
};

std::vector<AblationRow> kb_ablation_sweep(const KnowledgeBase& kb, const std::vector<double>& fractions,
                                           const std::vector<PatientRecord>& cohort, const BenchmarkConfig& config,
                                           const std::vector<std::uint64_t>& seeds,
                                           const std::string& subset = "longitudinal");
json to_json(const std::vector<AblationRow>& rows);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

// 20th percentile of terminal entropies over `cohort` with the entropy stop
// disabled.
double calibrate_tau_h(const KnowledgeBase& kb, const std::vector<PatientRecord>& cohort, BenchmarkConfig config,
                       double pct = 20.0);

struct SyntheticCohort {
    KnowledgeBase kb;
    std::vector<PatientRecord> patients;
};

// Paired diseases that share every presenting finding and differ only in one
// private pathognomonic discriminator, which each patient hides until asked.
SyntheticCohort make_ambiguous_cohort(std::size_t n_patients = 100, std::size_t n_pairs = 10, std::uint64_t seed = 0);
BenchmarkConfig synthetic_benchmark_config();

}  // namespace cotc::harness
