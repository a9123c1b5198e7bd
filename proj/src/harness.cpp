#include "cotc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace cotc::harness {

namespace fs = std::filesystem;

// ---- records --------------------------------------------------------------

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

double parse_time(const json& t, const std::string& where) {
    if (t.is_number()) return t.get<double>();
    if (t.is_string()) return tsa::parse_iso8601_days(t.get<std::string>());
    throw ValidationError(where + ": timestamp must be a number or ISO-8601 string");
}

SeverityLevel parse_level(const json& v, const std::string& where) {
    if (v.is_number_integer()) return severity_from_ordinal(v.get<int>());
    if (v.is_string()) {
        if (auto s = parse_severity(v.get<std::string>())) return *s;
    }
    throw ValidationError(where + ": unknown severity " + v.dump());
}

std::optional<SeverityLevel> latest_severity(const std::vector<tsa::SeverityPoint>& timeline) {
    for (auto it = timeline.rbegin(); it != timeline.rend(); ++it)
        if (it->level != SeverityLevel::None) return it->level;
    return std::nullopt;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void PatientRecord::validate() const {
    if (patient_id.empty()) throw ValidationError("patient record needs a patient_id");
    for (const auto& [id, tl] : symptom_timelines) {
        if (tl.empty()) throw ValidationError(patient_id + ": empty timeline for '" + id + "'");
        (void)tsa::TimeSeries::from_severity(tl);
    }
    for (const auto& [id, s] : indicator_streams) {
        if (s.empty()) throw ValidationError(patient_id + ": empty indicator stream '" + id + "'");
        (void)tsa::TimeSeries(s);
    }
    const auto present = present_findings();
    for (const auto& a : absent_findings) {
        if (present.count(a)) throw ValidationError(patient_id + ": finding '" + a + "' is both present and absent");
    }
    if (presenting_findings) {
        for (const auto& f : *presenting_findings) {
            if (!present.count(f))
                throw ValidationError(patient_id + ": presenting finding '" + f + "' is not among the record's findings");
        }
    }
}

std::set<FindingId> PatientRecord::present_findings() const {
    std::set<FindingId> out = static_findings;
    for (const auto& [id, _] : symptom_timelines) out.insert(id);
    return out;
}

PatientRecord record_from_json(const json& j) {
    reject_unknown(j,
                   {"patient_id", "gold_diseases", "symptom_timelines", "indicator_streams", "static_findings",
                    "absent_findings", "presenting_findings", "attributes"},
                   "patient record");
    PatientRecord r;
    try {
        r.patient_id = j.at("patient_id").get<std::string>();
        const std::string where = "patient '" + r.patient_id + "'";
        if (j.contains("gold_diseases")) r.gold_diseases = j.at("gold_diseases").get<std::set<std::string>>();
        if (j.contains("symptom_timelines")) {
            for (const auto& [id, arr] : j.at("symptom_timelines").items()) {
                auto& tl = r.symptom_timelines[id];
                for (const auto& p : arr) {
                    reject_unknown(p, {"t", "severity"}, where + " timeline point");
                    tl.push_back({parse_time(p.at("t"), where), parse_level(p.at("severity"), where)});
                }
            }
        }
        if (j.contains("indicator_streams")) {
            for (const auto& [id, arr] : j.at("indicator_streams").items()) {
                auto& s = r.indicator_streams[id];
                for (const auto& p : arr) {
                    reject_unknown(p, {"t", "value"}, where + " indicator point");
                    s.push_back({parse_time(p.at("t"), where), p.at("value").get<double>()});
                }
            }
        }
        if (j.contains("static_findings")) r.static_findings = j.at("static_findings").get<std::set<std::string>>();
        if (j.contains("absent_findings")) r.absent_findings = j.at("absent_findings").get<std::set<std::string>>();
        if (j.contains("presenting_findings"))
            r.presenting_findings = j.at("presenting_findings").get<std::set<std::string>>();
        if (j.contains("attributes")) {
            const auto& a = j.at("attributes");
            reject_unknown(a, {"age_band", "sex"}, where + " attributes");
            r.age_band = a.value("age_band", "");
            r.sex = a.value("sex", "");
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("patient record: ") + e.what());
    }
    r.validate();
    return r;
}

json to_json(const PatientRecord& r) {
    json timelines = json::object();
    for (const auto& [id, tl] : r.symptom_timelines) {
        json arr = json::array();
        for (const auto& p : tl) arr.push_back({{"t", p.t}, {"severity", to_string(p.level)}});
        timelines[id] = arr;
    }
    json streams = json::object();
    for (const auto& [id, s] : r.indicator_streams) {
        json arr = json::array();
        for (const auto& p : s) arr.push_back({{"t", p.t}, {"value", p.y}});
        streams[id] = arr;
    }
    json out{{"patient_id", r.patient_id},
             {"gold_diseases", r.gold_diseases},
             {"symptom_timelines", timelines},
             {"indicator_streams", streams},
             {"static_findings", r.static_findings},
             {"absent_findings", r.absent_findings},
             {"attributes", {{"age_band", r.age_band}, {"sex", r.sex}}}};
    if (r.presenting_findings) out["presenting_findings"] = *r.presenting_findings;
    return out;
}

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void append_records(const json& j, std::vector<PatientRecord>& out) {
    if (j.is_array()) {
        for (const auto& item : j) out.push_back(record_from_json(item));
    } else {
        out.push_back(record_from_json(j));
    }
}

}  // namespace

PatientRecord load_record(const fs::path& path) { return record_from_json(read_json_file(path)); }

std::vector<PatientRecord> load_cohort(const fs::path& path) {
    std::vector<PatientRecord> out;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) append_records(read_json_file(f), out);
    } else {
        append_records(read_json_file(path), out);
    }
    return out;
}

void save_cohort(const std::vector<PatientRecord>& cohort, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& r : cohort) {
        std::ofstream out(dir / (r.patient_id + ".json"));
        if (!out) throw std::runtime_error("cannot write record " + r.patient_id);
        out << to_json(r).dump(2) << '\n';
    }
}

// ---- oracle / session -----------------------------------------------------

AnswerOracle scripted_patient(const PatientRecord& record, const KnowledgeBase&) {
    const auto present = record.present_findings();
    std::map<FindingId, std::optional<SeverityLevel>> severity;
    for (const auto& [id, tl] : record.symptom_timelines) severity[id] = latest_severity(tl);
    const auto absent = record.absent_findings;
    return [present, severity, absent](const Question& q) {
        Answer a;
        for (const auto& g : q.gaps) {
            GapAnswer ga{g.finding, AnswerValue::unknown, std::nullopt};
            if (present.count(g.finding)) {
                ga.value = AnswerValue::yes;
                if (auto it = severity.find(g.finding); it != severity.end()) ga.severity = it->second;
            } else if (absent.count(g.finding)) {
                ga.value = AnswerValue::no;
            }
            a.structured.push_back(ga);
        }
        return a;
    };
}

json to_json(const BenchmarkConfig& c) {
    return {{"consultation", to_json(c.consultation)}, {"router", router::to_json(c.router)}, {"tsa_query", c.tsa_query}};
}

std::vector<TrendPredicate> record_predicates(const PatientRecord& record, const BenchmarkConfig& config) {
    std::vector<TrendPredicate> out;
    auto run = [&](const std::string& signal, const tsa::TimeSeries& series) {
        router::ExecutionContext ctx{signal, std::nullopt};
        auto r = router::run_query(config.tsa_query, series, ctx, config.router);
        for (auto& p : r.predicates) out.push_back(std::move(p));
    };
    for (const auto& [id, tl] : record.symptom_timelines) {
        if (record.presenting_findings && !record.presenting_findings->count(id)) continue;
        if (tl.size() < 2) continue;
        run(id, tsa::TimeSeries::from_severity(tl));
    }
    for (const auto& [id, s] : record.indicator_streams) {
        if (s.size() < 2) continue;
        run(id, tsa::TimeSeries(s));
    }
    return out;
}

EvidenceSet initial_evidence(const PatientRecord& record) {
    EvidenceSet e;
    e.positive = record.presenting_findings ? *record.presenting_findings : record.present_findings();
    for (const auto& id : e.positive) {
        if (auto it = record.symptom_timelines.find(id); it != record.symptom_timelines.end()) {
            if (auto s = latest_severity(it->second)) e.severity[id] = *s;
        }
    }
    return e;
}

ConsultationState run_session(const KnowledgeBase& kb, const PatientRecord& record, const BenchmarkConfig& config) {
    auto state = start_session(kb, initial_evidence(record), record_predicates(record, config), config.consultation);
    const auto oracle = scripted_patient(record, kb);
    while (!state.terminal) state = step(kb, state, oracle(*state.pending_question), config.consultation);
    return state;
}

// ---- benchmark ------------------------------------------------------------

namespace {

std::optional<std::string> mismatch(const KnowledgeBase& kb, const PatientRecord& r) {
    if (r.gold_diseases.empty()) return "no gold diseases";
    for (const auto& d : r.gold_diseases)
        if (!kb.find_disease(d)) return "gold disease '" + d + "' is not in the knowledge base";
    for (const auto& f : r.present_findings())
        if (!kb.has_finding(f)) return "finding '" + f + "' is not in the knowledge base";
    for (const auto& f : r.absent_findings)
        if (!kb.has_finding(f)) return "finding '" + f + "' is not in the knowledge base";
    return std::nullopt;
}

std::string top_of(const RankedCandidates& r) { return r.empty() ? std::string() : r.entries.front().id; }

PatientOutcome summarize(const PatientRecord& record, const ConsultationState& state, const ConsultationConfig& cfg) {
    PatientOutcome o;
    o.patient_id = record.patient_id;
    // snapshots come from the same state the trace export reads
    o.top1_by_round.push_back(top_of(state.initial_ranking));
    for (const auto& rec : state.log) o.top1_by_round.push_back(top_of(rec.ranking));
    while (o.top1_by_round.size() < cfg.r_max + 1) o.top1_by_round.push_back(o.top1_by_round.back());
    o.final_ranking = ranked_ids(state);
    const auto& gold = record.gold_diseases;
    o.top1 = !o.final_ranking.empty() && gold.count(o.final_ranking[0]);
    for (std::size_t i = 0; i < std::min<std::size_t>(2, o.final_ranking.size()); ++i)
        if (gold.count(o.final_ranking[i])) o.top2 = true;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(cfg.scoring.top_k, o.final_ranking.size()); ++i)
        if (gold.count(o.final_ranking[i])) ++hits;
    o.recall = static_cast<double>(hits) / static_cast<double>(gold.size());
    o.terminal = std::string(to_string(state.terminal->reason));
    o.uncertainty_flag = state.terminal->uncertainty_flag;
    o.rounds = state.round;
    o.final_entropy = state.ranked.entropy;
    o.trace = export_trace(state);
    return o;
}

}  // namespace

BenchmarkReport run_benchmark(const KnowledgeBase& kb, const std::vector<PatientRecord>& cohort,
                              const BenchmarkConfig& config) {
    config.consultation.validate();
    if (config.consultation.tau_h_auto) throw ValidationError("tau_h is \"auto\"; calibrate before benchmarking");
    if (cohort.empty()) throw ValidationError("benchmark cohort is empty");

    BenchmarkReport report;
    report.config_fingerprint = fnv1a_hex(kb_fingerprint(kb) + to_json(config).dump());

    std::vector<const PatientRecord*> order;
    for (const auto& r : cohort) order.push_back(&r);
    std::stable_sort(order.begin(), order.end(),
                     [](const PatientRecord* a, const PatientRecord* b) { return a->patient_id < b->patient_id; });

    std::vector<const PatientRecord*> eligible;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0 && order[i]->patient_id == order[i - 1]->patient_id) {
            report.skipped.push_back({order[i]->patient_id, "duplicate patient_id"});
            continue;
        }
        if (auto why = mismatch(kb, *order[i])) {
            report.skipped.push_back({order[i]->patient_id, *why});
            continue;
        }
        eligible.push_back(order[i]);
    }

    std::vector<std::optional<PatientOutcome>> outcomes(eligible.size());
    std::vector<std::string> errors(eligible.size());
    const auto n = static_cast<std::int64_t>(eligible.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        try {
            const auto state = run_session(kb, *eligible[idx], config);
            outcomes[idx] = summarize(*eligible[idx], state, config.consultation);
        } catch (const std::exception& e) {
            errors[idx] = e.what();
        }
    }

    for (std::size_t i = 0; i < eligible.size(); ++i) {
        if (outcomes[i])
            report.outcomes.push_back(std::move(*outcomes[i]));
        else
            report.skipped.push_back({eligible[i]->patient_id, errors[i]});
    }
    std::sort(report.skipped.begin(), report.skipped.end(),
              [](const SkippedPatient& a, const SkippedPatient& b) { return a.patient_id < b.patient_id; });

    const std::size_t rounds = config.consultation.r_max + 1;
    report.per_round_accuracy.assign(rounds, 0.0);
    const double n_eval = static_cast<double>(report.outcomes.size());
    if (report.outcomes.empty()) return report;

    std::map<std::string, const PatientRecord*> by_id;
    for (const auto* r : eligible) by_id[r->patient_id] = r;

    std::set<DiseaseId> labels;
    double top1 = 0, top2 = 0, recall = 0;
    for (const auto& o : report.outcomes) {
        const auto& gold = by_id.at(o.patient_id)->gold_diseases;
        labels.insert(gold.begin(), gold.end());
        for (std::size_t r = 0; r < rounds; ++r)
            if (gold.count(o.top1_by_round[r])) report.per_round_accuracy[r] += 1.0;
        top1 += o.top1;
        top2 += o.top2;
        recall += o.recall;
    }
    for (auto& a : report.per_round_accuracy) a = 100.0 * a / n_eval;
    report.top1 = 100.0 * top1 / n_eval;
    report.top2 = 100.0 * top2 / n_eval;
    report.recall = recall / n_eval;

    double f1_sum = 0.0;
    for (const auto& label : labels) {
        double tp = 0, fp = 0, fn = 0;
        for (const auto& o : report.outcomes) {
            const auto& gold = by_id.at(o.patient_id)->gold_diseases;
            const bool predicted = !o.final_ranking.empty() && o.final_ranking[0] == label;
            const bool actual = gold.count(label) != 0;
            if (predicted && actual) ++tp;
            else if (predicted) ++fp;
            else if (actual) ++fn;
        }
        const double denom = 2 * tp + fp + fn;
        f1_sum += denom > 0 ? 2 * tp / denom : 0.0;
    }
    report.macro_f1 = f1_sum / static_cast<double>(labels.size());
    return report;
}

json to_json(const BenchmarkReport& r, bool include_traces) {
    json patients = json::array();
    for (const auto& o : r.outcomes) {
        json p{{"patient_id", o.patient_id},
               {"top1_by_round", o.top1_by_round},
               {"final_ranking", o.final_ranking},
               {"top1", o.top1},
               {"top2", o.top2},
               {"recall", o.recall},
               {"terminal", o.terminal},
               {"uncertainty_flag", o.uncertainty_flag},
               {"rounds", o.rounds},
               {"final_entropy", o.final_entropy}};
        if (include_traces) p["trace"] = o.trace;
        patients.push_back(std::move(p));
    }
    json skipped = json::array();
    for (const auto& s : r.skipped) skipped.push_back({{"patient_id", s.patient_id}, {"reason", s.reason}});
    return {{"schema", "cotc-benchmark/1"},
            {"config_fingerprint", r.config_fingerprint},
            {"n_evaluated", r.outcomes.size()},
            {"n_skipped", r.skipped.size()},
            {"metrics",
             {{"top1_accuracy", r.top1}, {"top2_accuracy", r.top2}, {"macro_f1", r.macro_f1}, {"disease_recall", r.recall}}},
            {"metric_notes",
             {{"f1", "macro average over gold disease labels, prediction = rank-1 disease"},
              {"multi_gold", "rank-1 counts as correct when it is any gold disease"},
              {"recall", "mean over patients of |top-k ∩ gold| / |gold|"}}},
            {"per_round_accuracy", r.per_round_accuracy},
            {"attribution", to_json(round_attribution(r.per_round_accuracy))},
            {"patients", patients},
            {"skipped", skipped}};
}

std::string per_round_csv(const BenchmarkReport& r) {
    std::string out = "round,accuracy\n";
    for (std::size_t i = 0; i < r.per_round_accuracy.size(); ++i)
        out += std::to_string(i) + "," + fmt(r.per_round_accuracy[i]) + "\n";
    return out;
}

// ---- attribution ----------------------------------------------------------

std::vector<AttributionRow> round_attribution(const std::vector<double>& accuracy) {
    std::vector<AttributionRow> rows;
    if (accuracy.empty()) return rows;
    const double total = accuracy.back() - accuracy.front();
    for (std::size_t r = 0; r < accuracy.size(); ++r) {
        AttributionRow row;
        row.round = r;
        row.accuracy = accuracy[r];
        if (r > 0) {
            row.gain = accuracy[r] - accuracy[r - 1];
            if (total != 0.0) row.share = 100.0 * (accuracy[r] - accuracy.front()) / total;
        }
        rows.push_back(row);
    }
    return rows;
}

json to_json(const std::vector<AttributionRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back({{"round", r.round},
                       {"accuracy", r.accuracy},
                       {"gain", r.gain ? json(*r.gain) : json(nullptr)},
                       {"cumulative_share", r.share ? json(*r.share) : json(nullptr)}});
    }
    return arr;
}

// ---- ablation -------------------------------------------------------------

std::vector<AblationRow> kb_ablation_sweep(const KnowledgeBase& kb, const std::vector<double>& fractions,
                                           const std::vector<PatientRecord>& cohort, const BenchmarkConfig& config,
                                           const std::vector<std::uint64_t>& seeds, const std::string& subset) {
    if (fractions.empty()) throw ValidationError("ablation needs at least one fraction");
    if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
    for (double f : fractions)
        if (!(f > 0.0 && f <= 1.0)) throw ValidationError("ablation fractions must lie in (0, 1]");
    const double baseline = run_benchmark(kb, cohort, config).top1;
    std::vector<AblationRow> rows;
    for (double f : fractions) {
        AblationRow row;
        row.subset = subset;
        row.fraction = f;
        for (auto seed : seeds) {
            const auto sub = subsample_edges(kb, f, seed);
            row.per_seed.push_back(run_benchmark(sub, cohort, config).top1);
        }
        const double k = static_cast<double>(row.per_seed.size());
        for (double a : row.per_seed) row.mean_accuracy += a;
        row.mean_accuracy /= k;
        if (row.per_seed.size() > 1) {
            double ss = 0.0;
            for (double a : row.per_seed) ss += (a - row.mean_accuracy) * (a - row.mean_accuracy);
            row.std_accuracy = std::sqrt(ss / (k - 1.0));
        }
        row.delta = row.mean_accuracy - baseline;
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const std::vector<AblationRow>& rows) {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"subset", r.subset},
                       {"fraction", r.fraction},
                       {"accuracy", r.mean_accuracy},
                       {"std", r.std_accuracy},
                       {"delta", r.delta},
                       {"per_seed", r.per_seed}});
    return arr;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "subset,fraction,accuracy,std,delta\n";
    for (const auto& r : rows)
        out += r.subset + "," + fmt(r.fraction) + "," + fmt(r.mean_accuracy) + "," + fmt(r.std_accuracy) + "," +
               fmt(r.delta) + "\n";
    return out;
}

// ---- calibration ----------------------------------------------------------

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of an empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile must lie in [0, 100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double calibrate_tau_h(const KnowledgeBase& kb, const std::vector<PatientRecord>& cohort, BenchmarkConfig config,
                       double pct) {
    config.consultation.tau_h_auto = false;
    config.consultation.tau_h = 0.0;  // H < 0 never holds
    const auto report = run_benchmark(kb, cohort, config);
    std::vector<double> entropies;
    for (const auto& o : report.outcomes) entropies.push_back(o.final_entropy);
    if (entropies.empty()) throw ValidationError("calibration cohort produced no sessions");
    return percentile(std::move(entropies), pct);
}

// ---- synthetic cohort -----------------------------------------------------

namespace {

std::string pad2(std::size_t k) {
    std::string s = std::to_string(k);
    return s.size() < 2 ? "0" + s : s;
}

}  // namespace

SyntheticCohort make_ambiguous_cohort(std::size_t n_patients, std::size_t n_pairs, std::uint64_t seed) {
    if (n_pairs < 1) throw ValidationError("synthetic cohort needs at least one disease pair");
    std::vector<SymptomDef> symptoms{{"fatigue", "fatigue", {"tired", "tiredness"}}};
    std::vector<TrendDef> trends;
    std::vector<Disease> diseases;
    for (std::size_t k = 0; k < n_pairs; ++k) {
        const std::string p = pad2(k);
        symptoms.push_back({"p" + p + "_1", "pair " + p + " primary sign", {}});
        symptoms.push_back({"p" + p + "_2", "pair " + p + " secondary sign", {}});
        symptoms.push_back({"x" + p + "a", "pair " + p + " marker a", {}});
        symptoms.push_back({"x" + p + "b", "pair " + p + " marker b", {}});
        trends.push_back({"t" + p, Estimand::slope, Direction::up, "rising pair " + p + " primary sign", "p" + p + "_1"});
        for (const char side : {'a', 'b'}) {
            Disease d;
            d.id = "d" + p + side;
            d.name = "disorder " + p + side;
            d.symptom_edges = {{"fatigue", 1.0, TemporalQualifier::chronic, false},
                               {"p" + p + "_1", 1.0, TemporalQualifier::subacute, false},
                               {"p" + p + "_2", 1.0, TemporalQualifier::subacute, false},
                               {"x" + p + side, 1.0, TemporalQualifier::unspecified, true}};
            d.trend_edges = {{"t" + p, 1.0, TemporalQualifier::subacute, false}};
            d.required = {"x" + p + side};
            diseases.push_back(std::move(d));
        }
    }
    SyntheticCohort out{KnowledgeBase(std::move(diseases), std::move(symptoms), std::move(trends)), {}};

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> spacing(2, 5);
    const SeverityLevel levels[] = {SeverityLevel::Minor,  SeverityLevel::Mild,   SeverityLevel::Mild,
                                    SeverityLevel::Moderate, SeverityLevel::Medium, SeverityLevel::Medium,
                                    SeverityLevel::Severe, SeverityLevel::Extreme};
    const double day0 = tsa::parse_iso8601_days("2026-01-01");
    for (std::size_t i = 0; i < n_patients; ++i) {
        const std::size_t k = i % n_pairs;
        const bool side_b = (i / n_pairs) % 2 == 1;
        const std::string p = pad2(k);
        PatientRecord r;
        std::string num = std::to_string(i);
        r.patient_id = "syn" + std::string(num.size() < 4 ? 4 - num.size() : 0, '0') + num;
        r.gold_diseases = {"d" + p + (side_b ? "b" : "a")};
        double t = day0 + static_cast<double>(i);
        auto& tl = r.symptom_timelines["p" + p + "_1"];
        for (const auto level : levels) {
            tl.push_back({t, level});
            t += spacing(rng);
        }
        r.static_findings = {"fatigue", "p" + p + "_2", "x" + p + (side_b ? "b" : "a")};
        r.absent_findings = {"x" + p + (side_b ? "a" : "b")};
        r.presenting_findings = std::set<FindingId>{"fatigue", "p" + p + "_1", "p" + p + "_2"};
        r.age_band = (i % 3 == 0) ? "40-49" : (i % 3 == 1 ? "50-59" : "60-69");
        r.sex = i % 2 ? "F" : "M";
        out.patients.push_back(std::move(r));
    }
    return out;
}

BenchmarkConfig synthetic_benchmark_config() {
    BenchmarkConfig c;
    c.consultation.scoring.gamma = 0.1;
    return c;
}

}  // namespace cotc::harness
