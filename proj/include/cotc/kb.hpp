#pragma once
// Symptom-trend-disease knowledge base: load, validate, query, ablate.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "cotc/types.hpp"

namespace cotc {

enum class TemporalQualifier { acute, subacute, chronic, unspecified };

std::string_view to_string(TemporalQualifier q);
TemporalQualifier parse_temporal_qualifier(std::string_view s);

struct Edge {
    FindingId target_id;
    double phi = 1.0;  // clinician weight in [0.5, 1]
    TemporalQualifier temporal_qualifier = TemporalQualifier::unspecified;
    bool pathognomonic = false;

    bool operator==(const Edge&) const = default;
};

struct Disease {
    DiseaseId id;
    std::string name;
    std::vector<Edge> symptom_edges;
    std::vector<Edge> trend_edges;
    std::set<FindingId> required;

    // Edge to `finding` among symptom and trend edges, or nullptr.
    const Edge* edge_to(const FindingId& finding) const;
    std::size_t edge_count() const { return symptom_edges.size() + trend_edges.size(); }
    bool operator==(const Disease&) const = default;
};

struct SymptomDef {
    FindingId id;
    std::string name;
    std::vector<std::string> synonyms;
    bool operator==(const SymptomDef&) const = default;
};

// A trend frame. `signal` is the series id (symptom or indicator) the frame
// refers to; empty means "any signal".
struct TrendDef {
    FindingId id;
    Estimand estimand = Estimand::slope;
    Direction direction = Direction::flat;
    std::string description;
    std::string signal;
    bool operator==(const TrendDef&) const = default;
};

enum class FindingKind { symptom, trend };

using IdfTable = std::map<FindingId, double>;

// Immutable after construction; safe to share across threads.
class KnowledgeBase {
public:
    KnowledgeBase() = default;

    // Validates every invariant and precomputes the IDF table.
    // Throws ValidationError naming the offending record.
    KnowledgeBase(std::vector<Disease> diseases, std::vector<SymptomDef> symptoms,
                  std::vector<TrendDef> trends);

    const std::vector<Disease>& diseases() const { return diseases_; }
    const std::vector<SymptomDef>& symptoms() const { return symptoms_; }
    const std::vector<TrendDef>& trends() const { return trends_; }
    const IdfTable& idf() const { return idf_; }
    // Non-fatal load diagnostics (e.g. diseases without edges).
    const std::vector<std::string>& warnings() const { return warnings_; }

    const Disease* find_disease(const DiseaseId& id) const;
    const SymptomDef* find_symptom(const FindingId& id) const;
    const TrendDef* find_trend(const FindingId& id) const;
    std::optional<FindingKind> kind_of(const FindingId& id) const;
    bool has_finding(const FindingId& id) const { return kind_of(id).has_value(); }

    // Display name of a finding (symptom name or trend description).
    std::string finding_name(const FindingId& id) const;
    // Human name for a series id: symptom name when it resolves, else the id.
    std::string signal_name(const std::string& signal) const;
    // Exact-string lookup over symptom names and declared synonyms.
    std::optional<FindingId> resolve_symptom_name(const std::string& text) const;

    // n_j: number of diseases with an edge to each finding.
    std::map<FindingId, std::size_t> prevalence() const;
    std::size_t edge_count() const;

    bool operator==(const KnowledgeBase& o) const {
        return diseases_ == o.diseases_ && symptoms_ == o.symptoms_ && trends_ == o.trends_;
    }

private:
    std::vector<Disease> diseases_;
    std::vector<SymptomDef> symptoms_;
    std::vector<TrendDef> trends_;
    IdfTable idf_;
    std::vector<std::string> warnings_;
    std::unordered_map<std::string, std::size_t> disease_index_;
    std::unordered_map<std::string, std::size_t> symptom_index_;
    std::unordered_map<std::string, std::size_t> trend_index_;
    std::unordered_map<std::string, FindingId> name_index_;
};

// w_j = ln((|D|+1)/(n_j+1)) for every declared symptom and trend.
IdfTable compute_idf(const KnowledgeBase& kb);

KnowledgeBase kb_from_json(const json& j);
json to_json(const KnowledgeBase& kb);
KnowledgeBase load_kb(const std::filesystem::path& path);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

// Stable 64-bit FNV-1a over the canonical serialization, as hex.
std::string kb_fingerprint(const KnowledgeBase& kb);

// Prevalence-stratified edge subsampling. Edges are ordered by
// (n_j of target, target id, disease id) and cut into four contiguous
// quartile strata; round(fraction * |stratum|) edges are kept per stratum
// uniformly at random under `seed`. Requirement sets are pruned to the
// surviving edges and IDF is recomputed.
KnowledgeBase subsample_edges(const KnowledgeBase& kb, double fraction, std::uint64_t seed);

// Sizes of the four prevalence strata used by subsample_edges.
std::vector<std::size_t> prevalence_strata_sizes(const KnowledgeBase& kb);

// Diseases with at least one edge to a positive finding.
// Throws ValidationError when an evidence id does not resolve.
std::set<DiseaseId> candidate_set(const KnowledgeBase& kb, const EvidenceSet& evidence);

struct CoverageReport {
    std::size_t matched = 0;
    std::vector<std::string> unmatched_tokens;
    std::vector<FindingId> matched_ids;  // KB trend ids, deduplicated, sorted
    bool low_coverage = true;
};

// Token form of a predicate, "<signal>:<estimand>:<direction>".
std::string predicate_token(const TrendPredicate& p);
// True when the predicate aligns with the trend frame.
bool matches(const TrendDef& frame, const TrendPredicate& p);
// low_coverage holds iff no predicate matches any trend frame.
CoverageReport coverage_check(const KnowledgeBase& kb, const std::vector<TrendPredicate>& predicates);
// Copies of the predicates with source_finding_id set to the first matching
// frame (in declaration order), if any.
std::vector<TrendPredicate> attach_findings(const KnowledgeBase& kb, std::vector<TrendPredicate> predicates);

}  // namespace cotc
