#pragma once
// Disease energies, gated softmax, entropy and gap priorities.

#include <map>
#include <set>
#include <span>
#include <vector>

#include "cotc/kb.hpp"
#include "cotc/types.hpp"

namespace cotc {

struct ScoringParams {
    double gamma = 0.5;
    double energy_gate = 0.3;  // T
    double mass_gate = 0.9;    // theta
    std::size_t top_k = 5;
    double penalty_clamp_eps = 1e-6;

    void validate() const;  // throws ValidationError
};

struct PsiConfig {
    double base = 1.0;
    double pathognomonic = 2.0;
    double tsa = 1.5;

    void validate() const;
};

// Energy of one disease given the evidence. Only `positive` counts as a
// match; negative and unresolved findings are penalized like unobserved ones.
double disease_energy(const KnowledgeBase& kb, const IdfTable& idf, const EvidenceSet& evidence,
                      const DiseaseId& disease, const ScoringParams& params);

// Energies for every disease in `candidates`, scored in parallel.
std::map<DiseaseId, double> score_energies(const KnowledgeBase& kb, const IdfTable& idf, const EvidenceSet& evidence,
                                           const std::set<DiseaseId>& candidates, const ScoringParams& params);

namespace serial {
std::map<DiseaseId, double> score_energies(const KnowledgeBase& kb, const IdfTable& idf, const EvidenceSet& evidence,
                                           const std::set<DiseaseId>& candidates, const ScoringParams& params);
}

struct RankedEntry {
    DiseaseId id;
    double energy = 0.0;
    double mass = 0.0;  // 0 for gated-out entries
    bool survivor = false;
    bool operator==(const RankedEntry&) const = default;
};

struct RankedCandidates {
    // Survivors first by mass descending then id; gated entries follow by id.
    std::vector<RankedEntry> entries;
    double entropy = 0.0;
    std::size_t survivors = 0;

    bool empty() const { return survivors == 0; }
    double top_mass() const { return survivors ? entries.front().mass : 0.0; }
    std::vector<double> masses() const;  // survivors only, ranked order
    bool operator==(const RankedCandidates&) const = default;
};

// Gate on R >= T, then softmax over survivors. Throws ValidationError when
// `energies` is empty.
RankedCandidates rank_candidates(const std::map<DiseaseId, double>& energies, const ScoringParams& params);

// Shannon entropy in nats. Throws ValidationError unless masses are
// non-negative and sum to 1 within 1e-9.
double posterior_entropy(std::span<const double> masses);

struct Requirement {
    DiseaseId disease;
    double mass = 0.0;
    double psi = 1.0;
    bool operator==(const Requirement&) const = default;
};

struct Gap {
    FindingId finding;
    double priority = 0.0;
    std::vector<Requirement> requiring;  // top-k order

    // Sum of mass * psi over `requiring`, in stored order.
    double recompute() const;
    bool operator==(const Gap&) const = default;
};

json to_json(const Gap& g);
json to_json(const RankedCandidates& r);

// Gaps over the top-k survivors, sorted by priority descending then id.
// `emitted` holds the estimands of the predicates the router produced.
std::vector<Gap> gap_priority(const KnowledgeBase& kb, const RankedCandidates& ranked, const EvidenceSet& evidence,
                              const PsiConfig& psi, std::size_t top_k, const std::set<Estimand>& emitted = {});

}  // namespace cotc
