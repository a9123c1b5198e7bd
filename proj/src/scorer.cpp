#include "cotc/scorer.hpp"

#include <algorithm>
#include <cmath>

namespace cotc {

void ScoringParams::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
    if (!std::isfinite(energy_gate)) throw ValidationError("energy gate must be finite");
    if (!(mass_gate > 0.0 && mass_gate <= 1.0)) throw ValidationError("mass gate must lie in (0, 1]");
    if (top_k < 1) throw ValidationError("top_k must be >= 1");
    if (!(penalty_clamp_eps > 0.0 && penalty_clamp_eps < 1.0)) throw ValidationError("penalty clamp eps must lie in (0, 1)");
}

void PsiConfig::validate() const {
    if (!(base > 0.0) || !(pathognomonic > 0.0) || !(tsa > 0.0)) throw ValidationError("psi multipliers must be > 0");
}

namespace {

void check_evidence(const KnowledgeBase& kb, const EvidenceSet& evidence) {
    for (const auto* set : {&evidence.positive, &evidence.negative, &evidence.asked_unresolved}) {
        for (const auto& id : *set) {
            if (!kb.has_finding(id)) throw ValidationError("evidence finding '" + id + "' is not in the knowledge base");
        }
    }
}

double energy_of(const Disease& d, const IdfTable& idf, const EvidenceSet& evidence, const ScoringParams& params) {
    double r = 0.0;
    const double cap = 1.0 - params.penalty_clamp_eps;
    auto accumulate = [&](const std::vector<Edge>& edges) {
        for (const auto& e : edges) {
            const auto it = idf.find(e.target_id);
            if (it == idf.end()) throw ValidationError("no IDF weight for finding '" + e.target_id + "'");
            const double w = it->second;
            if (evidence.positive.count(e.target_id)) {
                r += (w > 0.0 ? std::log(w) : 0.0) + std::log(e.phi);
            } else {
                r += std::log1p(-std::min(params.gamma * w, cap));
            }
        }
    };
    accumulate(d.symptom_edges);
    accumulate(d.trend_edges);
    return r;
}

std::vector<const Disease*> resolve(const KnowledgeBase& kb, const std::set<DiseaseId>& candidates) {
    std::vector<const Disease*> out;
    out.reserve(candidates.size());
    for (const auto& id : candidates) {
        const auto* d = kb.find_disease(id);
        if (d == nullptr) throw ValidationError("unknown disease '" + id + "'");
        out.push_back(d);
    }
    return out;
}

}  // namespace

double disease_energy(const KnowledgeBase& kb, const IdfTable& idf, const EvidenceSet& evidence,
                      const DiseaseId& disease, const ScoringParams& params) {
    params.validate();
    const auto* d = kb.find_disease(disease);
    if (d == nullptr) throw ValidationError("unknown disease '" + disease + "'");
    check_evidence(kb, evidence);
    return energy_of(*d, idf, evidence, params);
}

std::map<DiseaseId, double> score_energies(const KnowledgeBase& kb, const IdfTable& idf, const EvidenceSet& evidence,
                                           const std::set<DiseaseId>& candidates, const ScoringParams& params) {
    params.validate();
    check_evidence(kb, evidence);
    const auto diseases = resolve(kb, candidates);
    std::vector<double> out(diseases.size());
    const auto n = static_cast<std::int64_t>(diseases.size());
    bool failed = false;
#pragma omp parallel for schedule(static) if (diseases.size() > 64)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = energy_of(*diseases[static_cast<std::size_t>(i)], idf, evidence, params);
        } catch (...) {
#pragma omp atomic write
            failed = true;
        }
    }
    // rerun serially so the first error surfaces with its message
    if (failed) return serial::score_energies(kb, idf, evidence, candidates, params);
    std::map<DiseaseId, double> energies;
    for (std::size_t i = 0; i < diseases.size(); ++i) energies.emplace(diseases[i]->id, out[i]);
    return energies;
}

namespace serial {

std::map<DiseaseId, double> score_energies(const KnowledgeBase& kb, const IdfTable& idf, const EvidenceSet& evidence,
                                           const std::set<DiseaseId>& candidates, const ScoringParams& params) {
    params.validate();
    check_evidence(kb, evidence);
    std::map<DiseaseId, double> energies;
    for (const auto* d : resolve(kb, candidates)) energies.emplace(d->id, energy_of(*d, idf, evidence, params));
    return energies;
}

}  // namespace serial

std::vector<double> RankedCandidates::masses() const {
    std::vector<double> m;
    for (const auto& e : entries)
        if (e.survivor) m.push_back(e.mass);
    return m;
}

RankedCandidates rank_candidates(const std::map<DiseaseId, double>& energies, const ScoringParams& params) {
    if (energies.empty()) throw ValidationError("cannot rank an empty energy map");
    RankedCandidates out;
    double max_r = -std::numeric_limits<double>::infinity();
    for (const auto& [id, r] : energies) {
        const bool survivor = r >= params.energy_gate;
        out.entries.push_back({id, r, 0.0, survivor});
        if (survivor) {
            ++out.survivors;
            max_r = std::max(max_r, r);
        }
    }
    if (out.survivors > 0) {
        double z = 0.0;
        for (auto& e : out.entries) {
            if (!e.survivor) continue;
            e.mass = std::exp(e.energy - max_r);
            z += e.mass;
        }
        for (auto& e : out.entries)
            if (e.survivor) e.mass /= z;
    }
    std::stable_sort(out.entries.begin(), out.entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.survivor != b.survivor) return a.survivor;
        if (a.mass != b.mass) return a.mass > b.mass;
        return a.id < b.id;
    });
    if (out.survivors > 0) out.entropy = posterior_entropy(out.masses());
    return out;
}

double posterior_entropy(std::span<const double> masses) {
    if (masses.empty()) throw ValidationError("entropy of an empty distribution");
    double sum = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("masses must be finite and non-negative");
        sum += m;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw ValidationError("masses must sum to 1");
    double h = 0.0;
    for (double m : masses)
        if (m > 0.0) h -= m * std::log(m);
    return std::max(h, 0.0);
}

double Gap::recompute() const {
    double p = 0.0;
    for (const auto& r : requiring) p += r.mass * r.psi;
    return p;
}

json to_json(const Gap& g) {
    json req = json::array();
    for (const auto& r : g.requiring) req.push_back({{"disease", r.disease}, {"mass", r.mass}, {"psi", r.psi}});
    return {{"finding", g.finding}, {"priority", g.priority}, {"requiring", req}};
}

json to_json(const RankedCandidates& r) {
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"disease", e.id}, {"energy", e.energy}, {"mass", e.mass}, {"survivor", e.survivor}});
    return {{"entries", entries}, {"entropy", r.entropy}, {"survivors", r.survivors}};
}

std::vector<Gap> gap_priority(const KnowledgeBase& kb, const RankedCandidates& ranked, const EvidenceSet& evidence,
                              const PsiConfig& psi, std::size_t top_k, const std::set<Estimand>& emitted) {
    psi.validate();
    std::map<FindingId, Gap> gaps;
    std::size_t taken = 0;
    for (const auto& entry : ranked.entries) {
        if (!entry.survivor || taken == top_k) break;
        ++taken;
        const auto* d = kb.find_disease(entry.id);
        if (d == nullptr) throw ValidationError("unknown disease '" + entry.id + "'");
        for (const auto& g : d->required) {
            if (evidence.contains(g)) continue;
            const Edge* edge = d->edge_to(g);
            double factor = psi.base;
            if (edge != nullptr && edge->pathognomonic) factor *= psi.pathognomonic;
            if (const auto* trend = kb.find_trend(g); trend != nullptr && emitted.count(trend->estimand))
                factor *= psi.tsa;
            auto& gap = gaps[g];
            gap.finding = g;
            gap.requiring.push_back({entry.id, entry.mass, factor});
        }
    }
    std::vector<Gap> out;
    for (auto& [_, g] : gaps) {
        g.priority = g.recompute();
        out.push_back(std::move(g));
    }
    std::stable_sort(out.begin(), out.end(), [](const Gap& a, const Gap& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        return a.finding < b.finding;
    });
    return out;
}

}  // namespace cotc
