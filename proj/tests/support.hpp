#pragma once
// Shared fixtures and brute-force oracles for the test binaries.

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cotc/kb.hpp"
#include "cotc/scorer.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(COTC_FIXTURE_DIR) / name;
}

inline cotc::Edge edge(const std::string& target, double phi = 1.0, bool pathognomonic = false) {
    return {target, phi, cotc::TemporalQualifier::unspecified, pathognomonic};
}

inline std::vector<cotc::SymptomDef> symptoms(std::initializer_list<const char*> ids) {
    std::vector<cotc::SymptomDef> out;
    for (const char* id : ids) out.push_back({id, id, {}});
    return out;
}

inline cotc::Disease disease(const std::string& id, std::vector<cotc::Edge> edges, std::set<std::string> required = {},
                             std::vector<cotc::Edge> trend_edges = {}) {
    return {id, id, std::move(edges), std::move(trend_edges), std::move(required)};
}

// Random KB: symptoms f0..f{nf-1}, a few trends, every disease has 1..6 edges
// and a random requirement subset.
inline cotc::KnowledgeBase random_kb(std::mt19937_64& rng, std::size_t n_diseases, std::size_t n_findings,
                                     bool with_trends = true) {
    std::vector<cotc::SymptomDef> syms;
    for (std::size_t i = 0; i < n_findings; ++i) syms.push_back({"f" + std::to_string(i), "finding " + std::to_string(i), {}});
    std::vector<cotc::TrendDef> trends;
    if (with_trends) {
        trends.push_back({"tr_up", cotc::Estimand::slope, cotc::Direction::up, "rising", "lab"});
        trends.push_back({"tr_cp", cotc::Estimand::change_point_mass, cotc::Direction::up, "jump", "lab"});
    }
    std::uniform_int_distribution<std::size_t> n_edges(1, std::min<std::size_t>(6, n_findings));
    std::uniform_real_distribution<double> phi(0.5, 1.0);
    std::bernoulli_distribution coin(0.3);
    std::vector<cotc::Disease> dis;
    for (std::size_t d = 0; d < n_diseases; ++d) {
        std::vector<std::size_t> idx(n_findings);
        for (std::size_t i = 0; i < n_findings; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        cotc::Disease x;
        x.id = "d" + std::to_string(d);
        x.name = x.id;
        const std::size_t k = n_edges(rng);
        for (std::size_t e = 0; e < k; ++e) {
            x.symptom_edges.push_back(edge("f" + std::to_string(idx[e]), phi(rng), coin(rng)));
            if (coin(rng)) x.required.insert("f" + std::to_string(idx[e]));
        }
        if (with_trends && coin(rng)) {
            const std::string t = coin(rng) ? "tr_cp" : "tr_up";
            x.trend_edges.push_back(edge(t, phi(rng), coin(rng)));
            if (coin(rng)) x.required.insert(t);
        }
        dis.push_back(std::move(x));
    }
    return cotc::KnowledgeBase(std::move(dis), std::move(syms), std::move(trends));
}

// ln((|D|+1)/(n+1)) with n counted by scanning every edge list.
inline std::map<std::string, double> idf_oracle(const cotc::KnowledgeBase& kb) {
    std::map<std::string, double> out;
    const double nd = static_cast<double>(kb.diseases().size());
    auto count = [&](const std::string& id) {
        double n = 0;
        for (const auto& d : kb.diseases()) {
            bool hit = false;
            for (const auto& e : d.symptom_edges) hit |= e.target_id == id;
            for (const auto& e : d.trend_edges) hit |= e.target_id == id;
            n += hit ? 1 : 0;
        }
        return n;
    };
    for (const auto& s : kb.symptoms()) out[s.id] = std::log((nd + 1.0) / (count(s.id) + 1.0));
    for (const auto& t : kb.trends()) out[t.id] = std::log((nd + 1.0) / (count(t.id) + 1.0));
    return out;
}

// Priority of every (gap, disease) pair summed directly from the definition.
inline std::map<std::string, double> gap_oracle(const cotc::KnowledgeBase& kb, const cotc::RankedCandidates& ranked,
                                                const cotc::EvidenceSet& ev, const cotc::PsiConfig& psi,
                                                std::size_t top_k, const std::set<cotc::Estimand>& emitted) {
    std::vector<std::pair<std::string, double>> top;
    for (const auto& e : ranked.entries)
        if (e.survivor && top.size() < top_k) top.emplace_back(e.id, e.mass);
    std::map<std::string, double> out;
    for (const auto& [id, mass] : top) {
        const auto* d = kb.find_disease(id);
        for (const auto& g : d->required) {
            if (ev.contains(g)) continue;
            const cotc::Edge* edge = nullptr;
            for (const auto& e : d->symptom_edges)
                if (e.target_id == g) edge = &e;
            for (const auto& e : d->trend_edges)
                if (e.target_id == g) edge = &e;
            double p = psi.base;
            if (edge && edge->pathognomonic) p *= psi.pathognomonic;
            if (const auto* t = kb.find_trend(g); t && emitted.count(t->estimand)) p *= psi.tsa;
            out[g] += mass * p;
        }
    }
    return out;
}

}  // namespace testing

#include "cotc/engine.hpp"

namespace testing {

// Two diseases sharing six findings, each with one private pathognomonic
// discriminator it requires, plus fillers that keep the weights above 1.
inline cotc::KnowledgeBase pair_kb() {
    std::vector<cotc::Edge> shared;
    std::vector<cotc::SymptomDef> syms;
    for (int i = 1; i <= 6; ++i) {
        shared.push_back(edge("s" + std::to_string(i)));
        syms.push_back({"s" + std::to_string(i), "shared " + std::to_string(i), {}});
    }
    auto a = shared, b = shared;
    a.push_back(edge("dA", 1.0, true));
    b.push_back(edge("dB", 1.0, true));
    std::vector<cotc::Disease> dis{disease("A", a, {"dA"}), disease("B", b, {"dB"})};
    for (int i = 0; i < 20; ++i) dis.push_back(disease("filler" + std::to_string(i), {edge("filler")}));
    syms.push_back({"dA", "marker a", {}});
    syms.push_back({"dB", "marker b", {}});
    syms.push_back({"filler", "filler", {}});
    return cotc::KnowledgeBase(std::move(dis), std::move(syms), {});
}

inline cotc::ConsultationConfig pair_config() {
    cotc::ConsultationConfig c;
    c.scoring.gamma = 0.4;
    return c;
}

inline cotc::RankedCandidates rescore(const cotc::KnowledgeBase& kb, const cotc::EvidenceSet& ev,
                                      const cotc::ConsultationConfig& config) {
    const auto cands = cotc::candidate_set(kb, ev);
    if (cands.empty()) return {};
    return cotc::rank_candidates(cotc::score_energies(kb, kb.idf(), ev, cands, config.scoring), config.scoring);
}

// Re-scores every evidence prefix recorded in a trace and compares the
// serialized rankings byte for byte. Returns the number of mismatches.
inline std::size_t replay_mismatches(const cotc::KnowledgeBase& kb, const cotc::json& trace,
                                     const cotc::ConsultationConfig& config) {
    std::size_t bad = 0;
    auto ev = cotc::evidence_from_json(trace.at("initial_evidence"));
    if (cotc::to_json(rescore(kb, ev, config)).dump() != trace.at("round0").at("ranking").dump()) ++bad;
    for (const auto& r : trace.at("rounds")) {
        const auto& d = r.at("delta");
        for (const auto& id : d.at("positive")) ev.positive.insert(id.get<std::string>());
        for (const auto& id : d.at("negative")) ev.negative.insert(id.get<std::string>());
        for (const auto& id : d.at("unresolved")) ev.asked_unresolved.insert(id.get<std::string>());
        for (const auto& [id, s] : d.at("severity").items()) ev.severity[id] = *cotc::parse_severity(s.get<std::string>());
        if (cotc::to_json(rescore(kb, ev, config)).dump() != r.at("ranking").dump()) ++bad;
    }
    return bad;
}

}  // namespace testing
