#include "cotc/kb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace cotc {

namespace {

void require_fields(const json& obj, const std::set<std::string>& required, const std::set<std::string>& optional,
                    const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected object");
    for (const auto& k : required) {
        if (!obj.contains(k)) throw ValidationError(where + ": missing field '" + k + "'");
    }
    for (const auto& [k, _] : obj.items()) {
        if (!required.count(k) && !optional.count(k)) throw ValidationError(where + ": unknown field '" + k + "'");
    }
}

Edge edge_from_json(const json& j, const std::string& where) {
    require_fields(j, {"target_id", "phi"}, {"temporal_qualifier", "pathognomonic"}, where);
    Edge e;
    e.target_id = j["target_id"].get<std::string>();
    e.phi = j["phi"].get<double>();
    if (j.contains("temporal_qualifier"))
        e.temporal_qualifier = parse_temporal_qualifier(j["temporal_qualifier"].get<std::string>());
    if (j.contains("pathognomonic")) e.pathognomonic = j["pathognomonic"].get<bool>();
    return e;
}

json edge_to_json(const Edge& e) {
    return {{"target_id", e.target_id},
            {"phi", e.phi},
            {"temporal_qualifier", std::string(to_string(e.temporal_qualifier))},
            {"pathognomonic", e.pathognomonic}};
}

// Deterministic draw in [0, n) from a 64-bit engine, independent of the
// standard library's distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

struct EdgeRef {
    std::size_t disease;
    bool trend;
    std::size_t index;
    std::size_t prevalence;
    const FindingId* target;
    const DiseaseId* disease_id;
};

std::vector<EdgeRef> sorted_edge_refs(const KnowledgeBase& kb) {
    const auto prev = kb.prevalence();
    std::vector<EdgeRef> refs;
    const auto& ds = kb.diseases();
    for (std::size_t d = 0; d < ds.size(); ++d) {
        for (std::size_t i = 0; i < ds[d].symptom_edges.size(); ++i) {
            const auto& t = ds[d].symptom_edges[i].target_id;
            refs.push_back({d, false, i, prev.at(t), &t, &ds[d].id});
        }
        for (std::size_t i = 0; i < ds[d].trend_edges.size(); ++i) {
            const auto& t = ds[d].trend_edges[i].target_id;
            refs.push_back({d, true, i, prev.at(t), &t, &ds[d].id});
        }
    }
    std::sort(refs.begin(), refs.end(), [](const EdgeRef& a, const EdgeRef& b) {
        if (a.prevalence != b.prevalence) return a.prevalence < b.prevalence;
        if (*a.target != *b.target) return *a.target < *b.target;
        return *a.disease_id < *b.disease_id;
    });
    return refs;
}

}  // namespace

std::string_view to_string(TemporalQualifier q) {
    switch (q) {
        case TemporalQualifier::acute: return "acute";
        case TemporalQualifier::subacute: return "subacute";
        case TemporalQualifier::chronic: return "chronic";
        case TemporalQualifier::unspecified: return "unspecified";
    }
    return "unspecified";
}

TemporalQualifier parse_temporal_qualifier(std::string_view s) {
    if (s == "acute") return TemporalQualifier::acute;
    if (s == "subacute") return TemporalQualifier::subacute;
    if (s == "chronic") return TemporalQualifier::chronic;
    if (s == "unspecified") return TemporalQualifier::unspecified;
    throw ValidationError("unknown temporal qualifier '" + std::string(s) + "'");
}

const Edge* Disease::edge_to(const FindingId& finding) const {
    for (const auto& e : symptom_edges)
        if (e.target_id == finding) return &e;
    for (const auto& e : trend_edges)
        if (e.target_id == finding) return &e;
    return nullptr;
}

KnowledgeBase::KnowledgeBase(std::vector<Disease> diseases, std::vector<SymptomDef> symptoms,
                             std::vector<TrendDef> trends)
    : diseases_(std::move(diseases)), symptoms_(std::move(symptoms)), trends_(std::move(trends)) {
    for (std::size_t i = 0; i < symptoms_.size(); ++i) {
        const auto& s = symptoms_[i];
        if (s.id.empty()) throw ValidationError("symptom #" + std::to_string(i) + ": empty id");
        if (!symptom_index_.emplace(s.id, i).second) throw ValidationError("duplicate symptom id '" + s.id + "'");
    }
    for (std::size_t i = 0; i < trends_.size(); ++i) {
        const auto& t = trends_[i];
        if (t.id.empty()) throw ValidationError("trend #" + std::to_string(i) + ": empty id");
        if (symptom_index_.count(t.id))
            throw ValidationError("trend id '" + t.id + "' collides with a symptom id");
        if (!trend_index_.emplace(t.id, i).second) throw ValidationError("duplicate trend id '" + t.id + "'");
    }
    for (std::size_t i = 0; i < diseases_.size(); ++i) {
        const auto& d = diseases_[i];
        if (d.id.empty()) throw ValidationError("disease #" + std::to_string(i) + ": empty id");
        if (!disease_index_.emplace(d.id, i).second) throw ValidationError("duplicate disease id '" + d.id + "'");
        std::set<FindingId> targets;
        auto check_edges = [&](const std::vector<Edge>& edges, bool trend) {
            for (const auto& e : edges) {
                const std::string where = "disease '" + d.id + "' edge -> '" + e.target_id + "'";
                const bool ok = trend ? trend_index_.count(e.target_id) : symptom_index_.count(e.target_id);
                if (!ok) throw ValidationError(where + ": dangling " + (trend ? "trend" : "symptom") + " id");
                if (!(e.phi >= 0.5 && e.phi <= 1.0)) {
                    std::ostringstream os;
                    os << where << ": phi " << e.phi << " outside [0.5, 1]";
                    throw ValidationError(os.str());
                }
                if (!targets.insert(e.target_id).second) throw ValidationError(where + ": duplicate edge");
            }
        };
        check_edges(d.symptom_edges, false);
        check_edges(d.trend_edges, true);
        for (const auto& r : d.required) {
            if (!targets.count(r))
                throw ValidationError("disease '" + d.id + "': required finding '" + r + "' has no edge");
        }
        if (targets.empty()) warnings_.push_back("disease '" + d.id + "' has no edges");
    }
    for (const auto& s : symptoms_) {
        name_index_.emplace(s.name, s.id);
        for (const auto& syn : s.synonyms) name_index_.emplace(syn, s.id);
    }
    idf_ = compute_idf(*this);
}

const Disease* KnowledgeBase::find_disease(const DiseaseId& id) const {
    auto it = disease_index_.find(id);
    return it == disease_index_.end() ? nullptr : &diseases_[it->second];
}

const SymptomDef* KnowledgeBase::find_symptom(const FindingId& id) const {
    auto it = symptom_index_.find(id);
    return it == symptom_index_.end() ? nullptr : &symptoms_[it->second];
}

const TrendDef* KnowledgeBase::find_trend(const FindingId& id) const {
    auto it = trend_index_.find(id);
    return it == trend_index_.end() ? nullptr : &trends_[it->second];
}

std::optional<FindingKind> KnowledgeBase::kind_of(const FindingId& id) const {
    if (symptom_index_.count(id)) return FindingKind::symptom;
    if (trend_index_.count(id)) return FindingKind::trend;
    return std::nullopt;
}

std::string KnowledgeBase::finding_name(const FindingId& id) const {
    if (const auto* s = find_symptom(id)) return s->name;
    if (const auto* t = find_trend(id)) return t->description.empty() ? t->id : t->description;
    return id;
}

std::string KnowledgeBase::signal_name(const std::string& signal) const {
    if (const auto* s = find_symptom(signal)) return s->name;
    return signal;
}

std::optional<FindingId> KnowledgeBase::resolve_symptom_name(const std::string& text) const {
    auto it = name_index_.find(text);
    if (it == name_index_.end()) return std::nullopt;
    return it->second;
}

std::map<FindingId, std::size_t> KnowledgeBase::prevalence() const {
    std::map<FindingId, std::size_t> n;
    for (const auto& s : symptoms_) n[s.id] = 0;
    for (const auto& t : trends_) n[t.id] = 0;
    for (const auto& d : diseases_) {
        for (const auto& e : d.symptom_edges) ++n[e.target_id];
        for (const auto& e : d.trend_edges) ++n[e.target_id];
    }
    return n;
}

std::size_t KnowledgeBase::edge_count() const {
    std::size_t n = 0;
    for (const auto& d : diseases_) n += d.edge_count();
    return n;
}

IdfTable compute_idf(const KnowledgeBase& kb) {
    const double num = static_cast<double>(kb.diseases().size()) + 1.0;
    IdfTable idf;
    for (const auto& [id, n] : kb.prevalence()) idf[id] = std::log(num / (static_cast<double>(n) + 1.0));
    return idf;
}

KnowledgeBase kb_from_json(const json& j) {
    try {
        require_fields(j, {"schema", "diseases", "symptoms", "trends"}, {}, "kb");
        if (j["schema"] != "kb/1") throw ValidationError("kb: unsupported schema " + j["schema"].dump());
        std::vector<SymptomDef> symptoms;
        for (std::size_t i = 0; i < j["symptoms"].size(); ++i) {
            const auto& s = j["symptoms"][i];
            require_fields(s, {"id", "name"}, {"synonyms"}, "symptoms[" + std::to_string(i) + "]");
            SymptomDef def{s["id"].get<std::string>(), s["name"].get<std::string>(), {}};
            if (s.contains("synonyms")) def.synonyms = s["synonyms"].get<std::vector<std::string>>();
            symptoms.push_back(std::move(def));
        }
        std::vector<TrendDef> trends;
        for (std::size_t i = 0; i < j["trends"].size(); ++i) {
            const auto& t = j["trends"][i];
            const std::string where = "trends[" + std::to_string(i) + "]";
            require_fields(t, {"id", "estimand", "direction"}, {"description", "signal"}, where);
            TrendDef def;
            def.id = t["id"].get<std::string>();
            def.estimand = parse_estimand(t["estimand"].get<std::string>());
            def.direction = parse_direction(t["direction"].get<std::string>());
            def.description = t.value("description", std::string{});
            def.signal = t.value("signal", std::string{});
            trends.push_back(std::move(def));
        }
        std::vector<Disease> diseases;
        for (std::size_t i = 0; i < j["diseases"].size(); ++i) {
            const auto& d = j["diseases"][i];
            const std::string where = "diseases[" + std::to_string(i) + "]";
            require_fields(d, {"id", "name", "symptom_edges", "trend_edges"}, {"required"}, where);
            Disease dis;
            dis.id = d["id"].get<std::string>();
            dis.name = d["name"].get<std::string>();
            const std::string dwhere = "disease '" + dis.id + "'";
            for (std::size_t k = 0; k < d["symptom_edges"].size(); ++k)
                dis.symptom_edges.push_back(
                    edge_from_json(d["symptom_edges"][k], dwhere + " symptom_edges[" + std::to_string(k) + "]"));
            for (std::size_t k = 0; k < d["trend_edges"].size(); ++k)
                dis.trend_edges.push_back(
                    edge_from_json(d["trend_edges"][k], dwhere + " trend_edges[" + std::to_string(k) + "]"));
            if (d.contains("required")) {
                for (const auto& r : d["required"]) dis.required.insert(r.get<std::string>());
            }
            diseases.push_back(std::move(dis));
        }
        return KnowledgeBase(std::move(diseases), std::move(symptoms), std::move(trends));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("kb: ") + e.what());
    }
}

json to_json(const KnowledgeBase& kb) {
    json diseases = json::array();
    for (const auto& d : kb.diseases()) {
        json se = json::array(), te = json::array();
        for (const auto& e : d.symptom_edges) se.push_back(edge_to_json(e));
        for (const auto& e : d.trend_edges) te.push_back(edge_to_json(e));
        diseases.push_back(
            {{"id", d.id}, {"name", d.name}, {"symptom_edges", se}, {"trend_edges", te}, {"required", d.required}});
    }
    json symptoms = json::array();
    for (const auto& s : kb.symptoms()) symptoms.push_back({{"id", s.id}, {"name", s.name}, {"synonyms", s.synonyms}});
    json trends = json::array();
    for (const auto& t : kb.trends()) {
        json o = {{"id", t.id},
                  {"estimand", std::string(to_string(t.estimand))},
                  {"direction", std::string(to_string(t.direction))},
                  {"description", t.description}};
        if (!t.signal.empty()) o["signal"] = t.signal;
        trends.push_back(std::move(o));
    }
    return {{"schema", "kb/1"}, {"diseases", diseases}, {"symptoms", symptoms}, {"trends", trends}};
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open KB file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("KB file " + path.string() + ": " + e.what());
    }
    return kb_from_json(j);
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(kb).dump(2) << '\n';
}

std::string kb_fingerprint(const KnowledgeBase& kb) { return fnv1a_hex(to_json(kb).dump()); }

std::vector<std::size_t> prevalence_strata_sizes(const KnowledgeBase& kb) {
    const std::size_t total = kb.edge_count();
    std::vector<std::size_t> sizes(4);
    for (std::size_t q = 0; q < 4; ++q) sizes[q] = (q + 1) * total / 4 - q * total / 4;
    return sizes;
}

KnowledgeBase subsample_edges(const KnowledgeBase& kb, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("subsample fraction must lie in (0, 1]");
    if (kb.diseases().empty() || kb.edge_count() == 0) throw ValidationError("cannot subsample an empty KB");

    const auto refs = sorted_edge_refs(kb);
    const std::size_t total = refs.size();
    std::mt19937_64 rng(seed);
    // keep[d] = (symptom keep mask, trend keep mask)
    std::vector<std::pair<std::vector<bool>, std::vector<bool>>> keep;
    for (const auto& d : kb.diseases())
        keep.emplace_back(std::vector<bool>(d.symptom_edges.size(), false), std::vector<bool>(d.trend_edges.size(), false));

    for (std::size_t q = 0; q < 4; ++q) {
        const std::size_t lo = q * total / 4, hi = (q + 1) * total / 4;
        const std::size_t size = hi - lo;
        const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(size)));
        std::vector<std::size_t> idx(size);
        for (std::size_t i = 0; i < size; ++i) idx[i] = lo + i;
        // partial Fisher-Yates: first `want` slots are the sample
        for (std::size_t i = 0; i < want && i + 1 < size; ++i) {
            const std::size_t j = i + uniform_below(rng, size - i);
            std::swap(idx[i], idx[j]);
        }
        for (std::size_t i = 0; i < want; ++i) {
            const auto& r = refs[idx[i]];
            (r.trend ? keep[r.disease].second : keep[r.disease].first)[r.index] = true;
        }
    }

    std::vector<Disease> diseases;
    for (std::size_t d = 0; d < kb.diseases().size(); ++d) {
        const auto& src = kb.diseases()[d];
        Disease out{src.id, src.name, {}, {}, {}};
        for (std::size_t i = 0; i < src.symptom_edges.size(); ++i)
            if (keep[d].first[i]) out.symptom_edges.push_back(src.symptom_edges[i]);
        for (std::size_t i = 0; i < src.trend_edges.size(); ++i)
            if (keep[d].second[i]) out.trend_edges.push_back(src.trend_edges[i]);
        for (const auto& r : src.required)
            if (out.edge_to(r)) out.required.insert(r);
        diseases.push_back(std::move(out));
    }
    return KnowledgeBase(std::move(diseases), kb.symptoms(), kb.trends());
}

std::set<DiseaseId> candidate_set(const KnowledgeBase& kb, const EvidenceSet& evidence) {
    for (const auto* group : {&evidence.positive, &evidence.negative, &evidence.asked_unresolved}) {
        for (const auto& id : *group) {
            if (!kb.has_finding(id)) throw ValidationError("evidence finding '" + id + "' does not resolve in KB");
        }
    }
    std::set<DiseaseId> out;
    for (const auto& d : kb.diseases()) {
        for (const auto& id : evidence.positive) {
            if (d.edge_to(id)) {
                out.insert(d.id);
                break;
            }
        }
    }
    return out;
}

std::string predicate_token(const TrendPredicate& p) {
    return p.signal + ":" + std::string(to_string(p.estimand)) + ":" + std::string(to_string(p.direction));
}

bool matches(const TrendDef& frame, const TrendPredicate& p) {
    return frame.estimand == p.estimand && frame.direction == p.direction &&
           (frame.signal.empty() || frame.signal == p.signal);
}

CoverageReport coverage_check(const KnowledgeBase& kb, const std::vector<TrendPredicate>& predicates) {
    CoverageReport report;
    std::set<FindingId> ids;
    for (const auto& p : predicates) {
        bool hit = false;
        for (const auto& t : kb.trends()) {
            if (matches(t, p)) {
                hit = true;
                ids.insert(t.id);
            }
        }
        if (hit)
            ++report.matched;
        else
            report.unmatched_tokens.push_back(predicate_token(p));
    }
    report.matched_ids.assign(ids.begin(), ids.end());
    report.low_coverage = report.matched == 0;
    return report;
}

std::vector<TrendPredicate> attach_findings(const KnowledgeBase& kb, std::vector<TrendPredicate> predicates) {
    for (auto& p : predicates) {
        p.source_finding_id.reset();
        for (const auto& t : kb.trends()) {
            if (matches(t, p)) {
                p.source_finding_id = t.id;
                break;
            }
        }
    }
    return predicates;
}

}  // namespace cotc
