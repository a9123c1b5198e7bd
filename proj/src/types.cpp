#include "cotc/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>

namespace cotc {

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr std::array<std::string_view, 8> kSeverityNames = {
    "None", "Minor", "Mild", "Moderate", "Medium", "Severe", "Extreme", "Critical"};

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

std::string_view to_string(Estimand e) {
    switch (e) {
        case Estimand::slope: return "slope";
        case Estimand::change_point_mass: return "change_point_mass";
        case Estimand::smooth_residual: return "smooth_residual";
        case Estimand::cohort_z: return "cohort_z";
    }
    return "slope";
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::up: return "up";
        case Direction::down: return "down";
        case Direction::flat: return "flat";
    }
    return "flat";
}

std::string_view to_string(QualFlag q) {
    return q == QualFlag::UNSTABLE ? "UNSTABLE" : "SPARSE";
}

Estimand parse_estimand(std::string_view s) {
    if (s == "slope") return Estimand::slope;
    if (s == "change_point_mass") return Estimand::change_point_mass;
    if (s == "smooth_residual") return Estimand::smooth_residual;
    if (s == "cohort_z") return Estimand::cohort_z;
    throw ValidationError("unknown estimand '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
    if (s == "up") return Direction::up;
    if (s == "down") return Direction::down;
    if (s == "flat") return Direction::flat;
    throw ValidationError("unknown direction '" + std::string(s) + "'");
}

QualFlag parse_qual_flag(std::string_view s) {
    if (s == "UNSTABLE") return QualFlag::UNSTABLE;
    if (s == "SPARSE") return QualFlag::SPARSE;
    throw ValidationError("unknown quality flag '" + std::string(s) + "'");
}

std::string_view to_string(SeverityLevel s) { return kSeverityNames.at(static_cast<std::size_t>(ordinal(s))); }

std::optional<SeverityLevel> parse_severity(std::string_view s) {
    const std::string key = lower(s);
    for (std::size_t i = 0; i < kSeverityNames.size(); ++i) {
        if (lower(kSeverityNames[i]) == key) return static_cast<SeverityLevel>(i);
    }
    return std::nullopt;
}

SeverityLevel severity_from_ordinal(int v) {
    if (v < 0 || v > 7) throw ValidationError("severity ordinal out of range: " + std::to_string(v));
    return static_cast<SeverityLevel>(v);
}

json to_json(const TrendPredicate& p) {
    json qual = json::array();
    for (auto q : p.qual) qual.push_back(std::string(to_string(q)));
    json j = {
        {"span", {p.span.first, p.span.second}},
        {"estimand", std::string(to_string(p.estimand))},
        {"value", p.value},
        {"qual", qual},
        {"direction", std::string(to_string(p.direction))},
        {"source_finding_id", p.source_finding_id ? json(*p.source_finding_id) : json(nullptr)},
    };
    if (!p.signal.empty()) j["signal"] = p.signal;
    return j;
}

TrendPredicate predicate_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("predicate must be a JSON object");
    static const std::set<std::string> allowed = {"span",      "estimand",          "value", "qual",
                                                  "direction", "source_finding_id", "signal"};
    for (const auto& [k, _] : j.items()) {
        if (!allowed.count(k)) throw ValidationError("predicate: unknown field '" + k + "'");
    }
    TrendPredicate p;
    try {
        const auto& span = j.at("span");
        if (!span.is_array() || span.size() != 2) throw ValidationError("predicate: span must be [start, end]");
        p.span = {span[0].get<double>(), span[1].get<double>()};
        p.estimand = parse_estimand(j.at("estimand").get<std::string>());
        p.value = j.at("value").get<double>();
        for (const auto& q : j.at("qual")) p.qual.insert(parse_qual_flag(q.get<std::string>()));
        p.direction = parse_direction(j.at("direction").get<std::string>());
        if (j.contains("source_finding_id") && !j["source_finding_id"].is_null())
            p.source_finding_id = j["source_finding_id"].get<std::string>();
        if (j.contains("signal")) p.signal = j["signal"].get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("predicate: ") + e.what());
    }
    if (!std::isfinite(p.value)) throw ValidationError("predicate: value must be finite");
    return p;
}

void EvidenceSet::validate() const {
    for (const auto& id : positive) {
        if (negative.count(id) || asked_unresolved.count(id))
            throw ValidationError("finding '" + id + "' is both positive and negative/unresolved");
    }
    for (const auto& id : negative) {
        if (asked_unresolved.count(id))
            throw ValidationError("finding '" + id + "' is both negative and unresolved");
    }
    for (const auto& [id, _] : severity) {
        if (!positive.count(id)) throw ValidationError("severity attached to non-positive finding '" + id + "'");
    }
}

json to_json(const EvidenceSet& e) {
    json sev = json::object();
    for (const auto& [id, s] : e.severity) sev[id] = std::string(to_string(s));
    return {{"positive", e.positive},
            {"negative", e.negative},
            {"asked_unresolved", e.asked_unresolved},
            {"severity", sev}};
}

EvidenceSet evidence_from_json(const json& j) {
    EvidenceSet e;
    try {
        if (j.contains("positive")) e.positive = j["positive"].get<std::set<std::string>>();
        if (j.contains("negative")) e.negative = j["negative"].get<std::set<std::string>>();
        if (j.contains("asked_unresolved"))
            e.asked_unresolved = j["asked_unresolved"].get<std::set<std::string>>();
        if (j.contains("severity")) {
            for (const auto& [id, v] : j["severity"].items()) {
                auto s = parse_severity(v.get<std::string>());
                if (!s) throw ValidationError("unknown severity '" + v.get<std::string>() + "'");
                e.severity[id] = *s;
            }
        }
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("evidence: ") + ex.what());
    }
    e.validate();
    return e;
}

}  // namespace cotc
