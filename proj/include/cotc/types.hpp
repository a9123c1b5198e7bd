#pragma once
// Shared vocabulary: findings, trend predicates and patient evidence.

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotc {

using json = nlohmann::json;
using FindingId = std::string;
using DiseaseId = std::string;

// Raised for malformed inputs: schema violations, out-of-range parameters,
// unresolvable ids. The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure that could not be recovered (e.g. factorization).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a of `text` as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

enum class Estimand { slope, change_point_mass, smooth_residual, cohort_z };
enum class Direction { up, down, flat };
enum class QualFlag { UNSTABLE, SPARSE };

std::string_view to_string(Estimand e);
std::string_view to_string(Direction d);
std::string_view to_string(QualFlag q);
Estimand parse_estimand(std::string_view s);    // throws ValidationError
Direction parse_direction(std::string_view s);  // throws ValidationError
QualFlag parse_qual_flag(std::string_view s);   // throws ValidationError

// Ordinal severity scale used by symptom timelines.
enum class SeverityLevel : int {
    None = 0,
    Minor = 1,
    Mild = 2,
    Moderate = 3,
    Medium = 4,
    Severe = 5,
    Extreme = 6,
    Critical = 7,
};

std::string_view to_string(SeverityLevel s);
std::optional<SeverityLevel> parse_severity(std::string_view s);  // case-insensitive
inline int ordinal(SeverityLevel s) { return static_cast<int>(s); }
SeverityLevel severity_from_ordinal(int v);  // throws ValidationError outside 0..7

// Typed output of the statistics layer. `signal` names the series the
// predicate was computed on (symptom or indicator id); it is what KB trend
// frames are matched against together with (estimand, direction).
struct TrendPredicate {
    std::pair<double, double> span{0.0, 0.0};
    Estimand estimand = Estimand::slope;
    double value = 0.0;
    std::set<QualFlag> qual;
    Direction direction = Direction::flat;
    std::optional<FindingId> source_finding_id;
    std::string signal;

    bool has(QualFlag f) const { return qual.count(f) != 0; }
    bool operator==(const TrendPredicate&) const = default;
};

json to_json(const TrendPredicate& p);
TrendPredicate predicate_from_json(const json& j);  // throws ValidationError

// A patient's findings. Denied and asked-but-unresolved findings are kept
// apart from positives; the three sets are pairwise disjoint.
struct EvidenceSet {
    std::set<FindingId> positive;
    std::set<FindingId> negative;
    std::set<FindingId> asked_unresolved;
    std::map<FindingId, SeverityLevel> severity;  // optional, positives only

    bool contains(const FindingId& id) const {
        return positive.count(id) || negative.count(id) || asked_unresolved.count(id);
    }
    std::size_t size() const { return positive.size() + negative.size() + asked_unresolved.size(); }
    void validate() const;  // disjointness; throws ValidationError
    bool operator==(const EvidenceSet&) const = default;
};

json to_json(const EvidenceSet& e);
EvidenceSet evidence_from_json(const json& j);

}  // namespace cotc
