#pragma once
// Query -> intent -> plan -> executed plan record -> trend predicates.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cotc/tsa.hpp"
#include "cotc/types.hpp"

namespace cotc::router {

enum class Bucket { change_point, population_norm, smooth_trajectory, trend_test };

std::string_view to_string(Bucket b);
Bucket parse_bucket(std::string_view s);

struct Intent {
    Bucket bucket = Bucket::trend_test;
    std::string raw_query;
    std::vector<std::string> matched_keywords;
};

// Phrases per bucket, checked in the order change_point, population_norm,
// smooth_trajectory. Matching is case-insensitive on whole tokens.
struct KeywordRules {
    std::vector<std::string> change_point{"abrupt", "breakpoint", "sudden", "worsening-spike",
                                          "changepoint", "change point", "change-point", "step change"};
    std::vector<std::string> population_norm{"population norm", "cohort", "compare to normal", "reference range",
                                             "z-score"};
    std::vector<std::string> smooth_trajectory{"smooth", "trajectory", "gradual"};
};

struct GpSettings {
    double lengthscale = 0.0;  // 0: a quarter of the series span
    double signal_var = 0.0;   // 0: sample variance of the series (1 if constant)
    double noise_var = 0.0;    // 0: a tenth of the signal variance
};

struct RouterConfig {
    KeywordRules keywords;
    double slope_epsilon = 1e-3;  // |slope| below this (levels/day) is flat
    std::size_t budget = 2;
    std::size_t impute_k = 5;
    double gap_factor = 3.0;
    double lambda_max = 1e8;
    GpSettings gp;
    std::uint64_t seed = 0;
};

json to_json(const RouterConfig& c);
RouterConfig router_config_from_json(const json& j);  // unknown keys rejected

// Throws ValidationError on an empty (or all-whitespace) query.
Intent parse_intent(const std::string& query, const KeywordRules& rules = {});

struct SeriesMeta {
    std::size_t n_points = 0;  // per patient minimum for panels
    bool has_cohort_stats = false;
    bool has_gaps = false;
};

struct PlanStep {
    std::string estimator;
    json params = json::object();
    bool operator==(const PlanStep&) const = default;
};

struct AnalysisPlan {
    std::vector<PlanStep> steps;  // may start with an impute_stacks pre-step
    std::vector<std::string> fallback{"mann_kendall_piecewise", "simple_slope"};
    std::size_t budget = 2;
    bool operator==(const AnalysisPlan&) const = default;

    // First non-preprocessing step.
    const PlanStep& head() const;
};

json to_json(const AnalysisPlan& p);
AnalysisPlan plan_from_json(const json& j);

// Estimators known to the registry, and ones named by the method space but
// not implemented here (plans that reference them are rejected).
std::vector<std::string> registered_estimators();
std::vector<std::string> unavailable_estimators();
bool estimator_available(const std::string& id);

// Schema check: non-empty steps, only registered estimators, budget >= 1,
// fallback chain ending in simple_slope. Throws ValidationError.
void validate_plan(const AnalysisPlan& plan);

AnalysisPlan select_plan(const Intent& intent, const SeriesMeta& meta, const RouterConfig& config = {});

// External plan source. Whatever it returns is validated before use.
class Planner {
public:
    virtual ~Planner() = default;
    virtual std::optional<AnalysisPlan> plan(const Intent& intent, const SeriesMeta& meta) = 0;
};

using SeriesData = std::variant<tsa::TimeSeries, tsa::Panel>;

struct ExecutionContext {
    std::string signal;  // series id stamped on predicates
    std::optional<tsa::CohortStats> cohort;
};

SeriesMeta describe(const SeriesData& data, const ExecutionContext& ctx, const RouterConfig& config = {});

struct LogEntry {
    std::string step;  // "pre", "head", "post" or "fallback"
    std::string estimator;
    std::size_t attempt = 0;
    bool ok = false;
    std::string message;
};

// Record of the executed plan.
struct ExecutionLog {
    std::string plan_source = "rules";  // or "external"
    AnalysisPlan plan;
    std::vector<LogEntry> entries;
    std::size_t downgrades = 0;
    json details = json::object();  // estimator outputs worth auditing (e.g. change-point mode)
};

json to_json(const ExecutionLog& log);

struct RouterResult {
    Intent intent;
    std::vector<TrendPredicate> predicates;
    ExecutionLog log;
};

std::vector<TrendPredicate> execute_plan(const AnalysisPlan& plan, const SeriesData& data, const ExecutionContext& ctx,
                                         const RouterConfig& config, ExecutionLog& log);

// parse_intent -> select_plan (or validated external plan) -> execute_plan.
RouterResult run_query(const std::string& query, const SeriesData& data, const ExecutionContext& ctx,
                       const RouterConfig& config = {}, Planner* planner = nullptr);

}  // namespace cotc::router
