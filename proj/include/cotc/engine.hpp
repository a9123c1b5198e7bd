#pragma once
// Consultation loop: score, pick gaps, ask, parse, re-score, stop.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cotc/kb.hpp"
#include "cotc/scorer.hpp"
#include "cotc/types.hpp"

namespace cotc {

struct QuestionTemplates {
    std::string symptom = "Do you have {name}?";
    std::string trend = "Has {signal} shown {direction} change?";
};

struct ConsultationConfig {
    ScoringParams scoring;
    PsiConfig psi;
    std::size_t r_max = 6;
    double tau_h = 0.2;
    bool tau_h_auto = false;  // must be resolved to a number before a session starts
    std::size_t arity_cap = 3;
    QuestionTemplates templates;

    void validate() const;  // throws ValidationError
};

json to_json(const ConsultationConfig& c);
ConsultationConfig consultation_config_from_json(const json& j);  // unknown keys rejected

enum class AnswerValue { yes, no, unknown };
std::string_view to_string(AnswerValue v);
AnswerValue parse_answer_value(std::string_view s);

struct Question {
    std::vector<Gap> gaps;
    std::string text;
    std::string template_text;  // deterministic rendering, before any paraphrase
};

json to_json(const Question& q);

enum class TerminalKind { mass_gate, entropy_band, rounds_exhausted, no_gaps, low_kb_coverage };
std::string_view to_string(TerminalKind k);

struct TerminalReason {
    TerminalKind reason = TerminalKind::no_gaps;
    bool uncertainty_flag = false;
    bool operator==(const TerminalReason&) const = default;
};

struct GapAnswer {
    FindingId finding;
    AnswerValue value = AnswerValue::unknown;
    std::optional<SeverityLevel> severity;
};

// Either a per-gap structured reply or free text.
struct Answer {
    std::vector<GapAnswer> structured;
    std::optional<std::string> text;

    static Answer free_text(std::string s) { return Answer{{}, std::move(s)}; }
};

json to_json(const Answer& a);
Answer answer_from_json(const json& j);

struct EvidenceDelta {
    std::set<FindingId> positive;
    std::set<FindingId> negative;
    std::set<FindingId> unresolved;
    std::map<FindingId, SeverityLevel> severity;
    bool operator==(const EvidenceDelta&) const = default;
};

json to_json(const EvidenceDelta& d);

// Raised when an answer cannot be applied to the pending question. `stale`
// marks answers that reference findings already settled in earlier rounds.
class AnswerRejected : public ValidationError {
public:
    AnswerRejected(const std::string& what, bool stale) : ValidationError(what), stale_(stale) {}
    bool stale() const { return stale_; }

private:
    bool stale_;
};

// Raised when stepping a session that has already terminated.
class SessionTerminated : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct RoundRecord {
    std::size_t round = 0;
    Question question;
    Answer answer;
    EvidenceDelta delta;
    RankedCandidates ranking;   // after applying the answer
    std::vector<Gap> gap_queue;  // full queue after the answer
};

struct ConsultationState {
    std::size_t round = 0;
    EvidenceSet initial_evidence;  // after attaching matched trend findings
    EvidenceSet evidence;
    std::vector<TrendPredicate> predicates;
    std::set<Estimand> emitted;
    CoverageReport coverage;
    std::set<DiseaseId> candidates;
    RankedCandidates initial_ranking;
    std::vector<Gap> initial_gap_queue;
    RankedCandidates ranked;
    std::vector<Gap> gap_queue;  // already excludes asked findings
    std::set<FindingId> asked;
    std::optional<Question> pending_question;
    std::vector<RoundRecord> log;
    std::optional<TerminalReason> terminal;
};

// Optional rewrite of question text. Gap list and answer schema stay fixed.
class ParaphraseProvider {
public:
    virtual ~ParaphraseProvider() = default;
    virtual std::string paraphrase(const Question& q) = 0;
};

// Diseases touched by the evidence after matched trend ids are attached.
ConsultationState start_session(const KnowledgeBase& kb, const EvidenceSet& evidence,
                                const std::vector<TrendPredicate>& predicates, const ConsultationConfig& config,
                                ParaphraseProvider* paraphrase = nullptr);

std::optional<TerminalReason> stopping_check(const ConsultationState& state, const ConsultationConfig& config);

// First arity_cap gaps of the queue, skipping anything already asked.
std::vector<Gap> top_gaps(const ConsultationState& state, const ConsultationConfig& config);

Question render_question(const KnowledgeBase& kb, const std::vector<Gap>& gaps, const ConsultationConfig& config,
                         ParaphraseProvider* paraphrase = nullptr);

// Throws AnswerRejected when nothing in the answer addresses a pending gap.
EvidenceDelta parse_answer(const KnowledgeBase& kb, const Question& question, const Answer& answer,
                           const EvidenceSet& evidence = {});

// Throws SessionTerminated on a terminal state and AnswerRejected on an
// unusable answer; the input state is left untouched either way.
ConsultationState step(const KnowledgeBase& kb, const ConsultationState& state, const Answer& answer,
                       const ConsultationConfig& config, ParaphraseProvider* paraphrase = nullptr);

// Ranked disease ids, survivors first.
std::vector<DiseaseId> ranked_ids(const ConsultationState& state);

// Audit trail: one record per round plus the round-0 snapshot.
json export_trace(const ConsultationState& state);
json to_json(const ConsultationState& state);  // compact status view

}  // namespace cotc
