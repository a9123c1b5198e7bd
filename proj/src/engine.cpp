#include "cotc/engine.hpp"

#include <algorithm>
#include <cmath>

#include "cotc/text.hpp"

namespace cotc {

// ---- config ---------------------------------------------------------------

void ConsultationConfig::validate() const {
    scoring.validate();
    psi.validate();
    if (r_max < 1) throw ValidationError("r_max must be >= 1");
    if (arity_cap < 1) throw ValidationError("arity_cap must be >= 1");
    if (!tau_h_auto && !(tau_h >= 0.0 && std::isfinite(tau_h))) throw ValidationError("tau_h must be >= 0");
}

json to_json(const ConsultationConfig& c) {
    return {{"gamma", c.scoring.gamma},
            {"energy_gate", c.scoring.energy_gate},
            {"mass_gate", c.scoring.mass_gate},
            {"top_k", c.scoring.top_k},
            {"penalty_clamp_eps", c.scoring.penalty_clamp_eps},
            {"psi", {{"base", c.psi.base}, {"pathognomonic", c.psi.pathognomonic}, {"tsa", c.psi.tsa}}},
            {"r_max", c.r_max},
            {"tau_h", c.tau_h_auto ? json("auto") : json(c.tau_h)},
            {"arity_cap", c.arity_cap},
            {"templates", {{"symptom", c.templates.symptom}, {"trend", c.templates.trend}}}};
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
            throw ValidationError("unknown key '" + k + "' in " + where);
    }
}

}  // namespace

ConsultationConfig consultation_config_from_json(const json& j) {
    reject_unknown(j,
                   {"gamma", "energy_gate", "mass_gate", "top_k", "penalty_clamp_eps", "psi", "r_max", "tau_h",
                    "arity_cap", "templates"},
                   "consultation config");
    ConsultationConfig c;
    try {
        c.scoring.gamma = j.value("gamma", c.scoring.gamma);
        c.scoring.energy_gate = j.value("energy_gate", c.scoring.energy_gate);
        c.scoring.mass_gate = j.value("mass_gate", c.scoring.mass_gate);
        c.scoring.top_k = j.value("top_k", c.scoring.top_k);
        c.scoring.penalty_clamp_eps = j.value("penalty_clamp_eps", c.scoring.penalty_clamp_eps);
        if (j.contains("psi")) {
            const auto& p = j.at("psi");
            reject_unknown(p, {"base", "pathognomonic", "tsa"}, "consultation.psi");
            c.psi.base = p.value("base", c.psi.base);
            c.psi.pathognomonic = p.value("pathognomonic", c.psi.pathognomonic);
            c.psi.tsa = p.value("tsa", c.psi.tsa);
        }
        c.r_max = j.value("r_max", c.r_max);
        if (j.contains("tau_h")) {
            const auto& t = j.at("tau_h");
            if (t.is_string()) {
                if (t.get<std::string>() != "auto") throw ValidationError("tau_h must be a number or \"auto\"");
                c.tau_h_auto = true;
            } else {
                c.tau_h = t.get<double>();
            }
        }
        c.arity_cap = j.value("arity_cap", c.arity_cap);
        if (j.contains("templates")) {
            const auto& t = j.at("templates");
            reject_unknown(t, {"symptom", "trend"}, "consultation.templates");
            c.templates.symptom = t.value("symptom", c.templates.symptom);
            c.templates.trend = t.value("trend", c.templates.trend);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("consultation config: ") + e.what());
    }
    c.validate();
    return c;
}

// ---- small enums ----------------------------------------------------------

std::string_view to_string(AnswerValue v) {
    switch (v) {
        case AnswerValue::yes: return "yes";
        case AnswerValue::no: return "no";
        case AnswerValue::unknown: return "unknown";
    }
    return "unknown";
}

AnswerValue parse_answer_value(std::string_view s) {
    if (s == "yes") return AnswerValue::yes;
    if (s == "no") return AnswerValue::no;
    if (s == "unknown") return AnswerValue::unknown;
    throw ValidationError("answer value must be yes, no or unknown");
}

std::string_view to_string(TerminalKind k) {
    switch (k) {
        case TerminalKind::mass_gate: return "mass_gate";
        case TerminalKind::entropy_band: return "entropy_band";
        case TerminalKind::rounds_exhausted: return "rounds_exhausted";
        case TerminalKind::no_gaps: return "no_gaps";
        case TerminalKind::low_kb_coverage: return "low_kb_coverage";
    }
    return "no_gaps";
}

json to_json(const Question& q) {
    json gaps = json::array();
    for (const auto& g : q.gaps) gaps.push_back(to_json(g));
    return {{"text", q.text}, {"template_text", q.template_text}, {"gaps", gaps}, {"schema", {"yes", "no", "unknown"}}};
}

json to_json(const Answer& a) {
    if (!a.structured.empty()) {
        json arr = json::array();
        for (const auto& g : a.structured) {
            json item{{"gap_id", g.finding}, {"value", to_string(g.value)}};
            if (g.severity) item["severity"] = to_string(*g.severity);
            arr.push_back(item);
        }
        return {{"answers", arr}};
    }
    return {{"text", a.text.value_or("")}};
}

Answer answer_from_json(const json& j) {
    reject_unknown(j, {"answers", "text", "round"}, "answer");
    Answer a;
    try {
        if (j.contains("answers")) {
            for (const auto& item : j.at("answers")) {
                reject_unknown(item, {"gap_id", "value", "severity"}, "answer item");
                GapAnswer g;
                g.finding = item.at("gap_id").get<std::string>();
                g.value = parse_answer_value(item.at("value").get<std::string>());
                if (item.contains("severity")) {
                    const auto s = parse_severity(item.at("severity").get<std::string>());
                    if (!s) throw ValidationError("unknown severity in answer");
                    g.severity = *s;
                }
                a.structured.push_back(std::move(g));
            }
        }
        if (j.contains("text")) a.text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("answer: ") + e.what());
    }
    if (a.structured.empty() && !a.text) throw ValidationError("answer needs \"answers\" or \"text\"");
    return a;
}

json to_json(const EvidenceDelta& d) {
    json sev = json::object();
    for (const auto& [id, s] : d.severity) sev[id] = to_string(s);
    return {{"positive", d.positive}, {"negative", d.negative}, {"unresolved", d.unresolved}, {"severity", sev}};
}

// ---- scoring round --------------------------------------------------------

namespace {

json gaps_json(const std::vector<Gap>& gaps) {
    json arr = json::array();
    for (const auto& g : gaps) arr.push_back(to_json(g));
    return arr;
}

// Recomputes candidates, ranking and gap queue from the current evidence.
void refresh(const KnowledgeBase& kb, ConsultationState& s, const ConsultationConfig& config) {
    s.candidates = candidate_set(kb, s.evidence);
    s.gap_queue.clear();
    if (s.candidates.empty()) {
        s.ranked = RankedCandidates{};
        return;
    }
    const auto energies = score_energies(kb, kb.idf(), s.evidence, s.candidates, config.scoring);
    s.ranked = rank_candidates(energies, config.scoring);
    if (s.ranked.empty()) return;
    for (auto& g : gap_priority(kb, s.ranked, s.evidence, config.psi, config.scoring.top_k, s.emitted)) {
        if (!s.asked.count(g.finding)) s.gap_queue.push_back(std::move(g));
    }
}

// Sets terminal or the next pending question.
void advance(const KnowledgeBase& kb, ConsultationState& s, const ConsultationConfig& config,
             ParaphraseProvider* paraphrase) {
    s.pending_question.reset();
    if (auto stop = stopping_check(s, config)) {
        s.terminal = stop;
        return;
    }
    s.pending_question = render_question(kb, top_gaps(s, config), config, paraphrase);
}

std::string replace_all(std::string s, const std::string& key, const std::string& value) {
    for (std::size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos + value.size()))
        s.replace(pos, key.size(), value);
    return s;
}

}  // namespace

ConsultationState start_session(const KnowledgeBase& kb, const EvidenceSet& evidence,
                                const std::vector<TrendPredicate>& predicates, const ConsultationConfig& config,
                                ParaphraseProvider* paraphrase) {
    config.validate();
    if (config.tau_h_auto) throw ValidationError("tau_h is \"auto\"; calibrate it before starting a session");
    evidence.validate();
    (void)candidate_set(kb, evidence);  // id resolution

    ConsultationState s;
    s.predicates = attach_findings(kb, predicates);
    for (const auto& p : s.predicates) s.emitted.insert(p.estimand);
    s.coverage = coverage_check(kb, s.predicates);
    s.evidence = evidence;
    for (const auto& id : s.coverage.matched_ids) {
        if (!s.evidence.contains(id)) s.evidence.positive.insert(id);
    }
    s.initial_evidence = s.evidence;

    refresh(kb, s, config);
    s.initial_ranking = s.ranked;
    s.initial_gap_queue = s.gap_queue;
    advance(kb, s, config, paraphrase);
    return s;
}

std::optional<TerminalReason> stopping_check(const ConsultationState& state, const ConsultationConfig& config) {
    if (state.terminal) return state.terminal;
    const double top = state.ranked.top_mass();
    const bool uncertain = top < config.scoring.mass_gate;
    if (state.ranked.empty()) return TerminalReason{TerminalKind::low_kb_coverage, true};
    if (top >= config.scoring.mass_gate) return TerminalReason{TerminalKind::mass_gate, false};
    if (state.ranked.entropy < config.tau_h) return TerminalReason{TerminalKind::entropy_band, uncertain};
    if (state.round >= config.r_max) return TerminalReason{TerminalKind::rounds_exhausted, uncertain};
    if (top_gaps(state, config).empty()) return TerminalReason{TerminalKind::no_gaps, uncertain};
    return std::nullopt;
}

std::vector<Gap> top_gaps(const ConsultationState& state, const ConsultationConfig& config) {
    std::vector<Gap> out;
    for (const auto& g : state.gap_queue) {
        if (out.size() == config.arity_cap) break;
        if (state.asked.count(g.finding) || state.evidence.contains(g.finding)) continue;
        out.push_back(g);
    }
    return out;
}

Question render_question(const KnowledgeBase& kb, const std::vector<Gap>& gaps, const ConsultationConfig& config,
                         ParaphraseProvider* paraphrase) {
    if (gaps.empty() || gaps.size() > config.arity_cap)
        throw ValidationError("a question carries between 1 and arity_cap gaps");
    Question q;
    q.gaps = gaps;
    std::string text;
    for (const auto& g : gaps) {
        std::string clause;
        if (const auto* sym = kb.find_symptom(g.finding)) {
            if (config.templates.symptom.empty()) throw ValidationError("missing question template for symptoms");
            clause = replace_all(config.templates.symptom, "{name}", sym->name);
        } else if (const auto* trend = kb.find_trend(g.finding)) {
            if (config.templates.trend.empty()) throw ValidationError("missing question template for trends");
            const std::string signal = trend->signal.empty() ? kb.finding_name(trend->id) : kb.signal_name(trend->signal);
            const char* dir = trend->direction == Direction::up     ? "upward"
                              : trend->direction == Direction::down ? "downward"
                                                                    : "no";
            clause = replace_all(replace_all(config.templates.trend, "{signal}", signal), "{direction}", dir);
            clause = replace_all(clause, "{name}", kb.finding_name(trend->id));
        } else {
            throw ValidationError("gap finding '" + g.finding + "' is not in the knowledge base");
        }
        if (!text.empty()) text += ' ';
        text += clause;
    }
    q.template_text = text;
    q.text = text;
    if (paraphrase != nullptr) {
        std::string rewritten = paraphrase->paraphrase(q);
        if (!rewritten.empty()) q.text = std::move(rewritten);
    }
    return q;
}

// ---- answer parsing -------------------------------------------------------

namespace {

const std::vector<std::string> kYes{"yes", "y", "yeah", "yep", "correct", "true", "i do"};
const std::vector<std::string> kNo{"no", "n", "nope", "never", "none", "false", "i dont"};
const std::vector<std::string> kUnknown{"unknown", "unsure", "not sure", "dont know", "i dont know", "idk", "dunno",
                                        "no idea"};
const std::set<std::string> kNegation{"no",   "not",    "never",  "without", "deny",   "denies", "denied", "dont",
                                      "didnt", "havent", "hasnt", "isnt",    "cannot", "cant",   "nor",    "neither"};

bool bare_match(const std::vector<std::string>& tokens, const std::vector<std::string>& options) {
    for (const auto& o : options)
        if (text::words(o) == tokens) return true;
    return false;
}

std::vector<std::vector<std::string>> phrases_for(const KnowledgeBase& kb, const FindingId& id) {
    std::vector<std::vector<std::string>> out;
    auto add = [&](const std::string& s) {
        auto w = text::words(s);
        if (!w.empty()) out.push_back(std::move(w));
    };
    if (const auto* s = kb.find_symptom(id)) {
        add(s->name);
        for (const auto& syn : s->synonyms) add(syn);
    } else if (const auto* t = kb.find_trend(id)) {
        add(t->description);
    }
    add(id);
    return out;
}

}  // namespace

EvidenceDelta parse_answer(const KnowledgeBase& kb, const Question& question, const Answer& answer,
                           const EvidenceSet& evidence) {
    EvidenceDelta delta;
    std::set<FindingId> pending;
    for (const auto& g : question.gaps) pending.insert(g.finding);

    auto assign = [&](const FindingId& id, AnswerValue v, std::optional<SeverityLevel> sev) {
        switch (v) {
            case AnswerValue::yes:
                delta.positive.insert(id);
                if (sev) delta.severity[id] = *sev;
                break;
            case AnswerValue::no: delta.negative.insert(id); break;
            case AnswerValue::unknown: delta.unresolved.insert(id); break;
        }
    };

    if (!answer.structured.empty()) {
        std::set<FindingId> seen;
        for (const auto& g : answer.structured) {
            if (!pending.count(g.finding)) {
                const bool stale = evidence.contains(g.finding);
                throw AnswerRejected("answer references finding '" + g.finding + "' which is not pending", stale);
            }
            if (!seen.insert(g.finding).second) throw AnswerRejected("finding '" + g.finding + "' answered twice", false);
            if (g.severity && g.value != AnswerValue::yes)
                throw AnswerRejected("severity only applies to a yes answer", false);
            assign(g.finding, g.value, g.severity);
        }
        for (const auto& id : pending)
            if (!seen.count(id)) delta.unresolved.insert(id);
        return delta;
    }

    if (!answer.text) throw AnswerRejected("empty answer", false);
    const auto toks = text::tokenize(*answer.text);
    std::vector<std::string> words;
    for (const auto& t : toks) words.push_back(t.word);
    if (words.empty()) throw AnswerRejected("empty answer", false);

    std::optional<AnswerValue> bare;
    if (bare_match(words, kYes)) bare = AnswerValue::yes;
    else if (bare_match(words, kNo)) bare = AnswerValue::no;
    else if (bare_match(words, kUnknown)) bare = AnswerValue::unknown;
    if (bare) {
        for (const auto& id : pending) assign(id, *bare, std::nullopt);
        return delta;
    }

    bool any = false;
    for (const auto& id : pending) {
        std::size_t best = std::string::npos;
        for (const auto& phrase : phrases_for(kb, id)) best = std::min(best, text::find_phrase(words, phrase));
        if (best == std::string::npos) {
            delta.unresolved.insert(id);
            continue;
        }
        any = true;
        bool negated = false;
        std::optional<SeverityLevel> sev;
        // look back up to three tokens, stopping at a clause boundary
        for (std::size_t k = 1; k <= 3 && best >= k; ++k) {
            if (toks[best - k + 1].clause_start) break;
            const auto& w = words[best - k];
            if (kNegation.count(w)) negated = true;
            if (!sev) {
                if (auto s = parse_severity(w); s && *s != SeverityLevel::None) sev = s;
            }
        }
        assign(id, negated ? AnswerValue::no : AnswerValue::yes, negated ? std::nullopt : sev);
    }
    if (!any) throw AnswerRejected("answer does not address any pending finding", false);
    return delta;
}

// ---- step -----------------------------------------------------------------

ConsultationState step(const KnowledgeBase& kb, const ConsultationState& state, const Answer& answer,
                       const ConsultationConfig& config, ParaphraseProvider* paraphrase) {
    if (state.terminal) throw SessionTerminated("session already terminated");
    if (!state.pending_question) throw SessionTerminated("session has no pending question");
    const Question& q = *state.pending_question;
    const EvidenceDelta delta = parse_answer(kb, q, answer, state.evidence);

    ConsultationState next = state;
    next.evidence.positive.insert(delta.positive.begin(), delta.positive.end());
    next.evidence.negative.insert(delta.negative.begin(), delta.negative.end());
    next.evidence.asked_unresolved.insert(delta.unresolved.begin(), delta.unresolved.end());
    for (const auto& [id, s] : delta.severity) next.evidence.severity[id] = s;
    next.evidence.validate();
    for (const auto& g : q.gaps) next.asked.insert(g.finding);
    ++next.round;

    refresh(kb, next, config);
    next.log.push_back({next.round, q, answer, delta, next.ranked, next.gap_queue});
    advance(kb, next, config, paraphrase);
    return next;
}

std::vector<DiseaseId> ranked_ids(const ConsultationState& state) {
    std::vector<DiseaseId> out;
    for (const auto& e : state.ranked.entries)
        if (e.survivor) out.push_back(e.id);
    return out;
}

json export_trace(const ConsultationState& state) {
    json preds = json::array();
    for (const auto& p : state.predicates) preds.push_back(to_json(p));
    json rounds = json::array();
    for (const auto& r : state.log) {
        rounds.push_back({{"round", r.round},
                          {"question", to_json(r.question)},
                          {"answer", to_json(r.answer)},
                          {"delta", to_json(r.delta)},
                          {"ranking", to_json(r.ranking)},
                          {"gap_queue", gaps_json(r.gap_queue)}});
    }
    json terminal = nullptr;
    if (state.terminal)
        terminal = {{"reason", to_string(state.terminal->reason)}, {"uncertainty_flag", state.terminal->uncertainty_flag}};
    return {{"schema", "cotc-trace/1"},
            {"initial_evidence", to_json(state.initial_evidence)},
            {"predicates", preds},
            {"coverage",
             {{"matched", state.coverage.matched},
              {"matched_ids", state.coverage.matched_ids},
              {"unmatched_tokens", state.coverage.unmatched_tokens}}},
            {"round0", {{"ranking", to_json(state.initial_ranking)}, {"gap_queue", gaps_json(state.initial_gap_queue)}}},
            {"rounds", rounds},
            {"terminal", terminal},
            {"final_evidence", to_json(state.evidence)}};
}

json to_json(const ConsultationState& state) {
    json out{{"round", state.round}, {"ranking", to_json(state.ranked)}, {"evidence", to_json(state.evidence)}};
    out["pending_question"] = state.pending_question ? to_json(*state.pending_question) : json(nullptr);
    if (state.terminal)
        out["terminal"] = {{"reason", to_string(state.terminal->reason)},
                           {"uncertainty_flag", state.terminal->uncertainty_flag}};
    else
        out["terminal"] = nullptr;
    return out;
}

}  // namespace cotc
