// cotc command line: consult, benchmark, ablate, tsa, kb, serve, synth.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cotc/engine.hpp"
#include "cotc/harness.hpp"
#include "cotc/kb.hpp"
#include "cotc/router.hpp"
#include "cotc/service.hpp"

namespace fs = std::filesystem;
using namespace cotc;

namespace {

struct Common {
    std::string config;
    std::string kb;
};

service::AppConfig load_config(const Common& c) {
    std::optional<fs::path> cli;
    if (!c.config.empty()) cli = c.config;
    service::AppConfig cfg;
    if (auto path = service::resolve_config_path(cli)) {
        cfg = service::load_app_config(*path);
    }
    if (!c.kb.empty()) cfg.kb_path = c.kb;
    if (cfg.kb_path.empty()) throw ValidationError("no knowledge base: pass --kb or set kb_path in the config");
    cfg.router.seed = cfg.seed;
    return cfg;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("bad number '" + item + "' in list");
        }
    }
    return out;
}

std::vector<tsa::Point> points_from_json(const json& arr) {
    std::vector<tsa::Point> pts;
    for (const auto& p : arr) {
        const auto& t = p.at("t");
        const double tt = t.is_string() ? tsa::parse_iso8601_days(t.get<std::string>()) : t.get<double>();
        pts.push_back({tt, p.at("value").get<double>()});
    }
    return pts;
}

// {"points": [...]}, a bare array of points, or {"patients": {id: [...]}}.
router::SeriesData series_from_json(const json& j) {
    try {
        if (j.is_array()) return tsa::TimeSeries(points_from_json(j));
        if (j.contains("patients")) {
            tsa::Panel panel;
            for (const auto& [id, arr] : j.at("patients").items()) panel.patients.emplace(id, tsa::TimeSeries(points_from_json(arr)));
            if (panel.patients.empty()) throw ValidationError("panel has no patients");
            return panel;
        }
        return tsa::TimeSeries(points_from_json(j.at("points")));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("series: ") + e.what());
    }
}

std::vector<harness::PatientRecord> cohort_or_synthetic(const std::string& cohort, KnowledgeBase& kb,
                                                        bool synthetic, const service::AppConfig& cfg) {
    if (synthetic) {
        auto syn = harness::make_ambiguous_cohort(100, 10, cfg.seed);
        kb = syn.kb;
        return syn.patients;
    }
    if (cohort.empty()) throw ValidationError("pass --cohort or --synthetic");
    return harness::load_cohort(cohort);
}

void resolve_tau(harness::BenchmarkConfig& bench, const KnowledgeBase& kb,
                 const std::vector<harness::PatientRecord>& calibration) {
    if (!bench.consultation.tau_h_auto) return;
    bench.consultation.tau_h = harness::calibrate_tau_h(kb, calibration, bench);
    bench.consultation.tau_h_auto = false;
    std::cerr << "tau_h calibrated to " << bench.consultation.tau_h << "\n";
}

void print_state(const KnowledgeBase& kb, const ConsultationState& s) {
    std::cout << "round " << s.round << "  H=" << s.ranked.entropy << "\n";
    std::size_t shown = 0;
    for (const auto& e : s.ranked.entries) {
        if (!e.survivor || shown == 5) break;
        const auto* d = kb.find_disease(e.id);
        std::printf("  %-24s %6.3f\n", d ? d->name.c_str() : e.id.c_str(), e.mass);
        ++shown;
    }
}

int run_consult(const Common& common, const std::string& patient, bool interactive, const std::string& trace_out) {
    const auto cfg = load_config(common);
    const auto kb = load_kb(cfg.kb_path);
    const auto record = harness::load_record(patient);
    auto bench = service::benchmark_config(cfg);
    if (bench.consultation.tau_h_auto) throw ValidationError("consult needs a numeric tau_h");

    ConsultationState state;
    if (!interactive) {
        state = harness::run_session(kb, record, bench);
    } else {
        state = start_session(kb, harness::initial_evidence(record), harness::record_predicates(record, bench),
                              bench.consultation);
        while (!state.terminal) {
            print_state(kb, state);
            std::cout << "Q: " << state.pending_question->text << "\n> " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line)) break;
            try {
                state = step(kb, state, Answer::free_text(line), bench.consultation);
            } catch (const AnswerRejected& e) {
                std::cout << "(" << e.what() << ")\n";
            }
        }
        print_state(kb, state);
        if (state.terminal)
            std::cout << "stopped: " << to_string(state.terminal->reason)
                      << (state.terminal->uncertainty_flag ? " (uncertain)" : "") << "\n";
    }
    const auto trace = export_trace(state);
    if (!trace_out.empty())
        write_file(trace_out, trace.dump(2) + "\n");
    else if (!interactive)
        std::cout << trace.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cotc: trend-aware consultation engine"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "application config (COTC_CONFIG overrides)");
    app.add_option("--kb", common.kb, "knowledge base JSON (overrides kb_path)");

    auto* consult = app.add_subcommand("consult", "run one consultation");
    std::string patient, trace_out;
    bool interactive = false;
    consult->add_option("--patient", patient, "patient record JSON")->required();
    consult->add_flag("--interactive", interactive, "answer questions on stdin");
    consult->add_option("--trace-out", trace_out, "write the audit trail here");

    auto* bench = app.add_subcommand("benchmark", "run a cohort benchmark");
    std::string cohort, out, csv, calibration;
    bool synthetic = false, traces = false;
    bench->add_option("--cohort", cohort, "directory or file of patient records");
    bench->add_flag("--synthetic", synthetic, "use the generated ambiguous cohort and its KB");
    bench->add_option("--out", out, "report JSON path");
    bench->add_option("--csv", csv, "per-round accuracy CSV path");
    bench->add_option("--calibration-cohort", calibration, "cohort used when tau_h is \"auto\"");
    bench->add_flag("--traces", traces, "embed per-patient traces in the report");

    auto* ablate = app.add_subcommand("ablate", "KB edge ablation sweep");
    std::string fractions = "0.25,0.5,0.75,1.0", seeds = "1,2,3,4,5", subset = "longitudinal";
    ablate->add_option("--cohort", cohort, "directory or file of patient records");
    ablate->add_flag("--synthetic", synthetic, "use the generated ambiguous cohort and its KB");
    ablate->add_option("--fractions", fractions, "comma-separated fractions in (0, 1]");
    ablate->add_option("--seeds", seeds, "comma-separated subsampling seeds");
    ablate->add_option("--subset", subset, "label for the subset column");
    ablate->add_option("--out", out, "JSON output path");
    ablate->add_option("--csv", csv, "CSV output path");

    auto* tsa_cmd = app.add_subcommand("tsa", "run the analysis router on one series");
    std::string series_path, query, signal;
    double cohort_mu = 0.0, cohort_sigma = 0.0;
    tsa_cmd->add_option("--series", series_path, "series JSON")->required();
    tsa_cmd->add_option("--query", query, "analysis request")->required();
    tsa_cmd->add_option("--signal", signal, "series id stamped on predicates");
    tsa_cmd->add_option("--cohort-mu", cohort_mu, "cohort mean slope for z-scores");
    tsa_cmd->add_option("--cohort-sigma", cohort_sigma, "cohort slope standard deviation");

    auto* kb_cmd = app.add_subcommand("kb", "inspect a knowledge base");
    kb_cmd->require_subcommand(1);
    auto* kb_validate = kb_cmd->add_subcommand("validate", "load and validate");
    auto* kb_idf = kb_cmd->add_subcommand("idf", "print IDF weights");
    auto* kb_stats = kb_cmd->add_subcommand("stats", "entity and edge counts");

    auto* serve_cmd = app.add_subcommand("serve", "start the HTTP service");
    std::string host;
    int port = -1;
    serve_cmd->add_option("--host", host, "bind address");
    serve_cmd->add_option("--port", port, "bind port");

    auto* synth = app.add_subcommand("synth", "write the synthetic ambiguous cohort and KB");
    std::string synth_out;
    std::size_t n_patients = 100, n_pairs = 10;
    std::uint64_t synth_seed = 0;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--patients", n_patients, "number of patients");
    synth->add_option("--pairs", n_pairs, "number of disease pairs");
    synth->add_option("--seed", synth_seed, "timeline seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (consult->parsed()) return run_consult(common, patient, interactive, trace_out);

        if (bench->parsed()) {
            auto cfg = synthetic ? service::AppConfig{} : load_config(common);
            if (synthetic && (!common.config.empty() || std::getenv("COTC_CONFIG"))) {
                Common c = common;
                if (c.kb.empty()) c.kb = "-";
                cfg = load_config(c);
            }
            KnowledgeBase kb;
            auto records = cohort_or_synthetic(cohort, kb, synthetic, cfg);
            if (!synthetic) kb = load_kb(cfg.kb_path);
            auto bc = service::benchmark_config(cfg);
            if (synthetic) bc.consultation.scoring.gamma = harness::synthetic_benchmark_config().consultation.scoring.gamma;
            resolve_tau(bc, kb, calibration.empty() ? records : harness::load_cohort(calibration));
            const auto report = harness::run_benchmark(kb, records, bc);
            const auto j = harness::to_json(report, traces);
            if (!out.empty()) write_file(out, j.dump(2) + "\n");
            if (!csv.empty()) write_file(csv, harness::per_round_csv(report));
            json summary = j;
            summary.erase("patients");
            std::cout << summary.dump(2) << "\n";
            for (const auto& s : report.skipped) std::cerr << "skipped " << s.patient_id << ": " << s.reason << "\n";
            return 0;
        }

        if (ablate->parsed()) {
            service::AppConfig cfg;
            if (!synthetic) cfg = load_config(common);
            KnowledgeBase kb;
            auto records = cohort_or_synthetic(cohort, kb, synthetic, cfg);
            if (!synthetic) kb = load_kb(cfg.kb_path);
            auto bc = synthetic ? harness::synthetic_benchmark_config() : service::benchmark_config(cfg);
            resolve_tau(bc, kb, records);
            std::vector<std::uint64_t> seed_list;
            for (double s : parse_list(seeds)) {
                if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s)))
                    throw ValidationError("seeds must be non-negative integers");
                seed_list.push_back(static_cast<std::uint64_t>(s));
            }
            const auto rows = harness::kb_ablation_sweep(kb, parse_list(fractions), records, bc, seed_list, subset);
            if (!out.empty()) write_file(out, harness::to_json(rows).dump(2) + "\n");
            if (!csv.empty()) write_file(csv, harness::ablation_csv(rows));
            std::cout << harness::ablation_csv(rows);
            return 0;
        }

        if (tsa_cmd->parsed()) {
            router::RouterConfig rc;
            if (!common.config.empty() || std::getenv("COTC_CONFIG")) {
                Common c = common;
                if (c.kb.empty()) c.kb = "-";
                rc = load_config(c).router;
            }
            router::ExecutionContext ctx;
            ctx.signal = signal;
            if (cohort_sigma > 0.0) ctx.cohort = tsa::CohortStats{cohort_mu, cohort_sigma, "", ""};
            const auto data = series_from_json(read_json(series_path));
            const auto r = router::run_query(query, data, ctx, rc);
            json preds = json::array();
            for (const auto& p : r.predicates) preds.push_back(to_json(p));
            json out_j{{"intent",
                        {{"bucket", router::to_string(r.intent.bucket)}, {"matched_keywords", r.intent.matched_keywords}}},
                       {"predicates", preds},
                       {"execution", router::to_json(r.log)}};
            std::cout << out_j.dump(2) << "\n";
            return 0;
        }

        if (kb_cmd->parsed()) {
            const auto cfg = load_config(common);
            const auto kb = load_kb(cfg.kb_path);
            if (kb_validate->parsed()) {
                for (const auto& w : kb.warnings()) std::cerr << "warning: " << w << "\n";
                std::cout << "ok " << kb_fingerprint(kb) << "\n";
            } else if (kb_idf->parsed()) {
                for (const auto& [id, w] : kb.idf()) std::printf("%s\t%.6f\n", id.c_str(), w);
            } else if (kb_stats->parsed()) {
                json stats{{"diseases", kb.diseases().size()},
                           {"symptoms", kb.symptoms().size()},
                           {"trends", kb.trends().size()},
                           {"edges", kb.edge_count()},
                           {"strata", prevalence_strata_sizes(kb)},
                           {"warnings", kb.warnings()},
                           {"fingerprint", kb_fingerprint(kb)}};
                std::cout << stats.dump(2) << "\n";
            }
            return 0;
        }

        if (serve_cmd->parsed()) {
            auto cfg = load_config(common);
            if (!host.empty()) cfg.server.host = host;
            if (port >= 0) cfg.server.port = port;
            service::SessionService svc(load_kb(cfg.kb_path), cfg);
            const auto restored = svc.replay_journal();
            std::cerr << "cotc serving on " << cfg.server.host << ":" << cfg.server.port << " (" << restored
                      << " sessions restored, config " << svc.hash() << ")\n";
            if (!service::serve(svc, cfg.server.host, cfg.server.port)) {
                std::cerr << "error: cannot bind " << cfg.server.host << ":" << cfg.server.port << "\n";
                return 1;
            }
            return 0;
        }

        if (synth->parsed()) {
            const auto syn = harness::make_ambiguous_cohort(n_patients, n_pairs, synth_seed);
            fs::create_directories(synth_out);
            save_kb(syn.kb, fs::path(synth_out) / "kb.json");
            harness::save_cohort(syn.patients, fs::path(synth_out) / "cohort");
            service::AppConfig cfg;
            cfg.kb_path = "kb.json";
            cfg.consultation = harness::synthetic_benchmark_config().consultation;
            cfg.seed = synth_seed;
            write_file((fs::path(synth_out) / "config.json").string(), service::to_json(cfg).dump(2) + "\n");
            std::cout << "wrote " << syn.patients.size() << " patients, kb.json and config.json to " << synth_out << "\n";
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
