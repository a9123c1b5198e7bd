// Times the OpenMP kernels against their serial references.
// Usage: cotc_bench [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>

#include "cotc/kb.hpp"
#include "cotc/kernels.hpp"
#include "cotc/scorer.hpp"

using namespace cotc;

namespace {

template <typename Fn>
double best_ms(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, std::size_t n, double par, double ser, bool same) {
    std::printf("%-22s %8zu %10.3f %10.3f %7.2fx  %s\n", name, n, par, ser, ser / par, same ? "match" : "MISMATCH");
}

KnowledgeBase random_kb(std::size_t n_diseases, std::size_t n_symptoms, std::mt19937_64& rng) {
    std::vector<SymptomDef> symptoms;
    for (std::size_t i = 0; i < n_symptoms; ++i) symptoms.push_back({"s" + std::to_string(i), "symptom " + std::to_string(i), {}});
    std::uniform_int_distribution<std::size_t> pick(0, n_symptoms - 1);
    std::uniform_real_distribution<double> phi(0.5, 1.0);
    std::vector<Disease> diseases;
    for (std::size_t d = 0; d < n_diseases; ++d) {
        Disease dis;
        dis.id = "d" + std::to_string(d);
        dis.name = "disease " + std::to_string(d);
        std::set<std::size_t> used;
        while (used.size() < 12) used.insert(pick(rng));
        for (auto s : used) dis.symptom_edges.push_back({"s" + std::to_string(s), phi(rng), TemporalQualifier::unspecified, false});
        diseases.push_back(std::move(dis));
    }
    return KnowledgeBase(std::move(diseases), std::move(symptoms), {});
}

}  // namespace

int main(int argc, char** argv) {
    const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 5;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::printf("threads: %d, best of %d\n", omp_get_max_threads(), repeats);
    std::printf("%-22s %8s %10s %10s %8s\n", "kernel", "n", "omp ms", "serial ms", "speedup");

    {
        const std::size_t n = 3000;
        std::vector<double> t(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<double>(i);
            y[i] = 0.01 * static_cast<double>(i) + noise(rng);
        }
        std::vector<double> a, b;
        const double par = best_ms(repeats, [&] { a = kernels::pairwise_slopes(t, y); });
        const double ser = best_ms(repeats, [&] { b = kernels::serial::pairwise_slopes(t, y); });
        row("pairwise_slopes", n, par, ser, a == b);

        std::int64_t sa = 0, sb = 0;
        const double par2 = best_ms(repeats, [&] { sa = kernels::mann_kendall_s(y); });
        const double ser2 = best_ms(repeats, [&] { sb = kernels::serial::mann_kendall_s(y); });
        row("mann_kendall_s", n, par2, ser2, sa == sb);
    }
    {
        const std::size_t n = 4000;
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = (i < n / 3 ? 0.0 : 2.0) + noise(rng);
        std::vector<double> a, b;
        const double par = best_ms(repeats, [&] { a = kernels::change_point_loglik(y, 1e-9); });
        const double ser = best_ms(repeats, [&] { b = kernels::serial::change_point_loglik(y, 1e-9); });
        row("change_point_loglik", n, par, ser, a == b);
    }
    {
        const auto kb = random_kb(5000, 400, rng);
        EvidenceSet ev;
        for (int i = 0; i < 40; ++i) ev.positive.insert("s" + std::to_string(i * 7));
        const auto cands = candidate_set(kb, ev);
        const ScoringParams params;
        std::map<DiseaseId, double> a, b;
        const double par = best_ms(repeats, [&] { a = score_energies(kb, kb.idf(), ev, cands, params); });
        const double ser = best_ms(repeats, [&] { b = serial::score_energies(kb, kb.idf(), ev, cands, params); });
        row("score_energies", cands.size(), par, ser, a == b);
    }
    return 0;
}
