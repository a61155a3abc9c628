// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//
// Criteria 5-8 share benchmarks and trained runs, so the expensive training
// happens once per (seed, configuration) and is reused.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tai/adapter.hpp"
#include "tai/dataio.hpp"
#include "tai/eval.hpp"
#include "tai/experiment.hpp"
#include "tai/perturb.hpp"

using namespace tai;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// --- 1 ---------------------------------------------------------------------

Verdict gradient_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RandomSource rng(1000 + seed);
        const AdapterShape shape{16, {8, 8}, 5, 0.0, false};
        const auto p = init_params(shape, rng);
        DenseMatrix x(8, 16), y(8, 5);
        for (auto& v : x.flat()) v = rng.gaussian();
        for (auto& v : y.flat()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
        const auto g = backward(p, forward_batch(p, x), y);
        worst = std::max(worst, oracle::check_gradients(p, g, x, y).max_rel_error);
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-5 && secs < 5.0, fmt("10 adapters, max rel error %.3g, %.2f s", worst, secs)};
}

// --- 2 ---------------------------------------------------------------------

Verdict hypersphere_invariants() {
    const auto t0 = Clock::now();
    constexpr std::size_t kSamples = 100000;
    double worst_surface = 0.0, worst_mean = 0.0;
    bool inside = true;
    RandomSource root(2);
    for (std::size_t d : {2u, 512u, 1024u})
        for (double r : {1.0, 10.0, 25.0}) {
            RandomSource rng = root.derive(d * 100 + static_cast<std::uint64_t>(r));
            for (std::size_t i = 0; i < kSamples; ++i) {
                const auto e = sample_sphere_surface(rng, d, r);
                worst_surface = std::max(worst_surface, std::abs(norm2(e.span()) - r) / r);
            }
            double sum = 0.0;
            for (std::size_t i = 0; i < kSamples; ++i) {
                const double n = norm2(sample_ball_interior(rng, d, r).span());
                inside = inside && n <= r;
                sum += n;
            }
            const double expected = r * static_cast<double>(d) / static_cast<double>(d + 1);
            worst_mean = std::max(worst_mean, std::abs(sum / kSamples - expected) / expected);
        }
    const double secs = seconds_since(t0);
    return {worst_surface <= 1e-9 && inside && worst_mean < 0.01 && secs < 10.0,
            fmt("surface |norm-r|/r max %.3g, interior %s, mean-norm rel dev max %.3g, %.2f s", worst_surface,
                inside ? "inside" : "OUTSIDE", worst_mean, secs)};
}

// --- 3 ---------------------------------------------------------------------

Verdict metric_oracle() {
    RandomSource rng(3);
    const LabelVocab vocab = synth_vocab(10);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        ScoreFile scores;
        std::vector<EmbeddingRecord> recs;
        for (std::size_t i = 0; i < 100; ++i) {
            ScoreRecord s{std::to_string(i), {}};
            Annotation a(10);
            for (std::size_t j = 0; j < 10; ++j) {
                // Every other instance uses coarse scores so ties are exercised.
                const double u = rng.uniform01();
                s.scores.push_back(trial % 2 ? std::floor(u * 4) / 4 : u);
                a[j] = rng.bernoulli(0.3) ? 1 : 0;
            }
            scores.push_back(std::move(s));
            recs.push_back({std::to_string(i), a, {0.0f}});
        }
        const auto truth = make_store(Modality::image, vocab, 1, recs);
        const auto report = mean_ap(scores, truth);
        double total = 0.0;
        std::size_t used = 0;
        for (std::size_t j = 0; j < 10; ++j) {
            std::vector<double> s;
            std::vector<int> t;
            for (std::size_t i = 0; i < 100; ++i) {
                s.push_back(scores[i].scores[j]);
                t.push_back(recs[i].annotation[j]);
            }
            const double ref = oracle::brute_force_ap(s, t);
            if (ref < 0) continue;
            total += ref;
            ++used;
        }
        worst = std::max(worst, std::abs(report.map - total / static_cast<double>(used)));
    }
    return {worst <= 1e-12, fmt("100 instances, max |mAP - brute force| %.3g", worst)};
}

// --- 4 ---------------------------------------------------------------------

Verdict centroid_identity() {
    RandomSource rng(4);
    constexpr std::size_t kDim = 24;
    const std::vector<Annotation> combos{{1, 0, 0, 0, 0}, {0, 1, 1, 0, 0}, {1, 0, 1, 0, 1}, {0, 0, 0, 1, 0},
                                         {1, 1, 1, 1, 0}};
    auto records = [&](std::size_t n, double spread) {
        std::vector<EmbeddingRecord> out;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<float> v(kDim);
            for (auto& x : v) x = static_cast<float>(spread * rng.gaussian());
            out.push_back({std::to_string(i), combos[rng.uniform_index(combos.size())], std::move(v)});
        }
        return out;
    };
    const auto texts = records(800, 3.0);
    const auto images = records(400, 7.0);
    const auto table = build_centroid_table(texts, images);

    double worst = 0.0;
    for (const auto& c : combos) {
        std::vector<long double> shifted(kDim, 0.0L), target(kDim, 0.0L);
        std::size_t n = 0, labels = 0;
        for (const auto& t : texts) {
            if (t.annotation != c) continue;
            const auto s = shift_text(t.as_dense(), c, table.offsets);
            for (std::size_t i = 0; i < kDim; ++i) shifted[i] += s[i];
            ++n;
        }
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (c[j] != 1) continue;
            std::vector<long double> sum(kDim, 0.0L);
            std::size_t m = 0;
            for (const auto& img : images)
                if (img.annotation[j] == 1) {
                    for (std::size_t i = 0; i < kDim; ++i) sum[i] += img.vector[i];
                    ++m;
                }
            for (std::size_t i = 0; i < kDim; ++i) target[i] += sum[i] / m;
            ++labels;
        }
        for (std::size_t i = 0; i < kDim; ++i)
            worst = std::max(worst, static_cast<double>(std::abs(shifted[i] / n - target[i] / labels)));
    }
    return {worst <= 1e-12, fmt("5 combinations, max deviation %.3g", worst)};
}

// --- 5-8: the synthetic transfer benchmark -----------------------------------

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

struct Run {
    TrainResult result;
    ScoreFile scores;
    EvalReport report;
};

class Bench {
public:
    explicit Bench(std::uint64_t seed) : seed_(seed), vocab_(synth_vocab(20)) {
        SynthConfig sc;  // N=20, d=256, 2000 texts, 1000 images, gap 5, noise 1
        sc.seed = seed;
        data_ = synth_benchmark(sc);
    }

    TrainConfig base() const {
        TrainConfig cfg;
        cfg.seed = seed_;
        return cfg;
    }

    Run run(const TrainConfig& cfg, const EmbeddingStore* images = nullptr) const {
        Run r{train(data_.texts, images, vocab_, cfg), {}, {}};
        r.scores = predict(r.result.checkpoint, data_.images);
        r.report = mean_ap(r.scores, data_.images);
        return r;
    }

    const EmbeddingStore& images() const { return data_.images; }
    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    LabelVocab vocab_;
    SynthBenchmark data_;
};

std::string join_maps(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : "/") + fmt("%.4f", x);
    return s;
}

Verdict cross_modal_transfer(const std::vector<Bench>& benches, std::map<std::uint64_t, TrainingLog>& logs) {
    const std::vector<double> radii{0, 1, 2, 5, 10};
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    for (const auto& b : benches) {
        std::vector<double> maps;
        for (double r : radii) {
            auto cfg = b.base();
            cfg.perturb.text_radius = r;
            auto run = b.run(cfg);
            maps.push_back(run.report.map);
            if (r == 0) logs[b.seed()] = run.result.log;
        }
        std::size_t best = 1;
        for (std::size_t i = 2; i < maps.size(); ++i)
            if (maps[i] > maps[best]) best = i;
        const bool gain = maps[best] - maps[0] >= 0.03;
        // Rises then falls: the best interior radius beats both ends of the sweep.
        const bool shape = best + 1 < maps.size() && maps[best] > maps[0] && maps[best] > maps.back();
        pass = pass && gain && shape;
        detail += fmt("seed %llu r=0/1/2/5/10 %s; ", static_cast<unsigned long long>(b.seed()),
                      join_maps(maps).c_str());
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 120.0;
    return {pass, detail + fmt("%.1f s", secs)};
}

Verdict shifted_perturbation(const std::vector<Bench>& benches, std::map<std::uint64_t, Run>& zsl_runs) {
    bool pass = true;
    std::string detail;
    for (const auto& b : benches) {
        const auto& zsl = zsl_runs.at(b.seed());
        RandomSource mask_rng = RandomSource(b.seed()).derive(22);
        const auto partial = mask_store(mask_rng, b.images(), 0.5);
        auto cfg = b.base();
        cfg.mode = TrainMode::pll;
        const auto pll = b.run(cfg, &partial);
        pass = pass && pll.report.map >= zsl.report.map + 0.01;
        detail += fmt("seed %llu pll %.4f vs zsl %.4f; ", static_cast<unsigned long long>(b.seed()), pll.report.map,
                      zsl.report.map);

        // With every label revealed, centroids estimated from the masked store
        // must equal per-label means over the full annotations, bit for bit.
        RandomSource full_rng = RandomSource(b.seed()).derive(22);
        const auto revealed = mask_store(full_rng, b.images(), 1.0);
        const auto estimated = estimate_visual_centroids(revealed.records);
        bool exact = estimated.size() == 20;
        for (std::size_t j = 0; j < 20 && exact; ++j) {
            DenseVector sum(256);
            std::size_t m = 0;
            for (const auto& img : b.images().records)
                if (img.annotation[j] == 1) {
                    for (std::size_t i = 0; i < 256; ++i) sum[i] += static_cast<double>(img.vector[i]);
                    ++m;
                }
            exact = estimated.count(j) && estimated.at(j) == (1.0 / static_cast<double>(m)) * sum;
        }
        pass = pass && exact;
        if (!exact) detail += "known-rate 1.0 centroids differ; ";
    }
    return {pass, detail + "known-rate 1.0 centroids exact"};
}

Verdict few_shot_monotonicity(const std::vector<Bench>& benches, std::map<std::uint64_t, Run>& zsl_runs) {
    bool pass = true;
    std::string detail;
    for (const auto& b : benches) {
        std::vector<double> maps;
        for (std::size_t n : {0u, 1u, 4u, 16u}) {
            RandomSource shot_rng = RandomSource(b.seed()).derive(21);
            const auto shots = select_shots(shot_rng, b.images(), n);
            auto cfg = b.base();
            cfg.mode = TrainMode::fsl;
            const auto run = b.run(cfg, &shots);
            if (n == 0) pass = pass && run.scores == zsl_runs.at(b.seed()).scores;
            maps.push_back(run.report.map);
        }
        for (std::size_t i = 1; i < maps.size(); ++i) pass = pass && maps[i] >= maps[i - 1];
        detail += fmt("seed %llu n=0/1/4/16 %s; ", static_cast<unsigned long long>(b.seed()),
                      join_maps(maps).c_str());
    }
    return {pass, detail + "n=0 identical to zsl"};
}

Verdict determinism(const Bench& bench, const Run& first) {
    const auto again = bench.run(bench.base());
    const bool ckpt = serialize_checkpoint(again.result.checkpoint) == serialize_checkpoint(first.result.checkpoint);
    const bool scores = format_scores(again.scores) == format_scores(first.scores);
    const bool report = again.report.to_json(true).dump() == first.report.to_json(true).dump();
    auto log_a = first.result.log, log_b = again.result.log;
    log_a.wall_time_seconds = log_b.wall_time_seconds = 0.0;
    const bool log = format_training_log(log_a) == format_training_log(log_b);
    return {ckpt && scores && report && log, fmt("checkpoint %s, scores %s, report %s, log %s", ckpt ? "same" : "DIFF",
                                                scores ? "same" : "DIFF", report ? "same" : "DIFF",
                                                log ? "same" : "DIFF")};
}

// --- 9 ---------------------------------------------------------------------

Verdict schedule(const TrainingLog& log) {
    const double max_lr = TrainConfig{}.max_lr;
    const std::size_t total = log.steps.size();
    const bool whole = total * 3 % 10 == 0;
    const std::size_t peak = total * 3 / 10;
    const bool ok = whole && max_lr == 1e-4 && log.steps.front().lr == max_lr / 25 && log.steps[peak].lr == max_lr &&
                    log.steps.back().lr == max_lr / 1e4 && onecycle_lr(peak, total, max_lr) == max_lr;
    return {ok, fmt("%zu steps: lr[0]=%.17g lr[%zu]=%.17g lr[last]=%.17g", total, log.steps.front().lr, peak,
                    log.steps[peak].lr, log.steps.back().lr)};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const Verdict& v) {
        std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
        std::fflush(stdout);
        failures += !v.pass;
    };

    report(1, "gradient oracle", gradient_oracle());
    report(2, "hypersphere invariants", hypersphere_invariants());
    report(3, "metric oracle", metric_oracle());
    report(4, "centroid alignment identity", centroid_identity());

    std::vector<Bench> benches;
    for (auto s : kSeeds) benches.emplace_back(s);

    std::map<std::uint64_t, TrainingLog> logs;
    report(5, "cross-modal transfer", cross_modal_transfer(benches, logs));

    // Default-configuration zsl runs (text radius 25) are the baseline for 6 and 7.
    std::map<std::uint64_t, Run> zsl_runs;
    for (const auto& b : benches) zsl_runs.emplace(b.seed(), b.run(b.base()));

    report(6, "shifted perturbation benefit", shifted_perturbation(benches, zsl_runs));
    report(7, "few-shot monotonicity", few_shot_monotonicity(benches, zsl_runs));
    report(8, "determinism", determinism(benches.front(), zsl_runs.at(kSeeds.front())));
    report(9, "one-cycle schedule", schedule(logs.at(kSeeds.front())));

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
