#include <doctest.h>

#include <cmath>

#include "temp_dir.hpp"
#include "tai/diagnostics.hpp"
#include "tai/error.hpp"
#include "tai/perturb.hpp"

using namespace tai;

namespace {

EmbeddingRecord rec(Annotation a, std::vector<float> v) { return {"", std::move(a), std::move(v)}; }

std::vector<EmbeddingRecord> random_records(RandomSource& rng, std::size_t n, std::size_t dim,
                                            const std::vector<Annotation>& combos) {
    std::vector<EmbeddingRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        for (auto& x : v) x = static_cast<float>(5.0 * rng.gaussian());
        out.push_back(rec(combos[rng.uniform_index(combos.size())], std::move(v)));
    }
    return out;
}

}  // namespace

TEST_CASE("perturb_text moves the embedding by exactly the radius") {
    RandomSource rng(1);
    PerturbConfig cfg;
    const DenseVector t(64, 2.0);
    for (int i = 0; i < 100; ++i) {
        const auto p = perturb_text(rng, t, cfg);
        CHECK(norm2((p - t).span()) == doctest::Approx(cfg.text_radius).epsilon(1e-12));
    }
    cfg.text_radius = 0.0;
    CHECK(perturb_text(rng, t, cfg) == t);
    cfg.scheme = SamplingScheme::interior;
    cfg.text_radius = 3.0;
    CHECK(norm2((perturb_text(rng, t, cfg) - t).span()) <= 3.0);
    cfg.text_radius = -1.0;
    CHECK_THROWS_AS(perturb_text(rng, t, cfg), Error);
}

TEST_CASE("perturb_image warns when its radius exceeds the text radius") {
    RandomSource rng(2);
    PerturbConfig cfg;
    cfg.text_radius = 1.0;
    cfg.image_radius = 2.0;
    ScopedWarningCapture w;
    const auto p = perturb_image(rng, DenseVector(8), cfg);
    CHECK(norm2(p.span()) == doctest::Approx(2.0));
    CHECK(w.messages().size() == 1);
}

TEST_CASE("visual centroids use known positives only") {
    std::vector<EmbeddingRecord> imgs{rec({1, 0}, {1, 1}), rec({1, -1}, {3, 5}), rec({-1, 1}, {10, 0}),
                                      rec({0, 0}, {100, 100})};
    const auto c = estimate_visual_centroids(imgs);
    REQUIRE(c.size() == 2);
    CHECK(c.at(0) == DenseVector{2, 3});
    CHECK(c.at(1) == DenseVector{10, 0});

    std::vector<EmbeddingRecord> none{rec({0, -1}, {1, 1})};
    CHECK(estimate_visual_centroids(none).empty());
}

TEST_CASE("offsets average available visual centroids and zero out unknown combinations") {
    std::map<std::size_t, DenseVector> visual{{0, {2, 0}}, {1, {0, 4}}};
    std::map<Annotation, DenseVector> text{{{1, 1, 0}, {0, 0}}, {{1, 0, 1}, {1, 1}}, {{0, 0, 1}, {5, 5}}};
    const auto off = compute_offsets(visual, text);
    CHECK(off.at({1, 1, 0}) == DenseVector{1, 2});
    // Label 2 has no visual centroid, so only label 0 contributes.
    CHECK(off.at({1, 0, 1}) == DenseVector{1, -1});
    CHECK(off.at({0, 0, 1}) == DenseVector{0, 0});
    CHECK(shift_text({1, 1}, {0, 1, 1}, off) == DenseVector{1, 1});
}

TEST_CASE("shifted texts are centred on the visual combination centroid") {
    RandomSource rng(3);
    const std::vector<Annotation> combos{{1, 0, 0, 0}, {0, 1, 0, 0}, {1, 1, 0, 0}, {0, 1, 1, 0}, {1, 0, 1, 1}};
    const auto texts = random_records(rng, 500, 12, combos);
    auto images = random_records(rng, 300, 12, combos);
    const auto table = build_centroid_table(texts, images);
    for (const auto& c : combos) {
        DenseVector mean(12);
        std::size_t n = 0;
        for (const auto& t : texts) {
            if (t.annotation != c) continue;
            const auto s = shift_text(t.as_dense(), c, table.offsets);
            for (std::size_t i = 0; i < 12; ++i) mean[i] += s[i];
            ++n;
        }
        REQUIRE(n > 0);
        DenseVector target(12);
        std::size_t labels = 0;
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (!c[j]) continue;
            // Independent centroid of label j straight from the image records.
            DenseVector vc(12);
            std::size_t m = 0;
            for (const auto& img : images)
                if (img.annotation[j] > 0) {
                    for (std::size_t i = 0; i < 12; ++i) vc[i] += img.vector[i];
                    ++m;
                }
            for (std::size_t i = 0; i < 12; ++i) target[i] += vc[i] / m;
            ++labels;
        }
        for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(mean[i] / n - target[i] / labels) < 1e-12);
    }
}

TEST_CASE("centroid table round trips through centroids.bin") {
    TempDir dir;
    RandomSource rng(4);
    LabelVocab vocab({"a", "b", "c", "d", "e", "f", "g", "h", "i"});
    const std::vector<Annotation> combos{{1, 0, 0, 0, 0, 0, 0, 0, 1}, {0, 1, 0, 0, 0, 0, 0, 0, 0}};
    const auto table = build_centroid_table(random_records(rng, 40, 5, combos), random_records(rng, 40, 5, combos));
    write_centroids(dir / "c.bin", table, vocab);
    CHECK(read_centroids(dir / "c.bin", vocab) == table);
    const auto bytes = serialize_centroids(table, vocab.hash());
    CHECK_THROWS_AS(deserialize_centroids(bytes, 0), Error);
    CHECK_THROWS_AS(deserialize_centroids(std::span(bytes).first(bytes.size() - 1), vocab.hash()), Error);
}

TEST_CASE("mask_annotation reveals each label with the known rate") {
    RandomSource rng(5);
    const Annotation full{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    CHECK(mask_annotation(rng, full, 1.0) == full);
    CHECK(mask_annotation(rng, full, 0.0) == Annotation(10, -1));
    std::size_t revealed = 0, total = 0;
    for (int i = 0; i < 2000; ++i) {
        const auto m = mask_annotation(rng, full, 0.3);
        for (std::size_t j = 0; j < full.size(); ++j) {
            CHECK((m[j] == -1 || m[j] == full[j]));
            revealed += m[j] != -1;
            ++total;
        }
    }
    CHECK(static_cast<double>(revealed) / total == doctest::Approx(0.3).epsilon(0.05));
    CHECK_THROWS_AS(mask_annotation(rng, full, 1.5), Error);
}
