#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tai/error.hpp"
#include "tai/numkit.hpp"

using namespace tai;

namespace {

DenseMatrix random_matrix(RandomSource& rng, std::size_t r, std::size_t c) {
    DenseMatrix m(r, c);
    for (auto& v : m.flat()) v = rng.gaussian();
    return m;
}

}  // namespace

TEST_CASE("xoshiro256** and splitmix64 match published reference outputs") {
    Xoshiro256StarStar x({1, 2, 3, 4});
    const std::uint64_t expected[] = {11520ULL,
                                      0ULL,
                                      1509978240ULL,
                                      1215971899390074240ULL,
                                      1216172134540287360ULL,
                                      607988272756665600ULL,
                                      16172922978634559625ULL,
                                      8476171486693032832ULL,
                                      10595114339597558777ULL,
                                      2904607092377533576ULL};
    for (auto e : expected) CHECK(x() == e);
    // SplitMix64 seeded with 0 starts 0xe220a8397b1dcdaf, 0x6e789e6aa1b965f4.
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
    CHECK(splitmix64(0x9e3779b97f4a7c15ULL) == 0x6e789e6aa1b965f4ULL);
}

TEST_CASE("uniform01 lies in [0, 1) and uniform_open_closed in (0, 1]") {
    RandomSource rng(3);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform01();
        CHECK((u >= 0.0 && u < 1.0));
        const double w = rng.uniform_open_closed();
        CHECK((w > 0.0 && w <= 1.0));
    }
}

TEST_CASE("uniform_index is unbiased by chi-square") {
    RandomSource rng(11);
    std::vector<std::size_t> counts(7, 0);
    const std::size_t n = 70000;
    for (std::size_t i = 0; i < n; ++i) ++counts[rng.uniform_index(7)];
    CHECK(oracle::chi_square_p(counts, n / 7.0) > 1e-3);
}

TEST_CASE("gaussian draws have unit variance") {
    RandomSource rng(12);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("derived streams are reproducible and leave the parent untouched") {
    RandomSource a(99), b(99);
    auto da = a.derive(7);
    CHECK(a.next_u64() == b.next_u64());
    auto db = b.derive(7);
    for (int i = 0; i < 10; ++i) CHECK(da.next_u64() == db.next_u64());
    CHECK(a.derive(7).next_u64() != a.derive(8).next_u64());
}

TEST_CASE("sample_subset sizes are uniform and members distinct") {
    RandomSource rng(4);
    std::vector<std::size_t> sizes(5, 0);
    for (int i = 0; i < 10000; ++i) {
        auto s = sample_subset(rng, 20, 1, 4);
        REQUIRE(std::is_sorted(s.begin(), s.end()));
        REQUIRE(std::adjacent_find(s.begin(), s.end()) == s.end());
        ++sizes[s.size()];
    }
    for (std::size_t k = 1; k <= 4; ++k) CHECK(std::abs(sizes[k] / 10000.0 - 0.25) < 0.02);
    CHECK_THROWS_AS(sample_subset(rng, 3, 1, 4), Error);
    CHECK_THROWS_AS(sample_subset(rng, 3, 3, 2), Error);
}

TEST_CASE("matrix products agree with naive loops") {
    RandomSource rng(21);
    for (auto [n, k, m] : {std::tuple{1, 1, 1}, {3, 5, 7}, {17, 33, 9}, {64, 256, 20}, {5, 300, 129}}) {
        const auto a = random_matrix(rng, n, k);
        const auto b = random_matrix(rng, k, m);
        DenseMatrix out;
        matmul(a, b, out);
        const auto ref = oracle::naive_matmul(a, b);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(out.flat()[i] - ref.flat()[i]) < 1e-12);

        DenseMatrix viat;
        matmul_transposed(a, oracle::naive_transpose(b), viat);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(viat.flat()[i] - ref.flat()[i]) < 1e-12);

        DenseMatrix atb;
        matmul_at_b(oracle::naive_transpose(a), b, atb);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(atb.flat()[i] - ref.flat()[i]) < 1e-12);

        CHECK(transpose(a) == oracle::naive_transpose(a));
    }
}

TEST_CASE("matvec matches the naive product and dot/norm behave") {
    RandomSource rng(22);
    const auto a = random_matrix(rng, 13, 31);
    DenseVector x = gaussian_vector(rng, 31);
    const auto y = matvec(a, x.span());
    for (std::size_t i = 0; i < 13; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < 31; ++j) s += a(i, j) * x[j];
        CHECK(std::abs(y[i] - s) < 1e-12);
    }
    CHECK(norm2(DenseVector{3.0, 4.0}.span()) == doctest::Approx(5.0));
    CHECK(norm2(DenseVector{1e200, 1e200}.span()) == doctest::Approx(std::sqrt(2.0) * 1e200));
    CHECK(norm2(DenseVector{3e-200, 4e-200}.span()) == doctest::Approx(5e-200));
    CHECK(norm2(DenseVector{0.0, 0.0}.span()) == 0.0);
}

TEST_CASE("matmul_at_b accumulates when asked") {
    RandomSource rng(23);
    const auto a = random_matrix(rng, 4, 3);
    const auto b = random_matrix(rng, 4, 2);
    DenseMatrix out;
    matmul_at_b(a, b, out);
    const auto once = out;
    matmul_at_b(a, b, out, true);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.flat()[i] == doctest::Approx(2.0 * once.flat()[i]));
}

TEST_CASE("surface samples have exact norm and uniform direction") {
    RandomSource rng(31);
    for (std::size_t d : {2, 3, 512}) {
        for (double r : {1.0, 25.0}) {
            for (int i = 0; i < 1000; ++i) {
                const auto e = sample_sphere_surface(rng, d, r);
                REQUIRE(e.size() == d);
                CHECK(std::abs(norm2(e.span()) - r) <= 1e-9 * r);
            }
        }
    }
    // In 2-D the angle must be uniform on [0, 2pi).
    std::vector<std::size_t> bins(36, 0);
    const std::size_t n = 36000;
    for (std::size_t i = 0; i < n; ++i) {
        const auto e = sample_sphere_surface(rng, 2, 1.0);
        double t = std::atan2(e[1], e[0]);
        if (t < 0) t += 2 * std::numbers::pi;
        ++bins[std::min<std::size_t>(35, static_cast<std::size_t>(t / (2 * std::numbers::pi) * 36))];
    }
    CHECK(oracle::chi_square_p(bins, n / 36.0) > 1e-3);
}

TEST_CASE("ball samples stay inside with mean norm r*d/(d+1)") {
    RandomSource rng(32);
    for (std::size_t d : {2, 64}) {
        const double r = 10.0;
        double sum = 0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double len = norm2(sample_ball_interior(rng, d, r).span());
            CHECK(len <= r);
            sum += len;
        }
        CHECK(sum / n == doctest::Approx(r * d / (d + 1.0)).epsilon(0.01));
    }
}

TEST_CASE("noise samplers validate their arguments") {
    RandomSource rng(33);
    CHECK_THROWS_AS(gaussian_vector(rng, 0), Error);
    CHECK_THROWS_AS(sample_sphere_surface(rng, 4, -1.0), Error);
    CHECK_THROWS_AS(sample_ball_interior(rng, 4, std::nan("")), Error);
    CHECK(norm2(sample_noise(rng, 8, 0.0, SamplingScheme::surface).span()) == 0.0);
    CHECK(parse_scheme("interior") == SamplingScheme::interior);
    CHECK_THROWS_AS(parse_scheme("gaussian"), Error);
}

TEST_CASE("seeded samplers are deterministic") {
    RandomSource a(8), b(8);
    CHECK(sample_sphere_surface(a, 100, 5.0) == sample_sphere_surface(b, 100, 5.0));
    CHECK(sample_ball_interior(a, 100, 5.0) == sample_ball_interior(b, 100, 5.0));
}
