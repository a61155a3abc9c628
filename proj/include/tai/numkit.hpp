#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace tai {

// Fixed-length vector of doubles. Embeddings, noise, centroids and offsets all
// live in this type; storage precision on disk is float, arithmetic is double.
class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
    DenseVector(std::initializer_list<double> values) : data_(values) {}
    explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    const std::vector<double>& values() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const DenseVector&, const DenseVector&) = default;

private:
    std::vector<double> data_;
};

DenseVector operator+(const DenseVector& a, const DenseVector& b);
DenseVector operator-(const DenseVector& a, const DenseVector& b);
DenseVector operator*(double s, const DenseVector& a);

void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Row-major dense matrix.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }

    void fill(double value);

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix transpose(const DenseMatrix& m);

// y = A x
DenseVector matvec(const DenseMatrix& a, std::span<const double> x);

// out = x * w^T, with x (n x k), w (m x k), out (n x m). out is resized.
void matmul_transposed(const DenseMatrix& x, const DenseMatrix& w, DenseMatrix& out);

// out = a^T * b, with a (n x m), b (n x k), out (m x k). Accumulates into out
// when accumulate is true.
void matmul_at_b(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out,
                 bool accumulate = false);

// out = a * b, with a (n x m), b (m x k), out (n x k). out is resized.
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

std::uint64_t splitmix64(std::uint64_t x);

/// xoshiro256** 1.0 (Blackman & Vigna). From state {1, 2, 3, 4} the first
/// outputs are 11520, 0, 1509978240, 1215971899390074240.
class Xoshiro256StarStar {
public:
    using result_type = std::uint64_t;

    // State words are the first four outputs of a SplitMix64 stream started at
    // `seed`, so no seed yields the all-zero state in practice.
    explicit Xoshiro256StarStar(std::uint64_t seed) noexcept;
    explicit Xoshiro256StarStar(const std::array<std::uint64_t, 4>& state) noexcept : s_(state) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        const std::uint64_t out = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return out;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_;
};

/// Deterministic random source.
///
/// Raw bits come from xoshiro256**. Nothing goes through <random>'s
/// distributions, so the draw sequence does not depend on the standard
/// library vendor:
///   - uniform01: top 53 bits scaled by 2^-53, in [0, 1)
///   - uniform_index(n): rejection sampling on the top bits, exact
///   - gaussian: Boost.Random's ziggurat sampler, fed by the same engine
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64();
    double uniform01();
    // Uniform on (0, 1].
    double uniform_open_closed();
    std::size_t uniform_index(std::size_t n);
    double gaussian();
    bool bernoulli(double p);

    // Independent stream derived from this source's seed and a stream tag.
    // Does not advance this source.
    RandomSource derive(std::uint64_t tag) const;

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    Xoshiro256StarStar engine_;
};

// Subset of {0..n-1}: size uniform in [min_k, max_k], then members uniform
// without replacement. Returned sorted ascending.
std::vector<std::size_t> sample_subset(RandomSource& rng, std::size_t n, std::size_t min_k,
                                       std::size_t max_k);

enum class SamplingScheme { surface, interior };

SamplingScheme parse_scheme(std::string_view name);
std::string_view scheme_name(SamplingScheme scheme);

DenseVector gaussian_vector(RandomSource& rng, std::size_t dim);
DenseVector sample_sphere_surface(RandomSource& rng, std::size_t dim, double radius);
DenseVector sample_ball_interior(RandomSource& rng, std::size_t dim, double radius);
DenseVector sample_noise(RandomSource& rng, std::size_t dim, double radius,
                         SamplingScheme scheme);

}  // namespace tai
