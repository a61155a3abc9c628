#include "tai/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "tai/error.hpp"

namespace tai {

bool DenseVector::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

DenseVector operator+(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::dimension_mismatch, "vector add: size mismatch");
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

DenseVector operator-(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::dimension_mismatch, "vector sub: size mismatch");
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

DenseVector operator*(double s, const DenseVector& a) {
    DenseVector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
    return out;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    const double* xp = x.data();
    double* yp = y.data();
    for (std::size_t i = 0; i < n; ++i) yp[i] += alpha * xp[i];
}

// Eight fixed lanes so the reduction vectorizes without reassociation flags
// and the summation order stays the same on every build.
double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    const double* ap = a.data();
    const double* bp = b.data();
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) acc[l] += ap[i + l] * bp[i + l];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += ap[i] * bp[i];
    return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

double norm2(std::span<const double> a) {
    const double sq = dot(a, a);
    if (std::isfinite(sq) && sq >= std::numeric_limits<double>::min()) return std::sqrt(sq);
    // Overflowed, underflowed or zero: redo it scaled by the largest magnitude.
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double sum = 0.0;
    for (double v : a) {
        const double s = v / scale;
        sum += s * s;
    }
    return scale * std::sqrt(sum);
}

void DenseMatrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

DenseVector matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw Error(ErrorCode::dimension_mismatch, "matvec: size mismatch");
    DenseVector y(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
    return y;
}

namespace {

// C (n x k) = A (n x m) * B (m x k), all row-major with explicit strides.
// Each output element is accumulated over p = 0..m-1 in order starting from
// zero, so the result equals the textbook triple loop bit for bit whatever the
// blocking or vector width.
using Lane8 = double __attribute__((vector_size(64)));

inline Lane8 load8(const double* p) {
    Lane8 v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

inline void store8(double* p, Lane8 v) { std::memcpy(p, &v, sizeof(v)); }

void gemm_kernel(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c, std::size_t ldc,
                 std::size_t n, std::size_t m, std::size_t k) {
    constexpr std::size_t kRows = 4;
    constexpr std::size_t kCols = 16;
    std::size_t i0 = 0;
    for (; i0 + kRows <= n; i0 += kRows) {
        const double* a0 = a + (i0 + 0) * lda;
        const double* a1 = a + (i0 + 1) * lda;
        const double* a2 = a + (i0 + 2) * lda;
        const double* a3 = a + (i0 + 3) * lda;
        std::size_t j0 = 0;
        for (; j0 + kCols <= k; j0 += kCols) {
            Lane8 c00 = {}, c01 = {}, c10 = {}, c11 = {}, c20 = {}, c21 = {}, c30 = {}, c31 = {};
            for (std::size_t p = 0; p < m; ++p) {
                const double* brow = b + p * ldb + j0;
                const Lane8 b0 = load8(brow);
                const Lane8 b1 = load8(brow + 8);
                c00 += a0[p] * b0;
                c01 += a0[p] * b1;
                c10 += a1[p] * b0;
                c11 += a1[p] * b1;
                c20 += a2[p] * b0;
                c21 += a2[p] * b1;
                c30 += a3[p] * b0;
                c31 += a3[p] * b1;
            }
            store8(c + (i0 + 0) * ldc + j0, c00);
            store8(c + (i0 + 0) * ldc + j0 + 8, c01);
            store8(c + (i0 + 1) * ldc + j0, c10);
            store8(c + (i0 + 1) * ldc + j0 + 8, c11);
            store8(c + (i0 + 2) * ldc + j0, c20);
            store8(c + (i0 + 2) * ldc + j0 + 8, c21);
            store8(c + (i0 + 3) * ldc + j0, c30);
            store8(c + (i0 + 3) * ldc + j0 + 8, c31);
        }
        for (; j0 < k; ++j0) {
            for (std::size_t r = 0; r < kRows; ++r) {
                double acc = 0.0;
                for (std::size_t p = 0; p < m; ++p) acc += a[(i0 + r) * lda + p] * b[p * ldb + j0];
                c[(i0 + r) * ldc + j0] = acc;
            }
        }
    }
    for (; i0 < n; ++i0) {
        double* crow = c + i0 * ldc;
        for (std::size_t j = 0; j < k; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < m; ++p) {
            const double av = a[i0 * lda + p];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < k; ++j) crow[j] += av * brow[j];
        }
    }
}

DenseMatrix transposed(const DenseMatrix& m) {
    constexpr std::size_t kTile = 16;
    DenseMatrix t(m.cols(), m.rows());
    const double* src = m.flat().data();
    double* dst = t.flat().data();
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
        const std::size_t r1 = std::min(rows, r0 + kTile);
        for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
            const std::size_t c1 = std::min(cols, c0 + kTile);
            for (std::size_t r = r0; r < r1; ++r)
                for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
        }
    }
    return t;
}

}  // namespace

DenseMatrix transpose(const DenseMatrix& m) { return transposed(m); }

void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out) {
    if (a.cols() != b.rows()) throw Error(ErrorCode::dimension_mismatch, "matmul: inner size mismatch");
    if (out.rows() != a.rows() || out.cols() != b.cols()) out = DenseMatrix(a.rows(), b.cols());
    gemm_kernel(a.flat().data(), a.cols(), b.flat().data(), b.cols(), out.flat().data(), out.cols(), a.rows(),
                a.cols(), b.cols());
}

void matmul_transposed(const DenseMatrix& x, const DenseMatrix& w, DenseMatrix& out) {
    if (x.cols() != w.cols()) throw Error(ErrorCode::dimension_mismatch, "matmul_transposed: inner size mismatch");
    matmul(x, transposed(w), out);
}

void matmul_at_b(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out, bool accumulate) {
    if (a.rows() != b.rows()) throw Error(ErrorCode::dimension_mismatch, "matmul_at_b: row count mismatch");
    if (!accumulate || out.rows() != a.cols() || out.cols() != b.cols()) {
        matmul(transposed(a), b, out);
        return;
    }
    DenseMatrix tmp;
    matmul(transposed(a), b, tmp);
    auto o = out.flat();
    auto t = tmp.flat();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += t[i];
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Xoshiro256StarStar::Xoshiro256StarStar(std::uint64_t seed) noexcept {
    constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    for (std::size_t i = 0; i < 4; ++i) s_[i] = splitmix64(seed + i * kGolden);
}

std::vector<std::size_t> sample_subset(RandomSource& rng, std::size_t n, std::size_t min_k,
                                       std::size_t max_k) {
    if (min_k < 1 || min_k > max_k || max_k > n)
        throw Error(ErrorCode::invalid_config, "subset size range must satisfy 1 <= min <= max <= " +
                                                   std::to_string(n));
    const std::size_t k = min_k + rng.uniform_index(max_k - min_k + 1);
    // Partial Fisher-Yates over the index pool.
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t RandomSource::next_u64() { return engine_(); }

double RandomSource::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform_open_closed() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::size_t RandomSource::uniform_index(std::size_t n) {
    if (n == 0) throw Error(ErrorCode::invalid_config, "uniform_index: empty range");
    if (n == 1) return 0;
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    // Reject the partial bucket at the top of the range.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

double RandomSource::gaussian() {
    // Stateless, so a fresh distribution per call draws the same sequence.
    return boost::random::normal_distribution<double>()(engine_);
}

bool RandomSource::bernoulli(double p) { return uniform01() < p; }

RandomSource RandomSource::derive(std::uint64_t tag) const {
    return RandomSource(splitmix64(seed_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL)));
}

SamplingScheme parse_scheme(std::string_view name) {
    if (name == "surface") return SamplingScheme::surface;
    if (name == "interior") return SamplingScheme::interior;
    throw Error(ErrorCode::invalid_config, "unknown sampling scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(SamplingScheme scheme) {
    return scheme == SamplingScheme::surface ? "surface" : "interior";
}

DenseVector gaussian_vector(RandomSource& rng, std::size_t dim) {
    if (dim == 0) throw Error(ErrorCode::invalid_dimension, "gaussian_vector: dimension must be >= 1");
    DenseVector v(dim);
    for (auto& x : v) x = rng.gaussian();
    return v;
}

namespace {

constexpr int kMaxDirectionRedraws = 64;

// A Gaussian draw scaled to the requested length; direction is uniform.
DenseVector scaled_direction(RandomSource& rng, std::size_t dim, double length) {
    for (int attempt = 0; attempt < kMaxDirectionRedraws; ++attempt) {
        DenseVector v = gaussian_vector(rng, dim);
        const double n = norm2(v.span());
        if (n > 0.0) {
            const double k = length / n;
            for (auto& x : v) x *= k;
            return v;
        }
    }
    throw Error(ErrorCode::invalid_config, "scaled_direction: repeated zero Gaussian draws");
}

void check_radius(double radius) {
    if (!(radius >= 0.0) || !std::isfinite(radius))
        throw Error(ErrorCode::invalid_config, "radius must be finite and >= 0");
}

}  // namespace

DenseVector sample_sphere_surface(RandomSource& rng, std::size_t dim, double radius) {
    check_radius(radius);
    return scaled_direction(rng, dim, radius);
}

DenseVector sample_ball_interior(RandomSource& rng, std::size_t dim, double radius) {
    check_radius(radius);
    // Length first, then the direction.
    const double length = radius * std::pow(rng.uniform_open_closed(), 1.0 / static_cast<double>(dim));
    return scaled_direction(rng, dim, length);
}

DenseVector sample_noise(RandomSource& rng, std::size_t dim, double radius, SamplingScheme scheme) {
    return scheme == SamplingScheme::surface ? sample_sphere_surface(rng, dim, radius)
                                             : sample_ball_interior(rng, dim, radius);
}

}  // namespace tai
