#pragma once

// Reference implementations the tests compare the library against. They are
// written for clarity, not speed, and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "tai/adapter.hpp"
#include "tai/numkit.hpp"

namespace oracle {

// AP by counting: the rank of sample i is one plus the number of samples that
// sort ahead of it (higher score, or equal score and lower index).
inline double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& truths) {
    const std::size_t n = scores.size();
    auto ahead = [&](std::size_t j, std::size_t i) {
        return scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
    };
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (truths[i] != 1) continue;
        ++positives;
        std::size_t rank = 1, hits = 1;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !ahead(j, i)) continue;
            ++rank;
            if (truths[j] == 1) ++hits;
        }
        sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
    return positives ? sum / static_cast<double>(positives) : -1.0;
}

inline tai::DenseMatrix naive_matmul(const tai::DenseMatrix& a, const tai::DenseMatrix& b) {
    tai::DenseMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

inline tai::DenseMatrix naive_transpose(const tai::DenseMatrix& a) {
    tai::DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

// Straight-line forward pass and loss, no dropout, accumulated in long double
// so finite differences of it carry less roundoff than the code under test.
inline long double loss_of(const tai::AdapterParams& p, const tai::DenseMatrix& x, const tai::DenseMatrix& y) {
    long double total = 0.0L;
    for (std::size_t s = 0; s < x.rows(); ++s) {
        std::vector<long double> h(x.row(s).begin(), x.row(s).end());
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            const auto& layer = p.layers[l];
            std::vector<long double> next(layer.weight.rows());
            for (std::size_t o = 0; o < next.size(); ++o) {
                long double z = layer.bias[o];
                for (std::size_t i = 0; i < h.size(); ++i) z += layer.weight(o, i) * h[i];
                const bool hidden = l + 1 < p.layers.size() || p.shape.activate_output;
                next[o] = hidden ? std::max(z, 0.0L) : z;
            }
            h = std::move(next);
        }
        long double l = 0.0L;
        for (std::size_t j = 0; j < h.size(); ++j) {
            long double q = 1.0L / (1.0L + std::exp(-h[j]));
            q = std::clamp(q, 1e-7L, 1.0L - 1e-7L);
            l -= y(s, j) * std::log(q) + (1.0L - y(s, j)) * std::log(1.0L - q);
        }
        total += l / static_cast<long double>(h.size());
    }
    return total / static_cast<long double>(x.rows());
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// Central differences over every weight and bias.
inline GradCheck check_gradients(const tai::AdapterParams& params, const tai::Gradients& analytic,
                                 const tai::DenseMatrix& x, const tai::DenseMatrix& y, double h = 1e-6) {
    GradCheck out;
    tai::AdapterParams p = params;
    auto compare = [&](double& slot, double a) {
        const double saved = slot;
        slot = saved + h;
        const long double up = loss_of(p, x, y);
        slot = saved - h;
        const long double down = loss_of(p, x, y);
        slot = saved;
        // Divide by the step actually taken after rounding to double.
        const double numeric = static_cast<double>((up - down) / ((static_cast<long double>(saved) + h) -
                                                                  (static_cast<long double>(saved) - h)));
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(a - numeric) / denom);
        ++out.checked;
    };
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& layer = p.layers[l];
        for (std::size_t r = 0; r < layer.weight.rows(); ++r)
            for (std::size_t c = 0; c < layer.weight.cols(); ++c) compare(layer.weight(r, c), analytic[l].weight(r, c));
        for (std::size_t b = 0; b < layer.bias.size(); ++b) compare(layer.bias[b], analytic[l].bias[b]);
    }
    return out;
}

// Regularized upper incomplete gamma Q(a, x), for chi-square p-values.
inline double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    if (x < a + 1.0) {
        double sum = 1.0 / a, term = sum;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, f = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * f;
}

inline double chi_square_p(const std::vector<std::size_t>& counts, double expected) {
    double stat = 0.0;
    for (auto c : counts) stat += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    return gamma_q(0.5 * static_cast<double>(counts.size() - 1), 0.5 * stat);
}

}  // namespace oracle
