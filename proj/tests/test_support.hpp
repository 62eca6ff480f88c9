#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "wskp/tensor.hpp"

namespace wskp::testing {

class Random {
public:
    explicit Random(std::uint64_t seed) : rng_(seed) {}
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    float uniform(float lo, float hi) { return lo + (hi - lo) * static_cast<float>(uniform()); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
    Tensor tensor(int h, int w, int c, float lo = -1.0f, float hi = 1.0f)
    {
        Tensor t(h, w, c);
        for (float& v : t.values()) {
            v = uniform(lo, hi);
        }
        return t;
    }
    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.raw()[i]) - b.raw()[i]));
    }
    return m;
}

// Sum of w * t in double: a random linear functional of an output.
inline double dot(const Tensor& t, const Tensor& w)
{
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        s += static_cast<double>(t.raw()[i]) * w.raw()[i];
    }
    return s;
}

// Central differences of f with respect to every entry of `x`, h = 1e-3.
// Divides by the step actually representable in float.
inline std::vector<double> numeric_gradient(std::span<float> x, const std::function<double()>& f,
                                            float h = 1e-3f)
{
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float keep = x[i];
        const float up = keep + h;
        const float dn = keep - h;
        x[i] = up;
        const double fp = f();
        x[i] = dn;
        const double fm = f();
        x[i] = keep;
        g[i] = (fp - fm) / (static_cast<double>(up) - static_cast<double>(dn));
    }
    return g;
}

// ||a - n|| / ||n||, with an absolute floor for near-zero gradients.
inline double relative_error(std::span<const float> analytic, std::span<const double> numeric)
{
    double diff = 0.0;
    double norm = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
        const double d = analytic[i] - numeric[i];
        diff += d * d;
        norm += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-8);
}

} // namespace wskp::testing
