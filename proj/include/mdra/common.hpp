#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdra {

using cx = std::complex<double>;
using CVec = std::vector<cx>;

// Error categories. The CLI maps ConfigError/ShapeError/DataError/DomainError
// to exit code 2 and DivergenceError to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct DataError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
// Responsibility matrix rows must be stochastic (sum to 1 within 1e-9).
struct ResponsibilityError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };

// Row-major dense real matrix. Deliberately minimal; everything heavy in this
// library is matrix-free, so this only has to hold data and index it.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Row-major dense complex matrix.
struct CMat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    CVec data;

    CMat() = default;
    CMat(std::size_t r, std::size_t c, cx fill = cx(0.0, 0.0)) : rows(r), cols(c), data(r * c, fill) {}

    cx& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    cx operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Deterministic random source. Wraps mt19937_64 (whose output sequence is
// fixed by the standard) and derives all variates with explicit arithmetic,
// so streams are bit-identical across platforms and standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Multiply-shift keeps this portable.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(eng_()) * n) >> 64);
    }

    long uniform_int(long lo, long hi) {
        return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const CVec& v) {
    for (const cx& z : v)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

inline double squared_norm(const CVec& v) {
    double s = 0.0;
    for (const cx& z : v) s += std::norm(z);
    return s;
}

inline double norm2(const CVec& v) { return std::sqrt(squared_norm(v)); }

}  // namespace mdra
