#pragma once

#include <cstdint>
#include <vector>

#include "mdra/common.hpp"
#include "mdra/rnn_ae.hpp"

namespace mdra {

// Synthetic periodic signals: per class c (periods within base_length),
//   x^t = a sin(2 pi c (t + phi) / base_length) + eps_t
// with a ~ U[amplitude_lo, amplitude_hi], phi ~ U[0, max_phase_shift * period),
// eps_t ~ U[-noise_level, noise_level], truncated to a random length
// T ~ U{ceil((1 - max_length_shortening) * base_length), ..., base_length}.
struct PeriodicSpec {
    std::size_t n_per_class = 100;
    std::size_t base_length = 64;
    std::vector<int> periods = {2, 4, 8};
    double max_phase_shift = 1.0;  // fraction of one period
    double amplitude_lo = 0.5;
    double amplitude_hi = 1.0;
    double noise_level = 0.02;  // fraction of the maximum amplitude
    double max_length_shortening = 0.8;  // fraction of base_length
    std::uint64_t seed = 0;
};

// Sums of two unit phasors started at random angles and rotated by fixed
// per-type angular rates, projected onto (1,1,1,1):
//   x^t = cos(th1 + w1 t) + sin(th1 + w1 t) + cos(th2 + w2 t) + sin(th2 + w2 t).
struct ComplexPeriodicSpec {
    std::size_t n_per_type = 5000;
    std::size_t length = 32;
    double omega_a1 = 55.0;
    double omega_a2 = 20.0;
    double omega_b1 = 50.0;
    double omega_b2 = 25.0;
    std::uint64_t seed = 0;
};

// Sliding-window ingestion: first-difference the raw channels, slice windows,
// keep a window iff the max |difference| in activity_channel reaches
// activity_threshold. sampling_pitch is carried as metadata only.
struct WindowSpec {
    std::size_t window = 512;
    std::size_t slide = 8;
    double sampling_pitch = 0.1;  // seconds
    double activity_threshold = 0.0;
    std::size_t activity_channel = 0;
};

// Labels are the period counts as strings ("2", "4", "8"). D = 1.
Dataset gen_periodic(const PeriodicSpec& spec);

// Labels are "A" and "B". D = 1.
Dataset gen_complex_periodic(const ComplexPeriodicSpec& spec);

// Windows over the first-differenced raw matrix (T x D, so differences have
// T-1 rows). Requires raw.rows >= window + 1.
Dataset sliding_window(const Mat& raw, const WindowSpec& spec);

}  // namespace mdra
