#include "mdra/signals.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mdra {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void check_periodic(const PeriodicSpec& s) {
    if (s.n_per_class < 1) throw ConfigError("gen_periodic: n_per_class must be >= 1");
    if (s.base_length < 4) throw ConfigError("gen_periodic: base_length must be >= 4");
    if (s.periods.empty()) throw ConfigError("gen_periodic: periods must be nonempty");
    for (int c : s.periods)
        if (c < 1) throw ConfigError("gen_periodic: periods must be positive");
    if (!(s.amplitude_lo > 0.0) || s.amplitude_hi < s.amplitude_lo)
        throw ConfigError("gen_periodic: need 0 < amplitude_lo <= amplitude_hi");
    if (s.noise_level < 0.0 || s.max_phase_shift < 0.0 || s.max_phase_shift > 1.0 ||
        s.max_length_shortening < 0.0 || s.max_length_shortening > 1.0)
        throw ConfigError("gen_periodic: fractions out of range");
}

}  // namespace

Dataset gen_periodic(const PeriodicSpec& spec) {
    check_periodic(spec);
    Rng rng(spec.seed);
    Dataset ds;
    ds.reserve(spec.periods.size() * spec.n_per_class);

    const double base = static_cast<double>(spec.base_length);
    const long t_min = static_cast<long>(
        std::ceil((1.0 - spec.max_length_shortening) * base));
    int id = 0;
    for (int c : spec.periods) {
        const double period = base / static_cast<double>(c);
        for (std::size_t i = 0; i < spec.n_per_class; ++i) {
            const double amp = rng.uniform(spec.amplitude_lo, spec.amplitude_hi);
            const double shift = rng.uniform(0.0, spec.max_phase_shift * period);
            const long len = rng.uniform_int(std::max<long>(t_min, 1),
                                             static_cast<long>(spec.base_length));
            TimeSeries ts;
            ts.id = id++;
            ts.dim = 1;
            ts.label = std::to_string(c);
            ts.values.resize(static_cast<std::size_t>(len));
            for (long t = 0; t < len; ++t) {
                const double clean =
                    amp * std::sin(two_pi * c * (static_cast<double>(t) + shift) / base);
                ts.values[static_cast<std::size_t>(t)] =
                    clean + rng.uniform(-spec.noise_level, spec.noise_level);
            }
            ds.push_back(std::move(ts));
        }
    }
    return ds;
}

Dataset gen_complex_periodic(const ComplexPeriodicSpec& spec) {
    if (spec.n_per_type < 1) throw ConfigError("gen_complex_periodic: n_per_type must be >= 1");
    if (spec.length < 2) throw ConfigError("gen_complex_periodic: length must be >= 2");
    Rng rng(spec.seed);
    Dataset ds;
    ds.reserve(2 * spec.n_per_type);

    struct Type {
        const char* label;
        double w1, w2;
    };
    const Type types[2] = {{"A", spec.omega_a1, spec.omega_a2},
                           {"B", spec.omega_b1, spec.omega_b2}};
    int id = 0;
    for (const Type& ty : types) {
        for (std::size_t i = 0; i < spec.n_per_type; ++i) {
            const double th1 = rng.uniform(0.0, two_pi);
            const double th2 = rng.uniform(0.0, two_pi);
            TimeSeries ts;
            ts.id = id++;
            ts.dim = 1;
            ts.label = ty.label;
            ts.values.resize(spec.length);
            for (std::size_t t = 0; t < spec.length; ++t) {
                const double a1 = th1 + ty.w1 * static_cast<double>(t);
                const double a2 = th2 + ty.w2 * static_cast<double>(t);
                // h^t = (e^{i a1}, e^{i a2}) in C^2, read out against (1,1,1,1)
                // on the (Re, Im, Re, Im) decomposition.
                ts.values[t] = std::cos(a1) + std::sin(a1) + std::cos(a2) + std::sin(a2);
            }
            ds.push_back(std::move(ts));
        }
    }
    return ds;
}

Dataset sliding_window(const Mat& raw, const WindowSpec& spec) {
    if (spec.window < 2) throw ConfigError("sliding_window: window must be >= 2");
    if (spec.slide < 1 || spec.slide > spec.window)
        throw ConfigError("sliding_window: need 1 <= slide <= window");
    if (raw.cols < 1) throw DataError("sliding_window: no channels");
    if (spec.activity_channel >= raw.cols)
        throw ConfigError("sliding_window: activity_channel out of range");
    if (raw.rows < spec.window + 1)
        throw DataError("sliding_window: input has " + std::to_string(raw.rows) +
                        " rows, need at least window+1 = " + std::to_string(spec.window + 1));
    if (!all_finite(raw.data)) throw DataError("sliding_window: non-finite input");

    // First difference along time.
    Mat diff(raw.rows - 1, raw.cols);
    for (std::size_t t = 0; t + 1 < raw.rows; ++t)
        for (std::size_t d = 0; d < raw.cols; ++d) diff(t, d) = raw(t + 1, d) - raw(t, d);

    Dataset ds;
    int id = 0;
    for (std::size_t start = 0; start + spec.window <= diff.rows; start += spec.slide) {
        double max_abs = 0.0;
        for (std::size_t t = 0; t < spec.window; ++t)
            max_abs = std::max(max_abs, std::abs(diff(start + t, spec.activity_channel)));
        if (max_abs < spec.activity_threshold) continue;
        TimeSeries ts;
        ts.id = id++;
        ts.dim = raw.cols;
        ts.values.resize(spec.window * raw.cols);
        for (std::size_t t = 0; t < spec.window; ++t)
            for (std::size_t d = 0; d < raw.cols; ++d) ts.values[t * raw.cols + d] = diff(start + t, d);
        ds.push_back(std::move(ts));
    }
    return ds;
}

}  // namespace mdra
