#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mdra/common.hpp"

namespace mdra {

/// Parameters of a factorized L x L unitary matrix:
///
///     V = P * R_{capacity-1} * ... * R_1 * R_0
///
/// where each R_l applies independent 2x2 planar rotations to disjoint index
/// pairs and P is a diagonal layer of unit phases e^{i*phase_angles[j]}.
/// Two pairing layouts exist: the sliding "tunable" layout alternates
/// (0,1),(2,3),... with (1,2),(3,4),... between layers, and the hierarchical
/// "fft" layout pairs indices at strides 1,2,4,... for ceil(log2 L) layers
/// (when fft_style is set, the requested capacity is ignored).
///
/// Angle storage is uniform: every layer owns floor(L/2) rotation slots even
/// if its pairing uses fewer; unused slots are inert (no effect, zero
/// gradient). With cpx set, every rotation block carries an extra phase in
/// its first row, stored in rotation_phases (same layout as rotation_angles).
struct UnitaryParams {
    std::size_t L = 0;
    std::size_t capacity = 0;  // number of rotation layers actually stored
    bool fft_style = false;
    bool cpx = false;
    std::vector<double> rotation_angles;  // capacity * floor(L/2)
    std::vector<double> rotation_phases;  // same length when cpx, else empty
    std::vector<double> phase_angles;     // L
};

// Gradients w.r.t. every angle in a UnitaryParams, same layout.
struct UnitaryGrad {
    std::vector<double> rotation_angles;
    std::vector<double> rotation_phases;
    std::vector<double> phase_angles;
};

struct UnitaryBackwardResult {
    UnitaryGrad grad;
    CVec grad_input;
};

// Number of rotation layers for a configuration (fft: ceil(log2 L)).
std::size_t rotation_layer_count(std::size_t L, std::size_t capacity, bool fft_style);

// Index pairs rotated by one layer. Pair j of the layer consumes angle slot j.
std::vector<std::pair<std::size_t, std::size_t>> rotation_pairs(std::size_t L, std::size_t layer,
                                                                bool fft_style);

// Fresh parameters with all angles drawn uniformly from [-pi, pi).
UnitaryParams build_unitary_params(std::size_t L, std::size_t capacity, bool fft_style, Rng& rng,
                                   bool cpx = false);
UnitaryParams build_unitary_params(std::size_t L, std::size_t capacity, bool fft_style,
                                   std::uint64_t rng_seed, bool cpx = false);

/// Applies V to v (matrix-free, layer by layer). Preserves the 2-norm.
CVec apply_unitary(const UnitaryParams& p, const CVec& v);

/// Applies the exact adjoint V* (inverse) of apply_unitary.
CVec apply_unitary_adjoint(const UnitaryParams& p, const CVec& v);

/// Backpropagates through w = V v. `upstream` holds dLoss/dw in the
/// pairs-of-reals convention: Re(upstream[j]) = dLoss/dRe(w[j]) and
/// Im(upstream[j]) = dLoss/dIm(w[j]). Returns dLoss/dAngles (real partials)
/// and dLoss/dv in the same convention (which equals V* upstream).
UnitaryBackwardResult unitary_backward(const UnitaryParams& p, const CVec& v, const CVec& upstream);

// Zero-initialized gradient with shapes matching p.
UnitaryGrad zero_grad(const UnitaryParams& p);

}  // namespace mdra
