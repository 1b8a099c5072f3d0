#pragma once

// Internal allocation-free entry points for the unitary ops. The recurrent
// forward/backward passes call these once per time step, so pairings and trig
// coefficients are precomputed and all scratch comes from caller-owned
// buffers.

#include <cstdint>
#include <vector>

#include "mdra/unitary.hpp"

namespace mdra::detail {

inline constexpr std::uint32_t kInertSlot = 0xffffffffu;

// Pairing plus evaluated coefficients: slot i rotates indices (a[i], b[i])
// with cos/sin (c[i], s[i]) and, under cpx, the block phase e[i]; inert slots
// hold kInertSlot. diag holds the trailing phase layer e^{i q_j}.
struct UnitaryCoeffs {
    std::size_t L = 0;
    std::size_t layers = 0;
    std::size_t slots = 0;
    bool cpx = false;
    std::vector<std::uint32_t> a, b;
    std::vector<double> c, s;
    CVec e;     // per-slot block phase, empty unless cpx
    CVec diag;  // e^{i q_j}
};

UnitaryCoeffs make_coeffs(const UnitaryParams& p);

// In-place application of V (or its adjoint) to v.
void apply_inplace(const UnitaryCoeffs& u, CVec& v);
void apply_adjoint_inplace(const UnitaryCoeffs& u, CVec& v);

// Workspace for backward: per-layer input states, reused across calls.
struct UnitaryWorkspace {
    std::vector<CVec> states;
    CVec after;
};

// Backpropagates through w = V v. On entry g holds dLoss/dw; on exit it holds
// dLoss/dv. Angle gradients are accumulated into acc.
void backward_inplace(const UnitaryCoeffs& u, const CVec& v, CVec& g, UnitaryGrad& acc,
                      UnitaryWorkspace& ws);

}  // namespace mdra::detail
