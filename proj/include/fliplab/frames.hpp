#pragma once

#include <array>

#include "fliplab/cantor.hpp"
#include "fliplab/line_maps.hpp"

namespace flip {

// Frame-to-frame homeomorphism [J_K^n]_l / [H_K^n]_l between the two nested
// cube systems, truncated at generation l. On each generation-k frame
// Q'_w \ Q_w (k < l) it is the sup-norm radial map about the paired centers:
// the direction (x - z)/|x - z|_inf is kept and the radial coordinate is
// rescaled linearly from [s_{k+1}, 1/2 s_k] to the partner interval. On the
// surviving generation-l cubes it is the linear cube-onto-cube map. With
// n = 1 this reduces exactly to the line maps q_K / t_K.
template <int N, class S>
struct FrameMap {
    CantorSeq<S> src, dst;
    int trunc = 8;

    using Pt = std::array<S, N>;

    static FrameMap make(MapDir dir, const CantorSeq<S>& a, const CantorSeq<S>& b, int l) {
        if (dir == MapDir::AtoB) return {a, b, l};
        return {b, a, l};
    }

    Pt operator()(const Pt& x) const {
        for (const S& c : x)
            if (abs(c) > S(1)) throw std::domain_error("FrameMap: point outside [-1,1]^n");
        Pt cs{}, ct{};  // running source/target centers
        for (int j = 0; j < trunc; ++j) {
            S half_s = ldexp2(src.radius(j), -1);
            S half_t = ldexp2(dst.radius(j), -1);
            Pt ccs, cct;
            S rho(0);
            for (int i = 0; i < N; ++i) {
                std::int8_t child = (x[i] >= cs[i]) ? std::int8_t(1) : std::int8_t(-1);
                ccs[i] = cs[i] + half_s * S(child);
                cct[i] = ct[i] + half_t * S(child);
                S d = abs(x[i] - ccs[i]);
                if (d > rho) rho = d;
            }
            if (rho <= src.radius(j + 1)) {  // inside the joint child cube
                cs = ccs;
                ct = cct;
                continue;
            }
            if (rho > half_s) rho = half_s;
            S rho2 = dst.radius(j + 1) +
                     (rho - src.radius(j + 1)) * dst.gap_diam(j) / src.gap_diam(j);
            Pt y;
            for (int i = 0; i < N; ++i) y[i] = cct[i] + (x[i] - ccs[i]) * (rho2 / rho);
            return y;
        }
        S ratio = dst.radius(trunc) / src.radius(trunc);
        Pt y;
        for (int i = 0; i < N; ++i) y[i] = ct[i] + (x[i] - cs[i]) * ratio;
        return y;
    }
};

// Coordinate embeddings T_i / T^i: [F^{3,i}]_l acts on the three coordinates
// other than i and writes 0 into slot i.
template <class S>
std::array<S, 4> embed_apply3(const FrameMap<3, S>& f3, const std::array<S, 4>& x, int axis) {
    std::array<S, 3> t{};
    int j = 0;
    for (int i = 0; i < 4; ++i)
        if (i != axis) t[j++] = x[i];
    std::array<S, 3> y = f3(t);
    std::array<S, 4> out{};
    j = 0;
    for (int i = 0; i < 4; ++i) out[i] = (i == axis) ? S(0) : y[j++];
    return out;
}

}  // namespace flip
