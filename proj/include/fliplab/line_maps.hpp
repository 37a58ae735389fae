#pragma once

#include "fliplab/cantor.hpp"

namespace flip {

enum class MapDir : std::uint8_t { AtoB, BtoA };

// 1-D squeeze q_K (A -> B) and stretch t_K = q_K^{-1} (B -> A), truncated at
// depth d: piecewise linear on each generation-k gap piece (k < d) sending it
// onto the corresponding piece of the other system, and linear from each
// depth-d surviving cube onto its partner cube.
template <class S>
struct LineMap {
    CantorSeq<S> src, dst;
    int depth = 8;

    static LineMap make(MapDir dir, const CantorSeq<S>& a, const CantorSeq<S>& b, int depth) {
        if (dir == MapDir::AtoB) return {a, b, depth};
        return {b, a, depth};
    }

    S operator()(S x) const {
        Loc1<S> loc = locate1(x, src, depth);
        if (loc.inside) {
            S zt = center1(loc.word, dst);
            return zt + (x - loc.frame_center) * dst.radius(depth) / src.radius(depth);
        }
        int k = loc.gen;
        S zt = center1(loc.word, dst, loc.word.size());
        S rin = src.radius(k + 1);
        S rout = dst.radius(k + 1);
        S rho = rout + (loc.rho - rin) * dst.gap_diam(k) / src.gap_diam(k);
        return zt + S(loc.side) * rho;
    }
};

// slope of the piecewise-linear map on a generation-k gap piece:
// (1/2 r_k - r_{k+1}) / (1/2 r~_k(K) - r~_{k+1}(K)) for A->B, reciprocal for B->A.
template <class S>
S slope_on_gap(const CantorSeq<S>& a, const CantorSeq<S>& b, int k, MapDir dir) {
    if (dir == MapDir::AtoB) return b.gap_diam(k) / a.gap_diam(k);
    return a.gap_diam(k) / b.gap_diam(k);
}

}  // namespace flip
