#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fliplab/rng.hpp"
#include "fliplab/scalar.hpp"
#include "fliplab/vec.hpp"

namespace flip {

enum class SeqKind : std::uint8_t { A, B };

// The two radius sequences. Kind A: s_k = 2^-k (1+(K+k+1)^-alpha)/(1+(K+1)^-alpha),
// the fat system; kind B: s_k = 2^-k(1+beta), the thin one. s_0 = 1 and 2^k s_k
// strictly decreasing for both. Radii are evaluated from the closed form on
// every call; no tables.
template <class S>
struct CantorSeq {
    SeqKind kind = SeqKind::A;
    int K = 4;
    double alpha = 3.0;
    double beta = 7.0;

    static CantorSeq a(int K, double alpha) { return {SeqKind::A, K, alpha, 0.0}; }
    static CantorSeq b(double beta) { return {SeqKind::B, 0, 0.0, beta}; }

    S radius(int k) const {
        if (kind == SeqKind::B) {
            double kb = static_cast<double>(k) * (1.0 + beta);
            if (std::abs(kb - std::round(kb)) < 1e-9)
                return ldexp2(S(1), -static_cast<int>(std::round(kb)));
            return S(std::pow(2.0, -kb));
        }
        return ldexp2(inv_pow(K + k + 1) + S(1), -k) / (inv_pow(K + 1) + S(1));
    }

    // length of one generation-k gap interval (per frame piece), 1/2 s_k - s_{k+1}
    S gap_diam(int k) const { return ldexp2(radius(k), -1) - radius(k + 1); }

    // 1-D measure of U^1_k per unit cell: 2^k * 2 s_k
    S measure1(int k) const { return ldexp2(radius(k), k + 1); }

    // n-dimensional measure of U^n_k: 2^(nk) (2 s_k)^n
    S measure(int k, int n) const {
        return ldexp2(pow_int(ldexp2(radius(k), 1), n), n * k);
    }

    // limit measure of the Cantor set itself in dimension n
    S limit_measure(int n) const {
        if (kind == SeqKind::B) return S(0);
        return pow_int(ldexp2(S(1), 1) / (S(1) + inv_pow(K + 1)), n);
    }

  private:
    S inv_pow(int base) const {
        double ia;
        if (std::modf(alpha, &ia) == 0.0 && std::abs(alpha) < 60)
            return S(1) / pow_int(S(base), static_cast<int>(ia));
        return S(std::pow(static_cast<double>(base), -alpha));
    }
};

// A word is the letter sequence of nested cube choices; in one dimension the
// letters are +-1, in n dimensions each coordinate carries its own word.
using Word1 = std::vector<std::int8_t>;

template <class S>
S center1(const Word1& w, const CantorSeq<S>& seq, std::size_t len) {
    S z(0);
    for (std::size_t j = 0; j < len; ++j)
        z += ldexp2(seq.radius(static_cast<int>(j)), -1) * S(w[j]);
    return z;
}

template <class S>
S center1(const Word1& w, const CantorSeq<S>& seq) {
    return center1(w, seq, w.size());
}

// 1-D stratum location. For a gap at generation k the word has k+1 letters and
// names the frame Q'_w \ Q_w containing x; `outer` tells whether the piece
// runs toward the parent cube face (where the cutoff ramps to 0) or toward the
// parent center (the middle component, cutoff identically 1).
template <class S>
struct Loc1 {
    int gen = 0;          // gap generation; equals dmax when inside
    bool inside = false;  // survived all dmax generations
    Word1 word;           // frame word (gen+1 letters) or depth word (dmax letters)
    S frame_center = S(0);
    S rho = S(0);  // |x - frame_center|, gap only
    int side = 1;  // sign(x - frame_center), gap only
    bool outer = false;

    int survival(int dmax) const { return inside ? dmax : gen; }
};

template <class S>
Loc1<S> locate1(S x, const CantorSeq<S>& seq, int dmax) {
    if (abs(x) > S(1))
        throw std::domain_error("locate1: coordinate outside [-1,1]");
    Loc1<S> loc;
    S c(0);
    for (int j = 0; j < dmax; ++j) {
        std::int8_t child = (x >= c) ? std::int8_t(1) : std::int8_t(-1);
        S cc = c + ldexp2(seq.radius(j), -1) * S(child);
        S off = x - cc;
        if (abs(off) <= seq.radius(j + 1)) {  // ties on cube faces go to the cube
            loc.word.push_back(child);
            c = cc;
            continue;
        }
        loc.gen = j;
        loc.word.push_back(child);
        loc.frame_center = cc;
        loc.rho = abs(off);
        loc.side = (off >= S(0)) ? 1 : -1;
        loc.outer = (loc.side == child);
        // clamp against rounding at the outer frame face
        S half = ldexp2(seq.radius(j), -1);
        if (loc.rho > half) loc.rho = half;
        return loc;
    }
    loc.gen = dmax;
    loc.inside = true;
    loc.frame_center = c;
    return loc;
}

// Cutoff profile zeta_{K,k} (B side) / zeta~_{K,k} (A side): 1 on U^1_{k+1},
// 0 off U^1_k, linear on the components of the generation-k gap. Middle
// components touch U^1_{k+1} at both ends, so they sit at 1.
template <class S>
S eval_cutoff(const CantorSeq<S>& seq, int k, S s) {
    if (abs(s) > S(1)) return S(0);
    Loc1<S> loc = locate1(s, seq, k + 1);
    if (loc.inside) return S(1);
    if (loc.gen < k) return S(0);
    if (!loc.outer) return S(1);
    S half = ldexp2(seq.radius(k), -1);
    return (half - loc.rho) / (half - seq.radius(k + 1));
}

// 4-D stratum address within an m-plate cell: lattice translation, joint
// generation (min survival over coordinates), farthest axis at the containing
// frame. Ties in the farthest-axis distance break to the smallest axis index.
struct Loc4 {
    std::array<int, 3> cell{0, 0, 0};  // translation (2 n1, 2 n2, 2 n3, 0) / 2
    int gen = 0;
    bool inside = false;
    int farthest = 0;  // 0-based axis, gap only
    std::array<Loc1<double>, 4> coord;
    Vec4 reduced{};       // x = y - n
    Vec4 frame_center{};  // per-coordinate centers of the (gen+1)-prefix words
};

inline std::array<int, 3> plate_cell(const Vec4& y, int m) {
    std::array<int, 3> n{};
    for (int i = 0; i < 3; ++i) {
        double c = std::round(y[static_cast<std::size_t>(i)] / 2.0);
        n[static_cast<std::size_t>(i)] =
            std::clamp(static_cast<int>(c), -m, m);
    }
    return n;
}

inline Loc4 locate4(const Vec4& y, const CantorSeq<double>& seq, int m, int dmax) {
    Loc4 loc;
    loc.cell = plate_cell(y, m);
    loc.reduced = y;
    for (int i = 0; i < 3; ++i)
        loc.reduced[static_cast<std::size_t>(i)] -= 2.0 * loc.cell[static_cast<std::size_t>(i)];
    int gen = dmax;
    for (int i = 0; i < 4; ++i) {
        loc.coord[static_cast<std::size_t>(i)] =
            locate1(loc.reduced[static_cast<std::size_t>(i)], seq, dmax);
        gen = std::min(gen, loc.coord[static_cast<std::size_t>(i)].survival(dmax));
    }
    loc.gen = gen;
    loc.inside = (gen == dmax);
    std::size_t len = static_cast<std::size_t>(gen) + 1;
    if (!loc.inside) {
        double best = -1.0;
        for (int i = 0; i < 4; ++i) {
            const auto& c1 = loc.coord[static_cast<std::size_t>(i)];
            loc.frame_center[static_cast<std::size_t>(i)] = center1(c1.word, seq, len);
            double d = std::abs(loc.reduced[static_cast<std::size_t>(i)] -
                                loc.frame_center[static_cast<std::size_t>(i)]);
            if (d > best) {
                best = d;
                loc.farthest = i;
            }
        }
    } else {
        for (int i = 0; i < 4; ++i)
            loc.frame_center[static_cast<std::size_t>(i)] =
                center1(loc.coord[static_cast<std::size_t>(i)].word, seq);
    }
    return loc;
}

// --- sampling helpers ------------------------------------------------------

// Exact Cantor point with an eventually-constant word: depth-`len` prefix w,
// then the constant letter `tail` forever. Closed-form tail sum.
template <class S>
S cantor_point1(const Word1& w, int tail, const CantorSeq<S>& seq, int tail_terms = 220) {
    S z = center1(w, seq);
    S t(0);
    if (seq.kind == SeqKind::B) {
        // sum_{j>=len} s_j /2 = 2^{-len(1+beta)-1} / (1 - 2^{-(1+beta)})
        int lb = static_cast<int>((1.0 + seq.beta) * static_cast<double>(w.size()));
        t = ldexp2(S(1), -lb - 1) / (S(1) - ldexp2(S(1), -1 - static_cast<int>(seq.beta)));
    } else {
        for (int j = static_cast<int>(w.size()); j < static_cast<int>(w.size()) + tail_terms; ++j) {
            S term = ldexp2(seq.radius(j), -1);
            t += term;
            if (to_double(term) < 1e-40) break;
        }
    }
    return z + S(tail) * t;
}

inline Word1 random_word(Rng& rng, int len) {
    Word1 w(static_cast<std::size_t>(len));
    for (auto& c : w) c = static_cast<std::int8_t>(rng.sign());
    return w;
}

// Uniform sample from the 1-D generation-k gap U^1_k \ U^1_{k+1} of one cell.
inline double sample_gap1(Rng& rng, const CantorSeq<double>& seq, int k) {
    Word1 w = random_word(rng, k);
    double c = center1(w, seq);
    double half = 0.5 * seq.radius(k);
    double r1 = seq.radius(k + 1);
    double piece = half - r1;
    // four frame pieces of equal length (two per child)
    double u = rng.uniform(0.0, 4.0);
    int idx = std::min(3, static_cast<int>(u));
    double frac = u - idx;
    int child = (idx < 2) ? -1 : 1;
    int side = (idx % 2 == 0) ? -1 : 1;
    double cc = c + half * child;
    return cc + side * (r1 + frac * piece);
}

// Uniform sample from a depth-d surviving cube of one cell.
inline double sample_inside1(Rng& rng, const CantorSeq<double>& seq, int d,
                             double interior_margin = 0.0) {
    Word1 w = random_word(rng, d);
    double c = center1(w, seq);
    double r = seq.radius(d) * (1.0 - interior_margin);
    return c + rng.uniform(-r, r);
}

}  // namespace flip
