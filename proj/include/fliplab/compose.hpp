#pragma once

#include "fliplab/reflect.hpp"

namespace flip {

// f1 = G o F^ o G~ on R_{m,eta}. On the depth-d surviving cubes the three
// truncated stages compose to an exact affine map, and the slopes cancel
// algebraically to the plain reflection (x1,x2,x3,-x4); the evaluator takes
// that branch directly, which is the depth-d truncation of the composition
// (the generic branch would push the offsets through scale r_d ~ 2^-8d where
// doubles carry nothing back).
struct F1Map {
    const DeformContext* deform = nullptr;
    const ReflectContext* reflect = nullptr;

    const Params& params() const { return deform->q; }

    Vec4 operator()(const Vec4& x) const {
        const Params& q = deform->q;
        bool in_core = std::abs(x[3]) <= 1.0;
        for (int i = 0; i < 3; ++i)
            in_core = in_core && std::abs(x[static_cast<std::size_t>(i)]) <= 2.0 * q.m + 1.0;
        if (in_core) {
            Loc4 loc = locate4(x, deform->A, q.m, q.depth);
            if (loc.inside) return {x[0], x[1], x[2], -x[3]};
        }
        return eval_stretch(*deform, (*reflect)(eval_squeeze(*deform, x)));
    }
};

inline F1Map make_f1(const Construction& c) { return F1Map{&c.deform, &c.reflect}; }

// --- finite-difference jets ---------------------------------------------------

struct Jet {
    Vec4 value{};
    Mat4 jacobian{};  // rows are D_i f
    double det = 0.0;
    double step = 0.0;
    double interface_dist = 0.0;  // distance to the nearest known stratum interface
    bool clean = false;           // stencil respected the 10h interface margin
};

// distance from x to the nearest stratum interface of the located cell
// structure: 1-D piece endpoints per coordinate, the farthest-axis switch
// surface, and the collar seams
inline double stratum_interface_distance(const CantorSeq<double>& seq, int m, int depth,
                                         const Vec4& x) {
    double best = 1e30;
    Loc4 loc = locate4(x, seq, m, depth);
    for (int i = 0; i < 4; ++i) {
        const auto& c1 = loc.coord[static_cast<std::size_t>(i)];
        if (c1.inside) {
            best = std::min(best, seq.radius(depth) - c1.rho);
            continue;
        }
        double half = 0.5 * seq.radius(c1.gen);
        best = std::min({best, c1.rho - seq.radius(c1.gen + 1), half - c1.rho});
    }
    if (!loc.inside) {
        double top = 0.0, next = 0.0;
        for (int i = 0; i < 4; ++i) {
            double d = std::abs(x[static_cast<std::size_t>(i)] -
                                loc.frame_center[static_cast<std::size_t>(i)]);
            if (d > top) {
                next = top;
                top = d;
            } else {
                next = std::max(next, d);
            }
        }
        best = std::min(best, 0.5 * (top - next));
    }
    // collar seams
    best = std::min(best, std::abs(std::abs(x[3]) - 1.0));
    for (int i = 0; i < 3; ++i)
        best = std::min(best, std::abs(std::abs(x[static_cast<std::size_t>(i)]) - (2.0 * m + 1.0)));
    return best;
}

template <class MapT>
Jet jet(const MapT& f, const CantorSeq<double>& seq, int m, int depth, const Vec4& x, double h,
        bool force = false) {
    Jet out;
    out.step = h;
    out.value = f(x);
    out.interface_dist = stratum_interface_distance(seq, m, depth, x);
    out.clean = out.interface_dist > 10.0 * h;
    if (!out.clean && !force) throw std::domain_error("jet: stencil too close to a stratum interface");
    for (int i = 0; i < 4; ++i) {
        Vec4 xp = x, xm = x;
        xp[static_cast<std::size_t>(i)] += h;
        xm[static_cast<std::size_t>(i)] -= h;
        Vec4 row = (1.0 / (xp[static_cast<std::size_t>(i)] - xm[static_cast<std::size_t>(i)])) *
                   (f(xp) - f(xm));
        out.jacobian[static_cast<std::size_t>(i)] = {row[0], row[1], row[2], row[3]};
    }
    out.det = det4(out.jacobian);
    return out;
}

// step scaled to the local stratum: a fraction of the gap piece (or cube
// radius) of the located generation
inline double default_jet_step(const CantorSeq<double>& seq, int m, int depth, const Vec4& x,
                               double frac = 1e-3) {
    Loc4 loc = locate4(x, seq, m, depth);
    if (loc.inside) return frac * seq.radius(depth);
    return frac * seq.gap_diam(loc.gen);
}

// Fourth-order central-difference jet (5-point stencil per axis). On the
// piecewise-smooth interiors this reaches ~1e-8 relative row accuracy, which
// the patchwork comparison needs: its two integrals differ at order r while
// plain central differences carry 1e-3-level noise.
template <class MapT>
Jet jet4(const MapT& f, const Vec4& x, double h) {
    Jet out;
    out.step = h;
    out.value = f(x);
    out.clean = true;
    for (int i = 0; i < 4; ++i) {
        Vec4 x1p = x, x1m = x, x2p = x, x2m = x;
        x1p[static_cast<std::size_t>(i)] += h;
        x1m[static_cast<std::size_t>(i)] -= h;
        x2p[static_cast<std::size_t>(i)] += 2.0 * h;
        x2m[static_cast<std::size_t>(i)] -= 2.0 * h;
        Vec4 row = (1.0 / (12.0 * h)) *
                   (8.0 * (f(x1p) - f(x1m)) - (f(x2p) - f(x2m)));
        out.jacobian[static_cast<std::size_t>(i)] = {row[0], row[1], row[2], row[3]};
    }
    out.det = det4(out.jacobian);
    return out;
}

// Jet with step refinement: shrink h until two successive Jacobians agree.
// The composed maps are piecewise smooth with Lipschitz kinks (the g-envelope
// ridges); a stencil straddling a kink mixes two linearizations, and
// refinement moves the stencil inside one piece for almost every base point.
// Returns false when the floor is hit before the stencil settles.
template <class MapT>
bool jet_refined(const MapT& f, const CantorSeq<double>& seq, int m, int depth, const Vec4& x,
                 double h0, Jet& out, double agree_rel = 1e-3, double h_floor = 1e-12) {
    out = jet(f, seq, m, depth, x, h0, true);
    for (int round = 0; round < 8; ++round) {
        double h = out.step / 4.0;
        if (h < h_floor) break;
        Jet cur = jet(f, seq, m, depth, x, h, true);
        double num = 0.0, den = 0.0;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                num = std::max(num, std::abs(cur.jacobian[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -
                                             out.jacobian[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
                den = std::max(den, std::abs(cur.jacobian[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
            }
        bool settled = num <= agree_rel * den;
        out = cur;
        if (settled) return true;
    }
    return false;
}

// --- the plate map -------------------------------------------------------------

// g_{K,m} on Q(0,1): J plates of thickness d_J stacked from x4 = -1, each
// carrying an affine conjugate of f1; identity on the leftover slab. The plate
// geometry follows the closed forms J < (2m+5)/(2+2 eta_p), d_J =
// (2+2 eta_p)/(2m+5), with eta_p = K^-alpha by default (the value that makes
// the scaled plate exactly fill R_{m,eta_p}; eta_p is configurable because the
// construction is also stated with eta = K^(-alpha-1)).
struct PlateMap {
    F1Map f1;
    int plates = 0;      // J
    double d_j = 0.0;    // plate thickness
    double eta_p = 0.0;  // the eta used by the conjugated f1
    double scale = 1.0;  // 2m+5

    static PlateMap make(const Construction& c) {
        PlateMap p;
        p.f1 = make_f1(c);
        p.eta_p = c.q.eta;
        p.scale = 2.0 * c.q.m + 5.0;
        p.d_j = (2.0 + 2.0 * p.eta_p) / p.scale;
        p.plates = static_cast<int>(std::ceil(p.scale / (2.0 + 2.0 * p.eta_p)) - 1);
        if (p.plates < 1) p.plates = 1;
        return p;
    }

    // plate index 1..J containing x4, or 0 for the leftover slab
    int plate_of(double x4) const {
        int i = static_cast<int>(std::floor((x4 + 1.0) / d_j)) + 1;
        return (i >= 1 && i <= plates) ? i : 0;
    }

    double plate_center(int i) const { return -1.0 + (i - 0.5) * d_j; }

    Vec4 operator()(const Vec4& x) const {
        for (int i = 0; i < 4; ++i)
            if (std::abs(x[static_cast<std::size_t>(i)]) > 1.0 + 1e-12)
                throw std::domain_error("plate map: point outside Q(0,1)");
        int i = plate_of(x[3]);
        if (i == 0) return x;
        double b = plate_center(i);
        Vec4 y = scale * (x - b * axis4(3));
        Vec4 z = f1(y);
        return (1.0 / scale) * z + b * axis4(3);
    }

    // membership in the negative-Jacobian set E (depth-d cube representation)
    bool in_negative_set(const Vec4& x) const {
        int i = plate_of(x[3]);
        if (i == 0) return false;
        Vec4 y = scale * (x - plate_center(i) * axis4(3));
        const Params& q = f1.params();
        bool in_core = std::abs(y[3]) <= 1.0;
        for (int j = 0; j < 3; ++j)
            in_core = in_core && std::abs(y[static_cast<std::size_t>(j)]) <= 2.0 * q.m + 1.0;
        if (!in_core) return false;
        return locate4(y, f1.deform->A, q.m, q.depth).inside;
    }

    // exact measure of the complement Q(0,1) \ E; `limit` switches between the
    // depth-d cube representation and the true Cantor limit measure
    double complement_measure(bool limit = false) const {
        const Params& q = f1.params();
        double cells = std::pow(2.0 * q.m + 1.0, 3.0);
        double m4 = limit ? f1.deform->A.limit_measure(4) : f1.deform->A.measure(q.depth, 4);
        double e_measure = plates * cells * m4 / std::pow(scale, 4.0);
        return 16.0 - e_measure;
    }
};

}  // namespace flip
