#pragma once

#include <stdexcept>
#include <string>

#include "fliplab/frames.hpp"
#include "fliplab/params.hpp"

namespace flip {

// Squeeze G~_{K,N,m,eta}: R_{m,eta} -> R_{m,13} and stretch G_{K,N,m,eta}:
// R_{m,13} -> R_{m,eta}. Interior plate cells blend truncated frame-to-frame
// maps on the farthest-axis stratum; the collars interpolate to the identity
// on the outer boundary.
//
// On a generation-k stratum the blend pairs the truncations (4k+2N, 4k+4+2N)
// for the squeeze and (3k+N, 3k+3+N) for the stretch, with the cutoff weight
// attached so that the deeper truncation applies at the child-cube faces:
// l2(k) = l1(k+1), which is what makes consecutive generations and the x4
// collar (which carries the index 2N resp. N) agree at their interfaces.
struct DeformContext {
    Params q;
    CantorSeq<double> A, B;

    explicit DeformContext(const Params& p) : q(p), A(p.seq_a()), B(p.seq_b()) {}

    double outer3() const { return 2.0 * q.m + 5.0; }
    double inner3() const { return 2.0 * q.m + 1.0; }
};

enum class DeformRegion : std::uint8_t { Interior, TopA, TopB, Side, Corner };

struct RegionTag {
    DeformRegion region;
    int axis;  // the out-of-core axis for Side
};

inline RegionTag classify_deform(const DeformContext& c, const Vec4& y, bool squeeze) {
    double slab = squeeze ? 1.0 + c.q.eta : 14.0;
    double tol = 1e-12;
    for (int i = 0; i < 3; ++i)
        if (std::abs(y[static_cast<std::size_t>(i)]) > c.outer3() + tol)
            throw std::domain_error("deform: point outside the box");
    if (std::abs(y[3]) > slab + tol) throw std::domain_error("deform: point outside the slab");
    int out_axis = -1;
    int out_count = 0;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(y[static_cast<std::size_t>(i)]) > c.inner3()) {
            ++out_count;
            out_axis = i;
        }
    }
    bool out4 = std::abs(y[3]) > 1.0;
    if (out_count == 0 && !out4) return {DeformRegion::Interior, -1};
    if (out_count == 0) {
        if (squeeze)
            return {std::abs(y[3]) <= 1.0 + 0.5 * c.q.eta ? DeformRegion::TopA : DeformRegion::TopB,
                    -1};
        return {DeformRegion::TopA, -1};  // the stretch top handles all of |x4| in (1,14]
    }
    if (out_count == 1 && !out4) return {DeformRegion::Side, out_axis};
    return {DeformRegion::Corner, -1};
}

namespace detail {

inline Vec4 reduce_cell(const DeformContext& c, const Vec4& y, std::array<int, 3>& n,
                        int keep_axis = -1) {
    n = plate_cell(y, c.q.m);
    if (keep_axis >= 0) n[static_cast<std::size_t>(keep_axis)] = 0;
    Vec4 x = y;
    for (int i = 0; i < 3; ++i) x[static_cast<std::size_t>(i)] -= 2.0 * n[static_cast<std::size_t>(i)];
    return x;
}

inline Vec4 add_cell(Vec4 v, const std::array<int, 3>& n) {
    for (int i = 0; i < 3; ++i) v[static_cast<std::size_t>(i)] += 2.0 * n[static_cast<std::size_t>(i)];
    return v;
}

// interior blend on one plate cell; src/dst are the located/system pair
inline Vec4 interior_blend(const DeformContext& c, const Vec4& x, bool squeeze) {
    const CantorSeq<double>& src = squeeze ? c.A : c.B;
    const CantorSeq<double>& dst = squeeze ? c.B : c.A;
    Loc4 loc = locate4(x, src, 0, c.q.depth);
    if (loc.inside) {
        // coordinatewise line map: linear from the depth-d cube onto its partner
        double ratio = dst.radius(c.q.depth) / src.radius(c.q.depth);
        Vec4 out{};
        for (int i = 0; i < 4; ++i) {
            const auto& c1 = loc.coord[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(i)] =
                center1(c1.word, dst) +
                (x[static_cast<std::size_t>(i)] - c1.frame_center) * ratio;
        }
        return out;
    }
    int k = loc.gen;
    int i = loc.farthest;
    int l1 = squeeze ? 4 * k + 2 * c.q.N : 3 * k + c.q.N;
    int l2 = l1 + (squeeze ? 4 : 3);
    const auto& ci = loc.coord[static_cast<std::size_t>(i)];
    double zeta;
    if (!ci.outer) {
        zeta = 1.0;
    } else {
        double half = 0.5 * src.radius(k);
        zeta = (half - ci.rho) / (half - src.radius(k + 1));
    }
    FrameMap<3, double> f1{src, dst, l1}, f2{src, dst, l2};
    std::array<double, 4> xa{x[0], x[1], x[2], x[3]};
    auto j1 = embed_apply3(f1, xa, i);
    auto j2 = embed_apply3(f2, xa, i);
    LineMap<double> line{src, dst, c.q.depth};
    double li = line(x[static_cast<std::size_t>(i)]);
    Vec4 out{};
    for (int a = 0; a < 4; ++a)
        out[static_cast<std::size_t>(a)] =
            (1.0 - zeta) * j1[static_cast<std::size_t>(a)] + zeta * j2[static_cast<std::size_t>(a)];
    out[static_cast<std::size_t>(i)] += li;
    return out;
}

inline std::array<double, 4> embed3(const DeformContext& c, const Vec4& x, int axis, bool squeeze,
                                    int trunc) {
    const CantorSeq<double>& src = squeeze ? c.A : c.B;
    const CantorSeq<double>& dst = squeeze ? c.B : c.A;
    FrameMap<3, double> f{src, dst, trunc};
    std::array<double, 4> xa{x[0], x[1], x[2], x[3]};
    return embed_apply3(f, xa, axis);
}

}  // namespace detail

inline Vec4 eval_squeeze_region(const DeformContext& c, const Vec4& y, RegionTag tag) {
    const double eta = c.q.eta;
    std::array<int, 3> n{};
    switch (tag.region) {
        case DeformRegion::Interior: {
            Vec4 x = detail::reduce_cell(c, y, n);
            return detail::add_cell(detail::interior_blend(c, x, true), n);
        }
        case DeformRegion::TopA: {
            Vec4 x = detail::reduce_cell(c, y, n);
            double s = (y[3] >= 0.0) ? 1.0 : -1.0;
            Vec4 out = detail::embed3(c, x, 3, true, 2 * c.q.N);
            out[3] = s + (26.0 - eta) / eta * (y[3] - s);
            return detail::add_cell(out, n);
        }
        case DeformRegion::TopB: {
            Vec4 x = detail::reduce_cell(c, y, n);
            double s = (y[3] >= 0.0) ? 1.0 : -1.0;
            double w_id = 2.0 / eta * (std::abs(y[3]) - 1.0 - 0.5 * eta);
            double w_j = 2.0 / eta * (1.0 + eta - std::abs(y[3]));
            Vec4 jv = detail::embed3(c, x, 3, true, 2 * c.q.N);
            Vec4 out{};
            for (int i = 0; i < 3; ++i)
                out[static_cast<std::size_t>(i)] = w_id * x[static_cast<std::size_t>(i)] +
                                                   w_j * jv[static_cast<std::size_t>(i)];
            out[3] = y[3] + s * (13.0 - eta);
            return detail::add_cell(out, n);
        }
        case DeformRegion::Side: {
            int i = tag.axis;
            Vec4 x = detail::reduce_cell(c, y, n, i);
            double a = std::abs(y[static_cast<std::size_t>(i)]);
            Vec4 jv = detail::embed3(c, x, i, true, 2 * c.q.N);
            if (a <= 2.0 * c.q.m + 4.0) {
                Vec4 out = jv;
                out[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
                return detail::add_cell(out, n);
            }
            double w_id = a - (2.0 * c.q.m + 4.0);
            double w_j = (2.0 * c.q.m + 5.0) - a;
            Vec4 out{};
            for (int a2 = 0; a2 < 4; ++a2)
                out[static_cast<std::size_t>(a2)] = w_id * x[static_cast<std::size_t>(a2)] +
                                                    w_j * jv[static_cast<std::size_t>(a2)];
            out[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
            return detail::add_cell(out, n);
        }
        case DeformRegion::Corner: {
            // Fourth-coordinate profile interpolated in the radial position of
            // the out-of-core axes: the two-piece top-collar profile at the
            // inner seam (|y_i| = 2m+1, matching TopA/TopB) blending into the
            // single linear slope 13/eta at the outer face (|y_i| = 2m+5),
            // whose inverse is exactly the stretch corner profile. That is
            // what makes stretch(squeeze) the identity on the side faces of
            // the box where |x4| > 1.
            Vec4 out = y;
            double a = std::abs(y[3]);
            if (a <= 1.0) return out;
            double s = (y[3] >= 0.0) ? 1.0 : -1.0;
            double top = (a <= 1.0 + 0.5 * eta) ? s + (26.0 - eta) / eta * (y[3] - s)
                                                : y[3] + s * (13.0 - eta);
            double lin = s + 13.0 / eta * (y[3] - s);
            double r3 = 0.0;
            for (int i = 0; i < 3; ++i) r3 = std::max(r3, std::abs(y[static_cast<std::size_t>(i)]));
            double sigma = std::clamp((r3 - (2.0 * c.q.m + 1.0)) / 4.0, 0.0, 1.0);
            out[3] = (1.0 - sigma) * top + sigma * lin;
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

inline Vec4 eval_stretch_region(const DeformContext& c, const Vec4& y, RegionTag tag) {
    const double eta = c.q.eta;
    std::array<int, 3> n{};
    switch (tag.region) {
        case DeformRegion::Interior: {
            Vec4 x = detail::reduce_cell(c, y, n);
            return detail::add_cell(detail::interior_blend(c, x, false), n);
        }
        case DeformRegion::TopA:
        case DeformRegion::TopB: {
            Vec4 x = detail::reduce_cell(c, y, n);
            double a = std::abs(y[3]);
            double s = (y[3] >= 0.0) ? 1.0 : -1.0;
            double x4 = s + eta / 13.0 * (y[3] - s);
            Vec4 out{};
            if (a <= 1.5) {
                out = detail::embed3(c, x, 3, false, c.q.N);
            } else if (a <= 2.0) {
                Vec4 hv = detail::embed3(c, x, 3, false, c.q.N);
                double w_h = 2.0 * (2.0 - a);
                double w_id = 2.0 * (a - 1.5);
                for (int i = 0; i < 3; ++i)
                    out[static_cast<std::size_t>(i)] = w_h * hv[static_cast<std::size_t>(i)] +
                                                       w_id * x[static_cast<std::size_t>(i)];
            } else {
                for (int i = 0; i < 3; ++i) out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
            }
            out[3] = x4;
            return detail::add_cell(out, n);
        }
        case DeformRegion::Side: {
            int i = tag.axis;
            double a = std::abs(y[static_cast<std::size_t>(i)]);
            if (a >= 2.0 * c.q.m + 2.0) return y;
            Vec4 x = detail::reduce_cell(c, y, n, i);
            Vec4 hv = detail::embed3(c, x, i, false, c.q.N);
            double w_id = a - (2.0 * c.q.m + 1.0);
            double w_h = (2.0 * c.q.m + 2.0) - a;
            Vec4 out{};
            for (int a2 = 0; a2 < 4; ++a2)
                out[static_cast<std::size_t>(a2)] = w_id * x[static_cast<std::size_t>(a2)] +
                                                    w_h * hv[static_cast<std::size_t>(a2)];
            out[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
            return detail::add_cell(out, n);
        }
        case DeformRegion::Corner: {
            Vec4 out = y;
            double a = std::abs(y[3]);
            double s = (y[3] >= 0.0) ? 1.0 : -1.0;
            out[3] = (a <= 1.0) ? y[3] : s + eta / 13.0 * (y[3] - s);
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

inline Vec4 eval_squeeze(const DeformContext& c, const Vec4& y) {
    return eval_squeeze_region(c, y, classify_deform(c, y, true));
}

inline Vec4 eval_stretch(const DeformContext& c, const Vec4& y) {
    return eval_stretch_region(c, y, classify_deform(c, y, false));
}

// --- closed-form stratum derivative descriptors -----------------------------

struct StratumDerivative {
    std::string regime;
    bool exact = false;   // full derivative row is an exact closed form
    Vec4 value{};         // exact row (when exact), or the exact main term
    double main = 0.0;    // the main-term slope (exact where stated)
    double perp_bound = 0.0;  // envelope (C=1) for off-axis components
    double norm_bound = 0.0;  // envelope (C=1) for |D map| when applicable
};

// direction: AtoB = squeeze, BtoA = stretch. k is the gap generation of the
// probe axis, l the joint survival class of the other three coordinates.
inline StratumDerivative stratum_derivative(const DeformContext& c, MapDir dir, int k, int l,
                                            int axis) {
    if (k < 0 || l < 0 || axis < 0 || axis > 3)
        throw std::invalid_argument("stratum_derivative: regime mismatch");
    StratumDerivative out;
    double sl = slope_on_gap(c.A, c.B, k, dir);
    double beta = c.q.beta, alpha = c.q.alpha;
    int K = c.q.K, N = c.q.N;
    if (dir == MapDir::AtoB) {
        if (l >= 4 * k + 2 * N) {
            out.regime = "SQ1";
            out.main = sl;
            out.value = sl * axis4(axis);
            out.perp_bound = std::pow(2.0, -(4.0 * k + 2.0 * N) * beta) * std::pow(K + k, alpha + 1.0);
            return out;
        }
        if (k < l) {
            out.regime = "SQ2";
            out.exact = true;
            out.main = sl;
            out.value = sl * axis4(axis);
            return out;
        }
        if (k <= 4 * l + 4 + 2 * N) {
            out.regime = "SQ3";
            out.norm_bound = std::pow(2.0, -l * beta) * std::pow(K + l, alpha + 1.0);
            out.perp_bound = std::pow(2.0, -k * beta) * std::pow(K + k, alpha + 1.0);
            return out;
        }
        out.regime = "SQ3D";
        out.perp_bound = std::pow(2.0, -(4.0 * l + 4.0 + 2.0 * N) * beta);
        return out;
    }
    if (l >= 3 * k + N) {
        out.regime = "ST1";
        out.main = sl;
        out.value = sl * axis4(axis);  // D_j G^axis = 0 for j != axis is exact
        out.perp_bound = std::pow(2.0, -(3.0 * k + N)) * std::pow(2.0, k * (beta + 1.0));
        out.norm_bound = std::pow(2.0, (3.0 * k + 3.0 + N) * beta);
        return out;
    }
    if (k <= l) {
        out.regime = "ST2";
        out.exact = true;
        out.main = sl;
        out.value = sl * axis4(axis);
        out.norm_bound = std::pow(2.0, beta * l);
        return out;
    }
    if (k < 3 * l + N) {
        out.regime = "ST3";
        out.norm_bound = std::pow(2.0, k * beta);
        return out;
    }
    out.regime = "ST3B";
    out.norm_bound = std::pow(2.0, (3.0 * l + N) * beta);
    return out;
}

}  // namespace flip
