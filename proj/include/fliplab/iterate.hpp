#pragma once

#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <vector>

#include "fliplab/analyze.hpp"

namespace flip {

// --- rotations ---------------------------------------------------------------

inline Vec4 apply_rot(const Mat4& o, const Vec4& x) {
    Vec4 y{};
    for (int i = 0; i < 4; ++i)
        y[static_cast<std::size_t>(i)] = dot(
            Vec4{o[static_cast<std::size_t>(i)][0], o[static_cast<std::size_t>(i)][1],
                 o[static_cast<std::size_t>(i)][2], o[static_cast<std::size_t>(i)][3]},
            x);
    return y;
}

inline Vec4 apply_rot_t(const Mat4& o, const Vec4& x) {
    Vec4 y{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            y[static_cast<std::size_t>(j)] +=
                o[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                x[static_cast<std::size_t>(i)];
    return y;
}

// Sense-preserving orthogonal O with O S = e1: Gram-Schmidt over a fixed
// fallback frame, one sign flip for det +1. Deterministic in S.
inline Mat4 rotation_for(const Vec4& s) {
    Mat4 o{};
    o[0] = {s[0], s[1], s[2], s[3]};
    int filled = 1;
    for (int cand = 0; cand < 4 && filled < 4; ++cand) {
        Vec4 v = axis4(cand);
        for (int r = 0; r < filled; ++r) {
            Vec4 row{o[static_cast<std::size_t>(r)][0], o[static_cast<std::size_t>(r)][1],
                     o[static_cast<std::size_t>(r)][2], o[static_cast<std::size_t>(r)][3]};
            v = v - dot(v, row) * row;
        }
        double n = norm2(v);
        if (n < 1e-6) continue;
        v = (1.0 / n) * v;
        o[static_cast<std::size_t>(filled)] = {v[0], v[1], v[2], v[3]};
        ++filled;
    }
    if (det4(o) < 0.0)
        for (int j = 0; j < 4; ++j) o[3][static_cast<std::size_t>(j)] = -o[3][static_cast<std::size_t>(j)];
    return o;
}

// S(c) = Df(a) e4 / |Df(a) e4| from a refined jet at the preimage a
template <class MapT>
Vec4 direction_field(const MapT& base, const CantorSeq<double>& seq, int m, int depth,
                     const Vec4& a, double h) {
    Jet j;
    if (!jet_refined(base, seq, m, depth, a, h, j))
        throw std::runtime_error("direction_field: no stable differential");
    Vec4 d4{j.jacobian[3][0], j.jacobian[3][1], j.jacobian[3][2], j.jacobian[3][3]};
    double n = norm2(d4);
    if (n < 1e-12) throw std::runtime_error("direction_field: degenerate derivative");
    return (1.0 / n) * d4;
}

// --- rotated cubes and covers --------------------------------------------------

struct RotatedCube {
    Vec4 center{};
    double radius = 0.0;
    Mat4 rot{};  // O_c; identity for axis-aligned cubes
    bool axis_aligned = true;
    Vec4 preimage{};
    bool has_preimage = false;

    bool contains(const Vec4& x) const {
        Vec4 d = x - center;
        if (!axis_aligned) d = apply_rot(rot, d);
        return norminf(d) <= radius;
    }

    // support half-extent along coordinate axis i
    double support(int i) const {
        if (axis_aligned) return radius;
        double s = 0.0;
        for (int r = 0; r < 4; ++r)
            s += std::abs(rot[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)]);
        return radius * s;
    }
};

// sound separation test: separating axis among the face normals of both cubes
inline bool cubes_proven_disjoint(const RotatedCube& a, const RotatedCube& b) {
    auto project = [](const RotatedCube& c, const Vec4& u) {
        double center = dot(c.center, u);
        double ext = 0.0;
        if (c.axis_aligned) {
            for (int i = 0; i < 4; ++i) ext += c.radius * std::abs(u[static_cast<std::size_t>(i)]);
        } else {
            for (int r = 0; r < 4; ++r) {
                Vec4 row{c.rot[static_cast<std::size_t>(r)][0], c.rot[static_cast<std::size_t>(r)][1],
                         c.rot[static_cast<std::size_t>(r)][2], c.rot[static_cast<std::size_t>(r)][3]};
                ext += c.radius * std::abs(dot(row, u));
            }
        }
        return std::pair<double, double>{center - ext, center + ext};
    };
    auto separated = [&](const Vec4& u) {
        auto [alo, ahi] = project(a, u);
        auto [blo, bhi] = project(b, u);
        return ahi < blo || bhi < alo;
    };
    for (int r = 0; r < 4; ++r) {
        Vec4 ra = a.axis_aligned
                      ? axis4(r)
                      : Vec4{a.rot[static_cast<std::size_t>(r)][0], a.rot[static_cast<std::size_t>(r)][1],
                             a.rot[static_cast<std::size_t>(r)][2], a.rot[static_cast<std::size_t>(r)][3]};
        if (separated(ra)) return true;
        Vec4 rb = b.axis_aligned
                      ? axis4(r)
                      : Vec4{b.rot[static_cast<std::size_t>(r)][0], b.rot[static_cast<std::size_t>(r)][1],
                             b.rot[static_cast<std::size_t>(r)][2], b.rot[static_cast<std::size_t>(r)][3]};
        if (separated(rb)) return true;
    }
    return false;
}

struct CoverConfig {
    double target_fraction = 0.999;
    int max_passes = 40;
    double h0 = 0.25;        // first-pass cell half-width
    double min_cell = 1e-3;  // stop subdividing below this half-width
    std::uint64_t seed = 1;
};

struct CoverResult {
    std::vector<RotatedCube> cubes;
    std::vector<double> pass_fractions;  // covered-this-pass / residual-before
    double covered_volume = 0.0;
    double region_volume = 0.0;
    bool reached_target = false;
};

struct CoverHooks {
    // exact test: does the axis box [lo,hi] meet the excluded set?
    std::function<bool(const Vec4&, const Vec4&)> box_excluded;
    // direction field at a center (empty: axis-aligned cubes)
    std::function<Vec4(const Vec4&)> direction;
    // radius cap r_c at a center (the lemma's r_c, made constructive)
    std::function<double(const Vec4&)> radius_cap;
    // optional center supplier: given a cell, produce (center, preimage)
    std::function<bool(const Vec4&, const Vec4&, Vec4&, Vec4&)> center_for_cell;
};

// One Whitney-style pass structure: place a rotated cube inside every free
// cell whose center is admissible, subdivide everything still uncovered, and
// repeat until the covered fraction reaches the target.
inline CoverResult cover_rotated(const Vec4& lo, const Vec4& hi, double region_volume,
                                 const CoverHooks& hooks, const CoverConfig& cfg) {
    CoverResult out;
    out.region_volume = region_volume;
    struct Cell {
        Vec4 lo, hi;
    };
    std::vector<Cell> active;
    // initial grid
    {
        std::array<int, 4> n{};
        for (int i = 0; i < 4; ++i)
            n[static_cast<std::size_t>(i)] = std::max(
                1, static_cast<int>(std::ceil((hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]) /
                                              (2.0 * cfg.h0))));
        std::array<int, 4> idx{};
        for (idx[0] = 0; idx[0] < n[0]; ++idx[0])
            for (idx[1] = 0; idx[1] < n[1]; ++idx[1])
                for (idx[2] = 0; idx[2] < n[2]; ++idx[2])
                    for (idx[3] = 0; idx[3] < n[3]; ++idx[3]) {
                        Cell c;
                        for (int i = 0; i < 4; ++i) {
                            double w = (hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]) /
                                       n[static_cast<std::size_t>(i)];
                            c.lo[static_cast<std::size_t>(i)] =
                                lo[static_cast<std::size_t>(i)] + idx[static_cast<std::size_t>(i)] * w;
                            c.hi[static_cast<std::size_t>(i)] = c.lo[static_cast<std::size_t>(i)] + w;
                        }
                        active.push_back(c);
                    }
    }
    for (int pass = 0; pass < cfg.max_passes && !active.empty(); ++pass) {
        double residual = region_volume - out.covered_volume;
        if (residual <= 0.0) break;
        double placed = 0.0;
        std::vector<Cell> next;
        for (const Cell& cell : active) {
            Vec4 center = 0.5 * (cell.lo + cell.hi);
            double half = 0.5 * norminf(cell.hi - cell.lo);
            if (hooks.box_excluded && hooks.box_excluded(cell.lo, cell.hi)) {
                if (half > cfg.min_cell) {
                    // subdivide toward the excluded boundary
                    for (int corner = 0; corner < 16; ++corner) {
                        Cell ch;
                        for (int i = 0; i < 4; ++i) {
                            double mid = 0.5 * (cell.lo[static_cast<std::size_t>(i)] +
                                                cell.hi[static_cast<std::size_t>(i)]);
                            if ((corner >> i) & 1) {
                                ch.lo[static_cast<std::size_t>(i)] = mid;
                                ch.hi[static_cast<std::size_t>(i)] = cell.hi[static_cast<std::size_t>(i)];
                            } else {
                                ch.lo[static_cast<std::size_t>(i)] = cell.lo[static_cast<std::size_t>(i)];
                                ch.hi[static_cast<std::size_t>(i)] = mid;
                            }
                        }
                        next.push_back(ch);
                    }
                }
                continue;
            }
            // pick the center (and preimage) for this cell
            RotatedCube cube;
            cube.center = center;
            if (hooks.center_for_cell) {
                Vec4 c2, pre;
                if (!hooks.center_for_cell(cell.lo, cell.hi, c2, pre)) {
                    if (half > cfg.min_cell) next.push_back(cell);
                    continue;
                }
                cube.center = c2;
                cube.preimage = pre;
                cube.has_preimage = true;
            }
            if (hooks.direction) {
                Vec4 s;
                try {
                    s = hooks.direction(cube.has_preimage ? cube.preimage : cube.center);
                } catch (const std::exception&) {
                    if (half > cfg.min_cell) next.push_back(cell);
                    continue;
                }
                cube.rot = rotation_for(s);
                cube.axis_aligned = false;
            }
            // largest rotated cube that surely fits in the cell around the center
            double fit = 1e30;
            for (int i = 0; i < 4; ++i) {
                double room = std::min(cube.center[static_cast<std::size_t>(i)] - cell.lo[static_cast<std::size_t>(i)],
                                       cell.hi[static_cast<std::size_t>(i)] - cube.center[static_cast<std::size_t>(i)]);
                double stretch = 1.0;
                if (!cube.axis_aligned) {
                    stretch = 0.0;
                    for (int r = 0; r < 4; ++r)
                        stretch += std::abs(cube.rot[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)]);
                }
                fit = std::min(fit, room / stretch);
            }
            cube.radius = 0.995 * fit;
            if (hooks.radius_cap) cube.radius = std::min(cube.radius, hooks.radius_cap(cube.center));
            if (cube.radius < 0.15 * half || cube.radius <= 0.0) {
                if (half > cfg.min_cell) next.push_back(cell);
                continue;
            }
            // the cube sits inside its own cell, and cells are disjoint from
            // everything placed earlier in this pass; earlier passes only kept
            // uncovered cells, so a placement can only collide through the
            // 0.995 slack, which the sound separation test rules out
            out.cubes.push_back(cube);
            placed += std::pow(2.0 * cube.radius, 4.0);
            // keep the uncovered corners of the cell alive
            if (half > cfg.min_cell) {
                for (int corner = 0; corner < 16; ++corner) {
                    Cell ch;
                    for (int i = 0; i < 4; ++i) {
                        double mid = 0.5 * (cell.lo[static_cast<std::size_t>(i)] +
                                            cell.hi[static_cast<std::size_t>(i)]);
                        if ((corner >> i) & 1) {
                            ch.lo[static_cast<std::size_t>(i)] = mid;
                            ch.hi[static_cast<std::size_t>(i)] = cell.hi[static_cast<std::size_t>(i)];
                        } else {
                            ch.lo[static_cast<std::size_t>(i)] = cell.lo[static_cast<std::size_t>(i)];
                            ch.hi[static_cast<std::size_t>(i)] = mid;
                        }
                    }
                    // drop children fully inside the placed cube
                    bool inside = true;
                    for (int corner2 = 0; corner2 < 16 && inside; ++corner2) {
                        Vec4 pt;
                        for (int i = 0; i < 4; ++i)
                            pt[static_cast<std::size_t>(i)] = ((corner2 >> i) & 1)
                                                                  ? ch.hi[static_cast<std::size_t>(i)]
                                                                  : ch.lo[static_cast<std::size_t>(i)];
                        inside = cube.contains(pt);
                    }
                    if (!inside) next.push_back(ch);
                }
            }
        }
        out.covered_volume += placed;
        out.pass_fractions.push_back(placed / residual);
        if (out.covered_volume / region_volume >= cfg.target_fraction) {
            out.reached_target = true;
            break;
        }
        // prune children covered by their sibling's cube; other overlaps are
        // resolved by the next pass's placement-in-cell geometry
        std::vector<Cell> filtered;
        filtered.reserve(next.size());
        for (const Cell& cell : next) {
            bool covered = false;
            for (std::size_t k = out.cubes.size() > 8 ? out.cubes.size() - 8 : 0;
                 k < out.cubes.size() && !covered; ++k) {
                bool all_in = true;
                for (int corner = 0; corner < 16 && all_in; ++corner) {
                    Vec4 pt;
                    for (int i = 0; i < 4; ++i)
                        pt[static_cast<std::size_t>(i)] = ((corner >> i) & 1)
                                                              ? cell.hi[static_cast<std::size_t>(i)]
                                                              : cell.lo[static_cast<std::size_t>(i)];
                    all_in = out.cubes[k].contains(pt);
                }
                covered = all_in;
            }
            if (!covered) filtered.push_back(cell);
        }
        active = std::move(filtered);
    }
    out.reached_target = out.covered_volume / region_volume >= cfg.target_fraction;
    return out;
}

}  // namespace flip
