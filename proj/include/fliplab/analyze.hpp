#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fliplab/compose.hpp"
#include "fliplab/parallel.hpp"

namespace flip {

// --- energy ledger -------------------------------------------------------------

// One row per (derivative axis, stratum class). Axis 0..3 are |D_j map|^p for
// the partial along e_{j+1}; axis 4 carries the operator-norm surrogate
// max_j |D_j map| used by the product check. Stratum classes are the interior
// (k,l) classes of the plate cells — k the gap generation of the row's probe
// axis, l the joint survival class of the other three coordinates — plus the
// ten collar pieces E1..E10 around Z_m and, for the plate map, the leftover
// identity slab.
struct LedgerRow {
    std::string stratum;
    int axis = 0;       // 0..3 partials, 4 = max-row surrogate
    double volume = 0.0;  // exact region volume
    double mean = 0.0;    // sampled mean of |D|^p over the region
    double estimate = 0.0;  // mean * volume
    long samples = 0;
    long skipped = 0;  // stencils that never settled
    double std_error = 0.0;
};

struct EnergyLedger {
    double p = 1.0;
    std::vector<LedgerRow> rows;

    double total(int axis) const {
        double t = 0.0;
        for (const auto& r : rows)
            if (r.axis == axis) t += r.estimate;
        return t;
    }
};

namespace detail {

// exact 1-D class measures per unit cell: gap generations 0..d-1, then inside
inline std::vector<double> class_measures(const CantorSeq<double>& seq, int d) {
    std::vector<double> out;
    for (int k = 0; k < d; ++k) out.push_back(seq.measure1(k) - seq.measure1(k + 1));
    out.push_back(seq.measure1(d));
    return out;
}

// volume of the interior class (axis j in generation k, others jointly at
// class l) per unit cell, assembled from per-coordinate class products
inline double interior_class_volume(const std::vector<double>& g1, int d, int k, int l) {
    // axis coordinate fixed at class k (a gap class, k < d); the other three
    // have min survival exactly l (l = d means all three inside)
    auto other3 = [&](int lmin) {  // volume of {min survival over 3 coords >= lmin}
        double s = 0.0;
        for (int a = lmin; a <= d; ++a) s += g1[static_cast<std::size_t>(a)];
        return s * s * s;
    };
    double vol3 = (l == d) ? other3(d) : other3(l) - other3(l + 1);
    return g1[static_cast<std::size_t>(k)] * vol3;
}

inline double sample_class1(Rng& rng, const CantorSeq<double>& seq, int cls, int d,
                            double margin) {
    if (cls >= d) return sample_inside1(rng, seq, d, 0.0);
    while (true) {
        double x = sample_gap1(rng, seq, cls);
        auto lo = locate1(x, seq, cls + 1);
        double half = 0.5 * seq.radius(cls);
        double piece = half - seq.radius(cls + 1);
        if (lo.rho > seq.radius(cls + 1) + margin * piece && lo.rho < half - margin * piece)
            return x;
    }
}

// sample one coordinate class for "min survival over three coords = l"
inline std::array<int, 3> pick_other3(Rng& rng, const std::vector<double>& g1, int d, int l) {
    // choose which of the three attains the min, the rest at classes >= l (or
    // >= l+1 for exact-min bookkeeping); proportional volumes
    std::array<int, 3> cls{};
    if (l == d) {
        cls = {d, d, d};
        return cls;
    }
    double tail = 0.0, tail1 = 0.0;
    for (int a = l; a <= d; ++a) tail += g1[static_cast<std::size_t>(a)];
    for (int a = l + 1; a <= d; ++a) tail1 += g1[static_cast<std::size_t>(a)];
    // distribute: each coord is class l with prob g1[l]/tail conditioned on >= l,
    // rejecting the all-above case
    while (true) {
        bool has_min = false;
        for (int i = 0; i < 3; ++i) {
            double u = rng.uniform() * tail;
            int pick = l;
            double acc = 0.0;
            for (int a = l; a <= d; ++a) {
                acc += g1[static_cast<std::size_t>(a)];
                if (u <= acc) {
                    pick = a;
                    break;
                }
            }
            cls[static_cast<std::size_t>(i)] = pick;
            has_min = has_min || pick == l;
        }
        if (has_min) return cls;
    }
}

}  // namespace detail

// Collar decomposition around Z_m: pieces E1..E10 keyed 0..9, -1 for the
// interior, -2 outside the box. The x1-adapted split of the paper tiles
// R_{m,eta} \ Z_m exactly once.
inline int collar_id(const Params& q, const CantorSeq<double>& seq, int d, const Vec4& x) {
    double s = 2.0 * q.m + 5.0, s1 = 2.0 * q.m + 1.0, s3 = 2.0 * q.m + 3.0;
    for (int i = 0; i < 3; ++i)
        if (std::abs(x[static_cast<std::size_t>(i)]) > s + 1e-12) return -2;
    if (std::abs(x[3]) > 1.0 + q.eta + 1e-12) return -2;
    auto reduced_surv = [&](double xi, int cap) {
        double c = std::round(xi / 2.0);
        int n = std::clamp(static_cast<int>(c), -q.m, q.m);
        double r = xi - 2.0 * n;
        if (std::abs(r) > 1.0) return -1;
        return locate1(r, seq, cap).survival(cap);
    };
    bool on_lines_e4 = reduced_surv(x[0], d) >= d && reduced_surv(x[1], d) >= d &&
                       reduced_surv(x[2], d) >= d;
    if (std::abs(x[3]) > 1.0) {
        double tau1 = 2.0 * q.eta / (26.0 - q.eta);
        bool first_slab = std::abs(x[3]) <= 1.0 + tau1;
        if (first_slab) return on_lines_e4 ? 7 : 6;  // E8 : E7
        return on_lines_e4 ? 9 : 8;                  // E10 : E9
    }
    bool out1 = std::abs(x[0]) > s1;
    bool out23_s1 = std::abs(x[1]) > s1 || std::abs(x[2]) > s1;
    if (out1) {
        return out23_s1 ? 1 : 0;  // E2 : E1
    }
    if (!out23_s1) return -1;  // interior cell
    bool outside_s3 = std::abs(x[1]) > s3 || std::abs(x[2]) > s3;
    bool lines23 = (reduced_surv(x[0], d) >= d && reduced_surv(x[2], d) >= d &&
                    std::abs(x[3]) <= 1.0 && reduced_surv(x[3], d) >= d) ||
                   (reduced_surv(x[0], d) >= d && reduced_surv(x[1], d) >= d &&
                    reduced_surv(x[3], d) >= d);
    if (outside_s3) return lines23 ? 2 : 3;  // E3 : E4
    return lines23 ? 4 : 5;                  // E5 : E6
}

// Exact volumes of the ten collar pieces. The line-set intersections reduce
// to products of 1-D measures: a Cantor-constrained coordinate carries
// (2m+1) measure1(d) over the core span and nothing outside it, so in each
// annulus only the configuration "constrained coordinate in the core, free
// coordinate in the out-band" contributes, and the two line families never
// overlap inside an annulus.
inline std::array<double, 10> collar_volumes(const Params& q, const CantorSeq<double>& seq, int d) {
    double m = q.m;
    double w = 4.0 * m + 10.0, w1 = 4.0 * m + 2.0, w3 = 4.0 * m + 6.0;
    double cell1 = seq.measure1(d);       // 1-D depth-d measure per unit cell
    double u1 = (2.0 * m + 1.0) * cell1;  // over the whole core span
    std::array<double, 10> v{};
    v[0] = (w - w1) * w1 * w1 * 2.0;
    v[1] = (w - w1) * (w * w - w1 * w1) * 2.0;
    double box34 = w1 * (w * w - w3 * w3) * 2.0;
    double box56 = w1 * (w3 * w3 - w1 * w1) * 2.0;
    auto annulus_union = [&](double outer, double inner) {
        double band = 2.0 * (outer - inner);
        // e2-family: x3 Cantor in the core, x2 in the band; e3-family mirrored;
        // x1 and x4 carry Cantor factors u1 and cell1
        return 2.0 * band * u1 * u1 * cell1;
    };
    v[2] = annulus_union(2.0 * m + 5.0, 2.0 * m + 3.0);
    v[3] = box34 - v[2];
    v[4] = annulus_union(2.0 * m + 3.0, 2.0 * m + 1.0);
    v[5] = box56 - v[4];
    double tau1 = 2.0 * (2.0 * q.eta / (26.0 - q.eta));
    double tau2 = 2.0 * q.eta - tau1;
    double lines_e4 = u1 * u1 * u1;
    v[7] = lines_e4 * tau1;
    v[6] = w * w * w * tau1 - v[7];
    v[9] = lines_e4 * tau2;
    v[8] = w * w * w * tau2 - v[9];
    return v;
}

// uniform sample from one collar parent region; membership then splits the
// E-pairs
inline Vec4 collar_parent_sample(Rng& rng, const Params& q, int parent) {
    double s = 2.0 * q.m + 5.0, s1 = 2.0 * q.m + 1.0, s3 = 2.0 * q.m + 3.0;
    auto band = [&](double lo, double hi) {
        double u = rng.uniform(lo, hi);
        return rng.sign() * u;
    };
    Vec4 x{};
    switch (parent) {
        case 0:  // E1
            x = {band(s1, s), rng.uniform(-s1, s1), rng.uniform(-s1, s1), rng.uniform(-1, 1)};
            break;
        case 1: {  // E2: x1 out and (x2,x3) not both in S1
            do {
                x = {band(s1, s), rng.uniform(-s, s), rng.uniform(-s, s), rng.uniform(-1, 1)};
            } while (std::abs(x[1]) <= s1 && std::abs(x[2]) <= s1);
            break;
        }
        case 2: {  // E3+E4: x1 in S1, (x2,x3) outside S3^2
            do {
                x = {rng.uniform(-s1, s1), rng.uniform(-s, s), rng.uniform(-s, s),
                     rng.uniform(-1, 1)};
            } while (std::abs(x[1]) <= s3 && std::abs(x[2]) <= s3);
            break;
        }
        case 3: {  // E5+E6: x1 in S1, (x2,x3) in S3^2 \ S1^2
            do {
                x = {rng.uniform(-s1, s1), rng.uniform(-s3, s3), rng.uniform(-s3, s3),
                     rng.uniform(-1, 1)};
            } while (std::abs(x[1]) <= s1 && std::abs(x[2]) <= s1);
            break;
        }
        case 4: {  // E7+E8: first slab
            double tau1 = 2.0 * q.eta / (26.0 - q.eta);
            x = {rng.uniform(-s, s), rng.uniform(-s, s), rng.uniform(-s, s),
                 band(1.0, 1.0 + tau1)};
            break;
        }
        default: {  // E9+E10: second slab
            double tau1 = 2.0 * q.eta / (26.0 - q.eta);
            x = {rng.uniform(-s, s), rng.uniform(-s, s), rng.uniform(-s, s),
                 band(1.0 + tau1, 1.0 + q.eta)};
            break;
        }
    }
    return x;
}

// |D_j map|^p at x via a directional stencil along the row axis, with the
// stencil kept inside one smooth piece by refinement
template <class MapT>
bool row_derivative(const MapT& map, const Vec4& x, int axis, double h0, double p, double& out) {
    double h = h0;
    double prev = -1.0;
    for (int round = 0; round < 7; ++round) {
        Vec4 xp = x, xm = x;
        xp[static_cast<std::size_t>(axis)] += h;
        xm[static_cast<std::size_t>(axis)] -= h;
        Vec4 fd = (1.0 / (xp[static_cast<std::size_t>(axis)] - xm[static_cast<std::size_t>(axis)])) *
                  (map(xp) - map(xm));
        double v = norm2(fd);
        if (prev >= 0.0 && std::abs(v - prev) <= 1e-3 * std::max(1e-12, std::abs(v))) {
            out = std::pow(v, p);
            return true;
        }
        prev = v;
        h /= 4.0;
        if (h < 1e-13) break;
    }
    return false;
}

struct LedgerConfig {
    int samples_per_row = 1000;
    std::uint64_t seed = 1;
    double margin = 0.02;  // gap-piece sampling margin for the probe axis
};

// Stratified energy ledger of a map over R_{m,eta} \ (depth-d Cantor cubes):
// exact per-row volumes from the closed-form measures, sampled means of
// |D_j|^p, deterministic per-row seeding.
template <class MapT>
EnergyLedger energy_ledger(const MapT& map, const Params& q, double p, const LedgerConfig& cfg) {
    CantorSeq<double> A = q.seq_a();
    int d = q.depth;
    EnergyLedger led;
    led.p = p;
    std::vector<double> g1 = detail::class_measures(A, d);
    double cells = std::pow(2.0 * q.m + 1.0, 3.0);

    struct RowSpec {
        std::string name;
        int axis;
        double volume;
        std::function<Vec4(Rng&)> sampler;
        double h0;
    };
    std::vector<RowSpec> specs;
    auto run_row = [&](const std::string& name, int axis, double volume,
                       const std::function<Vec4(Rng&)>& sampler, double h0) {
        specs.push_back({name, axis, volume, sampler, h0});
    };

    // Interior (k,l) classes for the partial-derivative axes: the probe axis
    // sits in its own gap class k, the other three at joint class l. The
    // region with the probe coordinate inside a surviving cube is omitted:
    // there |D_axis| is controlled by the deep-truncation envelopes
    // 2^(-4k beta - 2N beta)-type and contributes nothing at double scale.
    for (int axis = 0; axis < 4; ++axis) {
        for (int k = 0; k < d; ++k) {
            for (int l = 0; l <= d; ++l) {
                double vol = cells * detail::interior_class_volume(g1, d, k, l);
                std::string name = "int k=" + std::to_string(k) + " l=" + std::to_string(l);
                auto sampler = [&, k, l, axis](Rng& rng) {
                    Vec4 x{};
                    x[static_cast<std::size_t>(axis)] =
                        detail::sample_class1(rng, A, k, d, cfg.margin);
                    auto cls = detail::pick_other3(rng, g1, d, l);
                    int slot = 0;
                    for (int i = 0; i < 4; ++i) {
                        if (i == axis) continue;
                        x[static_cast<std::size_t>(i)] =
                            detail::sample_class1(rng, A, cls[static_cast<std::size_t>(slot++)],
                                                  d, 0.0);
                    }
                    for (int i = 0; i < 3; ++i)
                        if (q.m > 0)
                            x[static_cast<std::size_t>(i)] +=
                                2.0 * (static_cast<int>(rng.uniform_int(2 * q.m + 1)) - q.m);
                    return x;
                };
                run_row(name, axis, vol, sampler, 0.01 * A.gap_diam(k));
            }
        }
    }
    // the max-row surrogate tiles the whole complement by joint classes
    // (min survival k, second-min l), assembled from the exact assignment table
    {
        struct Assign {
            std::array<int, 4> cls;
            double vol;
        };
        std::map<std::pair<int, int>, std::vector<Assign>> joint;
        std::array<int, 4> cls{};
        for (cls[0] = 0; cls[0] <= d; ++cls[0])
            for (cls[1] = 0; cls[1] <= d; ++cls[1])
                for (cls[2] = 0; cls[2] <= d; ++cls[2])
                    for (cls[3] = 0; cls[3] <= d; ++cls[3]) {
                        int kmin = std::min({cls[0], cls[1], cls[2], cls[3]});
                        if (kmin == d) continue;  // the surviving cube region
                        std::array<int, 4> sorted = cls;
                        std::sort(sorted.begin(), sorted.end());
                        double vol = 1.0;
                        for (int i = 0; i < 4; ++i)
                            vol *= g1[static_cast<std::size_t>(cls[static_cast<std::size_t>(i)])];
                        joint[{sorted[0], sorted[1]}].push_back({cls, vol});
                    }
        for (const auto& [key, assigns] : joint) {
            double vol = 0.0;
            for (const auto& a : assigns) vol += a.vol;
            std::string name =
                "int k=" + std::to_string(key.first) + " l=" + std::to_string(key.second);
            auto sampler = [&, assigns, vol](Rng& rng) {
                double u = rng.uniform() * vol;
                const Assign* pick = &assigns.back();
                double acc = 0.0;
                for (const auto& a : assigns) {
                    acc += a.vol;
                    if (u <= acc) {
                        pick = &a;
                        break;
                    }
                }
                Vec4 x{};
                for (int i = 0; i < 4; ++i)
                    x[static_cast<std::size_t>(i)] = detail::sample_class1(
                        rng, A, pick->cls[static_cast<std::size_t>(i)], d, cfg.margin);
                for (int i = 0; i < 3; ++i)
                    if (q.m > 0)
                        x[static_cast<std::size_t>(i)] +=
                            2.0 * (static_cast<int>(rng.uniform_int(2 * q.m + 1)) - q.m);
                return x;
            };
            run_row(name, 4, cells * vol, sampler, 0.01 * A.gap_diam(key.first));
        }
    }
    // collar rows: parents sampled uniformly, E-membership splits pairs
    std::array<double, 10> cv = collar_volumes(q, A, d);
    const char* names[10] = {"E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8", "E9", "E10"};
    struct Parent {
        int id;
        std::array<int, 2> members;
    };
    Parent parents[6] = {{0, {0, -1}}, {1, {1, -1}}, {2, {2, 3}},
                         {3, {4, 5}},  {4, {6, 7}},  {5, {8, 9}}};
    for (int axis = 0; axis < 5; ++axis) {
        for (const auto& par : parents) {
            for (int mem : par.members) {
                if (mem < 0) continue;
                auto sampler = [&, par, mem](Rng& rng) {
                    while (true) {
                        Vec4 x = collar_parent_sample(rng, q, par.id);
                        if (collar_id(q, A, d, x) == mem) return x;
                    }
                };
                double h0 = (mem >= 6) ? 1e-4 * q.eta : 1e-6;
                run_row(names[mem], axis, cv[static_cast<std::size_t>(mem)], sampler, h0);
            }
        }
    }

    // execute: rows are independent, seeded by their index, merged in order
    led.rows.assign(specs.size(), {});
    parallel_for(specs.size(), [&](std::size_t idx) {
        const RowSpec& spec = specs[idx];
        LedgerRow row;
        row.stratum = spec.name;
        row.axis = spec.axis;
        row.volume = spec.volume;
        if (spec.volume <= 0.0) {  // zero-volume stratum: kept as a note
            led.rows[idx] = row;
            return;
        }
        Rng rng(child_seed(cfg.seed, idx));
        double sum = 0.0, sum2 = 0.0;
        long n = 0, skipped = 0;
        for (int i = 0; i < cfg.samples_per_row; ++i) {
            Vec4 x = spec.sampler(rng);
            double v = 0.0;
            bool ok;
            if (spec.axis <= 3) {
                ok = row_derivative(map, x, spec.axis, spec.h0, p, v);
            } else {
                double worst = 0.0;
                ok = true;
                for (int jx = 0; jx < 4 && ok; ++jx) {
                    double vj = 0.0;
                    ok = row_derivative(map, x, jx, spec.h0, 1.0, vj);
                    worst = std::max(worst, vj);
                }
                v = std::pow(worst, p);
            }
            if (!ok) {
                ++skipped;
                continue;
            }
            sum += v;
            sum2 += v * v;
            ++n;
        }
        row.samples = n;
        row.skipped = skipped;
        if (n > 0) {
            row.mean = sum / n;
            row.estimate = row.mean * spec.volume;
            double var = std::max(0.0, sum2 / n - row.mean * row.mean);
            row.std_error = std::sqrt(var / n) * spec.volume;
        }
        led.rows[idx] = row;
    });
    return led;
}

// plate-map ledger via the exact affine change of variables: each plate
// contributes lambda^-4 times the f1 ledger, the leftover slab is the identity
inline EnergyLedger plate_ledger(const EnergyLedger& f1_ledger, const PlateMap& plate) {
    EnergyLedger out;
    out.p = f1_ledger.p;
    double factor = plate.plates / std::pow(plate.scale, 4.0);
    for (const auto& r : f1_ledger.rows) {
        LedgerRow s = r;
        s.volume *= factor;
        s.estimate *= factor;
        s.std_error *= factor;
        out.rows.push_back(s);
    }
    double leftover = 8.0 * (2.0 - plate.plates * plate.d_j);
    for (int axis = 0; axis < 5; ++axis) {
        LedgerRow s;
        s.stratum = "leftover";
        s.axis = axis;
        s.volume = leftover;
        s.mean = 1.0;  // identity: |D_j|^p = 1
        s.estimate = leftover;
        s.samples = 0;
        out.rows.push_back(s);
    }
    return out;
}

// Theorem-style product: (int |D_j|^p) * (int |D|^p) with |D| the pointwise
// max-row surrogate carried on axis 4
inline double product_check(const EnergyLedger& led, int axis) {
    return led.total(axis) * led.total(4);
}

// --- injectivity scan ------------------------------------------------------------

struct InjectivityReport {
    long pairs = 0;
    long collisions = 0;
    double min_image_dist = 1e30;
    Vec4 worst_a{}, worst_b{};
};

template <class MapT>
InjectivityReport injectivity_scan(const MapT& map, const std::function<Vec4(Rng&)>& sampler,
                                   long pairs, double min_sep, std::uint64_t seed) {
    InjectivityReport rep;
    Rng rng(seed);
    while (rep.pairs < pairs) {
        Vec4 a = sampler(rng), b = sampler(rng);
        if (norminf(a - b) < min_sep) continue;
        ++rep.pairs;
        double d = norminf(map(a) - map(b));
        if (d < rep.min_image_dist) {
            rep.min_image_dist = d;
            rep.worst_a = a;
            rep.worst_b = b;
        }
        if (d <= 0.0) ++rep.collisions;
    }
    return rep;
}

// --- ACL line check ---------------------------------------------------------------

struct AclReport {
    int lines = 0;
    int flagged = 0;
    double worst_growth = 0.0;
};

// total variation along axis-parallel lines at two partition resolutions; a
// line is flagged when doubling the resolution grows the variation by > 5%
template <class MapT>
AclReport acl_line_check(const MapT& map, int axis, int lines, int samples_per_line,
                         const std::function<Vec4(Rng&)>& base_sampler, double t_lo, double t_hi,
                         std::uint64_t seed) {
    AclReport rep;
    Rng rng(seed);
    for (int line = 0; line < lines; ++line) {
        Vec4 base = base_sampler(rng);
        auto variation = [&](int n) {
            double tv = 0.0;
            Vec4 prev{};
            for (int i = 0; i <= n; ++i) {
                Vec4 x = base;
                x[static_cast<std::size_t>(axis)] = t_lo + (t_hi - t_lo) * i / n;
                Vec4 y = map(x);
                if (i > 0) tv += norm2(y - prev);
                prev = y;
            }
            return tv;
        };
        double v1 = variation(samples_per_line);
        double v2 = variation(2 * samples_per_line);
        double growth = (v2 - v1) / std::max(v1, 1e-300);
        rep.worst_growth = std::max(rep.worst_growth, growth);
        ++rep.lines;
        if (growth > 0.05) ++rep.flagged;
    }
    return rep;
}

// --- patchwork (composition estimate) ----------------------------------------------

struct PatchworkResult {
    double lhs = 0.0;
    double rhs = 0.0;       // linearized integral, without the rho r^4 term
    double rho_term = 0.0;  // rho r^4
    bool pass = false;
    double gap_normalized = 0.0;  // (lhs - rhs) / r^4
};

// Both sides of the composition estimate around a = F^{-1}(c): the integral of
// |D f_{c,r}(F(x)) DF(x)|^p over F^{-1}(Q(c,r)) against its linearization at
// a. The inner map enters through its analytic Jacobian; both integrals are
// driven by one common uniform stream over Q(0,1), which couples the
// estimators and keeps the gap estimate stable under r-halving.
template <class MapT, class InnerJac>
PatchworkResult patchwork_check(const MapT& F, const CantorSeq<double>& seq, int m, int depth,
                                const InnerJac& inner_jac, const Vec4& a, double r, double p,
                                double rho, int samples, std::uint64_t seed) {
    PatchworkResult res;
    Vec4 c = F(a);
    double margin = stratum_interface_distance(seq, m, depth, a);
    double h = std::min(default_jet_step(seq, m, depth, a, 1e-3), margin / 50.0);
    Jet base = jet4(F, a, h);
    Jet check = jet4(F, a, h / 2.0);
    double agree = 0.0, scale = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            agree = std::max(agree, std::abs(base.jacobian[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                                             check.jacobian[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
            scale = std::max(scale, std::abs(base.jacobian[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
        }
    if (agree > 1e-6 * scale)
        throw std::runtime_error("patchwork: no stable differential at the base point");
    Mat4 dfa = check.jacobian;
    double det_a = std::abs(check.det);

    auto matnorm = [](const Mat4& mm) {
        double best = 0.0;
        for (const auto& row : mm) best = std::max(best, norm2(Vec4{row[0], row[1], row[2], row[3]}));
        return best;
    };
    auto compose_norm = [&](const Mat4& dF, const Mat4& dInner) {
        // rows of the composition: D_i (f o F) = sum_j (dF)_i^j (D_j f)
        Mat4 out{};
        for (int i = 0; i < 4; ++i)
            for (int jc = 0; jc < 4; ++jc)
                for (int k = 0; k < 4; ++k)
                    out[static_cast<std::size_t>(i)][static_cast<std::size_t>(jc)] +=
                        dF[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                        dInner[static_cast<std::size_t>(k)][static_cast<std::size_t>(jc)];
        return matnorm(out);
    };

    Rng rng(seed);
    double lhs_sum = 0.0, rhs_sum = 0.0;
    int used = 0;
    for (int i = 0; i < samples; ++i) {
        Vec4 u{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        // rhs: x = a + dfa^{-1}(r u); the change of variables gives the flat
        // measure over Q(0,r) divided by |det DF(a)|
        Mat4 dInner = inner_jac(u);  // D f_{c,r}(c + r u) = Df(u)
        rhs_sum += std::pow(compose_norm(dfa, dInner), p) / det_a;
        // lhs: the same u drives the image point y = c + r u; pull back by the
        // local inverse and weight by the sampled inverse Jacobian
        Vec4 y = c + r * u;
        try {
            Vec4 x = a;
            double best_diff = 1e30;
            Vec4 best_x = a;
            for (int it = 0; it < 60; ++it) {
                Vec4 fx = F(x);
                double dn = norm2(fx - y);
                if (dn < best_diff) {
                    best_diff = dn;
                    best_x = x;
                }
                if (dn < 1e-12 * r) break;  // at the fp floor
                Vec4 step = solve4(dfa, fx - y);
                if (norm2(step) > 1e6 * r) break;  // divergence guard
                x = x - step;
            }
            if (best_diff > 1e-10 * r + 1e-14) continue;
            x = best_x;
            Jet jx = jet4(F, x, h);
            Mat4 dInner_x = inner_jac((1.0 / r) * (F(x) - c));
            lhs_sum += std::pow(compose_norm(jx.jacobian, dInner_x), p) / std::abs(jx.det);
            ++used;
        } catch (const std::domain_error&) {
            continue;  // stencil or iterate left the map's domain
        }
    }
    if (used == 0) throw std::runtime_error("patchwork: no usable samples");
    double vol = std::pow(2.0 * r, 4.0);
    res.lhs = lhs_sum / used * vol;
    res.rhs = rhs_sum / samples * vol;
    res.rho_term = rho * std::pow(r, 4.0);
    double fp_slack = 1e-10 * (std::abs(res.lhs) + std::abs(res.rhs));
    res.pass = res.lhs <= res.rhs + res.rho_term + fp_slack;
    res.gap_normalized = (res.lhs - res.rhs) / std::pow(r, 4.0);
    return res;
}

// Constructive patchwork radius at a differentiability sample: the preimage
// of Q(c,r) must stay inside the smooth piece around a, so r is sized by the
// interface margin against the local inverse norm.
template <class MapT>
double patchwork_radius(const MapT& F, const CantorSeq<double>& seq, int m, int depth,
                        const Vec4& a, double safety = 20.0) {
    double margin = stratum_interface_distance(seq, m, depth, a);
    double h = std::min(default_jet_step(seq, m, depth, a, 1e-3), margin / 50.0);
    Jet base = jet4(F, a, h);
    double rinv = 1.0;
    for (int j = 0; j < 4; ++j) rinv = std::max(rinv, norm2(solve4(base.jacobian, axis4(j))));
    return margin / (safety * rinv);
}

// --- elementary power inequality -----------------------------------------------------

// |a^p - b^p| <= p (a+b)^(p-1) |a-b| for a,b >= 0, p >= 1
inline bool power_inequality_check(long samples, std::uint64_t seed, double slack = 1e-12) {
    Rng rng(seed);
    for (long i = 0; i < samples; ++i) {
        double a = rng.uniform(0.0, 10.0);
        double b = rng.uniform(0.0, 10.0);
        double p = rng.uniform(1.0, 4.0);
        if (i == 0) b = a;       // a = b edge
        if (i == 1) {            // b = 0, p = 1 edge
            b = 0.0;
            p = 1.0;
        }
        double lhs = std::abs(std::pow(a, p) - std::pow(b, p));
        double rhs = p * std::pow(a + b, p - 1.0) * std::abs(a - b);
        if (lhs > rhs + slack) return false;
    }
    return true;
}

}  // namespace flip
