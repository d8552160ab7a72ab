#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "biflab/complex_core.hpp"
#include "biflab/dyn1d.hpp"
#include "biflab/families.hpp"
#include "biflab/grid.hpp"

namespace biflab {

// Exact dense polynomial p_n(lambda) = f_lambda^n(0) for f = z^d + lambda,
// stored mantissa-normalized with a log scale: value = exp(log_scale) * poly.
// Coefficients are exact integers while they fit; beyond |coeff| > 1e280 the
// scale absorbs the growth (roots are unaffected).
struct CritOrbitPoly {
    int d = 2;
    int n = 1;
    DensePoly poly;
    double log_scale = 0;

    cplx eval(cplx lambda) const { return std::exp(log_scale) * poly_eval(poly, lambda); }
};

inline CritOrbitPoly crit_orbit_poly(int d, int n, std::size_t degree_cap = kMaxPolyDegree) {
    if (d < 2 || n < 1) throw std::invalid_argument("crit_orbit_poly: need d >= 2, n >= 1");
    const double target = std::pow(double(d), double(n - 1));
    if (target > double(degree_cap)) throw PolySizeError("crit_orbit_poly: degree d^{n-1} exceeds cap");
    CritOrbitPoly out;
    out.d = d;
    out.n = n;
    out.poly = DensePoly::identity();  // p_1 = lambda
    out.log_scale = 0;
    for (int m = 2; m <= n; ++m) {
        DensePoly pw = out.poly;
        for (int t = 1; t < d; ++t) pw = poly_mul(pw, out.poly, degree_cap);
        double ls = out.log_scale * d;
        // add lambda at the current scale
        const double lam_coeff = std::exp(-ls);
        DensePoly lam({cplx(0), cplx(lam_coeff)});
        DensePoly sum = poly_add(pw, lam);
        const double m2 = sum.max_coeff_mod();
        if (m2 > 1e280) {
            sum.scale_coeffs(1.0 / m2);
            ls += std::log(m2);
        }
        out.poly = std::move(sum);
        out.log_scale = ls;
    }
    return out;
}

namespace detail {

// Newton data for F(lambda) = p_m(lambda) - zeta * p_l(lambda) - t along the
// critical-orbit recursion z <- z^d + lambda, with escape guard (once the
// orbit passes 1e60 the top term dominates doubly exponentially and
// (log p_m)' ~ d^{m-s} z_s'/z_s).
struct CritOrbitEval {
    int d = 2;
    int m = 1;
    int l = 0;       // 0 means no lower term
    cplx zeta{0};
    cplx t{0};

    NewtonSample operator()(cplx lam) const {
        cplx z(0), dz(0), zl(0), dzl(0);
        const double dd = d;
        for (int s = 1; s <= m; ++s) {
            cplx zp = cplx(1);
            for (int j = 0; j < d - 1; ++j) zp *= z;
            dz = dd * zp * dz + cplx(1);
            z = zp * z + lam;
            if (s == l) {
                zl = z;
                dzl = dz;
            }
            if (std::abs(z) > 1e60) {
                const double rem = std::pow(dd, double(m - s));
                cplx ratio = z / (rem * dz);
                if (!std::isfinite(ratio.real()) || !std::isfinite(ratio.imag())) ratio = cplx(1e-3);
                return {ratio, 1e30};
            }
        }
        const cplx F = z - zeta * zl - t;
        const cplx dF = dz - zeta * dzl;
        cplx ratio = (std::abs(dF) < 1e-290) ? cplx(1e-3) * (1.0 + std::abs(lam)) : F / dF;
        const double rr = std::abs(F) / ((std::abs(dz) + std::abs(dzl) + 1.0) * (1.0 + std::abs(lam)) * 1e-15);
        return {ratio, rr};
    }
};

// evaluate p'_m(lambda) along the orbit (no guard; callers stay bounded)
inline cplx crit_orbit_deriv(int d, int m, cplx lam) {
    cplx z(0), dz(0);
    for (int s = 1; s <= m; ++s) {
        cplx zp = cplx(1);
        for (int j = 0; j < d - 1; ++j) zp *= z;
        dz = double(d) * zp * dz + cplx(1);
        z = zp * z + lam;
        if (std::abs(z) > 1e60) break;
    }
    return dz;
}

// Roots of p_m by warm-started Aberth: level by level, each root r of
// p_{m-1} splits into the d solutions of (lambda - r)^d = -r / p'_{m-1}(r)^d.
class CritOrbitCascade {
  public:
    explicit CritOrbitCascade(int degree) : d_(degree) {}

    const std::vector<cplx>& roots(int m, std::size_t degree_cap = kMaxPolyDegree) {
        auto it = cache_.find(m);
        if (it != cache_.end()) return it->second;
        const double target = std::pow(double(d_), double(m - 1));
        if (target > double(degree_cap)) throw PolySizeError("percrit cascade: degree exceeds cap");
        std::vector<cplx> r;
        if (m == 1) {
            r = {cplx(0)};
        } else if (std::pow(double(d_), double(m - 1)) <= 16.0) {
            CritOrbitPoly p = crit_orbit_poly(d_, m);
            r = find_roots(p.poly, 1e-13);
        } else {
            const std::vector<cplx>& prev = roots(m - 1, degree_cap);
            std::vector<cplx> seeds;
            seeds.reserve(prev.size() * static_cast<std::size_t>(d_));
            int degen = 0;
            for (cplx rr : prev) {
                const cplx dp = crit_orbit_deriv(d_, m - 1, rr);
                cplx base;
                if (std::abs(rr) < 1e-14 || std::abs(dp) < 1e-14) {
                    base = cplx(0.05, 0.01);
                    ++degen;
                } else {
                    base = std::pow(-rr / std::pow(dp, double(d_)), 1.0 / double(d_));
                }
                for (int t = 0; t < d_; ++t) {
                    const double th = 6.283185307179586 * t / d_;
                    const cplx rot(std::cos(th), std::sin(th));
                    seeds.push_back(rr + base * rot * (1.0 + 1e-7 * (t + 1)));
                }
            }
            AberthOptions opt;
            opt.max_sweeps = 400;
            CritOrbitEval ev{d_, m, 0, cplx(0), cplx(0)};
            AberthResult res = aberth_solve(ev, std::move(seeds), opt);
            if (!res.converged && res.worst_step > 1e-8)
                throw RootFindError("percrit cascade: Aberth stalled at level " + std::to_string(m),
                                    res.worst_step);
            r = std::move(res.roots);
        }
        return cache_.emplace(m, std::move(r)).first->second;
    }

  private:
    int d_;
    std::map<int, std::vector<cplx>> cache_;
};

// roots of the twisted factor p_m - zeta p_l (zeta^d = 1, zeta != 1), seeded
// with the cascade roots of p_m (same degree, same limit distribution)
inline std::vector<cplx> twisted_factor_roots(CritOrbitCascade& cascade, int d, int m, int l, cplx zeta) {
    if (l == 0) return cascade.roots(m);  // p_m - zeta*0 = p_m
    std::vector<cplx> seeds = cascade.roots(m);
    for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] += cplx(3e-7, 1e-7) * (1.0 + std::abs(seeds[i]));
    AberthOptions opt;
    opt.max_sweeps = 400;
    CritOrbitEval ev{d, m, l, zeta, cplx(0)};
    AberthResult res = aberth_solve(ev, std::move(seeds), opt);
    if (!res.converged && res.worst_step > 1e-8)
        throw RootFindError("twisted percrit factor: Aberth stalled", res.worst_step);
    return res.roots;
}

}  // namespace detail

// Parameter divisor PerCrit(n,k) = {f^n(0) = f^k(0)} of the unicritical
// family, as a weighted point cloud. Uses the exact factorization
// p_n - p_k = prod_t (p_{n-1} - zeta_t p_{k-1}) so multiple roots appear as
// exact repeats across factors. Weights are 1/(d^n + d^{(1-e)k}) with e = 1.
inline PointMeasure percrit_roots(int d, int n, int k, std::size_t degree_cap = kMaxPolyDegree) {
    if (!(0 <= k && k < n)) throw std::invalid_argument("percrit_roots: need 0 <= k < n");
    if (std::pow(double(d), double(n - 1)) > double(degree_cap))
        throw PolySizeError("percrit_roots: degree cap exceeded");
    detail::CritOrbitCascade cascade(d);
    std::vector<cplx> all;
    // recursion: (n, k) -> (n-1, k-1) plus twisted factors, ending at (n-k, 0)
    for (int j = 0; j < k; ++j) {
        const int m = n - 1 - j, l = k - 1 - j;
        for (int t = 1; t < d; ++t) {
            const double th = 6.283185307179586 * t / d;
            auto tr = detail::twisted_factor_roots(cascade, d, m, l, cplx(std::cos(th), std::sin(th)));
            all.insert(all.end(), tr.begin(), tr.end());
        }
    }
    auto pr = cascade.roots(n - k);
    all.insert(all.end(), pr.begin(), pr.end());

    PointMeasure pm;
    const double wgt = 1.0 / (std::pow(double(d), double(n)) + 1.0);
    for (cplx r : all) pm.add(r, wgt);
    pm.sort_lex();
    return pm;
}

// Strictly preperiodic part: percrit_roots minus every root matching the
// PerCrit(n-k, 0) set (tolerance 1e-9, scale-relative); weights unchanged.
inline PointMeasure preper_roots(int d, int n, int k, std::size_t degree_cap = kMaxPolyDegree) {
    if (!(1 <= k && k < n)) throw std::invalid_argument("preper_roots: need 1 <= k < n");
    PointMeasure full = percrit_roots(d, n, k, degree_cap);
    detail::CritOrbitCascade cascade(d);
    const std::vector<cplx>& lower = cascade.roots(n - k);
    PointMeasure out;
    for (std::size_t i = 0; i < full.size(); ++i) {
        bool matched = false;
        for (cplx s : lower)
            if (std::abs(full.points[i] - s) <= 1e-9 * (1.0 + std::abs(s))) {
                matched = true;
                break;
            }
        if (!matched) out.add(full.points[i], full.weights[i]);
    }
    out.sort_lex();
    return out;
}

// Target divisor H_{n,a} = {f^n(0) = a}, weights d^{-n}.
inline PointMeasure target_roots(int d, int n, cplx a, std::size_t degree_cap = kMaxPolyDegree) {
    if (std::pow(double(d), double(n - 1)) > double(degree_cap))
        throw PolySizeError("target_roots: degree cap exceeded");
    PointMeasure pm;
    const double wgt = std::pow(double(d), -double(n));
    if (n == 1) {
        pm.add(a, wgt);  // p_1 = lambda
        pm.sort_lex();
        return pm;
    }
    detail::CritOrbitCascade cascade(d);
    std::vector<cplx> seeds = cascade.roots(n);
    // widen the seed cloud when the target sits outside the connectedness locus
    const double spread = std::pow(std::abs(a), 1.0 / std::pow(double(d), double(n - 1)));
    if (spread > 1.0)
        for (auto& s : seeds) s *= spread;
    for (auto& s : seeds) s += cplx(1e-7, -2e-7) * (1.0 + std::abs(s));
    AberthOptions opt;
    opt.max_sweeps = 400;
    detail::CritOrbitEval ev{d, n, 0, cplx(0), a};
    AberthResult res = aberth_solve(ev, std::move(seeds), opt);
    if (!res.converged && res.worst_step > 1e-8)
        throw RootFindError("target_roots: Aberth stalled", res.worst_step);
    for (cplx r : res.roots) pm.add(r, wgt);
    pm.sort_lex();
    return pm;
}

// --- Per(n, w): parameters with an exact period-n cycle of multiplier w ----

namespace detail {

// q(lambda) = prod over exact-period-n cycles (w_j(lambda) - w)
inline cplx per_nw_product(const FamilyDescriptor& fam, int n, cplx w, cplx lambda, bool* warn = nullptr) {
    PolyMap m = family_map_at(fam, lambda);
    auto pts = periodic_points(m, n);
    std::vector<char> used(pts.size(), 0);
    cplx q(1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (used[i] || pts[i].exact_period != n) continue;
        if (warn && pts[i].grouping_warning) *warn = true;
        // mark the whole cycle as used by forward matching
        cplx z = pts[i].point;
        for (int s = 0; s < n; ++s) {
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (!used[j] && std::abs(pts[j].point - z) <= 1e-6 * (1.0 + std::abs(z))) {
                    used[j] = 1;
                    break;
                }
            }
            z = m.apply(z);
        }
        q *= pts[i].multiplier - w;
    }
    return q;
}

}  // namespace detail

// Numeric multiplier-product solve of Per(n, w) over the family window:
// Newton from a seed grid, central-difference derivative, deduplication.
// Weights d^{-n}; w on the unit circle is allowed but |w| = 1 is flagged.
inline PointMeasure per_nw_roots(const FamilyDescriptor& fam, int n, cplx w, std::uint32_t seed_per_axis = 12,
                                 std::size_t degree_cap = kMaxPolyDegree) {
    if (std::abs(w) > 1.0 + 1e-12) throw std::invalid_argument("per_nw_roots: need |w| <= 1");
    if (std::pow(double(fam.d), double(n)) > double(degree_cap))
        throw PolySizeError("per_nw_roots: degree cap exceeded");
    PointMeasure pm;
    if (std::abs(std::abs(w) - 1.0) <= 1e-12) pm.flags.push_back("parabolic-input");
    bool warned = false;
    std::vector<cplx> found;
    for (cplx seed : seed_grid(fam.window, seed_per_axis)) {
        cplx lam = seed;
        bool ok = false;
        double prev = 1e300;
        for (int it = 0; it < 60; ++it) {
            cplx q, qp, qm;
            const double h = 1e-6 * (1.0 + std::abs(lam));
            try {
                q = detail::per_nw_product(fam, n, w, lam, &warned);
                qp = detail::per_nw_product(fam, n, w, lam + h);
                qm = detail::per_nw_product(fam, n, w, lam - h);
            } catch (const std::exception&) {
                break;
            }
            const double res = std::abs(q);
            if (!std::isfinite(res)) break;
            const cplx dq = (qp - qm) / (2.0 * h);
            if (std::abs(dq) < 1e-290) break;
            cplx step = q / dq;
            if (res > prev) step *= 0.5;
            prev = res;
            const double cap = 0.4 * (1.0 + std::abs(lam));
            if (std::abs(step) > cap) step *= cap / std::abs(step);
            lam -= step;
            if (std::abs(lam) > 1e4) break;
            if (std::abs(step) <= 1e-11 * (1.0 + std::abs(lam))) {
                ok = true;
                break;
            }
        }
        if (!ok) continue;
        bool dup = false;
        for (cplx r : found)
            if (std::abs(r - lam) <= 1e-9 * (1.0 + std::abs(lam))) dup = true;
        if (!dup) found.push_back(lam);
    }
    const double wgt = std::pow(double(fam.d), -double(n));
    for (cplx r : found) pm.add(r, wgt);
    if (warned) pm.flags.push_back("cycle-grouping-ambiguity");
    pm.sort_lex();
    return pm;
}

// Unit-circle average of Per(n, r e^{i theta}) over theta_count angles.
inline PointMeasure per_nw_circle_average(const FamilyDescriptor& fam, int n, double r, int theta_count,
                                          std::uint32_t seed_per_axis = 12) {
    if (r <= 0) throw std::invalid_argument("per_nw_circle_average: r > 0");
    PointMeasure out;
    int okcount = 0;
    for (int t = 0; t < theta_count; ++t) {
        const double th = 6.283185307179586 * t / theta_count;
        try {
            PointMeasure one = per_nw_roots(fam, n, r * cplx(std::cos(th), std::sin(th)), seed_per_axis);
            for (std::size_t i = 0; i < one.size(); ++i) out.add(one.points[i], one.weights[i] / theta_count);
            for (auto& f : one.flags)
                if (std::find(out.flags.begin(), out.flags.end(), f) == out.flags.end()) out.flags.push_back(f);
            ++okcount;
        } catch (const std::exception&) {
            // per-angle failure: partial result with coverage reported
        }
    }
    out.flags.push_back("coverage=" + std::to_string(okcount) + "/" + std::to_string(theta_count));
    out.sort_lex();
    return out;
}

}  // namespace biflab
