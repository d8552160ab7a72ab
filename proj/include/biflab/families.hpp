#pragma once

#include <cmath>
#include <vector>

#include "biflab/complex_core.hpp"
#include "biflab/dyn1d.hpp"
#include "biflab/grid.hpp"
#include "biflab/parallel.hpp"

namespace biflab {

// Holomorphic family with marked critical points: unicritical z^d + lambda,
// or the cubic slice family P_{c,a}(z) = z^3/3 - (c/2) z^2 + a^3 with marked
// criticals {0, c}. A 1-complex-parameter slice of the cubic fixes c or a.
struct FamilyDescriptor {
    enum class Kind { unicritical, cubic };
    enum class CubicVar { vary_c, vary_a };

    Kind kind = Kind::unicritical;
    int d = 2;                        // degree (3 for cubic)
    CubicVar slice = CubicVar::vary_a;
    cplx slice_fixed = 0;             // the frozen cubic coordinate
    Window window;                    // default parameter window of the slice

    static FamilyDescriptor unicritical_family(int degree) {
        FamilyDescriptor f;
        f.kind = Kind::unicritical;
        f.d = degree;
        f.window = Window{-2.5, 1.5, -2.0, 2.0, 256, 256};
        return f;
    }
    static FamilyDescriptor cubic_slice(CubicVar var, cplx fixed) {
        FamilyDescriptor f;
        f.kind = Kind::cubic;
        f.d = 3;
        f.slice = var;
        f.slice_fixed = fixed;
        f.window = Window{-2.0, 2.0, -2.0, 2.0, 256, 256};
        return f;
    }

    int marked_criticals() const { return kind == Kind::unicritical ? 1 : 2; }
    int exceptional_cardinality() const { return 1; }  // polynomial families

    // cubic coordinates of a slice point
    void cubic_coords(cplx lambda, cplx& c, cplx& a) const {
        if (slice == CubicVar::vary_c) {
            c = lambda;
            a = slice_fixed;
        } else {
            c = slice_fixed;
            a = lambda;
        }
    }
};

inline PolyMap family_map_at(const FamilyDescriptor& fam, cplx lambda) {
    if (fam.kind == FamilyDescriptor::Kind::unicritical) {
        std::vector<cplx> c(static_cast<std::size_t>(fam.d) + 1, cplx(0));
        c[0] = lambda;
        c[static_cast<std::size_t>(fam.d)] = cplx(1);
        return PolyMap(DensePoly(std::move(c)));
    }
    cplx cc, aa;
    fam.cubic_coords(lambda, cc, aa);
    return PolyMap(DensePoly({aa * aa * aa, cplx(0), -0.5 * cc, cplx(1.0 / 3.0)}));
}

inline std::vector<cplx> family_marked_criticals(const FamilyDescriptor& fam, cplx lambda) {
    if (fam.kind == FamilyDescriptor::Kind::unicritical) return {cplx(0)};
    cplx cc, aa;
    fam.cubic_coords(lambda, cc, aa);
    return {cplx(0), cc};
}

namespace detail {

struct CubicParams {
    cplx c, a;
};

inline cplx cubic_apply(cplx z, const CubicParams& p) {
    return z * z * (z / 3.0 - 0.5 * p.c) + p.a * p.a * p.a;
}

inline double cubic_escape_radius(const CubicParams& p) {
    const double a3 = std::abs(p.a);
    double r = std::max(2.0, 6.0 * (0.5 * std::abs(p.c) + a3 * a3 * a3));
    return std::max(r, 3.4641016151377546);  // sqrt(12) = (4/|lead|)^(1/2)
}

inline double unicritical_escape_radius(int /*d*/, cplx lambda) {
    return std::max(2.0, 2.0 * std::abs(lambda));
}

// Green value of a family orbit started at the marked critical point,
// escape + 3 telescoped extra steps, 0 when bounded through max_iter.
template <typename Step>
double orbit_green(cplx z, double R, double log_d, int max_iter, const Step& step) {
    int extra = 0;
    for (int it = 1; it <= max_iter + 3; ++it) {
        z = step(z);
        const double a = std::abs(z);
        if (extra > 0) ++extra;
        else if (a > R) extra = 1;
        if (extra >= 4 || a > 1e100) return std::exp(-it * log_d) * std::log(a);
        if (it >= max_iter && extra == 0) return 0.0;
    }
    return 0.0;
}

}  // namespace detail

// g_i(lambda): Green's function of the family map evaluated at its i-th
// marked critical point.
inline double critical_potential(const FamilyDescriptor& fam, int i, cplx lambda, int max_iter = 400) {
    if (i < 0 || i >= fam.marked_criticals()) throw std::invalid_argument("critical_potential: bad critical index");
    if (fam.kind == FamilyDescriptor::Kind::unicritical) {
        const double R = detail::unicritical_escape_radius(fam.d, lambda);
        const int d = fam.d;
        return detail::orbit_green(cplx(0), R, std::log(double(d)), max_iter, [&](cplx z) {
            cplx w = cplx(1);
            for (int k = 0; k < d; ++k) w *= z;
            return w + lambda;
        });
    }
    detail::CubicParams p;
    fam.cubic_coords(lambda, p.c, p.a);
    const double R = detail::cubic_escape_radius(p);
    const cplx z0 = (i == 0) ? cplx(0) : p.c;
    return detail::orbit_green(z0, R, std::log(3.0), max_iter, [&](cplx z) { return detail::cubic_apply(z, p); });
}

// Grid of critical potentials over a window (deterministic, parallel fill).
inline ScalarField potential_field(const FamilyDescriptor& fam, int i, const Window& window, int max_iter = 400) {
    window.validate();
    ScalarField f(window);
    parallel_for(static_cast<std::size_t>(window.nx) * window.ny, [&](std::size_t k) {
        const auto ii = static_cast<std::uint32_t>(k / window.ny);
        const auto jj = static_cast<std::uint32_t>(k % window.ny);
        f.values[k] = critical_potential(fam, i, window.center(ii, jj), max_iter);
    });
    return f;
}

namespace detail {

// n-th image of the marked point as a sphere point, with overflow capping
inline SpherePoint marked_orbit_value(const FamilyDescriptor& fam, int i, cplx lambda, int n) {
    cplx z = (fam.kind == FamilyDescriptor::Kind::unicritical) ? cplx(0) : family_marked_criticals(fam, lambda)[static_cast<std::size_t>(i)];
    if (fam.kind == FamilyDescriptor::Kind::unicritical) {
        const int d = fam.d;
        for (int k = 0; k < n; ++k) {
            cplx w = cplx(1);
            for (int j = 0; j < d; ++j) w *= z;
            z = w + lambda;
            if (std::abs(z) > 1e120) return SpherePoint::infinity();
        }
        return SpherePoint::of(z);
    }
    CubicParams p;
    fam.cubic_coords(lambda, p.c, p.a);
    for (int k = 0; k < n; ++k) {
        z = cubic_apply(z, p);
        if (std::abs(z) > 1e120) return SpherePoint::infinity();
    }
    return SpherePoint::of(z);
}

}  // namespace detail

// Activity detector: per-cell mass d^{-n} * (1/pi) * |f_n'|^2/(1+|f_n|^2)^2 * cell area,
// the Fubini-Study pullback density of lambda -> f_lambda^n(c_i(lambda)),
// finite-differenced on the grid. Cells degenerate in both charts are masked.
// Values are per-cell masses; use sum() for the total.
template <typename OrbitValue>
ScalarField activity_mass_field_generic(const Window& window, int n, double degree, const OrbitValue& fval) {
    window.validate();
    if (n < 1) throw std::invalid_argument("activity_mass_field: n >= 1");
    const std::size_t nc = static_cast<std::size_t>(window.nx) * window.ny;
    std::vector<SpherePoint> vals(nc);
    parallel_for(nc, [&](std::size_t k) {
        const auto i = static_cast<std::uint32_t>(k / window.ny);
        const auto j = static_cast<std::uint32_t>(k % window.ny);
        vals[k] = fval(window.center(i, j), n);
    });
    ScalarField out(window);
    const double hx = window.hx(), hy = window.hy();
    const double dn = std::pow(degree, double(n));
    const double cell = hx * hy;
    parallel_for(nc, [&](std::size_t k) {
        const auto i = static_cast<std::uint32_t>(k / window.ny);
        const auto j = static_cast<std::uint32_t>(k % window.ny);
        if (i == 0 || j == 0 || i + 1 == window.nx || j + 1 == window.ny) {
            out.mask[k] = 1;
            return;
        }
        SphereJet jet = SphereJet::of(vals[k], vals[out.idx(i + 1, j)], vals[out.idx(i - 1, j)],
                                      vals[out.idx(i, j + 1)], vals[out.idx(i, j - 1)], hx, hy);
        const double s = spherical_derivative(jet);
        if (s < 0) {
            out.mask[k] = 1;
            return;
        }
        out.values[k] = s / dn * (1.0 / 3.141592653589793) * cell;
    });
    return out;
}

inline ScalarField activity_mass_field(const FamilyDescriptor& fam, int i, const Window& window, int n) {
    if (i < 0 || i >= fam.marked_criticals()) throw std::invalid_argument("activity_mass_field: bad critical index");
    return activity_mass_field_generic(window, n, double(fam.d), [&](cplx lambda, int steps) {
        return detail::marked_orbit_value(fam, i, lambda, steps);
    });
}

namespace detail {

// orbit value and d/dlambda along the slice, via forward-mode duals
inline void marked_orbit_dual(const FamilyDescriptor& fam, int i, cplx lambda, int n, cplx& z_out, cplx& dz_out) {
    if (fam.kind == FamilyDescriptor::Kind::unicritical) {
        cplx z = 0, dz = 0;
        const int d = fam.d;
        for (int k = 0; k < n; ++k) {
            cplx zp = cplx(1);
            for (int j = 0; j < d - 1; ++j) zp *= z;  // z^{d-1}
            dz = double(d) * zp * dz + cplx(1);
            z = zp * z + lambda;
            if (std::abs(z) > 1e120) break;
        }
        z_out = z;
        dz_out = dz;
        return;
    }
    CubicParams p;
    fam.cubic_coords(lambda, p.c, p.a);
    const bool vary_c = (fam.slice == FamilyDescriptor::CubicVar::vary_c);
    cplx z = (i == 0) ? cplx(0) : p.c;
    cplx dz = (i == 0) ? cplx(0) : (vary_c ? cplx(1) : cplx(0));
    for (int k = 0; k < n; ++k) {
        const cplx fz = z * z - p.c * z;                      // dP/dz
        const cplx fpar = vary_c ? -0.5 * z * z : 3.0 * p.a * p.a;  // dP/d(param)
        dz = fz * dz + fpar;
        z = cubic_apply(z, p);
        if (std::abs(z) > 1e120) break;
    }
    z_out = z;
    dz_out = dz;
}

}  // namespace detail

// Newton solve of f^n(c_i) = f^k(c_i) over the slice parameter, from the given
// seeds. Converged roots are deduplicated at tol*(1+|lambda|); roots where c_i
// is actually periodic (solving the lower relation f^{n-k}(c_i) = c_i) are
// removed. Divergent seeds are dropped; an empty result is valid.
inline std::vector<cplx> find_preperiodic_params(const FamilyDescriptor& fam, int i, int n, int k,
                                                 const std::vector<cplx>& seeds, double tol = 1e-9) {
    if (!(n > k && k >= 1)) throw std::invalid_argument("find_preperiodic_params: need n > k >= 1");
    std::vector<cplx> found;
    for (cplx seed : seeds) {
        cplx lam = seed;
        double prev_res = 1e300;
        bool ok = false;
        for (int it = 0; it < 80; ++it) {
            cplx zn, dzn, zk, dzk;
            detail::marked_orbit_dual(fam, i, lam, n, zn, dzn);
            detail::marked_orbit_dual(fam, i, lam, k, zk, dzk);
            const cplx F = zn - zk;
            const cplx dF = dzn - dzk;
            const double res = std::abs(F);
            if (!std::isfinite(res)) break;
            if (res < 1e-13 * (1.0 + std::abs(lam))) {
                ok = true;
                break;
            }
            if (std::abs(dF) < 1e-290) break;
            cplx step = F / dF;
            if (res > prev_res) step *= 0.5;  // damping when the residual grows
            prev_res = res;
            double cap = 0.5 * (1.0 + std::abs(lam));
            if (std::abs(step) > cap) step *= cap / std::abs(step);
            lam -= step;
            if (std::abs(lam) > 1e6) break;
        }
        if (!ok) continue;
        // drop periodic solutions via the lower-order relation
        cplx zl, dzl;
        detail::marked_orbit_dual(fam, i, lam, n - k, zl, dzl);
        const cplx c0 = family_marked_criticals(fam, lam)[static_cast<std::size_t>(i)];
        // d/dlambda of (f^{n-k}(c_i) - c_i)
        cplx dci = cplx(0);
        if (fam.kind == FamilyDescriptor::Kind::cubic && i == 1 && fam.slice == FamilyDescriptor::CubicVar::vary_c)
            dci = cplx(1);
        const cplx Flow = zl - c0;
        const cplx dFlow = dzl - dci;
        double dist = std::abs(Flow);
        if (std::abs(dFlow) > 1e-290) dist = std::abs(Flow / dFlow);
        if (dist < 1e-5 * (1.0 + std::abs(lam))) continue;
        bool dup = false;
        for (cplx r : found)
            if (std::abs(r - lam) <= tol * (1.0 + std::abs(lam))) dup = true;
        if (!dup) found.push_back(lam);
    }
    std::sort(found.begin(), found.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return found;
}

inline std::vector<cplx> seed_grid(const Window& w, std::uint32_t per_axis) {
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(per_axis) * per_axis);
    for (std::uint32_t i = 0; i < per_axis; ++i)
        for (std::uint32_t j = 0; j < per_axis; ++j)
            out.emplace_back(w.re_min + (i + 0.5) * (w.re_max - w.re_min) / per_axis,
                             w.im_min + (j + 0.5) * (w.im_max - w.im_min) / per_axis);
    return out;
}

}  // namespace biflab
