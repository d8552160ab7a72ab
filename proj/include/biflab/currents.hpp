#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "biflab/grid.hpp"
#include "biflab/parallel.hpp"

namespace biflab {

constexpr double kPi = 3.141592653589793;

// dd^c density of a sampled potential, normalized so dd^c log|lambda - a| is a
// unit point mass: (1/2pi) * five-point Laplacian. Boundary ring masked; cells
// whose stencil touches a masked input cell are masked.
inline ScalarField ddc_density(const ScalarField& f) {
    const Window& w = f.window;
    if (w.nx < 3 || w.ny < 3) throw std::invalid_argument("ddc_density: grid must be at least 3x3");
    ScalarField out(w);
    const double ihx2 = 1.0 / (w.hx() * w.hx());
    const double ihy2 = 1.0 / (w.hy() * w.hy());
    parallel_for(static_cast<std::size_t>(w.nx) * w.ny, [&](std::size_t k) {
        const auto i = static_cast<std::uint32_t>(k / w.ny);
        const auto j = static_cast<std::uint32_t>(k % w.ny);
        if (i == 0 || j == 0 || i + 1 == w.nx || j + 1 == w.ny) {
            out.mask[k] = 1;
            return;
        }
        const std::size_t kxp = f.idx(i + 1, j), kxm = f.idx(i - 1, j), kyp = f.idx(i, j + 1), kym = f.idx(i, j - 1);
        if (f.mask[k] || f.mask[kxp] || f.mask[kxm] || f.mask[kyp] || f.mask[kym]) {
            out.mask[k] = 1;
            return;
        }
        const double lap = (f.values[kxp] + f.values[kxm] - 2.0 * f.values[k]) * ihx2 +
                           (f.values[kyp] + f.values[kym] - 2.0 * f.values[k]) * ihy2;
        out.values[k] = lap / (2.0 * kPi);
    });
    return out;
}

namespace detail {

// centered second-difference data of a Field4 at one cell
struct Hess4 {
    double lap1 = 0, lap2 = 0;   // real Laplacians in the two complex planes
    double c12r = 0, c12i = 0;   // u_{1 2bar} = c12r + i*c12i (up to the 1/4)
    bool ok = false;
};

inline Hess4 hessian_terms(const Field4& u, std::uint32_t i1, std::uint32_t j1, std::uint32_t i2, std::uint32_t j2) {
    Hess4 h;
    const Window &wa = u.w1, &wb = u.w2;
    if (i1 == 0 || j1 == 0 || i2 == 0 || j2 == 0 || i1 + 1 == wa.nx || j1 + 1 == wa.ny || i2 + 1 == wb.nx ||
        j2 + 1 == wb.ny)
        return h;
    auto V = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t d) { return u.at(a, b, c, d); };
    const double hx1 = wa.hx(), hy1 = wa.hy(), hx2 = wb.hx(), hy2 = wb.hy();
    const double v0 = V(i1, j1, i2, j2);
    h.lap1 = (V(i1 + 1, j1, i2, j2) + V(i1 - 1, j1, i2, j2) - 2 * v0) / (hx1 * hx1) +
             (V(i1, j1 + 1, i2, j2) + V(i1, j1 - 1, i2, j2) - 2 * v0) / (hy1 * hy1);
    h.lap2 = (V(i1, j1, i2 + 1, j2) + V(i1, j1, i2 - 1, j2) - 2 * v0) / (hx2 * hx2) +
             (V(i1, j1, i2, j2 + 1) + V(i1, j1, i2, j2 - 1) - 2 * v0) / (hy2 * hy2);
    auto cross = [&](int axA, int axB) {
        auto at = [&](int dA, int dB) {
            std::uint32_t a = i1, b = j1, c = i2, d = j2;
            (axA == 0 ? a : b) += static_cast<std::uint32_t>(dA);
            (axB == 0 ? c : d) += static_cast<std::uint32_t>(dB);
            return u.at(a, b, c, d);
        };
        const double hA = (axA == 0) ? hx1 : hy1;
        const double hB = (axB == 0) ? hx2 : hy2;
        return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hA * hB);
    };
    const double uxx = cross(0, 0), uxy = cross(0, 1), uyx = cross(1, 0), uyy = cross(1, 1);
    h.c12r = 0.25 * (uxx + uyy);
    h.c12i = 0.25 * (uxy - uyx);
    h.ok = true;
    return h;
}

inline double mixed_from_terms(const Hess4& a, const Hess4& b) {
    // (i/pi d dbar u) ^ (i/pi d dbar v) against Lebesgue on C^2:
    // (4/pi^2) [ u_{11}v_{22} + u_{22}v_{11} - 2 Re(u_{12bar} conj(v_{12bar})) ]
    return (4.0 / (kPi * kPi)) *
           ((a.lap1 / 4.0) * (b.lap2 / 4.0) + (a.lap2 / 4.0) * (b.lap1 / 4.0) -
            2.0 * (a.c12r * b.c12r + a.c12i * b.c12i));
}

}  // namespace detail

// Mixed Monge-Ampere density of two potentials on the same 4-dim grid,
// normalized so dd^c log|l1-a| ^ dd^c log|l2-b| has unit mass at (a,b).
// Equals the polarization det(H(u)+H(v)) - det H(u) - det H(v) of the complex
// Hessians; symmetric in (u, v); boundary ring masked.
inline Field4 mixed_ma_density(const Field4& u, const Field4& v) {
    if (!(u.w1 == v.w1) || !(u.w2 == v.w2)) throw std::invalid_argument("mixed_ma_density: grids must coincide");
    if (u.w1.nx < 3 || u.w1.ny < 3 || u.w2.nx < 3 || u.w2.ny < 3)
        throw std::invalid_argument("mixed_ma_density: each dimension needs >= 3 cells");
    Field4 out(u.w1, u.w2);
    const std::size_t n = out.size();
    parallel_for(n, [&](std::size_t k) {
        std::size_t rest = k;
        const auto j2 = static_cast<std::uint32_t>(rest % u.w2.ny); rest /= u.w2.ny;
        const auto i2 = static_cast<std::uint32_t>(rest % u.w2.nx); rest /= u.w2.nx;
        const auto j1 = static_cast<std::uint32_t>(rest % u.w1.ny); rest /= u.w1.ny;
        const auto i1 = static_cast<std::uint32_t>(rest);
        detail::Hess4 a = detail::hessian_terms(u, i1, j1, i2, j2);
        detail::Hess4 b = detail::hessian_terms(v, i1, j1, i2, j2);
        if (!a.ok || !b.ok) {
            out.mask[k] = 1;
            return;
        }
        out.values[k] = detail::mixed_from_terms(a, b);
    });
    return out;
}

// Weak pairing <MA(u,v), phi> evaluated by moving two derivatives onto the
// C^1 test data: sum u * W(v, phi) * cell volume. Roughness of the potentials
// enters only linearly, so this is the measurement of choice for wedge masses
// (cellwise products of two rough Hessians are never summed directly).
inline double wedge_pairing(const Field4& u, const Field4& v, const Field4& phi) {
    if (!(u.w1 == v.w1) || !(u.w2 == v.w2) || !(u.w1 == phi.w1) || !(u.w2 == phi.w2))
        throw std::invalid_argument("wedge_pairing: grids must coincide");
    const std::size_t n = u.size();
    const std::size_t rows = static_cast<std::size_t>(u.w1.nx);
    const std::size_t row_sz = n / rows;
    // per-row partial sums, reduced serially, so the result does not depend
    // on thread scheduling
    std::vector<double> row_sum(rows, 0.0);
    parallel_for(rows, [&](std::size_t r) {
        double acc = 0;
        for (std::size_t t = 0; t < row_sz; ++t) {
            const std::size_t k = r * row_sz + t;
            std::size_t rest = k;
            const auto j2 = static_cast<std::uint32_t>(rest % u.w2.ny); rest /= u.w2.ny;
            const auto i2 = static_cast<std::uint32_t>(rest % u.w2.nx); rest /= u.w2.nx;
            const auto j1 = static_cast<std::uint32_t>(rest % u.w1.ny); rest /= u.w1.ny;
            const auto i1 = static_cast<std::uint32_t>(rest);
            detail::Hess4 hv = detail::hessian_terms(v, i1, j1, i2, j2);
            detail::Hess4 hp = detail::hessian_terms(phi, i1, j1, i2, j2);
            if (!hv.ok || !hp.ok) continue;
            acc += u.values[k] * detail::mixed_from_terms(hv, hp);
        }
        row_sum[r] = acc;
    });
    double s = 0;
    for (double p : row_sum) s += p;
    return s * u.cell_volume();
}

// Separable Gaussian mollifier, sigma in cells, kernel renormalized at edges.
inline Field4 smooth_field4(const Field4& f, double sigma_cells) {
    if (sigma_cells <= 0) return f;
    const int rad = static_cast<int>(std::ceil(3.0 * sigma_cells));
    std::vector<double> kern(static_cast<std::size_t>(2 * rad + 1));
    for (int t = -rad; t <= rad; ++t) kern[static_cast<std::size_t>(t + rad)] = std::exp(-0.5 * t * t / (sigma_cells * sigma_cells));
    Field4 cur = f;
    const std::uint32_t dims[4] = {f.w1.nx, f.w1.ny, f.w2.nx, f.w2.ny};
    for (int axis = 0; axis < 4; ++axis) {
        Field4 nxt = cur;
        const std::size_t n = cur.size();
        parallel_for(n, [&](std::size_t k) {
            std::size_t rest = k;
            std::uint32_t c[4];
            c[3] = static_cast<std::uint32_t>(rest % dims[3]); rest /= dims[3];
            c[2] = static_cast<std::uint32_t>(rest % dims[2]); rest /= dims[2];
            c[1] = static_cast<std::uint32_t>(rest % dims[1]); rest /= dims[1];
            c[0] = static_cast<std::uint32_t>(rest);
            double acc = 0, wsum = 0;
            for (int t = -rad; t <= rad; ++t) {
                const std::int64_t p = static_cast<std::int64_t>(c[axis]) + t;
                if (p < 0 || p >= static_cast<std::int64_t>(dims[axis])) continue;
                std::uint32_t cc[4] = {c[0], c[1], c[2], c[3]};
                cc[axis] = static_cast<std::uint32_t>(p);
                const double w = kern[static_cast<std::size_t>(t + rad)];
                acc += w * cur.at(cc[0], cc[1], cc[2], cc[3]);
                wsum += w;
            }
            nxt.values[k] = acc / wsum;
        });
        cur = std::move(nxt);
    }
    return cur;
}

// --- test-function catalogue ----------------------------------------------
//
// Window-adapted C^1 test functions used by every field-vs-cloud comparison.
// Each entry supplies the value and the exact gradient so C^1 norms can be
// taken by grid maximization.

struct TestFunction {
    std::string id;
    std::function<double(cplx)> value;
    std::function<double(cplx)> grad_norm;
};

inline std::vector<TestFunction> test_function_catalogue(const Window& w) {
    const cplx center(0.5 * (w.re_min + w.re_max), 0.5 * (w.im_min + w.im_max));
    const double ext = std::min(w.re_max - w.re_min, w.im_max - w.im_min);
    std::vector<TestFunction> cat;

    {  // C^2 radial bump (1 - r^2/R^2)^3
        const double R = 0.475 * ext;
        cat.push_back({"bump",
                       [center, R](cplx z) {
                           const double t = std::norm(z - center) / (R * R);
                           return t < 1 ? (1 - t) * (1 - t) * (1 - t) : 0.0;
                       },
                       [center, R](cplx z) {
                           const double r2 = std::norm(z - center);
                           const double t = r2 / (R * R);
                           if (t >= 1) return 0.0;
                           return 6.0 * std::sqrt(r2) / (R * R) * (1 - t) * (1 - t);
                       }});
    }
    {  // Re(lambda) times a narrower bump
        const cplx c2 = center + cplx(-0.125 * (w.re_max - w.re_min), 0.0);
        const double R = 0.225 * ext;
        cat.push_back({"rebump",
                       [c2, R](cplx z) {
                           const double t = std::norm(z - c2) / (R * R);
                           return t < 1 ? z.real() * (1 - t) * (1 - t) * (1 - t) : 0.0;
                       },
                       [c2, R](cplx z) {
                           const double r2 = std::norm(z - c2);
                           const double t = r2 / (R * R);
                           if (t >= 1) return 0.0;
                           const double b = (1 - t) * (1 - t) * (1 - t);
                           const double db = 6.0 * std::sqrt(r2) / (R * R) * (1 - t) * (1 - t);
                           return std::abs(b) + std::abs(z.real()) * db;  // upper bound on |grad|
                       }});
    }
    {  // Gaussian
        const cplx c3 = center + cplx(0.0, 0.025 * (w.im_max - w.im_min));
        const double s2 = 0.045 * ext * ext;
        cat.push_back({"gauss",
                       [c3, s2](cplx z) { return std::exp(-std::norm(z - c3) / s2); },
                       [c3, s2](cplx z) {
                           const double r = std::abs(z - c3);
                           return 2.0 * r / s2 * std::exp(-r * r / s2);
                       }});
    }
    return cat;
}

inline TestFunction find_test_function(const Window& w, const std::string& id) {
    for (auto& tf : test_function_catalogue(w))
        if (tf.id == id) return tf;
    throw std::invalid_argument("unknown test function id: " + id);
}

// sup|phi| + sup|grad phi| over the window grid
inline double c1_norm(const TestFunction& tf, const Window& w) {
    double m = 0;
    for (std::uint32_t i = 0; i < w.nx; ++i)
        for (std::uint32_t j = 0; j < w.ny; ++j) {
            const cplx z = w.center(i, j);
            m = std::max(m, std::abs(tf.value(z)) + tf.grad_norm(z));
        }
    return m;
}

struct PairingResult {
    double cloud = 0;          // sum w_i phi(p_i)
    double field = 0;          // midpoint-rule integral of density * phi
    double excluded_mass = 0;  // cloud mass outside the window
};

// Exact cloud sum against the midpoint-rule field integral for one test
// function. Points outside the field window are excluded and reported.
inline PairingResult pair_measure_with_test(const PointMeasure& pm, const TestFunction& tf,
                                            const ScalarField& ref) {
    PairingResult r;
    for (std::size_t i = 0; i < pm.size(); ++i) {
        if (!ref.window.contains(pm.points[i])) {
            r.excluded_mass += pm.weights[i];
            continue;
        }
        r.cloud += pm.weights[i] * tf.value(pm.points[i]);
    }
    const double cell = ref.cell_area();
    for (std::uint32_t i = 0; i < ref.window.nx; ++i)
        for (std::uint32_t j = 0; j < ref.window.ny; ++j) {
            const std::size_t k = ref.idx(i, j);
            if (ref.mask[k]) continue;
            r.field += ref.values[k] * tf.value(ref.window.center(i, j)) * cell;
        }
    return r;
}

}  // namespace biflab
