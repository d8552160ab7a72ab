#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "biflab/complex_core.hpp"
#include "biflab/rng.hpp"

namespace biflab {

// A polynomial map of degree >= 2 together with its finite critical points.
class PolyMap {
  public:
    explicit PolyMap(DensePoly p) : p_(std::move(p)) {
        if (p_.degree() < 2) throw std::invalid_argument("PolyMap: degree must be >= 2");
        dp_ = poly_derivative(p_);
        criticals_ = find_roots(dp_, 1e-13);
        for (cplx c : criticals_) {
            double scale = 0;
            cplx v = poly_eval_scaled(dp_, c, scale);
            if (std::abs(v) > 64.0 * std::max(scale, 1e-280))
                throw std::runtime_error("PolyMap: critical point residual check failed");
        }
    }

    static PolyMap quadratic(cplx lambda) { return PolyMap(DensePoly({lambda, cplx(0), cplx(1)})); }

    const DensePoly& poly() const { return p_; }
    const DensePoly& deriv_poly() const { return dp_; }
    int degree() const { return p_.degree(); }
    const std::vector<cplx>& criticals() const { return criticals_; }

    cplx apply(cplx z) const { return poly_eval(p_, z); }
    cplx deriv(cplx z) const { return poly_eval(dp_, z); }

    // Sufficient escape radius: |z| >= R implies |p(z)| >= 2|z| and monotone escape.
    double escape_radius() const {
        const double L = std::abs(p_.lead());
        double sum = 0;
        for (int k = 0; k < p_.degree(); ++k) sum += std::abs(p_[static_cast<std::size_t>(k)]);
        double r = std::max(2.0, 2.0 * sum / L);
        r = std::max(r, std::pow(4.0 / L, 1.0 / (p_.degree() - 1)));
        return r;
    }

  private:
    DensePoly p_, dp_;
    std::vector<cplx> criticals_;
};

// Escape-rate Green's function, lim d^{-n} log|P^n(z)|. Returns 0 when the
// orbit stays bounded for max_iter steps. After first escape the orbit is
// followed 3 more steps (or to overflow guard), which telescopes the tail
// below 1e-12.
inline double green_value(const PolyMap& m, cplx z, int max_iter = 400, double escape_R = 0) {
    if (max_iter < 1) throw std::invalid_argument("green_value: max_iter >= 1");
    const double R = escape_R > 0 ? escape_R : m.escape_radius();
    const double d = m.degree();
    int extra = 0;
    double logd = std::log(d);
    for (int it = 1; it <= max_iter + 3; ++it) {
        z = m.apply(z);
        const double a = std::abs(z);
        if (extra > 0) ++extra;
        else if (a > R) extra = 1;
        if ((extra >= 4) || a > 1e100) return std::exp(-it * logd) * std::log(a);
        if (it >= max_iter && extra == 0) return 0.0;
    }
    return 0.0;
}

struct OrbitSample {
    std::vector<cplx> points;  // uniform weights summing to 1
};

namespace detail {
// all degree-d preimages of w under m
inline void preimages(const PolyMap& m, cplx w, std::vector<cplx>& out) {
    out.clear();
    if (m.degree() == 2) {
        // p(z) = az^2 + bz + c = w
        const cplx a = m.poly()[2], b = m.poly()[1], c = m.poly()[0] - w;
        const cplx disc = std::sqrt(b * b - 4.0 * a * c);
        const cplx q = (std::real(std::conj(b) * disc) >= 0) ? -0.5 * (b + disc) : -0.5 * (b - disc);
        if (std::abs(q) > 1e-300) {
            out.push_back(q / a);
            out.push_back(c / q);
        } else {
            out.push_back(-b / (2.0 * a));
            out.push_back(-b / (2.0 * a));
        }
        return;
    }
    DensePoly shifted = poly_sub(m.poly(), DensePoly::constant(w));
    out = find_roots(shifted, 1e-13);
}
}  // namespace detail

// Random backward orbit of the maximal-entropy measure (inverse iteration):
// repeatedly jump to a uniformly chosen d-th preimage, discarding burn_in.
inline OrbitSample brolin_sample(const PolyMap& m, int count, int burn_in, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("brolin_sample: count >= 1");
    Rng rng(seed, 0x6272u /*"br"*/);
    bool monomial = true;
    for (int k = 0; k < m.degree(); ++k)
        if (m.poly()[static_cast<std::size_t>(k)] != cplx(0)) monomial = false;
    cplx z = monomial ? cplx(2.0) : cplx(m.escape_radius() + 1.0);
    OrbitSample s;
    s.points.reserve(static_cast<std::size_t>(count));
    std::vector<cplx> pre;
    for (int it = 0; it < burn_in + count; ++it) {
        detail::preimages(m, z, pre);
        z = pre[rng.index(pre.size())];
        if (it >= burn_in) s.points.push_back(z);
    }
    return s;
}

namespace detail {
inline double batch_means_stderr(const std::vector<double>& xs, double mean) {
    const std::size_t n = xs.size();
    std::size_t b = static_cast<std::size_t>(std::sqrt(double(n)));
    if (b < 2) return 0;
    const std::size_t nb = n / b;
    double var = 0;
    for (std::size_t k = 0; k < nb; ++k) {
        double bm = 0;
        for (std::size_t i = k * b; i < (k + 1) * b; ++i) bm += xs[i];
        bm /= double(b);
        var += (bm - mean) * (bm - mean);
    }
    var /= double(nb - 1) * double(nb);
    return std::sqrt(var);
}
}  // namespace detail

struct Estimate {
    double value = 0;
    double stderr_ = 0;
};

// chi = int log|p'| dmu, sampled along a Brolin backward orbit. The planar
// derivative is the right one for polynomials (mu is compact in C).
inline Estimate lyapunov_ergodic(const PolyMap& m, int count, std::uint64_t seed) {
    if (count < 100) throw std::invalid_argument("lyapunov_ergodic: count >= 100");
    OrbitSample s = brolin_sample(m, count, 100, seed);
    std::vector<double> xs;
    xs.reserve(s.points.size());
    Rng rng(seed, 0x7265u);
    for (cplx z : s.points) {
        cplx dz = m.deriv(z);
        int guard = 0;
        while (std::abs(dz) < 1e-300 && guard++ < 64) {
            // hitting a critical point exactly is a measure-zero event: resample nearby
            z += cplx(1e-12 * rng.gaussian(), 1e-12 * rng.gaussian());
            dz = m.deriv(z);
        }
        xs.push_back(std::log(std::abs(dz)));
    }
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    return {mean, detail::batch_means_stderr(xs, mean)};
}

// Przytycki: chi = log d + sum over finite critical points of G(c).
inline double lyapunov_przytycki(const PolyMap& m, int max_iter = 400) {
    double chi = std::log(double(m.degree()));
    for (cplx c : m.criticals()) chi += green_value(m, c, max_iter);
    return chi;
}

struct PeriodicPoint {
    cplx point;
    int exact_period = 1;
    cplx multiplier;       // product of p' along the exact cycle
    bool grouping_warning = false;
};

namespace detail {
// Newton data for F(z) = p^n(z) - z with escape guard.
struct IterFixEval {
    const PolyMap* m;
    int n;
    NewtonSample operator()(cplx z) const {
        cplx w = z, dw = cplx(1);
        const double d = m->degree();
        for (int k = 1; k <= n; ++k) {
            dw *= m->deriv(w);
            w = m->apply(w);
            if (std::abs(w) > 1e60) {
                // F ~ p^{n-k}(w) and (log p^{n-k})'(w) ~ d^{n-k}/w
                const double rem = std::pow(d, double(n - k));
                cplx ratio = w / (rem * dw);
                if (!std::isfinite(ratio.real()) || !std::isfinite(ratio.imag())) ratio = cplx(1e-3);
                return {ratio, 1e30};
            }
        }
        cplx F = w - z, dF = dw - cplx(1);
        cplx ratio = (std::abs(dF) < 1e-290) ? cplx(1e-3) * (1.0 + std::abs(z)) : F / dF;
        // forward error of the n-step orbit is ~ eps * (|(f^n)'| + 1) * (1 + |z|)
        double rr = std::abs(F) / ((std::abs(dw) + 1.0) * (1.0 + std::abs(z)) * 1e-15);
        return {ratio, rr};
    }
};
}  // namespace detail

// All d^n fixed points of p^n (with multiplicity), with exact periods and
// cycle multipliers. Seeds come from the depth-n backward tree (one leaf per
// inverse branch), then Aberth resolves collisions and polishes.
inline std::vector<PeriodicPoint> periodic_points(const PolyMap& m, int n, std::size_t degree_cap = kMaxPolyDegree) {
    const int d = m.degree();
    double total = std::pow(double(d), double(n));
    if (total > double(degree_cap)) throw PolySizeError("periodic_points: d^n exceeds degree cap");
    const std::size_t N = static_cast<std::size_t>(total + 0.5);

    // backward tree seeds
    std::vector<cplx> seeds{cplx(m.escape_radius() + 0.7, 0.3)};
    std::vector<cplx> pre, nxt;
    for (int depth = 0; depth < n; ++depth) {
        nxt.clear();
        nxt.reserve(seeds.size() * static_cast<std::size_t>(d));
        for (cplx w : seeds) {
            detail::preimages(m, w, pre);
            nxt.insert(nxt.end(), pre.begin(), pre.end());
        }
        seeds.swap(nxt);
    }
    if (seeds.size() != N) seeds.resize(N, cplx(0.01, 0.02));

    AberthOptions opt;
    opt.max_sweeps = 400;
    opt.tol = 1e-13;
    detail::IterFixEval ev{&m, n};
    AberthResult res = aberth_solve(ev, std::move(seeds), opt);
    if (!res.converged && res.worst_step > 1e-6)
        throw RootFindError("periodic_points: Aberth did not converge", res.worst_step);

    std::vector<PeriodicPoint> out(N);
    std::vector<int> divisors;
    for (int k = 1; k <= n; ++k)
        if (n % k == 0) divisors.push_back(k);

    for (std::size_t i = 0; i < N; ++i) {
        PeriodicPoint pp;
        pp.point = res.roots[i];
        const double tol = 1e-6 * (1.0 + std::abs(pp.point));
        cplx w = pp.point;
        int prev = 0;
        pp.exact_period = n;
        for (int k = 1; k <= n; ++k) {
            w = m.apply(w);
            if (std::abs(w - pp.point) <= tol) {
                pp.exact_period = k;
                break;
            }
            (void)prev;
        }
        if (std::find(divisors.begin(), divisors.end(), pp.exact_period) == divisors.end())
            pp.grouping_warning = true;  // numerically off-divisor return time
        cplx mult = cplx(1);
        w = pp.point;
        for (int k = 0; k < pp.exact_period; ++k) {
            mult *= m.deriv(w);
            w = m.apply(w);
        }
        pp.multiplier = mult;
        out[i] = pp;
    }

    // cycle-grouping ambiguity: two distinct cycles closer than tolerance
    std::vector<cplx> sorted;
    sorted.reserve(N);
    for (auto& pp : out) sorted.push_back(pp.point);
    std::sort(sorted.begin(), sorted.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    for (auto& pp : out) {
        // conservative local check against the sorted list
        const double tol = 1e-6 * (1.0 + std::abs(pp.point));
        auto it = std::lower_bound(sorted.begin(), sorted.end(), pp.point, [](cplx a, cplx b) {
            return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
        });
        for (int off = -2; off <= 2; ++off) {
            auto jt = it + off;
            if (jt < sorted.begin() || jt >= sorted.end()) continue;
            cplx q = *jt;
            if (q == pp.point) continue;
            double dist = std::abs(q - pp.point);
            if (dist > 1e-14 * (1.0 + std::abs(pp.point)) && dist < tol) pp.grouping_warning = true;
        }
    }
    return out;
}

// Repelling-cycle reading of the Lyapunov exponent:
// d^{-n} sum over repelling period-n points of (1/n) log^+ |(p^n)'|,
// which per point equals (1/m) log^+ |cycle multiplier| for exact period m.
inline double lyapunov_periodic(const PolyMap& m, int n, std::size_t degree_cap = kMaxPolyDegree) {
    auto pts = periodic_points(m, n, degree_cap);
    double sum = 0;
    for (const auto& pp : pts) {
        const double am = std::abs(pp.multiplier);
        if (am > 1.0 + 1e-9) sum += std::log(am) / double(pp.exact_period);
    }
    return sum / std::pow(double(m.degree()), double(n));
}

}  // namespace biflab
