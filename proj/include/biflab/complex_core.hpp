#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "biflab/parallel.hpp"
#include "biflab/rng.hpp"

namespace biflab {

using cplx = std::complex<double>;

constexpr double kChartSwitch = 1e8;      // |z| above this: work in the chart at infinity
constexpr std::size_t kMaxPolyDegree = 1u << 14;

struct PolySizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RootFindError : std::runtime_error {
    RootFindError(const std::string& what, double worst) : std::runtime_error(what), worst_residual(worst) {}
    double worst_residual;
};

// Dense complex polynomial, coefficients ascending: c[k] multiplies z^k.
// Normalized form keeps the top stored coefficient nonzero (zero poly: empty).
class DensePoly {
  public:
    DensePoly() = default;
    explicit DensePoly(std::vector<cplx> coeffs) : c_(std::move(coeffs)) { trim(); }
    static DensePoly constant(cplx v) { return DensePoly({v}); }
    static DensePoly identity() { return DensePoly({cplx(0), cplx(1)}); }

    const std::vector<cplx>& coeffs() const { return c_; }
    bool is_zero() const { return c_.empty(); }
    int degree() const { return c_.empty() ? -1 : static_cast<int>(c_.size()) - 1; }
    cplx lead() const { return c_.empty() ? cplx(0) : c_.back(); }
    cplx operator[](std::size_t k) const { return k < c_.size() ? c_[k] : cplx(0); }

    void trim() {
        while (!c_.empty() && c_.back() == cplx(0)) c_.pop_back();
    }

    double max_coeff_mod() const {
        double m = 0;
        for (auto& v : c_) m = std::max(m, std::abs(v));
        return m;
    }

    DensePoly& scale_coeffs(double s) {
        for (auto& v : c_) v *= s;
        return *this;
    }

  private:
    std::vector<cplx> c_;
};

inline cplx poly_eval(const DensePoly& p, cplx z) {
    cplx acc(0);
    const auto& c = p.coeffs();
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * z + c[i];
    return acc;
}

// Horner with the standard running error bound: |computed - exact| <= scale * eps.
inline cplx poly_eval_scaled(const DensePoly& p, cplx z, double& scale) {
    cplx acc(0);
    double s = 0;
    const double az = std::abs(z);
    const auto& c = p.coeffs();
    for (std::size_t i = c.size(); i-- > 0;) {
        acc = acc * z + c[i];
        s = s * az + std::abs(acc);
    }
    scale = s * std::numeric_limits<double>::epsilon() * 4.0;
    return acc;
}

inline void poly_eval_pair(const DensePoly& p, cplx z, cplx& val, cplx& deriv) {
    cplx v(0), d(0);
    const auto& c = p.coeffs();
    for (std::size_t i = c.size(); i-- > 0;) {
        d = d * z + v;
        v = v * z + c[i];
    }
    val = v;
    deriv = d;
}

inline DensePoly poly_derivative(const DensePoly& p) {
    if (p.degree() <= 0) return DensePoly();
    std::vector<cplx> out(static_cast<std::size_t>(p.degree()));
    for (std::size_t k = 1; k < p.coeffs().size(); ++k) out[k - 1] = p.coeffs()[k] * static_cast<double>(k);
    return DensePoly(std::move(out));
}

inline DensePoly poly_add(const DensePoly& a, const DensePoly& b) {
    std::vector<cplx> out(std::max(a.coeffs().size(), b.coeffs().size()), cplx(0));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return DensePoly(std::move(out));
}

inline DensePoly poly_sub(const DensePoly& a, const DensePoly& b) {
    std::vector<cplx> out(std::max(a.coeffs().size(), b.coeffs().size()), cplx(0));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return DensePoly(std::move(out));
}

inline DensePoly poly_mul(const DensePoly& a, const DensePoly& b, std::size_t max_degree = kMaxPolyDegree) {
    if (a.is_zero() || b.is_zero()) return DensePoly();
    const std::size_t da = a.coeffs().size(), db = b.coeffs().size();
    if (da + db - 2 > max_degree)
        throw PolySizeError("poly_mul: result degree " + std::to_string(da + db - 2) + " exceeds cap " +
                            std::to_string(max_degree));
    std::vector<cplx> out(da + db - 1, cplx(0));
    for (std::size_t i = 0; i < da; ++i) {
        const cplx ai = a.coeffs()[i];
        if (ai == cplx(0)) continue;
        for (std::size_t j = 0; j < db; ++j) out[i + j] += ai * b.coeffs()[j];
    }
    return DensePoly(std::move(out));
}

// p(q(z)) by Horner in q.
inline DensePoly poly_compose(const DensePoly& p, const DensePoly& q, std::size_t max_degree = kMaxPolyDegree) {
    if (p.is_zero()) return DensePoly();
    if (p.degree() >= 1 && q.degree() >= 1) {
        const std::size_t target = static_cast<std::size_t>(p.degree()) * static_cast<std::size_t>(q.degree());
        if (target > max_degree)
            throw PolySizeError("poly_compose: result degree " + std::to_string(target) + " exceeds cap " +
                                std::to_string(max_degree));
    }
    DensePoly acc = DensePoly::constant(p.coeffs().back());
    for (std::size_t i = p.coeffs().size() - 1; i-- > 0;) {
        acc = poly_mul(acc, q, max_degree);
        acc = poly_add(acc, DensePoly::constant(p.coeffs()[i]));
    }
    return acc;
}

inline DensePoly poly_from_roots(const std::vector<cplx>& roots, cplx lead = cplx(1)) {
    DensePoly p = DensePoly::constant(lead);
    for (cplx r : roots) p = poly_mul(p, DensePoly({-r, cplx(1)}));
    return p;
}

// --- Aberth-Ehrlich simultaneous iteration -------------------------------
//
// The solver is generic over the evaluation route so callers with structured
// polynomials (iterated orbit relations) can supply stable O(n) evaluators
// instead of dense Horner. An evaluator maps z to the Newton ratio p/p'
// together with a residual measured against the local evaluation-error scale.

struct NewtonSample {
    cplx ratio;            // p(z)/p'(z), stably computed
    double resid_rel;      // |p(z)| / error-scale; <= 1 means numerically a root
};

struct AberthOptions {
    int max_sweeps = 200;
    double tol = 1e-13;          // per-root |step| gate, relative to 1+|z|
    double resid_gate = 64.0;    // accept when resid_rel <= resid_gate as well
    double step_clamp = 0.5;     // max step, relative to 1+|z|
};

struct AberthResult {
    std::vector<cplx> roots;
    int sweeps = 0;
    bool converged = false;
    double worst_step = 0;
};

template <typename Eval>
AberthResult aberth_solve(const Eval& eval, std::vector<cplx> z, const AberthOptions& opt = {}) {
    const std::size_t n = z.size();
    std::vector<char> done(n, 0);
    std::vector<cplx> corr(n, cplx(0));
    AberthResult result;
    const bool parallel = n >= 256;

    for (int sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
        result.sweeps = sweep;
        auto kernel = [&](std::size_t i) {
            if (done[i]) {
                corr[i] = cplx(0);
                return;
            }
            NewtonSample s = eval(z[i]);
            // pairwise repulsion sum, raw arithmetic to keep the loop tight
            double sr = 0, si = 0;
            const double xr = z[i].real(), xi = z[i].imag();
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double dr = xr - z[j].real(), di = xi - z[j].imag();
                const double d2 = dr * dr + di * di;
                if (d2 < 1e-300) continue;
                sr += dr / d2;
                si += -di / d2;
            }
            const cplx S(sr, si);
            cplx denom = cplx(1) - s.ratio * S;
            cplx step = (std::abs(denom) < 1e-280) ? s.ratio : s.ratio / denom;
            if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) step = cplx(1e-3, 1e-3);
            const double cap = opt.step_clamp * (1.0 + std::abs(z[i]));
            const double as = std::abs(step);
            if (as > cap) step *= cap / as;
            corr[i] = step;
            if (as < opt.tol * (1.0 + std::abs(z[i])) && s.resid_rel <= opt.resid_gate) done[i] = 1;
        };
        if (parallel)
            parallel_for(n, kernel);
        else
            for (std::size_t i = 0; i < n; ++i) kernel(i);

        bool all = true;
        double worst = 0;
        for (std::size_t i = 0; i < n; ++i) {
            z[i] -= corr[i];
            if (!done[i]) all = false;
            worst = std::max(worst, std::abs(corr[i]));
        }
        result.worst_step = worst;
        if (all) {
            result.converged = true;
            break;
        }
    }
    result.roots = std::move(z);
    return result;
}

struct DensePolyEvaluator {
    const DensePoly* p;
    NewtonSample operator()(cplx z) const {
        cplx val(0), der(0);
        double s = 0;
        const double az = std::abs(z);
        const auto& c = p->coeffs();
        for (std::size_t i = c.size(); i-- > 0;) {
            der = der * z + val;
            val = val * z + c[i];
            s = s * az + std::abs(val);
        }
        const double scale = s * std::numeric_limits<double>::epsilon() * 4.0;
        cplx ratio;
        if (std::abs(der) < 1e-290) {
            ratio = cplx(1e-3, 1e-3) * (1.0 + std::abs(z));
        } else {
            ratio = val / der;
        }
        double rr = scale > 0 ? std::abs(val) / scale : 0.0;
        return {ratio, rr};
    }
};

inline std::vector<cplx> aberth_circle_guesses(int degree, double radius, std::uint64_t seed = 0x5eedULL) {
    Rng rng(seed);
    std::vector<cplx> z(static_cast<std::size_t>(degree));
    for (int k = 0; k < degree; ++k) {
        double th = 6.283185307179586 * (k + 0.5) / degree + 0.003 * rng.gaussian();
        double r = radius * (1.0 + 0.02 * rng.gaussian());
        z[static_cast<std::size_t>(k)] = cplx(r * std::cos(th), r * std::sin(th)) + cplx(0.21, 0.13) / double(degree);
    }
    return z;
}

// Roots of p with multiplicity (clusters come back as near-coincident values).
// Guesses on a perturbed circle at the Cauchy bound; coefficients are
// max-modulus normalized first (roots are invariant under scaling).
inline std::vector<cplx> find_roots(const DensePoly& p_in, double tol = 1e-12, int max_sweeps = 200) {
    if (p_in.degree() < 1) throw std::invalid_argument("find_roots: degree must be >= 1");
    DensePoly p = p_in;
    const double m = p.max_coeff_mod();
    if (m > 1e280 || (m > 0 && m < 1e-280)) {
        p.scale_coeffs(1.0 / m);  // log-scaling fallback for astronomically scaled inputs
    } else if (m > 0) {
        p.scale_coeffs(1.0 / m);
    }

    // exact deflation of zero roots (low coefficients exactly zero)
    std::size_t zshift = 0;
    while (zshift < p.coeffs().size() && p.coeffs()[zshift] == cplx(0)) ++zshift;
    std::vector<cplx> zero_roots(zshift, cplx(0));
    DensePoly q = p;
    if (zshift > 0) {
        std::vector<cplx> c(p.coeffs().begin() + static_cast<std::ptrdiff_t>(zshift), p.coeffs().end());
        q = DensePoly(std::move(c));
    }
    if (q.degree() < 1) return zero_roots;

    double cauchy = 0;
    for (int k = 0; k < q.degree(); ++k) cauchy = std::max(cauchy, std::abs(q[static_cast<std::size_t>(k)]));
    cauchy = 1.0 + cauchy / std::abs(q.lead());

    AberthOptions opt;
    opt.max_sweeps = max_sweeps;
    opt.tol = std::max(tol * 1e-1, 1e-15);
    DensePolyEvaluator ev{&q};
    AberthResult res = aberth_solve(ev, aberth_circle_guesses(q.degree(), cauchy), opt);
    if (!res.converged) {
        // second chance from a different start configuration
        AberthResult res2 = aberth_solve(ev, aberth_circle_guesses(q.degree(), 0.5 * cauchy, 0xabcdULL), opt);
        if (res2.converged || res2.worst_step < res.worst_step) res = std::move(res2);
    }
    // final residual check
    double worst = 0;
    for (cplx r : res.roots) {
        double scale = 0;
        cplx v = poly_eval_scaled(q, r, scale);
        double rel = scale > 0 ? std::abs(v) / scale : std::abs(v);
        worst = std::max(worst, rel);
    }
    if (!res.converged && worst > 1e6)
        throw RootFindError("find_roots: no convergence after max sweeps", worst);

    std::vector<cplx> out = std::move(zero_roots);
    out.insert(out.end(), res.roots.begin(), res.roots.end());
    return out;
}

// --- Riemann sphere -------------------------------------------------------

struct SpherePoint {
    cplx value{0};
    bool at_infinity{false};

    static SpherePoint infinity() { return {cplx(0), true}; }
    static SpherePoint of(cplx v) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || std::abs(v) > 1e300) return infinity();
        return {v, false};
    }
    bool operator==(const SpherePoint& o) const {
        if (at_infinity || o.at_infinity) return at_infinity == o.at_infinity;
        return value == o.value;
    }
};

// Local jet of a map to P^1 sampled on a cross of spacings hx, hy.
struct SphereJet {
    SpherePoint center, xp, xm, yp, ym;
    double hx = 1, hy = 1;

    static SphereJet of(SpherePoint c, SpherePoint xplus, SpherePoint xminus, SpherePoint yplus, SpherePoint yminus,
                        double spacing_x, double spacing_y) {
        return {c, xplus, xminus, yplus, yminus, spacing_x, spacing_y};
    }
};

// Squared spherical derivative |g'|^2 / (1+|g|^2)^2 by central differences,
// chart-corrected near infinity (the Fubini-Study density is chart invariant).
// Total FS mass 1 corresponds to multiplying this by 1/pi.
inline double spherical_derivative(const SphereJet& jet) {
    auto finite_mag = [](const SpherePoint& p) { return p.at_infinity ? std::numeric_limits<double>::infinity() : std::abs(p.value); };
    const bool use_inf_chart = finite_mag(jet.center) > kChartSwitch;
    auto chart = [&](const SpherePoint& p, bool inf_chart, bool& ok) -> cplx {
        if (!inf_chart) {
            ok = !p.at_infinity;
            return p.value;
        }
        if (p.at_infinity) {
            ok = true;
            return cplx(0);
        }
        ok = std::abs(p.value) > 1e-300;
        return ok ? cplx(1) / p.value : cplx(0);
    };
    for (int attempt = 0; attempt < 2; ++attempt) {
        const bool inf_chart = (attempt == 0) ? use_inf_chart : !use_inf_chart;
        bool ok = true, o;
        cplx c = chart(jet.center, inf_chart, o); ok &= o;
        cplx xp = chart(jet.xp, inf_chart, o); ok &= o;
        cplx xm = chart(jet.xm, inf_chart, o); ok &= o;
        cplx yp = chart(jet.yp, inf_chart, o); ok &= o;
        cplx ym = chart(jet.ym, inf_chart, o); ok &= o;
        if (!ok) continue;
        const cplx gx = (xp - xm) / (2.0 * jet.hx);
        const cplx gy = (yp - ym) / (2.0 * jet.hy);
        // for holomorphic g both real slopes have modulus |g'|
        const double g2 = std::norm(c);
        const double denom = (1.0 + g2) * (1.0 + g2);
        const double num = 0.5 * (std::norm(gx) + std::norm(gy));
        const double val = num / denom;
        if (std::isfinite(val)) return val;
    }
    return -1.0;  // flagged sentinel: degenerate in both charts
}

}  // namespace biflab
