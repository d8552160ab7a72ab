#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "biflab/complex_core.hpp"

namespace biflab {

// Rectangular window in the complex plane, discretized into nx*ny cells.
// Values live at cell centers.
struct Window {
    double re_min = -2, re_max = 2, im_min = -2, im_max = 2;
    std::uint32_t nx = 0, ny = 0;

    void validate() const {
        if (!(re_min < re_max) || !(im_min < im_max)) throw std::invalid_argument("Window: empty extent");
        if (nx == 0 || ny == 0) throw std::invalid_argument("Window: nx, ny must be positive");
    }
    double hx() const { return (re_max - re_min) / nx; }
    double hy() const { return (im_max - im_min) / ny; }
    cplx center(std::uint32_t i, std::uint32_t j) const {
        return {re_min + (i + 0.5) * hx(), im_min + (j + 0.5) * hy()};
    }
    bool contains(cplx z) const {
        return z.real() >= re_min && z.real() < re_max && z.imag() >= im_min && z.imag() < im_max;
    }
    // cell index of z; caller checks contains() first
    std::uint32_t cell_i(double re) const {
        auto i = static_cast<std::int64_t>((re - re_min) / hx());
        if (i < 0) i = 0;
        if (i >= nx) i = nx - 1;
        return static_cast<std::uint32_t>(i);
    }
    std::uint32_t cell_j(double im) const {
        auto j = static_cast<std::int64_t>((im - im_min) / hy());
        if (j < 0) j = 0;
        if (j >= ny) j = ny - 1;
        return static_cast<std::uint32_t>(j);
    }
    bool operator==(const Window& o) const {
        return re_min == o.re_min && re_max == o.re_max && im_min == o.im_min && im_max == o.im_max && nx == o.nx &&
               ny == o.ny;
    }
};

// Sampled real-valued function on a Window; row-major values[i*ny + j] with i
// the re index. Masked cells are ignored by integrals.
struct ScalarField {
    Window window;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;  // nonzero = ignore

    ScalarField() = default;
    explicit ScalarField(Window w) : window(w) {
        window.validate();
        values.assign(static_cast<std::size_t>(w.nx) * w.ny, 0.0);
        mask.assign(values.size(), 0);
    }
    std::size_t idx(std::uint32_t i, std::uint32_t j) const { return static_cast<std::size_t>(i) * window.ny + j; }
    double& at(std::uint32_t i, std::uint32_t j) { return values[idx(i, j)]; }
    double at(std::uint32_t i, std::uint32_t j) const { return values[idx(i, j)]; }
    bool masked(std::uint32_t i, std::uint32_t j) const { return mask[idx(i, j)] != 0; }

    double cell_area() const { return window.hx() * window.hy(); }
    // integral of the density interpretation: sum value * cell area
    double integral() const {
        double s = 0;
        for (std::size_t k = 0; k < values.size(); ++k)
            if (!mask[k]) s += values[k];
        return s * cell_area();
    }
    // plain sum (for fields whose values are per-cell masses)
    double sum() const {
        double s = 0;
        for (std::size_t k = 0; k < values.size(); ++k)
            if (!mask[k]) s += values[k];
        return s;
    }
};

// Sampled function on a product of two windows (4 real dims), indices
// (i1,j1,i2,j2), value index ((i1*ny1 + j1)*nx2 + i2)*ny2 + j2.
struct Field4 {
    Window w1, w2;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    Field4() = default;
    Field4(Window a, Window b) : w1(a), w2(b) {
        w1.validate();
        w2.validate();
        values.assign(size(), 0.0);
        mask.assign(size(), 0);
    }
    std::size_t size() const {
        return static_cast<std::size_t>(w1.nx) * w1.ny * w2.nx * w2.ny;
    }
    std::size_t idx(std::uint32_t i1, std::uint32_t j1, std::uint32_t i2, std::uint32_t j2) const {
        return ((static_cast<std::size_t>(i1) * w1.ny + j1) * w2.nx + i2) * w2.ny + j2;
    }
    double& at(std::uint32_t i1, std::uint32_t j1, std::uint32_t i2, std::uint32_t j2) {
        return values[idx(i1, j1, i2, j2)];
    }
    double at(std::uint32_t i1, std::uint32_t j1, std::uint32_t i2, std::uint32_t j2) const {
        return values[idx(i1, j1, i2, j2)];
    }
    double cell_volume() const { return w1.hx() * w1.hy() * w2.hx() * w2.hy(); }
    double integral() const {
        double s = 0;
        for (std::size_t k = 0; k < values.size(); ++k)
            if (!mask[k]) s += values[k];
        return s * cell_volume();
    }
};

// Weighted point cloud in C (or C^2 when second is present).
struct PointMeasure {
    std::vector<cplx> points;
    std::vector<cplx> points2;            // second coordinate for C^2 clouds; empty for planar
    std::vector<double> weights;          // positive
    std::vector<std::string> point_flags; // optional per-point flags, parallel to points when used
    std::vector<std::string> flags;       // cloud-level flags

    bool planar() const { return points2.empty(); }
    std::size_t size() const { return points.size(); }
    double total_mass() const {
        double s = 0;
        for (double w : weights) s += w;
        return s;
    }
    void add(cplx z, double w) {
        points.push_back(z);
        weights.push_back(w);
    }
    void add2(cplx z1, cplx z2, double w) {
        points.push_back(z1);
        points2.push_back(z2);
        weights.push_back(w);
    }
    void sort_lex() {
        std::vector<std::size_t> order(points.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (points[a].real() != points[b].real()) return points[a].real() < points[b].real();
            if (points[a].imag() != points[b].imag()) return points[a].imag() < points[b].imag();
            return a < b;
        });
        PointMeasure tmp;
        for (std::size_t i : order) {
            tmp.points.push_back(points[i]);
            if (!points2.empty()) tmp.points2.push_back(points2[i]);
            tmp.weights.push_back(weights[i]);
            if (!point_flags.empty()) tmp.point_flags.push_back(point_flags[i]);
        }
        points.swap(tmp.points);
        points2.swap(tmp.points2);
        weights.swap(tmp.weights);
        point_flags.swap(tmp.point_flags);
    }
};

}  // namespace biflab
