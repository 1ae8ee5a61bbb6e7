#include "tack/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::pseudo {

namespace c = tack::constants;

void RfDrive::validate() const {
    if (!(amplitude > 0.0)) fail(ErrorCode::ConfigError, "RF amplitude must be positive");
    if (!(frequency > 0.0)) fail(ErrorCode::ConfigError, "RF frequency must be positive");
}

double RfDrive::angular_frequency() const { return 2.0 * c::pi * frequency; }

IonSpecies IonSpecies::barium138() { return {137.905247 * c::atomic_mass_unit, c::elementary_charge}; }

void IonSpecies::validate() const {
    if (!(mass > 0.0)) fail(ErrorCode::ConfigError, "ion mass must be positive");
    if (charge == 0.0 || !std::isfinite(charge)) fail(ErrorCode::ConfigError, "ion charge must be nonzero");
}

ScalarField2D pseudopotential(const ScalarField2D& rf_unit, const RfDrive& drive, const IonSpecies& ion,
                              const ScalarField2D* dc) {
    drive.validate();
    ion.validate();
    const double w = drive.angular_frequency();
    const double scale =
        ion.charge * ion.charge * drive.amplitude * drive.amplitude / (4.0 * ion.mass * w * w) / c::electron_volt;
    const auto e = field::gradient(rf_unit);
    ScalarField2D psi{rf_unit.mask, std::vector<double>(rf_unit.values.size())};
    for (std::size_t n = 0; n < psi.values.size(); ++n) psi.values[n] = scale * (e.er[n] * e.er[n] + e.ez[n] * e.ez[n]);
    if (dc) {
        const double q_e = ion.charge / c::elementary_charge;
        for (std::size_t n = 0; n < psi.values.size(); ++n) psi.values[n] += q_e * dc->values[n];
    }
    return psi;
}

namespace {

bool vacuum(const ScalarField2D& f, int i, int j) { return !f.mask->is_electrode(i, j); }

bool touches_electrode(const ScalarField2D& f, int i, int j) {
    const int nr = f.nr(), nz = f.nz();
    if (i + 1 < nr && f.mask->is_electrode(i + 1, j)) return true;
    if (i > 0 && f.mask->is_electrode(i - 1, j)) return true;
    if (j + 1 < nz && f.mask->is_electrode(i, j + 1)) return true;
    if (j > 0 && f.mask->is_electrode(i, j - 1)) return true;
    return false;
}

// Second derivative along z at node (i, j), 5-point where possible.
double d2z(const ScalarField2D& f, int i, int j) {
    const double h = f.grid().spacing;
    if (j >= 2 && j + 2 < f.nz())
        return (-f.at(i, j - 2) + 16 * f.at(i, j - 1) - 30 * f.at(i, j) + 16 * f.at(i, j + 1) - f.at(i, j + 2)) /
               (12 * h * h);
    return (f.at(i, j - 1) - 2 * f.at(i, j) + f.at(i, j + 1)) / (h * h);
}

// Second derivative along r on the axis; the field is even in r.
double d2r_axis(const ScalarField2D& f, int j) {
    const double h = f.grid().spacing;
    return (-2 * f.at(2, j) + 32 * f.at(1, j) - 30 * f.at(0, j)) / (12 * h * h);
}

// Psi on the axis at arbitrary z, cubic through the four nearest rows.
double axis_value(const ScalarField2D& f, double z) {
    const auto& g = f.grid();
    double t = (z - g.z_min) / g.spacing;
    int j = std::clamp(static_cast<int>(std::floor(t)), 1, f.nz() - 3);
    t -= j;
    const double p0 = f.at(0, j - 1), p1 = f.at(0, j), p2 = f.at(0, j + 1), p3 = f.at(0, j + 2);
    return p1 + 0.5 * t * (p2 - p0 + t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
}

} // namespace

Minimum find_minimum(const ScalarField2D& psi, const AxisWindow& window) {
    const auto& g = psi.grid();
    const int nz = psi.nz();
    const double z_lo = std::clamp(window.z_lo, g.z_min, g.z_max), z_hi = std::clamp(window.z_hi, g.z_min, g.z_max);
    int j_lo = std::max(1, static_cast<int>(std::ceil((z_lo - g.z_min) / g.spacing - 1e-9)));
    int j_hi = std::min(nz - 2, static_cast<int>(std::floor((z_hi - g.z_min) / g.spacing + 1e-9)));
    // Skip electrode nodes at the bottom of the window (the needle tip itself).
    while (j_lo <= j_hi && !vacuum(psi, 0, j_lo)) ++j_lo;
    for (int j = j_lo + 1; j < j_hi; ++j) {
        if (!vacuum(psi, 0, j) || !vacuum(psi, 0, j - 1) || !vacuum(psi, 0, j + 1)) continue;
        const double a = psi.at(0, j - 1), b = psi.at(0, j), cc = psi.at(0, j + 1);
        if (!(b <= a && b < cc)) continue;
        if (psi.nr() > 2 && !(psi.at(1, j) > b)) continue;  // radially unconfined
        const double denom = a - 2 * b + cc;
        const double off = denom > 0 ? std::clamp(0.5 * (a - cc) / denom, -0.5, 0.5) : 0.0;
        Minimum m;
        m.z = g.z(j) + off * g.spacing;
        m.value = denom > 0 ? b - 0.125 * (a - cc) * (a - cc) / denom : b;
        if (a >= 0 && b >= 0 && cc >= 0) m.value = std::max(m.value, 0.0);
        m.row = j;
        return m;
    }
    fail(ErrorCode::NoInteriorMinimum, "no local pseudopotential minimum on the axis between z = " +
                                           std::to_string(z_lo * 1e3) + " mm and " + std::to_string(z_hi * 1e3) + " mm");
}

Depth trap_depth(const ScalarField2D& psi, const Minimum& minimum) {
    const int nr = psi.nr(), nz = psi.nz();
    const auto& g = psi.grid();
    const int j0 = minimum.row;
    const double start = psi.at(0, j0);
    const double tiny = 1e-12 * std::max(std::abs(start), 1e-30);

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    std::vector<char> seen(static_cast<std::size_t>(nr) * nz, 0);
    heap.push({start, psi.mask->index(0, j0)});
    seen[psi.mask->index(0, j0)] = 1;

    double level = start;
    std::size_t saddle = psi.mask->index(0, j0);
    Depth out;
    while (!heap.empty()) {
        const auto [v, n] = heap.top();
        heap.pop();
        const int i = static_cast<int>(n % nr), j = static_cast<int>(n / nr);
        if (v > level) {
            level = v;
            saddle = n;
        }
        const bool box = i == nr - 1 || j == 0 || j == nz - 1;
        const bool other_basin = level > start + tiny && v <= start;
        if (box || touches_electrode(psi, i, j) || other_basin) break;
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
            const int a = i + di[k], b = j + dj[k];
            if (a < 0 || a >= nr || b < 0 || b >= nz) continue;
            const std::size_t m = psi.mask->index(a, b);
            if (seen[m] || !vacuum(psi, a, b)) continue;
            seen[m] = 1;
            heap.push({psi.values[m], m});
        }
    }
    out.escape_level = level;
    out.depth = std::max(0.0, level - std::min(minimum.value, start));
    out.saddle_r = g.r(static_cast<int>(saddle % nr));
    out.saddle_z = g.z(static_cast<int>(saddle / nr));
    return out;
}

namespace {

SecularFrequencies to_frequencies(double kz_ev, double kr_ev, const IonSpecies& ion) {
    if (!(kz_ev > 0.0) || !(kr_ev > 0.0))
        fail(ErrorCode::SaddleNotMinimum, "pseudopotential curvature is not positive in both directions (axial " +
                                              std::to_string(kz_ev) + " eV/m^2, radial " + std::to_string(kr_ev) +
                                              " eV/m^2)");
    const double two_pi = 2.0 * c::pi;
    return {std::sqrt(kz_ev * c::electron_volt / ion.mass) / two_pi,
            std::sqrt(kr_ev * c::electron_volt / ion.mass) / two_pi};
}

// Least-squares a + b x + c x^2; returns c.
double quadratic_coefficient(const std::vector<double>& x, const std::vector<double>& y) {
    double s[5] = {0, 0, 0, 0, 0}, t[3] = {0, 0, 0};
    for (std::size_t k = 0; k < x.size(); ++k) {
        double p = 1;
        for (int e = 0; e < 5; ++e) {
            s[e] += p;
            if (e < 3) t[e] += p * y[k];
            p *= x[k];
        }
    }
    // Normal equations, Cramer's rule.
    const double m[3][3] = {{s[0], s[1], s[2]}, {s[1], s[2], s[3]}, {s[2], s[3], s[4]}};
    auto det3 = [](const double a[3][3]) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    double mc[3][3];
    std::copy(&m[0][0], &m[0][0] + 9, &mc[0][0]);
    for (int r = 0; r < 3; ++r) mc[r][2] = t[r];
    return det3(mc) / det3(m);
}

} // namespace

SecularFrequencies secular_frequencies(const ScalarField2D& psi, const Minimum& minimum, const IonSpecies& ion) {
    ion.validate();
    const auto& g = psi.grid();
    const double t = (minimum.z - g.z_min) / g.spacing;
    const int j = std::clamp(static_cast<int>(std::floor(t)), 2, psi.nz() - 4);
    const double w = t - j;
    const double kz = (1 - w) * d2z(psi, 0, j) + w * d2z(psi, 0, j + 1);
    const double kr = (1 - w) * d2r_axis(psi, j) + w * d2r_axis(psi, j + 1);
    return to_frequencies(kz, kr, ion);
}

SecularFrequencies secular_frequencies_fit(const ScalarField2D& psi, const Minimum& minimum, const IonSpecies& ion,
                                           int half_width) {
    ion.validate();
    const auto& g = psi.grid();
    const double h = g.spacing;
    std::vector<double> x, y;
    for (int k = -half_width; k <= half_width; ++k) {
        const double z = minimum.z + k * h;
        x.push_back(k * h);
        y.push_back(axis_value(psi, z));
    }
    const double kz = 2.0 * quadratic_coefficient(x, y);
    // Radial: even fit a + c r^2 at the interpolated minimum height, mirrored about the axis.
    x.clear();
    y.clear();
    const double t = (minimum.z - g.z_min) / h;
    const int j = std::clamp(static_cast<int>(std::floor(t)), 0, psi.nz() - 2);
    const double w = t - j;
    for (int k = -half_width; k <= half_width; ++k) {
        const int i = std::abs(k);
        x.push_back(k * h);
        y.push_back((1 - w) * psi.at(i, j) + w * psi.at(i, j + 1));
    }
    const double kr = 2.0 * quadratic_coefficient(x, y);
    return to_frequencies(kz, kr, ion);
}

TrapAnalysis analyze(const ScalarField2D& psi, const IonSpecies& ion, const AxisWindow& window) {
    TrapAnalysis a;
    a.minimum = find_minimum(psi, window);
    a.tip_distance = a.minimum.z - window.z_lo;
    a.depth = trap_depth(psi, a.minimum);
    a.secular = secular_frequencies(psi, a.minimum, ion);
    return a;
}

AxisWindow axis_window(const geometry::TrapGeometry& geometry, const geometry::GridSpec& grid) {
    AxisWindow w;
    w.z_lo = geometry.needle ? geometry.needle->tip_z : 0.0;
    w.z_hi = geometry.plate ? geometry.plate->height_z - 0.5 * geometry.plate->thickness : grid.z_max;
    return w;
}

TrapSolution solve_trap(const geometry::TrapGeometry& geometry, const geometry::GridSpec& grid, const RfDrive& drive,
                        const IonSpecies& ion, const field::SolveOptions& options) {
    auto mask = std::make_shared<const geometry::ElectrodeMask>(geometry::rasterize(geometry, grid));
    auto [rf, report] = field::solve_rf_unit(mask, options);
    bool has_dc = false;
    for (const auto& e : mask->electrodes()) has_dc |= e.role.kind == geometry::RoleKind::DC && e.role.bias != 0.0;
    ScalarField2D psi;
    if (has_dc) {
        auto dc = field::solve_dc(mask, options).first;
        psi = pseudopotential(rf, drive, ion, &dc);
    } else {
        psi = pseudopotential(rf, drive, ion);
    }
    auto analysis = analyze(psi, ion, axis_window(geometry, grid));
    return {std::move(rf), std::move(psi), report, analysis};
}

ScanResult needle_scan(const geometry::TrapGeometry& geometry, const geometry::GridSpec& grid,
                       const std::vector<double>& tip_positions, const RfDrive& drive, const IonSpecies& ion,
                       const field::SolveOptions& options, double central_span) {
    if (!geometry.needle) fail(ErrorCode::ConfigError, "needle scan requires a needle");
    ScanResult out;
    for (double tip : tip_positions) {
        ScanRow row;
        row.tip_z = tip;
        auto g = geometry;
        g.needle->tip_z = tip;
        try {
            const auto sol = solve_trap(g, grid, drive, ion, options);
            row.ok = true;
            row.minimum_z = sol.analysis.minimum.z;
            row.depth = sol.analysis.depth.depth;
            row.axial = sol.analysis.secular.axial;
            row.radial = sol.analysis.secular.radial;
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::Physics) throw;
            row.error = to_string(e.code());
        }
        out.rows.push_back(row);
    }
    if (tip_positions.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(tip_positions.begin(), tip_positions.end());
    const double mid = 0.5 * (*lo_it + *hi_it);
    out.central_lo = mid - 0.5 * central_span;
    out.central_hi = mid + 0.5 * central_span;

    std::vector<const ScanRow*> central;
    for (const auto& r : out.rows)
        if (r.ok && r.tip_z >= out.central_lo - 1e-12 && r.tip_z <= out.central_hi + 1e-12) central.push_back(&r);
    const double n = static_cast<double>(central.size());
    if (central.size() >= 2) {
        double sx = 0, sy = 0;
        for (auto* r : central) sx += r->tip_z, sy += r->minimum_z;
        const double mx = sx / n, my = sy / n;
        double sxx = 0, sxy = 0, syy = 0;
        for (auto* r : central) {
            sxx += (r->tip_z - mx) * (r->tip_z - mx);
            sxy += (r->tip_z - mx) * (r->minimum_z - my);
            syy += (r->minimum_z - my) * (r->minimum_z - my);
        }
        out.slope = sxx > 0 ? sxy / sxx : 0.0;
        out.r_squared = (sxx > 0 && syy > 0) ? sxy * sxy / (sxx * syy) : 1.0;
    } else if (central.size() == 1) {
        out.r_squared = 1.0;
    }
    if (!central.empty()) {
        double mean = 0;
        for (auto* r : central) mean += r->depth;
        mean /= n;
        for (auto* r : central) out.depth_variation = std::max(out.depth_variation, std::abs(r->depth / mean - 1.0));
    }
    return out;
}

} // namespace tack::pseudo
