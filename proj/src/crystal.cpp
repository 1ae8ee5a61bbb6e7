#include "tack/crystal.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::crystal {

namespace c = tack::constants;

TrapModel TrapModel::harmonic(double axial_hz, double radial_hz, double center_z) {
    if (!(axial_hz > 0.0) || !(radial_hz > 0.0))
        fail(ErrorCode::ConfigError, "harmonic trap frequencies must be positive");
    TrapModel t;
    t.mode_ = Mode::Harmonic;
    t.axial_hz_ = axial_hz;
    t.radial_hz_ = radial_hz;
    t.center_z_ = center_z;
    return t;
}

TrapModel TrapModel::gridded(std::shared_ptr<const field::ScalarField2D> psi, double center_z) {
    if (!psi || psi->values.empty()) fail(ErrorCode::ConfigError, "gridded trap needs a pseudopotential");
    TrapModel t;
    t.mode_ = Mode::Gridded;
    t.psi_ = std::move(psi);
    t.center_z_ = center_z;
    double dr, dz;
    t.sample(0.0, center_z, t.psi_center_, dr, dz);
    // Reference curvatures (for 138Ba+) only set the internal length scale.
    pseudo::Minimum m;
    m.z = center_z;
    m.value = t.psi_center_;
    m.row = static_cast<int>(std::lround((center_z - t.psi_->grid().z_min) / t.psi_->grid().spacing));
    const auto f = pseudo::secular_frequencies(*t.psi_, m, IonSpecies::barium138());
    t.axial_hz_ = f.axial;
    t.radial_hz_ = f.radial;
    return t;
}

namespace {

// Catmull-Rom weights and their derivatives for fractional offset t.
void cr_weights(double t, double w[4], double dw[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2 * t2 - t);
    w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
    w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
    dw[0] = 0.5 * (-3 * t2 + 4 * t - 1);
    dw[1] = 0.5 * (9 * t2 - 10 * t);
    dw[2] = 0.5 * (-9 * t2 + 8 * t + 1);
    dw[3] = 0.5 * (3 * t2 - 2 * t);
}

} // namespace

void TrapModel::sample(double r, double z, double& value, double& d_r, double& d_z) const {
    const auto& f = *psi_;
    const auto& g = f.grid();
    const double h = g.spacing;
    r = std::abs(r);
    const double tr = r / h, tz = (z - g.z_min) / h;
    if (tr > f.nr() - 2 || tz < 1 || tz > f.nz() - 3)
        fail(ErrorCode::NoConvergence, fmt::format("ion left the gridded field at r={:.4g} mm, z={:.4g} mm",
                                                   r * 1e3, z * 1e3));
    const int i0 = static_cast<int>(std::floor(tr)), j0 = static_cast<int>(std::floor(tz));
    double wr[4], dwr[4], wz[4], dwz[4];
    cr_weights(tr - i0, wr, dwr);
    cr_weights(tz - j0, wz, dwz);
    value = d_r = d_z = 0.0;
    for (int b = 0; b < 4; ++b) {
        const int j = j0 - 1 + b;
        for (int a = 0; a < 4; ++a) {
            const int i = std::min(std::abs(i0 - 1 + a), f.nr() - 1);  // even in r
            const double v = f.at(i, j);
            value += wr[a] * wz[b] * v;
            d_r += dwr[a] * wz[b] * v;
            d_z += wr[a] * dwz[b] * v;
        }
    }
    d_r /= h;
    d_z /= h;
}

double TrapModel::energy(const Vec3& p, const IonSpecies& ion) const {
    if (mode_ == Mode::Harmonic) {
        const double wr = 2 * c::pi * radial_hz_, wz = 2 * c::pi * axial_hz_;
        const double dz = p.z - center_z_;
        return 0.5 * ion.mass * (wr * wr * (p.x * p.x + p.y * p.y) + wz * wz * dz * dz);
    }
    double v, dr, dz;
    sample(p.rho(), p.z, v, dr, dz);
    return (v - psi_center_) * c::electron_volt;
}

Vec3 TrapModel::gradient(const Vec3& p, const IonSpecies& ion) const {
    if (mode_ == Mode::Harmonic) {
        const double wr = 2 * c::pi * radial_hz_, wz = 2 * c::pi * axial_hz_;
        return {ion.mass * wr * wr * p.x, ion.mass * wr * wr * p.y, ion.mass * wz * wz * (p.z - center_z_)};
    }
    const double rho = p.rho();
    double v, dr, dz;
    sample(rho, p.z, v, dr, dz);
    Vec3 g{0.0, 0.0, dz * c::electron_volt};
    if (rho > 0.0) {
        g.x = dr * c::electron_volt * p.x / rho;
        g.y = dr * c::electron_volt * p.y / rho;
    }
    return g;
}

double total_energy(const std::vector<Vec3>& positions, const TrapModel& trap, const IonSpecies& ion) {
    const double kq2 = c::coulomb_constant * ion.charge * ion.charge;
    double u = 0.0;
    for (std::size_t a = 0; a < positions.size(); ++a) {
        u += trap.energy(positions[a], ion);
        for (std::size_t b = a + 1; b < positions.size(); ++b) {
            const double d = (positions[a] - positions[b]).norm();
            if (!(d > 0.0)) fail(ErrorCode::OverlappingIons, fmt::format("ions {} and {} coincide", a, b));
            u += kq2 / d;
        }
    }
    return u;
}

std::vector<Vec3> energy_gradient(const std::vector<Vec3>& positions, const TrapModel& trap, const IonSpecies& ion) {
    const double kq2 = c::coulomb_constant * ion.charge * ion.charge;
    std::vector<Vec3> g(positions.size());
    for (std::size_t a = 0; a < positions.size(); ++a) {
        g[a] += trap.gradient(positions[a], ion);
        for (std::size_t b = a + 1; b < positions.size(); ++b) {
            const Vec3 d = positions[a] - positions[b];
            const double r = d.norm();
            if (!(r > 0.0)) fail(ErrorCode::OverlappingIons, fmt::format("ions {} and {} coincide", a, b));
            const Vec3 f = d * (kq2 / (r * r * r));
            g[a] -= f;
            g[b] += f;
        }
    }
    return g;
}

namespace {

struct Scales {
    double length, energy, force;
};

Scales scales_for(const TrapModel& trap, const IonSpecies& ion) {
    const double kq2 = c::coulomb_constant * ion.charge * ion.charge;
    const double wr = 2 * c::pi * trap.radial_hz();
    const double l = std::cbrt(kq2 / (ion.mass * wr * wr));
    return {l, kq2 / l, kq2 / (l * l)};
}

using Vec = std::vector<double>;

double dotv(const Vec& a, const Vec& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double max_abs(const Vec& a) {
    double m = 0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

struct Objective {
    const TrapModel& trap;
    const IonSpecies& ion;
    Scales s;

    std::vector<Vec3> unpack(const Vec& x) const {
        std::vector<Vec3> p(x.size() / 3);
        for (std::size_t k = 0; k < p.size(); ++k)
            p[k] = Vec3{x[3 * k], x[3 * k + 1], x[3 * k + 2]} * s.length + Vec3{0, 0, trap.center_z()};
        return p;
    }
    double value(const Vec& x) const { return total_energy(unpack(x), trap, ion) / s.energy; }
    Vec grad(const Vec& x) const {
        const auto g = energy_gradient(unpack(x), trap, ion);
        Vec out(x.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            out[3 * k] = g[k].x / s.force;
            out[3 * k + 1] = g[k].y / s.force;
            out[3 * k + 2] = g[k].z / s.force;
        }
        return out;
    }
};

// L-BFGS with Armijo backtracking, in scaled units. Returns whether the
// gradient max-norm fell below gtol.
bool lbfgs(const Objective& obj, Vec& x, double gtol, int max_iterations) {
    constexpr int memory = 10;
    const std::size_t n = x.size();
    std::deque<Vec> S, Y;
    std::deque<double> rho;
    double f = obj.value(x);
    Vec g = obj.grad(x);
    for (int it = 0; it < max_iterations; ++it) {
        if (max_abs(g) <= gtol) return true;
        // two-loop recursion
        Vec d = g;
        std::vector<double> alpha(S.size());
        for (int k = static_cast<int>(S.size()) - 1; k >= 0; --k) {
            alpha[k] = rho[k] * dotv(S[k], d);
            for (std::size_t q = 0; q < n; ++q) d[q] -= alpha[k] * Y[k][q];
        }
        if (!S.empty()) {
            const double gamma = dotv(S.back(), Y.back()) / dotv(Y.back(), Y.back());
            for (auto& v : d) v *= gamma;
        }
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double beta = rho[k] * dotv(Y[k], d);
            for (std::size_t q = 0; q < n; ++q) d[q] += (alpha[k] - beta) * S[k][q];
        }
        for (auto& v : d) v = -v;
        double slope = dotv(g, d);
        if (!(slope < 0)) {
            S.clear(), Y.clear(), rho.clear();
            for (std::size_t q = 0; q < n; ++q) d[q] = -g[q];
            slope = dotv(g, d);
        }
        double step = S.empty() ? std::min(1.0, 0.1 / max_abs(g)) : 1.0;
        Vec xn(n);
        double fn = 0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t q = 0; q < n; ++q) xn[q] = x[q] + step * d[q];
            try {
                fn = obj.value(xn);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::OverlappingIons && e.code() != ErrorCode::NoConvergence) throw;
                fn = std::numeric_limits<double>::infinity();
            }
            if (fn <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return max_abs(g) <= gtol;
        Vec gn = obj.grad(xn);
        Vec s(n), y(n);
        for (std::size_t q = 0; q < n; ++q) s[q] = xn[q] - x[q], y[q] = gn[q] - g[q];
        const double sy = dotv(s, y);
        if (sy > 1e-16 * std::sqrt(dotv(s, s) * dotv(y, y))) {
            S.push_back(std::move(s));
            Y.push_back(std::move(y));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > memory) S.pop_front(), Y.pop_front(), rho.pop_front();
        }
        x.swap(xn);
        g.swap(gn);
        f = fn;
    }
    return max_abs(g) <= gtol;
}

// Rotate about z so the outermost ion sits on +x; order ions by radius then azimuth.
void canonicalize(std::vector<Vec3>& p, double length) {
    if (p.empty()) return;
    std::size_t outer = 0;
    for (std::size_t k = 1; k < p.size(); ++k)
        if (p[k].rho() > p[outer].rho()) outer = k;
    if (p[outer].rho() > 0.0) {
        const double a = -std::atan2(p[outer].y, p[outer].x);
        const double ca = std::cos(a), sa = std::sin(a);
        for (auto& v : p) v = {ca * v.x - sa * v.y, sa * v.x + ca * v.y, v.z};
        p[outer].y = 0.0;
    }
    const double tol = 1e-6 * length;
    auto azimuth = [](const Vec3& v) {
        double a = std::atan2(v.y, v.x);
        if (a < -1e-9) a += 2 * c::pi;
        return a;
    };
    std::sort(p.begin(), p.end(), [&](const Vec3& a, const Vec3& b) {
        if (std::abs(a.rho() - b.rho()) > tol) return a.rho() < b.rho();
        return azimuth(a) < azimuth(b);
    });
}

bool lexicographic_less(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].x != b[k].x) return a[k].x < b[k].x;
        if (a[k].y != b[k].y) return a[k].y < b[k].y;
        if (a[k].z != b[k].z) return a[k].z < b[k].z;
    }
    return false;
}

} // namespace

CrystalConfig relax(int n_ions, const TrapModel& trap, const IonSpecies& ion, const RelaxOptions& options) {
    if (n_ions < 1) fail(ErrorCode::ConfigError, "crystal needs at least one ion");
    if (options.restarts < 1) fail(ErrorCode::ConfigError, "crystal relaxation needs at least one restart");
    if (!(options.tolerance > 0.0)) fail(ErrorCode::ConfigError, "crystal force tolerance must be positive");
    ion.validate();

    const Objective obj{trap, ion, scales_for(trap, ion)};
    const double gtol = options.tolerance / obj.s.force;
    const double ball = std::max(1.0, std::cbrt(static_cast<double>(n_ions)));

    std::optional<CrystalConfig> best;
    for (int r = 0; r < options.restarts; ++r) {
        std::mt19937_64 rng(options.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Vec x(3 * static_cast<std::size_t>(n_ions));
        for (int k = 0; k < n_ions; ++k) {
            double a, b, cc;
            do {
                a = u(rng), b = u(rng), cc = u(rng);
            } while (a * a + b * b + cc * cc > 1.0);
            x[3 * k] = ball * a, x[3 * k + 1] = ball * b, x[3 * k + 2] = ball * cc;
        }
        bool ok;
        try {
            ok = lbfgs(obj, x, gtol, options.max_iterations);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoConvergence) throw;
            ok = false;
        }
        if (!ok) continue;
        CrystalConfig cfg;
        cfg.positions = obj.unpack(x);
        canonicalize(cfg.positions, obj.s.length);
        cfg.energy = total_energy(cfg.positions, trap, ion);
        cfg.converged = true;
        for (const auto& g : energy_gradient(cfg.positions, trap, ion))
            cfg.max_force = std::max({cfg.max_force, std::abs(g.x), std::abs(g.y), std::abs(g.z)});
        const double tie = 1e-12 * std::abs(cfg.energy);
        if (!best || cfg.energy < best->energy - tie ||
            (std::abs(cfg.energy - best->energy) <= tie && lexicographic_less(cfg.positions, best->positions)))
            best = std::move(cfg);
    }
    if (!best)
        fail(ErrorCode::NoConvergence,
             fmt::format("no restart of the {}-ion relaxation reached the force tolerance", n_ions));
    return *best;
}

Classification classify(const CrystalConfig& config) {
    Classification out;
    const auto& p = config.positions;
    const std::size_t n = p.size();
    if (n == 0) return out;
    if (n == 1) {
        out.shells = {1};
        return out;
    }
    Vec3 mean;
    for (const auto& v : p) mean += v;
    mean = mean / static_cast<double>(n);
    double zz = 0, rr = 0;
    std::vector<double> radii;
    for (const auto& v : p) {
        const Vec3 d = v - mean;
        zz += d.z * d.z;
        rr += d.x * d.x + d.y * d.y;
        radii.push_back(std::hypot(d.x, d.y));
    }
    out.planarity = rr > 0 ? std::sqrt(zz / rr) : std::numeric_limits<double>::infinity();

    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            if (a != b) nearest[a] = std::min(nearest[a], (p[a] - p[b]).norm());
    std::nth_element(nearest.begin(), nearest.begin() + n / 2, nearest.end());
    const double gap = 0.3 * nearest[n / 2];

    std::sort(radii.begin(), radii.end());
    out.shells.push_back(1);
    for (std::size_t k = 1; k < n; ++k) {
        if (radii[k] - radii[k - 1] > gap)
            out.shells.push_back(1);
        else
            ++out.shells.back();
    }
    return out;
}

void write_csv(const CrystalConfig& config, std::ostream& out) {
    out << "index,x_m,y_m,z_m\n";
    for (std::size_t k = 0; k < config.positions.size(); ++k) {
        const auto& v = config.positions[k];
        out << fmt::format("{},{:.9e},{:.9e},{:.9e}\n", k, v.x, v.y, v.z);
    }
}

void write_svg(const CrystalConfig& config, std::ostream& out) {
    double extent = 1e-9;
    for (const auto& v : config.positions) extent = std::max({extent, std::abs(v.x), std::abs(v.y)});
    extent *= 1.25;
    const double size = 400.0, half = size / 2;
    const double scale = half / extent;
    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
                       size);
    out << fmt::format("<rect width=\"{0}\" height=\"{0}\" fill=\"black\"/>\n", size);
    out << fmt::format("<text x=\"8\" y=\"18\" fill=\"white\" font-size=\"12\">{} ions, x-y, half-width {:.2f} um</text>\n",
                       config.positions.size(), extent * 1e6);
    for (const auto& v : config.positions)
        out << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"6\" fill=\"#7fd4ff\"/>\n", half + v.x * scale,
                           half - v.y * scale);
    out << "</svg>\n";
}

} // namespace tack::crystal
