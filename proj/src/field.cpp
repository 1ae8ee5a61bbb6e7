#include "tack/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::field {

namespace {

using geometry::RoleKind;

double default_omega(int nr, int nz) {
    // The axis is a symmetry plane, so the radial extent counts twice.
    const double rho = 0.5 * (std::cos(constants::pi / (2.0 * nr)) + std::cos(constants::pi / nz));
    return 2.0 / (1.0 + std::sqrt(1.0 - rho * rho));
}

// One grid level of the discrete operator
//   A u = u_rr + u_r / r + u_zz,   axis row: 4 (u_1 - u_0) / h^2 + u_zz.
// Vacuum nodes on the outer box use mirrored ghosts (zero normal derivative).
struct Level {
    ElectrodeMask mask;
    int nr = 0;
    int nz = 0;
    double h = 0.0;
    std::vector<double> cp, cm;  // radial neighbour weights, interior stencil sums to 4

    explicit Level(ElectrodeMask m) : mask(std::move(m)), nr(mask.nr()), nz(mask.nz()), h(mask.grid().spacing) {
        cp.assign(nr, 0.0);
        cm.assign(nr, 0.0);
        for (int i = 1; i < nr; ++i) {
            cp[i] = 1.0 + 0.5 / i;
            cm[i] = 1.0 - 0.5 / i;
        }
    }
    std::size_t size() const { return static_cast<std::size_t>(nr) * nz; }
    bool vacuum(std::size_t k) const { return mask.cells()[k] == ElectrodeMask::vacuum; }

    // Neighbour sum and diagonal of the stencil at (i, j).
    std::pair<double, double> stencil(const std::vector<double>& u, int i, int j) const {
        const std::size_t row = static_cast<std::size_t>(j) * nr;
        double vert = 0.0;
        if (nz > 1) {
            const std::size_t up = (j + 1 < nz ? row + nr : row - nr);
            const std::size_t down = (j > 0 ? row - nr : row + nr);
            vert = u[up + i] + u[down + i];
        }
        if (i == 0) {
            const double right = nr > 1 ? u[row + 1] : u[row];
            return {4.0 * right + vert, 6.0};
        }
        const double right = (i + 1 < nr) ? u[row + i + 1] : u[row + i - 1];
        return {cp[i] * right + cm[i] * u[row + i - 1] + vert, 4.0};
    }
};

// Red-black relaxation of A u = rhs; returns the largest update.
double relax(const Level& L, std::vector<double>& u, const std::vector<double>* rhs, double omega) {
    const double h2 = L.h * L.h;
    double max_update = 0.0;
    for (int color = 0; color < 2; ++color) {
        for (int j = 0; j < L.nz; ++j) {
            const std::size_t row = static_cast<std::size_t>(j) * L.nr;
            const bool interior_row = j > 0 && j + 1 < L.nz;
            int i = (color + j) & 1;
            for (; i < L.nr; i += 2) {
                const std::size_t k = row + i;
                if (!L.vacuum(k)) continue;
                double target;
                if (interior_row && i > 0 && i + 1 < L.nr) {
                    const double s = L.cp[i] * u[k + 1] + L.cm[i] * u[k - 1] + u[k + L.nr] + u[k - L.nr];
                    target = 0.25 * (rhs ? s - h2 * (*rhs)[k] : s);
                } else {
                    auto [s, diag] = L.stencil(u, i, j);
                    target = (rhs ? s - h2 * (*rhs)[k] : s) / diag;
                }
                const double delta = omega * (target - u[k]);
                u[k] += delta;
                max_update = std::max(max_update, std::abs(delta));
            }
        }
    }
    return max_update;
}

void residual(const Level& L, const std::vector<double>& u, const std::vector<double>* rhs, std::vector<double>& res) {
    const double inv_h2 = 1.0 / (L.h * L.h);
    res.assign(L.size(), 0.0);
    for (int j = 0; j < L.nz; ++j)
        for (int i = 0; i < L.nr; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * L.nr + i;
            if (!L.vacuum(k)) continue;
            auto [s, diag] = L.stencil(u, i, j);
            res[k] = (rhs ? (*rhs)[k] : 0.0) - (s - diag * u[k]) * inv_h2;
        }
}

// A coarse node is Dirichlet (zero correction) when any fine node it covers
// belongs to an electrode, so thin features never open leaks on coarse levels.
ElectrodeMask coarsen(const ElectrodeMask& fine) {
    const int nr = fine.nr(), nz = fine.nz();
    GridSpec g = fine.grid();
    const int ncr = nr / 2 + 1;
    const int ncz = nz / 2 + 1;
    g.spacing *= 2.0;
    g.r_max = (ncr - 1) * g.spacing;
    g.z_max = g.z_min + (ncz - 1) * g.spacing;
    ElectrodeMask coarse(g, fine.electrodes());
    for (int J = 0; J < ncz; ++J) {
        const int jc = (J == ncz - 1) ? nz - 1 : std::min(2 * J, nz - 1);
        for (int I = 0; I < ncr; ++I) {
            const int ic = (I == ncr - 1) ? nr - 1 : std::min(2 * I, nr - 1);
            std::int16_t id = fine.at(ic, jc);
            for (int b = -1; b <= 1 && id == ElectrodeMask::vacuum; ++b)
                for (int a = -1; a <= 1 && id == ElectrodeMask::vacuum; ++a) {
                    const int i = ic + a, j = jc + b;
                    if (i >= 0 && j >= 0 && i < nr && j < nz) id = fine.at(i, j);
                }
            coarse.set(I, J, id);
        }
    }
    return coarse;
}

struct Hierarchy {
    std::vector<Level> levels;
};

Hierarchy build_hierarchy(const ElectrodeMask& mask, bool multilevel) {
    Hierarchy hier;
    hier.levels.emplace_back(mask);
    constexpr int min_nodes = 12;
    while (multilevel && std::min(hier.levels.back().nr, hier.levels.back().nz) >= 2 * min_nodes)
        hier.levels.emplace_back(coarsen(hier.levels.back().mask));
    return hier;
}

// Fine node (i, j) sits at coarse coordinate (i/2, j/2), clamped to the coarse grid.
void prolong_add(const Level& coarse, const std::vector<double>& e, const Level& fine, std::vector<double>& u) {
    for (int j = 0; j < fine.nz; ++j) {
        const double cj = std::min(0.5 * j, coarse.nz - 1.0);
        const int j0 = std::min(static_cast<int>(cj), std::max(coarse.nz - 2, 0));
        const double tj = cj - j0;
        const int j1 = std::min(j0 + 1, coarse.nz - 1);
        for (int i = 0; i < fine.nr; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * fine.nr + i;
            if (!fine.vacuum(k)) continue;
            const double ci = std::min(0.5 * i, coarse.nr - 1.0);
            const int i0 = std::min(static_cast<int>(ci), std::max(coarse.nr - 2, 0));
            const double ti = ci - i0;
            const int i1 = std::min(i0 + 1, coarse.nr - 1);
            auto c = [&](int a, int b) { return e[static_cast<std::size_t>(b) * coarse.nr + a]; };
            u[k] += (1 - ti) * (1 - tj) * c(i0, j0) + ti * (1 - tj) * c(i1, j0) + (1 - ti) * tj * c(i0, j1) +
                    ti * tj * c(i1, j1);
        }
    }
}

// Full-weighting restriction onto coarse vacuum nodes.
void restrict_residual(const Level& fine, const std::vector<double>& res, const Level& coarse, std::vector<double>& rhs) {
    rhs.assign(coarse.size(), 0.0);
    for (int J = 0; J < coarse.nz; ++J)
        for (int I = 0; I < coarse.nr; ++I) {
            const std::size_t K = static_cast<std::size_t>(J) * coarse.nr + I;
            if (!coarse.vacuum(K)) continue;
            double sum = 0.0, wsum = 0.0;
            for (int b = -1; b <= 1; ++b) {
                const int j = 2 * J + b;
                if (j < 0 || j >= fine.nz) continue;
                for (int a = -1; a <= 1; ++a) {
                    const int i = 2 * I + a;
                    if (i < 0 || i >= fine.nr) continue;
                    const double w = (a == 0 ? 2.0 : 1.0) * (b == 0 ? 2.0 : 1.0);
                    sum += w * res[static_cast<std::size_t>(j) * fine.nr + i];
                    wsum += w;
                }
            }
            rhs[K] = sum / wsum;
        }
}

void v_cycle(const Hierarchy& hier, std::size_t level, std::vector<double>& u, const std::vector<double>* rhs) {
    const Level& L = hier.levels[level];
    if (level + 1 == hier.levels.size()) {
        for (int s = 0; s < 4 * (L.nr + L.nz); ++s) relax(L, u, rhs, 1.0);
        return;
    }
    constexpr int pre = 2, post = 2;
    for (int s = 0; s < pre; ++s) relax(L, u, rhs, 1.0);
    std::vector<double> res;
    residual(L, u, rhs, res);
    const Level& C = hier.levels[level + 1];
    std::vector<double> crhs;
    restrict_residual(L, res, C, crhs);
    std::vector<double> e(C.size(), 0.0);
    v_cycle(hier, level + 1, e, &crhs);
    prolong_add(C, e, L, u);
    for (int s = 0; s < post; ++s) relax(L, u, rhs, 1.0);
}

void apply_boundary(const ElectrodeMask& mask, const std::vector<double>& values, std::vector<double>& phi) {
    const auto& cells = mask.cells();
    for (std::size_t k = 0; k < cells.size(); ++k)
        if (cells[k] != ElectrodeMask::vacuum) phi[k] = values[static_cast<std::size_t>(cells[k])];
}

void apply_operator(const Level& L, const std::vector<double>& x, std::vector<double>& out) {
    const double inv_h2 = 1.0 / (L.h * L.h);
    out.assign(L.size(), 0.0);
    for (int j = 0; j < L.nz; ++j) {
        const bool interior_row = j > 0 && j + 1 < L.nz;
        for (int i = 0; i < L.nr; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * L.nr + i;
            if (!L.vacuum(k)) continue;
            if (interior_row && i > 0 && i + 1 < L.nr) {
                out[k] = (L.cp[i] * x[k + 1] + L.cm[i] * x[k - 1] + x[k + L.nr] + x[k - L.nr] - 4.0 * x[k]) * inv_h2;
            } else {
                auto [s, diag] = L.stencil(x, i, j);
                out[k] = (s - diag * x[k]) * inv_h2;
            }
        }
    }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

// BiCGSTAB on the correction to phi, right-preconditioned by one V-cycle.
SolveReport solve_krylov(const Hierarchy& hier, std::vector<double>& phi, double scale, const SolveOptions& options) {
    const Level& L = hier.levels.front();
    const std::size_t n = L.size();
    std::vector<double> r, tmp;
    residual(L, phi, nullptr, r);
    std::vector<double> r_hat = r, p(n, 0.0), v(n, 0.0), y(n), z(n), s(n), t(n);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    const double threshold = options.tolerance * scale;
    SolveReport report;
    auto precondition = [&](const std::vector<double>& rhs, std::vector<double>& out) {
        std::fill(out.begin(), out.end(), 0.0);
        v_cycle(hier, 0, out, &rhs);
    };
    for (int it = 1; it <= options.max_iterations; ++it) {
        const double rho_new = dot(r_hat, r);
        if (rho_new == 0.0) {
            // Breakdown or exact solution: restart from the current residual.
            residual(L, phi, nullptr, r);
            r_hat = r;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            rho = alpha = omega = 1.0;
            if (dot(r, r) == 0.0) {
                report.iterations = it;
                report.converged = true;
                return report;
            }
            continue;
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * (p[k] - omega * v[k]);
        precondition(p, y);
        apply_operator(L, y, v);
        alpha = rho / dot(r_hat, v);
        for (std::size_t k = 0; k < n; ++k) s[k] = r[k] - alpha * v[k];
        precondition(s, z);
        apply_operator(L, z, t);
        const double tt = dot(t, t);
        omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
        double max_update = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double du = alpha * y[k] + omega * z[k];
            phi[k] += du;
            max_update = std::max(max_update, std::abs(du));
            r[k] = s[k] - omega * t[k];
        }
        report.iterations = it;
        report.final_residual = max_update / scale;
        if (max_update <= threshold) {
            report.converged = true;
            break;
        }
        if (omega == 0.0) rho = 0.0;
    }
    return report;
}

SolveReport solve_dirichlet(const ElectrodeMask& mask, const std::vector<double>& values, std::vector<double>& phi,
                            double scale, const SolveOptions& options) {
    apply_boundary(mask, values, phi);
    const Hierarchy hier = build_hierarchy(mask, options.multilevel);
    if (hier.levels.size() > 1) return solve_krylov(hier, phi, scale, options);

    const Level& fine = hier.levels.front();
    const double threshold = options.tolerance * scale;
    const double omega = options.omega > 0.0 ? options.omega : default_omega(fine.nr, fine.nz);
    SolveReport report;
    for (int it = 1; it <= options.max_iterations; ++it) {
        const double update = relax(fine, phi, nullptr, omega);
        report.iterations = it;
        report.final_residual = update / scale;
        if (update <= threshold) {
            report.converged = true;
            break;
        }
    }
    return report;
}

} // namespace

double ScalarField2D::interpolate(double r, double z) const {
    const auto& g = grid();
    const double x = std::clamp(std::abs(r) / g.spacing, 0.0, nr() - 1.0);
    const double y = std::clamp((z - g.z_min) / g.spacing, 0.0, nz() - 1.0);
    const int i0 = std::min(static_cast<int>(x), std::max(nr() - 2, 0));
    const int j0 = std::min(static_cast<int>(y), std::max(nz() - 2, 0));
    const double tx = x - i0, ty = y - j0;
    const int i1 = std::min(i0 + 1, nr() - 1), j1 = std::min(j0 + 1, nz() - 1);
    return (1 - tx) * (1 - ty) * at(i0, j0) + tx * (1 - ty) * at(i1, j0) + (1 - tx) * ty * at(i0, j1) +
           tx * ty * at(i1, j1);
}

std::pair<ScalarField2D, SolveReport> solve_laplace(std::shared_ptr<const ElectrodeMask> mask,
                                                    const std::vector<double>& boundary_values,
                                                    const SolveOptions& options) {
    if (!(options.tolerance > 0.0)) fail(ErrorCode::ConfigError, "solver tolerance must be positive");
    if (boundary_values.size() < mask->electrodes().size())
        fail(ErrorCode::MissingBoundaryValue, "one boundary value per electrode required");
    double scale = 0.0;
    for (double v : boundary_values) scale = std::max(scale, std::abs(v));
    ScalarField2D field{mask, std::vector<double>(static_cast<std::size_t>(mask->nr()) * mask->nz(), 0.0)};
    if (scale == 0.0) return {std::move(field), SolveReport{0, 0.0, true}};
    auto report = solve_dirichlet(*mask, boundary_values, field.values, scale, options);
    return {std::move(field), report};
}

std::pair<ScalarField2D, SolveReport> solve_laplace(std::shared_ptr<const ElectrodeMask> mask,
                                                    const std::map<std::string, double>& boundary_values,
                                                    const SolveOptions& options) {
    std::vector<double> values;
    for (const auto& e : mask->electrodes()) {
        auto it = boundary_values.find(e.name);
        if (it == boundary_values.end()) fail(ErrorCode::MissingBoundaryValue, "no value for electrode '" + e.name + "'");
        values.push_back(it->second);
    }
    return solve_laplace(std::move(mask), values, options);
}

std::pair<ScalarField2D, SolveReport> solve_rf_unit(std::shared_ptr<const ElectrodeMask> mask,
                                                    const SolveOptions& options) {
    std::vector<double> values;
    for (const auto& e : mask->electrodes()) values.push_back(e.role.kind == RoleKind::RF ? 1.0 : 0.0);
    return solve_laplace(std::move(mask), values, options);
}

std::pair<ScalarField2D, SolveReport> solve_dc(std::shared_ptr<const ElectrodeMask> mask, const SolveOptions& options) {
    std::vector<double> values;
    for (const auto& e : mask->electrodes()) values.push_back(e.role.kind == RoleKind::DC ? e.role.bias : 0.0);
    return solve_laplace(std::move(mask), values, options);
}

std::vector<ScalarField2D> solve_unit_fields(std::shared_ptr<const ElectrodeMask> mask, const SolveOptions& options) {
    std::vector<ScalarField2D> out;
    const std::size_t n = mask->electrodes().size();
    for (std::size_t e = 0; e < n; ++e) {
        std::vector<double> values(n, 0.0);
        values[e] = 1.0;
        out.push_back(solve_laplace(mask, values, options).first);
    }
    return out;
}

ScalarField2D superpose(const std::vector<ScalarField2D>& unit_fields, const std::vector<double>& volts) {
    if (unit_fields.empty() || unit_fields.size() != volts.size())
        fail(ErrorCode::MissingBoundaryValue, "superpose needs one voltage per unit field");
    ScalarField2D out{unit_fields.front().mask, std::vector<double>(unit_fields.front().values.size(), 0.0)};
    for (std::size_t e = 0; e < unit_fields.size(); ++e) {
        if (volts[e] == 0.0) continue;
        const auto& v = unit_fields[e].values;
        for (std::size_t k = 0; k < v.size(); ++k) out.values[k] += volts[e] * v[k];
    }
    return out;
}

VectorField2D gradient(const ScalarField2D& field) {
    const int nr = field.nr(), nz = field.nz();
    const double h = field.grid().spacing;
    VectorField2D e{field.mask, std::vector<double>(field.values.size()), std::vector<double>(field.values.size())};
    for (int j = 0; j < nz; ++j) {
        for (int i = 0; i < nr; ++i) {
            const std::size_t k = field.mask->index(i, j);
            double dr = 0.0;
            if (i == 0) {
                dr = 0.0;
            } else if (i == nr - 1) {
                dr = (field.at(i, j) - field.at(i - 1, j)) / h;
            } else {
                dr = (field.at(i + 1, j) - field.at(i - 1, j)) / (2 * h);
            }
            double dz = 0.0;
            if (nz > 1) {
                if (j == 0) dz = (field.at(i, 1) - field.at(i, 0)) / h;
                else if (j == nz - 1) dz = (field.at(i, j) - field.at(i, j - 1)) / h;
                else dz = (field.at(i, j + 1) - field.at(i, j - 1)) / (2 * h);
            }
            e.er[k] = -dr;
            e.ez[k] = -dz;
        }
    }
    return e;
}

double laplacian_residual(const ScalarField2D& field) {
    const int nr = field.nr(), nz = field.nz();
    const double h = field.grid().spacing;
    double worst = 0.0;
    for (int j = 1; j + 1 < nz; ++j) {
        for (int i = 0; i + 1 < nr; ++i) {
            if (field.mask->is_electrode(i, j)) continue;
            const double c = field.at(i, j);
            const double zz = field.at(i, j + 1) - 2 * c + field.at(i, j - 1);
            double rr = 0.0;
            if (i == 0) {
                rr = 4.0 * (field.at(1, j) - c);
            } else {
                rr = (1.0 + 0.5 / i) * field.at(i + 1, j) - 2 * c + (1.0 - 0.5 / i) * field.at(i - 1, j);
            }
            worst = std::max(worst, std::abs(rr + zz) / (h * h));
        }
    }
    return worst;
}

void write_csv(const ScalarField2D& field, std::ostream& out, const std::string& value_name) {
    char buf[96];
    out << "r_m,z_m," << value_name << "\n";
    const auto& g = field.grid();
    for (int j = 0; j < field.nz(); ++j)
        for (int i = 0; i < field.nr(); ++i) {
            std::snprintf(buf, sizeof buf, "%.9e,%.9e,%.12e\n", g.r(i), g.z(j), field.at(i, j));
            out << buf;
        }
}

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) fail(ErrorCode::IoError, "truncated grid dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T v;
    std::memcpy(&v, bytes, sizeof(T));
    return v;
}

constexpr char magic[8] = {'T', 'A', 'C', 'K', 'G', 'R', 'I', 'D'};

} // namespace

void write_binary(const ScalarField2D& field, std::ostream& out) {
    out.write(magic, sizeof magic);
    put_le<std::uint32_t>(out, 1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.nr()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.nz()));
    put_le<double>(out, field.grid().spacing);
    put_le<double>(out, 0.0);
    put_le<double>(out, field.grid().z_min);
    for (double v : field.values) put_le<double>(out, v);
}

GridDump read_binary(std::istream& in) {
    char head[8];
    if (!in.read(head, sizeof head) || std::memcmp(head, magic, sizeof head) != 0)
        fail(ErrorCode::IoError, "not a grid dump");
    if (get_le<std::uint32_t>(in) != 1) fail(ErrorCode::IoError, "unsupported grid dump version");
    GridDump d;
    d.nr = static_cast<int>(get_le<std::uint32_t>(in));
    d.nz = static_cast<int>(get_le<std::uint32_t>(in));
    d.spacing = get_le<double>(in);
    d.r0 = get_le<double>(in);
    d.z0 = get_le<double>(in);
    d.values.resize(static_cast<std::size_t>(d.nr) * d.nz);
    for (auto& v : d.values) v = get_le<double>(in);
    return d;
}

} // namespace tack::field
