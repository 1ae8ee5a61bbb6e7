#include "tack/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tack/acceptance.hpp"
#include "tack/collect.hpp"
#include "tack/config.hpp"
#include "tack/corrector.hpp"
#include "tack/crystal.hpp"
#include "tack/error.hpp"
#include "tack/field.hpp"
#include "tack/pseudo.hpp"
#include "tack/rays.hpp"

#ifndef TACK_VERSION
#define TACK_VERSION "0.0.0"
#endif

namespace tack::cli {

namespace fs = std::filesystem;

namespace {

class Artifacts {
public:
    Artifacts(fs::path dir, std::string format) : dir_(std::move(dir)), format_(std::move(format)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) fail(ErrorCode::IoError, fmt::format("cannot create '{}': {}", dir_.string(), ec.message()));
    }

    bool csv() const { return format_ != "svg"; }
    bool svg() const { return format_ != "csv"; }

    // Temp file then rename, so readers never see a partial artifact.
    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        const fs::path target = dir_ / name;
        const fs::path tmp = dir_ / (name + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) fail(ErrorCode::IoError, fmt::format("cannot write '{}'", tmp.string()));
            body(out);
            out.flush();
            if (!out) fail(ErrorCode::IoError, fmt::format("write to '{}' failed", tmp.string()));
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) fail(ErrorCode::IoError, fmt::format("cannot move '{}' into place: {}", target.string(), ec.message()));
        files_.push_back(name);
    }
    void csv(const std::string& name, const std::function<void(std::ostream&)>& body) {
        if (csv()) write(name, body);
    }
    void svg(const std::string& name, const std::function<void(std::ostream&)>& body) {
        if (svg()) write(name, body);
    }

    const std::vector<std::string>& files() const { return files_; }

private:
    fs::path dir_;
    std::string format_;
    std::vector<std::string> files_;
};

// Minimal line plot: one polyline per series over shared axes.
void line_svg(std::ostream& out, const std::string& title, const std::string& xlabel, const std::string& ylabel,
              const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& [name, pts] : series)
        for (const auto& [x, y] : pts) {
            x0 = std::min(x0, x), x1 = std::max(x1, x);
            y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    const double W = 640, H = 420, L = 70, B = 50, T = 30, Rm = 20;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - Rm); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - B - T); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
                       "font-size=\"12\">\n",
                       W, H);
    out << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", L, T,
                       W - L - Rm, H - B - T);
    out << fmt::format("<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>\n", W / 2, title);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", W / 2, H - 12, xlabel);
    out << fmt::format("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n",
                       H / 2, H / 2, ylabel);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", L, H - B + 16, x0);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", W - Rm, H - B + 16, x1);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", L - 4, H - B, y0);
    out << fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", L - 4, T + 10, y1);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& [name, pts] = series[s];
        std::string d;
        for (const auto& [x, y] : pts) d += fmt::format("{:.2f},{:.2f} ", px(x), py(y));
        const char* col = colors[s % 4];
        out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", col, d);
        for (const auto& [x, y] : pts)
            out << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", px(x), py(y), col);
        out << fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">{}</text>\n", L + 8, T + 16 + 14 * s, col, name);
    }
    out << "</svg>\n";
}

// Grey-scale raster of a field, clipped at `vmax`, with electrodes in red.
void map_svg(std::ostream& out, const field::ScalarField2D& f, double vmax, int stride, const std::string& title) {
    const int nr = (f.nr() - 1) / stride + 1, nz = (f.nz() - 1) / stride + 1;
    const double cell = std::max(1.0, 600.0 / std::max(nr, nz));
    const double W = nr * cell, H = nz * cell + 24;
    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
                       "font-family=\"sans-serif\" font-size=\"12\">\n",
                       W, H);
    out << fmt::format("<text x=\"4\" y=\"16\">{}</text>\n", title);
    for (int jj = 0; jj < nz; ++jj)
        for (int ii = 0; ii < nr; ++ii) {
            const int i = ii * stride, j = jj * stride;
            std::string fill;
            if (f.mask->is_electrode(i, j)) {
                fill = "#c03030";
            } else {
                const double v = std::clamp(f.at(i, j) / vmax, 0.0, 1.0);
                const int g = static_cast<int>(std::lround(255 * (1 - v)));
                fill = fmt::format("#{:02x}{:02x}{:02x}", g, g, g);
            }
            out << fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                               ii * cell, 24 + (nz - 1 - jj) * cell, cell + 0.05, cell + 0.05, fill);
        }
    out << "</svg>\n";
}

void write_table(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& rows) {
    out << "quantity,value\n";
    for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

std::string g9(double v) { return fmt::format("{:.9g}", v); }

struct Context {
    config::RunConfig rc;
    Artifacts art;
};

void cmd_solve_field(Context& ctx) {
    const auto& rc = ctx.rc;
    auto mask = std::make_shared<const geometry::ElectrodeMask>(geometry::rasterize(rc.geometry, rc.grid));
    const auto [rf, rep] = field::solve_rf_unit(mask, rc.solver);
    if (ctx.art.csv()) ctx.art.write("rf_unit.bin", [&](std::ostream& o) { field::write_binary(rf, o); });
    ctx.art.csv("rf_axis.csv", [&](std::ostream& o) {
        o << "z_mm,phi_per_volt\n";
        for (int j = 0; j < rf.nz(); ++j) o << fmt::format("{:.6f},{:.9g}\n", rf.grid().z(j) * 1e3, rf.at(0, j));
    });
    ctx.art.svg("rf_unit.svg", [&](std::ostream& o) {
        map_svg(o, rf, 1.0, std::max(1, std::max(rf.nr(), rf.nz()) / 200), "RF potential at 1 V");
    });
    fmt::print("solve-field: nodes {}x{} iterations {} residual {:.3e} converged {}\n", rf.nr(), rf.nz(), rep.iterations,
               rep.final_residual, rep.converged ? "yes" : "no");
    if (!rep.converged) fail(ErrorCode::NotConverged, "field solve did not reach the tolerance");
}

pseudo::TrapSolution solve(const config::RunConfig& rc) {
    auto sol = pseudo::solve_trap(rc.geometry, rc.grid, rc.drive, rc.ion, rc.solver);
    if (!sol.report.converged) fail(ErrorCode::NotConverged, "field solve did not reach the tolerance");
    return sol;
}

void cmd_pseudo_map(Context& ctx) {
    const auto sol = solve(ctx.rc);
    const auto& psi = sol.psi;
    const auto& a = sol.analysis;
    ctx.art.csv("pseudo_axis.csv", [&](std::ostream& o) {
        o << "z_mm,psi_eV\n";
        for (int j = 0; j < psi.nz(); ++j) o << fmt::format("{:.6f},{:.9g}\n", psi.grid().z(j) * 1e3, psi.at(0, j));
    });
    const int stride = std::max(1, std::max(psi.nr(), psi.nz()) / 240);
    ctx.art.csv("pseudo_map.csv", [&](std::ostream& o) {
        o << "r_mm,z_mm,psi_eV\n";
        for (int j = 0; j < psi.nz(); j += stride)
            for (int i = 0; i < psi.nr(); i += stride)
                if (!psi.mask->is_electrode(i, j))
                    o << fmt::format("{:.6f},{:.6f},{:.9g}\n", psi.grid().r(i) * 1e3, psi.grid().z(j) * 1e3, psi.at(i, j));
    });
    ctx.art.svg("pseudo_map.svg", [&](std::ostream& o) {
        map_svg(o, psi, std::max(4 * a.depth.escape_level, 1e-6), stride, "pseudopotential (black = 4x escape level)");
    });
    fmt::print("pseudo-map: minimum z {:.4f} mm ({:.4f} mm above tip) depth {:.5f} eV\n", a.minimum.z * 1e3,
               a.tip_distance * 1e3, a.depth.depth);
}

void cmd_secular(Context& ctx) {
    const auto sol = solve(ctx.rc);
    const auto& a = sol.analysis;
    const auto fit = pseudo::secular_frequencies_fit(sol.psi, a.minimum, ctx.rc.ion);
    const double ratio = a.secular.axial / a.secular.radial;
    ctx.art.csv("secular.csv", [&](std::ostream& o) {
        write_table(o, {{"minimum_z_mm", g9(a.minimum.z * 1e3)},
                        {"tip_distance_mm", g9(a.tip_distance * 1e3)},
                        {"depth_eV", g9(a.depth.depth)},
                        {"axial_hz", g9(a.secular.axial)},
                        {"radial_hz", g9(a.secular.radial)},
                        {"axial_fit_hz", g9(fit.axial)},
                        {"radial_fit_hz", g9(fit.radial)},
                        {"ratio", g9(ratio)}});
    });
    fmt::print("secular: axial {:.1f} Hz radial {:.1f} Hz ratio {:.3f} (fit {:.1f} / {:.1f} Hz)\n", a.secular.axial,
               a.secular.radial, ratio, fit.axial, fit.radial);
}

void cmd_needle_scan(Context& ctx) {
    const auto& rc = ctx.rc;
    const auto scan = pseudo::needle_scan(rc.geometry, rc.grid, rc.scan_tips(), rc.drive, rc.ion, rc.solver,
                                          rc.scan.central_span);
    ctx.art.csv("needle_scan.csv", [&](std::ostream& o) {
        o << "tip_z_mm,ok,minimum_z_mm,depth_eV,axial_hz,radial_hz,error\n";
        for (const auto& r : scan.rows)
            o << fmt::format("{:.6f},{},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", r.tip_z * 1e3, r.ok ? 1 : 0,
                             r.minimum_z * 1e3, r.depth, r.axial, r.radial, r.error);
    });
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : scan.rows)
        if (r.ok) pts.emplace_back(r.tip_z * 1e3, r.minimum_z * 1e3);
    ctx.art.svg("needle_scan.svg", [&](std::ostream& o) {
        line_svg(o, "trap minimum vs needle tip", "tip z (mm)", "minimum z (mm)", {{"minimum", pts}});
    });
    fmt::print("needle-scan: {} tips, central [{:.3f}, {:.3f}] mm slope {:.4f} R^2 {:.6f} depth variation {:.1f}%\n",
               scan.rows.size(), scan.central_lo * 1e3, scan.central_hi * 1e3, scan.slope, scan.r_squared,
               100 * scan.depth_variation);
}

void cmd_crystal(Context& ctx) {
    const auto& rc = ctx.rc;
    crystal::RelaxOptions opt;
    opt.seed = rc.seed;
    opt.restarts = rc.crystal.restarts;
    opt.max_iterations = rc.crystal.max_iterations;
    crystal::TrapModel model = crystal::TrapModel::harmonic(rc.crystal.axial_frequency, rc.crystal.radial_frequency);
    if (rc.crystal.use_field) {
        auto sol = solve(rc);
        const double zc = sol.analysis.minimum.z;
        model = crystal::TrapModel::gridded(std::make_shared<const field::ScalarField2D>(std::move(sol.psi)), zc);
    }
    const auto cfg = crystal::relax(rc.crystal.n_ions, model, rc.ion, opt);
    const auto cls = crystal::classify(cfg);
    ctx.art.csv("crystal.csv", [&](std::ostream& o) { crystal::write_csv(cfg, o); });
    ctx.art.svg("crystal.svg", [&](std::ostream& o) { crystal::write_svg(cfg, o); });
    std::string shells;
    for (int s : cls.shells) shells += (shells.empty() ? "" : ",") + std::to_string(s);
    fmt::print("crystal: n {} shells [{}] planarity {:.3e} max force {:.3e} N\n", rc.crystal.n_ions, shells,
               cls.planarity, cfg.max_force);
}

rays::Sampling mirror_sampling(const geometry::MirrorSpec& m, double zs, int n_rays) {
    rays::Sampling s;
    s.n_rays = n_rays;
    s.min_polar = std::atan2(m.hole_radius(), zs - m.sag(m.hole_radius()));
    s.max_polar = std::atan2(m.aperture_radius(), zs - m.sag(m.aperture_radius()));
    return s;
}

void cmd_trace(Context& ctx) {
    const auto& rc = ctx.rc;
    rays::SurfaceStack stack;
    stack.add(geometry::mirror_surface(rc.geometry.mirror));
    const Vec3 src{0, 0, rc.ion_z};
    const auto paths = rays::trace_bundle(src, stack, mirror_sampling(rc.geometry.mirror, rc.ion_z, rc.optics.n_rays));
    const auto spot = rays::best_focus(paths, rc.optics.best_focus_lo, rc.optics.best_focus_hi);
    const double mag = std::abs(rays::paraxial_magnification(src, stack));
    const double radius = rc.optics.spot_radius * mag;
    const double frac = spot.enclosed_fraction(radius);
    ctx.art.csv("spot.csv", [&](std::ostream& o) { rays::write_spot_csv(spot, o); });
    ctx.art.csv("rays.csv", [&](std::ostream& o) {
        const std::size_t step = std::max<std::size_t>(1, paths.size() / 200);
        std::vector<rays::Path> some;
        for (std::size_t k = 0; k < paths.size(); k += step) some.push_back(paths[k]);
        rays::write_paths_csv(some, o);
    });
    ctx.art.csv("trace.csv", [&](std::ostream& o) {
        write_table(o, {{"source_z_mm", g9(rc.ion_z * 1e3)},
                        {"best_focus_z_mm", g9(spot.plane_z * 1e3)},
                        {"rms_radius_um", g9(spot.rms_radius * 1e6)},
                        {"magnification", g9(mag)},
                        {"enclosed_radius_um", g9(radius * 1e6)},
                        {"enclosed_fraction", g9(frac)}});
    });
    ctx.art.svg("spot.svg", [&](std::ostream& o) { rays::write_spot_svg(spot, o, 1e6, "um"); });
    fmt::print("trace: best focus z {:.4f} mm rms {:.2f} um M {:.3f}; {:.1f}% of rays within {:.1f} um\n",
               spot.plane_z * 1e3, spot.rms_radius * 1e6, mag, 100 * frac, radius * 1e6);
}

void cmd_design_corrector(Context& ctx) {
    const auto& rc = ctx.rc;
    const auto profile = corrector::design(rc.corrector);
    const auto v = corrector::verify(profile, rc.corrector, rc.verify);
    const double opl = corrector::design_opl_spread(profile, rc.corrector);
    ctx.art.csv("corrector_profile.csv", [&](std::ostream& o) { corrector::export_profile(profile, o, rc.export_pitch); });
    ctx.art.csv("corrector_spot.csv", [&](std::ostream& o) { rays::write_spot_csv(v.refocus_spot, o); });
    ctx.art.csv("corrector.csv", [&](std::ostream& o) {
        write_table(o, {{"aperture_radius_mm", g9(profile.r_max() * 1e3)},
                        {"edge_sag_mm", g9((profile.z.back() - profile.z.front()) * 1e3)},
                        {"fit_residual_rms_um", g9(profile.fit_residual_rms * 1e6)},
                        {"design_opl_spread_m", g9(opl)},
                        {"direction_spread_rad", g9(v.direction_spread)},
                        {"opl_spread_m", g9(v.opl_spread)},
                        {"refocus_focal_length_mm", g9(v.focal_length * 1e3)},
                        {"magnification", g9(v.magnification)},
                        {"refocus_rms_um", g9(v.refocus_spot.rms_radius * 1e6)},
                        {"ion_rms_um", g9(v.ion_rms_radius * 1e6)},
                        {"rays_alive", std::to_string(v.rays_alive)},
                        {"rays_traced", std::to_string(v.rays_traced)}});
    });
    std::vector<std::pair<double, double>> sag;
    for (std::size_t k = 0; k < profile.r.size(); k += std::max<std::size_t>(1, profile.r.size() / 200))
        sag.emplace_back(profile.r[k] * 1e3, (profile.z[k] - profile.z.front()) * 1e3);
    ctx.art.svg("corrector_profile.svg", [&](std::ostream& o) {
        line_svg(o, "corrector asphere", "r (mm)", "sag (mm)", {{"sag", sag}});
    });
    fmt::print("design-corrector: aperture {:.3f} mm fit {:.3f} um spread {:.2e} rad ion rms {:.3e} um (M {:.2f})\n",
               profile.r_max() * 1e3, profile.fit_residual_rms * 1e6, v.direction_spread, v.ion_rms_radius * 1e6,
               v.magnification);
}

collect::CollectionGeometry collection_geometry(const config::RunConfig& rc, double ion_z, bool with_needle) {
    collect::CollectionGeometry g;
    g.ion_z = ion_z;
    g.mirror = rc.geometry.mirror;
    if (with_needle && rc.geometry.needle) {
        g.needle = rc.geometry.needle;
        // The needle follows the ion, keeping the configured gap.
        g.needle->tip_z = ion_z - (rc.ion_z - rc.geometry.needle->tip_z);
    }
    return g;
}

collect::Fractions fractions(const config::RunConfig& rc, const collect::CollectionGeometry& g) {
    return rc.collection.monte_carlo_samples > 0
               ? collect::solid_angle_monte_carlo(g, rc.collection.emission, rc.collection.monte_carlo_samples, rc.seed)
               : collect::solid_angle(g, rc.collection.emission);
}

void cmd_collect(Context& ctx) {
    const auto& rc = ctx.rc;
    const bool occl = rc.collection.needle_occlusion && rc.geometry.needle.has_value();
    const auto bare = fractions(rc, collection_geometry(rc, rc.ion_z, false));
    const auto shadowed = occl ? fractions(rc, collection_geometry(rc, rc.ion_z, true)) : bare;
    const auto na = collect::na_equivalent(bare.geometric);
    ctx.art.csv("collection.csv", [&](std::ostream& o) {
        write_table(o, {{"ion_z_mm", g9(rc.ion_z * 1e3)},
                        {"geometric_fraction", g9(bare.geometric)},
                        {"weighted_fraction", g9(bare.weighted)},
                        {"geometric_fraction_needle", g9(shadowed.geometric)},
                        {"weighted_fraction_needle", g9(shadowed.weighted)},
                        {"geometric_error", g9(bare.geometric_error)},
                        {"solid_angle_sr", g9(na.solid_angle)},
                        {"na_equivalent", g9(na.na)},
                        {"above_hemisphere", na.above_hemisphere ? "1" : "0"}});
    });
    // Ion heights over the needle travel, needle keeping the configured gap.
    std::vector<std::pair<double, double>> geo, wgt;
    const double off = rc.geometry.needle ? rc.ion_z - rc.geometry.needle->tip_z : 0.0;
    for (int k = 0; k < rc.collection.curve_points; ++k) {
        const double z = rc.scan.tip_min + off + (rc.scan.tip_max - rc.scan.tip_min) * k / (rc.collection.curve_points - 1);
        const auto f = fractions(rc, collection_geometry(rc, z, occl));
        geo.emplace_back(z * 1e3, f.geometric);
        wgt.emplace_back(z * 1e3, f.weighted);
    }
    ctx.art.csv("collection_curve.csv", [&](std::ostream& o) {
        o << "ion_z_mm,geometric_fraction,weighted_fraction\n";
        for (std::size_t k = 0; k < geo.size(); ++k)
            o << fmt::format("{:.6f},{:.9g},{:.9g}\n", geo[k].first, geo[k].second, wgt[k].second);
    });
    ctx.art.svg("collection_curve.svg", [&](std::ostream& o) {
        line_svg(o, "collected fraction vs ion height", "ion z (mm)", "fraction", {{"geometric", geo}, {"dipole", wgt}});
    });
    fmt::print("collect: ion z {:.4f} mm geometric_fraction {:.4f} weighted_fraction {:.4f}", rc.ion_z * 1e3,
               bare.geometric, bare.weighted);
    if (occl) fmt::print(" (with needle {:.4f} / {:.4f})", shadowed.geometric, shadowed.weighted);
    fmt::print(" NA-equivalent {:.3f}{}\n", na.na, na.above_hemisphere ? " [beyond a hemisphere]" : "");
}

void cmd_budget(Context& ctx) {
    const auto& rc = ctx.rc;
    const bool occl = rc.collection.needle_occlusion && rc.geometry.needle.has_value();
    const auto f = fractions(rc, collection_geometry(rc, rc.ion_z, occl));
    const auto b = collect::photon_budget(f.weighted, rc.collection.loss_chain, rc.collection.n_excitations, f.geometric);
    ctx.art.csv("budget.csv", [&](std::ostream& o) {
        o << "stage,transmittance,cumulative\n";
        double cum = b.weighted_fraction;
        o << fmt::format("collected_fraction,{:.9g},{:.9g}\n", b.weighted_fraction, cum);
        for (const auto& e : b.loss_chain) {
            cum *= e.transmittance;
            o << fmt::format("{},{:.9g},{:.9g}\n", e.name, e.transmittance, cum);
        }
        o << fmt::format("expected_counts,,{:.9g}\n", b.expected_counts);
    });
    fmt::print("budget: geometric {:.4f} weighted {:.4f} detected/excitation {:.5f} expected counts {:.1f} per {:.0f}\n",
               b.geometric_fraction, b.weighted_fraction, b.detected_per_excitation, b.expected_counts,
               rc.collection.n_excitations);
}

int cmd_reproduce(Context& ctx, const std::string& segmented_path) {
    acceptance::SuiteInputs in{ctx.rc, segmented_path.empty() ? config::parse(config::segmented_json())
                                                              : config::load(segmented_path)};
    int failed = 0;
    std::vector<acceptance::CriterionResult> rows;
    // Every finished row is flushed so an interrupted run still leaves a table.
    auto dump = [&] {
        ctx.art.csv("reproduce_paper.csv", [&](std::ostream& o) {
            o << "criterion,name,pass,measured,target\n";
            for (const auto& r : rows)
                o << fmt::format("{},\"{}\",{},\"{}\",\"{}\"\n", r.id, r.name, r.pass ? "PASS" : "FAIL", r.measured,
                                 r.target);
        });
    };
    acceptance::run(in, [&](const acceptance::CriterionResult& r) {
        fmt::print("{}\n", acceptance::format_line(r));
        std::fflush(stdout);
        failed += !r.pass;
        rows.push_back(r);
    });
    dump();
    fmt::print("reproduce-paper: {} of {} criteria passed\n", rows.size() - failed, rows.size());
    return failed ? 1 : 0;
}

int exit_code(ErrorCategory cat) {
    switch (cat) {
    case ErrorCategory::Config: return 2;
    case ErrorCategory::Physics: return 3;
    case ErrorCategory::Io: return 4;
    }
    return 2;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Tack trap simulation: fields, pseudopotential, crystals, ray optics and photon collection", "tack"};
    app.set_version_flag("--version", TACK_VERSION);
    app.require_subcommand(1);

    std::string config_path, output_dir, format, segmented;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve-field", "solve the RF potential at 1 V"},
        {"pseudo-map", "pseudopotential map and trap minimum"},
        {"secular", "secular frequencies at the trap minimum"},
        {"needle-scan", "trap minimum and depth vs needle tip height"},
        {"crystal", "equilibrium Coulomb crystal"},
        {"trace", "mirror-only spot diagram at best focus"},
        {"design-corrector", "synthesize and verify the aspheric corrector"},
        {"collect", "solid angle and dipole-weighted collection"},
        {"budget", "photon budget through the loss chain"},
        {"reproduce-paper", "run the full acceptance table"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("config", config_path, "JSON configuration file")->required();
        sub->add_option("overrides", overrides, "key=value overrides, e.g. ion_z=2.0mm");
        sub->add_option("--output-dir", output_dir, "artifact directory (default: output.directory)");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--format", format, "csv, svg or both")->check(CLI::IsMember({"csv", "svg", "both"}));
        if (name == "reproduce-paper")
            sub->add_option("--segmented", segmented, "configuration of the segmented-mirror variant");
    }

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fmt::print(stderr, "error: kind=ConfigError message={}\n", e.what());
        return 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    const auto t0 = std::chrono::steady_clock::now();
    try {
        auto all = overrides;
        if (seed) all.push_back(fmt::format("seed={}", *seed));
        if (!format.empty()) all.push_back(fmt::format("output.format=\"{}\"", format));
        if (!output_dir.empty()) all.push_back(fmt::format("output.directory={}", nlohmann::json(output_dir).dump()));
        auto rc = config::load(config_path, all);
        Context ctx{rc, Artifacts(rc.output.directory, rc.output.format)};
        int status = 0;
        if (cmd == "solve-field") cmd_solve_field(ctx);
        else if (cmd == "pseudo-map") cmd_pseudo_map(ctx);
        else if (cmd == "secular") cmd_secular(ctx);
        else if (cmd == "needle-scan") cmd_needle_scan(ctx);
        else if (cmd == "crystal") cmd_crystal(ctx);
        else if (cmd == "trace") cmd_trace(ctx);
        else if (cmd == "design-corrector") cmd_design_corrector(ctx);
        else if (cmd == "collect") cmd_collect(ctx);
        else if (cmd == "budget") cmd_budget(ctx);
        else status = cmd_reproduce(ctx, segmented);

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        nlohmann::json manifest{{"subcommand", cmd},
                                {"config_hash", rc.hash()},
                                {"tool_version", TACK_VERSION},
                                {"wall_time_s", wall},
                                {"seed", rc.seed},
                                {"files", ctx.art.files()}};
        ctx.art.write("manifest.json", [&](std::ostream& o) { o << manifest.dump(2) << '\n'; });
        return status;
    } catch (const Error& e) {
        fmt::print(stderr, "error: kind={} message={}\n", to_string(e.code()), e.message());
        return exit_code(e.category());
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: kind=IoError message={}\n", e.what());
        return 4;
    }
}

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
    return run(args);
}

} // namespace tack::cli
