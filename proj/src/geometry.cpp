#include "tack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::geometry {

namespace {

double conic_sag(double c, double k, double r) {
    const double arg = 1.0 - (1.0 + k) * c * c * r * r;
    if (arg < 0.0) return std::numeric_limits<double>::quiet_NaN();
    return c * r * r / (1.0 + std::sqrt(arg));
}

std::string mm(double v) {
    std::ostringstream os;
    os << v * 1e3 << " mm";
    return os.str();
}

} // namespace

void MirrorSpec::validate() const {
    if (!(radius_of_curvature > 0.0)) fail(ErrorCode::ConfigError, "mirror radius of curvature must be positive");
    if (!(aperture_diameter > 0.0)) fail(ErrorCode::ConfigError, "mirror aperture must be positive");
    if (vertex_hole_diameter < 0.0 || vertex_hole_diameter >= aperture_diameter)
        fail(ErrorCode::ConfigError, "vertex hole must be smaller than the mirror aperture");
    if (reflectivity < 0.0 || reflectivity > 1.0) fail(ErrorCode::ConfigError, "mirror reflectivity outside [0,1]");
    if (!(substrate_thickness > 0.0)) fail(ErrorCode::ConfigError, "mirror substrate thickness must be positive");
    if (kind == ConicKind::Sphere && conic_constant != 0.0)
        fail(ErrorCode::ConfigError, "spherical mirror requires conic constant 0");
    if (kind == ConicKind::Paraboloid && conic_constant != -1.0)
        fail(ErrorCode::ConfigError, "paraboloid requires conic constant -1");
    if (kind == ConicKind::Ellipsoid && !(conic_constant > -1.0 && conic_constant != 0.0))
        fail(ErrorCode::ConfigError, "ellipsoid requires conic constant > -1 and != 0");
    if (std::isnan(sag(aperture_radius())))
        fail(ErrorCode::ConfigError, "mirror aperture exceeds the conic's radial extent");
}

double MirrorSpec::sag(double r) const { return conic_sag(curvature(), conic_constant, r); }

void NeedleSpec::validate() const {
    if (!(shaft_diameter > 0.0)) fail(ErrorCode::ConfigError, "needle shaft diameter must be positive");
    if (!(taper_half_angle > 0.0 && taper_half_angle < 0.5 * constants::pi))
        fail(ErrorCode::ConfigError, "needle taper half-angle must be in (0, 90) degrees");
    if (!(travel_range > 0.0)) fail(ErrorCode::ConfigError, "needle travel range must be positive");
}

double NeedleSpec::cone_length() const { return shaft_radius() / std::tan(taper_half_angle); }

double NeedleSpec::radius_at(double z) const {
    if (z > tip_z) return 0.0;
    return std::min(shaft_radius(), (tip_z - z) * std::tan(taper_half_angle));
}

TrapGeometry TrapGeometry::tack_default() {
    TrapGeometry g;
    g.needle = NeedleSpec{};
    g.ring = RingSpec{};
    g.plate = PlateSpec{};
    g.roles = {{"mirror", ElectrodeRole::rf()},
               {"needle", ElectrodeRole::ground()},
               {"ring", ElectrodeRole::ground()},
               {"plate", ElectrodeRole::ground()},
               {"chamber", ElectrodeRole::ground()}};
    return g;
}

void TrapGeometry::validate() const {
    mirror.validate();
    if (needle) {
        needle->validate();
        if (needle->shaft_diameter >= mirror.vertex_hole_diameter)
            fail(ErrorCode::ConfigError, "needle shaft must pass through the vertex hole");
    }
    if (ring) {
        if (!(ring->inner_radius > 0.0 && ring->outer_radius > ring->inner_radius && ring->thickness > 0.0))
            fail(ErrorCode::ConfigError, "ring needs 0 < inner radius < outer radius and positive thickness");
        if (ring->outer_radius > chamber_radius) fail(ErrorCode::ConfigError, "ring lies outside the chamber");
    }
    if (plate) {
        if (!(plate->aperture_radius > 0.0 && plate->thickness > 0.0))
            fail(ErrorCode::ConfigError, "plate needs positive aperture radius and thickness");
        if (plate->aperture_radius > chamber_radius) fail(ErrorCode::ConfigError, "plate aperture outside the chamber");
    }
    if (mirror.aperture_radius() > chamber_radius) fail(ErrorCode::ConfigError, "mirror lies outside the chamber");
    for (const auto& s : mirror_segments) {
        if (!(s.z_max > s.z_min)) fail(ErrorCode::ConfigError, "mirror segment needs z_max > z_min");
    }
    for (std::size_t a = 0; a < mirror_segments.size(); ++a)
        for (std::size_t b = a + 1; b < mirror_segments.size(); ++b)
            if (mirror_segments[a].z_min < mirror_segments[b].z_max && mirror_segments[b].z_min < mirror_segments[a].z_max)
                fail(ErrorCode::GeometryOverlap, "mirror segments overlap in surface height");
}

ElectrodeRole TrapGeometry::role_of(const std::string& electrode) const {
    auto it = roles.find(electrode);
    if (it != roles.end()) return it->second;
    if (electrode == "mirror") return ElectrodeRole::rf();
    return ElectrodeRole::ground();
}

int GridSpec::nr() const { return static_cast<int>(std::lround(r_max / spacing)) + 1; }
int GridSpec::nz() const { return static_cast<int>(std::lround((z_max - z_min) / spacing)) + 1; }

ElectrodeMask::ElectrodeMask(GridSpec grid, std::vector<ElectrodeInfo> electrodes)
    : grid_(grid), nr_(grid.nr()), nz_(grid.nz()),
      cells_(static_cast<std::size_t>(nr_) * nz_, vacuum), electrodes_(std::move(electrodes)) {}

std::optional<int> ElectrodeMask::electrode_id(const std::string& name) const {
    for (std::size_t k = 0; k < electrodes_.size(); ++k)
        if (electrodes_[k].name == name) return static_cast<int>(k);
    return std::nullopt;
}

std::size_t ElectrodeMask::cell_count(int electrode_id) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), static_cast<std::int16_t>(electrode_id)));
}

namespace {

std::vector<int> label_components(const ElectrodeMask& mask, auto&& member) {
    const int nr = mask.nr(), nz = mask.nz();
    std::vector<int> label(static_cast<std::size_t>(nr) * nz, -1);
    std::vector<std::pair<int, int>> stack;
    int next = 0;
    for (int j = 0; j < nz; ++j)
        for (int i = 0; i < nr; ++i) {
            if (!member(i, j) || label[mask.index(i, j)] >= 0) continue;
            stack.push_back({i, j});
            label[mask.index(i, j)] = next;
            while (!stack.empty()) {
                auto [ci, cj] = stack.back();
                stack.pop_back();
                const int di[4] = {1, -1, 0, 0};
                const int dj[4] = {0, 0, 1, -1};
                for (int d = 0; d < 4; ++d) {
                    const int ni = ci + di[d], nj = cj + dj[d];
                    if (ni < 0 || nj < 0 || ni >= nr || nj >= nz) continue;
                    if (!member(ni, nj) || label[mask.index(ni, nj)] >= 0) continue;
                    label[mask.index(ni, nj)] = next;
                    stack.push_back({ni, nj});
                }
            }
            ++next;
        }
    label.push_back(next);  // component count rides at the end
    return label;
}

} // namespace

int component_count(const ElectrodeMask& mask, int electrode_id) {
    auto labels = label_components(mask, [&](int i, int j) { return mask.at(i, j) == electrode_id; });
    return labels.back();
}

ElectrodeMask rasterize(const TrapGeometry& geometry, const GridSpec& grid) {
    geometry.validate();
    if (!(grid.spacing > 0.0)) fail(ErrorCode::ConfigError, "grid spacing must be positive");
    if (!(grid.r_max > 0.0 && grid.z_max > grid.z_min)) fail(ErrorCode::ConfigError, "degenerate grid extent");

    const auto& m = geometry.mirror;
    const double vertex_z = 0.0;
    const double bottom_z = vertex_z - m.substrate_thickness;
    if (m.aperture_radius() > grid.r_max || bottom_z < grid.z_min || vertex_z + m.sag(m.aperture_radius()) > grid.z_max)
        fail(ErrorCode::GridDoesNotCoverGeometry, "mirror extends beyond the solver grid");
    if (geometry.ring && (geometry.ring->outer_radius > grid.r_max || geometry.ring->height_z > grid.z_max))
        fail(ErrorCode::GridDoesNotCoverGeometry, "ring extends beyond the solver grid");
    if (geometry.plate && (geometry.plate->height_z > grid.z_max || geometry.plate->aperture_radius > grid.r_max))
        fail(ErrorCode::GridDoesNotCoverGeometry, "top plate beyond the solver grid");
    if (geometry.needle) {
        const auto& n = *geometry.needle;
        if (n.tip_z > grid.z_max || n.tip_z < grid.z_min)
            fail(ErrorCode::GridDoesNotCoverGeometry, "needle tip outside the solver grid");
        const double cells = n.shaft_diameter / grid.spacing;
        if (cells < 4.0) {
            std::ostringstream os;
            os << "needle shaft " << mm(n.shaft_diameter) << " spans " << cells << " cells (< 4)";
            fail(ErrorCode::GridTooCoarse, os.str());
        }
    }

    // Electrode table: mirror (or its segments), needle, ring, plate, chamber.
    std::vector<ElectrodeInfo> electrodes;
    int mirror_id = -1;
    std::vector<int> segment_ids;
    if (geometry.mirror_segments.empty()) {
        mirror_id = static_cast<int>(electrodes.size());
        electrodes.push_back({"mirror", geometry.role_of("mirror")});
    } else {
        for (std::size_t s = 0; s < geometry.mirror_segments.size(); ++s) {
            segment_ids.push_back(static_cast<int>(electrodes.size()));
            electrodes.push_back({"segment" + std::to_string(s), geometry.mirror_segments[s].role});
        }
    }
    int needle_id = -1, ring_id = -1, plate_id = -1;
    if (geometry.needle) {
        needle_id = static_cast<int>(electrodes.size());
        electrodes.push_back({"needle", geometry.role_of("needle")});
    }
    if (geometry.ring) {
        ring_id = static_cast<int>(electrodes.size());
        electrodes.push_back({"ring", geometry.role_of("ring")});
    }
    if (geometry.plate) {
        plate_id = static_cast<int>(electrodes.size());
        electrodes.push_back({"plate", geometry.role_of("plate")});
    }
    const int chamber_id = static_cast<int>(electrodes.size());
    electrodes.push_back({"chamber", geometry.role_of("chamber")});

    ElectrodeMask mask(grid, electrodes);
    const int nr = mask.nr(), nz = mask.nz();
    const double h = grid.spacing;
    const double eps = 1e-9 * h;
    const double plate_outer = std::min(geometry.chamber_radius, grid.r_max);

    for (int j = 0; j < nz; ++j) {
        const double z = grid.z(j);
        for (int i = 0; i < nr; ++i) {
            const double r = grid.r(i);
            int claimant = -1;
            int claims = 0;
            auto claim = [&](int id) {
                if (claims++ == 0) claimant = id;
            };

            if (r >= m.hole_radius() - eps && r <= m.aperture_radius() + eps && z >= bottom_z - eps) {
                const double surf = vertex_z + m.sag(std::min(r, m.aperture_radius()));
                if (z <= surf + eps) {
                    if (mirror_id >= 0) {
                        claim(mirror_id);
                    } else {
                        for (std::size_t s = 0; s < segment_ids.size(); ++s) {
                            const auto& seg = geometry.mirror_segments[s];
                            if (surf >= seg.z_min && surf < seg.z_max) {
                                claim(segment_ids[s]);
                                break;
                            }
                        }
                    }
                }
            }
            if (needle_id >= 0 && z <= geometry.needle->tip_z + eps && r <= geometry.needle->radius_at(z) + eps)
                claim(needle_id);
            if (ring_id >= 0 && r >= geometry.ring->inner_radius - eps && r <= geometry.ring->outer_radius + eps &&
                std::abs(z - geometry.ring->height_z) <= 0.5 * geometry.ring->thickness + eps)
                claim(ring_id);
            if (plate_id >= 0 && r >= geometry.plate->aperture_radius - eps && r <= plate_outer + eps &&
                std::abs(z - geometry.plate->height_z) <= 0.5 * geometry.plate->thickness + eps)
                claim(plate_id);

            if (claims > 1) {
                std::ostringstream os;
                os << "electrodes '" << electrodes[claimant].name << "' and another overlap at r=" << mm(r)
                   << ", z=" << mm(z);
                fail(ErrorCode::GeometryOverlap, os.str());
            }
            if (claims == 0 && (i == nr - 1 || j == 0 || j == nz - 1)) claimant = chamber_id;
            if (claimant >= 0) mask.set(i, j, static_cast<std::int16_t>(claimant));
        }
    }

    for (std::size_t e = 0; e < electrodes.size(); ++e)
        if (mask.cell_count(static_cast<int>(e)) == 0)
            fail(ErrorCode::GridTooCoarse, "electrode '" + electrodes[e].name + "' maps to no grid cell");

    if (geometry.mirror_segments.empty()) {
        auto labels = label_components(mask, [&](int i, int j) {
            const auto id = mask.at(i, j);
            return id != ElectrodeMask::vacuum && electrodes[id].role.kind == RoleKind::RF;
        });
        if (labels.back() != 1)
            fail(ErrorCode::RfRegionDisconnected,
                 "expected one connected RF region, found " + std::to_string(labels.back()));
    }
    return mask;
}

void ConicSurface::validate() const {
    if (!(r_max > r_min) || r_min < 0.0) fail(ErrorCode::ConfigError, "surface aperture needs 0 <= r_min < r_max");
    if (!(n_before > 0.0 && n_after > 0.0)) fail(ErrorCode::ConfigError, "refractive indices must be positive");
    if (std::isnan(sag_unchecked(r_max))) fail(ErrorCode::ConfigError, "conic undefined at the aperture edge");
}

double ConicSurface::sag_unchecked(double r) const { return vertex_z + conic_sag(curvature, conic_constant, r); }

double surface_sag(const ConicSurface& surface, double r) {
    if (r < surface.r_min || r > surface.r_max) {
        std::ostringstream os;
        os << "r = " << mm(r) << " outside [" << mm(surface.r_min) << ", " << mm(surface.r_max) << "]";
        fail(ErrorCode::OutOfAperture, os.str());
    }
    return surface.sag_unchecked(r);
}

ConicSurface mirror_surface(const MirrorSpec& mirror) {
    ConicSurface s;
    s.vertex_z = 0.0;
    s.curvature = mirror.curvature();
    s.conic_constant = mirror.conic_constant;
    s.r_min = mirror.hole_radius();
    s.r_max = mirror.aperture_radius();
    s.kind = SurfaceKind::Mirror;
    return s;
}

} // namespace tack::geometry
