#pragma once

// Axisymmetric trap geometry: mirror cap, vertex hole, needle, ring, top plate
// and the grounded chamber box. Optical axis is z, mirror vertex at z = 0,
// concave side toward +z. All lengths are SI (metres).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tack::geometry {

enum class ConicKind { Sphere, Paraboloid, Ellipsoid };

struct MirrorSpec {
    double radius_of_curvature = 4e-3;
    double aperture_diameter = 6e-3;
    double vertex_hole_diameter = 0.75e-3;
    ConicKind kind = ConicKind::Sphere;
    double conic_constant = 0.0;
    double reflectivity = 0.85;
    // Depth of the conducting substrate below the vertex.
    double substrate_thickness = 0.8e-3;

    void validate() const;
    double curvature() const { return 1.0 / radius_of_curvature; }
    double aperture_radius() const { return 0.5 * aperture_diameter; }
    double hole_radius() const { return 0.5 * vertex_hole_diameter; }
    // Surface height above the vertex at radius r (no aperture check).
    double sag(double r) const;
};

struct NeedleSpec {
    double shaft_diameter = 0.5e-3;
    double taper_half_angle = 0.383972435438752526;  // 22 degrees
    double tip_z = 1.7e-3;
    double travel_range = 2.0e-3;

    void validate() const;
    double shaft_radius() const { return 0.5 * shaft_diameter; }
    double cone_length() const;
    // Needle radius at height z; 0 above the tip.
    double radius_at(double z) const;
};

struct RingSpec {
    double inner_radius = 4e-3;
    double outer_radius = 6e-3;
    double height_z = 2.5e-3;
    double thickness = 0.25e-3;
};

struct PlateSpec {
    double height_z = 8e-3;
    double aperture_radius = 5e-3;
    double thickness = 0.25e-3;
};

enum class RoleKind { RF, Ground, DC };

struct ElectrodeRole {
    RoleKind kind = RoleKind::Ground;
    double bias = 0.0;  // volts, DC only

    static ElectrodeRole rf() { return {RoleKind::RF, 0.0}; }
    static ElectrodeRole ground() { return {RoleKind::Ground, 0.0}; }
    static ElectrodeRole dc(double volts) { return {RoleKind::DC, volts}; }
    bool operator==(const ElectrodeRole&) const = default;
};

// Band of the mirror surface, selected by surface height.
struct MirrorSegment {
    double z_min = 0.0;
    double z_max = 0.0;
    ElectrodeRole role;
};

struct TrapGeometry {
    MirrorSpec mirror;
    std::optional<NeedleSpec> needle;
    std::optional<RingSpec> ring;
    std::optional<PlateSpec> plate;
    double chamber_radius = 25e-3;
    // Roles keyed by electrode name: mirror, needle, ring, plate, chamber.
    std::map<std::string, ElectrodeRole> roles;
    std::vector<MirrorSegment> mirror_segments;

    // The trap as built: R = 4 mm mirror, 0.75 mm hole, 0.5 mm needle.
    static TrapGeometry tack_default();

    void validate() const;
    ElectrodeRole role_of(const std::string& electrode) const;
};

struct GridSpec {
    double r_max = 12e-3;
    double z_min = -1e-3;
    double z_max = 10e-3;
    double spacing = 10e-6;

    int nr() const;
    int nz() const;
    double r(int i) const { return i * spacing; }
    double z(int j) const { return z_min + j * spacing; }
};

struct ElectrodeInfo {
    std::string name;
    ElectrodeRole role;
};

// Per-node electrode map on a uniform (r, z) node grid; column i = 0 is the
// symmetry axis. Outer box nodes not claimed by an electrode belong to the
// grounded chamber.
class ElectrodeMask {
public:
    static constexpr std::int16_t vacuum = -1;

    ElectrodeMask() = default;
    ElectrodeMask(GridSpec grid, std::vector<ElectrodeInfo> electrodes);

    const GridSpec& grid() const { return grid_; }
    int nr() const { return nr_; }
    int nz() const { return nz_; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nr_ + i; }

    std::int16_t at(int i, int j) const { return cells_[index(i, j)]; }
    void set(int i, int j, std::int16_t id) { cells_[index(i, j)] = id; }
    bool is_electrode(int i, int j) const { return at(i, j) != vacuum; }
    bool on_axis(int i) const { return i == 0; }

    const std::vector<std::int16_t>& cells() const { return cells_; }
    const std::vector<ElectrodeInfo>& electrodes() const { return electrodes_; }
    std::optional<int> electrode_id(const std::string& name) const;
    std::size_t cell_count(int electrode_id) const;

    bool operator==(const ElectrodeMask& o) const {
        return cells_ == o.cells_ && nr_ == o.nr_ && nz_ == o.nz_;
    }

private:
    GridSpec grid_;
    int nr_ = 0;
    int nz_ = 0;
    std::vector<std::int16_t> cells_;
    std::vector<ElectrodeInfo> electrodes_;
};

ElectrodeMask rasterize(const TrapGeometry& geometry, const GridSpec& grid);

// Number of 4-connected components of one electrode's cells.
int component_count(const ElectrodeMask& mask, int electrode_id);

enum class SurfaceKind { Mirror, Refracting };

// Rotationally symmetric conic z(r) = vertex_z + c r^2 / (1 + sqrt(1 - (1+k) c^2 r^2)).
struct ConicSurface {
    double vertex_z = 0.0;
    double curvature = 0.0;
    double conic_constant = 0.0;
    double r_min = 0.0;
    double r_max = 1.0;
    SurfaceKind kind = SurfaceKind::Mirror;
    double n_before = 1.0;
    double n_after = 1.0;

    void validate() const;
    // Sag without aperture check; NaN where the conic is undefined.
    double sag_unchecked(double r) const;
};

double surface_sag(const ConicSurface& surface, double r);

ConicSurface mirror_surface(const MirrorSpec& mirror);

} // namespace tack::geometry
