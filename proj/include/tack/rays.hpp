#pragma once

// Sequential geometric ray tracing through conic mirrors, plane windows,
// tabulated aspheres and an ideal refocusing lens.

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tack/geometry.hpp"
#include "tack/vec3.hpp"

namespace tack::rays {

using geometry::ConicSurface;
using geometry::SurfaceKind;

struct Ray {
    Vec3 origin;
    Vec3 direction{0, 0, 1};
    double opl = 0.0;  // m
    bool alive = true;
};

// Rotationally symmetric sag table, cubic Hermite between samples. r[0] = 0.
struct TabulatedAsphere {
    std::vector<double> r;
    std::vector<double> z;
    std::vector<double> slope;  // dz/dr
    double n_before = 1.0;
    double n_after = 1.0;

    void validate() const;
    double r_max() const { return r.back(); }
    double sag(double rr) const;
    double slope_at(double rr) const;
    double z_min() const;
    double z_max() const;
};

// Paraxially perfect thin lens: every ray of a collimated bundle passes
// through one point of the focal plane.
struct IdealLens {
    double z = 0.0;
    double focal_length = 1.0;
    double r_max = 1.0;
};

// Two parallel refracting planes at z and z + thickness.
struct PlaneWindow {
    double z = 40e-3;
    double thickness = 4e-3;
    double n = 1.458;
    double r_max = 50e-3;
};

using Surface = std::variant<ConicSurface, TabulatedAsphere, IdealLens>;

struct SurfaceStack {
    std::vector<Surface> surfaces;
    double n_object = 1.0;

    void add(Surface s) { surfaces.push_back(std::move(s)); }
    void add_window(const PlaneWindow& w);
};

ConicSurface plane_surface(double z, double n_before, double n_after, double r_max);

struct Hit {
    Vec3 point;
    Vec3 normal;  // unit, facing the incoming ray
    double t = 0.0;
};

inline constexpr double intersect_epsilon = 1e-12;  // m

std::optional<Hit> intersect(const Ray& ray, const ConicSurface& s);
std::optional<Hit> intersect(const Ray& ray, const TabulatedAsphere& s);
std::optional<Hit> intersect(const Ray& ray, const IdealLens& s);
std::optional<Hit> intersect(const Ray& ray, const Surface& s);

// Both move the ray to the hit point, adding n_medium * length to the OPL.
Ray reflect(const Ray& ray, const Hit& hit, double n_medium = 1.0);

// nullopt on total internal reflection.
std::optional<Ray> refract(const Ray& ray, const Hit& hit, double n1, double n2);

struct Path {
    std::vector<Vec3> points;  // source, then one point per surface reached
    Ray ray;                   // state after the last surface
    int failed_surface = -1;   // index of the surface that was missed, -1 if none
    std::string status = "ok"; // ok | miss | tir
};

Path trace(const Ray& ray, const SurfaceStack& stack);

enum class Pattern { Spiral, Hexapolar, Meridional };

// Directions about `axis` with polar angle in [min_polar, max_polar].
struct Sampling {
    int n_rays = 1000;
    double min_polar = 0.0;
    double max_polar = 1.0;
    Vec3 axis{0, 0, -1};
    Pattern pattern = Pattern::Spiral;
    double offset = 0.5;  // fractional phase of the sample positions, in [0, 1)
};

std::vector<Vec3> sample_directions(const Sampling& sampling);

std::vector<Path> trace_bundle(const Vec3& source, const SurfaceStack& stack, const Sampling& sampling);

struct SpotDiagram {
    double plane_z = 0.0;
    std::vector<std::pair<double, double>> hits;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    double rms_radius = 0.0;
    double fwhm_estimate = 0.0;  // 2.355 x rms of the x marginal

    // Fraction of hits within `radius` of the centroid.
    double enclosed_fraction(double radius) const;
};

SpotDiagram spot(const std::vector<Path>& paths, double plane_z);

// Plane in [z_lo, z_hi] minimizing the rms radius (golden section).
SpotDiagram best_focus(const std::vector<Path>& paths, double z_lo, double z_hi, double tolerance = 1e-8);

// Angular magnification u / u' of a near-axial ray from the source; the
// stack's central obstructions are removed for this ray.
double paraxial_magnification(const Vec3& source, const SurfaceStack& stack, double angle = 1e-5);

void write_spot_csv(const SpotDiagram& spot, std::ostream& out);
void write_spot_svg(const SpotDiagram& spot, std::ostream& out, double scale_to = 1.0, const std::string& unit = "m");
void write_paths_csv(const std::vector<Path>& paths, std::ostream& out);

} // namespace tack::rays
