#pragma once

// Synthesis of the aspheric corrector that collimates the mirror's bundle.

#include <iosfwd>
#include <optional>
#include <vector>

#include "tack/geometry.hpp"
#include "tack/rays.hpp"

namespace tack::corrector {

// Which face of the plate carries the asphere. Rear: flat face toward the
// chamber, asphere exits into air. Front: asphere faces the source.
enum class AsphericFace { Rear, Front };

struct CorrectorDesignSpec {
    double source_z = 2.25e-3;
    geometry::MirrorSpec mirror;
    std::optional<rays::PlaneWindow> window = rays::PlaneWindow{};
    // Rear: z of the flat entrance face. Front: z of the asphere vertex.
    double front_face_z = 60e-3;
    double center_thickness = 13e-3;
    double material_index = 1.49;
    int design_ray_count = 2000;
    AsphericFace aspheric_face = AsphericFace::Rear;
    double max_emission_angle = 0.0;  // rad from -z; 0 uses the mirror rim
    int fit_degree = 12;              // even polynomial degree

    void validate() const;
    // Largest emission angle used by the design.
    double emission_limit() const;
};

struct AsphereProfile {
    std::vector<double> r;
    std::vector<double> z;
    std::vector<double> slope;
    std::vector<double> coefficients;  // a2, a4, ... in SI: z = z0 + sum a_2i r^2i
    double z0 = 0.0;
    double fit_residual_rms = 0.0;
    double material_index = 1.49;
    AsphericFace face = AsphericFace::Rear;
    double flat_z = 0.0;  // z of the plane face

    bool empty() const { return r.empty(); }
    double r_max() const { return r.back(); }
    double polynomial_sag(double rr) const;
    rays::TabulatedAsphere surface() const;
};

AsphereProfile design(const CorrectorDesignSpec& spec);

// Mirror, window and corrector. Without the hole the stack also carries the
// axial design rays.
rays::SurfaceStack corrector_stack(const AsphereProfile& profile, const CorrectorDesignSpec& spec,
                                   bool with_hole = true);

// Max minus min optical path from the source to a plane beyond the corrector,
// re-traced along the design emission angles.
double design_opl_spread(const AsphereProfile& profile, const CorrectorDesignSpec& spec);

struct VerifyOptions {
    double objective_na = 0.26;
    int n_rays = 4000;
    double offset = 0.25;  // sampling phase, distinct from the design rays
};

struct Verification {
    double direction_spread = 0.0;  // rad, max angle to +z
    double opl_spread = 0.0;        // m
    rays::SpotDiagram refocus_spot;
    double focal_length = 0.0;      // ideal refocusing lens
    double magnification = 0.0;     // |u / u'| source to refocus plane
    double ion_rms_radius = 0.0;    // refocus rms / magnification
    int rays_traced = 0;
    int rays_alive = 0;
};

Verification verify(const AsphereProfile& profile, const CorrectorDesignSpec& spec, const VerifyOptions& options = {});

// CSV machining table: r, sag, slope at `pitch`, then the coefficient block.
void export_profile(const AsphereProfile& profile, std::ostream& out, double pitch = 10e-6);

} // namespace tack::corrector
