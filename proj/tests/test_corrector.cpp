#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "support.hpp"
#include "tack/constants.hpp"
#include "tack/corrector.hpp"

using namespace tack;
using namespace tack::corrector;
using testing::code_of;
namespace c = tack::constants;

namespace {

const AsphereProfile& default_profile() {
    static const AsphereProfile p = design(CorrectorDesignSpec{});
    return p;
}

const Verification& default_verification() {
    static const Verification v = verify(default_profile(), CorrectorDesignSpec{});
    return v;
}

// Source at the mirror's centre: the reflected bundle diverges from C again.
CorrectorDesignSpec from_centre(AsphericFace face, double vertex_z, double limit_deg) {
    CorrectorDesignSpec s;
    s.source_z = s.mirror.radius_of_curvature;
    s.window.reset();
    s.aspheric_face = face;
    s.front_face_z = vertex_z;
    s.max_emission_angle = limit_deg * c::deg;
    s.center_thickness = 5e-3;
    return s;
}

} // namespace

TEST_SUITE("corrector") {

TEST_CASE("point source to collimated inside glass is a hyperbola") {
    // sqrt(r^2 + (d + z)^2) = d + n z  gives  r^2 = 2 d (n-1) z - (1-n^2) z^2,
    // a conic with R = d (n-1) and k = -n^2.
    const auto spec = from_centre(AsphericFace::Front, 10e-3, 10);
    const auto p = design(spec);
    const double n = spec.material_index, d = spec.front_face_z - spec.source_z;
    const double R = d * (n - 1), k = -n * n;
    REQUIRE(p.coefficients.size() >= 3);
    CHECK(p.coefficients[0] == doctest::Approx(1 / (2 * R)).epsilon(1e-3));
    CHECK(p.coefficients[1] == doctest::Approx((1 + k) / (8 * std::pow(R, 3))).epsilon(1e-3));
    CHECK(p.coefficients[2] == doctest::Approx((1 + k) * (1 + k) / (16 * std::pow(R, 5))).epsilon(1e-3));
    for (std::size_t j = 0; j < p.r.size(); j += 50) {
        const double r = p.r[j];
        const double sag = r * r / (R * (1 + std::sqrt(1 - (1 + k) * r * r / (R * R))));
        CHECK(std::abs(p.z[j] - p.z.front() - sag) < 1e-10);
    }
}

TEST_CASE("paraxial rear surface matches the single-surface power") {
    // Inside the plate the source appears n d behind the flat face; a sphere of
    // radius (n d + t)(n-1)/n then collimates.
    const auto spec = from_centre(AsphericFace::Rear, 20e-3, 1);
    const auto p = design(spec);
    const double n = spec.material_index, d = spec.front_face_z - spec.source_z;
    const double D = n * d + spec.center_thickness;
    CHECK(std::abs(1 / (2 * p.coefficients[0])) == doctest::Approx(D * (n - 1) / n).epsilon(0.01));
}

TEST_CASE("design bundle is equal-path and collimated") {
    const auto& p = default_profile();
    const CorrectorDesignSpec spec;
    CHECK(design_opl_spread(p, spec) <= 1e-9);
    CHECK(p.fit_residual_rms <= 1e-6);
    const auto& v = default_verification();
    CHECK(v.direction_spread < 1e-6);
    CHECK(v.rays_alive == v.rays_traced);
    CHECK(v.ion_rms_radius < 10e-6);
}

TEST_CASE("a 10 um bump degrades collimation") {
    auto bumped = default_profile();
    const double r0 = 0.5 * bumped.r_max(), w = 0.1 * bumped.r_max();
    for (std::size_t j = 0; j < bumped.r.size(); ++j) {
        const double x = (bumped.r[j] - r0) / w;
        const double g = 10e-6 * std::exp(-x * x);
        bumped.z[j] += g;
        bumped.slope[j] += -2 * x / w * g;
    }
    const auto v = verify(bumped, CorrectorDesignSpec{});
    CHECK(v.direction_spread >= 10 * default_verification().direction_spread);
    CHECK(v.ion_rms_radius >= 10 * default_verification().ion_rms_radius);
}

TEST_CASE("doubling the design rays leaves the spot unchanged") {
    CorrectorDesignSpec spec;
    spec.design_ray_count *= 2;
    const auto v = verify(design(spec), spec);
    CHECK(v.ion_rms_radius == doctest::Approx(default_verification().ion_rms_radius).epsilon(0.1));
}

TEST_CASE("empty profiles are rejected") {
    const AsphereProfile empty;
    const CorrectorDesignSpec spec;
    std::ostringstream out;
    CHECK(code_of([&] { verify(empty, spec); }) == ErrorCode::EmptyProfile);
    CHECK(code_of([&] { export_profile(empty, out); }) == ErrorCode::EmptyProfile);
    CHECK(code_of([&] { corrector_stack(empty, spec); }) == ErrorCode::EmptyProfile);
}

TEST_CASE("invalid design inputs") {
    CorrectorDesignSpec s;
    s.material_index = 1.0;
    CHECK(code_of([&] { design(s); }) == ErrorCode::ConfigError);
    s = CorrectorDesignSpec{};
    s.fit_degree = 7;
    CHECK(code_of([&] { design(s); }) == ErrorCode::ConfigError);
    s = CorrectorDesignSpec{};
    s.front_face_z = 30e-3;  // inside the window
    CHECK(code_of([&] { design(s); }) == ErrorCode::ConfigError);
}

TEST_CASE("machining table") {
    const auto& p = default_profile();
    std::ostringstream out;
    export_profile(p, out, 50e-6);
    std::istringstream in(out.str());
    std::string line;
    int header = 0, rows = 0;
    double last_r = -1, last_sag = 0;
    bool monotone = true;
    while (std::getline(in, line)) {
        if (line.rfind('#', 0) == 0) continue;
        if (line == "r_mm,sag_mm,slope") {
            ++header;
            continue;
        }
        double r = 0, sag = 0, slope = 0;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &r, &sag, &slope) == 3);
        if (rows == 0) CHECK(sag == doctest::Approx(0.0));
        monotone = monotone && r > last_r;
        last_r = r;
        last_sag = sag;
        ++rows;
    }
    CHECK(header == 1);
    CHECK(monotone);
    CHECK(rows == static_cast<int>(std::floor(p.r_max() / 50e-6 + 1e-9)) + 1);
    CHECK(last_sag * 1e-3 == doctest::Approx(p.surface().sag(last_r * 1e-3) - p.z.front()).epsilon(1e-6));
    CHECK(out.str().find("# a2=") != std::string::npos);
}


TEST_CASE("centre-of-curvature design verifies as collimated") {
    auto spec = from_centre(AsphericFace::Front, 10e-3, 10);
    const auto p = design(spec);
    VerifyOptions o;
    o.n_rays = 1000;
    const auto v = verify(p, spec, o);
    CHECK(v.direction_spread < 1e-6);
}

}
