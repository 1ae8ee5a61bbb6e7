#pragma once

// Run configuration: a JSON file in mm / deg / V / MHz, strict keys, plus
// key=value overrides from the command line.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tack/collect.hpp"
#include "tack/corrector.hpp"
#include "tack/field.hpp"
#include "tack/geometry.hpp"
#include "tack/pseudo.hpp"
#include "tack/rays.hpp"

namespace tack::config {

struct OpticsSettings {
    std::optional<rays::PlaneWindow> window = rays::PlaneWindow{};
    int n_rays = 20000;
    double best_focus_lo = 4e-3;
    double best_focus_hi = 20e-3;
    double spot_radius = 10e-6;  // ion-referred radius for the enclosed fraction
};

struct CollectionSettings {
    collect::EmissionModel emission = collect::EmissionModel::dipole();
    bool needle_occlusion = true;
    long monte_carlo_samples = 0;  // 0 selects quadrature
    double n_excitations = 1e6;
    std::vector<collect::LossElement> loss_chain = collect::default_loss_chain();
    int curve_points = 16;
};

struct CrystalSettings {
    int n_ions = 7;
    bool use_field = false;  // relax in the solved pseudopotential instead of the harmonic model
    double axial_frequency = 420e3;
    double radial_frequency = 200e3;
    int restarts = 8;
    int max_iterations = 20000;
};

struct ScanSettings {
    double tip_min = 1.45e-3;
    double tip_max = 2.95e-3;
    int points = 8;
    double central_span = 1e-3;
};

struct OutputSettings {
    std::string directory = "out";
    std::string format = "both";  // csv | svg | both
};

struct RunConfig {
    geometry::TrapGeometry geometry = geometry::TrapGeometry::tack_default();
    geometry::GridSpec grid;
    field::SolveOptions solver;
    pseudo::RfDrive drive;
    pseudo::IonSpecies ion = pseudo::IonSpecies::barium138();
    double ion_z = 2.25e-3;  // emitting ion for optics and collection
    OpticsSettings optics;
    corrector::CorrectorDesignSpec corrector;  // mirror, window and source filled from the sections above
    corrector::VerifyOptions verify;
    double export_pitch = 10e-6;
    CollectionSettings collection;
    CrystalSettings crystal;
    ScanSettings scan;
    OutputSettings output;
    std::uint64_t seed = 1;

    nlohmann::json resolved;  // defaults + file + overrides, in file units

    std::string hash() const;
    std::vector<double> scan_tips() const;
};

nlohmann::json default_json();
// Ellipsoidal mirror in three height bands, RF on the upper two, no needle.
nlohmann::json segmented_json();

// Throws ConfigError on unknown keys, bad units or invalid values.
RunConfig parse(const nlohmann::json& file, const std::vector<std::string>& overrides = {});
RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

// Applies one key=value override to a resolved document. Keys are dotted
// paths or an unambiguous underscore-joined suffix (ion_z); values may carry
// a unit (2.0mm, 23MHz, 10deg).
void apply_override(nlohmann::json& doc, const std::string& assignment);

std::uint64_t fnv1a(const std::string& bytes);

} // namespace tack::config
