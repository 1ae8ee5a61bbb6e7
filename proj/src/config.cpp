#include "tack/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::config {

namespace c = tack::constants;
using nlohmann::json;

json default_json() {
    return json::parse(R"({
  "mirror": {"radius_of_curvature": 4.0, "aperture_diameter": 6.0, "vertex_hole_diameter": 0.75,
             "kind": "sphere", "conic_constant": 0.0, "reflectivity": 0.85, "substrate_thickness": 0.8},
  "needle": {"shaft_diameter": 0.5, "taper_half_angle": 22.0, "tip_z": 1.7, "travel_range": 2.0},
  "ring": {"inner_radius": 4.0, "outer_radius": 6.0, "height_z": 2.5, "thickness": 0.25},
  "plate": {"height_z": 8.0, "aperture_radius": 5.0, "thickness": 0.25},
  "chamber": {"radius": 25.0},
  "segments": [],
  "roles": {"mirror": "rf", "needle": "ground", "ring": "ground", "plate": "ground", "chamber": "ground"},
  "drive": {"amplitude": 270.0, "frequency": 23.0},
  "ion": {"mass": 137.905247, "charge": 1.0, "z": 2.25},
  "grid": {"spacing": 0.01, "r_max": 12.0, "z_min": -1.0, "z_max": 10.0},
  "solver": {"tolerance": 1e-10, "max_iterations": 200000, "multilevel": true},
  "optics": {"window": {"z": 40.0, "thickness": 4.0, "n": 1.458, "r_max": 50.0},
             "n_rays": 20000, "best_focus_lo": 4.0, "best_focus_hi": 20.0, "spot_radius": 0.01},
  "corrector": {"front_face_z": 60.0, "center_thickness": 13.0, "material_index": 1.49,
                "design_ray_count": 2000, "aspheric_face": "rear", "max_emission_angle": 0.0,
                "fit_degree": 12, "objective_na": 0.26, "verify_rays": 4000, "export_pitch": 0.01},
  "collection": {"emission": "dipole", "dipole_axis": [0.0, 0.0, 1.0], "needle_occlusion": true,
                 "monte_carlo_samples": 0, "n_excitations": 1000000.0, "curve_points": 16,
                 "loss_chain": [{"name": "mirror", "transmittance": 0.85},
                                {"name": "viewport", "transmittance": 0.92},
                                {"name": "corrector", "transmittance": 0.92},
                                {"name": "objective", "transmittance": 0.80},
                                {"name": "beamsplitter", "transmittance": 0.50},
                                {"name": "pmt_quantum_efficiency", "transmittance": 0.145}]},
  "crystal": {"n_ions": 7, "trap": "harmonic", "axial_frequency": 420.0, "radial_frequency": 200.0,
              "restarts": 8, "max_iterations": 20000},
  "scan": {"tip_min": 1.45, "tip_max": 2.95, "points": 8, "central_span": 1.0},
  "output": {"directory": "out", "format": "both"},
  "seed": 1
})");
}

json segmented_json() {
    return json::parse(R"({
  "mirror": {"radius_of_curvature": 2.0, "aperture_diameter": 5.0, "vertex_hole_diameter": 0.0,
             "kind": "ellipsoid", "conic_constant": -0.5},
  "needle": null,
  "ring": null,
  "segments": [{"z_min": 0.0, "z_max": 0.6, "role": "ground"},
               {"z_min": 0.6, "z_max": 1.3, "role": "rf"},
               {"z_min": 1.3, "z_max": 2.2, "role": "rf"}],
  "ion": {"z": 2.0}
})");
}

namespace {

const json& segment_template() {
    static const json t = json::parse(R"({"z_min": 0.0, "z_max": 0.0, "role": "ground"})");
    return t;
}

const json& loss_template() {
    static const json t = json::parse(R"({"name": "", "transmittance": 1.0})");
    return t;
}

bool nullable(const std::string& path) {
    return path == "needle" || path == "ring" || path == "plate" || path == "optics.window";
}

// Documented unit of a leaf, with array indices stripped.
std::string unit_of(const std::string& path) {
    static const std::map<std::string, std::string> units = {
        {"mirror.radius_of_curvature", "mm"}, {"mirror.aperture_diameter", "mm"},
        {"mirror.vertex_hole_diameter", "mm"}, {"mirror.substrate_thickness", "mm"},
        {"needle.shaft_diameter", "mm"},       {"needle.taper_half_angle", "deg"},
        {"needle.tip_z", "mm"},                {"needle.travel_range", "mm"},
        {"ring.inner_radius", "mm"},           {"ring.outer_radius", "mm"},
        {"ring.height_z", "mm"},               {"ring.thickness", "mm"},
        {"plate.height_z", "mm"},              {"plate.aperture_radius", "mm"},
        {"plate.thickness", "mm"},             {"chamber.radius", "mm"},
        {"segments.z_min", "mm"},              {"segments.z_max", "mm"},
        {"segments.role", "V"},                {"roles.mirror", "V"},
        {"roles.needle", "V"},                 {"roles.ring", "V"},
        {"roles.plate", "V"},                  {"roles.chamber", "V"},
        {"drive.amplitude", "V"},              {"drive.frequency", "MHz"},
        {"ion.z", "mm"},                       {"grid.spacing", "mm"},
        {"grid.r_max", "mm"},                  {"grid.z_min", "mm"},
        {"grid.z_max", "mm"},                  {"optics.window.z", "mm"},
        {"optics.window.thickness", "mm"},     {"optics.window.r_max", "mm"},
        {"optics.best_focus_lo", "mm"},        {"optics.best_focus_hi", "mm"},
        {"optics.spot_radius", "mm"},          {"corrector.front_face_z", "mm"},
        {"corrector.center_thickness", "mm"},  {"corrector.max_emission_angle", "deg"},
        {"corrector.export_pitch", "mm"},      {"crystal.axial_frequency", "kHz"},
        {"crystal.radial_frequency", "kHz"},   {"scan.tip_min", "mm"},
        {"scan.tip_max", "mm"},                {"scan.central_span", "mm"},
    };
    std::string key;
    std::stringstream ss(path);
    for (std::string part; std::getline(ss, part, '.');) {
        if (!part.empty() && std::all_of(part.begin(), part.end(), ::isdigit)) continue;
        key += key.empty() ? part : "." + part;
    }
    const auto it = units.find(key);
    return it == units.end() ? "" : it->second;
}

struct UnitFactor {
    std::string family;
    double factor;
};

std::optional<UnitFactor> unit_factor(const std::string& u) {
    static const std::map<std::string, UnitFactor> table = {
        {"m", {"length", 1.0}},   {"cm", {"length", 1e-2}},  {"mm", {"length", 1e-3}},
        {"um", {"length", 1e-6}}, {"nm", {"length", 1e-9}},  {"deg", {"angle", c::deg}},
        {"rad", {"angle", 1.0}},  {"V", {"voltage", 1.0}},   {"mV", {"voltage", 1e-3}},
        {"kV", {"voltage", 1e3}}, {"Hz", {"frequency", 1.0}}, {"kHz", {"frequency", 1e3}},
        {"MHz", {"frequency", 1e6}}, {"GHz", {"frequency", 1e9}},
    };
    const auto it = table.find(u);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

void merge_strict(json& base, const json& in, const std::string& path);

void merge_array(json& base, const json& in, const std::string& path, const json* element_template) {
    if (!in.is_array()) fail(ErrorCode::ConfigError, fmt::format("'{}' must be a list", path));
    if (!element_template) {
        if (in.size() != base.size())
            fail(ErrorCode::ConfigError, fmt::format("'{}' must have {} entries", path, base.size()));
        base = in;
        return;
    }
    json out = json::array();
    for (std::size_t k = 0; k < in.size(); ++k) {
        json e = *element_template;
        merge_strict(e, in[k], fmt::format("{}.{}", path, k));
        out.push_back(e);
    }
    base = out;
}

void merge_strict(json& base, const json& in, const std::string& path) {
    if (in.is_null()) {
        if (!nullable(path)) fail(ErrorCode::ConfigError, fmt::format("'{}' cannot be null", path));
        base = nullptr;
        return;
    }
    if (base.is_array()) {
        const json* tmpl = path == "segments" ? &segment_template()
                           : path == "collection.loss_chain" ? &loss_template()
                                                             : nullptr;
        merge_array(base, in, path, tmpl);
        return;
    }
    if (base.is_object() || (base.is_null() && nullable(path))) {
        if (!in.is_object()) fail(ErrorCode::ConfigError, fmt::format("'{}' must be a section", path));
        // A re-enabled optional section starts from its defaults.
        if (base.is_null()) {
            json d = default_json();
            std::stringstream ss(path);
            for (std::string part; std::getline(ss, part, '.');) d = d[part];
            base = d;
        }
        for (auto it = in.begin(); it != in.end(); ++it) {
            const std::string sub = path.empty() ? it.key() : path + "." + it.key();
            if (!base.contains(it.key())) fail(ErrorCode::ConfigError, fmt::format("unknown key '{}'", sub));
            merge_strict(base[it.key()], it.value(), sub);
        }
        return;
    }
    // Leaf: roles may switch between a name and a DC bias.
    const bool role = path.rfind("roles.", 0) == 0 || (path.rfind("segments.", 0) == 0 && path.size() > 5 &&
                                                       path.substr(path.size() - 5) == ".role");
    if (role) {
        if (!(in.is_string() || in.is_number()))
            fail(ErrorCode::ConfigError, fmt::format("'{}' must be \"rf\", \"ground\" or a DC bias in volts", path));
    } else if (base.is_number() != in.is_number() || base.is_string() != in.is_string() ||
               base.is_boolean() != in.is_boolean()) {
        fail(ErrorCode::ConfigError, fmt::format("'{}' has the wrong type", path));
    }
    base = in;
}

void collect_paths(const json& j, const std::string& path, std::vector<std::string>& out) {
    if (!path.empty()) out.push_back(path);
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            collect_paths(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t k = 0; k < j.size(); ++k) collect_paths(j[k], fmt::format("{}.{}", path, k), out);
    }
}

std::string underscored(std::string s) {
    std::replace(s.begin(), s.end(), '.', '_');
    return s;
}

std::string resolve_key(const json& doc, const std::string& key) {
    std::vector<std::string> paths;
    collect_paths(doc, "", paths);
    if (std::find(paths.begin(), paths.end(), key) != paths.end()) return key;
    std::vector<std::string> hits;
    const std::string k = underscored(key);
    for (const auto& p : paths) {
        const std::string u = underscored(p);
        if (u == k || (u.size() > k.size() && u.compare(u.size() - k.size(), k.size(), k) == 0 &&
                       u[u.size() - k.size() - 1] == '_'))
            hits.push_back(p);
    }
    // Prefer leaves whose last path segment matches whole.
    if (hits.size() > 1) {
        std::vector<std::string> exact;
        for (const auto& h : hits)
            if (underscored(h) == k) exact.push_back(h);
        if (exact.size() == 1) return exact.front();
    }
    if (hits.empty()) fail(ErrorCode::ConfigError, fmt::format("unknown override key '{}'", key));
    if (hits.size() > 1)
        fail(ErrorCode::ConfigError, fmt::format("override key '{}' is ambiguous ({} and {})", key, hits[0], hits[1]));
    return hits.front();
}

json parse_value(const std::string& text, const std::string& path) {
    static const std::regex with_unit(R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]+)\s*$)");
    std::smatch m;
    if (std::regex_match(text, m, with_unit)) {
        const auto given = unit_factor(m[2].str());
        if (!given) fail(ErrorCode::ConfigError, fmt::format("unknown unit '{}' in override of '{}'", m[2].str(), path));
        const std::string target_name = unit_of(path);
        const auto target = unit_factor(target_name);
        if (!target || target->family != given->family)
            fail(ErrorCode::ConfigError,
                 fmt::format("'{}' takes {} but the override is in {}", path,
                             target_name.empty() ? "a plain number" : target_name, m[2].str()));
        return std::stod(m[1].str()) * given->factor / target->factor;
    }
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

geometry::ElectrodeRole role_from(const json& j, const std::string& path) {
    if (j.is_number()) return geometry::ElectrodeRole::dc(j.get<double>());
    const auto s = j.get<std::string>();
    if (s == "rf") return geometry::ElectrodeRole::rf();
    if (s == "ground") return geometry::ElectrodeRole::ground();
    fail(ErrorCode::ConfigError, fmt::format("'{}' must be \"rf\", \"ground\" or a DC bias in volts", path));
}

RunConfig build(const json& d) {
    RunConfig rc;
    const double mm = c::mm;
    auto num = [](const json& s, const char* k) { return s.at(k).get<double>(); };

    const auto& m = d.at("mirror");
    auto& mirror = rc.geometry.mirror;
    mirror.radius_of_curvature = num(m, "radius_of_curvature") * mm;
    mirror.aperture_diameter = num(m, "aperture_diameter") * mm;
    mirror.vertex_hole_diameter = num(m, "vertex_hole_diameter") * mm;
    mirror.conic_constant = num(m, "conic_constant");
    mirror.reflectivity = num(m, "reflectivity");
    mirror.substrate_thickness = num(m, "substrate_thickness") * mm;
    const auto kind = m.at("kind").get<std::string>();
    if (kind == "sphere") mirror.kind = geometry::ConicKind::Sphere;
    else if (kind == "paraboloid") mirror.kind = geometry::ConicKind::Paraboloid;
    else if (kind == "ellipsoid") mirror.kind = geometry::ConicKind::Ellipsoid;
    else fail(ErrorCode::ConfigError, fmt::format("mirror.kind '{}' is not sphere, paraboloid or ellipsoid", kind));

    rc.geometry.needle.reset();
    if (!d.at("needle").is_null()) {
        const auto& n = d.at("needle");
        geometry::NeedleSpec s;
        s.shaft_diameter = num(n, "shaft_diameter") * mm;
        s.taper_half_angle = num(n, "taper_half_angle") * c::deg;
        s.tip_z = num(n, "tip_z") * mm;
        s.travel_range = num(n, "travel_range") * mm;
        rc.geometry.needle = s;
    }
    rc.geometry.ring.reset();
    if (!d.at("ring").is_null()) {
        const auto& r = d.at("ring");
        rc.geometry.ring = geometry::RingSpec{num(r, "inner_radius") * mm, num(r, "outer_radius") * mm,
                                              num(r, "height_z") * mm, num(r, "thickness") * mm};
    }
    rc.geometry.plate.reset();
    if (!d.at("plate").is_null()) {
        const auto& p = d.at("plate");
        rc.geometry.plate =
            geometry::PlateSpec{num(p, "height_z") * mm, num(p, "aperture_radius") * mm, num(p, "thickness") * mm};
    }
    rc.geometry.chamber_radius = num(d.at("chamber"), "radius") * mm;
    rc.geometry.roles.clear();
    for (auto it = d.at("roles").begin(); it != d.at("roles").end(); ++it)
        rc.geometry.roles[it.key()] = role_from(it.value(), "roles." + it.key());
    for (std::size_t k = 0; k < d.at("segments").size(); ++k) {
        const auto& s = d.at("segments")[k];
        rc.geometry.mirror_segments.push_back(
            {num(s, "z_min") * mm, num(s, "z_max") * mm, role_from(s.at("role"), fmt::format("segments.{}.role", k))});
    }
    rc.geometry.validate();

    const auto& g = d.at("grid");
    rc.grid.spacing = num(g, "spacing") * mm;
    rc.grid.r_max = num(g, "r_max") * mm;
    rc.grid.z_min = num(g, "z_min") * mm;
    rc.grid.z_max = num(g, "z_max") * mm;
    if (!(rc.grid.spacing > 0.0 && rc.grid.r_max > rc.grid.spacing && rc.grid.z_max > rc.grid.z_min))
        fail(ErrorCode::ConfigError, "grid needs positive spacing and a non-empty box");

    const auto& sv = d.at("solver");
    rc.solver.tolerance = num(sv, "tolerance");
    rc.solver.max_iterations = sv.at("max_iterations").get<int>();
    rc.solver.multilevel = sv.at("multilevel").get<bool>();
    if (!(rc.solver.tolerance > 0.0) || rc.solver.max_iterations < 1)
        fail(ErrorCode::ConfigError, "solver tolerance and iteration cap must be positive");

    rc.drive.amplitude = num(d.at("drive"), "amplitude");
    rc.drive.frequency = num(d.at("drive"), "frequency") * 1e6;
    rc.drive.validate();

    const auto& ion = d.at("ion");
    rc.ion.mass = num(ion, "mass") * c::atomic_mass_unit;
    rc.ion.charge = num(ion, "charge") * c::elementary_charge;
    rc.ion.validate();
    rc.ion_z = num(ion, "z") * mm;

    const auto& o = d.at("optics");
    rc.optics.window.reset();
    if (!o.at("window").is_null()) {
        const auto& w = o.at("window");
        rc.optics.window = rays::PlaneWindow{num(w, "z") * mm, num(w, "thickness") * mm, num(w, "n"), num(w, "r_max") * mm};
        if (!(rc.optics.window->thickness > 0.0 && rc.optics.window->n >= 1.0))
            fail(ErrorCode::ConfigError, "window needs positive thickness and index >= 1");
    }
    rc.optics.n_rays = o.at("n_rays").get<int>();
    rc.optics.best_focus_lo = num(o, "best_focus_lo") * mm;
    rc.optics.best_focus_hi = num(o, "best_focus_hi") * mm;
    rc.optics.spot_radius = num(o, "spot_radius") * mm;
    if (rc.optics.n_rays < 1 || !(rc.optics.best_focus_hi > rc.optics.best_focus_lo) || !(rc.optics.spot_radius > 0))
        fail(ErrorCode::ConfigError, "optics needs rays, a focus search range and a positive spot radius");

    const auto& cr = d.at("corrector");
    auto& cs = rc.corrector;
    cs.source_z = rc.ion_z;
    cs.mirror = mirror;
    cs.window = rc.optics.window;
    cs.front_face_z = num(cr, "front_face_z") * mm;
    cs.center_thickness = num(cr, "center_thickness") * mm;
    cs.material_index = num(cr, "material_index");
    cs.design_ray_count = cr.at("design_ray_count").get<int>();
    const auto face = cr.at("aspheric_face").get<std::string>();
    if (face == "rear") cs.aspheric_face = corrector::AsphericFace::Rear;
    else if (face == "front") cs.aspheric_face = corrector::AsphericFace::Front;
    else fail(ErrorCode::ConfigError, fmt::format("corrector.aspheric_face '{}' is not rear or front", face));
    cs.max_emission_angle = num(cr, "max_emission_angle") * c::deg;
    cs.fit_degree = cr.at("fit_degree").get<int>();
    cs.validate();
    rc.verify.objective_na = num(cr, "objective_na");
    rc.verify.n_rays = cr.at("verify_rays").get<int>();
    rc.export_pitch = num(cr, "export_pitch") * mm;
    if (!(rc.verify.objective_na > 0 && rc.verify.objective_na < 1) || rc.verify.n_rays < 1 || !(rc.export_pitch > 0))
        fail(ErrorCode::ConfigError, "corrector needs 0 < objective_na < 1, verify rays and a positive pitch");

    const auto& co = d.at("collection");
    const auto emission = co.at("emission").get<std::string>();
    if (emission == "isotropic") {
        rc.collection.emission = collect::EmissionModel::isotropic();
    } else if (emission == "dipole") {
        const auto& a = co.at("dipole_axis");
        const Vec3 axis{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
        if (!(axis.norm() > 0.0)) fail(ErrorCode::ConfigError, "dipole axis must be nonzero");
        rc.collection.emission = collect::EmissionModel::dipole(axis / axis.norm());
    } else {
        fail(ErrorCode::ConfigError, fmt::format("collection.emission '{}' is not isotropic or dipole", emission));
    }
    rc.collection.needle_occlusion = co.at("needle_occlusion").get<bool>();
    rc.collection.monte_carlo_samples = co.at("monte_carlo_samples").get<long>();
    rc.collection.n_excitations = num(co, "n_excitations");
    rc.collection.curve_points = co.at("curve_points").get<int>();
    rc.collection.loss_chain.clear();
    for (const auto& e : co.at("loss_chain")) {
        rc.collection.loss_chain.push_back({e.at("name").get<std::string>(), num(e, "transmittance")});
        if (!(rc.collection.loss_chain.back().transmittance >= 0 && rc.collection.loss_chain.back().transmittance <= 1))
            fail(ErrorCode::ConfigError, fmt::format("transmittance of '{}' must lie in [0, 1]", e.at("name").get<std::string>()));
    }
    if (rc.collection.monte_carlo_samples != 0 && rc.collection.monte_carlo_samples < 10000)
        fail(ErrorCode::ConfigError, "Monte Carlo mode needs at least 1e4 samples");
    if (rc.collection.curve_points < 2) fail(ErrorCode::ConfigError, "collection.curve_points must be >= 2");

    const auto& cy = d.at("crystal");
    rc.crystal.n_ions = cy.at("n_ions").get<int>();
    const auto trap = cy.at("trap").get<std::string>();
    if (trap != "harmonic" && trap != "field")
        fail(ErrorCode::ConfigError, fmt::format("crystal.trap '{}' is not harmonic or field", trap));
    rc.crystal.use_field = trap == "field";
    rc.crystal.axial_frequency = num(cy, "axial_frequency") * 1e3;
    rc.crystal.radial_frequency = num(cy, "radial_frequency") * 1e3;
    rc.crystal.restarts = cy.at("restarts").get<int>();
    rc.crystal.max_iterations = cy.at("max_iterations").get<int>();
    if (rc.crystal.n_ions < 1 || rc.crystal.restarts < 1 || !(rc.crystal.axial_frequency > 0) ||
        !(rc.crystal.radial_frequency > 0))
        fail(ErrorCode::ConfigError, "crystal needs n_ions >= 1, restarts >= 1 and positive frequencies");

    const auto& sc = d.at("scan");
    rc.scan.tip_min = num(sc, "tip_min") * mm;
    rc.scan.tip_max = num(sc, "tip_max") * mm;
    rc.scan.points = sc.at("points").get<int>();
    rc.scan.central_span = num(sc, "central_span") * mm;
    if (rc.scan.points < 2 || !(rc.scan.tip_max > rc.scan.tip_min) || !(rc.scan.central_span > 0))
        fail(ErrorCode::ConfigError, "scan needs >= 2 points over a non-empty range");

    rc.output.directory = d.at("output").at("directory").get<std::string>();
    rc.output.format = d.at("output").at("format").get<std::string>();
    if (rc.output.format != "csv" && rc.output.format != "svg" && rc.output.format != "both")
        fail(ErrorCode::ConfigError, "output.format must be csv, svg or both");
    rc.seed = d.at("seed").get<std::uint64_t>();
    rc.resolved = d;
    return rc;
}

} // namespace

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        fail(ErrorCode::ConfigError, fmt::format("override '{}' is not key=value", assignment));
    const std::string path = resolve_key(doc, assignment.substr(0, eq));
    const json value = parse_value(assignment.substr(eq + 1), path);
    json patch = value;
    std::vector<std::string> parts;
    std::stringstream ss(path);
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    // Walk to the parent and merge the leaf with the same strict rules as the file.
    json* node = &doc;
    for (std::size_t k = 0; k + 1 < parts.size(); ++k)
        node = node->is_array() ? &(*node)[std::stoul(parts[k])] : &(*node)[parts[k]];
    json& target = node->is_array() ? (*node)[std::stoul(parts.back())] : (*node)[parts.back()];
    merge_strict(target, patch, path);
}

RunConfig parse(const json& file, const std::vector<std::string>& overrides) {
    try {
        if (!file.is_object()) fail(ErrorCode::ConfigError, "configuration must be a JSON object");
        if (!file.contains("mirror")) fail(ErrorCode::ConfigError, "configuration has no mirror section");
        json doc = default_json();
        merge_strict(doc, file, "");
        for (const auto& o : overrides) apply_override(doc, o);
        return build(doc);
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, fmt::format("malformed configuration: {}", e.what()));
    }
}

RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, fmt::format("cannot open configuration '{}'", path.string()));
    json file;
    try {
        file = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return parse(file, overrides);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

// Where and in which format artifacts land does not change the result.
std::string RunConfig::hash() const {
    auto doc = resolved;
    doc.erase("output");
    return fmt::format("{:016x}", fnv1a(doc.dump()));
}

std::vector<double> RunConfig::scan_tips() const {
    std::vector<double> t(scan.points);
    for (int k = 0; k < scan.points; ++k) t[k] = scan.tip_min + (scan.tip_max - scan.tip_min) * k / (scan.points - 1);
    return t;
}

} // namespace tack::config
