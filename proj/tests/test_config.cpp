#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "tack/config.hpp"

using namespace tack;
using namespace tack::config;
using testing::code_of;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("defaults round-trip through the shipped files") {
    const auto rc = load(std::filesystem::path(TACK_SOURCE_DIR) / "configs/default.json");
    CHECK(rc.hash() == parse(default_json()).hash());
    CHECK(rc.ion_z == doctest::Approx(2.25e-3));
    CHECK(rc.drive.frequency == doctest::Approx(23e6));
    CHECK(rc.geometry.needle->taper_half_angle == doctest::Approx(22.0 * M_PI / 180));
    CHECK(rc.crystal.axial_frequency == doctest::Approx(420e3));

    const auto seg = load(std::filesystem::path(TACK_SOURCE_DIR) / "configs/segmented.json");
    CHECK(seg.hash() == parse(segmented_json()).hash());
    CHECK_FALSE(seg.geometry.needle.has_value());
    CHECK(seg.geometry.mirror_segments.size() == 3);
}

TEST_CASE("strict keys and types") {
    auto doc = default_json();
    doc["mirror"]["radius"] = 4.0;
    CHECK(code_of([&] { parse(doc); }) == ErrorCode::ConfigError);
    doc = default_json();
    doc["drive"]["amplitude"] = "high";
    CHECK(code_of([&] { parse(doc); }) == ErrorCode::ConfigError);
    doc = default_json();
    doc.erase("mirror");
    CHECK(code_of([&] { parse(doc); }) == ErrorCode::ConfigError);
    doc = default_json();
    doc["drive"]["frequency"] = -23.0;
    CHECK(code_of([&] { parse(doc); }) == ErrorCode::ConfigError);
    doc = default_json();
    doc["mirror"] = nullptr;
    CHECK(code_of([&] { parse(doc); }) == ErrorCode::ConfigError);
}

TEST_CASE("partial files inherit defaults") {
    const auto rc = parse(json{{"mirror", {{"radius_of_curvature", 5.0}}}});
    CHECK(rc.geometry.mirror.radius_of_curvature == doctest::Approx(5e-3));
    CHECK(rc.geometry.mirror.aperture_diameter == doctest::Approx(6e-3));
    CHECK(rc.geometry.needle.has_value());

    const auto bare = parse(json{{"mirror", json::object()}, {"needle", nullptr}, {"ring", nullptr}});
    CHECK_FALSE(bare.geometry.needle.has_value());
    CHECK_FALSE(bare.geometry.ring.has_value());
    CHECK(bare.geometry.plate.has_value());
}

TEST_CASE("overrides with units") {
    const auto base = default_json();
    CHECK(parse(base, {"ion_z=2.0mm"}).ion_z == doctest::Approx(2.0e-3));
    CHECK(parse(base, {"ion.z=2000um"}).ion_z == doctest::Approx(2.0e-3));
    CHECK(parse(base, {"drive.frequency=20MHz"}).drive.frequency == doctest::Approx(20e6));
    CHECK(parse(base, {"drive.frequency=20000kHz"}).drive.frequency == doctest::Approx(20e6));
    CHECK(parse(base, {"needle.taper_half_angle=30deg"}).geometry.needle->taper_half_angle ==
          doctest::Approx(30 * M_PI / 180));
    CHECK(parse(base, {"collection.emission=isotropic"}).collection.emission.kind ==
          collect::EmissionModel::Kind::Isotropic);
    CHECK(parse(base, {"needle=null"}).geometry.needle == std::nullopt);

    CHECK(code_of([&] { parse(base, {"ion_z=2.0MHz"}); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { parse(base, {"thickness=1mm"}); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { parse(base, {"no_such_key=1"}); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { parse(base, {"ion_z"}); }) == ErrorCode::ConfigError);
}

TEST_CASE("an override equals the same edit in the file") {
    auto edited = default_json();
    edited["drive"]["amplitude"] = 300.0;
    edited["ion"]["z"] = 2.0;
    const auto a = parse(edited);
    const auto b = parse(default_json(), {"drive.amplitude=300V", "ion_z=2mm"});
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != parse(default_json()).hash());
}

TEST_CASE("roles and segments") {
    auto doc = default_json();
    doc["roles"]["ring"] = 5.0;
    const auto rc = parse(doc);
    CHECK(rc.geometry.role_of("ring") == geometry::ElectrodeRole::dc(5.0));
    doc["roles"]["ring"] = "floating";
    CHECK(code_of([&] { parse(doc); }) == ErrorCode::ConfigError);
}

TEST_CASE("scan positions") {
    const auto rc = parse(default_json());
    const auto tips = rc.scan_tips();
    REQUIRE(tips.size() == 8);
    CHECK(tips.front() == doctest::Approx(1.45e-3));
    CHECK(tips.back() == doctest::Approx(2.95e-3));
}

TEST_CASE("file errors") {
    CHECK(code_of([] { load("/nonexistent/tack.json"); }) == ErrorCode::IoError);
    const auto p = std::filesystem::temp_directory_path() / "tack_bad.json";
    std::ofstream(p) << "{ not json";
    CHECK(code_of([&] { load(p); }) == ErrorCode::ConfigError);
    std::filesystem::remove(p);
}

TEST_CASE("hash is stable and sensitive") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(parse(default_json()).hash() == parse(default_json()).hash());
    CHECK(parse(default_json(), {"output.format=csv"}).hash() == parse(default_json()).hash());
    CHECK(parse(default_json(), {"seed=2"}).hash() != parse(default_json()).hash());
}

}
