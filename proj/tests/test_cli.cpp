#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tack/cli.hpp"

namespace fs = std::filesystem;
using tack::cli::run;

namespace {

const std::string default_cfg = std::string(TACK_SOURCE_DIR) + "/configs/default.json";

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("tack_cli_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& f) const { return (path / f).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, double> table(const std::string& p) {
    std::map<std::string, double> t;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        t[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    return t;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("collect writes its artifacts and a manifest") {
    TempDir d("collect");
    REQUIRE(run({"collect", default_cfg, "--output-dir", d.path.string()}) == 0);
    CHECK(fs::exists(d / "collection.csv"));
    CHECK(fs::exists(d / "collection_curve.csv"));
    CHECK(fs::exists(d / "collection_curve.svg"));
    const auto m = nlohmann::json::parse(slurp(d / "manifest.json"));
    CHECK(m["subcommand"] == "collect");
    CHECK(m["files"].size() >= 3);
    CHECK(m.contains("config_hash"));
    CHECK(m.contains("wall_time_s"));

    TempDir csv("collect_csv");
    REQUIRE(run({"collect", default_cfg, "--output-dir", csv.path.string(), "--format", "csv"}) == 0);
    CHECK_FALSE(fs::exists(csv / "collection_curve.svg"));
}

TEST_CASE("identical inputs give byte-identical outputs") {
    TempDir a("det_a"), b("det_b");
    REQUIRE(run({"crystal", default_cfg, "--output-dir", a.path.string(), "--seed", "3"}) == 0);
    REQUIRE(run({"crystal", default_cfg, "--output-dir", b.path.string(), "--seed", "3"}) == 0);
    CHECK(slurp(a / "crystal.csv") == slurp(b / "crystal.csv"));
    CHECK_FALSE(slurp(a / "crystal.csv").empty());
}

TEST_CASE("override and file edit share a config hash") {
    TempDir a("hash_a"), b("hash_b");
    auto doc = nlohmann::json::parse(slurp(default_cfg));
    doc["ion"]["z"] = 2.0;
    const std::string edited = a / "edited.json";
    std::ofstream(edited) << doc.dump(2);
    REQUIRE(run({"budget", edited, "--output-dir", a.path.string()}) == 0);
    REQUIRE(run({"budget", default_cfg, "ion_z=2.0mm", "--output-dir", b.path.string()}) == 0);
    const auto ma = nlohmann::json::parse(slurp(a / "manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(b / "manifest.json"));
    CHECK(ma["config_hash"] == mb["config_hash"]);
    CHECK(slurp(a / "budget.csv") == slurp(b / "budget.csv"));
}

TEST_CASE("doubling the RF amplitude quadruples the depth") {
    TempDir a("rf1"), b("rf2");
    REQUIRE(run({"secular", default_cfg, "grid.spacing=0.02mm", "--output-dir", a.path.string()}) == 0);
    REQUIRE(run({"secular", default_cfg, "grid.spacing=0.02mm", "drive.amplitude=540V", "--output-dir",
                 b.path.string()}) == 0);
    const auto ta = table(a / "secular.csv"), tb = table(b / "secular.csv");
    CHECK(tb.at("depth_eV") == doctest::Approx(4 * ta.at("depth_eV")).epsilon(1e-6));
    CHECK(tb.at("minimum_z_mm") == doctest::Approx(ta.at("minimum_z_mm")).epsilon(1e-9));
}

TEST_CASE("exit codes") {
    TempDir d("codes");
    auto doc = nlohmann::json::parse(slurp(default_cfg));
    doc.erase("mirror");
    const std::string no_mirror = d / "no_mirror.json";
    std::ofstream(no_mirror) << doc.dump();
    CHECK(run({"collect", no_mirror, "--output-dir", d.path.string()}) == 2);
    CHECK(run({"secular", default_cfg, "drive.frequency=-23MHz", "--output-dir", d.path.string()}) == 2);
    CHECK(run({"collect", d / "missing.json", "--output-dir", d.path.string()}) == 4);
    CHECK(run({"frobnicate", default_cfg}) == 2);
    CHECK(run({"collect", default_cfg, "ion_z=1mm", "--output-dir", d.path.string()}) == 3);
    CHECK(run({"collect", default_cfg, "--format", "pdf"}) == 2);
}


TEST_CASE("collect from the focus reports 0.386") {
    TempDir d("focus");
    REQUIRE(run({"collect", default_cfg, "ion_z=2.0mm", "--output-dir", d.path.string()}) == 0);
    CHECK(table(d / "collection.csv").at("geometric_fraction") == doctest::Approx(0.386).epsilon(0.005 / 0.386));
}

TEST_CASE("pseudo-map rejects a negative frequency") {
    TempDir d("neg");
    CHECK(run({"pseudo-map", default_cfg, "drive.frequency=-23MHz", "--output-dir", d.path.string()}) == 2);
}

}
