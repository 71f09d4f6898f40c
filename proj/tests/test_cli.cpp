#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "ram/formats.hpp"
#include "ram/image.hpp"
#include "ram/memory.hpp"
#include "ram/pipeline.hpp"
#include "test_util.hpp"

using namespace ram;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(const std::string& args, const test::TempDir& scratch) {
    const fs::path out = scratch / "stdout.txt";
    const fs::path err = scratch / "stderr.txt";
    const std::string cmd = std::string(RAM_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = test::slurp(out);
    r.err = test::slurp(err);
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small fixture written through the CLI itself.
struct CliFixture {
    test::TempDir dir{"cli"};
    CliFixture() {
        const Run r = run("synth fixture --out " + q(dir.path()) + " --entries 6 --fixture-grid 32 --size 128", dir);
        REQUIRE(r.code == 0);
    }
    std::string query() const {
        return "--scene " + q(dir / "scene.json") + " --memory " + q(dir / "memory") + " --instruction " +
               q(dir / "instruction.emb") + " --object " + q(dir / "object.emb");
    }
};

}  // namespace

TEST_CASE("usage errors exit 64") {
    test::TempDir t("cli-usage");
    CHECK(run("bogus", t).code == 64);
    CHECK(run("", t).code == 64);
    CHECK(run("retrieve --scene x", t).code == 64);
    CHECK(run("--help", t).code == 0);
}

TEST_CASE("custom ingestion appends an entry with relative paths") {
    CliFixture f;
    const fs::path mem = f.dir / "mine";
    const std::string common = " --memory " + q(mem) + " --image " + q(f.dir / "scene/image.png") +
                               " --task 'open the drawer' --object drawer --task-embedding " + q(f.dir / "instruction.emb") +
                               " --image-embedding " + q(f.dir / "scene/embedding.emb") + " --features " +
                               q(f.dir / "scene/features.dfm");
    const Run r = run("ingest custom --id c1 --start 40,50 --end 80,60 --points 6" + common, f.dir);
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out) == json{{"id", "c1"}, {"entries", 1}});

    const AffordanceMemory m = load_memory(mem / "memory.json");
    REQUIRE(m.entries().size() == 1);
    const AffordanceEntry& e = m.entries()[0];
    CHECK(e.waypoints.size() == 6);
    CHECK(e.waypoints.front() == Eigen::Vector2d(40, 50));
    CHECK(e.waypoints.back() == Eigen::Vector2d(80, 60));
    CHECK(e.featureMapPath.is_relative());
    CHECK(e.imagePath.is_relative());
    CHECK(e.imageWidth == 128);

    SUBCASE("duplicate id is rejected") {
        const Run d = run("ingest custom --id c1 --start 40,50 --end 80,60" + common, f.dir);
        CHECK(d.code == 2);
        CHECK(json::parse(d.err)["error"] == "DuplicateId");
    }
    SUBCASE("missing asset names the file") {
        const fs::path missing = f.dir / "nowhere.dfm";
        const std::string bad = " --memory " + q(mem) + " --image " + q(f.dir / "scene/image.png") +
                                " --task t --object o --task-embedding " + q(f.dir / "instruction.emb") +
                                " --image-embedding " + q(f.dir / "scene/embedding.emb") + " --features " + q(missing);
        const Run d = run("ingest custom --id c2 --start 1,1 --end 9,9" + bad, f.dir);
        CHECK(d.code == 2);
        const json err = json::parse(d.err);
        CHECK(err["error"] == "MissingAsset");
        CHECK(err["path"] == missing.string());
        CHECK(load_memory(mem / "memory.json").entries().size() == 1);
    }
}

TEST_CASE("robotic ingestion projects the end-effector track") {
    CliFixture f;
    json traj{{"timestamps", json::array()}, {"positions", json::array()}, {"gripper_closed", json::array()}};
    for (int i = 0; i < 15; ++i) {
        traj["timestamps"].push_back(0.1 * i);
        traj["positions"].push_back({-0.1 + 0.01 * std::max(0, i - 2), 0.0, 1.0});
        traj["gripper_closed"].push_back(i >= 2);
    }
    test::spit(f.dir / "traj.json", traj.dump());
    const Run r = run("ingest robotic --memory " + q(f.dir / "robot") + " --id r1 --image " + q(f.dir / "scene/image.png") +
                          " --task 'open the drawer' --object drawer --task-embedding " + q(f.dir / "instruction.emb") +
                          " --image-embedding " + q(f.dir / "scene/embedding.emb") + " --features " +
                          q(f.dir / "scene/features.dfm") + " --trajectory " + q(f.dir / "traj.json") + " --intrinsics " +
                          q(f.dir / "scene/intrinsics.json"),
                      f.dir);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const AffordanceMemory m = load_memory(f.dir.path() / "robot" / "memory.json");
    const AffordanceEntry& e = m.entries().at(0);
    const CameraIntrinsics K = load_intrinsics(f.dir / "scene/intrinsics.json");
    CHECK(e.waypoints.front().x() == doctest::Approx(K.fx * -0.1 + K.cx));
    CHECK(e.waypoints.front().y() == doctest::Approx(K.cy));
    CHECK(e.waypoints.size() >= 2);
    for (std::size_t i = 1; i < e.waypoints.size(); ++i) CHECK(e.waypoints[i].x() > e.waypoints[i - 1].x());
}

TEST_CASE("retrieve reports a non-increasing stage trace") {
    CliFixture f;
    const Run r = run("retrieve " + f.query(), f.dir);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const json j = json::parse(r.out);
    const auto& t = j["stage_trace"];
    CHECK(t["memory"].get<int>() == 6);
    CHECK(t["memory"] >= t["task"]);
    CHECK(t["task"] >= t["semantic"]);
    CHECK(t["semantic"] >= t["geometric"]);
    CHECK(t["geometric"] == 1);
    CHECK(j["entry_id"] == "demo-000");
}

TEST_CASE("stage failures map to exit codes") {
    CliFixture f;
    fs::create_directories(f.dir / "empty");
    save_memory(AffordanceMemory(f.dir / "empty"), f.dir / "empty" / "memory.json");
    const Run r = run("retrieve --scene " + q(f.dir / "scene.json") + " --memory " + q(f.dir / "empty") + " --instruction " +
                          q(f.dir / "instruction.emb") + " --object " + q(f.dir / "object.emb"),
                      f.dir);
    CHECK(r.code == 3);
    CHECK(json::parse(r.err)["error"] == "EmptyMemory");

    const Run t = run("transfer --scene " + q(f.dir / "scene.json") + " --memory " + q(f.dir / "memory") + " --entry nobody", f.dir);
    CHECK(t.code != 0);

    Affordance2D a;
    a.contact = {127, 0};
    a.matched = {{{127, 0}, 1.0}, {{120, 0}, 1.0}};
    a.inliers = {true, true};
    test::spit(f.dir / "corner.json", to_json(a).dump());
    DepthImage holes(128, 128, 0.0f);
    save_depth(holes, f.dir / "scene" / "depth.dpt");
    const Run l = run("lift --scene " + q(f.dir / "scene.json") + " --affordance " + q(f.dir / "corner.json"), f.dir);
    CHECK(l.code == 5);
    CHECK(json::parse(l.err)["stage"] == "lift:contact");
}

TEST_CASE("infer is byte-identical across runs") {
    CliFixture f;
    const Run a = run("infer " + f.query() + " --grasps " + q(f.dir / "grasps.json") + " --out " + q(f.dir / "a"), f.dir);
    const Run b = run("infer " + f.query() + " --grasps " + q(f.dir / "grasps.json") + " --out " + q(f.dir / "b"), f.dir);
    REQUIRE_MESSAGE(a.code == 0, a.err);
    REQUIRE(b.code == 0);
    for (const char* file : {"affordance.json", "retrieval.json", "overlay.png"}) {
        const std::string x = test::slurp(f.dir / (std::string("a/") + file));
        CHECK_MESSAGE(!x.empty(), file);
        CHECK_MESSAGE(x == test::slurp(f.dir / (std::string("b/") + file)), file);
    }
    CHECK(json::parse(a.out) == json::parse(test::slurp(f.dir / "a/affordance.json")));
}

TEST_CASE("visualize matches the stored overlay") {
    CliFixture f;
    Affordance2D a;
    a.contact = {30, 40};
    a.direction = UnitVec2::normalize(Eigen::Vector2d(1, 0.5));
    a.matched = {{{30, 40}, 0.9}, {{50, 50}, 0.8}, {{70, 60}, 0.7}, {{60, 20}, 0.2}};
    a.inliers = {true, true, true, false};
    test::spit(f.dir / "aff.json", to_json(a).dump());
    const Run r = run("visualize --image " + q(f.dir / "memory/images/demo.png") + " --affordance " + q(f.dir / "aff.json") +
                          " --out " + q(f.dir / "vis.png"),
                      f.dir);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const fs::path golden = fs::path(RAM_TEST_DATA) / "visualize_golden.png";
    REQUIRE(fs::exists(golden));
    CHECK(read_png(f.dir / "vis.png") == read_png(golden));
}

TEST_CASE("config init writes the defaults") {
    test::TempDir t("cli-config");
    const Run r = run("config init", t);
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out) == to_json(PipelineConfig{}));
    REQUIRE(run("config init --out " + q(t / "c.json"), t).code == 0);
    CHECK(json::parse(test::slurp(t / "c.json")) == to_json(PipelineConfig{}));

    json bad = to_json(PipelineConfig{});
    bad["lift"]["colour"] = 1;
    test::spit(t / "bad.json", bad.dump());
    const Run b = run("retrieve --scene a --memory b --instruction c --object d --config " + q(t / "bad.json"), t);
    CHECK(b.code == 2);
}
