#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "common.hpp"
#include "tidecast/error.hpp"
#include "tidecast/pipeline.hpp"

using namespace tidecast;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
    PipelineConfig c = PipelineConfig::desk_default();
    for (auto& s : c.simulate) s.count = 2;
    c.model.n_layers = 1;
    c.model.d_model = 16;
    c.model.n_heads = 2;
    c.model.d_ff = 16;
    c.model.n_experts = 2;
    c.model.context_patches = 4;
    c.train.steps = 12;
    c.train.batch_size = 4;
    c.train.dro_every = 4;
    c.fusion.router.epochs = 20;
    c.coordination.config.steps = 20;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("config parsing") {
    const auto c = PipelineConfig::desk_default();
    CHECK_NOTHROW(c.validate());
    CHECK(c.simulate.size() == 3);
    const auto back = PipelineConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());

    auto j = c.to_json();
    j["bogus"] = 1;
    CHECK_THROWS_AS(PipelineConfig::from_json(j), UsageError);
    auto k = c.to_json();
    k["train"]["stepz"] = 3;
    CHECK_THROWS_AS(PipelineConfig::from_json(k), UsageError);

    const auto partial = PipelineConfig::from_json(nlohmann::json{{"seed", 9}});
    CHECK(partial.seed == 9);
    CHECK(partial.simulate.size() == 3);
}

TEST_CASE("inventory table") {
    const std::vector<InventoryRow> rows{{"real-world", 1, 3, 300}, {"mixup", 1, 2, 96}};
    const auto csv = inventory_csv(rows);
    CHECK(csv.substr(0, csv.find('\n')) == "provenance,datasets,entries,points");
    CHECK(csv.find("real-world,1,3,300") != std::string::npos);
}

TEST_CASE("pipeline runs are reproducible") {
    const auto root = fs::temp_directory_path() / "tidecast_pipeline_test";
    fs::remove_all(root);
    const auto cfg = small_config();
    const auto a = run_pipeline(cfg, root / "a");
    const auto b = run_pipeline(cfg, root / "b");
    for (const char* name : {"config.resolved.json", "inventory.csv", "weights.csv", "model.json", "pool.json", "profile.json",
                             "fusion.json", "coordination.json", "forecasts.json", "report.csv", "report.json", "run.log"}) {
        CAPTURE(name);
        REQUIRE(fs::exists(root / "a" / name));
        CHECK(slurp(root / "a" / name) == slurp(root / "b" / name));
    }
    REQUIRE(a.inventory.size() == 3);
    CHECK(a.inventory[0].provenance == "real-world");
    CHECK(a.inventory[0].datasets == 0);
    CHECK(a.inventory[1].datasets == 6);
    CHECK(a.inventory[2].datasets == 1);
    CHECK_FALSE(a.report.rows.empty());
    CHECK(report_csv(a.report) == report_csv(b.report));
    fs::remove_all(root);
}

TEST_CASE("stage failures name the stage") {
    const auto root = fs::temp_directory_path() / "tidecast_pipeline_fail";
    fs::remove_all(root);
    auto cfg = small_config();
    cfg.data_paths = {root / "nowhere"};
    try {
        run_pipeline(cfg, root / "run");
        FAIL("missing data accepted");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("stage 'ingest'") != std::string::npos);
        CHECK(msg.find("nowhere") != std::string::npos);
    }
    fs::remove_all(root);
}
