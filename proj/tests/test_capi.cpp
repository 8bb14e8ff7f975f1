#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "sohcast.h"
#include "sohcast/dataset.hpp"
#include "sohcast/util.hpp"

namespace fs = std::filesystem;

namespace {

struct Ctx {
    sohcast_ctx* ptr;
    Ctx() : ptr(sohcast_ctx_new()) {}
    ~Ctx() { sohcast_ctx_free(ptr); }
};

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string write_fixture(const fs::path& dir) {
    sohcast::SyntheticConfig cfg;
    cfg.batteries = 2;
    cfg.cycles_per_battery = 24;
    cfg.base_samples = 10;
    sohcast::Rng rng(99);
    sohcast::BatteryDataset ds = sohcast::generate_synthetic(cfg, rng);
    const std::string path = (dir / "fixture.csv").string();
    sohcast::write_cycles_csv(ds, path);
    return path;
}

void set_fast_model(sohcast_ctx* ctx, const std::string& csv) {
    REQUIRE(sohcast_config_set(ctx, "data.csv", csv.c_str()) == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "model.epochs", "6") == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "model.batch_size", "8") == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "model.conv1_kernels", "3") == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "model.conv2_kernels", "2") == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "model.dense_units", "4") == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "model.mc_predict_samples", "16") == SOHCAST_OK);
    REQUIRE(sohcast_config_set(ctx, "run.workers", "1") == SOHCAST_OK);
}

}  // namespace

TEST_CASE("version string") {
    CHECK(std::strlen(sohcast_version()) >= 5);
}

TEST_CASE("config surface") {
    Ctx ctx;
    SUBCASE("set/get round trip") {
        CHECK(sohcast_config_set(ctx.ptr, "model.epochs", "42") == SOHCAST_OK);
        char buf[32];
        CHECK(sohcast_config_get(ctx.ptr, "model.epochs", buf, sizeof(buf)) == SOHCAST_OK);
        CHECK(std::string(buf) == "42");
    }
    SUBCASE("unknown key is a config error with a message") {
        CHECK(sohcast_config_set(ctx.ptr, "bogus", "1") == SOHCAST_ERR_CONFIG);
        CHECK(std::string(sohcast_last_error(ctx.ptr)).find("bogus") != std::string::npos);
    }
    SUBCASE("buffer too small is reported") {
        CHECK(sohcast_config_set(ctx.ptr, "data.csv", "a/very/long/path.csv") == SOHCAST_OK);
        char tiny[4];
        CHECK(sohcast_config_get(ctx.ptr, "data.csv", tiny, sizeof(tiny)) ==
              SOHCAST_ERR_CONFIG);
    }
    SUBCASE("save and load") {
        TempDir tmp("sohcast_capi_cfg");
        const std::string path = (tmp.path / "run.cfg").string();
        CHECK(sohcast_config_set(ctx.ptr, "run.seed", "31337") == SOHCAST_OK);
        CHECK(sohcast_config_save(ctx.ptr, path.c_str()) == SOHCAST_OK);
        Ctx other;
        CHECK(sohcast_config_load(other.ptr, path.c_str()) == SOHCAST_OK);
        char buf[32];
        CHECK(sohcast_config_get(other.ptr, "run.seed", buf, sizeof(buf)) == SOHCAST_OK);
        CHECK(std::string(buf) == "31337");
    }
    SUBCASE("missing config file") {
        CHECK(sohcast_config_load(ctx.ptr, "/no/such/file.cfg") == SOHCAST_ERR_CONFIG);
    }
}

TEST_CASE("pipeline through the C API") {
    TempDir tmp("sohcast_capi_pipeline");
    const std::string csv = write_fixture(tmp.path);
    Ctx ctx;
    set_fast_model(ctx.ptr, csv);

    const std::string run_dir = (tmp.path / "run").string();
    REQUIRE(sohcast_train(ctx.ptr, run_dir.c_str()) == SOHCAST_OK);
    CHECK(sohcast::file_exists(run_dir + "/models/pool.json"));

    SUBCASE("evaluate and report") {
        const std::string out = (tmp.path / "eval").string();
        REQUIRE(sohcast_evaluate(ctx.ptr, run_dir.c_str(), "S1", out.c_str()) == SOHCAST_OK);
        CHECK(sohcast::file_exists(out + "/reports.csv"));

        char* text = nullptr;
        REQUIRE(sohcast_report(ctx.ptr, out.c_str(), &text) == SOHCAST_OK);
        REQUIRE(text != nullptr);
        CHECK(std::string(text).find("stack-dist") != std::string::npos);
        sohcast_string_free(text);
    }
    SUBCASE("missing pool maps to its own code") {
        const std::string out = (tmp.path / "eval2").string();
        CHECK(sohcast_evaluate(ctx.ptr, (tmp.path / "void").string().c_str(), "S1",
                               out.c_str()) == SOHCAST_ERR_NO_POOL);
    }
    SUBCASE("bad data maps to the data code") {
        Ctx bad;
        set_fast_model(bad.ptr, csv);
        REQUIRE(sohcast_config_set(bad.ptr, "data.csv", "/no/file.csv") == SOHCAST_OK);
        CHECK(sohcast_train(bad.ptr, (tmp.path / "x").string().c_str()) == SOHCAST_ERR_DATA);
    }
    SUBCASE("training failure maps to the training code") {
        Ctx bad;
        set_fast_model(bad.ptr, csv);
        REQUIRE(sohcast_config_set(bad.ptr, "model.batch_size", "100000") == SOHCAST_OK);
        CHECK(sohcast_train(bad.ptr, (tmp.path / "y").string().c_str()) ==
              SOHCAST_ERR_TRAINING);
    }
    SUBCASE("noise sweep and forecast") {
        const std::string out = (tmp.path / "sweep").string();
        const double sigmas[] = {0.0, 0.1};
        REQUIRE(sohcast_noise_sweep(ctx.ptr, run_dir.c_str(), "S2", sigmas, 2,
                                    out.c_str()) == SOHCAST_OK);
        CHECK(sohcast::file_exists(out + "/noise_sweep.csv"));

        const std::string fout = (tmp.path / "fc").string();
        REQUIRE(sohcast_forecast(ctx.ptr, run_dir.c_str(), "S2", fout.c_str()) == SOHCAST_OK);
        CHECK(sohcast::file_exists(fout + "/forecast.csv"));
    }
    SUBCASE("corrupt manifest maps to the manifest code") {
        const std::string out = (tmp.path / "eval3").string();
        REQUIRE(sohcast_evaluate(ctx.ptr, run_dir.c_str(), "S2", out.c_str()) == SOHCAST_OK);
        sohcast::write_file_atomic(out + "/manifest.json", "{oops");
        char* text = nullptr;
        CHECK(sohcast_report(ctx.ptr, out.c_str(), &text) == SOHCAST_ERR_MANIFEST);
        CHECK(text == nullptr);
    }
}

TEST_CASE("null-safety") {
    CHECK(sohcast_config_load(nullptr, "x") == SOHCAST_ERR);
    Ctx ctx;
    CHECK(sohcast_config_set(ctx.ptr, nullptr, "1") == SOHCAST_ERR_CONFIG);
    CHECK(sohcast_train(ctx.ptr, nullptr) == SOHCAST_ERR_CONFIG);
    CHECK(std::string(sohcast_last_error(nullptr)) == "null context");
}
