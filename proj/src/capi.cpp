#include "sohcast.h"

#include <cstdlib>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "sohcast/config.hpp"
#include "sohcast/error.hpp"
#include "sohcast/pipeline.hpp"
#include "sohcast/version.hpp"

struct sohcast_ctx {
    sohcast::RunConfig config;
    std::string last_error;
};

namespace {

int run_guarded(sohcast_ctx* ctx, const std::function<void()>& body) {
    if (!ctx) return SOHCAST_ERR;
    ctx->last_error.clear();
    try {
        body();
        return SOHCAST_OK;
    } catch (const sohcast::ConfigError& e) {
        ctx->last_error = e.what();
        return SOHCAST_ERR_CONFIG;
    } catch (const sohcast::MissingPoolError& e) {
        ctx->last_error = e.what();
        return SOHCAST_ERR_NO_POOL;
    } catch (const sohcast::ManifestError& e) {
        ctx->last_error = e.what();
        return SOHCAST_ERR_MANIFEST;
    } catch (const sohcast::TrainingError& e) {
        ctx->last_error = e.what();
        return SOHCAST_ERR_TRAINING;
    } catch (const sohcast::DataError& e) {
        ctx->last_error = e.what();
        return SOHCAST_ERR_DATA;
    } catch (const std::exception& e) {
        ctx->last_error = e.what();
        return SOHCAST_ERR;
    }
}

const char* require(const char* s, const char* what, sohcast_ctx* ctx) {
    if (!s) {
        if (ctx) ctx->last_error = std::string("null ") + what;
        return nullptr;
    }
    return s;
}

}  // namespace

extern "C" {

const char* sohcast_version(void) { return sohcast::kVersion; }

sohcast_ctx* sohcast_ctx_new(void) { return new sohcast_ctx(); }

void sohcast_ctx_free(sohcast_ctx* ctx) { delete ctx; }

const char* sohcast_last_error(const sohcast_ctx* ctx) {
    return ctx ? ctx->last_error.c_str() : "null context";
}

int sohcast_config_load(sohcast_ctx* ctx, const char* path) {
    if (!require(path, "path", ctx)) return SOHCAST_ERR_CONFIG;
    return run_guarded(ctx, [&] { ctx->config = sohcast::RunConfig::load(path); });
}

int sohcast_config_set(sohcast_ctx* ctx, const char* key, const char* value) {
    if (!require(key, "key", ctx) || !require(value, "value", ctx)) {
        return SOHCAST_ERR_CONFIG;
    }
    return run_guarded(ctx, [&] { ctx->config.set(key, value); });
}

int sohcast_config_get(sohcast_ctx* ctx, const char* key, char* buf, size_t buf_len) {
    if (!require(key, "key", ctx) || !buf || buf_len == 0) return SOHCAST_ERR_CONFIG;
    return run_guarded(ctx, [&] {
        const std::string v = ctx->config.get(key);
        if (v.size() + 1 > buf_len) {
            throw sohcast::ConfigError("buffer too small for value of '" + std::string(key) +
                                       "' (" + std::to_string(v.size() + 1) + " bytes needed)");
        }
        std::memcpy(buf, v.c_str(), v.size() + 1);
    });
}

int sohcast_config_save(sohcast_ctx* ctx, const char* path) {
    if (!require(path, "path", ctx)) return SOHCAST_ERR_CONFIG;
    return run_guarded(ctx, [&] { ctx->config.save(path); });
}

int sohcast_train(sohcast_ctx* ctx, const char* out_dir) {
    if (!require(out_dir, "out_dir", ctx)) return SOHCAST_ERR_CONFIG;
    return run_guarded(ctx, [&] { sohcast::run_train(ctx->config, out_dir); });
}

int sohcast_evaluate(sohcast_ctx* ctx, const char* run_dir, const char* battery_id,
                     const char* out_dir) {
    if (!require(run_dir, "run_dir", ctx) || !require(battery_id, "battery_id", ctx) ||
        !require(out_dir, "out_dir", ctx)) {
        return SOHCAST_ERR_CONFIG;
    }
    return run_guarded(
        ctx, [&] { sohcast::run_evaluate(ctx->config, run_dir, battery_id, out_dir); });
}

int sohcast_forecast(sohcast_ctx* ctx, const char* run_dir, const char* battery_id,
                     const char* out_dir) {
    if (!require(run_dir, "run_dir", ctx) || !require(battery_id, "battery_id", ctx) ||
        !require(out_dir, "out_dir", ctx)) {
        return SOHCAST_ERR_CONFIG;
    }
    return run_guarded(
        ctx, [&] { sohcast::run_forecast(ctx->config, run_dir, battery_id, out_dir); });
}

int sohcast_noise_sweep(sohcast_ctx* ctx, const char* run_dir, const char* battery_id,
                        const double* sigmas, size_t n_sigmas, const char* out_dir) {
    if (!require(run_dir, "run_dir", ctx) || !require(battery_id, "battery_id", ctx) ||
        !require(out_dir, "out_dir", ctx) || (!sigmas && n_sigmas > 0)) {
        return SOHCAST_ERR_CONFIG;
    }
    return run_guarded(ctx, [&] {
        std::vector<double> s(sigmas, sigmas + n_sigmas);
        sohcast::run_noise_sweep(ctx->config, run_dir, battery_id, std::move(s), out_dir);
    });
}

int sohcast_report(sohcast_ctx* ctx, const char* run_dir, char** text_out) {
    if (!require(run_dir, "run_dir", ctx) || !text_out) return SOHCAST_ERR_CONFIG;
    *text_out = nullptr;
    return run_guarded(ctx, [&] {
        const std::string text = sohcast::run_report(run_dir);
        char* out = static_cast<char*>(std::malloc(text.size() + 1));
        if (!out) throw std::bad_alloc();
        std::memcpy(out, text.c_str(), text.size() + 1);
        *text_out = out;
    });
}

void sohcast_string_free(char* s) { std::free(s); }

}  // extern "C"
