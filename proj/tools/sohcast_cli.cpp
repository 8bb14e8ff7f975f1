// Command-line front end. Talks to the core exclusively through the C API
// so it doubles as a living example of embedding libsohcast.

#include <cstdlib>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sohcast.h"

namespace {

struct CtxDeleter {
    void operator()(sohcast_ctx* c) const { sohcast_ctx_free(c); }
};
using CtxPtr = std::unique_ptr<sohcast_ctx, CtxDeleter>;

// Applies --config, then --set overrides, then the single-flag shortcuts.
int apply_config(sohcast_ctx* ctx, const std::string& config_path,
                 const std::vector<std::string>& sets, const std::string& seed,
                 const std::string& workers) {
    if (!config_path.empty()) {
        if (int rc = sohcast_config_load(ctx, config_path.c_str())) return rc;
    }
    for (const auto& kv : sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::cerr << "sohcast: --set expects key=value, got '" << kv << "'\n";
            return SOHCAST_ERR_CONFIG;
        }
        if (int rc = sohcast_config_set(ctx, kv.substr(0, eq).c_str(),
                                        kv.substr(eq + 1).c_str())) {
            return rc;
        }
    }
    if (!seed.empty()) {
        if (int rc = sohcast_config_set(ctx, "run.seed", seed.c_str())) return rc;
    }
    if (!workers.empty()) {
        if (int rc = sohcast_config_set(ctx, "run.workers", workers.c_str())) return rc;
    }
    return SOHCAST_OK;
}

std::string resolve_out(const std::string& out_flag, const std::string& fallback) {
    if (!out_flag.empty()) return out_flag;
    if (const char* root = std::getenv("SOHCAST_OUT")) {
        return std::string(root) + "/" + fallback;
    }
    return fallback;
}

int fail(sohcast_ctx* ctx, int rc) {
    std::cerr << "sohcast: " << sohcast_last_error(ctx) << "\n";
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string("sohcast ") + sohcast_version() +
                 " — probabilistic battery state-of-health forecasting"};
    app.require_subcommand(1);

    std::string config_path, seed, workers, out_dir, run_dir, battery;
    std::vector<std::string> sets;
    std::vector<double> sigmas;

    app.add_option("--config", config_path, "configuration file (flat key=value)");
    app.add_option("--set", sets, "override a config key, e.g. --set run.seed=7")
        ->take_all();
    app.add_option("--seed", seed, "shortcut for --set run.seed=...");
    app.add_option("--workers", workers, "shortcut for --set run.workers=...");

    auto* train = app.add_subcommand("train", "train the leave-one-battery-out model pool");
    train->add_option("--out", out_dir, "output run directory");

    auto* evaluate =
        app.add_subcommand("evaluate", "score baseline and stacking strategies on one battery");
    evaluate->add_option("--run", run_dir, "trained run directory")->required();
    evaluate->add_option("--battery", battery, "held-out battery id")->required();
    evaluate->add_option("--out", out_dir, "output directory");

    auto* forecast = app.add_subcommand("forecast", "one-step-ahead forecast CSV");
    forecast->add_option("--run", run_dir, "trained run directory")->required();
    forecast->add_option("--battery", battery, "battery id")->required();
    forecast->add_option("--out", out_dir, "output directory");

    auto* sweep = app.add_subcommand("noise-sweep", "proposed-ensemble metrics across noise levels");
    sweep->add_option("--run", run_dir, "trained run directory")->required();
    sweep->add_option("--battery", battery, "battery id")->required();
    sweep->add_option("--sigmas", sigmas, "noise levels, e.g. --sigmas 0 0.05 0.1 0.2")
        ->required()
        ->take_all();
    sweep->add_option("--out", out_dir, "output directory");

    auto* report = app.add_subcommand("report", "summarize a run directory (read-only)");
    report->add_option("--run", run_dir, "run directory")->required();

    CLI11_PARSE(app, argc, argv);

    CtxPtr ctx(sohcast_ctx_new());
    if (int rc = apply_config(ctx.get(), config_path, sets, seed, workers)) {
        return fail(ctx.get(), rc);
    }

    if (train->parsed()) {
        const std::string out = resolve_out(out_dir, "run");
        if (int rc = sohcast_train(ctx.get(), out.c_str())) return fail(ctx.get(), rc);
        std::cout << "trained pool written to " << out << "\n";
        return 0;
    }
    if (evaluate->parsed()) {
        const std::string out = resolve_out(out_dir, "eval_" + battery);
        if (int rc = sohcast_evaluate(ctx.get(), run_dir.c_str(), battery.c_str(),
                                      out.c_str())) {
            return fail(ctx.get(), rc);
        }
        std::cout << "evaluation for battery " << battery << " written to " << out << "\n";
        return 0;
    }
    if (forecast->parsed()) {
        const std::string out = resolve_out(out_dir, "forecast_" + battery);
        if (int rc = sohcast_forecast(ctx.get(), run_dir.c_str(), battery.c_str(),
                                      out.c_str())) {
            return fail(ctx.get(), rc);
        }
        std::cout << "forecast for battery " << battery << " written to " << out << "\n";
        return 0;
    }
    if (sweep->parsed()) {
        const std::string out = resolve_out(out_dir, "sweep_" + battery);
        if (int rc = sohcast_noise_sweep(ctx.get(), run_dir.c_str(), battery.c_str(),
                                         sigmas.data(), sigmas.size(), out.c_str())) {
            return fail(ctx.get(), rc);
        }
        std::cout << "noise sweep for battery " << battery << " written to " << out << "\n";
        return 0;
    }
    if (report->parsed()) {
        char* text = nullptr;
        if (int rc = sohcast_report(ctx.get(), run_dir.c_str(), &text)) {
            return fail(ctx.get(), rc);
        }
        std::cout << text;
        sohcast_string_free(text);
        return 0;
    }
    return SOHCAST_ERR;
}
