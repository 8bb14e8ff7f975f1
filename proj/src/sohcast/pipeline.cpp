#include "sohcast/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sohcast/error.hpp"
#include "sohcast/util.hpp"
#include "sohcast/version.hpp"

namespace sohcast {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageTimer {
  public:
    void start(const std::string& stage) {
        stage_ = stage;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        const auto t1 = std::chrono::steady_clock::now();
        timings_.emplace_back(stage_, std::chrono::duration<double>(t1 - t0_).count());
    }
    const std::vector<std::pair<std::string, double>>& timings() const { return timings_; }

  private:
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
    std::vector<std::pair<std::string, double>> timings_;
};

std::string sanitize_id(const std::string& id) {
    std::string out;
    for (char c : id) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    }
    return out.empty() ? "_" : out;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& cfg, std::uint64_t dataset_fingerprint,
                    const StageTimer& timer, const std::vector<std::string>& artifacts) {
    json timings = json::array();
    for (const auto& [stage, secs] : timer.timings()) {
        timings.push_back(json{{"stage", stage}, {"seconds", secs}});
    }
    json doc{{"format", "sohcast-manifest-v1"},
             {"version", kVersion},
             {"command", command},
             {"config", cfg.to_text()},
             {"dataset_fingerprint", hex64(dataset_fingerprint)},
             {"timings", timings},
             {"artifacts", artifacts}};
    for (const auto& a : artifacts) {
        if (!file_exists(out_dir + "/" + a)) {
            throw ManifestError("manifest lists missing artifact '" + a + "'");
        }
    }
    write_file_atomic(out_dir + "/manifest.json", doc.dump(2));
}

BatteryDataset load_dataset(const RunConfig& cfg) {
    if (cfg.data_csv.empty()) {
        throw ConfigError("config: 'data.csv' must point at the discharge-cycle CSV");
    }
    BatteryDataset ds = group_cycles(load_cycles(cfg.data_csv));
    const std::size_t longest = max_cycle_length(ds);
    if (cfg.pad_length == 0) {
        ds.pad_length = longest;
    } else {
        if (cfg.pad_length < longest) {
            throw DataError("data.pad_length " + std::to_string(cfg.pad_length) +
                            " is shorter than the longest observed cycle (" +
                            std::to_string(longest) + " samples)");
        }
        ds.pad_length = cfg.pad_length;
    }
    return ds;
}

struct MemberForecasts {
    // components[i][k]: member k's predictive Gaussian for test pair i
    std::vector<std::vector<GaussianPrediction>> components;
    std::vector<double> observed;
    std::vector<long> cycle_index;
};

// Per-pair, per-member Monte Carlo predictions on the test battery with
// forecast-time input noise; draws are seeded per (member, pair) so the
// result is independent of evaluation order.
MemberForecasts forecast_components(const ModelPool& pool,
                                    const std::vector<std::size_t>& member_idx,
                                    const std::vector<CycleTensor>& pairs,
                                    const std::string& battery, const RunConfig& cfg) {
    MemberForecasts out;
    out.components.resize(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        out.observed.push_back(pairs[i].label);
        out.cycle_index.push_back(pairs[i].cycle_index);
        for (std::size_t k : member_idx) {
            const auto& member = pool.members[k];
            Rng rng(mix_seed(cfg.seed, "forecast:" + battery + ":" + member.held_out, i));
            out.components[i].push_back(
                member.model.predict_distribution(pairs[i].features, rng,
                                                  cfg.noise_sigma));
        }
    }
    return out;
}

ForecastSeries mix_series(const MemberForecasts& fc, const std::vector<double>& weights) {
    ForecastSeries series;
    series.reserve(fc.components.size());
    for (std::size_t i = 0; i < fc.components.size(); ++i) {
        MixturePrediction mix{fc.components[i], weights};
        series.push_back(ForecastPoint{std::move(mix), fc.observed[i]});
    }
    return series;
}

std::string forecast_csv(const ForecastSeries& series, const std::vector<long>& cycles,
                         double interval) {
    const double lo_p = 0.5 * (1.0 - interval);
    const double hi_p = 1.0 - lo_p;
    std::string out = "cycle_index,observed,mean,lo" + fmt_double(100.0 * interval) +
                      ",hi" + fmt_double(100.0 * interval) + "\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& pt = series[i];
        out += std::to_string(cycles[i]) + ',' + fmt_double(pt.observed) + ',' +
               fmt_double(mixture_mean(pt.dist)) + ',' +
               fmt_double(mixture_quantile(pt.dist, lo_p)) + ',' +
               fmt_double(mixture_quantile(pt.dist, hi_p)) + '\n';
    }
    return out;
}

std::string calibration_csv(const ForecastSeries& series) {
    auto curve = calibration_curve(series, default_calibration_levels());
    std::string out = "level,empirical\n";
    for (const auto& [p, phat] : curve) {
        out += fmt_double(p) + ',' + fmt_double(phat) + '\n';
    }
    return out;
}

json weights_descriptor(const ModelPool& pool, const std::vector<std::size_t>& member_idx,
                        const StackingWeights& w, const std::string& fitting_set) {
    json members = json::array();
    for (std::size_t j = 0; j < member_idx.size(); ++j) {
        const auto& m = pool.members[member_idx[j]];
        members.push_back(json{{"model_file", "models/bcnn_" + sanitize_id(m.held_out) + ".json"},
                               {"held_out", m.held_out},
                               {"weight", w.w[j]}});
    }
    return json{{"format", "sohcast-ensemble-v1"},
                {"method", w.method},
                {"lambda_reg", w.lambda_reg},
                {"fitting_set", fitting_set},
                {"members", members}};
}

struct FittedWeights {
    std::vector<std::size_t> member_idx;  // pool indices taking part in the mixture
    StackingWeights dist;
    StackingWeights point;
    std::string fitting_set;
    std::string matrix_csv;
};

// Stacking wiring: the mixture holds every pool model except the one whose
// held-out battery is the test battery (that model is the baseline); weights
// are fit on the members' leave-one-out predictions pooled over their own
// held-out batteries, so no test-battery label steers the fit.
FittedWeights fit_stacking_weights(const ModelPool& pool, const BatteryDataset& dataset,
                                   const std::string& battery, const RunConfig& cfg) {
    FittedWeights out;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (pool.members[k].held_out != battery) out.member_idx.push_back(k);
    }
    if (out.member_idx.empty()) {
        std::cerr << "sohcast: pool only contains the model excluding '" << battery
                  << "'; stacking degenerates to that single model\n";
        for (std::size_t k = 0; k < pool.size(); ++k) out.member_idx.push_back(k);
    }

    if (out.member_idx.size() == 1) {
        out.dist = StackingWeights{{1.0}, "log-score", cfg.lambda_reg};
        out.point = StackingWeights{{1.0}, "point-mse", cfg.lambda_reg};
        out.fitting_set = "degenerate single-member pool";
        out.matrix_csv = "member_held_out,supervision_battery,cycle_index,observed,mu,sigma\n";
        return out;
    }

    PredictionMatrix matrix;
    matrix.preds.resize(out.member_idx.size());
    std::string audit = "member_held_out,supervision_battery,cycle_index,observed,mu,sigma\n";
    std::string fitting_set = "pooled held-out batteries:";
    for (std::size_t j = 0; j < out.member_idx.size(); ++j) {
        const std::string& sup_battery = pool.members[out.member_idx[j]].held_out;
        if (!dataset.cycles.count(sup_battery)) {
            throw DataError("supervision battery '" + sup_battery +
                            "' (pool provenance) is missing from the dataset");
        }
        fitting_set += " " + sup_battery;
        const auto sup_pairs = build_pairs(dataset, sup_battery);
        for (std::size_t i = 0; i < sup_pairs.size(); ++i) {
            matrix.observed.push_back(sup_pairs[i].label);
            for (std::size_t k = 0; k < out.member_idx.size(); ++k) {
                const auto& member = pool.members[out.member_idx[k]];
                Rng rng(mix_seed(cfg.seed, "loo:" + member.held_out + ":" + sup_battery, i));
                GaussianPrediction g =
                    member.model.predict_distribution(sup_pairs[i].features, rng, 0.0);
                matrix.preds[k].push_back(g);
                audit += member.held_out + ',' + sup_battery + ',' +
                         std::to_string(sup_pairs[i].cycle_index) + ',' +
                         fmt_double(sup_pairs[i].label) + ',' + fmt_double(g.mu) + ',' +
                         fmt_double(g.sigma) + '\n';
            }
        }
    }
    out.dist = fit_logscore_weights(matrix, cfg.lambda_reg);
    out.point = fit_pointpred_weights(matrix, cfg.lambda_reg);
    out.fitting_set = fitting_set;
    out.matrix_csv = std::move(audit);
    return out;
}

int find_baseline(const ModelPool& pool, const std::string& battery) {
    for (std::size_t k = 0; k < pool.size(); ++k) {
        if (pool.members[k].held_out == battery) return static_cast<int>(k);
    }
    return -1;
}

}  // namespace

void run_train(const RunConfig& cfg, const std::string& out_dir) {
    StageTimer timer;
    timer.start("preprocess");
    BatteryDataset dataset = load_dataset(cfg);
    dataset.normalization = fit_normalization(dataset, cfg.channels);
    const std::uint64_t fingerprint = hash_file(cfg.data_csv);
    timer.stop();

    timer.start("train");
    const BcnnConfig bcnn_cfg = cfg.bcnn_config(dataset.pad_length);
    ModelPool pool = build_pool(dataset, bcnn_cfg, cfg.seed, cfg.workers);
    timer.stop();

    timer.start("serialize");
    fs::create_directories(out_dir + "/models");
    std::vector<std::string> artifacts;
    json pool_index = json::array();
    for (auto& member : pool.members) {
        member.model.set_normalization_ref("normalization.json");
        const std::string rel = "models/bcnn_" + sanitize_id(member.held_out) + ".json";
        write_file_atomic(out_dir + "/" + rel, member.model.to_json());
        pool_index.push_back(json{{"file", rel}, {"held_out", member.held_out}});
        artifacts.push_back(rel);
    }
    json pool_doc{{"format", "sohcast-pool-v1"}, {"members", pool_index}};
    write_file_atomic(out_dir + "/models/pool.json", pool_doc.dump(2));
    artifacts.push_back("models/pool.json");

    json norm{{"format", "sohcast-normalization-v1"},
              {"channels", dataset.normalization.channels},
              {"min", dataset.normalization.min},
              {"max", dataset.normalization.max},
              {"pad_length", dataset.pad_length}};
    write_file_atomic(out_dir + "/normalization.json", norm.dump(2));
    artifacts.push_back("normalization.json");

    write_file_atomic(out_dir + "/config.txt", cfg.to_text());
    artifacts.push_back("config.txt");
    timer.stop();

    write_manifest(out_dir, "train", cfg, fingerprint, timer, artifacts);
}

LoadedPool load_pool(const std::string& run_dir) {
    const std::string pool_path = run_dir + "/models/pool.json";
    const std::string norm_path = run_dir + "/normalization.json";
    if (!file_exists(pool_path) || !file_exists(norm_path)) {
        throw MissingPoolError("no trained pool under '" + run_dir +
                               "' (expected models/pool.json and normalization.json)");
    }
    LoadedPool lp;
    try {
        const json pool_doc = json::parse(read_file(pool_path));
        for (const auto& entry : pool_doc.at("members")) {
            PoolMember m;
            m.held_out = entry.at("held_out").get<std::string>();
            m.model = BcnnModel::from_json(
                read_file(run_dir + "/" + entry.at("file").get<std::string>()));
            lp.pool.members.push_back(std::move(m));
        }
        const json norm_doc = json::parse(read_file(norm_path));
        lp.normalization.channels = norm_doc.at("channels").get<std::vector<std::string>>();
        lp.normalization.min = norm_doc.at("min").get<std::vector<double>>();
        lp.normalization.max = norm_doc.at("max").get<std::vector<double>>();
        lp.pad_length = norm_doc.at("pad_length").get<std::size_t>();
    } catch (const json::exception& e) {
        throw MissingPoolError("trained pool under '" + run_dir + "' is unreadable: " +
                               e.what());
    }
    if (lp.pool.members.empty()) {
        throw MissingPoolError("trained pool under '" + run_dir + "' has no members");
    }
    return lp;
}

void run_evaluate(const RunConfig& cfg, const std::string& run_dir,
                  const std::string& battery_id, const std::string& out_dir) {
    StageTimer timer;
    timer.start("load");
    LoadedPool lp = load_pool(run_dir);
    BatteryDataset dataset = load_dataset(cfg);
    // inference reuses the offline scaling and padding
    dataset.pad_length = lp.pad_length;
    dataset.normalization = lp.normalization;
    const std::uint64_t fingerprint = hash_file(cfg.data_csv);
    const auto test_pairs = build_pairs(dataset, battery_id);
    timer.stop();

    timer.start("fit-weights");
    FittedWeights fitted = fit_stacking_weights(lp.pool, dataset, battery_id, cfg);
    timer.stop();

    timer.start("forecast");
    MemberForecasts fc =
        forecast_components(lp.pool, fitted.member_idx, test_pairs, battery_id, cfg);
    ForecastSeries series_dist = mix_series(fc, fitted.dist.w);
    ForecastSeries series_point = mix_series(fc, fitted.point.w);

    const int baseline_idx = find_baseline(lp.pool, battery_id);
    ForecastSeries series_base;
    if (baseline_idx >= 0) {
        const auto& baseline = lp.pool.members[static_cast<std::size_t>(baseline_idx)];
        for (std::size_t i = 0; i < test_pairs.size(); ++i) {
            Rng rng(mix_seed(cfg.seed, "forecast:" + battery_id + ":" + baseline.held_out, i));
            series_base.push_back(ForecastPoint{
                as_mixture(baseline.model.predict_distribution(test_pairs[i].features, rng,
                                                               cfg.noise_sigma)),
                test_pairs[i].label});
        }
    } else {
        std::cerr << "sohcast: no pool member excludes battery '" << battery_id
                  << "'; baseline row omitted\n";
    }
    timer.stop();

    timer.start("score");
    fs::create_directories(out_dir);
    std::vector<std::string> artifacts;

    std::string reports_csv = report_csv_header() + "\n";
    json reports_json = json::object();
    auto add_report = [&](const std::string& strategy, const ForecastSeries& series,
                          const std::vector<long>& cycles) {
        EvaluationReport rep = evaluate_series(series);
        reports_csv += report_to_csv_row(battery_id, strategy, rep) + "\n";
        reports_json[strategy] = json::parse(report_to_json(rep));
        const std::string tag = strategy;
        write_file_atomic(out_dir + "/calibration_" + tag + ".csv", calibration_csv(series));
        artifacts.push_back("calibration_" + tag + ".csv");
        write_file_atomic(out_dir + "/forecast_" + tag + ".csv",
                          forecast_csv(series, cycles, cfg.interval));
        artifacts.push_back("forecast_" + tag + ".csv");
    };

    if (!series_base.empty()) add_report("baseline", series_base, fc.cycle_index);
    add_report("stack-point", series_point, fc.cycle_index);
    add_report("stack-dist", series_dist, fc.cycle_index);

    write_file_atomic(out_dir + "/reports.csv", reports_csv);
    artifacts.push_back("reports.csv");
    write_file_atomic(out_dir + "/reports.json", reports_json.dump(2));
    artifacts.push_back("reports.json");
    write_file_atomic(out_dir + "/prediction_matrix.csv", fitted.matrix_csv);
    artifacts.push_back("prediction_matrix.csv");
    write_file_atomic(
        out_dir + "/weights_stack_dist.json",
        weights_descriptor(lp.pool, fitted.member_idx, fitted.dist, fitted.fitting_set)
            .dump(2));
    artifacts.push_back("weights_stack_dist.json");
    write_file_atomic(
        out_dir + "/weights_stack_point.json",
        weights_descriptor(lp.pool, fitted.member_idx, fitted.point, fitted.fitting_set)
            .dump(2));
    artifacts.push_back("weights_stack_point.json");
    timer.stop();

    write_manifest(out_dir, "evaluate " + battery_id, cfg, fingerprint, timer, artifacts);
}

void run_forecast(const RunConfig& cfg, const std::string& run_dir,
                  const std::string& battery_id, const std::string& out_dir) {
    StageTimer timer;
    timer.start("load");
    LoadedPool lp = load_pool(run_dir);
    BatteryDataset dataset = load_dataset(cfg);
    dataset.pad_length = lp.pad_length;
    dataset.normalization = lp.normalization;
    const std::uint64_t fingerprint = hash_file(cfg.data_csv);
    const auto test_pairs = build_pairs(dataset, battery_id);
    timer.stop();

    ForecastSeries series;
    std::vector<long> cycles;
    if (cfg.ensemble_method == "baseline") {
        timer.start("forecast");
        const int baseline_idx = find_baseline(lp.pool, battery_id);
        if (baseline_idx < 0) {
            throw DataError("no pool member excludes battery '" + battery_id +
                            "'; cannot run the baseline method");
        }
        const auto& baseline = lp.pool.members[static_cast<std::size_t>(baseline_idx)];
        for (std::size_t i = 0; i < test_pairs.size(); ++i) {
            Rng rng(mix_seed(cfg.seed, "forecast:" + battery_id + ":" + baseline.held_out, i));
            series.push_back(ForecastPoint{
                as_mixture(baseline.model.predict_distribution(test_pairs[i].features, rng,
                                                               cfg.noise_sigma)),
                test_pairs[i].label});
            cycles.push_back(test_pairs[i].cycle_index);
        }
        timer.stop();
    } else {
        timer.start("fit-weights");
        FittedWeights fitted = fit_stacking_weights(lp.pool, dataset, battery_id, cfg);
        timer.stop();
        timer.start("forecast");
        MemberForecasts fc =
            forecast_components(lp.pool, fitted.member_idx, test_pairs, battery_id, cfg);
        series = mix_series(fc, cfg.ensemble_method == "stack-point" ? fitted.point.w
                                                                     : fitted.dist.w);
        cycles = fc.cycle_index;
        timer.stop();
    }

    timer.start("serialize");
    fs::create_directories(out_dir);
    write_file_atomic(out_dir + "/forecast.csv", forecast_csv(series, cycles, cfg.interval));
    timer.stop();
    write_manifest(out_dir, "forecast " + battery_id, cfg, fingerprint, timer,
                   {"forecast.csv"});
}

void run_noise_sweep(const RunConfig& cfg, const std::string& run_dir,
                     const std::string& battery_id, std::vector<double> sigmas,
                     const std::string& out_dir) {
    if (sigmas.empty()) throw ConfigError("noise sweep: no sigma values given");
    for (double s : sigmas) {
        if (s < 0.0) throw ConfigError("noise sweep: sigma must be >= 0, got " + fmt_double(s));
    }
    std::vector<double> unique;
    for (double s : sigmas) {
        if (std::find(unique.begin(), unique.end(), s) == unique.end()) {
            unique.push_back(s);
        } else {
            std::cerr << "sohcast: duplicate sigma " << fmt_double(s) << " ignored\n";
        }
    }

    StageTimer timer;
    timer.start("load");
    LoadedPool lp = load_pool(run_dir);
    BatteryDataset dataset = load_dataset(cfg);
    dataset.pad_length = lp.pad_length;
    dataset.normalization = lp.normalization;
    const std::uint64_t fingerprint = hash_file(cfg.data_csv);
    const auto test_pairs = build_pairs(dataset, battery_id);
    timer.stop();

    timer.start("fit-weights");
    FittedWeights fitted = fit_stacking_weights(lp.pool, dataset, battery_id, cfg);
    timer.stop();

    timer.start("sweep");
    std::string csv = "sigma,mse,nll,crps,mean_predictive_variance\n";
    for (std::size_t row = 0; row < unique.size(); ++row) {
        RunConfig row_cfg = cfg;
        row_cfg.noise_sigma = unique[row];
        // rows share the base seed: common random numbers across noise
        // levels isolate the effect of sigma itself
        MemberForecasts fc =
            forecast_components(lp.pool, fitted.member_idx, test_pairs, battery_id, row_cfg);
        ForecastSeries series = mix_series(fc, fitted.dist.w);
        double mean_var = 0.0;
        for (const auto& pt : series) mean_var += mixture_variance(pt.dist);
        mean_var /= static_cast<double>(series.size());
        csv += fmt_double(unique[row]) + ',' + fmt_double(mse(series)) + ',' +
               fmt_double(nll(series).mean) + ',' + fmt_double(crps(series)) + ',' +
               fmt_double(mean_var) + '\n';
    }
    fs::create_directories(out_dir);
    write_file_atomic(out_dir + "/noise_sweep.csv", csv);
    timer.stop();
    write_manifest(out_dir, "noise-sweep " + battery_id, cfg, fingerprint, timer,
                   {"noise_sweep.csv"});
}

std::string run_report(const std::string& run_dir) {
    const std::string manifest_path = run_dir + "/manifest.json";
    if (!file_exists(manifest_path)) {
        throw ManifestError("no manifest.json under '" + run_dir + "'");
    }
    json doc;
    try {
        doc = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw ManifestError("corrupt manifest '" + manifest_path + "': " + e.what());
    }
    if (doc.value("format", "") != "sohcast-manifest-v1") {
        throw ManifestError("corrupt manifest '" + manifest_path + "': unknown format");
    }

    std::ostringstream out;
    out << "run: " << run_dir << "\n";
    out << "command: " << doc.value("command", "?") << "\n";
    out << "version: " << doc.value("version", "?") << "\n";
    out << "dataset fingerprint: " << doc.value("dataset_fingerprint", "?") << "\n";

    std::vector<std::string> artifacts;
    try {
        artifacts = doc.at("artifacts").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ManifestError("corrupt manifest '" + manifest_path + "': " + e.what());
    }
    for (const auto& a : artifacts) {
        if (!file_exists(run_dir + "/" + a)) {
            throw ManifestError("manifest references missing artifact '" + run_dir + "/" +
                                a + "'");
        }
    }

    if (file_exists(run_dir + "/reports.csv")) {
        out << "\nstrategy            mse        r2         nll        crps       miscal     sharpness\n";
        std::istringstream csv(read_file(run_dir + "/reports.csv"));
        std::string line;
        std::getline(csv, line);  // header
        while (std::getline(csv, line)) {
            std::vector<std::string> f;
            std::stringstream ls(line);
            std::string field;
            while (std::getline(ls, field, ',')) f.push_back(field);
            if (f.size() < 10) continue;
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%-18s %-10.4g %-10.4g %-10.4g %-10.4g %-10.4g %-10.4g\n",
                          f[1].c_str(), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]),
                          std::stod(f[5]), std::stod(f[7]), std::stod(f[8]));
            out << buf;
        }
    }

    out << "\nartifacts (" << artifacts.size() << "):\n";
    for (const auto& a : artifacts) {
        out << "  " << a << " (" << fs::file_size(run_dir + "/" + a) << " bytes)\n";
    }
    json timings = doc.value("timings", json::array());
    if (!timings.empty()) {
        out << "timings:\n";
        for (const auto& t : timings) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "  %-12s %.2f s\n",
                          t.value("stage", "?").c_str(), t.value("seconds", 0.0));
            out << buf;
        }
    }
    return out.str();
}

}  // namespace sohcast
