#pragma once

#include <string>
#include <vector>

#include "sohcast/config.hpp"
#include "sohcast/ensemble.hpp"
#include "sohcast/metrics.hpp"

namespace sohcast {

// Offline phase: ingest the CSV, fit normalization on the training pool,
// train the leave-one-battery-out model pool and serialize everything into
// out_dir (models/, normalization.json, config.txt, manifest.json).
void run_train(const RunConfig& cfg, const std::string& out_dir);

// Online phase for one held-out battery: baseline single model, point
// stacking and distribution stacking, with reports, calibration curves and
// per-cycle forecast files written to out_dir.
void run_evaluate(const RunConfig& cfg, const std::string& run_dir,
                  const std::string& battery_id, const std::string& out_dir);

// One-step-ahead forecast CSV for the configured ensemble method.
void run_forecast(const RunConfig& cfg, const std::string& run_dir,
                  const std::string& battery_id, const std::string& out_dir);

// Proposed-ensemble metrics across test-time noise levels.
void run_noise_sweep(const RunConfig& cfg, const std::string& run_dir,
                     const std::string& battery_id, std::vector<double> sigmas,
                     const std::string& out_dir);

// Human-readable summary of a run directory; never writes.
std::string run_report(const std::string& run_dir);

// Loads a serialized pool (models/ + normalization.json) from a run dir.
struct LoadedPool {
    ModelPool pool;
    NormalizationParams normalization;
    std::size_t pad_length = 0;
};
LoadedPool load_pool(const std::string& run_dir);

}  // namespace sohcast
