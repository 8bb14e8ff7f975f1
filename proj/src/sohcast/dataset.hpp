#pragma once

#include <map>
#include <string>
#include <vector>

#include "sohcast/rng.hpp"
#include "sohcast/tensor.hpp"

namespace sohcast {

// One battery discharge cycle: per-timestep samples plus the measured
// capacity label. Sample arrays share one length; time is strictly
// increasing in loaded data (padding relaxes this by repeating the tail).
struct DischargeCycle {
    std::string battery_id;
    long cycle_index = 0;
    std::vector<double> time_s;
    std::vector<double> voltage_v;
    std::vector<double> temperature_c;
    double capacity_ah = 0.0;
};

// Per-channel min/max computed on training data only.
struct NormalizationParams {
    std::vector<std::string> channels;
    std::vector<double> min;
    std::vector<double> max;

    std::size_t channel_count() const { return channels.size(); }
};

// Supervised pair: padded+normalized features of cycle t, capacity at t+1.
struct CycleTensor {
    Tensor features;  // [pad_length x channels]
    double label = 0.0;
    long cycle_index = 0;  // index of the input cycle t
};

struct BatteryDataset {
    std::vector<std::string> battery_ids;  // sorted, unique
    std::map<std::string, std::vector<DischargeCycle>> cycles;  // sorted by cycle_index
    NormalizationParams normalization;
    std::size_t pad_length = 0;

    const std::vector<DischargeCycle>& battery(const std::string& id) const;
};

inline constexpr double kMaxCapacityAh = 2.5;

// Canonical channel names; "zero" is a reserved all-zeros slot that exists
// only to reproduce a four-channel input layout.
const std::vector<std::string>& known_channels();

// Long-format CSV, one row per timestep, header required:
// battery_id,cycle_index,time_s,voltage_v,temperature_c,capacity_ah
std::vector<DischargeCycle> load_cycles(const std::string& path);

// Groups loaded cycles by battery; normalization left unfit.
BatteryDataset group_cycles(std::vector<DischargeCycle> cycles);

std::size_t max_cycle_length(const BatteryDataset& dataset);

// Extends the sample arrays to pad_length by repeating the final sample of
// each channel; never truncates.
DischargeCycle pad_cycle(const DischargeCycle& cycle, std::size_t pad_length);

NormalizationParams fit_normalization(const std::vector<const DischargeCycle*>& train_cycles,
                                      const std::vector<std::string>& channels);
NormalizationParams fit_normalization(const BatteryDataset& dataset,
                                      const std::vector<std::string>& channels);

// (x - min) / (max - min) per channel; out-of-range values pass through
// unclamped so distribution shift stays visible downstream.
DischargeCycle apply_normalization(const DischargeCycle& cycle,
                                   const NormalizationParams& params);

// Padded, normalized [pad_length x channels] feature tensor for one cycle.
Tensor cycle_features(const DischargeCycle& cycle, const NormalizationParams& params,
                      std::size_t pad_length);

// Consecutive-cycle supervised pairs for one battery; count = cycles - 1.
std::vector<CycleTensor> build_pairs(const BatteryDataset& dataset,
                                     const std::string& battery_id);

// Adds i.i.d. N(0, sigma^2) draws elementwise to the feature channels.
Tensor inject_noise(const Tensor& features, double sigma, Rng& rng);

struct SyntheticConfig {
    int batteries = 3;
    int cycles_per_battery = 120;
    double initial_capacity_ah = 2.0;
    double capacity_floor_ah = 1.0;
    double fade_rate = 0.015;          // per-cycle relative decay toward the floor
    double spike_probability = 0.03;   // capacity regeneration spikes
    double spike_size_ah = 0.02;
    std::size_t base_samples = 64;     // discharge length at full capacity
    std::vector<std::string> channels = {"voltage", "temperature", "time"};
};

// Deterministic-under-seed fixture whose capacity series is monotone
// decreasing apart from regeneration spikes; discharge profiles are smooth
// parametric curves whose duration and shape track the cycle capacity.
BatteryDataset generate_synthetic(const SyntheticConfig& config, Rng& rng);

// Writes a dataset back out in the canonical CSV schema (fixtures, audits).
void write_cycles_csv(const BatteryDataset& dataset, const std::string& path);

}  // namespace sohcast
