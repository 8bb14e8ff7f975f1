#include "sohcast/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sohcast/error.hpp"
#include "sohcast/util.hpp"

namespace sohcast {

const std::vector<std::string>& known_channels() {
    static const std::vector<std::string> names = {"voltage", "temperature", "time", "zero"};
    return names;
}

const std::vector<DischargeCycle>& BatteryDataset::battery(const std::string& id) const {
    auto it = cycles.find(id);
    if (it == cycles.end()) throw DataError("unknown battery id '" + id + "'");
    return it->second;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& column) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + s +
                        "' as number for column " + column);
    }
}

struct RawRow {
    double time, voltage, temperature, capacity;
};

// Channel accessor used by normalization and feature building.
const std::vector<double>* channel_array(const DischargeCycle& c, const std::string& name) {
    if (name == "voltage") return &c.voltage_v;
    if (name == "temperature") return &c.temperature_c;
    if (name == "time") return &c.time_s;
    if (name == "zero") return nullptr;
    throw ConfigError("unknown feature channel '" + name + "'");
}

}  // namespace

std::vector<DischargeCycle> load_cycles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw DataError("empty dataset file '" + path + "'");
    auto cols = split_csv_line(header);
    const std::vector<std::string> required = {"battery_id",    "cycle_index",
                                               "time_s",        "voltage_v",
                                               "temperature_c", "capacity_ah"};
    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < cols.size(); ++i) col_index[cols[i]] = i;
    for (const auto& name : required) {
        if (!col_index.count(name)) {
            throw DataError("dataset '" + path + "' is missing required column '" + name + "'");
        }
    }

    std::map<std::pair<std::string, long>, std::vector<RawRow>> groups;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() < cols.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(cols.size()) + " fields, got " +
                            std::to_string(fields.size()));
        }
        const std::string& battery = fields[col_index["battery_id"]];
        if (battery.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty battery_id");
        }
        long cycle = static_cast<long>(
            parse_double(fields[col_index["cycle_index"]], line_no, "cycle_index"));
        if (cycle < 0) {
            throw DataError("line " + std::to_string(line_no) + ": negative cycle_index");
        }
        RawRow row;
        row.time = parse_double(fields[col_index["time_s"]], line_no, "time_s");
        row.voltage = parse_double(fields[col_index["voltage_v"]], line_no, "voltage_v");
        row.temperature =
            parse_double(fields[col_index["temperature_c"]], line_no, "temperature_c");
        row.capacity = parse_double(fields[col_index["capacity_ah"]], line_no, "capacity_ah");
        groups[{battery, cycle}].push_back(row);
    }

    std::vector<DischargeCycle> out;
    out.reserve(groups.size());
    for (auto& [key, rows] : groups) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const RawRow& a, const RawRow& b) { return a.time < b.time; });
        DischargeCycle c;
        c.battery_id = key.first;
        c.cycle_index = key.second;
        c.capacity_ah = rows.front().capacity;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const RawRow& r = rows[i];
            if (i > 0 && !(r.time > rows[i - 1].time)) {
                throw DataError("battery '" + c.battery_id + "' cycle " +
                                std::to_string(c.cycle_index) +
                                ": time_s is not strictly increasing at t=" +
                                fmt_double(r.time));
            }
            if (r.capacity != c.capacity_ah) {
                throw DataError("battery '" + c.battery_id + "' cycle " +
                                std::to_string(c.cycle_index) +
                                ": conflicting capacity_ah values");
            }
            c.time_s.push_back(r.time);
            c.voltage_v.push_back(r.voltage);
            c.temperature_c.push_back(r.temperature);
        }
        if (c.time_s.size() < 2) {
            throw DataError("battery '" + c.battery_id + "' cycle " +
                            std::to_string(c.cycle_index) + ": needs at least 2 samples");
        }
        if (!(c.capacity_ah > 0.0) || c.capacity_ah > kMaxCapacityAh) {
            throw DataError("battery '" + c.battery_id + "' cycle " +
                            std::to_string(c.cycle_index) + ": capacity " +
                            fmt_double(c.capacity_ah) + " Ah outside (0, " +
                            fmt_double(kMaxCapacityAh) + "]");
        }
        out.push_back(std::move(c));
    }
    return out;
}

BatteryDataset group_cycles(std::vector<DischargeCycle> cycles) {
    BatteryDataset ds;
    for (auto& c : cycles) ds.cycles[c.battery_id].push_back(std::move(c));
    for (auto& [id, list] : ds.cycles) {
        std::sort(list.begin(), list.end(),
                  [](const DischargeCycle& a, const DischargeCycle& b) {
                      return a.cycle_index < b.cycle_index;
                  });
        for (std::size_t i = 1; i < list.size(); ++i) {
            if (list[i].cycle_index == list[i - 1].cycle_index) {
                throw DataError("battery '" + id + "': duplicate cycle_index " +
                                std::to_string(list[i].cycle_index));
            }
        }
        ds.battery_ids.push_back(id);
    }
    return ds;
}

std::size_t max_cycle_length(const BatteryDataset& dataset) {
    std::size_t n = 0;
    for (const auto& [id, list] : dataset.cycles)
        for (const auto& c : list) n = std::max(n, c.time_s.size());
    return n;
}

DischargeCycle pad_cycle(const DischargeCycle& cycle, std::size_t pad_length) {
    const std::size_t n = cycle.time_s.size();
    if (n > pad_length) {
        throw DataError("battery '" + cycle.battery_id + "' cycle " +
                        std::to_string(cycle.cycle_index) + " has " + std::to_string(n) +
                        " samples, longer than pad_length " + std::to_string(pad_length));
    }
    if (n == pad_length) return cycle;
    DischargeCycle out = cycle;
    out.time_s.resize(pad_length, cycle.time_s.back());
    out.voltage_v.resize(pad_length, cycle.voltage_v.back());
    out.temperature_c.resize(pad_length, cycle.temperature_c.back());
    return out;
}

NormalizationParams fit_normalization(const std::vector<const DischargeCycle*>& train_cycles,
                                      const std::vector<std::string>& channels) {
    if (train_cycles.empty()) throw DataError("fit_normalization: no training cycles");
    NormalizationParams p;
    p.channels = channels;
    for (const auto& name : channels) {
        if (name == "zero") {
            // reserved slot, identity map
            p.min.push_back(0.0);
            p.max.push_back(1.0);
            continue;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (const DischargeCycle* c : train_cycles) {
            const std::vector<double>* arr = channel_array(*c, name);
            for (double v : *arr) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (!(hi > lo)) {
            throw DataError("fit_normalization: channel '" + name +
                            "' is constant (min == max == " + fmt_double(lo) + ")");
        }
        p.min.push_back(lo);
        p.max.push_back(hi);
    }
    return p;
}

NormalizationParams fit_normalization(const BatteryDataset& dataset,
                                      const std::vector<std::string>& channels) {
    std::vector<const DischargeCycle*> all;
    for (const auto& id : dataset.battery_ids)
        for (const auto& c : dataset.cycles.at(id)) all.push_back(&c);
    return fit_normalization(all, channels);
}

DischargeCycle apply_normalization(const DischargeCycle& cycle,
                                   const NormalizationParams& params) {
    DischargeCycle out = cycle;
    for (std::size_t ci = 0; ci < params.channels.size(); ++ci) {
        const std::string& name = params.channels[ci];
        if (name == "zero") continue;
        std::vector<double>* arr = nullptr;
        if (name == "voltage") arr = &out.voltage_v;
        else if (name == "temperature") arr = &out.temperature_c;
        else if (name == "time") arr = &out.time_s;
        const double lo = params.min[ci], span = params.max[ci] - params.min[ci];
        for (double& v : *arr) v = (v - lo) / span;
    }
    return out;
}

Tensor cycle_features(const DischargeCycle& cycle, const NormalizationParams& params,
                      std::size_t pad_length) {
    DischargeCycle padded = pad_cycle(cycle, pad_length);
    const std::size_t C = params.channels.size();
    Tensor features({pad_length, C});
    for (std::size_t ci = 0; ci < C; ++ci) {
        const std::string& name = params.channels[ci];
        const std::vector<double>* arr = channel_array(padded, name);
        if (arr == nullptr) continue;  // zero slot stays zero
        const double lo = params.min[ci], span = params.max[ci] - params.min[ci];
        for (std::size_t t = 0; t < pad_length; ++t)
            features.at(t, ci) = ((*arr)[t] - lo) / span;
    }
    return features;
}

std::vector<CycleTensor> build_pairs(const BatteryDataset& dataset,
                                     const std::string& battery_id) {
    const auto& list = dataset.battery(battery_id);
    if (list.size() < 2) {
        throw DataError("battery '" + battery_id + "' has " + std::to_string(list.size()) +
                        " cycles; at least 2 are needed to build one-step-ahead pairs");
    }
    if (dataset.normalization.channel_count() == 0) {
        throw ContractError("build_pairs: dataset normalization has not been fit");
    }
    std::vector<CycleTensor> pairs;
    pairs.reserve(list.size() - 1);
    for (std::size_t i = 0; i + 1 < list.size(); ++i) {
        CycleTensor p;
        p.features = cycle_features(list[i], dataset.normalization, dataset.pad_length);
        p.label = list[i + 1].capacity_ah;
        p.cycle_index = list[i].cycle_index;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

Tensor inject_noise(const Tensor& features, double sigma, Rng& rng) {
    if (sigma < 0.0) {
        throw DomainError("inject_noise: sigma must be non-negative, got " +
                          fmt_double(sigma));
    }
    if (sigma == 0.0) return features;
    Tensor out = features;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * rng.gauss();
    return out;
}

BatteryDataset generate_synthetic(const SyntheticConfig& config, Rng& rng) {
    if (!(config.initial_capacity_ah > config.capacity_floor_ah)) {
        throw ConfigError("generate_synthetic: initial capacity " +
                          fmt_double(config.initial_capacity_ah) +
                          " must exceed the capacity floor " +
                          fmt_double(config.capacity_floor_ah));
    }
    if (config.batteries < 1 || config.cycles_per_battery < 2) {
        throw ConfigError("generate_synthetic: need >= 1 battery and >= 2 cycles each");
    }

    std::vector<DischargeCycle> all;
    for (int b = 0; b < config.batteries; ++b) {
        const std::string id = "S" + std::to_string(b + 1);
        // Per-battery degradation character, mimicking unit-to-unit spread.
        const double rate = config.fade_rate * (0.85 + 0.3 * rng.uniform());
        const double cap0 = config.initial_capacity_ah * (1.0 - 0.04 * rng.uniform());
        const double temp_gain = 6.0 + 4.0 * rng.uniform();

        double cap = cap0;
        for (int t = 0; t < config.cycles_per_battery; ++t) {
            DischargeCycle c;
            c.battery_id = id;
            c.cycle_index = t;
            c.capacity_ah = cap;

            const double rel = cap / config.initial_capacity_ah;  // state of health
            const std::size_t n = std::max<std::size_t>(
                4, static_cast<std::size_t>(std::lround(
                       static_cast<double>(config.base_samples) * (0.35 + 0.65 * rel))));
            const double duration_s = 3600.0 * rel;
            for (std::size_t i = 0; i < n; ++i) {
                const double tau = static_cast<double>(i) / static_cast<double>(n - 1);
                c.time_s.push_back(tau * duration_s);
                // plateau sags and the knee sharpens as the cell ages
                const double plateau = 3.55 + 0.25 * rel;
                const double v = plateau + 0.45 * (1.0 - tau) - 1.1 * std::pow(tau, 7.0 + 2.0 * rel);
                c.voltage_v.push_back(v);
                const double heat = temp_gain * (1.0 + 0.8 * (1.0 - rel));
                c.temperature_c.push_back(24.0 + heat * std::sin(1.3 * tau) * tau);
            }
            all.push_back(std::move(c));

            if (rng.uniform() < config.spike_probability) {
                cap = std::min(cap0, cap + config.spike_size_ah);
            } else {
                cap = config.capacity_floor_ah +
                      (cap - config.capacity_floor_ah) * (1.0 - rate);
            }
        }
    }
    BatteryDataset ds = group_cycles(std::move(all));
    ds.pad_length = max_cycle_length(ds);
    ds.normalization = fit_normalization(ds, config.channels);
    return ds;
}

void write_cycles_csv(const BatteryDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write dataset file '" + path + "'");
    out << "battery_id,cycle_index,time_s,voltage_v,temperature_c,capacity_ah\n";
    for (const auto& id : dataset.battery_ids) {
        for (const auto& c : dataset.cycles.at(id)) {
            for (std::size_t i = 0; i < c.time_s.size(); ++i) {
                out << c.battery_id << ',' << c.cycle_index << ',' << fmt_double(c.time_s[i])
                    << ',' << fmt_double(c.voltage_v[i]) << ','
                    << fmt_double(c.temperature_c[i]) << ',' << fmt_double(c.capacity_ah)
                    << '\n';
            }
        }
    }
    if (!out) throw DataError("failed writing dataset file '" + path + "'");
}

}  // namespace sohcast
