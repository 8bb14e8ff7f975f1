// Writes a synthetic discharge-cycle CSV so the pipeline can be exercised
// without the real battery archive.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sohcast/dataset.hpp"
#include "sohcast/error.hpp"

int main(int argc, char** argv) {
    CLI::App app{"sohcast-fixture — synthetic capacity-fade dataset generator"};

    sohcast::SyntheticConfig cfg;
    std::string out = "fixture.csv";
    std::uint64_t seed = 1;
    app.add_option("--out", out, "output CSV path");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--batteries", cfg.batteries, "number of batteries");
    app.add_option("--cycles", cfg.cycles_per_battery, "cycles per battery");
    app.add_option("--initial-capacity", cfg.initial_capacity_ah, "starting capacity (Ah)");
    app.add_option("--floor", cfg.capacity_floor_ah, "fade asymptote (Ah)");
    app.add_option("--fade-rate", cfg.fade_rate, "per-cycle decay toward the floor");
    app.add_option("--spike-prob", cfg.spike_probability, "regeneration spike probability");
    app.add_option("--spike-size", cfg.spike_size_ah, "regeneration spike size (Ah)");
    app.add_option("--samples", cfg.base_samples, "discharge samples at full capacity");
    CLI11_PARSE(app, argc, argv);

    try {
        sohcast::Rng rng(seed);
        sohcast::BatteryDataset ds = sohcast::generate_synthetic(cfg, rng);
        sohcast::write_cycles_csv(ds, out);
        std::size_t cycles = 0;
        for (const auto& id : ds.battery_ids) cycles += ds.cycles.at(id).size();
        std::cout << "wrote " << ds.battery_ids.size() << " batteries, " << cycles
                  << " cycles to " << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "sohcast-fixture: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
