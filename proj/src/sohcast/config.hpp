#pragma once

#include <string>
#include <vector>

#include "sohcast/bcnn.hpp"

namespace sohcast {

// Flat key=value run configuration; every field has a default and the file
// format round-trips losslessly. '#' starts a comment.
struct RunConfig {
    // data.*
    std::string data_csv;
    std::size_t pad_length = 0;  // 0 = max observed discharge length
    std::vector<std::string> channels = {"voltage", "temperature", "time"};

    // model.*
    std::size_t conv1_kernels = 16;
    std::size_t conv1_width = 3;
    std::size_t conv2_kernels = 8;
    std::size_t conv2_width = 2;
    std::size_t dense_units = 16;
    std::string prior_family = "laplace";
    double prior_loc = 0.0;
    double prior_scale = 1.0;
    double learning_rate = 0.01;
    std::size_t epochs = 500;
    std::size_t batch_size = 16;
    std::size_t mc_train_samples = 1;
    std::size_t mc_predict_samples = 100;
    std::string kl_weight = "auto";  // "auto" or a number
    std::size_t kl_anneal_epochs = 0;
    bool strict_shapes = false;

    // ensemble.*
    std::string ensemble_method = "stack-dist";  // stack-dist | stack-point | baseline
    double lambda_reg = 0.01;

    // forecast.*
    double noise_sigma = 0.1;
    double interval = 0.95;

    // run.*
    std::uint64_t seed = 20240901;
    std::size_t workers = 0;  // 0 = one per pool model
    std::string out_dir = "runs";

    static RunConfig load(const std::string& path);
    static RunConfig from_text(const std::string& text);
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    std::string to_text() const;
    void save(const std::string& path) const;

    BcnnConfig bcnn_config(std::size_t input_length) const;
    static std::vector<std::string> known_keys();
};

}  // namespace sohcast
