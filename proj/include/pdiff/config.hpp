#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdiff/dataset.hpp"
#include "pdiff/net.hpp"
#include "pdiff/noise.hpp"
#include "pdiff/selector.hpp"

namespace pdiff {

enum class RunMode { pdiff, pdiff_no_tau, pdiff_py_variant, normal, clean_oracle };

const char* run_mode_name(RunMode m);
RunMode parse_run_mode(const std::string& s);

enum class DatasetKind { idx, csv, blobs };

const char* dataset_kind_name(DatasetKind k);

struct RunConfig {
    DatasetKind dataset_kind = DatasetKind::blobs;
    std::string idx_images;
    std::string idx_labels;
    std::string csv_path;
    std::string csv_label_column = "label";
    BlobSpec blobs;
    double test_fraction = 0.2;

    NoiseSpec noise;

    std::vector<std::size_t> hidden_dims = {256};

    int epochs = 200;
    std::size_t batch_size = 128;
    double learning_rate = 0.001;
    double momentum = 0.9;
    GradReduction grad_reduction = GradReduction::mean;

    SelectorConfig selector;

    RunMode mode = RunMode::normal;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    std::vector<int> hist_epochs;
    bool save_model = false;
    std::string kernel = "auto";

    void validate() const;
};

// Every accepted dotted key, in documentation order. The CLI exposes each as
// a flag of the same name.
const std::vector<std::string>& known_config_keys();

// Flat `key = value` file (# comments, blank lines ok), then overrides in
// order. Empty path = overrides only. Unknown keys are rejected by name.
RunConfig parse_config(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

// The config serialized with flat dotted keys, as logged in metrics files.
std::string config_to_json(const RunConfig& cfg);

}  // namespace pdiff
