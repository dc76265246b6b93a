#include "pdiff/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pdiff/error.hpp"
#include "pdiff/kernels.hpp"

namespace pdiff {

const char* run_mode_name(RunMode m) {
    switch (m) {
        case RunMode::pdiff: return "pdiff";
        case RunMode::pdiff_no_tau: return "pdiff_no_tau";
        case RunMode::pdiff_py_variant: return "pdiff_py_variant";
        case RunMode::normal: return "normal";
        case RunMode::clean_oracle: return "clean_oracle";
    }
    return "unknown";
}

RunMode parse_run_mode(const std::string& s) {
    if (s == "pdiff") return RunMode::pdiff;
    if (s == "pdiff_no_tau") return RunMode::pdiff_no_tau;
    if (s == "pdiff_py_variant") return RunMode::pdiff_py_variant;
    if (s == "normal") return RunMode::normal;
    if (s == "clean_oracle") return RunMode::clean_oracle;
    fail(ErrorCategory::config,
         "unknown mode '" + s +
             "' (expected pdiff, pdiff_no_tau, pdiff_py_variant, normal or clean_oracle)");
}

const char* dataset_kind_name(DatasetKind k) {
    switch (k) {
        case DatasetKind::idx: return "idx";
        case DatasetKind::csv: return "csv";
        case DatasetKind::blobs: return "blobs";
    }
    return "unknown";
}

namespace {

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "idx") return DatasetKind::idx;
    if (s == "csv") return DatasetKind::csv;
    if (s == "blobs") return DatasetKind::blobs;
    fail(ErrorCategory::config, "unknown dataset.kind '" + s + "' (expected idx, csv or blobs)");
}

double parse_real(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        fail(ErrorCategory::config, key + ": expected a number, got '" + value + "'");
    return v;
}

long long parse_integer(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        fail(ErrorCategory::config, key + ": expected an integer, got '" + value + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size())
        fail(ErrorCategory::config, key + ": expected an unsigned integer, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(ErrorCategory::config, key + ": expected true or false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(value);
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

struct KeySetter {
    RunConfig* cfg;
    std::set<std::string>* seen;

    void apply(const std::string& key, const std::string& value) {
        seen->insert(key);
        RunConfig& c = *cfg;
        if (key == "dataset.kind") {
            c.dataset_kind = parse_dataset_kind(value);
        } else if (key == "dataset.idx.images") {
            c.idx_images = value;
        } else if (key == "dataset.idx.labels") {
            c.idx_labels = value;
        } else if (key == "dataset.csv.path") {
            c.csv_path = value;
        } else if (key == "dataset.csv.label_column") {
            c.csv_label_column = value;
        } else if (key == "dataset.blobs.classes") {
            c.blobs.num_classes = static_cast<int>(parse_integer(key, value));
        } else if (key == "dataset.blobs.dim") {
            c.blobs.dim = static_cast<std::size_t>(parse_integer(key, value));
        } else if (key == "dataset.blobs.samples_per_class") {
            c.blobs.samples_per_class = static_cast<std::size_t>(parse_integer(key, value));
        } else if (key == "dataset.blobs.center_spread") {
            c.blobs.center_spread = parse_real(key, value);
        } else if (key == "dataset.blobs.cluster_std") {
            c.blobs.cluster_std = parse_real(key, value);
        } else if (key == "dataset.test_fraction") {
            c.test_fraction = parse_real(key, value);
        } else if (key == "noise.kind") {
            c.noise.kind = parse_noise_kind(value);
        } else if (key == "noise.rate") {
            c.noise.rate = parse_real(key, value);
        } else if (key == "model.hidden") {
            c.hidden_dims.clear();
            for (const auto& item : split_list(value))
                c.hidden_dims.push_back(static_cast<std::size_t>(parse_integer(key, item)));
        } else if (key == "train.epochs") {
            c.epochs = static_cast<int>(parse_integer(key, value));
        } else if (key == "train.batch_size") {
            c.batch_size = static_cast<std::size_t>(parse_integer(key, value));
        } else if (key == "train.lr") {
            c.learning_rate = parse_real(key, value);
        } else if (key == "train.momentum") {
            c.momentum = parse_real(key, value);
        } else if (key == "train.grad_reduction") {
            c.grad_reduction = parse_grad_reduction(value);
        } else if (key == "selector.bins") {
            c.selector.bins = static_cast<int>(parse_integer(key, value));
        } else if (key == "selector.window_fraction") {
            c.selector.window_fraction = parse_real(key, value);
        } else if (key == "selector.ramp_epochs") {
            c.selector.ramp_epochs = static_cast<int>(parse_integer(key, value));
        } else if (key == "selector.tau") {
            c.selector.tau = parse_real(key, value);
        } else if (key == "selector.zeta_threshold") {
            c.selector.zeta_threshold = parse_real(key, value);
        } else if (key == "mode") {
            c.mode = parse_run_mode(value);
        } else if (key == "seed") {
            c.seed = parse_u64(key, value);
        } else if (key == "output_dir") {
            c.output_dir = value;
        } else if (key == "output.hist_epochs") {
            c.hist_epochs.clear();
            for (const auto& item : split_list(value))
                c.hist_epochs.push_back(static_cast<int>(parse_integer(key, item)));
        } else if (key == "output.save_model") {
            c.save_model = parse_bool(key, value);
        } else if (key == "kernel") {
            if (value != "auto" && !kernels::parse_variant(value))
                fail(ErrorCategory::config,
                     "kernel: expected auto, scalar or avx2, got '" + value + "'");
            c.kernel = value;
        } else {
            fail(ErrorCategory::config, "unknown config key '" + key + "'");
        }
    }
};

}  // namespace

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "dataset.kind",
        "dataset.idx.images",
        "dataset.idx.labels",
        "dataset.csv.path",
        "dataset.csv.label_column",
        "dataset.blobs.classes",
        "dataset.blobs.dim",
        "dataset.blobs.samples_per_class",
        "dataset.blobs.center_spread",
        "dataset.blobs.cluster_std",
        "dataset.test_fraction",
        "noise.kind",
        "noise.rate",
        "model.hidden",
        "train.epochs",
        "train.batch_size",
        "train.lr",
        "train.momentum",
        "train.grad_reduction",
        "selector.bins",
        "selector.window_fraction",
        "selector.ramp_epochs",
        "selector.tau",
        "selector.zeta_threshold",
        "mode",
        "seed",
        "output_dir",
        "output.hist_epochs",
        "output.save_model",
        "kernel",
    };
    return keys;
}

void RunConfig::validate() const {
    switch (dataset_kind) {
        case DatasetKind::idx:
            if (idx_images.empty() || idx_labels.empty())
                fail(ErrorCategory::config,
                     "dataset.kind=idx requires dataset.idx.images and dataset.idx.labels");
            break;
        case DatasetKind::csv:
            if (csv_path.empty())
                fail(ErrorCategory::config, "dataset.kind=csv requires dataset.csv.path");
            break;
        case DatasetKind::blobs:
            if (blobs.num_classes < 2 || blobs.dim < 1 || blobs.samples_per_class < 1 ||
                !(blobs.center_spread > 0.0) || !(blobs.cluster_std > 0.0))
                fail(ErrorCategory::config, "invalid dataset.blobs parameters");
            break;
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        fail(ErrorCategory::config, "dataset.test_fraction must be in (0,1)");
    if (!(noise.rate >= 0.0 && noise.rate < 1.0))
        fail(ErrorCategory::config, "noise.rate must be in [0,1)");
    for (std::size_t h : hidden_dims)
        if (h < 1) fail(ErrorCategory::config, "model.hidden entries must be >= 1");
    if (epochs < 1) fail(ErrorCategory::config, "train.epochs must be >= 1");
    if (batch_size < 1) fail(ErrorCategory::config, "train.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail(ErrorCategory::config, "train.lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
        fail(ErrorCategory::config, "train.momentum must be in [0,1)");
    // batch_size and iters_per_epoch are filled in by the runner from the
    // loaded dataset; validate the user-settable selector fields around them
    SelectorConfig sel = selector;
    sel.batch_size = batch_size;
    if (sel.iters_per_epoch == 0) sel.iters_per_epoch = 1;
    sel.validate();
    if ((mode == RunMode::pdiff || mode == RunMode::pdiff_py_variant) && !selector.tau)
        fail(ErrorCategory::config,
             std::string("mode=") + run_mode_name(mode) + " requires selector.tau");
    for (int e : hist_epochs)
        if (e < 1) fail(ErrorCategory::config, "output.hist_epochs entries must be >= 1");
    if (output_dir.empty()) fail(ErrorCategory::config, "output_dir must not be empty");
}

RunConfig parse_config(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg;
    std::set<std::string> seen;
    KeySetter setter{&cfg, &seen};

    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) fail(ErrorCategory::io, "cannot open " + path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto b = line.find_first_not_of(" \t");
            if (b == std::string::npos) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                fail(ErrorCategory::config, path + ":" + std::to_string(lineno) +
                                                ": expected 'key = value', got '" + line + "'");
            auto trim = [](std::string s) {
                const auto x = s.find_first_not_of(" \t");
                const auto y = s.find_last_not_of(" \t");
                return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                fail(ErrorCategory::config,
                     path + ":" + std::to_string(lineno) + ": empty key");
            setter.apply(key, value);
        }
    }
    for (const auto& [key, value] : overrides) setter.apply(key, value);

    if (!seen.count("mode")) fail(ErrorCategory::config, "missing required key 'mode'");
    if (!seen.count("dataset.kind"))
        fail(ErrorCategory::config, "missing required key 'dataset.kind'");

    // exactly one dataset source: reject keys that belong to another kind
    auto forbid = [&](const char* key, const char* why) {
        if (seen.count(key))
            fail(ErrorCategory::config, std::string(key) + " conflicts with dataset.kind=" + why);
    };
    if (cfg.dataset_kind != DatasetKind::idx) {
        forbid("dataset.idx.images", dataset_kind_name(cfg.dataset_kind));
        forbid("dataset.idx.labels", dataset_kind_name(cfg.dataset_kind));
    }
    if (cfg.dataset_kind != DatasetKind::csv) {
        forbid("dataset.csv.path", dataset_kind_name(cfg.dataset_kind));
        forbid("dataset.csv.label_column", dataset_kind_name(cfg.dataset_kind));
    }
    if (cfg.dataset_kind != DatasetKind::blobs) {
        for (const char* key :
             {"dataset.blobs.classes", "dataset.blobs.dim", "dataset.blobs.samples_per_class",
              "dataset.blobs.center_spread", "dataset.blobs.cluster_std"})
            forbid(key, dataset_kind_name(cfg.dataset_kind));
    }

    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["record"] = "config";
    j["dataset.kind"] = dataset_kind_name(cfg.dataset_kind);
    switch (cfg.dataset_kind) {
        case DatasetKind::idx:
            j["dataset.idx.images"] = cfg.idx_images;
            j["dataset.idx.labels"] = cfg.idx_labels;
            break;
        case DatasetKind::csv:
            j["dataset.csv.path"] = cfg.csv_path;
            j["dataset.csv.label_column"] = cfg.csv_label_column;
            break;
        case DatasetKind::blobs:
            j["dataset.blobs.classes"] = cfg.blobs.num_classes;
            j["dataset.blobs.dim"] = cfg.blobs.dim;
            j["dataset.blobs.samples_per_class"] = cfg.blobs.samples_per_class;
            j["dataset.blobs.center_spread"] = cfg.blobs.center_spread;
            j["dataset.blobs.cluster_std"] = cfg.blobs.cluster_std;
            break;
    }
    j["dataset.test_fraction"] = cfg.test_fraction;
    j["noise.kind"] = noise_kind_name(cfg.noise.kind);
    j["noise.rate"] = cfg.noise.rate;
    j["model.hidden"] = cfg.hidden_dims;
    j["train.epochs"] = cfg.epochs;
    j["train.batch_size"] = cfg.batch_size;
    j["train.lr"] = cfg.learning_rate;
    j["train.momentum"] = cfg.momentum;
    j["train.grad_reduction"] = grad_reduction_name(cfg.grad_reduction);
    j["selector.bins"] = cfg.selector.bins;
    j["selector.window_fraction"] = cfg.selector.window_fraction;
    j["selector.ramp_epochs"] = cfg.selector.ramp_epochs;
    if (cfg.selector.tau) j["selector.tau"] = *cfg.selector.tau;
    j["selector.zeta_threshold"] = cfg.selector.zeta_threshold;
    j["mode"] = run_mode_name(cfg.mode);
    j["seed"] = cfg.seed;
    j["kernel"] = cfg.kernel;
    return j.dump();
}

}  // namespace pdiff
