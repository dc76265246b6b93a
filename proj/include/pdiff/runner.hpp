#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdiff/config.hpp"
#include "pdiff/selector.hpp"

namespace pdiff {

struct EpochMetrics {
    int epoch = 0;
    double train_loss_selected = 0.0;  // mean CE over selected samples
    double test_accuracy = 0.0;
    std::optional<double> delta_hat;   // last threshold used; absent = kept everything
    double drop_rate = 0.0;            // last R used
    double zeta = 0.0;                 // 0 when the mode keeps no delta window
    std::optional<double> tau_est;
    double selected_fraction = 0.0;
    double drop_precision = 0.0;
    double drop_recall = 0.0;
    double wall_time_seconds = 0.0;    // timing sidecar only, never metrics.jsonl
};

struct RunSummary {
    std::string mode;
    std::string noise_kind;
    double noise_rate = 0.0;
    int epochs = 0;
    double avg_test_acc_last10 = 0.0;  // over the final min(10, epochs) epochs
    double final_zeta = 0.0;
    std::optional<double> final_tau_est;
    double total_wall_seconds = 0.0;
};

// Executes one training run and writes into config.output_dir:
//   metrics.jsonl   config + one epoch record each + end record (no wall times)
//   timing.jsonl    wall-time sidecar, same record structure
//   summary.json    the returned RunSummary
//   hist_epoch_<T>.csv for each configured snapshot epoch (windowed modes)
//   model.bin/.json when output.save_model is set
RunSummary run(const RunConfig& config);

struct DropCurvePoint {
    double rate = 0.0;             // requested drop rate r
    double real_noise_rate = 0.0;  // fraction of the dropped set that is truly noisy
    std::size_t dropped_count = 0;
};

// Trains mode=normal for probe_epoch epochs, histograms the chosen statistic
// over the whole training set, then drops the bottom-r quantile
// (bin-quantized) for each r in {0.05, ..., 0.95}.
std::vector<DropCurvePoint> drop_curve(const RunConfig& config, int probe_epoch,
                                       Statistic strategy);

// Rebuilds a RunSummary from a finished metrics.jsonl (plus the timing
// sidecar next to it, when present). Truncated runs are rejected.
RunSummary summarize(const std::string& metrics_path);

std::string summary_to_json(const RunSummary& summary);
RunSummary summary_from_json_file(const std::string& path);
void write_summary(const RunSummary& summary, const std::string& path);

// Aligned text table: one row per summary, in the given order.
std::string compare_table(const std::vector<RunSummary>& summaries);

// Shortest round-trip decimal form; shared by the CSV writers.
std::string format_double(double v);

}  // namespace pdiff
