#include "pdiff/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "pdiff/error.hpp"
#include "pdiff/kernels.hpp"
#include "pdiff/net.hpp"
#include "pdiff/noise.hpp"

namespace pdiff {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Prepared {
    LabeledDataset train;
    LabeledDataset test;
    SelectorConfig sel;
    std::size_t iters = 0;
    std::vector<std::size_t> dims;
    std::vector<bool> row_clean;  // per train row: observed == true
};

Prepared prepare(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.kernel == "auto")
        kernels::select_auto();
    else
        kernels::select(*kernels::parse_variant(cfg.kernel));

    LabeledDataset full;
    switch (cfg.dataset_kind) {
        case DatasetKind::idx: full = load_idx(cfg.idx_images, cfg.idx_labels); break;
        case DatasetKind::csv: full = load_csv(cfg.csv_path, cfg.csv_label_column); break;
        case DatasetKind::blobs: full = gen_blobs(cfg.blobs, cfg.seed); break;
    }
    full.validate();

    auto [train_part, test_part] = split_dataset(full, cfg.test_fraction, cfg.seed);
    Prepared p;
    p.test = std::move(test_part);
    p.train = corrupt(train_part, cfg.noise, cfg.seed);

    if (cfg.batch_size > p.train.size())
        fail(ErrorCategory::config,
             "train.batch_size " + std::to_string(cfg.batch_size) +
                 " exceeds the training set size " + std::to_string(p.train.size()));
    p.iters = p.train.size() / cfg.batch_size;

    p.sel = cfg.selector;
    p.sel.batch_size = cfg.batch_size;
    p.sel.iters_per_epoch = p.iters;
    p.sel.validate();

    p.dims.push_back(p.train.dim());
    for (std::size_t h : cfg.hidden_dims) p.dims.push_back(h);
    p.dims.push_back(static_cast<std::size_t>(p.train.num_classes));

    p.row_clean.resize(p.train.size());
    for (std::size_t i = 0; i < p.train.size(); ++i)
        p.row_clean[i] = p.train.true_labels[i] == p.train.observed_labels[i];
    return p;
}

nlohmann::json epoch_record(const EpochMetrics& m) {
    nlohmann::json j;
    j["record"] = "epoch";
    j["epoch"] = m.epoch;
    j["train_loss_selected"] = m.train_loss_selected;
    j["test_accuracy"] = m.test_accuracy;
    j["delta_hat"] = m.delta_hat ? nlohmann::json(*m.delta_hat) : nlohmann::json(nullptr);
    j["drop_rate"] = m.drop_rate;
    j["zeta"] = m.zeta;
    j["tau_est"] = m.tau_est ? nlohmann::json(*m.tau_est) : nlohmann::json(nullptr);
    j["selected_fraction"] = m.selected_fraction;
    j["drop_precision"] = m.drop_precision;
    j["drop_recall"] = m.drop_recall;
    return j;
}

void write_histogram_csv(const DiffWindow& window, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write " + path);
    out << "bin,lower_edge,upper_edge,pdf_all,pdf_clean,pdf_noise\n";
    const double n = static_cast<double>(window.total());
    const int h = window.bins();
    for (int x = 1; x <= h; ++x) {
        const bool py = window.statistic() == Statistic::py;
        const double lo = py ? bin_lower_edge_py(x, h) : bin_lower_edge(x, h);
        const double hi_edge = x < h ? (py ? bin_lower_edge_py(x + 1, h) : bin_lower_edge(x + 1, h))
                                     : 1.0;
        const auto i = static_cast<std::size_t>(x - 1);
        out << x << ',' << format_double(lo) << ',' << format_double(hi_edge) << ','
            << format_double(window.bin_counts()[i] / n) << ','
            << format_double(window.clean_counts()[i] / n) << ','
            << format_double(window.noise_counts()[i] / n) << '\n';
    }
    if (!out) fail(ErrorCategory::io, "write failed: " + path);
}

// One normal-mode epoch (everything selected); shared by run and drop_curve.
void train_normal_epoch(NetworkParams& params, OptimizerState& opt, const LabeledDataset& train,
                        const RunConfig& cfg, int epoch) {
    EpochBatches batches(train, cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(epoch));
    const std::vector<double> ones(cfg.batch_size, 1.0);
    for (std::size_t it = 0; it < batches.size(); ++it) {
        const Batch b = batches.get(it);
        const ForwardCache fc = forward(params, b.features);
        const Matrix probs = softmax_rows(fc.logits);
        const Gradients g =
            backward(params, fc, probs, b.observed_labels, ones, cfg.grad_reduction);
        sgd_momentum_step(params, g, opt);
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

RunSummary run(const RunConfig& cfg) {
    Prepared p = prepare(cfg);

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
    if (!metrics) fail(ErrorCategory::io, "cannot write " + (dir / "metrics.jsonl").string());
    metrics << config_to_json(cfg) << '\n';
    std::ofstream timing(dir / "timing.jsonl", std::ios::binary);
    if (!timing) fail(ErrorCategory::io, "cannot write " + (dir / "timing.jsonl").string());

    NetworkParams params = init_network(p.dims, cfg.seed);
    OptimizerState opt = make_optimizer(params, cfg.learning_rate, cfg.momentum);

    const bool windowed = cfg.mode == RunMode::pdiff || cfg.mode == RunMode::pdiff_no_tau ||
                          cfg.mode == RunMode::pdiff_py_variant;
    const Statistic stat =
        cfg.mode == RunMode::pdiff_py_variant ? Statistic::py : Statistic::delta;
    std::optional<DiffWindow> window;
    if (windowed)
        window.emplace(p.sel.bins,
                       DiffWindow::capacity_for(p.sel.window_fraction, p.iters, cfg.batch_size),
                       stat);

    SelectorState st;
    st.phase = cfg.mode == RunMode::pdiff_no_tau ? SelectorPhase::warmup_no_tau
                                                 : SelectorPhase::warmup_known_tau;

    const auto c = static_cast<std::size_t>(p.train.num_classes);
    const auto run_start = Clock::now();
    std::vector<EpochMetrics> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));

    for (int T = 1; T <= cfg.epochs; ++T) {
        const auto epoch_start = Clock::now();
        st.epoch = T;
        EpochBatches batches(p.train, cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(T));

        double loss_sum = 0.0;
        std::size_t selected = 0;
        std::size_t processed = 0;
        std::vector<int> dropped_ids;
        std::optional<double> last_threshold;
        double last_rate = 0.0;

        for (std::size_t it = 0; it < batches.size(); ++it) {
            const Batch b = batches.get(it);

            // threshold from the window as of the previous batches
            std::optional<double> threshold;
            double rate = 0.0;
            switch (cfg.mode) {
                case RunMode::normal:
                case RunMode::clean_oracle:
                    break;
                case RunMode::pdiff:
                case RunMode::pdiff_py_variant:
                    rate = drop_rate(T, p.sel.ramp_epochs, *p.sel.tau);
                    // a zero rate keeps everything outright; consulting the
                    // window would drop values below its lowest populated bin
                    if (rate > 0.0 && window->total() >= cfg.batch_size)
                        threshold = window->threshold_for_rate(rate);
                    break;
                case RunMode::pdiff_no_tau:
                    if (st.phase == SelectorPhase::warmup_no_tau) {
                        threshold = threshold_without_tau(T, p.sel.ramp_epochs);
                    } else {
                        rate = *st.tau_est;
                        if (rate > 0.0 && window->total() >= cfg.batch_size)
                            threshold = window->threshold_for_rate(rate);
                    }
                    break;
            }
            st.current_rate = rate;
            st.delta_hat = threshold;

            const ForwardCache fc = forward(params, b.features);
            const Matrix probs = softmax_rows(fc.logits);

            std::vector<double> values(b.sample_ids.size());
            for (std::size_t s = 0; s < values.size(); ++s) {
                const int y = b.observed_labels[s];
                values[s] = stat == Statistic::delta
                                ? prob_diff(probs.row(s), c, y)
                                : probs.at(s, static_cast<std::size_t>(y));
            }

            std::vector<double> omega;
            if (cfg.mode == RunMode::normal) {
                omega.assign(values.size(), 1.0);
            } else if (cfg.mode == RunMode::clean_oracle) {
                omega.resize(values.size());
                for (std::size_t s = 0; s < omega.size(); ++s)
                    omega[s] = p.row_clean[batches.row_of(it, s)] ? 1.0 : 0.0;
            } else {
                omega = weights_for(values, threshold);
            }

            for (std::size_t s = 0; s < omega.size(); ++s) {
                if (omega[s] != 0.0) {
                    loss_sum += weighted_ce_loss(probs.row(s), c, b.observed_labels[s], 1.0);
                    ++selected;
                } else {
                    dropped_ids.push_back(b.sample_ids[s]);
                }
            }
            processed += omega.size();

            const Gradients g =
                backward(params, fc, probs, b.observed_labels, omega, cfg.grad_reduction);

            if (windowed) {
                for (std::size_t s = 0; s < values.size(); ++s)
                    window->push_one(values[s], p.row_clean[batches.row_of(it, s)] ? 1 : 0);
                if (cfg.mode == RunMode::pdiff_no_tau &&
                    st.phase == SelectorPhase::warmup_no_tau)
                    maybe_estimate_tau(st, *window, p.sel);
            }

            sgd_momentum_step(params, g, opt);
            last_threshold = threshold;
            last_rate = rate;
        }

        EpochMetrics m;
        m.epoch = T;
        m.train_loss_selected = selected > 0 ? loss_sum / static_cast<double>(selected) : 0.0;
        m.test_accuracy = evaluate(params, p.test);
        m.delta_hat = last_threshold;
        m.drop_rate = last_rate;
        m.zeta = windowed && stat == Statistic::delta && window->total() > 0 ? window->zeta()
                                                                             : 0.0;
        m.tau_est = st.tau_est;
        m.selected_fraction =
            static_cast<double>(selected) / static_cast<double>(processed);
        const DropSetScore score = score_drop_set(p.train, dropped_ids);
        m.drop_precision = score.precision;
        m.drop_recall = score.recall;
        m.wall_time_seconds = seconds_since(epoch_start);
        history.push_back(m);

        metrics << epoch_record(m).dump() << '\n';
        timing << nlohmann::json{{"record", "epoch"},
                                 {"epoch", T},
                                 {"wall_time_seconds", m.wall_time_seconds}}
                      .dump()
               << '\n';
        if (windowed && window->total() > 0 &&
            std::find(cfg.hist_epochs.begin(), cfg.hist_epochs.end(), T) !=
                cfg.hist_epochs.end())
            write_histogram_csv(*window,
                                (dir / ("hist_epoch_" + std::to_string(T) + ".csv")).string());
    }

    // no-tau fallback: if the zeta trigger never fired, report an estimate
    // from the final window without having used it for training
    std::optional<double> final_tau = st.tau_est;
    if (cfg.mode == RunMode::pdiff_no_tau && !final_tau && window->total() > 0)
        final_tau = window->fraction_below_zero();

    nlohmann::json end;
    end["record"] = "end";
    end["epochs"] = cfg.epochs;
    if (cfg.mode == RunMode::pdiff_no_tau && final_tau) end["tau_est"] = *final_tau;
    metrics << end.dump() << '\n';
    metrics.close();
    if (!metrics) fail(ErrorCategory::io, "write failed: " + (dir / "metrics.jsonl").string());

    const double total_wall = seconds_since(run_start);
    timing << nlohmann::json{{"record", "end"},
                             {"epochs", cfg.epochs},
                             {"total_wall_seconds", total_wall}}
                  .dump()
           << '\n';
    timing.close();

    RunSummary summary;
    summary.mode = run_mode_name(cfg.mode);
    summary.noise_kind = noise_kind_name(cfg.noise.kind);
    summary.noise_rate = cfg.noise.rate;
    summary.epochs = cfg.epochs;
    const auto tail = static_cast<std::size_t>(std::min(10, cfg.epochs));
    double acc = 0.0;
    for (std::size_t i = history.size() - tail; i < history.size(); ++i)
        acc += history[i].test_accuracy;
    summary.avg_test_acc_last10 = acc / static_cast<double>(tail);
    summary.final_zeta = history.back().zeta;
    summary.final_tau_est = final_tau;
    summary.total_wall_seconds = total_wall;
    write_summary(summary, (dir / "summary.json").string());

    if (cfg.save_model) save_checkpoint(params, (dir / "model").string());
    return summary;
}

std::vector<DropCurvePoint> drop_curve(const RunConfig& cfg, int probe_epoch,
                                       Statistic strategy) {
    if (probe_epoch < 1) fail(ErrorCategory::argument, "probe_epoch must be >= 1");
    Prepared p = prepare(cfg);

    NetworkParams params = init_network(p.dims, cfg.seed);
    OptimizerState opt = make_optimizer(params, cfg.learning_rate, cfg.momentum);
    for (int T = 1; T <= probe_epoch; ++T) train_normal_epoch(params, opt, p.train, cfg, T);

    // statistic over the whole training set, one full-capacity window
    DiffWindow window(p.sel.bins, p.train.size(), strategy);
    std::vector<double> values(p.train.size());
    const auto c = static_cast<std::size_t>(p.train.num_classes);
    constexpr std::size_t kChunk = 1024;
    for (std::size_t start = 0; start < p.train.size(); start += kChunk) {
        const std::size_t rows = std::min(kChunk, p.train.size() - start);
        Matrix chunk(rows, p.train.dim());
        std::copy_n(p.train.features.row(start), rows * p.train.dim(), chunk.data.data());
        const ForwardCache fc = forward(params, chunk);
        const Matrix probs = softmax_rows(fc.logits);
        for (std::size_t r = 0; r < rows; ++r) {
            const int y = p.train.observed_labels[start + r];
            values[start + r] = strategy == Statistic::delta
                                    ? prob_diff(probs.row(r), c, y)
                                    : probs.at(r, static_cast<std::size_t>(y));
            window.push_one(values[start + r], p.row_clean[start + r] ? 1 : 0);
        }
    }

    std::vector<DropCurvePoint> curve;
    for (int i = 1; i <= 19; ++i) {
        const double r = static_cast<double>(i) / 20.0;
        const double threshold = *window.threshold_for_rate(r);
        std::vector<int> dropped;
        for (std::size_t s = 0; s < values.size(); ++s)
            if (values[s] <= threshold) dropped.push_back(p.train.sample_ids[s]);
        const DropSetScore score = score_drop_set(p.train, dropped);
        curve.push_back({r, score.precision, score.dropped_count});
    }
    return curve;
}

RunSummary summarize(const std::string& metrics_path) {
    std::ifstream in(metrics_path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open " + metrics_path);

    RunSummary summary;
    std::vector<double> accuracies;
    double last_zeta = 0.0;
    std::optional<double> tau_est;
    bool saw_config = false;
    bool saw_end = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCategory::parse,
                 metrics_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        const std::string record = j.value("record", "");
        if (lineno == 1) {
            if (record != "config")
                fail(ErrorCategory::format, metrics_path + ": first record must be the config");
            saw_config = true;
            summary.mode = j.value("mode", "");
            summary.noise_kind = j.value("noise.kind", "");
            summary.noise_rate = j.value("noise.rate", 0.0);
            continue;
        }
        if (record == "epoch") {
            if (saw_end)
                fail(ErrorCategory::format, metrics_path + ": epoch record after end record");
            accuracies.push_back(j.at("test_accuracy").get<double>());
            last_zeta = j.value("zeta", 0.0);
            if (j.contains("tau_est") && !j["tau_est"].is_null())
                tau_est = j["tau_est"].get<double>();
        } else if (record == "end") {
            saw_end = true;
            const auto declared = j.at("epochs").get<std::size_t>();
            if (declared != accuracies.size())
                fail(ErrorCategory::incomplete,
                     metrics_path + ": end record declares " + std::to_string(declared) +
                         " epochs but " + std::to_string(accuracies.size()) + " are present");
            summary.epochs = static_cast<int>(declared);
            if (j.contains("tau_est") && !j["tau_est"].is_null())
                tau_est = j["tau_est"].get<double>();
        } else {
            fail(ErrorCategory::format,
                 metrics_path + ":" + std::to_string(lineno) + ": unknown record '" + record +
                     "'");
        }
    }
    if (!saw_config) fail(ErrorCategory::incomplete, metrics_path + ": empty metrics file");
    if (!saw_end)
        fail(ErrorCategory::incomplete, metrics_path + ": no end record (truncated run)");

    const std::size_t tail = std::min<std::size_t>(10, accuracies.size());
    double acc = 0.0;
    for (std::size_t i = accuracies.size() - tail; i < accuracies.size(); ++i)
        acc += accuracies[i];
    summary.avg_test_acc_last10 = tail > 0 ? acc / static_cast<double>(tail) : 0.0;
    summary.final_zeta = last_zeta;
    summary.final_tau_est = tau_est;

    const fs::path timing_path = fs::path(metrics_path).parent_path() / "timing.jsonl";
    if (fs::exists(timing_path)) {
        std::ifstream tin(timing_path, std::ios::binary);
        std::string tline;
        while (std::getline(tin, tline)) {
            if (tline.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(tline);
            } catch (const nlohmann::json::parse_error& e) {
                fail(ErrorCategory::parse, timing_path.string() + ": " + e.what());
            }
            if (j.value("record", "") == "end")
                summary.total_wall_seconds = j.value("total_wall_seconds", 0.0);
        }
    }
    return summary;
}

std::string summary_to_json(const RunSummary& s) {
    nlohmann::json j;
    j["mode"] = s.mode;
    j["noise_kind"] = s.noise_kind;
    j["noise_rate"] = s.noise_rate;
    j["epochs"] = s.epochs;
    j["avg_test_acc_last10"] = s.avg_test_acc_last10;
    j["final_zeta"] = s.final_zeta;
    j["final_tau_est"] =
        s.final_tau_est ? nlohmann::json(*s.final_tau_est) : nlohmann::json(nullptr);
    j["total_wall_seconds"] = s.total_wall_seconds;
    return j.dump(2);
}

RunSummary summary_from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::io, "cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCategory::parse, path + ": " + e.what());
    }
    RunSummary s;
    try {
        s.mode = j.at("mode").get<std::string>();
        s.noise_kind = j.at("noise_kind").get<std::string>();
        s.noise_rate = j.at("noise_rate").get<double>();
        s.epochs = j.at("epochs").get<int>();
        s.avg_test_acc_last10 = j.at("avg_test_acc_last10").get<double>();
        s.final_zeta = j.at("final_zeta").get<double>();
        if (!j.at("final_tau_est").is_null())
            s.final_tau_est = j["final_tau_est"].get<double>();
        s.total_wall_seconds = j.at("total_wall_seconds").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCategory::schema, path + ": " + e.what());
    }
    return s;
}

void write_summary(const RunSummary& summary, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write " + path);
    out << summary_to_json(summary) << '\n';
    if (!out) fail(ErrorCategory::io, "write failed: " + path);
}

std::string compare_table(const std::vector<RunSummary>& summaries) {
    if (summaries.empty()) fail(ErrorCategory::argument, "nothing to compare");
    std::ostringstream out;
    out << std::left << std::setw(18) << "mode" << std::setw(16) << "noise" << std::right
        << std::setw(14) << "acc_last10" << std::setw(10) << "tau_est" << std::setw(10)
        << "tau_err" << std::setw(10) << "wall_s" << '\n';
    for (const RunSummary& s : summaries) {
        std::ostringstream noise;
        noise << s.noise_kind << "@" << std::fixed << std::setprecision(2) << s.noise_rate;
        out << std::left << std::setw(18) << s.mode << std::setw(16) << noise.str()
            << std::right << std::fixed << std::setprecision(4) << std::setw(14)
            << s.avg_test_acc_last10;
        if (s.final_tau_est) {
            out << std::setw(10) << *s.final_tau_est << std::setw(10)
                << std::abs(*s.final_tau_est - s.noise_rate);
        } else {
            out << std::setw(10) << "-" << std::setw(10) << "-";
        }
        out << std::setprecision(2) << std::setw(10) << s.total_wall_seconds << '\n';
    }
    return out.str();
}

}  // namespace pdiff
