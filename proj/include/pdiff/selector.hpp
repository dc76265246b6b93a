#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pdiff {

// Per-sample statistic the selection histogram is built over.
//   delta: p_y minus the largest other-class probability, in [-1,1]
//   py:    p_y itself, in [0,1]
enum class Statistic { delta, py };

const char* statistic_name(Statistic s);
Statistic parse_statistic(const std::string& s);

struct SelectorConfig {
    int bins = 200;                    // H
    double window_fraction = 0.2;      // M: fraction of an epoch's batches; 0 = current batch only
    int ramp_epochs = 20;              // T_k
    std::optional<double> tau;         // known noise rate; absent = estimate
    double zeta_threshold = 0.9;
    std::size_t batch_size = 128;
    std::size_t iters_per_epoch = 0;

    void validate() const;
};

double prob_diff(const double* probs, std::size_t c, int y);
double prob_diff(const std::vector<double>& probs, int y);

// Bin rule for delta in [-1,1]: x = ceil(H*(delta+1)/2), clamped to [1,H]
// (the raw formula gives 0 at delta = -1).
int bin_of(double delta, int bins);
// Lower edge of bin x: 2*(x-1)/H - 1.
double bin_lower_edge(int x, int bins);

// Same pair for the p_y statistic on [0,1]: x = ceil(H*p), edge (x-1)/H.
int bin_of_py(double p, int bins);
double bin_lower_edge_py(int x, int bins);

// FIFO ring of recent statistic values with an incrementally maintained
// H-bin histogram, optionally split by the clean/noisy ground-truth flag.
class DiffWindow {
public:
    // clean flag per entry: -1 unknown, 0 noisy, 1 clean
    struct Entry {
        double value;
        int bin;
        std::int8_t clean;
    };

    DiffWindow(int bins, std::size_t capacity, Statistic stat = Statistic::delta);

    static std::size_t capacity_for(double window_fraction, std::size_t iters_per_epoch,
                                    std::size_t batch_size);

    void push_one(double value, int clean = -1);
    void push(const std::vector<double>& values);
    void push(const std::vector<double>& values, const std::vector<bool>& clean);

    std::size_t total() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool full() const { return entries_.size() == capacity_; }
    int bins() const { return bins_; }
    Statistic statistic() const { return stat_; }

    // bin x lives at index x-1
    const std::vector<std::size_t>& bin_counts() const { return counts_; }
    const std::vector<std::size_t>& clean_counts() const { return clean_counts_; }
    const std::vector<std::size_t>& noise_counts() const { return noise_counts_; }

    std::vector<double> pdf() const;  // counts/total
    std::vector<double> pcf() const;  // cumulative pdf

    // Smallest bin x with pcf[x] > rate, as its lower edge. Empty window
    // yields nullopt, the keep-everything sentinel.
    std::optional<double> threshold_for_rate(double rate) const;

    // Expected |bin lower edge| under the pdf (delta statistic only).
    double zeta() const;

    // Fraction of buffered raw values strictly below zero.
    double fraction_below_zero() const;

    // Buffer contents oldest-first; the from-scratch oracle input.
    std::vector<double> buffered() const;
    std::vector<Entry> buffered_entries() const;

private:
    double lower_edge(int x) const;

    int bins_;
    std::size_t capacity_;
    Statistic stat_;
    std::vector<Entry> entries_;  // ring once full
    std::size_t next_ = 0;        // ring write position
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> clean_counts_;
    std::vector<std::size_t> noise_counts_;
};

// R(T) = tau * min(T/T_k, 1)
double drop_rate(int epoch, int ramp_epochs, double tau);

// Warmup threshold when tau is unknown: min(T/T_k, 1) - 1.
double threshold_without_tau(int epoch, int ramp_epochs);

// omega = 1 iff value > threshold (strict); no threshold keeps everything.
std::vector<double> weights_for(const std::vector<double>& values,
                                std::optional<double> threshold);

enum class SelectorPhase { warmup_known_tau, warmup_no_tau, estimated };

const char* phase_name(SelectorPhase p);

struct SelectorState {
    SelectorPhase phase = SelectorPhase::warmup_known_tau;
    std::optional<double> delta_hat;  // nullopt = keep everything
    double current_rate = 0.0;
    double zeta = 0.0;
    std::optional<double> tau_est;
    int epoch = 1;
};

// One-shot noise-rate estimation: in the no-tau warmup phase, once the epoch
// has reached ramp_epochs, the window is full, and zeta exceeds the
// threshold, tau_est becomes the windowed fraction of values < 0 and the
// phase flips to `estimated`. Calling in any other phase is a state error.
void maybe_estimate_tau(SelectorState& state, const DiffWindow& window,
                        const SelectorConfig& config);

}  // namespace pdiff
