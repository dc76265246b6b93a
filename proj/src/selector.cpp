#include "pdiff/selector.hpp"

#include <algorithm>
#include <cmath>

#include "pdiff/error.hpp"

namespace pdiff {

const char* statistic_name(Statistic s) { return s == Statistic::delta ? "delta" : "py"; }

Statistic parse_statistic(const std::string& s) {
    if (s == "delta") return Statistic::delta;
    if (s == "py") return Statistic::py;
    fail(ErrorCategory::config, "unknown statistic '" + s + "' (expected delta or py)");
}

void SelectorConfig::validate() const {
    if (bins < 2 || bins % 2 != 0)
        fail(ErrorCategory::config, "selector.bins must be an even integer >= 2");
    if (!(window_fraction >= 0.0 && window_fraction <= 1.0))
        fail(ErrorCategory::config, "selector.window_fraction must be in [0,1]");
    if (ramp_epochs < 1) fail(ErrorCategory::config, "selector.ramp_epochs must be >= 1");
    if (tau && !(*tau >= 0.0 && *tau < 1.0))
        fail(ErrorCategory::config, "selector.tau must be in [0,1)");
    if (!(zeta_threshold > 0.0 && zeta_threshold <= 1.0))
        fail(ErrorCategory::config, "selector.zeta_threshold must be in (0,1]");
    if (batch_size < 1) fail(ErrorCategory::config, "batch_size must be >= 1");
    if (iters_per_epoch < 1) fail(ErrorCategory::config, "iters_per_epoch must be >= 1");
}

double prob_diff(const double* probs, std::size_t c, int y) {
    if (c < 2) fail(ErrorCategory::argument, "prob_diff needs at least 2 classes");
    if (y < 0 || static_cast<std::size_t>(y) >= c)
        fail(ErrorCategory::argument, "label " + std::to_string(y) + " out of range");
    double other = -1.0;
    for (std::size_t m = 0; m < c; ++m)
        if (m != static_cast<std::size_t>(y)) other = std::max(other, probs[m]);
    return probs[y] - other;
}

double prob_diff(const std::vector<double>& probs, int y) {
    return prob_diff(probs.data(), probs.size(), y);
}

// The bin boundaries are decimal values most doubles cannot hit exactly; a
// value within kEdgeSnap of a boundary (in scaled units) is treated as lying
// on it, keeping the half-open (lower, upper] ranges faithful for inputs like
// 0.1 whose nearest double sits a few ulps past the boundary.
constexpr double kEdgeSnap = 1e-9;

int bin_of(double delta, int bins) {
    if (!(delta >= -1.0 && delta <= 1.0))
        fail(ErrorCategory::argument, "delta " + std::to_string(delta) + " outside [-1,1]");
    const auto x = static_cast<int>(std::ceil(bins * (delta + 1.0) / 2.0 - kEdgeSnap));
    return std::clamp(x, 1, bins);
}

double bin_lower_edge(int x, int bins) {
    if (x < 1 || x > bins) fail(ErrorCategory::argument, "bin index out of range");
    return 2.0 * (x - 1) / bins - 1.0;
}

int bin_of_py(double p, int bins) {
    if (!(p >= 0.0 && p <= 1.0))
        fail(ErrorCategory::argument, "p_y " + std::to_string(p) + " outside [0,1]");
    const auto x = static_cast<int>(std::ceil(bins * p - kEdgeSnap));
    return std::clamp(x, 1, bins);
}

double bin_lower_edge_py(int x, int bins) {
    if (x < 1 || x > bins) fail(ErrorCategory::argument, "bin index out of range");
    return static_cast<double>(x - 1) / bins;
}

DiffWindow::DiffWindow(int bins, std::size_t capacity, Statistic stat)
    : bins_(bins), capacity_(capacity), stat_(stat) {
    if (bins < 2 || bins % 2 != 0)
        fail(ErrorCategory::argument, "histogram needs an even bin count >= 2");
    if (capacity < 1) fail(ErrorCategory::argument, "window capacity must be >= 1");
    counts_.assign(static_cast<std::size_t>(bins), 0);
    clean_counts_.assign(static_cast<std::size_t>(bins), 0);
    noise_counts_.assign(static_cast<std::size_t>(bins), 0);
    entries_.reserve(capacity);
}

std::size_t DiffWindow::capacity_for(double window_fraction, std::size_t iters_per_epoch,
                                     std::size_t batch_size) {
    if (!(window_fraction >= 0.0 && window_fraction <= 1.0))
        fail(ErrorCategory::argument, "window fraction must be in [0,1]");
    if (batch_size < 1 || iters_per_epoch < 1)
        fail(ErrorCategory::argument, "batch size and iters per epoch must be >= 1");
    const auto batches = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(window_fraction * static_cast<double>(iters_per_epoch))));
    return batches * batch_size;
}

double DiffWindow::lower_edge(int x) const {
    return stat_ == Statistic::delta ? bin_lower_edge(x, bins_) : bin_lower_edge_py(x, bins_);
}

void DiffWindow::push_one(double value, int clean) {
    const int bin = stat_ == Statistic::delta ? bin_of(value, bins_) : bin_of_py(value, bins_);
    if (entries_.size() == capacity_) {
        Entry& old = entries_[next_];
        --counts_[old.bin - 1];
        if (old.clean == 1) --clean_counts_[old.bin - 1];
        if (old.clean == 0) --noise_counts_[old.bin - 1];
        old = Entry{value, bin, static_cast<std::int8_t>(clean)};
    } else {
        entries_.push_back(Entry{value, bin, static_cast<std::int8_t>(clean)});
    }
    next_ = (next_ + 1) % capacity_;
    ++counts_[bin - 1];
    if (clean == 1) ++clean_counts_[bin - 1];
    if (clean == 0) ++noise_counts_[bin - 1];
}

void DiffWindow::push(const std::vector<double>& values) {
    for (double v : values) push_one(v);
}

void DiffWindow::push(const std::vector<double>& values, const std::vector<bool>& clean) {
    if (values.size() != clean.size())
        fail(ErrorCategory::argument, "values/clean flag length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) push_one(values[i], clean[i] ? 1 : 0);
}

std::vector<double> DiffWindow::pdf() const {
    if (entries_.empty()) fail(ErrorCategory::state, "pdf of an empty window");
    std::vector<double> out(counts_.size());
    const double n = static_cast<double>(entries_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i)
        out[i] = static_cast<double>(counts_[i]) / n;
    return out;
}

std::vector<double> DiffWindow::pcf() const {
    if (entries_.empty()) fail(ErrorCategory::state, "pcf of an empty window");
    std::vector<double> out(counts_.size());
    const double n = static_cast<double>(entries_.size());
    std::size_t cum = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        cum += counts_[i];
        out[i] = static_cast<double>(cum) / n;
    }
    return out;
}

std::optional<double> DiffWindow::threshold_for_rate(double rate) const {
    if (entries_.empty()) return std::nullopt;
    if (!(rate >= 0.0 && rate < 1.0))
        fail(ErrorCategory::argument, "drop rate must be in [0,1)");
    // smallest x with cum_count(x)/total > rate; integer counts keep the
    // comparison exact up to the single rate*total product
    const double bar = rate * static_cast<double>(entries_.size());
    std::size_t cum = 0;
    for (int x = 1; x <= bins_; ++x) {
        cum += counts_[static_cast<std::size_t>(x - 1)];
        if (static_cast<double>(cum) > bar) return lower_edge(x);
    }
    // unreachable: cum reaches total and rate < 1
    fail(ErrorCategory::state, "cumulative histogram never exceeded the drop rate");
}

double DiffWindow::zeta() const {
    if (stat_ != Statistic::delta)
        fail(ErrorCategory::state, "zeta is defined for the delta statistic only");
    if (entries_.empty()) fail(ErrorCategory::state, "zeta of an empty window");
    double acc = 0.0;
    for (int x = 1; x <= bins_; ++x)
        acc += std::abs(bin_lower_edge(x, bins_)) *
               static_cast<double>(counts_[static_cast<std::size_t>(x - 1)]);
    return acc / static_cast<double>(entries_.size());
}

double DiffWindow::fraction_below_zero() const {
    if (entries_.empty()) fail(ErrorCategory::state, "empty window");
    std::size_t below = 0;
    for (const Entry& e : entries_)
        if (e.value < 0.0) ++below;
    return static_cast<double>(below) / static_cast<double>(entries_.size());
}

std::vector<double> DiffWindow::buffered() const {
    std::vector<double> out;
    out.reserve(entries_.size());
    for (const Entry& e : buffered_entries()) out.push_back(e.value);
    return out;
}

std::vector<DiffWindow::Entry> DiffWindow::buffered_entries() const {
    std::vector<Entry> out;
    out.reserve(entries_.size());
    if (entries_.size() == capacity_) {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            out.push_back(entries_[(next_ + i) % capacity_]);
    } else {
        out = entries_;
    }
    return out;
}

double drop_rate(int epoch, int ramp_epochs, double tau) {
    if (epoch < 1) fail(ErrorCategory::argument, "epoch must be >= 1");
    if (ramp_epochs < 1) fail(ErrorCategory::argument, "ramp epochs must be >= 1");
    return tau * std::min(static_cast<double>(epoch) / ramp_epochs, 1.0);
}

double threshold_without_tau(int epoch, int ramp_epochs) {
    if (epoch < 1) fail(ErrorCategory::argument, "epoch must be >= 1");
    if (ramp_epochs < 1) fail(ErrorCategory::argument, "ramp epochs must be >= 1");
    return std::min(static_cast<double>(epoch) / ramp_epochs, 1.0) - 1.0;
}

std::vector<double> weights_for(const std::vector<double>& values,
                                std::optional<double> threshold) {
    std::vector<double> out(values.size(), 1.0);
    if (!threshold) return out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = values[i] > *threshold ? 1.0 : 0.0;
    return out;
}

const char* phase_name(SelectorPhase p) {
    switch (p) {
        case SelectorPhase::warmup_known_tau: return "warmup_known_tau";
        case SelectorPhase::warmup_no_tau: return "warmup_no_tau";
        case SelectorPhase::estimated: return "estimated";
    }
    return "unknown";
}

void maybe_estimate_tau(SelectorState& state, const DiffWindow& window,
                        const SelectorConfig& config) {
    if (state.phase != SelectorPhase::warmup_no_tau)
        fail(ErrorCategory::state,
             std::string("tau estimation requires the no-tau warmup phase, not ") +
                 phase_name(state.phase));
    if (state.epoch < config.ramp_epochs || !window.full()) return;
    const double z = window.zeta();
    state.zeta = z;
    if (z > config.zeta_threshold) {
        state.tau_est = window.fraction_below_zero();
        state.phase = SelectorPhase::estimated;
    }
}

}  // namespace pdiff
