#include "pdiff/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "pdiff/error.hpp"
#include "pdiff/rng.hpp"

namespace pdiff {

namespace {
constexpr std::uint64_t kStreamFlipSet = 401;
constexpr std::uint64_t kStreamFlipTarget = 402;
}  // namespace

const char* noise_kind_name(NoiseKind k) {
    return k == NoiseKind::symmetry ? "symmetry" : "pair";
}

NoiseKind parse_noise_kind(const std::string& s) {
    if (s == "symmetry") return NoiseKind::symmetry;
    if (s == "pair") return NoiseKind::pair;
    fail(ErrorCategory::config, "unknown noise kind '" + s + "' (expected symmetry or pair)");
}

Matrix build_transition_matrix(NoiseKind kind, double tau, int num_classes) {
    if (num_classes < 2) fail(ErrorCategory::argument, "transition matrix needs C >= 2");
    if (!(tau >= 0.0 && tau < 1.0))
        fail(ErrorCategory::argument, "noise rate must be in [0,1), got " + std::to_string(tau));

    const std::size_t c = static_cast<std::size_t>(num_classes);
    Matrix t(c, c);
    if (kind == NoiseKind::symmetry) {
        const double off = tau / static_cast<double>(num_classes - 1);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j) t.at(i, j) = i == j ? 1.0 - tau : off;
    } else {
        for (std::size_t i = 0; i < c; ++i) {
            t.at(i, i) = 1.0 - tau;
            t.at(i, (i + 1) % c) = tau;
        }
    }
    return t;
}

LabeledDataset corrupt(const LabeledDataset& ds, const NoiseSpec& spec, std::uint64_t seed) {
    if (!(spec.rate >= 0.0 && spec.rate < 1.0))
        fail(ErrorCategory::argument,
             "noise rate must be in [0,1), got " + std::to_string(spec.rate));
    if (ds.observed_labels != ds.true_labels)
        fail(ErrorCategory::state, "dataset is already corrupted");

    const std::size_t n = ds.size();
    const auto num_flips = static_cast<std::size_t>(std::floor(spec.rate * double(n)));

    LabeledDataset out = ds;
    if (num_flips == 0) return out;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng set_rng(derive_seed(seed, kStreamFlipSet));
    set_rng.shuffle(perm);

    Rng target_rng(derive_seed(seed, kStreamFlipTarget));
    const int c = ds.num_classes;
    for (std::size_t k = 0; k < num_flips; ++k) {
        const std::size_t i = perm[k];
        const int y = out.true_labels[i];
        if (spec.kind == NoiseKind::pair) {
            out.observed_labels[i] = (y + 1) % c;
        } else {
            // uniform over the C-1 classes other than y
            const auto draw = static_cast<int>(target_rng.uniform_index(std::uint64_t(c - 1)));
            out.observed_labels[i] = draw >= y ? draw + 1 : draw;
        }
    }
    return out;
}

DropSetScore score_drop_set(const LabeledDataset& ds, const std::vector<int>& dropped_ids) {
    const auto index = id_index(ds);
    std::unordered_set<int> seen;
    seen.reserve(dropped_ids.size());

    std::size_t dropped_noisy = 0;
    for (int id : dropped_ids) {
        const auto it = index.find(id);
        if (it == index.end())
            fail(ErrorCategory::argument, "unknown sample id " + std::to_string(id));
        if (!seen.insert(id).second)
            fail(ErrorCategory::argument, "duplicate sample id " + std::to_string(id));
        if (ds.observed_labels[it->second] != ds.true_labels[it->second]) ++dropped_noisy;
    }

    std::size_t total_noisy = 0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.observed_labels[i] != ds.true_labels[i]) ++total_noisy;

    DropSetScore score;
    score.dropped_count = dropped_ids.size();
    score.precision = dropped_ids.empty()
                          ? 0.0
                          : double(dropped_noisy) / double(dropped_ids.size());
    score.recall = total_noisy == 0 ? 1.0 : double(dropped_noisy) / double(total_noisy);
    return score;
}

}  // namespace pdiff
