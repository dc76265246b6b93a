#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pdiff/dataset.hpp"
#include "pdiff/matrix.hpp"

namespace pdiff {

enum class NoiseKind { symmetry, pair };

const char* noise_kind_name(NoiseKind k);
NoiseKind parse_noise_kind(const std::string& s);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::symmetry;
    double rate = 0.0;  // tau in [0,1)
};

// Row-stochastic label transition matrix.
//   symmetry: diagonal 1-tau, every off-diagonal tau/(C-1)
//   pair:     diagonal 1-tau, entry (i, (i+1) mod C) = tau
Matrix build_transition_matrix(NoiseKind kind, double tau, int num_classes);

// Flips the observed labels of exactly floor(tau*N) samples, chosen by a
// seeded permutation. True labels are untouched. Refuses datasets that were
// already corrupted.
LabeledDataset corrupt(const LabeledDataset& ds, const NoiseSpec& spec, std::uint64_t seed);

struct DropSetScore {
    double precision = 0.0;  // fraction of dropped samples that are truly noisy
    double recall = 0.0;     // fraction of truly noisy samples that were dropped
    std::size_t dropped_count = 0;
};

// Scores a drop set against ground truth. Empty drop set scores precision 0;
// a dataset with no noise scores recall 1.
DropSetScore score_drop_set(const LabeledDataset& ds, const std::vector<int>& dropped_ids);

}  // namespace pdiff
