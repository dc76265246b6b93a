#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pdiff/matrix.hpp"

namespace pdiff {

// Features in [0,1] plus both label tracks. observed_labels is what training
// sees; true_labels is the provenance used to score selections and is never
// shown to the model. Freshly loaded/generated datasets have ids 0..N-1;
// split() parts keep their parent ids.
struct LabeledDataset {
    Matrix features;  // N x D
    std::vector<int> true_labels;
    std::vector<int> observed_labels;
    std::vector<int> sample_ids;
    int num_classes = 0;

    std::size_t size() const { return sample_ids.size(); }
    std::size_t dim() const { return features.cols; }

    // Checks the structural invariants; throws on violation.
    void validate() const;
};

// id -> row index lookup for datasets whose ids are not contiguous.
std::unordered_map<int, std::size_t> id_index(const LabeledDataset& ds);

struct Batch {
    std::vector<int> sample_ids;
    Matrix features;  // S x D
    std::vector<int> observed_labels;
};

struct BlobSpec {
    int num_classes = 2;
    std::size_t dim = 2;
    std::size_t samples_per_class = 100;
    double center_spread = 1.0;
    double cluster_std = 0.1;
};

// MNIST-format IDX pair (big-endian magics 0x803 / 0x801). Pixels are scaled
// to [0,1] by /255; the class count is pinned to 10.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// CSV with a header row; every non-label column numeric, min-max normalized
// per column to [0,1] (constant columns collapse to 0).
LabeledDataset load_csv(const std::string& path, const std::string& label_column);

// Gaussian clusters, one per class, deterministically placed from (seed,
// class, center_spread), then globally rescaled and clamped into [0,1].
LabeledDataset gen_blobs(const BlobSpec& spec, std::uint64_t seed);

// Seeded-permutation split; parts are disjoint and keep parent ids in
// ascending order. Throws if either part would be empty.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        double test_fraction,
                                                        std::uint64_t seed);

// First n samples in current order (deterministic subset helper).
LabeledDataset take_first(const LabeledDataset& ds, std::size_t n);

// One epoch's mini-batches: a (seed, epoch)-keyed reshuffle cut into
// floor(N / batch_size) full batches; the trailing partial batch is dropped
// so the batch size is constant for the whole run.
class EpochBatches {
public:
    EpochBatches(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed,
                 std::uint64_t epoch);

    std::size_t size() const { return num_batches_; }
    std::size_t batch_size() const { return batch_size_; }
    Batch get(std::size_t i) const;
    // Row index into the dataset for batch i, slot j.
    std::size_t row_of(std::size_t i, std::size_t j) const { return order_[i * batch_size_ + j]; }

private:
    const LabeledDataset* ds_;
    std::size_t batch_size_;
    std::size_t num_batches_;
    std::vector<std::size_t> order_;  // permuted row indices
};

// Audit export: one line per sample, columns id,true_label,observed_label.
void export_labels_csv(const LabeledDataset& ds, const std::string& path);

}  // namespace pdiff
