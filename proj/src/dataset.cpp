#include "pdiff/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "pdiff/error.hpp"
#include "pdiff/rng.hpp"

namespace pdiff {

namespace {

// Stream tags for derive_seed; keep stable, they are part of the
// reproducibility contract.
constexpr std::uint64_t kStreamBlobCenters = 101;
constexpr std::uint64_t kStreamBlobSamples = 102;
constexpr std::uint64_t kStreamSplit = 201;
constexpr std::uint64_t kStreamBatches = 301;

std::uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) fail(ErrorCategory::io, "truncated file: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

std::vector<unsigned char> read_bytes(std::istream& in, std::size_t n, const std::string& path) {
    std::vector<unsigned char> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
        fail(ErrorCategory::io, "truncated file: " + path);
    return buf;
}

LabeledDataset subset_rows(const LabeledDataset& ds, const std::vector<std::size_t>& rows) {
    LabeledDataset out;
    out.num_classes = ds.num_classes;
    out.features = Matrix(rows.size(), ds.dim());
    out.true_labels.reserve(rows.size());
    out.observed_labels.reserve(rows.size());
    out.sample_ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        std::copy_n(ds.features.row(r), ds.dim(), out.features.row(i));
        out.true_labels.push_back(ds.true_labels[r]);
        out.observed_labels.push_back(ds.observed_labels[r]);
        out.sample_ids.push_back(ds.sample_ids[r]);
    }
    return out;
}

}  // namespace

void LabeledDataset::validate() const {
    const std::size_t n = sample_ids.size();
    if (n == 0) fail(ErrorCategory::consistency, "dataset is empty");
    if (true_labels.size() != n || observed_labels.size() != n || features.rows != n)
        fail(ErrorCategory::consistency, "dataset arrays have mismatched lengths");
    if (num_classes < 2) fail(ErrorCategory::consistency, "num_classes must be >= 2");
    std::unordered_set<int> seen;
    seen.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (true_labels[i] < 0 || true_labels[i] >= num_classes ||
            observed_labels[i] < 0 || observed_labels[i] >= num_classes)
            fail(ErrorCategory::consistency,
                 "label out of range at row " + std::to_string(i));
        if (!seen.insert(sample_ids[i]).second)
            fail(ErrorCategory::consistency,
                 "duplicate sample id " + std::to_string(sample_ids[i]));
    }
    for (double v : features.data)
        if (!(v >= 0.0 && v <= 1.0))
            fail(ErrorCategory::consistency, "feature value outside [0,1]");
}

std::unordered_map<int, std::size_t> id_index(const LabeledDataset& ds) {
    std::unordered_map<int, std::size_t> map;
    map.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) map.emplace(ds.sample_ids[i], i);
    return map;
}

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) fail(ErrorCategory::io, "cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) fail(ErrorCategory::io, "cannot open " + labels_path);

    const std::uint32_t img_magic = read_be_u32(img, images_path);
    if (img_magic != 0x00000803u)
        fail(ErrorCategory::format, images_path + ": bad image magic " + std::to_string(img_magic));
    const std::uint32_t lab_magic = read_be_u32(lab, labels_path);
    if (lab_magic != 0x00000801u)
        fail(ErrorCategory::format, labels_path + ": bad label magic " + std::to_string(lab_magic));

    const std::uint32_t n_images = read_be_u32(img, images_path);
    const std::uint32_t rows = read_be_u32(img, images_path);
    const std::uint32_t cols = read_be_u32(img, images_path);
    const std::uint32_t n_labels = read_be_u32(lab, labels_path);
    if (n_images != n_labels)
        fail(ErrorCategory::consistency, "image/label count mismatch: " + std::to_string(n_images) +
                                             " vs " + std::to_string(n_labels));
    if (n_images == 0) fail(ErrorCategory::consistency, "empty IDX pair");

    const std::size_t d = std::size_t(rows) * cols;
    const auto pixels = read_bytes(img, std::size_t(n_images) * d, images_path);
    const auto labels = read_bytes(lab, n_labels, labels_path);

    LabeledDataset ds;
    ds.num_classes = 10;
    ds.features = Matrix(n_images, d);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.features.data[i] = static_cast<double>(pixels[i]) / 255.0;
    ds.true_labels.reserve(n_images);
    for (std::size_t i = 0; i < n_labels; ++i) {
        if (labels[i] >= 10)
            fail(ErrorCategory::consistency,
                 labels_path + ": label " + std::to_string(int(labels[i])) + " outside [0,10)");
        ds.true_labels.push_back(int(labels[i]));
    }
    ds.observed_labels = ds.true_labels;
    ds.sample_ids.resize(n_images);
    std::iota(ds.sample_ids.begin(), ds.sample_ids.end(), 0);
    return ds;
}

LabeledDataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::io, "cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) fail(ErrorCategory::parse, path + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto split_fields = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::stringstream ss(s);
        while (std::getline(ss, cur, ',')) {
            // trim surrounding whitespace
            const auto b = cur.find_first_not_of(" \t");
            const auto e = cur.find_last_not_of(" \t");
            out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
        }
        if (!s.empty() && s.back() == ',') out.push_back("");
        return out;
    };

    const std::vector<std::string> header = split_fields(line);
    std::size_t label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) label_col = i;
    if (label_col == header.size())
        fail(ErrorCategory::schema, path + ": no column named '" + label_column + "'");

    const std::size_t d = header.size() - 1;
    std::vector<double> values;
    std::vector<int> labels;
    std::size_t row = 1;  // 1-based, header is row 0
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != header.size())
            fail(ErrorCategory::parse, path + ": row " + std::to_string(row) + " has " +
                                           std::to_string(fields.size()) + " fields, expected " +
                                           std::to_string(header.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const std::string& cell = fields[c];
            double v = 0.0;
            const auto res =
                std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                fail(ErrorCategory::parse, path + ": non-numeric cell '" + cell + "' at row " +
                                               std::to_string(row) + ", column '" + header[c] +
                                               "'");
            if (c == label_col) {
                const double rounded = std::floor(v);
                if (rounded != v || v < 0.0)
                    fail(ErrorCategory::parse, path + ": label '" + cell + "' at row " +
                                                   std::to_string(row) +
                                                   " is not a non-negative integer");
                labels.push_back(static_cast<int>(v));
            } else {
                values.push_back(v);
            }
        }
        ++row;
    }
    if (labels.empty()) fail(ErrorCategory::parse, path + ": no data rows");

    const std::size_t n = labels.size();
    LabeledDataset ds;
    ds.features = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) ds.features.at(i, c) = values[i * d + c];

    // per-column min-max to [0,1]; constant columns collapse to 0
    for (std::size_t c = 0; c < d; ++c) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, ds.features.at(i, c));
            hi = std::max(hi, ds.features.at(i, c));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double& v = ds.features.at(i, c);
            v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
            v = std::clamp(v, 0.0, 1.0);
        }
    }

    ds.true_labels = labels;
    ds.observed_labels = labels;
    ds.sample_ids.resize(n);
    std::iota(ds.sample_ids.begin(), ds.sample_ids.end(), 0);
    ds.num_classes = std::max(2, *std::max_element(labels.begin(), labels.end()) + 1);
    ds.validate();
    return ds;
}

LabeledDataset gen_blobs(const BlobSpec& spec, std::uint64_t seed) {
    if (spec.num_classes < 2) fail(ErrorCategory::argument, "blobs: num_classes must be >= 2");
    if (spec.dim < 1) fail(ErrorCategory::argument, "blobs: dim must be >= 1");
    if (spec.samples_per_class < 1)
        fail(ErrorCategory::argument, "blobs: samples_per_class must be >= 1");
    if (!(spec.cluster_std > 0.0)) fail(ErrorCategory::argument, "blobs: cluster_std must be > 0");
    if (!(spec.center_spread > 0.0))
        fail(ErrorCategory::argument, "blobs: center_spread must be > 0");

    const std::size_t n = std::size_t(spec.num_classes) * spec.samples_per_class;
    LabeledDataset ds;
    ds.num_classes = spec.num_classes;
    ds.features = Matrix(n, spec.dim);
    ds.true_labels.reserve(n);

    std::size_t r = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        Rng center_rng(derive_seed(seed, kStreamBlobCenters, std::uint64_t(c)));
        std::vector<double> center(spec.dim);
        for (auto& v : center) v = spec.center_spread * center_rng.gaussian();

        Rng sample_rng(derive_seed(seed, kStreamBlobSamples, std::uint64_t(c)));
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++r) {
            double* row = ds.features.row(r);
            for (std::size_t dcol = 0; dcol < spec.dim; ++dcol)
                row[dcol] = center[dcol] + spec.cluster_std * sample_rng.gaussian();
            ds.true_labels.push_back(c);
        }
    }

    // one global affine map onto [0,1] so the cluster geometry is preserved
    const auto [lo_it, hi_it] =
        std::minmax_element(ds.features.data.begin(), ds.features.data.end());
    const double lo = *lo_it, hi = *hi_it;
    for (double& v : ds.features.data) {
        v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        v = std::clamp(v, 0.0, 1.0);
    }

    ds.observed_labels = ds.true_labels;
    ds.sample_ids.resize(n);
    std::iota(ds.sample_ids.begin(), ds.sample_ids.end(), 0);
    return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds,
                                                        double test_fraction,
                                                        std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        fail(ErrorCategory::argument, "test_fraction must be in (0,1)");
    const std::size_t n = ds.size();
    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n)
        fail(ErrorCategory::argument, "test_fraction " + std::to_string(test_fraction) +
                                          " produces an empty part for N=" + std::to_string(n));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, kStreamSplit));
    rng.shuffle(perm);

    std::vector<std::size_t> test_rows(perm.begin(), perm.begin() + n_test);
    std::vector<std::size_t> train_rows(perm.begin() + n_test, perm.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    return {subset_rows(ds, train_rows), subset_rows(ds, test_rows)};
}

LabeledDataset take_first(const LabeledDataset& ds, std::size_t n) {
    if (n == 0 || n > ds.size())
        fail(ErrorCategory::argument, "take_first: n=" + std::to_string(n) + " out of range");
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    return subset_rows(ds, rows);
}

EpochBatches::EpochBatches(const LabeledDataset& ds, std::size_t batch_size, std::uint64_t seed,
                           std::uint64_t epoch)
    : ds_(&ds), batch_size_(batch_size) {
    if (batch_size == 0 || batch_size > ds.size())
        fail(ErrorCategory::argument,
             "batch_size " + std::to_string(batch_size) + " out of range for N=" +
                 std::to_string(ds.size()));
    order_.resize(ds.size());
    std::iota(order_.begin(), order_.end(), 0);
    Rng rng(derive_seed(seed, kStreamBatches, epoch));
    rng.shuffle(order_);
    num_batches_ = ds.size() / batch_size;
}

Batch EpochBatches::get(std::size_t i) const {
    if (i >= num_batches_) fail(ErrorCategory::argument, "batch index out of range");
    Batch b;
    b.features = Matrix(batch_size_, ds_->dim());
    b.sample_ids.reserve(batch_size_);
    b.observed_labels.reserve(batch_size_);
    for (std::size_t j = 0; j < batch_size_; ++j) {
        const std::size_t r = order_[i * batch_size_ + j];
        std::copy_n(ds_->features.row(r), ds_->dim(), b.features.row(j));
        b.sample_ids.push_back(ds_->sample_ids[r]);
        b.observed_labels.push_back(ds_->observed_labels[r]);
    }
    return b;
}

void export_labels_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::io, "cannot write " + path);
    out << "id,true_label,observed_label\n";
    for (std::size_t i = 0; i < ds.size(); ++i)
        out << ds.sample_ids[i] << ',' << ds.true_labels[i] << ',' << ds.observed_labels[i]
            << '\n';
    if (!out) fail(ErrorCategory::io, "write failed: " + path);
}

}  // namespace pdiff
