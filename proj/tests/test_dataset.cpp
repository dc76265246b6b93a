#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <set>

#include "pdiff/dataset.hpp"
#include "pdiff/error.hpp"
#include "testutil.hpp"

using namespace pdiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pdiff_dataset_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("idx roundtrip restores pixels and labels") {
    TempDir tmp;
    const std::vector<unsigned char> pixels = {0, 51, 102, 153, 204, 255};
    const std::vector<unsigned char> labels = {3, 9};
    testutil::write_idx_images(tmp.file("img"), pixels, 2, 1, 3);
    testutil::write_idx_labels(tmp.file("lab"), labels);

    const LabeledDataset ds = load_idx(tmp.file("img"), tmp.file("lab"));
    CHECK(ds.size() == 2);
    CHECK(ds.dim() == 3);
    CHECK(ds.num_classes == 10);
    CHECK(ds.true_labels == std::vector<int>{3, 9});
    CHECK(ds.observed_labels == ds.true_labels);
    CHECK(ds.sample_ids == std::vector<int>{0, 1});
    CHECK(ds.features.at(0, 0) == 0.0);
    CHECK(ds.features.at(0, 1) == doctest::Approx(51.0 / 255.0));
    CHECK(ds.features.at(1, 2) == 1.0);
    ds.validate();
}

TEST_CASE("idx loader rejects malformed inputs") {
    TempDir tmp;
    const std::vector<unsigned char> pixels(12, 7);
    testutil::write_idx_images(tmp.file("img"), pixels, 4, 1, 3);
    testutil::write_idx_labels(tmp.file("lab4"), {0, 1, 2, 3});
    testutil::write_idx_labels(tmp.file("lab3"), {0, 1, 2});

    CHECK_THROWS_WITH_AS(load_idx(tmp.file("missing"), tmp.file("lab4")),
                         doctest::Contains("io error"), Error);
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("img"), tmp.file("lab3")),
                         doctest::Contains("consistency error"), Error);

    // labels file posing as images: wrong magic
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("lab4"), tmp.file("lab4")),
                         doctest::Contains("format error"), Error);

    // truncated pixel payload
    {
        std::ofstream out(tmp.file("short"), std::ios::binary);
        testutil::write_be_u32(out, 0x00000803u);
        testutil::write_be_u32(out, 4);
        testutil::write_be_u32(out, 1);
        testutil::write_be_u32(out, 3);
        out.put(char(1));
    }
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("short"), tmp.file("lab4")),
                         doctest::Contains("truncated"), Error);

    // label value outside [0,10)
    testutil::write_idx_labels(tmp.file("labx"), {0, 1, 12, 3});
    CHECK_THROWS_WITH_AS(load_idx(tmp.file("img"), tmp.file("labx")),
                         doctest::Contains("outside [0,10)"), Error);
}

TEST_CASE("csv loader normalizes columns to [0,1]") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("d.csv"));
        out << "f1,label,f2\n"
            << "0,1,5\n"
            << "10,0,5\n"
            << "5,1,5\n";
    }
    const LabeledDataset ds = load_csv(tmp.file("d.csv"), "label");
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    CHECK(ds.num_classes == 2);
    CHECK(ds.true_labels == std::vector<int>{1, 0, 1});
    CHECK(ds.features.at(0, 0) == 0.0);
    CHECK(ds.features.at(1, 0) == 1.0);
    CHECK(ds.features.at(2, 0) == doctest::Approx(0.5));
    // constant column collapses to 0
    CHECK(ds.features.at(0, 1) == 0.0);
    CHECK(ds.features.at(2, 1) == 0.0);
}

TEST_CASE("csv loader reports schema and parse errors with location") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("d.csv"));
        out << "a,label\n1,0\n2,1\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(tmp.file("d.csv"), "target"),
                         doctest::Contains("no column named 'target'"), Error);

    {
        std::ofstream out(tmp.file("bad.csv"));
        out << "a,label\n1,0\nx,1\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(tmp.file("bad.csv"), "label"), doctest::Contains("row 2"),
                         Error);

    {
        std::ofstream out(tmp.file("ragged.csv"));
        out << "a,label\n1,0,9\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(tmp.file("ragged.csv"), "label"),
                         doctest::Contains("fields"), Error);

    {
        std::ofstream out(tmp.file("frac.csv"));
        out << "a,label\n1,0.5\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(tmp.file("frac.csv"), "label"),
                         doctest::Contains("not a non-negative integer"), Error);

    {
        std::ofstream out(tmp.file("empty.csv"));
        out << "a,label\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(tmp.file("empty.csv"), "label"),
                         doctest::Contains("no data rows"), Error);
}

TEST_CASE("blob generation: counts, determinism, range") {
    BlobSpec spec;
    spec.num_classes = 4;
    spec.dim = 3;
    spec.samples_per_class = 250;
    const LabeledDataset a = gen_blobs(spec, 11);
    const LabeledDataset b = gen_blobs(spec, 11);
    const LabeledDataset c = gen_blobs(spec, 12);

    CHECK(a.size() == 1000);
    CHECK(a.num_classes == 4);
    a.validate();
    CHECK(a.features.data == b.features.data);
    CHECK(a.true_labels == b.true_labels);
    CHECK(a.features.data != c.features.data);

    const auto [lo, hi] = std::minmax_element(a.features.data.begin(), a.features.data.end());
    CHECK(*lo >= 0.0);
    CHECK(*hi <= 1.0);

    std::array<int, 4> per_class{};
    for (int y : a.true_labels) ++per_class[static_cast<std::size_t>(y)];
    for (int n : per_class) CHECK(n == 250);

    BlobSpec bad = spec;
    bad.num_classes = 1;
    CHECK_THROWS_AS(gen_blobs(bad, 1), Error);
}

TEST_CASE("split: sizes, disjoint union, id preservation, determinism") {
    BlobSpec spec;
    spec.num_classes = 2;
    spec.dim = 2;
    spec.samples_per_class = 50;
    const LabeledDataset ds = gen_blobs(spec, 5);

    const auto [train, test] = split_dataset(ds, 0.2, 99);
    CHECK(train.size() == 80);
    CHECK(test.size() == 20);
    train.validate();
    test.validate();

    std::set<int> ids(train.sample_ids.begin(), train.sample_ids.end());
    for (int id : test.sample_ids) CHECK(ids.insert(id).second);
    CHECK(ids.size() == ds.size());

    const auto [train2, test2] = split_dataset(ds, 0.2, 99);
    CHECK(train.sample_ids == train2.sample_ids);
    CHECK(test.sample_ids == test2.sample_ids);
    CHECK(train.features.data == train2.features.data);

    CHECK_THROWS_AS(split_dataset(ds, 0.001, 1), Error);  // empty test part
    CHECK_THROWS_AS(split_dataset(ds, 1.5, 1), Error);
}

TEST_CASE("epoch batches: constant size, permutation cover, remainder dropped") {
    BlobSpec spec;
    spec.num_classes = 2;
    spec.dim = 2;
    spec.samples_per_class = 53;  // N=106, batch 20 -> 5 batches, 6 dropped
    const LabeledDataset ds = gen_blobs(spec, 3);

    EpochBatches epoch(ds, 20, 42, 1);
    CHECK(epoch.size() == 5);
    std::set<int> seen;
    for (std::size_t i = 0; i < epoch.size(); ++i) {
        const Batch b = epoch.get(i);
        CHECK(b.sample_ids.size() == 20);
        CHECK(b.features.rows == 20);
        CHECK(b.observed_labels.size() == 20);
        for (int id : b.sample_ids) CHECK(seen.insert(id).second);  // no duplicates anywhere
    }
    CHECK(seen.size() == 100);

    // same (seed, epoch) reproduces, different epoch reshuffles
    EpochBatches again(ds, 20, 42, 1);
    CHECK(again.get(0).sample_ids == epoch.get(0).sample_ids);
    EpochBatches other(ds, 20, 42, 2);
    bool any_diff = false;
    for (std::size_t i = 0; i < other.size() && !any_diff; ++i)
        any_diff = other.get(i).sample_ids != epoch.get(i).sample_ids;
    CHECK(any_diff);

    // batch rows really are the dataset rows they claim to be
    const Batch b0 = epoch.get(0);
    for (std::size_t j = 0; j < 20; ++j) {
        const std::size_t row = epoch.row_of(0, j);
        CHECK(ds.sample_ids[row] == b0.sample_ids[j]);
        CHECK(ds.features.at(row, 0) == b0.features.at(j, 0));
    }

    CHECK_THROWS_AS(EpochBatches(ds, 0, 1, 1), Error);
    CHECK_THROWS_AS(EpochBatches(ds, 107, 1, 1), Error);
    CHECK_THROWS_AS(epoch.get(5), Error);
}

TEST_CASE("take_first and label export") {
    TempDir tmp;
    BlobSpec spec;
    spec.num_classes = 2;
    spec.dim = 2;
    spec.samples_per_class = 10;
    const LabeledDataset ds = gen_blobs(spec, 1);

    const LabeledDataset head = take_first(ds, 5);
    CHECK(head.size() == 5);
    CHECK(head.sample_ids == std::vector<int>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(take_first(ds, 21), Error);
    CHECK_THROWS_AS(take_first(ds, 0), Error);

    export_labels_csv(head, tmp.file("labels.csv"));
    const std::string text = testutil::read_file(tmp.file("labels.csv"));
    CHECK(text.substr(0, 30) == "id,true_label,observed_label\n0");
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}

TEST_CASE("validate rejects structural violations") {
    BlobSpec spec;
    spec.num_classes = 2;
    spec.dim = 2;
    spec.samples_per_class = 5;
    LabeledDataset ds = gen_blobs(spec, 1);

    LabeledDataset dup = ds;
    dup.sample_ids[1] = dup.sample_ids[0];
    CHECK_THROWS_WITH_AS(dup.validate(), doctest::Contains("duplicate sample id"), Error);

    LabeledDataset bad_label = ds;
    bad_label.observed_labels[0] = 7;
    CHECK_THROWS_WITH_AS(bad_label.validate(), doctest::Contains("label out of range"), Error);

    LabeledDataset bad_feat = ds;
    bad_feat.features.at(0, 0) = 1.5;
    CHECK_THROWS_WITH_AS(bad_feat.validate(), doctest::Contains("outside [0,1]"), Error);

    LabeledDataset ragged = ds;
    ragged.true_labels.pop_back();
    CHECK_THROWS_WITH_AS(ragged.validate(), doctest::Contains("mismatched lengths"), Error);
}
