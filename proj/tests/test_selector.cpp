#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pdiff/error.hpp"
#include "pdiff/rng.hpp"
#include "pdiff/selector.hpp"
#include "testutil.hpp"

using namespace pdiff;

TEST_CASE("prob_diff: worked pairs and properties") {
    CHECK(prob_diff({0.2, 0.2, 0.2, 0.2, 0.2}, 1) == 0.0);
    CHECK(prob_diff({0.0, 0.2, 0.0, 0.0, 0.8}, 1) == doctest::Approx(-0.6).epsilon(1e-15));
    CHECK(prob_diff({0.0, 1.0, 0.0}, 1) == 1.0);

    // invariant under permutation of the non-y entries
    CHECK(prob_diff({0.5, 0.1, 0.3, 0.1}, 0) == prob_diff({0.5, 0.3, 0.1, 0.1}, 0));

    CHECK_THROWS_AS(prob_diff({1.0}, 0), Error);
    CHECK_THROWS_AS(prob_diff({0.5, 0.5}, 2), Error);
}

TEST_CASE("bin rule and lower edges") {
    CHECK(bin_of(1.0, 200) == 200);
    CHECK(bin_of(-1.0, 200) == 1);  // raw formula gives 0; clamped
    CHECK(bin_of(-0.6, 200) == 40);
    CHECK(bin_of(0.0, 200) == 100);
    CHECK(bin_of(-0.995, 200) == 1);
    CHECK_THROWS_AS(bin_of(1.01, 200), Error);
    CHECK_THROWS_AS(bin_of(-1.01, 200), Error);

    CHECK(bin_lower_edge(1, 200) == -1.0);
    CHECK(bin_lower_edge(200, 200) == doctest::Approx(1.0 - 2.0 / 200).epsilon(1e-15));
    CHECK(bin_lower_edge(100, 200) == doctest::Approx(-0.01).epsilon(1e-15));
    CHECK_THROWS_AS(bin_lower_edge(0, 200), Error);
    CHECK_THROWS_AS(bin_lower_edge(201, 200), Error);

    // every delta lands in the half-open range (lower_edge(x), lower_edge(x)+2/H]
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const double d = rng.uniform() * 2.0 - 1.0;
        const int h = i % 2 == 0 ? 200 : 8;
        const int x = bin_of(d, h);
        if (d > -1.0) CHECK(d > bin_lower_edge(x, h));
        CHECK(d <= bin_lower_edge(x, h) + 2.0 / h + 1e-15);
    }
}

TEST_CASE("p_y bin rule") {
    CHECK(bin_of_py(1.0, 200) == 200);
    CHECK(bin_of_py(0.0, 200) == 1);  // clamp, same convention as delta
    CHECK(bin_of_py(0.005, 200) == 1);
    CHECK(bin_of_py(0.0051, 200) == 2);
    CHECK(bin_lower_edge_py(1, 200) == 0.0);
    CHECK(bin_lower_edge_py(200, 200) == doctest::Approx(199.0 / 200.0).epsilon(1e-15));
    CHECK_THROWS_AS(bin_of_py(1.2, 200), Error);
}

TEST_CASE("window push, FIFO eviction, incremental histogram") {
    DiffWindow w(200, 4);
    CHECK(w.total() == 0);
    w.push({-0.9, -0.5, 0.1});
    CHECK(w.total() == 3);
    std::size_t sum = 0;
    for (auto c : w.bin_counts()) sum += c;
    CHECK(sum == 3);

    // capacity 4, push 6 total: the 2 oldest must be gone
    w.push({0.8, 0.95, -0.2});
    CHECK(w.total() == 4);
    const auto vals = w.buffered();
    CHECK(vals == std::vector<double>{0.1, 0.8, 0.95, -0.2});
    CHECK(w.bin_counts() == testutil::rebuild_hist(vals, 200));

    CHECK_THROWS_AS(w.push({1.5}), Error);
    CHECK_THROWS_AS(DiffWindow(200, 0), Error);
    CHECK_THROWS_AS(DiffWindow(3, 5), Error);  // odd bin count
}

TEST_CASE("incremental histogram equals from-scratch rebuild under random churn") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const int h = trial % 3 == 0 ? 4 : (trial % 3 == 1 ? 8 : 200);
        const std::size_t cap = 1 + rng.uniform_index(40);
        DiffWindow w(h, cap);
        std::vector<double> mirror;
        const std::size_t pushes = 1 + rng.uniform_index(150);
        for (std::size_t i = 0; i < pushes; ++i) {
            const double v = rng.uniform() * 2.0 - 1.0;
            w.push_one(v);
            mirror.push_back(v);
            if (mirror.size() > cap) mirror.erase(mirror.begin());
        }
        CHECK(w.buffered() == mirror);
        CHECK(w.bin_counts() == testutil::rebuild_hist(mirror, h));
    }
}

TEST_CASE("pdf and pcf") {
    DiffWindow w(200, 16);
    CHECK_THROWS_AS(w.pdf(), Error);
    CHECK_THROWS_AS(w.pcf(), Error);
    CHECK_THROWS_AS(w.zeta(), Error);

    w.push({0.55, 0.55, 0.55});
    auto pdf = w.pdf();
    const int b = bin_of(0.55, 200);
    CHECK(pdf[static_cast<std::size_t>(b - 1)] == 1.0);
    auto pcf = w.pcf();
    CHECK(pcf[static_cast<std::size_t>(b - 2)] == 0.0);
    CHECK(pcf[static_cast<std::size_t>(b - 1)] == 1.0);
    CHECK(pcf[199] == 1.0);

    DiffWindow w4(200, 8);
    w4.push({-0.9, -0.5, 0.1, 0.8});
    pdf = w4.pdf();
    for (double v : {-0.9, -0.5, 0.1, 0.8})
        CHECK(pdf[static_cast<std::size_t>(bin_of(v, 200) - 1)] == 0.25);

    // pcf[H] = 1 within 1e-9 and nondecreasing, for random fills
    Rng rng(7);
    DiffWindow wr(8, 64);
    for (int i = 0; i < 64; ++i) wr.push_one(rng.uniform() * 2.0 - 1.0);
    pcf = wr.pcf();
    CHECK(std::abs(pcf.back() - 1.0) <= 1e-9);
    for (std::size_t i = 1; i < pcf.size(); ++i) CHECK(pcf[i] >= pcf[i - 1]);
}

TEST_CASE("threshold_for_rate: worked example and edge cases") {
    DiffWindow w(200, 8);
    w.push({-0.9, -0.5, 0.1, 0.8});

    SUBCASE("R=0.5 picks bin 110, threshold 0.09, keeps exactly two") {
        const auto th = w.threshold_for_rate(0.5);
        REQUIRE(th.has_value());
        CHECK(*th == doctest::Approx(0.09).epsilon(1e-15));
        const auto omega = weights_for({-0.9, -0.5, 0.1, 0.8}, th);
        CHECK(omega == std::vector<double>{0.0, 0.0, 1.0, 1.0});
    }
    SUBCASE("R=0 keeps everything") {
        const auto th = w.threshold_for_rate(0.0);
        REQUIRE(th.has_value());
        // first nonempty bin's lower edge sits strictly below every value
        const auto omega = weights_for({-0.9, -0.5, 0.1, 0.8}, th);
        CHECK(omega == std::vector<double>(4, 1.0));
    }
    SUBCASE("all values equal: any R < 1 keeps everything") {
        DiffWindow we(200, 8);
        we.push({0.3, 0.3, 0.3, 0.3});
        for (double r : {0.0, 0.3, 0.9}) {
            const auto omega = weights_for({0.3, 0.3, 0.3, 0.3}, we.threshold_for_rate(r));
            CHECK(omega == std::vector<double>(4, 1.0));
        }
    }
    SUBCASE("empty window yields the keep-all sentinel") {
        DiffWindow we(200, 8);
        CHECK_FALSE(we.threshold_for_rate(0.5).has_value());
        const auto omega = weights_for({-0.9, 0.9}, std::nullopt);
        CHECK(omega == std::vector<double>{1.0, 1.0});
    }
    SUBCASE("exact threshold value is dropped (strict inequality)") {
        const auto omega = weights_for({0.09, 0.0900001}, 0.09);
        CHECK(omega == std::vector<double>{0.0, 1.0});
    }
    CHECK_THROWS_AS(w.threshold_for_rate(1.0), Error);
    CHECK_THROWS_AS(w.threshold_for_rate(-0.1), Error);
}

TEST_CASE("histogram selection equals the brute-force quantile oracle") {
    // exhaustive sweep: n <= 64, H in {4, 8, 200}, R in {0, 0.1, ..., 0.9};
    // > 10^4 cases in total
    Rng rng(101);
    std::size_t cases = 0;
    for (const int h : {4, 8, 200}) {
        for (std::size_t n = 1; n <= 64; ++n) {
            for (int rep = 0; rep < 6; ++rep) {
                std::vector<double> values(n);
                for (double& v : values) {
                    v = rng.uniform() * 2.0 - 1.0;
                    // duplicates and exact bin edges included
                    if (rng.uniform() < 0.2) v = bin_lower_edge(bin_of(v, h), h);
                    if (n > 1 && rng.uniform() < 0.2) v = values[0];
                }
                DiffWindow w(h, n);
                w.push(values);
                for (int ri = 0; ri <= 9; ++ri) {
                    const double rate = static_cast<double>(ri) / 10.0;
                    const auto th = w.threshold_for_rate(rate);
                    REQUIRE(th.has_value());
                    const double want = testutil::brute_force_threshold(values, rate, h);
                    CHECK(*th == want);

                    // sandwich in count space: cum(x*-1) <= R*n < cum(x*);
                    // a point half a bin above the lower edge recovers x*
                    const int x = bin_of(*th + 1.0 / h, h);
                    const auto& counts = w.bin_counts();
                    std::size_t below = 0, upto = 0;
                    for (int b = 1; b <= x; ++b) {
                        upto += counts[static_cast<std::size_t>(b - 1)];
                        if (b < x) below = upto;
                    }
                    const double bar = rate * static_cast<double>(n);
                    CHECK(static_cast<double>(below) <= bar);
                    CHECK(static_cast<double>(upto) > bar);
                    ++cases;
                }
            }
        }
    }
    CHECK(cases >= 10000);
}

TEST_CASE("threshold is nondecreasing in the drop rate") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        DiffWindow w(200, 64);
        for (int i = 0; i < 64; ++i) w.push_one(rng.uniform() * 2.0 - 1.0);
        double prev = -2.0;
        for (int ri = 0; ri <= 9; ++ri) {
            const double th = *w.threshold_for_rate(static_cast<double>(ri) / 10.0);
            CHECK(th >= prev);
            prev = th;
        }
    }
}

TEST_CASE("drop rate ramp") {
    CHECK(drop_rate(10, 20, 0.5) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(drop_rate(20, 20, 0.5) == 0.5);
    CHECK(drop_rate(200, 20, 0.5) == 0.5);
    for (int t : {1, 5, 19, 100}) CHECK(drop_rate(t, 20, 0.0) == 0.0);
    // nondecreasing in T
    double prev = -1.0;
    for (int t = 1; t <= 40; ++t) {
        const double r = drop_rate(t, 20, 0.37);
        CHECK(r >= prev);
        prev = r;
    }
    CHECK_THROWS_AS(drop_rate(0, 20, 0.5), Error);
}

TEST_CASE("no-tau warmup threshold") {
    CHECK(threshold_without_tau(10, 20) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(threshold_without_tau(1, 20) == doctest::Approx(-0.95).epsilon(1e-15));
    CHECK(threshold_without_tau(200, 20) == 0.0);
    CHECK(threshold_without_tau(20, 20) == 0.0);
    CHECK_THROWS_AS(threshold_without_tau(0, 20), Error);
}

TEST_CASE("zeta: closed forms and bounds") {
    SUBCASE("all mass in bin 200 of 200") {
        DiffWindow w(200, 8);
        w.push({0.999, 0.996, 1.0});
        CHECK(w.zeta() == doctest::Approx(0.99).epsilon(1e-12));
    }
    SUBCASE("all mass in bin 1") {
        DiffWindow w(200, 8);
        w.push({-1.0, -1.0});
        CHECK(w.zeta() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("half in bin 1, half in bin 200") {
        DiffWindow w(200, 8);
        w.push({-1.0, 1.0, -1.0, 1.0});
        CHECK(w.zeta() == doctest::Approx(0.995).epsilon(1e-12));
    }
    SUBCASE("always within [0,1]") {
        Rng rng(9);
        for (int trial = 0; trial < 30; ++trial) {
            DiffWindow w(trial % 2 == 0 ? 200 : 4, 32);
            for (int i = 0; i < 32; ++i) w.push_one(rng.uniform() * 2.0 - 1.0);
            const double z = w.zeta();
            CHECK(z >= 0.0);
            CHECK(z <= 1.0);
        }
    }
    SUBCASE("py-statistic windows refuse zeta") {
        DiffWindow w(200, 8, Statistic::py);
        w.push({0.5});
        CHECK_THROWS_AS(w.zeta(), Error);
    }
}

TEST_CASE("clean/noise split histograms add up to the full histogram") {
    Rng rng(41);
    DiffWindow w(8, 64);
    std::vector<double> values;
    std::vector<bool> clean;
    for (int i = 0; i < 100; ++i) {  // includes evictions past capacity
        values.push_back(rng.uniform() * 2.0 - 1.0);
        clean.push_back(rng.uniform() < 0.6);
    }
    w.push(values, clean);
    for (std::size_t x = 0; x < 8; ++x)
        CHECK(w.bin_counts()[x] == w.clean_counts()[x] + w.noise_counts()[x]);
    // totals match the surviving buffer
    std::size_t all = 0;
    for (auto c : w.bin_counts()) all += c;
    CHECK(all == 64);
}

TEST_CASE("tau estimation trigger") {
    SelectorConfig cfg;
    cfg.bins = 200;
    cfg.ramp_epochs = 4;
    cfg.zeta_threshold = 0.9;
    cfg.batch_size = 4;
    cfg.iters_per_epoch = 2;

    SUBCASE("fires when zeta exceeds the threshold at a full window") {
        DiffWindow w(200, 10);
        for (int i = 0; i < 4; ++i) w.push_one(-0.999);  // 40% below zero
        for (int i = 0; i < 6; ++i) w.push_one(0.999);
        REQUIRE(w.full());

        SelectorState st;
        st.phase = SelectorPhase::warmup_no_tau;
        st.epoch = 4;
        maybe_estimate_tau(st, w, cfg);
        CHECK(st.phase == SelectorPhase::estimated);
        REQUIRE(st.tau_est.has_value());
        CHECK(*st.tau_est == doctest::Approx(0.4).epsilon(1e-12));
        CHECK(st.zeta > 0.9);
    }
    SUBCASE("no fire below the zeta threshold") {
        DiffWindow w(200, 10);
        for (int i = 0; i < 10; ++i) w.push_one(i % 2 == 0 ? 0.2 : -0.2);
        SelectorState st;
        st.phase = SelectorPhase::warmup_no_tau;
        st.epoch = 9;
        maybe_estimate_tau(st, w, cfg);
        CHECK(st.phase == SelectorPhase::warmup_no_tau);
        CHECK_FALSE(st.tau_est.has_value());
    }
    SUBCASE("gated on epoch and window fill") {
        DiffWindow w(200, 10);
        for (int i = 0; i < 10; ++i) w.push_one(0.999);
        SelectorState st;
        st.phase = SelectorPhase::warmup_no_tau;
        st.epoch = 3;  // < ramp_epochs
        maybe_estimate_tau(st, w, cfg);
        CHECK(st.phase == SelectorPhase::warmup_no_tau);

        DiffWindow partial(200, 10);
        partial.push_one(0.999);
        st.epoch = 10;
        maybe_estimate_tau(st, partial, cfg);
        CHECK(st.phase == SelectorPhase::warmup_no_tau);
    }
    SUBCASE("wrong phase is a state error") {
        DiffWindow w(200, 4);
        w.push_one(0.5);
        SelectorState st;
        st.phase = SelectorPhase::warmup_known_tau;
        CHECK_THROWS_AS(maybe_estimate_tau(st, w, cfg), Error);
        st.phase = SelectorPhase::estimated;
        CHECK_THROWS_AS(maybe_estimate_tau(st, w, cfg), Error);
    }
}

TEST_CASE("fraction_below_zero counts raw values, not bins") {
    DiffWindow w(200, 8);
    // 0.0 falls in bin 100 (a "negative" bin) but is not < 0
    w.push({0.0, -0.001, 0.001, -1.0});
    CHECK(w.fraction_below_zero() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("selector config validation and window capacity") {
    SelectorConfig cfg;
    cfg.batch_size = 128;
    cfg.iters_per_epoch = 78;
    cfg.validate();

    SelectorConfig odd = cfg;
    odd.bins = 199;
    CHECK_THROWS_AS(odd.validate(), Error);
    SelectorConfig badm = cfg;
    badm.window_fraction = 1.5;
    CHECK_THROWS_AS(badm.validate(), Error);
    SelectorConfig badtau = cfg;
    badtau.tau = 1.0;
    CHECK_THROWS_AS(badtau.validate(), Error);

    // M=0.2 of 78 batches of 128 -> round(15.6)=16 batches
    CHECK(DiffWindow::capacity_for(0.2, 78, 128) == 16 * 128);
    // M=0 degenerates to one batch
    CHECK(DiffWindow::capacity_for(0.0, 78, 128) == 128);
    CHECK(DiffWindow::capacity_for(1.0, 10, 4) == 40);
}
