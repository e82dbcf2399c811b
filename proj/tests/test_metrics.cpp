#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "frax/config.hpp"
#include "frax/metrics.hpp"
#include "frax/rng.hpp"
#include "oracles.hpp"

using namespace frax;
namespace fs = std::filesystem;

namespace {

AnomalyMap make_map(int w, int h, const std::vector<double>& scores) {
    AnomalyMap m;
    m.width = w;
    m.height = h;
    m.scores = scores;
    return m;
}

Image8 make_mask(int w, int h, const std::vector<std::uint8_t>& on) {
    Image8 img(w, h, 1);
    for (std::size_t i = 0; i < on.size(); ++i) img.pixels[i] = on[i] ? 255 : 0;
    return img;
}

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "frax_metrics_test";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("auroc on a hand-checked four point fixture") {
    const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> labels{0, 0, 1, 1};
    // Pairs: (0.35,0.1) win, (0.35,0.4) loss, (0.8,0.1) win, (0.8,0.4) win.
    CHECK(auroc(scores, labels) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auroc reaches the endpoints for separated and inverted scores") {
    const std::vector<double> hi_pos{0.0, 0.1, 0.9, 1.0};
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK(auroc(hi_pos, labels) == 1.0);
    const std::vector<double> hi_neg{0.9, 1.0, 0.0, 0.1};
    CHECK(auroc(hi_neg, labels) == 0.0);
}

TEST_CASE("auroc of constant scores is one half") {
    const std::vector<double> scores(10, 4.25);
    std::vector<int> labels(10, 0);
    labels[3] = labels[7] = labels[8] = 1;
    CHECK(auroc(scores, labels) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("auroc rejects malformed input") {
    const std::vector<double> s{0.1, 0.2};
    CHECK_THROWS_AS(auroc(s, std::vector<int>{0}), std::invalid_argument);
    CHECK_THROWS_AS(auroc(std::vector<double>{}, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(auroc(s, std::vector<int>{0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(auroc(s, std::vector<int>{1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(auroc(s, std::vector<int>{0, 2}), std::invalid_argument);
    const std::vector<double> bad{0.1, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(auroc(bad, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST_CASE("auroc matches the pairwise oracle on tied random data") {
    Rng rng(501);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(119));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        // Coarse quantization forces plenty of exact ties.
        const double buckets = 3.0 + static_cast<double>(rng.below(14));
        for (int i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(static_cast<std::uint64_t>(buckets))) /
                        (buckets - 1.0);
            labels[i] = static_cast<int>(rng.below(2));
        }
        labels[0] = 0;
        labels[n - 1] = 1;

        const double lib = auroc(scores, labels);
        const double ref = oracle::pairwise_auroc(scores, labels);
        REQUIRE(lib == doctest::Approx(ref).epsilon(1e-12));

        // Complement identity: flipping the sign swaps wins and losses.
        std::vector<double> neg(scores);
        for (double& v : neg) v = -v;
        REQUIRE(auroc(neg, labels) == doctest::Approx(1.0 - lib).epsilon(1e-12));
    }
}

TEST_CASE("auroc is exactly invariant under a strictly increasing transform") {
    Rng rng(502);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 5 + static_cast<int>(rng.below(40));
        std::vector<double> scores(n), mapped(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(9)) - 4.0;
            mapped[i] = 2.0 * scores[i] * scores[i] * scores[i] + scores[i];
            labels[i] = static_cast<int>(rng.below(2));
        }
        labels[0] = 0;
        labels[n - 1] = 1;
        // Ranks are unchanged, so the statistic is bit-identical.
        CHECK(auroc(mapped, labels) == auroc(scores, labels));
    }
}

TEST_CASE("roc_curve endpoints, ordering and fixture values") {
    const std::vector<double> scores{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> labels{0, 0, 1, 1};
    const RocCurve curve = roc_curve(scores, labels);

    REQUIRE(curve.fpr.size() == 5);
    REQUIRE(curve.tpr.size() == 5);
    REQUIRE(curve.thresholds.size() == 5);
    CHECK(std::isinf(curve.thresholds[0]));
    CHECK(curve.thresholds[1] == 0.8);
    CHECK(curve.thresholds[2] == 0.4);
    CHECK(curve.thresholds[3] == 0.35);
    CHECK(curve.thresholds[4] == 0.1);

    CHECK(curve.fpr.front() == 0.0);
    CHECK(curve.tpr.front() == 0.0);
    CHECK(curve.fpr.back() == 1.0);
    CHECK(curve.tpr.back() == 1.0);

    CHECK(curve.fpr[1] == 0.0);
    CHECK(curve.tpr[1] == 0.5);
    CHECK(curve.fpr[2] == 0.5);
    CHECK(curve.tpr[2] == 0.5);
    CHECK(curve.fpr[3] == 0.5);
    CHECK(curve.tpr[3] == 1.0);
    CHECK(curve.auc == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("roc_curve area equals the rank statistic on random tied data") {
    Rng rng(503);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(80));
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(7));
            labels[i] = static_cast<int>(rng.below(2));
        }
        labels[0] = 0;
        labels[n - 1] = 1;

        const RocCurve curve = roc_curve(scores, labels);
        REQUIRE(curve.auc == doctest::Approx(auroc(scores, labels)).epsilon(1e-12));
        for (std::size_t k = 1; k < curve.fpr.size(); ++k) {
            REQUIRE(curve.fpr[k] >= curve.fpr[k - 1]);
            REQUIRE(curve.tpr[k] >= curve.tpr[k - 1]);
            REQUIRE(curve.thresholds[k] < curve.thresholds[k - 1]);
        }
        REQUIRE(curve.fpr.back() == 1.0);
        REQUIRE(curve.tpr.back() == 1.0);
    }
}

TEST_CASE("pixel_auroc pools pixels across images of different sizes") {
    // Map equal to the mask separates perfectly; its complement inverts.
    const std::vector<Image8> masks{make_mask(2, 2, {1, 0, 0, 1}), make_mask(3, 1, {0, 1, 0})};
    const std::vector<AnomalyMap> perfect{make_map(2, 2, {1, 0, 0, 1}), make_map(3, 1, {0, 1, 0})};
    CHECK(pixel_auroc(perfect, masks) == 1.0);
    const std::vector<AnomalyMap> flipped{make_map(2, 2, {0, 1, 1, 0}), make_map(3, 1, {1, 0, 1})};
    CHECK(pixel_auroc(flipped, masks) == 0.0);
}

TEST_CASE("pixel_auroc equals auroc of the hand-built pixel pool") {
    Rng rng(504);
    std::vector<AnomalyMap> maps;
    std::vector<Image8> masks;
    std::vector<double> pool_scores;
    std::vector<int> pool_labels;
    for (int img = 0; img < 3; ++img) {
        std::vector<double> scores(8 * 8);
        std::vector<std::uint8_t> on(8 * 8);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = static_cast<double>(rng.below(5));
            on[i] = rng.below(4) == 0 ? 1 : 0;
        }
        on[0] = 0;
        on[63] = 1;
        maps.push_back(make_map(8, 8, scores));
        masks.push_back(make_mask(8, 8, on));
        for (std::size_t i = 0; i < scores.size(); ++i) {
            pool_scores.push_back(scores[i]);
            pool_labels.push_back(on[i] ? 1 : 0);
        }
    }
    const double lib = pixel_auroc(maps, masks);
    CHECK(lib == doctest::Approx(auroc(pool_scores, pool_labels)).epsilon(1e-12));
    CHECK(lib == doctest::Approx(oracle::pairwise_auroc(pool_scores, pool_labels)).epsilon(1e-12));
}

TEST_CASE("pixel_auroc treats any nonzero mask channel as anomalous") {
    Image8 mask(2, 1, 3);
    mask.at(1, 0, 2) = 9;
    const std::vector<AnomalyMap> maps{make_map(2, 1, {0.0, 1.0})};
    CHECK(pixel_auroc(maps, {mask}) == 1.0);
}

TEST_CASE("pixel_auroc rejects mismatched inputs") {
    const std::vector<AnomalyMap> maps{make_map(2, 2, {0, 0, 0, 1})};
    CHECK_THROWS_AS(pixel_auroc(maps, {}), std::invalid_argument);
    CHECK_THROWS_AS(pixel_auroc({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(pixel_auroc(maps, {make_mask(3, 2, std::vector<std::uint8_t>(6, 1))}),
                    std::invalid_argument);
    // All-normal masks leave the pool single-class.
    CHECK_THROWS_AS(pixel_auroc(maps, {make_mask(2, 2, {0, 0, 0, 0})}), std::invalid_argument);
}

TEST_CASE("connected_components on hand fixtures") {
    const ComponentLabels none = connected_components(make_mask(3, 3, std::vector<std::uint8_t>(9, 0)));
    CHECK(none.num_regions == 0);
    CHECK(std::all_of(none.labels.begin(), none.labels.end(),
                      [](std::int32_t v) { return v == 0; }));

    const ComponentLabels dot = connected_components(make_mask(3, 3, {0, 0, 0, 0, 1, 0, 0, 0, 0}));
    CHECK(dot.num_regions == 1);
    CHECK(dot.labels[4] == 1);

    // Diagonal contact joins under 8-connectivity.
    const ComponentLabels diag = connected_components(make_mask(2, 2, {1, 0, 0, 1}));
    CHECK(diag.num_regions == 1);

    const ComponentLabels board =
        connected_components(make_mask(4, 4, {1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 1}));
    CHECK(board.num_regions == 1);

    // Separated dots are numbered in raster-scan first-encounter order.
    const ComponentLabels two =
        connected_components(make_mask(4, 3, {0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0}));
    CHECK(two.num_regions == 2);
    CHECK(two.labels[1] == 1);
    CHECK(two.labels[8] == 2);
    CHECK(two.width == 4);
    CHECK(two.height == 3);
}

TEST_CASE("connected_components agrees with the union-find oracle on random masks") {
    Rng rng(505);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 16, h = 16;
        std::vector<std::uint8_t> on(static_cast<std::size_t>(w) * h);
        for (auto& v : on) v = rng.below(10) < 3 ? 1 : 0;
        const Image8 mask = make_mask(w, h, on);
        const ComponentLabels cc = connected_components(mask);
        REQUIRE(cc.num_regions == oracle::count_components(on, w, h));

        // Labels partition the foreground: nonzero exactly on mask pixels,
        // every id in [1, num_regions] used.
        std::vector<bool> seen(static_cast<std::size_t>(cc.num_regions) + 1, false);
        for (std::size_t i = 0; i < on.size(); ++i) {
            if (on[i]) {
                REQUIRE(cc.labels[i] >= 1);
                REQUIRE(cc.labels[i] <= cc.num_regions);
                seen[static_cast<std::size_t>(cc.labels[i])] = true;
            } else {
                REQUIRE(cc.labels[i] == 0);
            }
        }
        for (int r = 1; r <= cc.num_regions; ++r) REQUIRE(seen[static_cast<std::size_t>(r)]);

        // 8-neighbours on foreground always share a label.
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (!on[static_cast<std::size_t>(y) * w + x]) continue;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = x + dx, ny = y + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        if (!on[static_cast<std::size_t>(ny) * w + nx]) continue;
                        REQUIRE(cc.labels[static_cast<std::size_t>(ny) * w + nx] ==
                                cc.labels[static_cast<std::size_t>(y) * w + x]);
                    }
            }
    }
}

TEST_CASE("aupro is exactly one for a perfect map and zero for an inverted one") {
    std::vector<Image8> masks;
    std::vector<AnomalyMap> perfect, inverted;
    Rng rng(506);
    for (int img = 0; img < 2; ++img) {
        std::vector<std::uint8_t> on(6 * 6, 0);
        for (auto& v : on) v = rng.below(3) == 0 ? 1 : 0;
        on[0] = 0;
        on[21] = 1;
        masks.push_back(make_mask(6, 6, on));
        std::vector<double> hit(on.size()), miss(on.size());
        for (std::size_t i = 0; i < on.size(); ++i) {
            hit[i] = on[i] ? 1.0 : 0.0;
            miss[i] = on[i] ? 0.0 : 1.0;
        }
        perfect.push_back(make_map(6, 6, hit));
        inverted.push_back(make_map(6, 6, miss));
    }
    const ProCurve best = aupro(perfect, masks, 0.3);
    CHECK(best.aupro == 1.0);
    CHECK(best.fpr_limit == 0.3);
    CHECK(best.fpr.front() == 0.0);
    CHECK(best.pro.front() == 0.0);
    CHECK(best.fpr.back() == 1.0);
    CHECK(best.pro.back() == 1.0);

    CHECK(aupro(inverted, masks, 0.3).aupro == 0.0);
}

TEST_CASE("aupro matches the brute-force oracle on random multi-image data") {
    Rng rng(507);
    const int w = 8, h = 8;
    for (int trial = 0; trial < 12; ++trial) {
        std::vector<AnomalyMap> maps;
        std::vector<Image8> masks;
        std::vector<std::vector<double>> score_maps;
        std::vector<std::vector<std::uint8_t>> bit_masks;
        for (int img = 0; img < 3; ++img) {
            std::vector<double> scores(static_cast<std::size_t>(w) * h);
            std::vector<std::uint8_t> on(scores.size(), 0);
            for (std::size_t i = 0; i < scores.size(); ++i) {
                scores[i] = static_cast<double>(rng.below(12)) / 11.0;
                on[i] = rng.below(5) == 0 ? 1 : 0;
            }
            on[0] = 0;
            if (img == 0) on[27] = 1;
            maps.push_back(make_map(w, h, scores));
            masks.push_back(make_mask(w, h, on));
            score_maps.push_back(scores);
            bit_masks.push_back(on);
        }
        for (const double limit : {0.07, 0.3, 1.0}) {
            const double lib = aupro(maps, masks, limit).aupro;
            const double ref = oracle::direct_aupro(score_maps, bit_masks, w, h, limit);
            REQUIRE(lib == doctest::Approx(ref).epsilon(1e-6));
            REQUIRE(lib >= 0.0);
            REQUIRE(lib <= 1.0);
        }
    }
}

TEST_CASE("aupro rejects degenerate inputs") {
    const std::vector<AnomalyMap> maps{make_map(2, 2, {0.1, 0.2, 0.3, 0.4})};
    const std::vector<Image8> good{make_mask(2, 2, {0, 1, 0, 0})};
    CHECK_THROWS_AS(aupro(maps, {}), std::invalid_argument);
    CHECK_THROWS_AS(aupro({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(aupro(maps, {make_mask(3, 2, std::vector<std::uint8_t>(6, 1))}),
                    std::invalid_argument);
    CHECK_THROWS_AS(aupro(maps, {make_mask(2, 2, {0, 0, 0, 0})}), std::invalid_argument);
    CHECK_THROWS_AS(aupro(maps, {make_mask(2, 2, {1, 1, 1, 1})}), std::invalid_argument);
    CHECK_THROWS_AS(aupro(maps, good, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(aupro(maps, good, -0.2), std::invalid_argument);
    CHECK_THROWS_AS(aupro(maps, good, 1.5), std::invalid_argument);
    const std::vector<AnomalyMap> with_nan{
        make_map(2, 2, {0.1, std::numeric_limits<double>::quiet_NaN(), 0.3, 0.4})};
    CHECK_THROWS_AS(aupro(with_nan, good), std::invalid_argument);
}

TEST_CASE("curve csv files round-trip through the canonical float format") {
    const std::vector<double> scores{0.25, 1.0 / 3.0, 0.5, 0.8125, 0.11};
    const std::vector<int> labels{0, 1, 0, 1, 0};
    const RocCurve roc = roc_curve(scores, labels);

    const fs::path dir = temp_dir();
    const fs::path roc_path = dir / "roc.csv";
    write_roc_csv(roc_path, roc);

    std::ifstream in(roc_path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "fpr,tpr");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        CHECK(std::stod(line.substr(0, comma)) == roc.fpr[rows]);
        CHECK(std::stod(line.substr(comma + 1)) == roc.tpr[rows]);
        ++rows;
    }
    CHECK(rows == roc.fpr.size());

    const std::vector<Image8> masks{make_mask(2, 2, {0, 1, 1, 0})};
    const std::vector<AnomalyMap> maps{make_map(2, 2, {0.125, 0.75, 1.0 / 7.0, 0.5})};
    const ProCurve pro = aupro(maps, masks, 0.5);
    const fs::path pro_path = dir / "pro.csv";
    write_pro_csv(pro_path, pro);

    std::ifstream pin(pro_path);
    REQUIRE(std::getline(pin, line));
    CHECK(line == "fpr,pro");
    rows = 0;
    while (std::getline(pin, line)) {
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        CHECK(std::stod(line.substr(0, comma)) == pro.fpr[rows]);
        CHECK(std::stod(line.substr(comma + 1)) == pro.pro[rows]);
        ++rows;
    }
    CHECK(rows == pro.fpr.size());

    CHECK_THROWS_AS(write_roc_csv(dir / "missing" / "roc.csv", roc), std::runtime_error);
    CHECK_THROWS_AS(write_pro_csv(dir / "missing" / "pro.csv", pro), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("pairwise_sum is exact on integers and accurate on random data") {
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
    CHECK(pairwise_sum(std::vector<double>{3.5}) == 3.5);

    Rng rng(508);
    std::vector<double> ints(1000);
    long long expect = 0;
    for (auto& v : ints) {
        const long long k = static_cast<long long>(rng.below(2001)) - 1000;
        v = static_cast<double>(k);
        expect += k;
    }
    CHECK(pairwise_sum(ints) == static_cast<double>(expect));

    std::vector<double> values(3777);
    long double ref = 0.0L;
    for (auto& v : values) {
        v = rng.normal();
        ref += static_cast<long double>(v);
    }
    CHECK(pairwise_sum(values) ==
          doctest::Approx(static_cast<double>(ref)).epsilon(1e-12).scale(1.0));
    // Deterministic: same input, same bits.
    CHECK(pairwise_sum(values) == pairwise_sum(values));
}
