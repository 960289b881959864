#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "echoia/evaluation.hpp"
#include "helpers.hpp"

using namespace echoia;

TEST_CASE("accumulate touches exactly one cell per decision") {
    ConfusionCounts c;
    accumulate(c, true, true); // ta
    CHECK(c.ta == 1);
    accumulate(c, false, false); // tr
    CHECK(c.tr == 1);
    accumulate(c, false, true); // fr
    CHECK(c.fr == 1);
    accumulate(c, true, false); // fa
    CHECK(c.fa == 1);
    CHECK(c.total() == 4);
}

TEST_CASE("acc matches the closed formula") {
    ConfusionCounts c{90, 85, 10, 15};
    CHECK(acc(c) == doctest::Approx(0.875));
    CHECK(acc(ConfusionCounts{5, 3, 0, 0}) == 1.0);
    CHECK(acc(ConfusionCounts{0, 0, 4, 9}) == 0.0);
    CHECK_THROWS_AS(acc(ConfusionCounts{}), EmptyCounts);
}

TEST_CASE("acc is invariant under uniform count scaling") {
    const ConfusionCounts base{19, 23, 7, 11};
    const double a = acc(base);
    for (int k = 2; k <= 50; k += 7) {
        const ConfusionCounts scaled{base.ta * k, base.tr * k, base.fr * k, base.fa * k};
        CHECK(acc(scaled) == doctest::Approx(a));
    }
}

TEST_CASE("split boundaries: the documented example and the closed form") {
    const auto split = split_boundaries(1000, 10, 0.15);
    CHECK(split.train_end == 150);
    REQUIRE(split.boundaries.size() == 9);
    for (int part = 2; part <= 10; ++part) {
        CHECK(split.boundaries[static_cast<std::size_t>(part - 2)] == 1000 * part / 10);
    }
    CHECK(split.boundaries.back() == 1000);

    for (std::int64_t total : {100, 123, 999, 4567, 10000}) {
        const auto s = split_boundaries(total, 10, 0.15);
        CHECK(s.train_end == static_cast<std::int64_t>(0.15 * static_cast<double>(total)));
        CHECK(s.boundaries.size() == 9);
        for (int part = 2; part <= 10; ++part) {
            CHECK(s.boundaries[static_cast<std::size_t>(part - 2)] == total * part / 10);
        }
    }
    CHECK_THROWS_AS(split_boundaries(5, 10, 0.15), InsufficientData);
    CHECK_THROWS_AS(split_boundaries(100, 1, 0.15), InsufficientData);
    CHECK_THROWS_AS(split_boundaries(100, 10, 0.0), InsufficientData);
}

TEST_CASE("per-user report averages final accuracies") {
    TimelineReport a;
    a.device_id = "u1";
    a.scheme = "echoia";
    a.final_acc = 0.9;
    TimelineReport b = a;
    b.device_id = "u2";
    b.final_acc = 1.0;

    const auto single = per_user_report({a});
    CHECK(single.mean_acc == doctest::Approx(0.9));
    const auto both = per_user_report({a, b});
    REQUIRE(both.rows.size() == 2);
    CHECK(both.mean_acc == doctest::Approx(0.95));
}

TEST_CASE("timeline evaluation is deterministic and leak-free") {
    const auto catalog = FeatureCatalog::standard();
    const auto cfg = echoia::testing::small_config(13, 3);
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);

    const auto r1 = timeline_eval(corpus.devices[0], catalog, cfg.eval_config(Scheme::echoia));
    const auto r2 = timeline_eval(corpus.devices[0], catalog, cfg.eval_config(Scheme::echoia));
    REQUIRE(r1.points.size() == r2.points.size());
    for (std::size_t i = 0; i < r1.points.size(); ++i) {
        CHECK(r1.points[i].cumulative.ta == r2.points[i].cumulative.ta);
        CHECK(r1.points[i].cumulative.tr == r2.points[i].cumulative.tr);
        CHECK(r1.points[i].cumulative.fr == r2.points[i].cumulative.fr);
        CHECK(r1.points[i].cumulative.fa == r2.points[i].cumulative.fa);
    }
    CHECK(r1.final_acc == r2.final_acc);

    // no evaluated decision may precede the training prefix
    const std::int64_t total =
        window_count(corpus.devices[0].duration_ms, cfg.window_ms, cfg.hop_ms);
    const auto split = split_boundaries(total, 10, 0.15);
    for (const auto& d : r1.session_log.decisions) {
        CHECK(d.window_id >= split.train_end);
    }
    // counts are monotone along the cumulative curve
    for (std::size_t i = 1; i < r1.points.size(); ++i) {
        CHECK(r1.points[i].cumulative.total() >= r1.points[i - 1].cumulative.total());
    }
}

TEST_CASE("closed-loop cross-validation selects from the grid deterministically") {
    const auto catalog = FeatureCatalog::standard();
    auto cfg = echoia::testing::small_config(29, 3);
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);

    EvalConfig ec = cfg.eval_config(Scheme::echoia);
    ec.folds = 2;
    ec.grid = {{0.1, 3}, {10, 3}};
    const auto report = cross_validate_device(corpus.devices[0], catalog, ec);
    REQUIRE(report.grid.size() == 2);
    REQUIRE(report.fold_accuracies.size() == 2);
    for (const auto& folds : report.fold_accuracies) {
        REQUIRE(folds.size() == 2);
        for (double a : folds) {
            CHECK(a >= 0.0);
            CHECK(a <= 1.0);
        }
    }
    const auto again = cross_validate_device(corpus.devices[0], catalog, ec);
    CHECK(report.selected == again.selected);
    CHECK(report.fold_accuracies == again.fold_accuracies);
}

TEST_CASE("timeline csv and summary json are written") {
    const auto catalog = FeatureCatalog::standard();
    const auto cfg = echoia::testing::small_config(31, 3);
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);
    auto reports = run_scheme(corpus, Scheme::echoia, cfg.eval_config(Scheme::echoia));
    REQUIRE(reports.size() == 3);

    const auto dir = std::filesystem::temp_directory_path() / "echoia_eval_out";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    write_timeline_csv(dir / "timeline.csv", reports);
    write_summary_json(dir / "summary.json", {per_user_report(reports)});

    std::ifstream csv(dir / "timeline.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "device_id,scheme,part,boundary_window,ta,tr,fr,fa,acc");
    std::size_t lines = 0;
    for (std::string line; std::getline(csv, line);) {
        ++lines;
    }
    CHECK(lines == 3 * 9); // three devices, nine evaluation points each

    std::ifstream js(dir / "summary.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j.at("schemes").size() == 1);
    CHECK(j["schemes"][0].at("users").size() == 3);
    std::filesystem::remove_all(dir);
}
