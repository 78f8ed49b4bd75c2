#include <catch_amalgamated.hpp>

#include <numeric>

#include "hdrnn/hierarchy.hpp"
#include "hdrnn/rng.hpp"

using namespace hdrnn;

namespace {

// Five classes: 0 normal, 1-2 strong faults, 3-4 weak faults.
std::vector<Series> toy_records(std::uint64_t seed, std::size_t per_class, std::size_t length) {
    const double offset[5][2] = {{0.0, 0.0}, {3.0, 0.0}, {0.0, -3.0}, {0.6, 0.6}, {-0.6, 0.6}};
    Rng rng(seed);
    std::vector<Series> out;
    for (int c = 0; c < 5; ++c)
        for (std::size_t r = 0; r < per_class; ++r) {
            Series s;
            s.values = Tensor2(length, 2);
            for (std::size_t t = 0; t < length; ++t)
                for (std::size_t f = 0; f < 2; ++f) s.values(t, f) = 10.0 + offset[c][f] + 0.3 * rng.normal();
            s.labels.assign(length, c);
            s.id = "c" + std::to_string(c) + "r" + std::to_string(r);
            out.push_back(std::move(s));
        }
    return out;
}

WindowBatch toy_windows(std::uint64_t seed) {
    return make_windows(std::make_shared<const std::vector<Series>>(toy_records(seed, 2, 20)), 4);
}

ModelConfig toy_config() {
    ModelConfig c;
    c.input_dim = 2;
    c.encoder = {6};
    c.decoder = {2};
    c.horizon = 4;
    c.epochs = 25;
    c.seed = 3;
    c.learning_rate = 0.02;
    c.lambda1 = 0.1;
    return c;
}

const HierarchicalModel& toy_model() {
    static const HierarchicalModel model = [] {
        const std::vector<int> inc{3, 4};
        const auto map = make_label_map(5, inc);
        const auto train = toy_windows(1);
        const auto val = toy_windows(2);
        return train_hierarchical({train, val, train, val}, map, toy_config(), toy_config());
    }();
    return model;
}

} // namespace

TEST_CASE("21 classes with three incipient faults regroup into 18", "[hierarchy]") {
    const std::vector<int> inc{3, 9, 15};
    std::vector<int> labels(21);
    std::iota(labels.begin(), labels.end(), 0);
    const auto [l1, map] = regroup_labels(labels, inc, 21);
    CHECK(map.level1_classes() == 18);
    CHECK(map.level2_classes() == 4);
    CHECK(map.level2 == std::vector<int>{0, 3, 9, 15});
    CHECK(l1[0] == map.merged);
    CHECK(l1[3] == map.merged);
    CHECK(l1[9] == map.merged);
    CHECK(l1[15] == map.merged);
    // remaining classes are contiguous and keep their order
    std::vector<int> rest;
    for (int c = 0; c < 21; ++c)
        if (c != 0 && c != 3 && c != 9 && c != 15) rest.push_back(l1[static_cast<std::size_t>(c)]);
    for (std::size_t i = 1; i < rest.size(); ++i) CHECK(rest[i] == rest[i - 1] + 1);
    CHECK(rest.front() == 1);
    CHECK(rest.back() == 17);
}

TEST_CASE("empty incipient set gives the identity mapping", "[hierarchy]") {
    const auto map = make_label_map(7, std::vector<int>{});
    for (int c = 0; c < 7; ++c) CHECK(map.forward[static_cast<std::size_t>(c)] == c);
    CHECK(map.level1_classes() == 7);
    CHECK(map.level2 == std::vector<int>{0});
}

TEST_CASE("regrouping round-trips every non-merged class", "[hierarchy]") {
    const std::vector<int> inc{2, 5};
    const auto map = make_label_map(8, inc, 1);
    for (int c = 0; c < 8; ++c) {
        const int l1 = map.forward[static_cast<std::size_t>(c)];
        const int back = map.inverse[static_cast<std::size_t>(l1)];
        if (c == 1 || c == 2 || c == 5) {
            CHECK(l1 == map.merged);
            CHECK(back == 1);
        } else {
            CHECK(back == c);
        }
    }
    CHECK(map.level2_index(5) == 2);
    CHECK_THROWS_AS(map.level2_index(3), LabelError);
}

TEST_CASE("labels outside the alphabet are rejected", "[hierarchy]") {
    const std::vector<int> bad_inc{21};
    CHECK_THROWS_AS(make_label_map(21, bad_inc), LabelError);
    const std::vector<int> normal_inc{0};
    CHECK_THROWS_AS(make_label_map(21, normal_inc), LabelError);
    const std::vector<int> inc{3};
    const std::vector<int> labels{1, 2, 25};
    CHECK_THROWS_AS(regroup_labels(labels, inc, 21), LabelError);
}

TEST_CASE("hierarchical training sizes each level from the map", "[hierarchy]") {
    const auto& h = toy_model();
    CHECK(h.level1.config.classes == 3);
    CHECK(h.level2.config.classes == 3);
    CHECK(h.level1.params.class_count() == 3);
    CHECK(h.level2.params.class_count() == 3);
}

TEST_CASE("level-2 scaler is fit on normal and incipient windows only", "[hierarchy]") {
    const auto& h = toy_model();
    const auto train = toy_windows(1);
    const auto s1 = fit_scaler(train);
    const auto s2 = fit_scaler(level2_view(train, h.map));
    CHECK(h.level1.scaler.mean == s1.mean);
    CHECK(h.level1.scaler.std == s1.std);
    CHECK(h.level2.scaler.mean == s2.mean);
    CHECK(h.level2.scaler.std == s2.std);
    CHECK(s1.mean != s2.mean);
}

TEST_CASE("routing calls level 2 exactly when level 1 picks the merged class", "[hierarchy]") {
    const auto& h = toy_model();
    const auto test = toy_windows(9);
    const auto p1 = predict_raw(test, h.level1);
    const auto p2 = predict_raw(test, h.level2);
    const auto routed = infer_batch(test, h);
    std::size_t to_level2 = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const bool merged = p1[i] == h.map.merged;
        CHECK(routed[i].used_level2 == merged);
        const int expected = merged ? h.map.level2[static_cast<std::size_t>(p2[i])]
                                    : h.map.inverse[static_cast<std::size_t>(p1[i])];
        CHECK(routed[i].label == expected);
        to_level2 += merged;
    }
    CHECK(to_level2 > 0);
    CHECK(to_level2 < test.size());
}

TEST_CASE("combined metrics tally the routed predictions", "[hierarchy]") {
    const auto& h = toy_model();
    const auto test = toy_windows(9);
    const auto routed = infer_batch(test, h);
    ConfusionMatrix brute(5);
    for (std::size_t i = 0; i < test.size(); ++i)
        ++brute.at(static_cast<std::size_t>(test.label(i)), static_cast<std::size_t>(routed[i].label));
    const auto rep = combined_metrics(test, h);
    CHECK(rep.matrix == brute);
    CHECK(rep.matrix.classes == 5);
    CHECK(rep.horizon == 4);
    // strong faults are separated by level 1 alone
    CHECK(*rep.fdr[1] > 0.9);
    CHECK(*rep.fdr[2] > 0.9);
}

TEST_CASE("an incipient window routed to a strong fault counts as a miss", "[hierarchy]") {
    auto h = toy_model();
    // force level 1 to always answer strong fault 1
    std::fill(h.level1.params.Wc.data.begin(), h.level1.params.Wc.data.end(), 0.0);
    std::fill(h.level1.params.bc.begin(), h.level1.params.bc.end(), 0.0);
    h.level1.params.bc[static_cast<std::size_t>(h.map.forward[1])] = 5.0;
    const auto test = toy_windows(4);
    const auto rep = combined_metrics(test, h);
    CHECK(*rep.fdr[1] == 1.0);
    CHECK(*rep.fdr[3] == 0.0);
    CHECK(*rep.fdr[4] == 0.0);
    CHECK(rep.matrix.at(3, 1) == rep.matrix.row_sum(3));
}

TEST_CASE("infer rejects windows of the wrong size", "[hierarchy]") {
    const auto& h = toy_model();
    std::vector<double> w(7, 0.0);
    CHECK_THROWS_AS(infer(w, h), DimensionError);
}

namespace {

// A level model whose answer is fixed by its classifier bias.
TrainedModel constant_model(std::size_t classes, std::size_t answer) {
    ModelConfig c;
    c.input_dim = 2;
    c.encoder = {2};
    c.decoder = {2};
    c.horizon = 3;
    c.classes = classes;
    TrainedModel m;
    m.config = c;
    m.params = init_model_params(c);
    std::fill(m.params.Wc.data.begin(), m.params.Wc.data.end(), 0.0);
    std::fill(m.params.bc.begin(), m.params.bc.end(), 0.0);
    m.params.bc[answer] = 1.0;
    m.scaler = Scaler::identity(2);
    return m;
}

HierarchicalModel tep_shaped(int level1_answer, std::size_t level2_answer) {
    const std::vector<int> inc{3, 9, 15};
    HierarchicalModel h;
    h.map = make_label_map(21, inc);
    h.level1 = constant_model(18, static_cast<std::size_t>(h.map.forward[static_cast<std::size_t>(level1_answer)]));
    h.level2 = constant_model(4, level2_answer);
    return h;
}

} // namespace

TEST_CASE("hand-set levels route as expected", "[hierarchy]") {
    const std::vector<double> w(6, 0.25);
    SECTION("a non-incipient level-1 answer is final") {
        const auto r = infer(w, tep_shaped(5, 2));
        CHECK(r.label == 5);
        CHECK_FALSE(r.used_level2);
    }
    SECTION("a merged answer defers to level 2") {
        const auto h = tep_shaped(0, 2);
        const auto r = infer(w, h);
        CHECK(r.used_level2);
        CHECK(r.label == 9);
        for (std::size_t k = 0; k < 4; ++k) {
            const auto hk = tep_shaped(0, k);
            CHECK(infer(w, hk).label == std::vector<int>{0, 3, 9, 15}[k]);
        }
    }
}

TEST_CASE("perfect routing yields a diagonal report", "[hierarchy]") {
    // one window per class; each class gets a hierarchy that answers it
    for (int c : {0, 4, 15}) {
        const bool inc = c == 0 || c == 15;
        const auto h = tep_shaped(inc ? 0 : c, c == 15 ? 3 : 0);
        const auto test = WindowBatch::from_dense(2, 3, 2, std::vector<double>(12, 0.1), {c, c});
        const auto rep = combined_metrics(test, h);
        CHECK(rep.matrix.at(static_cast<std::size_t>(c), static_cast<std::size_t>(c)) == 2);
        CHECK(rep.matrix.total() == 2);
        CHECK(*rep.fdr[static_cast<std::size_t>(c)] == 1.0);
        if (c == 0) CHECK(*rep.far == 0.0);
    }
}
