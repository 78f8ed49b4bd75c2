#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "hdrnn/finite_diff.hpp"
#include "hdrnn/model.hpp"
#include "hdrnn/train.hpp"
#include "hdrnn/tune.hpp"
#include "test_support.hpp"

using namespace hdrnn;
using hdrnn::testing::max_rel_error;
using hdrnn::testing::random_batch;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.input_dim = 2;
    c.encoder = {3};
    c.decoder = {2};
    c.classes = 3;
    c.horizon = 4;
    c.seed = 42;
    return c;
}

// Term-by-term loss written directly from the objective with nested loops
// over plain vectors.
double naive_loss(const std::vector<std::vector<std::vector<double>>>& x,
                  const std::vector<std::vector<std::vector<double>>>& xhat,
                  const std::vector<std::vector<double>>& p, const std::vector<int>& y, double l1, double l2,
                  double l3, const std::vector<std::vector<double>>& weight_blocks) {
    const double n = static_cast<double>(x.size());
    double rec = 0.0, ce = 0.0, reg = 0.0;
    for (std::size_t s = 0; s < x.size(); ++s)
        for (std::size_t t = 0; t < x[s].size(); ++t)
            for (std::size_t j = 0; j < x[s][t].size(); ++j) rec += std::pow(x[s][t][j] - xhat[s][t][j], 2);
    for (std::size_t s = 0; s < p.size(); ++s)
        for (std::size_t c = 0; c < p[s].size(); ++c) ce += -(static_cast<int>(c) == y[s] ? 1.0 : 0.0) * std::log(p[s][c]);
    for (const auto& w : weight_blocks)
        for (double v : w) reg += v * v;
    return (l1 * rec + l2 * ce + l3 * reg) / n;
}

} // namespace

TEST_CASE("model_forward shapes and probability rows", "[model]") {
    ModelConfig c;
    c.input_dim = 5;
    c.encoder = {6, 4};
    c.decoder = {6, 5};
    c.classes = 4;
    c.horizon = 7;
    auto p = init_model_params(c);
    Rng rng(1);
    auto batch = random_batch(rng, 9, 7, 5, 4);
    auto out = model_forward(batch, p, c);
    REQUIRE(out.reconstructions.size() == 9);
    for (const auto& r : out.reconstructions) {
        REQUIRE(r.rows == 7);
        REQUIRE(r.cols == 5);
    }
    REQUIRE(out.probs.rows == 9);
    REQUIRE(out.probs.cols == 4);
    REQUIRE(out.latents.cols == 4);
    for (std::size_t i = 0; i < 9; ++i) {
        double s = 0.0;
        for (double v : out.probs.row(i)) {
            REQUIRE(v > 0.0);
            s += v;
        }
        REQUIRE(std::abs(s - 1.0) < 1e-12);
    }

    auto wrong = random_batch(rng, 2, 7, 3, 4);
    REQUIRE_THROWS_AS(model_forward(wrong, p, c), DimensionError);
}

TEST_CASE("second-level reference architecture", "[model]") {
    ModelConfig c;
    c.input_dim = 52;
    c.encoder = {284, 100};
    c.decoder = {278, 52};
    c.classes = 4;
    c.horizon = 150;
    auto p = init_model_params(c);
    REQUIRE(p.layers.size() == 4);
    REQUIRE(p.encoder_depth == 2);
    REQUIRE(p.layers[0].W.rows == 4 * 284);
    REQUIRE(p.layers[1].hidden_size() == 100);
    REQUIRE(p.layers[2].hidden_size() == 278);
    REQUIRE(p.layers[3].hidden_size() == 52);
    REQUIRE(p.Wc.rows == 4);
    REQUIRE(p.Wc.cols == 100);
}

TEST_CASE("model config validation", "[model]") {
    auto c = tiny_config();
    c.decoder = {3};
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.lambda2 = -1.0;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
    c = tiny_config();
    c.classes = 1;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
    REQUIRE(ModelConfig::mirrored_decoder(std::vector<std::size_t>{8, 4}, 3) == std::vector<std::size_t>{8, 3});
}

TEST_CASE("fixed seed and input reproduce a golden snapshot", "[model]") {
    auto c = tiny_config();
    auto p = init_model_params(c);
    std::vector<double> data;
    for (int k = 0; k < 8; ++k) data.push_back(0.1 * k - 0.3);
    auto b = WindowBatch::from_dense(1, 4, 2, data, {1});
    auto out = model_forward(b, p, c);
    // Produced once by this implementation (single-threaded) and frozen.
    const std::vector<double> probs{0x1.5351e5b6955ccp-2, 0x1.5c0e64f6054f5p-2, 0x1.509fb55365541p-2};
    const std::vector<double> recon{-0x1.f42cd7a5b6a4dp-8, -0x1.07bbda967a2a7p-7, -0x1.b46adb5442a98p-7,
                                    -0x1.cac7ead7ad4dap-7, -0x1.a5aa8fd28bd72p-7, -0x1.b22affb864735p-7,
                                    -0x1.4e5a36fdd8c0ep-8, -0x1.3352f341fd693p-8};
    const std::vector<double> latent{0x1.e5326f5604d1ep-6, 0x1.4521ba6178a9dp-4, 0x1.cfc55f3bec4d1p-8};
    REQUIRE(out.probs.data == probs);
    REQUIRE(out.reconstructions[0].data == recon);
    REQUIRE(out.latents.data == latent);
}

TEST_CASE("sae_loss examples", "[loss]") {
    auto c = tiny_config();
    auto p = init_model_params(c);
    Rng rng(3);
    auto batch = random_batch(rng, 5, 4, 2, 3);

    SECTION("perfect reconstruction and certain correct class give zero") {
        std::vector<Tensor2> recon;
        Tensor2 probs(5, 3);
        for (std::size_t s = 0; s < 5; ++s) {
            recon.push_back(batch.window_tensor(s));
            probs(s, static_cast<std::size_t>(batch.label(s))) = 1.0;
        }
        auto t = sae_loss(recon, batch, probs, batch.labels(), {1.0, 1.0, 0.0}, p);
        REQUIRE(t.total == 0.0);
        // with a regularizer the loss is exactly the weight penalty over N
        auto r = sae_loss(recon, batch, probs, batch.labels(), {1.0, 1.0, 0.3}, p);
        REQUIRE(r.total == 0.3 * squared_weight_sum(p) / 5.0);
    }

    SECTION("uniform probabilities over 21 classes cost ln 21 per window") {
        Tensor2 probs(5, 21, 1.0 / 21.0);
        std::vector<Tensor2> recon(5, Tensor2(4, 2));
        auto t = sae_loss(recon, batch, probs, batch.labels(), {0.0, 2.5, 0.0}, p);
        REQUIRE(t.total == Catch::Approx(2.5 * std::log(21.0)).margin(1e-12));
        REQUIRE(std::log(21.0) == Catch::Approx(3.0445).margin(1e-4));
    }

    SECTION("negative weight is a config error") {
        auto out = model_forward(batch, p, c);
        REQUIRE_THROWS_AS(sae_loss(out, batch, {1.0, -1.0, 0.0}, p), ConfigError);
    }

    SECTION("matches the naive oracle on random tensors") {
        for (int rep = 0; rep < 10; ++rep) {
            const std::size_t n = 1 + rng.below(6);
            auto b = random_batch(rng, n, 4, 2, 3);
            std::vector<std::vector<std::vector<double>>> x(n), xh(n);
            std::vector<Tensor2> recon;
            std::vector<std::vector<double>> pv(n);
            Tensor2 probs(n, 3);
            for (std::size_t s = 0; s < n; ++s) {
                Tensor2 r(4, 2);
                x[s].resize(4);
                xh[s].resize(4);
                for (std::size_t t = 0; t < 4; ++t)
                    for (std::size_t j = 0; j < 2; ++j) {
                        r(t, j) = rng.normal();
                        x[s][t].push_back(b.window(s)[t * 2 + j]);
                        xh[s][t].push_back(r(t, j));
                    }
                recon.push_back(r);
                std::vector<double> logits{rng.normal(), rng.normal(), rng.normal()};
                pv[s] = softmax(logits);
                for (std::size_t k = 0; k < 3; ++k) probs(s, k) = pv[s][k];
            }
            std::vector<std::vector<double>> blocks;
            for (const auto& l : p.layers) {
                blocks.push_back(l.W.data);
                blocks.push_back(l.R.data);
            }
            blocks.push_back(p.Wc.data);
            const double l1 = rng.uniform(0, 2), l2 = rng.uniform(0, 2), l3 = rng.uniform(0, 2);
            auto t = sae_loss(recon, b, probs, b.labels(), {l1, l2, l3}, p);
            REQUIRE(t.total == Catch::Approx(naive_loss(x, xh, pv, b.labels(), l1, l2, l3, blocks)).margin(1e-12));
        }
    }
}

TEST_CASE("full model gradient matches central differences", "[loss][grad]") {
    Rng rng(2024);
    for (int rep = 0; rep < 25; ++rep) {
        auto inst = testing::random_grad_instance(rng);
        const auto w = loss_weights(inst.config);
        std::vector<std::size_t> idx{0, 1};
        ParamSet grad;
        const double loss = loss_and_grad(inst.batch, idx, inst.params, w, grad);
        const auto objective = [&](const ParamSet& q) {
            return sae_loss(model_forward(inst.batch, q, inst.config), inst.batch, w, q).total;
        };
        REQUIRE(loss == Catch::Approx(objective(inst.params)).margin(1e-12));
        REQUIRE(max_rel_error(grad, finite_diff_grad(objective, inst.params, 1e-5)) < 1e-6);
    }
}

TEST_CASE("objective reductions and monotone regularization", "[loss]") {
    auto c = tiny_config();
    auto p = init_model_params(c);
    Rng rng(5);
    auto batch = random_batch(rng, 6, 4, 2, 3);
    auto out = model_forward(batch, p, c);

    auto t = sae_loss(out, batch, {0.0, 1.0, 0.0}, p);
    double ce = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) ce -= std::log(out.probs(s, static_cast<std::size_t>(batch.label(s))));
    REQUIRE(std::abs(t.total - ce / 6.0) < 1e-12);

    double prev = -1.0;
    for (double l3 : {0.0, 1e-4, 1e-2, 1.0, 10.0}) {
        const double v = sae_loss(out, batch, {1.0, 1.0, l3}, p).total;
        REQUIRE(v >= prev);
        prev = v;
    }
}

namespace {

// Two separable classes: class 1 windows carry a positive offset on channel 0.
WindowBatch toy_task(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> data;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        const int y = i % 2;
        for (int t = 0; t < 5; ++t) {
            data.push_back((y ? 1.0 : -1.0) + 0.3 * rng.normal());
            data.push_back(0.5 * rng.normal());
            data.push_back(0.1 * t + 0.2 * rng.normal());
        }
        labels.push_back(y);
    }
    return WindowBatch::from_dense(10, 5, 3, data, labels);
}

ModelConfig toy_config(std::size_t epochs) {
    ModelConfig c;
    c.input_dim = 3;
    c.encoder = {4};
    c.decoder = {3};
    c.classes = 2;
    c.horizon = 5;
    c.epochs = epochs;
    c.batch_size = 4;
    c.learning_rate = 1e-2;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("train", "[train]") {
    const auto data = toy_task(1);
    const WindowBatch none;

    SECTION("zero epochs returns the initial parameters") {
        auto m = train(data, none, toy_config(0));
        REQUIRE(m.params == init_model_params(toy_config(0)));
        REQUIRE(m.history.empty());
    }

    SECTION("training lowers the loss") {
        auto cfg = toy_config(30);
        auto m = train(data, none, cfg);
        REQUIRE(m.history.size() == 30);
        const auto w = loss_weights(cfg);
        const double before = sae_loss(model_forward(data, init_model_params(cfg), cfg), data, w, init_model_params(cfg)).total;
        const double after = sae_loss(model_forward(data, m.params, cfg), data, w, m.params).total;
        REQUIRE(after < before);
        REQUIRE(m.history.back().loss < m.history.front().loss);
    }

    SECTION("500 epochs fit the toy task exactly") {
        auto m = train(data, none, toy_config(500));
        REQUIRE(accuracy(data.labels(), predict(data, m.params)) == 1.0);
    }

    SECTION("validation picks the best epoch, earliest on ties, deterministically") {
        const auto val = toy_task(2);
        auto cfg = toy_config(15);
        auto a = train(data, val, cfg);
        auto b = train(data, val, cfg);
        REQUIRE(a.params == b.params);
        double best = -1.0;
        std::size_t best_epoch = 0;
        for (const auto& r : a.history)
            if (r.val_accuracy > best) {
                best = r.val_accuracy;
                best_epoch = r.epoch;
            }
        REQUIRE(a.best_epoch == best_epoch);
        REQUIRE(accuracy(val.labels(), predict(val, a.params)) == best);
    }

    SECTION("divergence is reported with the epoch") {
        auto cfg = toy_config(3);
        std::vector<double> huge(10 * 5 * 3, 1e300);
        auto bad = WindowBatch::from_dense(10, 5, 3, huge, data.labels());
        try {
            train(bad, none, cfg);
            FAIL("expected divergence");
        } catch (const NumericError& e) {
            REQUIRE(std::string(e.what()).find("epoch 1") != std::string::npos);
        }
    }

    SECTION("label out of range is rejected") {
        auto cfg = toy_config(1);
        cfg.classes = 2;
        auto bad = data.with_labels(std::vector<int>(10, 2));
        REQUIRE_THROWS_AS(train(bad, none, cfg), LabelError);
    }
}

TEST_CASE("trained model file round-trips", "[train][serialize]") {
    auto m = train(toy_task(1), WindowBatch{}, toy_config(2));
    m.scaler = Scaler{{0.1, -2.0, 3.0}, {1.0, 0.5, 1.0 / 3.0}};
    std::stringstream ss;
    write_model(ss, m);
    auto back = read_model(ss);
    REQUIRE(back.params == m.params);
    REQUIRE(back.scaler == m.scaler);
    REQUIRE(back.config.encoder == m.config.encoder);
    REQUIRE(back.config.decoder == m.config.decoder);
    REQUIRE(back.config.learning_rate == m.config.learning_rate);
    REQUIRE(back.config.lambda3 == m.config.lambda3);

    std::ostringstream hist;
    write_history(hist, m.history);
    REQUIRE(hist.str().rfind("epoch,loss,val_accuracy\n", 0) == 0);
}

TEST_CASE("tune", "[tune]") {
    const auto tr = toy_task(1);
    const auto val = toy_task(2);
    auto base = toy_config(5);

    SECTION("reference grid carries the published learning rates") {
        auto g = SearchSpace::reference_grid();
        for (double lr : {1e-1, 2e-1, 3e-1, 1e-2})
            REQUIRE(std::find(g.learning_rates.begin(), g.learning_rates.end(), lr) != g.learning_rates.end());
        REQUIRE(g.units.front() == 10);
        REQUIRE(g.units.back() == 200);
    }

    SearchSpace space;
    space.learning_rates = {1e-2, 3e-2, 1e-1};
    space.encoder_depths = {1, 2};
    space.units = {2, 3, 4};
    space.stage_epochs = 1;

    SECTION("budget 1 returns the single sampled config") {
        auto r = tune(tr, val, base, space, 1, 11);
        REQUIRE(r.log.empty());
        REQUIRE(r.trials.size() == 1);
        Rng rng(11);
        auto expect = sample_config(base, space, rng);
        REQUIRE(r.best.encoder == expect.encoder);
        REQUIRE(r.best.learning_rate == expect.learning_rate);
        REQUIRE(r.best.seed == expect.seed);
    }

    SECTION("winner has the best accuracy of the final stage") {
        auto r = tune(tr, val, base, space, 6, 12);
        auto r2 = tune(tr, val, base, space, 6, 12);
        REQUIRE(r.best_trial == r2.best_trial);
        std::size_t last_stage = 0;
        for (const auto& rec : r.log) last_stage = std::max(last_stage, rec.stage);
        double best = -1.0;
        std::size_t who = 0;
        std::size_t competitors = 0;
        for (const auto& rec : r.log) {
            if (rec.stage != last_stage) continue;
            ++competitors;
            if (rec.val_accuracy > best) {
                best = rec.val_accuracy;
                who = rec.trial;
            }
        }
        REQUIRE(competitors >= 2);
        REQUIRE(r.best_trial == who);
        // stage lengths double
        for (const auto& rec : r.log) REQUIRE(rec.epochs == (std::size_t{1} << rec.stage));
        // 6 -> 3 -> 1: 6 + 3 trainings
        REQUIRE(r.log.size() == 9);
    }

    SECTION("empty search space is a config error") {
        SearchSpace empty;
        REQUIRE_THROWS_AS(tune(tr, val, base, empty, 2, 1), ConfigError);
    }
}
