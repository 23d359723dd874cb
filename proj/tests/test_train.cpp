#include <doctest.h>

#include <memory>
#include <stdexcept>

#include "advf/rng.hpp"
#include "advf/train.hpp"

using namespace advf;

namespace {

// tiny fixed 2-class problem on 8x8x3 inputs
TrainSet toy_set(int count, uint64_t seed) {
    auto images = std::make_shared<std::vector<Tensor>>();
    auto labels = std::make_shared<std::vector<int>>();
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Tensor t({8, 8, 3});
        int label = i % 2;
        for (size_t k = 0; k < t.v.size(); ++k) {
            t.v[k] = static_cast<float>(rng.uniform(0.0, 0.3) + (label ? 0.6 : 0.0));
        }
        images->push_back(std::move(t));
        labels->push_back(label);
    }
    TrainSet s;
    s.count = count;
    s.input = [images](int i) { return (*images)[static_cast<size_t>(i)]; };
    s.label = [labels](int i) { return (*labels)[static_cast<size_t>(i)]; };
    return s;
}

ModelSpec toy_spec() {
    using K = LayerDef::Kind;
    ModelSpec s;
    s.arch = ArchId::Detector;
    s.input_shape = {8, 8, 3};
    s.num_categories = 2;
    s.layers = {{K::Conv, 4, 3, 1, 1}, {K::Relu}, {K::MaxPool, 0, 2}, {K::Flatten}, {K::Dense, 8}, {K::Relu},
                {K::Dense, 2}};
    return s;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("one epoch on a 2-sample set reduces the training loss") {
    TrainSet set = toy_set(2, 1);
    TrainOptions opt;
    opt.epochs = 1;
    opt.batch_size = 2;
    opt.lr = 0.002f;
    opt.seed = 3;
    Checkpoint init = build_model(toy_spec(), opt.seed);
    auto [before, acc0] = evaluate_loss_acc(toy_spec(), init.weights, set, 1);
    TrainResult r = train(toy_spec(), set, set, opt);
    auto [after, acc1] = evaluate_loss_acc(toy_spec(), r.best.weights, set, 1);
    CHECK(after < before);
}

TEST_CASE("lr = 0 leaves the checkpoint at the initialization") {
    TrainSet set = toy_set(4, 2);
    TrainOptions opt;
    opt.epochs = 2;
    opt.batch_size = 2;
    opt.lr = 0.0f;
    opt.seed = 9;
    TrainResult r = train(toy_spec(), set, set, opt);
    Checkpoint init = build_model(toy_spec(), opt.seed);
    REQUIRE(r.best.weights.size() == init.weights.size());
    for (size_t i = 0; i < init.weights.size(); ++i) {
        CHECK(r.best.weights[i].v == init.weights[i].v);
    }
}

TEST_CASE("reported checkpoint carries the minimum validation loss in the log") {
    TrainSet tr = toy_set(12, 4);
    TrainSet va = toy_set(6, 5);
    TrainOptions opt;
    opt.epochs = 5;
    opt.batch_size = 4;
    opt.lr = 0.02f;
    opt.seed = 10;
    TrainResult r = train(toy_spec(), tr, va, opt);
    REQUIRE(r.log.size() == 5);
    double min_val = r.log[0].val_loss;
    for (const EpochLog& e : r.log) min_val = std::min(min_val, e.val_loss);
    CHECK(r.best.meta.val_loss == doctest::Approx(min_val).epsilon(1e-7));
    for (const EpochLog& e : r.log) CHECK(r.best.meta.val_loss <= e.val_loss + 1e-12);
    CHECK(r.best.meta.epoch >= 1);
}

TEST_CASE("training is deterministic and thread-count independent") {
    TrainSet tr = toy_set(10, 6);
    TrainSet va = toy_set(4, 7);
    TrainOptions opt;
    opt.epochs = 2;
    opt.batch_size = 4;
    opt.lr = 0.01f;
    opt.seed = 11;
    opt.threads = 1;
    TrainResult r1 = train(toy_spec(), tr, va, opt);
    opt.threads = 3;
    TrainResult r2 = train(toy_spec(), tr, va, opt);
    REQUIRE(r1.best.weights.size() == r2.best.weights.size());
    for (size_t i = 0; i < r1.best.weights.size(); ++i) {
        CHECK(r1.best.weights[i].v == r2.best.weights[i].v);
    }
    REQUIRE(r1.log.size() == r2.log.size());
    for (size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].val_loss == r2.log[i].val_loss);
        CHECK(r1.log[i].train_loss == r2.log[i].train_loss);
    }
}

TEST_CASE("empty splits and out-of-range labels are rejected") {
    TrainSet empty;
    TrainSet ok = toy_set(2, 8);
    TrainOptions opt;
    opt.epochs = 1;
    CHECK_THROWS_AS(train(toy_spec(), empty, ok, opt), std::invalid_argument);
    CHECK_THROWS_AS(train(toy_spec(), ok, empty, opt), std::invalid_argument);

    TrainSet bad = ok;
    bad.label = [](int) { return 7; };  // only 2 categories exist
    CHECK_THROWS_AS(train(toy_spec(), bad, ok, opt), std::invalid_argument);
}

TEST_CASE("train log formatting is line-delimited") {
    std::vector<EpochLog> log{{1, 0.5, 0.6, 0.25}, {2, 0.4, 0.55, 0.5}};
    std::string text = format_train_log(log);
    CHECK(text == "epoch\ttrain_loss\tval_loss\tval_acc\n1\t0.500000\t0.600000\t0.250000\n2\t0.400000\t0.550000\t0.500000\n");
}

}  // TEST_SUITE
