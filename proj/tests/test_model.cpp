#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "advf/attacks.hpp"
#include "advf/model.hpp"
#include "advf/rng.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace advf;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("advf_test_" + name)).string();
}

}  // namespace

TEST_SUITE("nets") {

TEST_CASE("spec invariants: skips, category counts, bad specs") {
    ModelSpec a = ModelSpec::net_a(32);
    CHECK(a.skip_connection_count() == 0);
    ModelSpec b = ModelSpec::net_b(32);
    CHECK(b.skip_connection_count() >= 1);
    CHECK(a.num_categories == 10);
    ModelSpec det = ModelSpec::detector(FeatureMode::CoOccur, 32);
    CHECK(det.input_shape == Shape{256, 256, 6});
    CHECK(det.num_categories == 13);
    ModelSpec det_direct = ModelSpec::detector(FeatureMode::Direct, 48);
    CHECK(det_direct.input_shape == Shape{48, 48, 3});

    ModelSpec broken = a;
    broken.layers.push_back({LayerDef::Kind::Save});
    broken.layers.push_back({LayerDef::Kind::AddSaved});
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);  // net-A with a skip
    CHECK_THROWS_AS(build_model(ModelSpec::net_b(8), 1), std::invalid_argument);  // pools below 1x1
}

TEST_CASE("same seed twice gives bit-identical weights") {
    Checkpoint c1 = build_model(ModelSpec::net_a(32), 1234);
    Checkpoint c2 = build_model(ModelSpec::net_a(32), 1234);
    REQUIRE(c1.weights.size() == c2.weights.size());
    for (size_t i = 0; i < c1.weights.size(); ++i) {
        CHECK(c1.weights[i].v == c2.weights[i].v);
    }
    Checkpoint c3 = build_model(ModelSpec::net_a(32), 1235);
    CHECK(c1.weights[0].v != c3.weights[0].v);
}

TEST_CASE("net-A forward on a zero image yields finite logits") {
    Checkpoint ckpt = build_model(ModelSpec::net_a(32), 9);
    std::vector<float> probs = predict(ckpt, Tensor({32, 32, 3}));
    double sum = 0.0;
    for (float p : probs) {
        CHECK(std::isfinite(p));
        sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("net-B forward equals a straight-line plain-loop oracle") {
    const int S = 16;
    Checkpoint ckpt = build_model(ModelSpec::net_b(S), 4242);
    Rng rng(88);
    Tensor img({S, S, 3});
    for (float& v : img.v) v = static_cast<float>(rng.uniform());

    NetGraph net(ckpt.spec, &ckpt.weights);
    net.g.set_input(net.input, img);
    const Tensor& logits = net.g.forward(net.logits);

    // oracle: stem conv s2 -> relu -> 3x [resblock -> pool] -> dense
    const auto& W = ckpt.weights;
    int h = 0, w = 0;
    auto act = oracle::conv2d_ref(img.v, S, S, 3, W[0].v, 3, 3, 16, W[1].v, 2, 1, h, w);
    act = oracle::relu_ref(act);
    size_t widx = 2;
    for (int block = 0; block < 3; ++block) {
        auto saved = act;
        int h2 = 0, w2 = 0;
        auto y = oracle::conv2d_ref(act, h, w, 16, W[widx].v, 3, 3, 16, W[widx + 1].v, 1, 1, h2, w2);
        y = oracle::relu_ref(y);
        y = oracle::conv2d_ref(y, h2, w2, 16, W[widx + 2].v, 3, 3, 16, W[widx + 3].v, 1, 1, h2, w2);
        widx += 4;
        y = oracle::add_ref(y, saved);
        y = oracle::relu_ref(y);
        act = oracle::maxpool_ref(y, h2, w2, 16, 2, h, w);
    }
    auto z = oracle::dense_ref(act, W[widx].v, W[widx + 1].v, h * w * 16, 10);

    REQUIRE(logits.v.size() == z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        CHECK(gradcheck::rel_err(logits.v[i], z[i]) < 1e-5);
    }
}

TEST_CASE("net-B gradients pass the finite-difference check") {
    Checkpoint ckpt = build_model(ModelSpec::net_b(16), 31);
    NetGraph net(ckpt.spec, &ckpt.weights);
    net.g.set_ce_target(net.loss, 3);
    Rng rng(17);
    Tensor img({16, 16, 3});
    for (float& v : img.v) v = static_cast<float>(rng.uniform());
    gradcheck::Problem p{&net.g, net.loss, &ckpt.weights, {{net.input, img}}};
    p.stride = 41;  // spot-check coordinates; the full sweep lives in the small-graph cases
    gradcheck::Result res = gradcheck::run(p);
    CHECK(res.coordinates > 300);
    CHECK(res.excluded_fraction() < 0.05);
    CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("predict: probabilities sum to one and shifted logits tie out") {
    // softmax invariance checked on exactly representable logits and shift
    std::vector<float> logits{0.5f, 1.25f, -0.75f, 2.0f};
    std::vector<float> shifted = logits;
    for (float& z : shifted) z += 2.0f;
    CHECK(softmax(logits) == softmax(shifted));

    Checkpoint ckpt = build_model(ModelSpec::net_a(32), 11);
    Rng rng(3);
    Tensor img({32, 32, 3});
    for (float& v : img.v) v = static_cast<float>(rng.uniform());
    std::vector<float> p1 = predict(ckpt, img);
    std::vector<float> p2 = predict(ckpt, img);
    CHECK(p1 == p2);  // determinism
    double sum = 0.0;
    for (float p : p1) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    CHECK_THROWS_AS(predict(ckpt, Tensor({16, 16, 3})), std::invalid_argument);
}

TEST_CASE("penultimate features have the spec width and are deterministic") {
    Checkpoint det = build_model(ModelSpec::detector(FeatureMode::Direct, 32), 5);
    Rng rng(6);
    Tensor f({32, 32, 3});
    for (float& v : f.v) v = static_cast<float>(rng.uniform());
    std::vector<float> feat = penultimate_features(det, f);
    CHECK(feat.size() == 64);  // relu(dense 64) feeds the final dense
    CHECK(feat == penultimate_features(det, f));
}

TEST_CASE("penultimate features move under a strong attack") {
    Checkpoint target = build_model(ModelSpec::net_a(32), 13);
    Checkpoint det = build_model(ModelSpec::detector(FeatureMode::Direct, 32), 14);
    Rng rng(15);
    Image img(32, 32);
    for (auto& p : img.pix) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
    AttackConfig cfg;
    cfg.family = AttackFamily::PGD;
    cfg.step_size = 3;
    cfg.num_steps = 8;
    cfg.target_label = 4;
    Image adv = pgd_targeted(target, img, cfg).adversarial;
    std::vector<float> f_clean = penultimate_features(det, preprocess(img, FeatureMode::Direct).t);
    std::vector<float> f_adv = penultimate_features(det, preprocess(adv, FeatureMode::Direct).t);
    double l2 = 0.0;
    for (size_t i = 0; i < f_clean.size(); ++i) {
        l2 += (f_clean[i] - f_adv[i]) * (f_clean[i] - f_adv[i]);
    }
    CHECK(std::sqrt(l2) > 0.0);
}

TEST_CASE("checkpoint round-trip reproduces bit-identical predictions") {
    Checkpoint ckpt = build_model(ModelSpec::net_b(16), 77);
    ckpt.meta.epoch = 4;
    ckpt.meta.val_loss = 0.125;
    std::string path = tmp_path("roundtrip.advf");
    save_checkpoint(ckpt, path);
    Checkpoint back = load_checkpoint(path);
    CHECK(back.meta.epoch == 4);
    CHECK(back.meta.val_loss == 0.125);
    CHECK(back.meta.seed == 77);
    Rng rng(12);
    Tensor img({16, 16, 3});
    for (float& v : img.v) v = static_cast<float>(rng.uniform());
    CHECK(predict(ckpt, img) == predict(back, img));
    std::filesystem::remove(path);
}

TEST_CASE("detector checkpoints keep their mode and catalog") {
    Checkpoint det = build_model(ModelSpec::detector(FeatureMode::CoOccur, 32), 2);
    det.mode = FeatureMode::CoOccur;
    det.catalog = LabelCatalog::default_catalog();
    std::string path = tmp_path("detector.advf");
    save_checkpoint(det, path);
    Checkpoint back = load_checkpoint(path);
    REQUIRE(back.mode.has_value());
    CHECK(*back.mode == FeatureMode::CoOccur);
    REQUIRE(back.catalog.has_value());
    CHECK(back.catalog->size() == 13);
    CHECK(back.catalog->entries[0].name == "original");
    std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoint files are rejected") {
    std::string path = tmp_path("corrupt.advf");
    write_text_file(path, "not a checkpoint at all");
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    Checkpoint ckpt = build_model(ModelSpec::net_a(32), 1);
    save_checkpoint(ckpt, path);
    std::string bytes = read_text_file(path);
    write_text_file(path, bytes.substr(0, bytes.size() / 2));  // truncate
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
