#include <doctest.h>

#include <cmath>

#include "advf/pipeline.hpp"
#include "advf/rng.hpp"

using namespace advf;

namespace {

std::vector<float> one_hot(int k, int n = 13) {
    std::vector<float> y(static_cast<size_t>(n), 0.0f);
    y[static_cast<size_t>(k)] = 1.0f;
    return y;
}

std::vector<float> random_probs(Rng& rng, int n = 13) {
    std::vector<float> y(static_cast<size_t>(n));
    double sum = 0.0;
    for (float& v : y) {
        v = static_cast<float>(rng.uniform(0.0, 1.0));
        sum += v;
    }
    for (float& v : y) v = static_cast<float>(v / sum);
    return y;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("default catalog matches the training grid") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    CHECK(cat.size() == 13);
    CHECK(cat.original_index() == 0);
    int fgsm = 0, pgd = 0, untampered = 0;
    for (const CatalogEntry& e : cat.entries) {
        if (!e.family) {
            ++untampered;
        } else if (*e.family == AttackFamily::FGSM) {
            ++fgsm;
            CHECK(e.ss.has_value());
            CHECK(!e.ns.has_value());
        } else {
            ++pgd;
            CHECK(e.ss.has_value());
            CHECK(e.ns.has_value());
        }
    }
    CHECK(untampered == 1);
    CHECK(fgsm == 4);
    CHECK(pgd == 8);
    CHECK(cat.members(AttackFamily::PGD, Network::NetA).size() == 4);
    CHECK(cat.members(AttackFamily::FGSM, Network::None).size() == 4);

    // the attack grid: 12 combos per network, 6 of them training
    std::vector<AttackCombo> grid = attack_grid(Network::NetA);
    CHECK(grid.size() == 12);
    int training = 0;
    for (const AttackCombo& c : grid) training += c.training ? 1 : 0;
    CHECK(training == 6);
}

TEST_CASE("meta task partitions validate and cover") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    for (const MetaTask& t : standard_tasks(cat)) {
        CHECK_NOTHROW(t.validate(cat.size()));
    }
    CHECK(binary_detection_task(cat).sets[1].size() == 12);
    CHECK(attribution_task(cat).num_sets() == 5);
    MetaTask broken = binary_detection_task(cat);
    broken.sets[1].pop_back();
    CHECK_THROWS_AS(broken.validate(cat.size()), std::invalid_argument);
}

TEST_CASE("aggregate: one-hot original, uniform vector, score conservation, ties") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    MetaTask task = binary_detection_task(cat);

    AggregateResult r = aggregate(one_hot(cat.original_index()), task);
    CHECK(r.argmax_set == 0);
    CHECK(r.scores[0] == doctest::Approx(1.0));
    CHECK(r.scores[1] == doctest::Approx(0.0));

    std::vector<float> uniform(13, 1.0f / 13.0f);
    r = aggregate(uniform, task);
    CHECK(r.scores[1] == doctest::Approx(12.0 / 13.0));
    CHECK(r.argmax_set == 1);

    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<float> y = random_probs(rng);
        for (const MetaTask& t : standard_tasks(cat)) {
            AggregateResult agg = aggregate(y, t);
            double total = 0.0;
            for (double s : agg.scores) total += s;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
        }
    }

    // tie breaks toward the lowest set index
    MetaTask two = binary_detection_task(cat);
    std::vector<float> tied(13, 0.0f);
    tied[0] = 0.5f;
    tied[1] = 0.5f;
    CHECK(aggregate(tied, two).argmax_set == 0);
}

TEST_CASE("estimate_params: weighted midpoint, one-hot fidelity, uniform midpoint") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    // S = {PGD netA ns8 ss1, PGD netA ns16 ss1} with weights 0.25/0.75 -> ns 14
    int ns8 = cat.find("netA_PGD_ss1_ns8");
    int ns16 = cat.find("netA_PGD_ss1_ns16");
    REQUIRE(ns8 >= 0);
    REQUIRE(ns16 >= 0);
    std::vector<float> y(13, 0.0f);
    y[static_cast<size_t>(ns8)] = 0.25f;
    y[static_cast<size_t>(ns16)] = 0.75f;
    ParamEstimate est = estimate_params(y, {ns8, ns16}, cat);
    REQUIRE(est.ns.has_value());
    CHECK(*est.ns == doctest::Approx(14.0));

    // one-hot on ss=3 recovers exactly 3
    int ss3 = cat.find("netB_FGSM_ss3");
    est = estimate_params(one_hot(ss3), {cat.find("netB_FGSM_ss1"), ss3}, cat);
    REQUIRE(est.ss.has_value());
    CHECK(*est.ss == doctest::Approx(3.0));
    CHECK(!est.ns.has_value());  // FGSM members carry no ns

    // uniform weights over {ss1, ss3} -> the held-out interior value 2
    std::vector<float> u(13, 0.0f);
    u[static_cast<size_t>(cat.find("netB_FGSM_ss1"))] = 0.5f;
    u[static_cast<size_t>(ss3)] = 0.5f;
    est = estimate_params(u, {cat.find("netB_FGSM_ss1"), ss3}, cat);
    CHECK(*est.ss == doctest::Approx(2.0));
}

TEST_CASE("estimate_params: zero mass is indeterminate, not a division") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    std::vector<float> y(13, 0.0f);
    y[0] = 1.0f;  // all mass on original
    ParamEstimate est = estimate_params(y, cat.members(AttackFamily::PGD, Network::NetA), cat);
    CHECK(est.indeterminate);
    CHECK(!est.ss.has_value());
    CHECK(!est.ns.has_value());
    CHECK_THROWS_AS(estimate_params(y, {}, cat), std::invalid_argument);
}

TEST_CASE("estimates stay in the convex hull of the member parameters") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> y = random_probs(rng);
        Verdict v = verdict_from_probabilities(y, cat);
        if (!v.tampered) continue;
        REQUIRE(v.ss_est.has_value());
        CHECK(*v.ss_est >= 1.0);
        CHECK(*v.ss_est <= 3.0);
        if (*v.family == AttackFamily::PGD) {
            REQUIRE(v.ns_est.has_value());
            CHECK(*v.ns_est >= 8.0);
            CHECK(*v.ns_est <= 16.0);
        } else {
            CHECK(!v.ns_est.has_value());
        }
    }
}

TEST_CASE("verdict cascade honors the contract") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    // untampered one-hot: no estimates
    Verdict v = verdict_from_probabilities(one_hot(0), cat);
    CHECK(!v.tampered);
    CHECK(!v.family.has_value());
    CHECK(!v.ss_est.has_value());
    CHECK(!v.ns_est.has_value());

    // PGD one-hot: both parameters; FGSM one-hot: ss only
    int pgd = cat.find("netB_PGD_ss3_ns16");
    v = verdict_from_probabilities(one_hot(pgd), cat);
    CHECK(v.tampered);
    CHECK(*v.family == AttackFamily::PGD);
    CHECK(*v.network == Network::NetB);
    CHECK(*v.ss_est == doctest::Approx(3.0));
    CHECK(*v.ns_est == doctest::Approx(16.0));

    int fgsm = cat.find("netA_FGSM_ss1");
    v = verdict_from_probabilities(one_hot(fgsm), cat);
    CHECK(*v.family == AttackFamily::FGSM);
    CHECK(*v.network == Network::NetA);
    CHECK(*v.ss_est == doctest::Approx(1.0));
    CHECK(!v.ns_est.has_value());
}

TEST_CASE("verdict is invariant under positive rescaling of the outputs") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<float> y = random_probs(rng);
        std::vector<float> scaled = y;
        const float a = static_cast<float>(rng.uniform(0.1, 8.0));
        for (float& v : scaled) v *= a;
        Verdict v1 = verdict_from_probabilities(y, cat);
        Verdict v2 = verdict_from_probabilities(scaled, cat);
        CHECK(v1.tampered == v2.tampered);
        if (v1.tampered) {
            CHECK(*v1.family == *v2.family);
            CHECK(*v1.network == *v2.network);
            CHECK(*v1.ss_est == doctest::Approx(*v2.ss_est).epsilon(1e-5));
            if (v1.ns_est) CHECK(*v1.ns_est == doctest::Approx(*v2.ns_est).epsilon(1e-5));
        }
    }
}

TEST_CASE("classify rejects a feature-mode mismatch") {
    Checkpoint det = build_model(ModelSpec::detector(FeatureMode::Laplace, 32), 3);
    det.mode = FeatureMode::Laplace;
    det.catalog = LabelCatalog::default_catalog();
    Image img(32, 32);
    FeatureTensor wrong = preprocess(img, FeatureMode::Direct);
    CHECK_THROWS_AS(classify(det, wrong), std::invalid_argument);
    FeatureTensor right = preprocess(img, FeatureMode::Laplace);
    std::vector<float> y = classify(det, right);
    CHECK(y.size() == 13);
}

TEST_CASE("verdict serialization carries the record fields") {
    LabelCatalog cat = LabelCatalog::default_catalog();
    Verdict v = verdict_from_probabilities(one_hot(cat.find("netA_PGD_ss1_ns8")), cat);
    Json j = verdict_to_json(v, cat);
    CHECK(j["tampered"] == true);
    CHECK(j["family"] == "PGD");
    CHECK(j["network"] == "net-A");
    CHECK(j["ss_est"].get<double>() == doctest::Approx(1.0));
    CHECK(j["ns_est"].get<double>() == doctest::Approx(8.0));
    CHECK(j["probabilities"].size() == 13);
}

}  // TEST_SUITE
