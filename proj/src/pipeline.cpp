#include "advf/pipeline.hpp"

#include <stdexcept>

namespace advf {

std::vector<float> classify(const Checkpoint& detector, const FeatureTensor& features) {
    if (!detector.mode) throw std::invalid_argument("classify: checkpoint carries no preprocessing mode");
    if (*detector.mode != features.mode) {
        throw std::invalid_argument(std::string("classify: feature mode ") + feature_mode_name(features.mode) +
                                    " does not match detector mode " + feature_mode_name(*detector.mode));
    }
    return predict(detector, features.t);
}

AggregateResult aggregate(const std::vector<float>& y, const MetaTask& task) {
    task.validate(static_cast<int>(y.size()));
    AggregateResult res;
    res.scores.assign(task.sets.size(), 0.0);
    for (size_t s = 0; s < task.sets.size(); ++s) {
        for (int idx : task.sets[s]) res.scores[s] += y[static_cast<size_t>(idx)];
    }
    for (size_t s = 1; s < res.scores.size(); ++s) {
        if (res.scores[s] > res.scores[static_cast<size_t>(res.argmax_set)]) res.argmax_set = static_cast<int>(s);
    }
    return res;
}

ParamEstimate estimate_params(const std::vector<float>& y, const std::vector<int>& members,
                              const LabelCatalog& catalog) {
    if (members.empty()) throw std::invalid_argument("estimate_params: empty meta-class set");
    ParamEstimate est;
    double ss_num = 0.0, ss_den = 0.0, ns_num = 0.0, ns_den = 0.0;
    for (int idx : members) {
        if (idx < 0 || idx >= catalog.size()) throw std::invalid_argument("estimate_params: bad catalog index");
        const CatalogEntry& e = catalog.entries[static_cast<size_t>(idx)];
        const double w = y[static_cast<size_t>(idx)];
        if (e.ss) {
            ss_num += *e.ss * w;
            ss_den += w;
        }
        if (e.ns) {
            ns_num += *e.ns * w;
            ns_den += w;
        }
    }
    bool has_ss = false, has_ns = false;
    for (int idx : members) {
        const CatalogEntry& e = catalog.entries[static_cast<size_t>(idx)];
        has_ss = has_ss || e.ss.has_value();
        has_ns = has_ns || e.ns.has_value();
    }
    if (has_ss) {
        if (ss_den > 0.0) {
            est.ss = ss_num / ss_den;
        } else {
            est.indeterminate = true;
        }
    }
    if (has_ns) {
        if (ns_den > 0.0) {
            est.ns = ns_num / ns_den;
        } else {
            est.indeterminate = true;
        }
    }
    return est;
}

Verdict verdict_from_probabilities(const std::vector<float>& y, const LabelCatalog& catalog) {
    if (static_cast<int>(y.size()) != catalog.size()) {
        throw std::invalid_argument("verdict: probability vector does not match the catalog");
    }
    Verdict v;
    v.probabilities = y;

    AggregateResult binary = aggregate(y, binary_detection_task(catalog));
    v.tampered = binary.argmax_set == 1;
    if (!v.tampered) return v;

    // family, then network; the original set never competes once the image
    // is judged tampered
    MetaTask fam = family_task(catalog);
    AggregateResult fam_agg = aggregate(y, fam);
    int fam_set = fam_agg.scores[1] >= fam_agg.scores[2] ? 1 : 2;
    v.family = fam_set == 1 ? AttackFamily::FGSM : AttackFamily::PGD;

    MetaTask net = network_task(catalog);
    AggregateResult net_agg = aggregate(y, net);
    int net_set = net_agg.scores[1] >= net_agg.scores[2] ? 1 : 2;
    v.network = net_set == 1 ? Network::NetA : Network::NetB;

    ParamEstimate est = estimate_params(y, catalog.members(*v.family, *v.network), catalog);
    v.ss_est = est.ss;
    v.ns_est = est.ns;
    v.estimate_indeterminate = est.indeterminate;
    return v;
}

Verdict full_verdict(const Checkpoint& detector, const Image& image, const LabelCatalog& catalog) {
    if (!detector.mode) throw std::invalid_argument("full_verdict: checkpoint carries no preprocessing mode");
    FeatureTensor f = preprocess(image, *detector.mode);
    return verdict_from_probabilities(classify(detector, f), catalog);
}

Json verdict_to_json(const Verdict& v, const LabelCatalog& catalog) {
    Json j;
    j["tampered"] = v.tampered;
    j["family"] = v.family ? Json(family_name(*v.family)) : Json(nullptr);
    j["network"] = v.network ? Json(network_name(*v.network)) : Json(nullptr);
    j["ss_est"] = v.ss_est ? Json(*v.ss_est) : Json(nullptr);
    j["ns_est"] = v.ns_est ? Json(*v.ns_est) : Json(nullptr);
    if (v.estimate_indeterminate) j["estimate"] = "indeterminate";
    Json probs = Json::object();
    for (int i = 0; i < catalog.size(); ++i) {
        probs[catalog.entries[static_cast<size_t>(i)].name] = v.probabilities[static_cast<size_t>(i)];
    }
    j["probabilities"] = probs;
    return j;
}

}  // namespace advf
