#include "advf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "advf/parallel.hpp"

namespace advf {

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted,
                          const std::vector<std::string>& names) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: truth/prediction size mismatch");
    const int k = static_cast<int>(names.size());
    ConfusionMatrix cm;
    cm.names = names;
    cm.m.assign(static_cast<size_t>(k) * k, 0.0);
    cm.row_counts.assign(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = predicted[i];
        if (t < 0 || t >= k || p < 0 || p >= k) throw std::invalid_argument("confusion: label out of range");
        cm.m[static_cast<size_t>(t) * k + static_cast<size_t>(p)] += 1.0;
        cm.row_counts[static_cast<size_t>(t)] += 1;
    }
    for (int r = 0; r < k; ++r) {
        if (cm.row_counts[static_cast<size_t>(r)] == 0) continue;
        for (int c = 0; c < k; ++c) {
            cm.m[static_cast<size_t>(r) * k + static_cast<size_t>(c)] /= cm.row_counts[static_cast<size_t>(r)];
        }
    }
    return cm;
}

std::string confusion_tsv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "truth\\predicted";
    for (const std::string& n : cm.names) os << '\t' << n;
    os << '\n';
    char buf[32];
    for (int r = 0; r < cm.k(); ++r) {
        os << cm.names[static_cast<size_t>(r)];
        for (int c = 0; c < cm.k(); ++c) {
            std::snprintf(buf, sizeof(buf), "\t%.3f", cm.at(r, c));
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& positives) {
    if (scores.size() != positives.size() || scores.empty()) {
        throw std::invalid_argument("average_precision: bad inputs");
    }
    int64_t npos = 0;
    for (uint8_t p : positives) npos += p;
    if (npos == 0) throw std::invalid_argument("average_precision: no positive samples");

    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)]; });

    double ap = 0.0, prev_recall = 0.0;
    int64_t tp = 0, seen = 0;
    size_t i = 0;
    while (i < order.size()) {
        // one threshold group per distinct score: ties never split
        size_t j = i;
        while (j < order.size() &&
               scores[static_cast<size_t>(order[j])] == scores[static_cast<size_t>(order[i])]) {
            tp += positives[static_cast<size_t>(order[j])];
            ++seen;
            ++j;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(npos);
        double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return ap;
}

MetaMetrics meta_metrics(const std::vector<std::vector<float>>& probability_vectors, const std::vector<int>& truth,
                         const MetaTask& task) {
    if (probability_vectors.size() != truth.size() || probability_vectors.empty()) {
        throw std::invalid_argument("meta_metrics: bad inputs");
    }
    const int n = static_cast<int>(truth.size());
    const int num_sets = task.num_sets();

    std::vector<std::vector<double>> set_scores(static_cast<size_t>(num_sets),
                                                std::vector<double>(static_cast<size_t>(n)));
    std::vector<int> truth_set(static_cast<size_t>(n));
    int64_t correct = 0;
    for (int i = 0; i < n; ++i) {
        AggregateResult agg = aggregate(probability_vectors[static_cast<size_t>(i)], task);
        int ts = task.set_of(truth[static_cast<size_t>(i)]);
        if (ts < 0) throw std::invalid_argument("meta_metrics: truth label outside the task partition");
        truth_set[static_cast<size_t>(i)] = ts;
        if (agg.argmax_set == ts) ++correct;
        for (int s = 0; s < num_sets; ++s) {
            set_scores[static_cast<size_t>(s)][static_cast<size_t>(i)] = agg.scores[static_cast<size_t>(s)];
        }
    }

    MetaMetrics out;
    out.accuracy = static_cast<double>(correct) / n;
    double ap_sum = 0.0;
    int ap_count = 0;
    for (int s = 0; s < num_sets; ++s) {
        std::vector<uint8_t> positives(static_cast<size_t>(n));
        int64_t npos = 0;
        for (int i = 0; i < n; ++i) {
            positives[static_cast<size_t>(i)] = truth_set[static_cast<size_t>(i)] == s ? 1 : 0;
            npos += positives[static_cast<size_t>(i)];
        }
        if (npos == 0) {
            out.per_set_ap.push_back(std::numeric_limits<double>::quiet_NaN());
            out.sets_without_positives.push_back(s);
            continue;
        }
        double ap = average_precision(set_scores[static_cast<size_t>(s)], positives);
        out.per_set_ap.push_back(ap);
        ap_sum += ap;
        ++ap_count;
    }
    out.mean_ap = ap_count > 0 ? ap_sum / ap_count : std::numeric_limits<double>::quiet_NaN();
    return out;
}

// --------------------------------------------------------------------------

const char* param_kind_name(ParamKind p) { return p == ParamKind::SS ? "ss" : "ns"; }

const char* rmse_mode_name(RmseMode m) {
    return m == RmseMode::PredictedFamily ? "predicted-family" : "oracle-family";
}

RmseResult rmse_params(const std::vector<EvalSample>& samples, AttackFamily family, ParamKind param, RmseMode mode,
                       const LabelCatalog& catalog, bool interior_only) {
    double sq_sum = 0.0;
    int count = 0;
    for (const EvalSample& s : samples) {
        const ManifestRecord& t = s.truth;
        if (interior_only && t.catalog_id >= 0) continue;
        const std::optional<int>& true_param = param == ParamKind::SS ? t.ss : t.ns;

        std::optional<double> est;
        if (mode == RmseMode::PredictedFamily) {
            if (!s.verdict.tampered || !s.verdict.family || *s.verdict.family != family) continue;
            if (!true_param) continue;  // no ground truth for this parameter
            est = param == ParamKind::SS ? s.verdict.ss_est : s.verdict.ns_est;
        } else {
            if (!t.family || *t.family != family || !true_param) continue;
            ParamEstimate pe = estimate_params(s.y, catalog.members(family, t.network), catalog);
            est = param == ParamKind::SS ? pe.ss : pe.ns;
        }
        if (!est) continue;
        const double err = *est - static_cast<double>(*true_param);
        sq_sum += err * err;
        ++count;
    }
    RmseResult r;
    r.count = count;
    if (count > 0) r.rmse = std::sqrt(sq_sum / count);
    return r;
}

// --------------------------------------------------------------------------

const MetaMetrics& DetectorEvaluation::task(const std::string& name) const {
    for (size_t i = 0; i < task_names.size(); ++i) {
        if (task_names[i] == name) return task_metrics[i];
    }
    throw std::invalid_argument("evaluation has no task '" + name + "'");
}

RmseResult DetectorEvaluation::rmse(AttackFamily family, ParamKind param, RmseMode mode, bool interior_only) const {
    for (const RmseRow& row : rmse_rows) {
        if (row.family == family && row.param == param && row.mode == mode && row.interior_only == interior_only) {
            return row.result;
        }
    }
    throw std::invalid_argument("evaluation has no matching rmse row");
}

DetectorEvaluation evaluate_detector(const Checkpoint& detector, const std::string& dataset_root,
                                     const DatasetManifest& manifest, const std::string& split, int threads) {
    if (!detector.mode || !detector.catalog) {
        throw std::invalid_argument("evaluate_detector: checkpoint lacks mode or catalog");
    }
    const LabelCatalog& catalog = *detector.catalog;
    std::vector<int> idxs = manifest.split_indices(split);
    if (idxs.empty()) throw std::invalid_argument("evaluate_detector: empty split '" + split + "'");

    DetectorEvaluation ev;
    ev.mode = *detector.mode;
    ev.split = split;
    ev.sample_count = static_cast<int>(idxs.size());
    ev.samples.resize(idxs.size());
    parallel_for(static_cast<int>(idxs.size()), threads, [&](int i) {
        const ManifestRecord& r = manifest.records[static_cast<size_t>(idxs[static_cast<size_t>(i)])];
        Image img = load_image((std::filesystem::path(dataset_root) / r.path).string());
        EvalSample& s = ev.samples[static_cast<size_t>(i)];
        s.truth = r;
        s.y = classify(detector, preprocess(img, *detector.mode));
        s.verdict = verdict_from_probabilities(s.y, catalog);
    });

    // confusion + meta tasks over the samples whose combo is a catalog category
    std::vector<int> truth13, pred13;
    std::vector<std::vector<float>> ys13;
    for (const EvalSample& s : ev.samples) {
        if (s.truth.catalog_id < 0) continue;
        truth13.push_back(s.truth.catalog_id);
        pred13.push_back(argmax(s.y));
        ys13.push_back(s.y);
    }
    std::vector<std::string> names;
    for (const CatalogEntry& e : catalog.entries) names.push_back(e.name);
    ev.confusion13 = confusion(truth13, pred13, names);
    for (const MetaTask& task : standard_tasks(catalog)) {
        ev.task_names.push_back(task.name);
        ev.task_metrics.push_back(meta_metrics(ys13, truth13, task));
    }

    for (AttackFamily family : {AttackFamily::FGSM, AttackFamily::PGD}) {
        for (ParamKind param : {ParamKind::SS, ParamKind::NS}) {
            if (family == AttackFamily::FGSM && param == ParamKind::NS) continue;
            for (RmseMode mode : {RmseMode::PredictedFamily, RmseMode::OracleFamily}) {
                for (bool interior : {false, true}) {
                    ev.rmse_rows.push_back(
                        {family, param, mode, interior, rmse_params(ev.samples, family, param, mode, catalog, interior)});
                }
            }
        }
    }
    return ev;
}

Json report_to_json(const DetectorEvaluation& ev) {
    Json j;
    j["mode"] = feature_mode_name(ev.mode);
    j["split"] = ev.split;
    j["sample_count"] = ev.sample_count;

    Json tasks = Json::array();
    for (size_t i = 0; i < ev.task_names.size(); ++i) {
        const MetaMetrics& m = ev.task_metrics[i];
        Json jt;
        jt["task"] = ev.task_names[i];
        jt["accuracy"] = m.accuracy;
        jt["mAP"] = std::isnan(m.mean_ap) ? Json(nullptr) : Json(m.mean_ap);
        Json aps = Json::array();
        for (double ap : m.per_set_ap) aps.push_back(std::isnan(ap) ? Json(nullptr) : Json(ap));
        jt["per_set_ap"] = aps;
        jt["sets_without_positives"] = m.sets_without_positives;
        tasks.push_back(jt);
    }
    j["meta_tasks"] = tasks;

    Json rmse = Json::array();
    for (const RmseRow& row : ev.rmse_rows) {
        Json jr;
        jr["family"] = family_name(row.family);
        jr["param"] = param_kind_name(row.param);
        jr["mode"] = rmse_mode_name(row.mode);
        jr["interior_only"] = row.interior_only;
        jr["rmse"] = row.result.count > 0 ? Json(row.result.rmse) : Json(nullptr);
        jr["count"] = row.result.count;
        rmse.push_back(jr);
    }
    j["rmse"] = rmse;

    Json cm;
    cm["names"] = ev.confusion13.names;
    cm["row_counts"] = ev.confusion13.row_counts;
    cm["rows"] = Json::array();
    for (int r = 0; r < ev.confusion13.k(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < ev.confusion13.k(); ++c) row.push_back(ev.confusion13.at(r, c));
        cm["rows"].push_back(row);
    }
    j["confusion"] = cm;
    return j;
}

std::string report_human(const DetectorEvaluation& ev) {
    std::ostringstream os;
    char buf[160];
    os << "== detector evaluation (mode=" << feature_mode_name(ev.mode) << ", split=" << ev.split
       << ", n=" << ev.sample_count << ") ==\n\n";
    os << "meta-classification tasks:\n";
    std::snprintf(buf, sizeof(buf), "  %-28s %9s %9s\n", "task", "accuracy", "mAP");
    os << buf;
    for (size_t i = 0; i < ev.task_names.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "  %-28s %9.3f %9.3f\n", ev.task_names[i].c_str(),
                      ev.task_metrics[i].accuracy, ev.task_metrics[i].mean_ap);
        os << buf;
    }
    os << "\nparameter estimation RMSE:\n";
    std::snprintf(buf, sizeof(buf), "  %-6s %-5s %-18s %-14s %9s %7s\n", "family", "param", "mode", "subset", "rmse",
                  "count");
    os << buf;
    for (const RmseRow& row : ev.rmse_rows) {
        std::snprintf(buf, sizeof(buf), "  %-6s %-5s %-18s %-14s %9.3f %7d\n", family_name(row.family),
                      param_kind_name(row.param), rmse_mode_name(row.mode),
                      row.interior_only ? "interior-only" : "all-tampered", row.result.rmse, row.result.count);
        os << buf;
    }
    os << "\nconfusion matrix (rows = truth, columns = predicted):\n";
    os << confusion_tsv(ev.confusion13);
    return os.str();
}

}  // namespace advf
