#pragma once

#include <string>
#include <vector>

#include "advf/dataset.hpp"
#include "advf/pipeline.hpp"

namespace advf {

// Row-normalized confusion counts; rows = ground truth, columns = predicted.
struct ConfusionMatrix {
    std::vector<std::string> names;
    std::vector<double> m;        // k x k, row-major
    std::vector<int> row_counts;  // samples per ground-truth row

    int k() const { return static_cast<int>(names.size()); }
    double at(int row, int col) const { return m[static_cast<size_t>(row) * names.size() + static_cast<size_t>(col)]; }
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted,
                          const std::vector<std::string>& names);

std::string confusion_tsv(const ConfusionMatrix& cm);

// One-vs-rest average precision: precision-recall step sum over ranked
// samples, with equal scores collapsed into one threshold group.
double average_precision(const std::vector<double>& scores, const std::vector<uint8_t>& positives);

struct MetaMetrics {
    double accuracy = 0.0;
    double mean_ap = 0.0;
    std::vector<double> per_set_ap;  // NaN for sets without positives
    std::vector<int> sets_without_positives;
};

// accuracy: fraction of samples whose aggregated argmax set contains the
// truth; mAP: macro-averaged one-vs-rest AP over aggregated set scores.
MetaMetrics meta_metrics(const std::vector<std::vector<float>>& probability_vectors, const std::vector<int>& truth,
                         const MetaTask& task);

// --------------------------------------------------------------------------

enum class ParamKind { SS, NS };
enum class RmseMode { PredictedFamily, OracleFamily };

const char* param_kind_name(ParamKind p);
const char* rmse_mode_name(RmseMode m);

struct EvalSample {
    std::vector<float> y;
    Verdict verdict;
    ManifestRecord truth;
};

struct RmseResult {
    double rmse = std::numeric_limits<double>::quiet_NaN();
    int count = 0;
};

// PredictedFamily: samples the verdict attributed to the family, estimates as
// issued. OracleFamily: all true-family samples, S forced to the true
// (family, network) pair. interior_only keeps only test-only parameter combos.
RmseResult rmse_params(const std::vector<EvalSample>& samples, AttackFamily family, ParamKind param, RmseMode mode,
                       const LabelCatalog& catalog, bool interior_only = false);

// --------------------------------------------------------------------------

struct RmseRow {
    AttackFamily family;
    ParamKind param;
    RmseMode mode;
    bool interior_only;
    RmseResult result;
};

struct DetectorEvaluation {
    FeatureMode mode;
    std::string split;
    int sample_count = 0;
    std::vector<EvalSample> samples;
    ConfusionMatrix confusion13;  // samples whose combo is a catalog category
    std::vector<std::string> task_names;
    std::vector<MetaMetrics> task_metrics;
    std::vector<RmseRow> rmse_rows;

    double binary_accuracy() const { return task_metrics.empty() ? 0.0 : task_metrics.front().accuracy; }
    const MetaMetrics& task(const std::string& name) const;
    RmseResult rmse(AttackFamily family, ParamKind param, RmseMode mode, bool interior_only) const;
};

// Runs the full verdict pipeline over a manifest split and aggregates every
// reported metric.
DetectorEvaluation evaluate_detector(const Checkpoint& detector, const std::string& dataset_root,
                                     const DatasetManifest& manifest, const std::string& split, int threads = 0);

Json report_to_json(const DetectorEvaluation& ev);
std::string report_human(const DetectorEvaluation& ev);

}  // namespace advf
