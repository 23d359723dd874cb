#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advf/catalog.hpp"
#include "advf/forensics.hpp"
#include "advf/model.hpp"

namespace advf {

// Per-category probabilities for a preprocessed input; the feature mode must
// match the mode the detector was trained with.
std::vector<float> classify(const Checkpoint& detector, const FeatureTensor& features);

struct AggregateResult {
    std::vector<double> scores;  // summed member probabilities per set
    int argmax_set = 0;          // ties resolved toward the lowest set index
};

AggregateResult aggregate(const std::vector<float>& y, const MetaTask& task);

// Probability-weighted parameter average over the members of S that carry
// the parameter: P_est = sum_i P_i*y_i / sum_i y_i. A zero weight mass is
// reported as indeterminate rather than divided through.
struct ParamEstimate {
    std::optional<double> ss;
    std::optional<double> ns;
    bool indeterminate = false;
};

ParamEstimate estimate_params(const std::vector<float>& y, const std::vector<int>& members,
                              const LabelCatalog& catalog);

struct Verdict {
    bool tampered = false;
    std::optional<AttackFamily> family;
    std::optional<Network> network;
    std::vector<float> probabilities;  // per catalog category
    std::optional<double> ss_est;
    std::optional<double> ns_est;
    bool estimate_indeterminate = false;
};

// detection -> family and network attribution -> parameter estimation over
// the predicted (family, network) categories.
Verdict full_verdict(const Checkpoint& detector, const Image& image, const LabelCatalog& catalog);
// Same decision cascade starting from an already computed probability vector.
Verdict verdict_from_probabilities(const std::vector<float>& y, const LabelCatalog& catalog);

// One structured record per input.
Json verdict_to_json(const Verdict& v, const LabelCatalog& catalog);

}  // namespace advf
