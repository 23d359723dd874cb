#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advf/serialize.hpp"

namespace advf {

enum class Network { None, NetA, NetB };
enum class AttackFamily { FGSM, PGD };

const char* network_name(Network n);
Network network_from_name(const std::string& name);
const char* family_name(AttackFamily f);
AttackFamily family_from_name(const std::string& name);

// One (family, ss, ns) parameter row of the attack grid, bound to a target
// network. FGSM rows have ns = 1 and no ns identity of their own.
struct AttackCombo {
    Network network = Network::None;
    AttackFamily family = AttackFamily::FGSM;
    int ss = 0;
    int ns = 1;
    bool training = false;  // present in the training split

    std::string category_name() const;
};

// The parameter grid: FGSM ss in {1,2,3}, PGD (ss, ns) in {1,2,3}x{8,12,16};
// only the ends of each parameter range are marked for training.
std::vector<AttackCombo> attack_grid(Network network);
std::vector<AttackCombo> attack_grid_both_networks();

struct CatalogEntry {
    std::string name;
    Network network = Network::None;
    std::optional<AttackFamily> family;  // nullopt = the untampered category
    std::optional<int> ss;
    std::optional<int> ns;

    bool tampered() const { return family.has_value(); }
};

// The detector's ordered label set: one untampered category plus every
// training (network, family, parameters) combination.
struct LabelCatalog {
    std::vector<CatalogEntry> entries;

    // original + 6 training combos per network = 13 categories
    static LabelCatalog default_catalog();

    int size() const { return static_cast<int>(entries.size()); }
    int original_index() const;
    int find(const std::string& name) const;  // -1 when absent
    // categories matching (family, network); network == None matches any
    std::vector<int> members(AttackFamily family, Network network) const;

    void validate() const;

    Json to_json() const;
    static LabelCatalog from_json(const Json& j);
};

// Disjoint grouping of catalog indices covering the whole catalog; scores of
// a set are the summed member probabilities.
struct MetaTask {
    std::string name;
    std::vector<std::string> set_names;
    std::vector<std::vector<int>> sets;

    int num_sets() const { return static_cast<int>(sets.size()); }
    // set containing a catalog index; -1 if absent (invalid partition)
    int set_of(int catalog_index) const;
    void validate(int catalog_size) const;
};

MetaTask binary_detection_task(const LabelCatalog& cat);
MetaTask family_task(const LabelCatalog& cat);      // original / FGSM / PGD
MetaTask network_task(const LabelCatalog& cat);     // original / net-A / net-B
MetaTask attribution_task(const LabelCatalog& cat); // original / family x network
MetaTask full_classification_task(const LabelCatalog& cat);
// The five standard tasks in report order.
std::vector<MetaTask> standard_tasks(const LabelCatalog& cat);

}  // namespace advf
