#include "advf/catalog.hpp"

#include <algorithm>
#include <stdexcept>

namespace advf {

const char* network_name(Network n) {
    switch (n) {
        case Network::None: return "none";
        case Network::NetA: return "net-A";
        case Network::NetB: return "net-B";
    }
    return "?";
}

Network network_from_name(const std::string& name) {
    if (name == "none") return Network::None;
    if (name == "net-A" || name == "netA" || name == "net-a") return Network::NetA;
    if (name == "net-B" || name == "netB" || name == "net-b") return Network::NetB;
    throw std::invalid_argument("unknown network '" + name + "'");
}

const char* family_name(AttackFamily f) { return f == AttackFamily::FGSM ? "FGSM" : "PGD"; }

AttackFamily family_from_name(const std::string& name) {
    if (name == "FGSM" || name == "fgsm") return AttackFamily::FGSM;
    if (name == "PGD" || name == "pgd") return AttackFamily::PGD;
    throw std::invalid_argument("unknown attack family '" + name + "'");
}

std::string AttackCombo::category_name() const {
    std::string net = network == Network::NetA ? "netA" : network == Network::NetB ? "netB" : "none";
    if (family == AttackFamily::FGSM) return net + "_FGSM_ss" + std::to_string(ss);
    return net + "_PGD_ss" + std::to_string(ss) + "_ns" + std::to_string(ns);
}

std::vector<AttackCombo> attack_grid(Network network) {
    std::vector<AttackCombo> g;
    for (int ss = 1; ss <= 3; ++ss) {
        g.push_back({network, AttackFamily::FGSM, ss, 1, ss == 1 || ss == 3});
    }
    for (int ss = 1; ss <= 3; ++ss) {
        for (int ns : {8, 12, 16}) {
            bool ends = (ss == 1 || ss == 3) && (ns == 8 || ns == 16);
            g.push_back({network, AttackFamily::PGD, ss, ns, ends});
        }
    }
    return g;
}

std::vector<AttackCombo> attack_grid_both_networks() {
    std::vector<AttackCombo> g = attack_grid(Network::NetA);
    std::vector<AttackCombo> b = attack_grid(Network::NetB);
    g.insert(g.end(), b.begin(), b.end());
    return g;
}

LabelCatalog LabelCatalog::default_catalog() {
    LabelCatalog cat;
    cat.entries.push_back({"original", Network::None, std::nullopt, std::nullopt, std::nullopt});
    for (Network net : {Network::NetA, Network::NetB}) {
        // FGSM by ss, then PGD by ns-major order
        for (int ss : {1, 3}) {
            AttackCombo c{net, AttackFamily::FGSM, ss, 1, true};
            cat.entries.push_back({c.category_name(), net, AttackFamily::FGSM, ss, std::nullopt});
        }
        for (int ns : {8, 16}) {
            for (int ss : {1, 3}) {
                AttackCombo c{net, AttackFamily::PGD, ss, ns, true};
                cat.entries.push_back({c.category_name(), net, AttackFamily::PGD, ss, ns});
            }
        }
    }
    cat.validate();
    return cat;
}

int LabelCatalog::original_index() const {
    for (int i = 0; i < size(); ++i) {
        if (!entries[static_cast<size_t>(i)].tampered()) return i;
    }
    throw std::logic_error("catalog has no untampered category");
}

int LabelCatalog::find(const std::string& name) const {
    for (int i = 0; i < size(); ++i) {
        if (entries[static_cast<size_t>(i)].name == name) return i;
    }
    return -1;
}

std::vector<int> LabelCatalog::members(AttackFamily family, Network network) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i) {
        const CatalogEntry& e = entries[static_cast<size_t>(i)];
        if (!e.family || *e.family != family) continue;
        if (network != Network::None && e.network != network) continue;
        out.push_back(i);
    }
    return out;
}

void LabelCatalog::validate() const {
    int untampered = 0;
    for (const CatalogEntry& e : entries) {
        if (!e.tampered()) {
            ++untampered;
        } else if (!e.ss) {
            throw std::invalid_argument("catalog: tampered category '" + e.name + "' is missing ss");
        } else if (*e.family == AttackFamily::PGD && !e.ns) {
            throw std::invalid_argument("catalog: PGD category '" + e.name + "' is missing ns");
        }
    }
    if (untampered != 1) {
        throw std::invalid_argument("catalog must contain exactly one untampered category, found " +
                                    std::to_string(untampered));
    }
    for (size_t i = 0; i < entries.size(); ++i) {
        for (size_t j = i + 1; j < entries.size(); ++j) {
            if (entries[i].name == entries[j].name) {
                throw std::invalid_argument("catalog: duplicate category name '" + entries[i].name + "'");
            }
        }
    }
}

Json LabelCatalog::to_json() const {
    Json arr = Json::array();
    for (const CatalogEntry& e : entries) {
        Json je;
        je["name"] = e.name;
        je["network"] = network_name(e.network);
        je["family"] = e.family ? family_name(*e.family) : "none";
        je["ss"] = e.ss ? Json(*e.ss) : Json(nullptr);
        je["ns"] = e.ns ? Json(*e.ns) : Json(nullptr);
        arr.push_back(je);
    }
    return arr;
}

LabelCatalog LabelCatalog::from_json(const Json& j) {
    LabelCatalog cat;
    for (const auto& je : j) {
        CatalogEntry e;
        e.name = je.at("name").get<std::string>();
        e.network = network_from_name(je.at("network").get<std::string>());
        std::string fam = je.at("family").get<std::string>();
        if (fam != "none") e.family = family_from_name(fam);
        if (!je.at("ss").is_null()) e.ss = je.at("ss").get<int>();
        if (!je.at("ns").is_null()) e.ns = je.at("ns").get<int>();
        cat.entries.push_back(std::move(e));
    }
    cat.validate();
    return cat;
}

int MetaTask::set_of(int catalog_index) const {
    for (int s = 0; s < num_sets(); ++s) {
        const auto& members = sets[static_cast<size_t>(s)];
        if (std::find(members.begin(), members.end(), catalog_index) != members.end()) return s;
    }
    return -1;
}

void MetaTask::validate(int catalog_size) const {
    if (sets.empty()) throw std::invalid_argument("meta task '" + name + "': no sets");
    if (set_names.size() != sets.size()) {
        throw std::invalid_argument("meta task '" + name + "': set name count mismatch");
    }
    std::vector<int> seen(static_cast<size_t>(catalog_size), 0);
    for (const auto& s : sets) {
        for (int idx : s) {
            if (idx < 0 || idx >= catalog_size) {
                throw std::invalid_argument("meta task '" + name + "': index out of catalog range");
            }
            if (seen[static_cast<size_t>(idx)]++) {
                throw std::invalid_argument("meta task '" + name + "': sets are not disjoint");
            }
        }
    }
    for (int idx = 0; idx < catalog_size; ++idx) {
        if (!seen[static_cast<size_t>(idx)]) {
            throw std::invalid_argument("meta task '" + name + "': sets do not cover the catalog");
        }
    }
}

MetaTask binary_detection_task(const LabelCatalog& cat) {
    MetaTask t;
    t.name = "binary detection";
    t.set_names = {"original", "tampered"};
    t.sets.resize(2);
    for (int i = 0; i < cat.size(); ++i) {
        t.sets[cat.entries[static_cast<size_t>(i)].tampered() ? 1 : 0].push_back(i);
    }
    t.validate(cat.size());
    return t;
}

MetaTask family_task(const LabelCatalog& cat) {
    MetaTask t;
    t.name = "original vs FGSM vs PGD";
    t.set_names = {"original", "FGSM", "PGD"};
    t.sets.resize(3);
    for (int i = 0; i < cat.size(); ++i) {
        const CatalogEntry& e = cat.entries[static_cast<size_t>(i)];
        t.sets[!e.family ? 0 : (*e.family == AttackFamily::FGSM ? 1 : 2)].push_back(i);
    }
    t.validate(cat.size());
    return t;
}

MetaTask network_task(const LabelCatalog& cat) {
    MetaTask t;
    t.name = "original vs net-A vs net-B";
    t.set_names = {"original", "net-A", "net-B"};
    t.sets.resize(3);
    for (int i = 0; i < cat.size(); ++i) {
        const CatalogEntry& e = cat.entries[static_cast<size_t>(i)];
        t.sets[e.network == Network::None ? 0 : (e.network == Network::NetA ? 1 : 2)].push_back(i);
    }
    t.validate(cat.size());
    return t;
}

MetaTask attribution_task(const LabelCatalog& cat) {
    MetaTask t;
    t.name = "full attribution";
    t.set_names = {"original", "FGSM net-A", "FGSM net-B", "PGD net-A", "PGD net-B"};
    t.sets.resize(5);
    for (int i = 0; i < cat.size(); ++i) {
        const CatalogEntry& e = cat.entries[static_cast<size_t>(i)];
        if (!e.family) {
            t.sets[0].push_back(i);
        } else {
            int base = *e.family == AttackFamily::FGSM ? 1 : 3;
            t.sets[static_cast<size_t>(base + (e.network == Network::NetB ? 1 : 0))].push_back(i);
        }
    }
    t.validate(cat.size());
    return t;
}

MetaTask full_classification_task(const LabelCatalog& cat) {
    MetaTask t;
    t.name = "full classification";
    for (int i = 0; i < cat.size(); ++i) {
        t.set_names.push_back(cat.entries[static_cast<size_t>(i)].name);
        t.sets.push_back({i});
    }
    t.validate(cat.size());
    return t;
}

std::vector<MetaTask> standard_tasks(const LabelCatalog& cat) {
    return {binary_detection_task(cat), attribution_task(cat), network_task(cat), family_task(cat),
            full_classification_task(cat)};
}

}  // namespace advf
