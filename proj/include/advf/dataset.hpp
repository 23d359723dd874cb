#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advf/attacks.hpp"
#include "advf/catalog.hpp"
#include "advf/image_io.hpp"
#include "advf/model.hpp"
#include "advf/train.hpp"

namespace advf {

inline constexpr int kBaseCategories = 10;

// One image of the dataset: ground-truth category, attack parameters,
// provenance and split.
struct ManifestRecord {
    std::string path;  // relative to the dataset root
    std::string split; // train | val | test
    int catalog_id = -1;        // detector category; -1 for test-only combos
    std::string category_name;  // catalog name or extended test-only label
    Network network = Network::None;
    std::optional<AttackFamily> family;
    std::optional<int> ss;
    std::optional<int> ns;
    std::optional<double> eps;
    std::optional<int> target_label;  // the attack's target class
    int base_label = 0;               // source image's 10-way class
    int source_id = 0;                // base image index
    uint64_t seed = 0;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;

    std::vector<int> split_indices(const std::string& split) const;
};

// Line-delimited JSON, one image per line, fixed field order.
std::string manifest_to_jsonl(const DatasetManifest& m);
DatasetManifest manifest_from_jsonl(const std::string& text);
void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

// --------------------------------------------------------------------------
// base imagery

struct BaseDataset {
    std::vector<Image> images;
    std::vector<int> labels;       // 10-way category, index % 10
    std::vector<std::string> splits;  // train/val/test, 70/10/20 by index
};

// Deterministic synthetic 10-category set: parametric shapes and textures
// rendered at 2x resolution and bilinearly downscaled, so pixel statistics
// stay smooth like resized photographs.
BaseDataset generate_base_images(int count, int size, uint64_t seed);

// Ingests <dir>/<category>/... (exactly 10 subdirectories, sorted) and
// resizes everything to size x size.
BaseDataset ingest_base_images(const std::string& dir, int size);

// Writes <root>/<split>/class<k>/<id>.ppm plus the base manifest, returning it.
DatasetManifest write_base_dataset(const BaseDataset& base, const std::string& root);

// --------------------------------------------------------------------------
// attacked dataset

struct BuildOptions {
    uint64_t seed = 0;
    int threads = 0;
    bool verbose = false;
};

// Applies the Table-1-style grid to the base set: train/val cycle over the
// 13 training categories, test over original plus every (combo, network)
// pair. Attacked variants inherit their source's split. Images land at
// <root>/<split>/<category>/<id>.ppm with the manifest at <root>/manifest.jsonl.
DatasetManifest build_dataset(const std::string& root, const std::string& base_root,
                              const DatasetManifest& base_manifest, const Checkpoint& net_a,
                              const Checkpoint& net_b, const BuildOptions& opt);

// --------------------------------------------------------------------------
// adapters feeding the trainer

// 10-way clean classification over a base manifest split.
TrainSet target_train_set(const std::string& root, const DatasetManifest& m, const std::string& split);
// 13-way detector classification over an attacked-dataset split.
TrainSet detector_train_set(const std::string& root, const DatasetManifest& m, const std::string& split,
                            FeatureMode mode);

// Fraction of a base split's clean images where the two checkpoints predict
// different labels (attribution between identical networks is ill-posed).
double prediction_disagreement(const Checkpoint& a, const Checkpoint& b, const std::string& root,
                               const DatasetManifest& m, const std::string& split, int threads = 0);

}  // namespace advf
