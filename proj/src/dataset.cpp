#include "advf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "advf/parallel.hpp"
#include "advf/rng.hpp"
#include "advf/serialize.hpp"

namespace fs = std::filesystem;

namespace advf {

std::vector<int> DatasetManifest::split_indices(const std::string& split) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(records.size()); ++i) {
        if (records[static_cast<size_t>(i)].split == split) out.push_back(i);
    }
    return out;
}

namespace {

Json record_to_json(const ManifestRecord& r) {
    Json j;
    j["path"] = r.path;
    j["split"] = r.split;
    j["catalog_id"] = r.catalog_id;
    j["category"] = r.category_name;
    j["network"] = network_name(r.network);
    j["family"] = r.family ? Json(family_name(*r.family)) : Json("none");
    j["ss"] = r.ss ? Json(*r.ss) : Json(nullptr);
    j["ns"] = r.ns ? Json(*r.ns) : Json(nullptr);
    j["eps"] = r.eps ? Json(*r.eps) : Json(nullptr);
    j["target_label"] = r.target_label ? Json(*r.target_label) : Json(nullptr);
    j["base_label"] = r.base_label;
    j["source_id"] = r.source_id;
    j["seed"] = r.seed;
    return j;
}

ManifestRecord record_from_json(const Json& j) {
    ManifestRecord r;
    r.path = j.at("path").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.catalog_id = j.at("catalog_id").get<int>();
    r.category_name = j.at("category").get<std::string>();
    r.network = network_from_name(j.at("network").get<std::string>());
    std::string fam = j.at("family").get<std::string>();
    if (fam != "none") r.family = family_from_name(fam);
    if (!j.at("ss").is_null()) r.ss = j.at("ss").get<int>();
    if (!j.at("ns").is_null()) r.ns = j.at("ns").get<int>();
    if (!j.at("eps").is_null()) r.eps = j.at("eps").get<double>();
    if (!j.at("target_label").is_null()) r.target_label = j.at("target_label").get<int>();
    r.base_label = j.at("base_label").get<int>();
    r.source_id = j.at("source_id").get<int>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
}

}  // namespace

std::string manifest_to_jsonl(const DatasetManifest& m) {
    std::string out;
    for (const ManifestRecord& r : m.records) {
        out += record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

DatasetManifest manifest_from_jsonl(const std::string& text) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            m.records.push_back(record_from_json(Json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error("manifest: bad record at line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    write_text_file(path, manifest_to_jsonl(m));
}

DatasetManifest load_manifest(const std::string& path) { return manifest_from_jsonl(read_text_file(path)); }

// --------------------------------------------------------------------------
// synthetic base imagery

namespace {

struct Color {
    double r, g, b;
};

Color random_color(Rng& rng) { return {rng.uniform(15, 240), rng.uniform(15, 240), rng.uniform(15, 240)}; }

// draws until the pair has enough contrast to survive downscaling
std::pair<Color, Color> contrasting_pair(Rng& rng) {
    Color a = random_color(rng);
    for (int tries = 0; tries < 24; ++tries) {
        Color b = random_color(rng);
        if (std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b) >= 160.0) return {a, b};
    }
    return {a, {255.0 - a.r, 255.0 - a.g, 255.0 - a.b}};
}

inline Color mix(const Color& a, const Color& b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kTau = 6.283185307179586477;

// Pattern intensity in [0,1] per category; R is the canvas side.
class PatternField {
public:
    PatternField(int category, int R, Rng& rng) : cat_(category), R_(R) {
        cx_ = R * rng.uniform(0.38, 0.62);
        cy_ = R * rng.uniform(0.38, 0.62);
        freq_ = rng.uniform(2.5, 6.0);
        phase_ = rng.uniform(0.0, kTau);
        theta_ = rng.uniform(0.45, 1.15);
        soft_ = R * rng.uniform(0.012, 0.03);
        switch (cat_) {
            case 3: {  // ellipse
                ax_ = R * rng.uniform(0.18, 0.40);
                ay_ = R * rng.uniform(0.18, 0.40);
                rot_ = rng.uniform(0.0, kTau);
                break;
            }
            case 4: {  // rectangle
                ax_ = R * rng.uniform(0.16, 0.38);
                ay_ = R * rng.uniform(0.16, 0.38);
                break;
            }
            case 6: {  // checkerboard
                cell_ = std::max(4.0, R * rng.uniform(0.10, 0.22));
                ox_ = rng.uniform(0.0, cell_);
                oy_ = rng.uniform(0.0, cell_);
                break;
            }
            case 7: {  // triangle
                double base = rng.uniform(0.0, kTau);
                double rad = R * rng.uniform(0.26, 0.44);
                for (int i = 0; i < 3; ++i) {
                    double ang = base + i * kTau / 3.0 + rng.uniform(-0.45, 0.45);
                    vx_[i] = cx_ + rad * std::cos(ang);
                    vy_[i] = cy_ + rad * std::sin(ang);
                }
                break;
            }
            case 8: {  // smooth blobs
                nblob_ = 6;
                for (int i = 0; i < nblob_; ++i) {
                    bx_[i] = rng.uniform(0.0, R);
                    by_[i] = rng.uniform(0.0, R);
                    bs_[i] = R * rng.uniform(0.10, 0.26);
                    ba_[i] = rng.uniform(-1.0, 1.0);
                }
                break;
            }
            case 9: {  // cross
                ax_ = R * rng.uniform(0.05, 0.13);  // vertical bar half-width
                ay_ = R * rng.uniform(0.05, 0.13);  // horizontal bar half-width
                break;
            }
            default:
                break;
        }
    }

    double operator()(double x, double y) const {
        switch (cat_) {
            case 0:
                return 0.5 * (1.0 + std::sin(kTau * freq_ * y / R_ + phase_));
            case 1:
                return 0.5 * (1.0 + std::sin(kTau * freq_ * x / R_ + phase_));
            case 2: {
                double u = x * std::cos(theta_) + y * std::sin(theta_);
                return 0.5 * (1.0 + std::sin(kTau * freq_ * u / R_ + phase_));
            }
            case 3: {
                double dx = x - cx_, dy = y - cy_;
                double rx = dx * std::cos(rot_) + dy * std::sin(rot_);
                double ry = -dx * std::sin(rot_) + dy * std::cos(rot_);
                double d = (rx * rx) / (ax_ * ax_) + (ry * ry) / (ay_ * ay_);
                return sigmoid((1.0 - d) * (ax_ + ay_) / (2.0 * soft_));
            }
            case 4: {
                double inx = (ax_ - std::abs(x - cx_)) / soft_;
                double iny = (ay_ - std::abs(y - cy_)) / soft_;
                return sigmoid(inx) * sigmoid(iny);
            }
            case 5: {
                double r = std::hypot(x - cx_, y - cy_);
                return 0.5 * (1.0 + std::sin(kTau * freq_ * r / R_ + phase_));
            }
            case 6: {
                int px = static_cast<int>(std::floor((x + ox_) / cell_));
                int py = static_cast<int>(std::floor((y + oy_) / cell_));
                return ((px + py) & 1) ? 0.88 : 0.12;
            }
            case 7: {
                double dmin = 1e18;
                for (int i = 0; i < 3; ++i) {
                    int j = (i + 1) % 3;
                    double ex = vx_[j] - vx_[i], ey = vy_[j] - vy_[i];
                    double len = std::hypot(ex, ey);
                    // inward distance for counter-clockwise winding; sign fixed below
                    double d = ((x - vx_[i]) * ey - (y - vy_[i]) * ex) / len;
                    dmin = std::min(dmin, winding_ * d);
                }
                return sigmoid(dmin / soft_);
            }
            case 8: {
                double v = 0.0;
                for (int i = 0; i < nblob_; ++i) {
                    double dx = x - bx_[i], dy = y - by_[i];
                    v += ba_[i] * std::exp(-(dx * dx + dy * dy) / (2.0 * bs_[i] * bs_[i]));
                }
                return sigmoid(2.5 * v);
            }
            case 9: {
                double bar_v = sigmoid((ax_ - std::abs(x - cx_)) / soft_);
                double bar_h = sigmoid((ay_ - std::abs(y - cy_)) / soft_);
                return std::max(bar_v, bar_h);
            }
            default:
                return 0.5;
        }
    }

    void fix_winding() {
        if (cat_ != 7) return;
        double area2 = (vx_[1] - vx_[0]) * (vy_[2] - vy_[0]) - (vx_[2] - vx_[0]) * (vy_[1] - vy_[0]);
        winding_ = area2 >= 0.0 ? 1.0 : -1.0;
    }

private:
    int cat_;
    int R_;
    double cx_ = 0, cy_ = 0, freq_ = 3, phase_ = 0, theta_ = 0.8, soft_ = 2;
    double ax_ = 0, ay_ = 0, rot_ = 0;
    double cell_ = 16, ox_ = 0, oy_ = 0;
    double vx_[3] = {0, 0, 0}, vy_[3] = {0, 0, 0};
    double winding_ = 1.0;
    int nblob_ = 0;
    double bx_[8] = {0}, by_[8] = {0}, bs_[8] = {0}, ba_[8] = {0};
};

Image render_base_image(int category, int size, Rng& rng) {
    const int R = 2 * size;
    const bool is_shape = category == 3 || category == 4 || category == 7 || category == 9;

    auto [c0, c1] = contrasting_pair(rng);
    Color bg1 = mix(c0, random_color(rng), rng.uniform(0.15, 0.45));
    PatternField field(category, R, rng);
    field.fix_winding();

    // smooth background gradient direction + mild global shading
    double gdx = std::cos(rng.uniform(0.0, kTau));
    double gdy = std::sin(rng.uniform(0.0, kTau));
    double shade = rng.uniform(-0.18, 0.18);

    // broad value noise so the classes are not trivially separable
    double nx[2], ny[2], ns_[2], na[2];
    for (int i = 0; i < 2; ++i) {
        nx[i] = rng.uniform(0.0, R);
        ny[i] = rng.uniform(0.0, R);
        ns_[i] = R * rng.uniform(0.25, 0.5);
        na[i] = rng.uniform(-14.0, 14.0);
    }

    std::vector<double> canvas(static_cast<size_t>(R) * R * 3);
    for (int y = 0; y < R; ++y) {
        for (int x = 0; x < R; ++x) {
            double v = field(x, y);
            Color px;
            if (is_shape) {
                double t = 0.5 + 0.5 * ((x * gdx + y * gdy) / R);
                px = mix(mix(c0, bg1, std::clamp(t, 0.0, 1.0)), c1, v);
            } else {
                px = mix(c0, c1, v);
            }
            double s = 1.0 + shade * ((x * gdx + y * gdy) / R);
            double noise = 0.0;
            for (int i = 0; i < 2; ++i) {
                double dx = x - nx[i], dy = y - ny[i];
                noise += na[i] * std::exp(-(dx * dx + dy * dy) / (2.0 * ns_[i] * ns_[i]));
            }
            size_t o = (static_cast<size_t>(y) * R + x) * 3;
            canvas[o + 0] = px.r * s + noise;
            canvas[o + 1] = px.g * s + noise;
            canvas[o + 2] = px.b * s + noise;
        }
    }

    // 2x2 box average = bilinear at exactly half scale
    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            for (int c = 0; c < 3; ++c) {
                size_t o00 = ((static_cast<size_t>(2 * y) * R) + 2 * x) * 3 + c;
                size_t o01 = o00 + 3;
                size_t o10 = o00 + static_cast<size_t>(R) * 3;
                size_t o11 = o10 + 3;
                double v = 0.25 * (canvas[o00] + canvas[o01] + canvas[o10] + canvas[o11]);
                img.at(y, x, c) = static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
            }
        }
    }
    return img;
}

std::string split_for_index(int i, int count) {
    // 70/10/20 by position; labels cycle mod 10, so splits stay balanced
    if (i < (count * 7) / 10) return "train";
    if (i < (count * 8) / 10) return "val";
    return "test";
}

}  // namespace

BaseDataset generate_base_images(int count, int size, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("generate_base_images: count must be >= 1");
    if (size < 16) throw std::invalid_argument("generate_base_images: size must be >= 16");
    BaseDataset out;
    out.images.resize(static_cast<size_t>(count));
    out.labels.resize(static_cast<size_t>(count));
    out.splits.resize(static_cast<size_t>(count));
    parallel_for(count, 0, [&](int i) {
        Rng rng(derive_seed(seed, 0xba5e0000u + static_cast<uint64_t>(i)));
        int label = i % kBaseCategories;
        out.images[static_cast<size_t>(i)] = render_base_image(label, size, rng);
        out.labels[static_cast<size_t>(i)] = label;
        out.splits[static_cast<size_t>(i)] = split_for_index(i, count);
    });
    return out;
}

BaseDataset ingest_base_images(const std::string& dir, int size) {
    if (!fs::is_directory(dir)) throw std::runtime_error("ingest: '" + dir + "' is not a readable directory");
    std::vector<std::string> subdirs;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) subdirs.push_back(e.path().filename().string());
    }
    std::sort(subdirs.begin(), subdirs.end());
    if (static_cast<int>(subdirs.size()) != kBaseCategories) {
        throw std::runtime_error("ingest: expected " + std::to_string(kBaseCategories) +
                                 " category subdirectories, found " + std::to_string(subdirs.size()));
    }
    std::vector<std::pair<std::string, int>> files;  // path, label
    for (int k = 0; k < kBaseCategories; ++k) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(fs::path(dir) / subdirs[static_cast<size_t>(k)])) {
            if (e.is_regular_file()) names.push_back(e.path().string());
        }
        std::sort(names.begin(), names.end());
        for (const std::string& n : names) files.emplace_back(n, k);
    }
    if (files.empty()) throw std::runtime_error("ingest: no images found under '" + dir + "'");
    BaseDataset out;
    const int count = static_cast<int>(files.size());
    out.images.resize(files.size());
    out.labels.resize(files.size());
    out.splits.resize(files.size());
    parallel_for(count, 0, [&](int i) {
        Image img = load_image(files[static_cast<size_t>(i)].first);
        out.images[static_cast<size_t>(i)] = bilinear_resize(img, size, size);
        out.labels[static_cast<size_t>(i)] = files[static_cast<size_t>(i)].second;
        out.splits[static_cast<size_t>(i)] = split_for_index(i, count);
    });
    return out;
}

DatasetManifest write_base_dataset(const BaseDataset& base, const std::string& root) {
    DatasetManifest m;
    char buf[64];
    for (size_t i = 0; i < base.images.size(); ++i) {
        ManifestRecord r;
        std::snprintf(buf, sizeof(buf), "%s/class%d/%06zu.ppm", base.splits[i].c_str(), base.labels[i], i);
        r.path = buf;
        r.split = base.splits[i];
        r.category_name = "class" + std::to_string(base.labels[i]);
        r.base_label = base.labels[i];
        r.source_id = static_cast<int>(i);
        m.records.push_back(std::move(r));
    }
    for (const ManifestRecord& r : m.records) {
        fs::create_directories(fs::path(root) / fs::path(r.path).parent_path());
    }
    parallel_for(static_cast<int>(base.images.size()), 0, [&](int i) {
        save_image(base.images[static_cast<size_t>(i)], (fs::path(root) / m.records[static_cast<size_t>(i)].path).string());
    });
    return m;
}

// --------------------------------------------------------------------------

DatasetManifest build_dataset(const std::string& root, const std::string& base_root,
                              const DatasetManifest& base_manifest, const Checkpoint& net_a,
                              const Checkpoint& net_b, const BuildOptions& opt) {
    if (base_manifest.records.empty()) throw std::invalid_argument("build_dataset: empty base manifest");
    const LabelCatalog catalog = LabelCatalog::default_catalog();
    const std::vector<AttackCombo> grid = attack_grid_both_networks();

    // cycle entry 0 = original, >0 = grid combo index + 1
    std::vector<int> train_cycle{0}, test_cycle{0};
    for (int gi = 0; gi < static_cast<int>(grid.size()); ++gi) {
        if (grid[static_cast<size_t>(gi)].training) train_cycle.push_back(gi + 1);
        test_cycle.push_back(gi + 1);
    }

    struct Job {
        int base_index = 0;
        int cycle_entry = 0;  // 0 = original
        bool failed = false;
        ManifestRecord record;
    };
    std::vector<Job> jobs;
    for (const std::string& split : {std::string("train"), std::string("val"), std::string("test")}) {
        const std::vector<int>& cycle = split == "test" ? test_cycle : train_cycle;
        std::vector<int> idxs = base_manifest.split_indices(split);
        for (size_t p = 0; p < idxs.size(); ++p) {
            Job job;
            job.base_index = idxs[p];
            job.cycle_entry = cycle[p % cycle.size()];
            jobs.push_back(job);
        }
    }

    // create all directories up front; workers only write files
    for (const Job& job : jobs) {
        const ManifestRecord& base = base_manifest.records[static_cast<size_t>(job.base_index)];
        std::string category =
            job.cycle_entry == 0 ? "original" : grid[static_cast<size_t>(job.cycle_entry - 1)].category_name();
        fs::create_directories(fs::path(root) / base.split / category);
    }

    parallel_for(static_cast<int>(jobs.size()), opt.threads, [&](int ji) {
        Job& job = jobs[static_cast<size_t>(ji)];
        const ManifestRecord& base = base_manifest.records[static_cast<size_t>(job.base_index)];
        Image img = load_image((fs::path(base_root) / base.path).string());

        ManifestRecord r;
        r.split = base.split;
        r.base_label = base.base_label;
        r.source_id = base.source_id;
        char buf[64];
        if (job.cycle_entry == 0) {
            r.category_name = "original";
            r.catalog_id = 0;
            std::snprintf(buf, sizeof(buf), "%s/original/%06d.ppm", base.split.c_str(), base.source_id);
            r.path = buf;
            save_image(img, (fs::path(root) / r.path).string());
        } else {
            const AttackCombo& combo = grid[static_cast<size_t>(job.cycle_entry - 1)];
            const uint64_t seed = derive_seed(opt.seed, 0xa77ac4u ^ static_cast<uint64_t>(base.source_id));
            AttackConfig cfg;
            cfg.family = combo.family;
            cfg.step_size = combo.ss;
            cfg.num_steps = combo.family == AttackFamily::FGSM ? 1 : combo.ns;
            cfg.target_label = random_target(base.base_label, kBaseCategories, seed);
            cfg.seed = seed;
            r.category_name = combo.category_name();
            r.catalog_id = catalog.find(r.category_name);
            r.network = combo.network;
            r.family = combo.family;
            r.ss = combo.ss;
            if (combo.family == AttackFamily::PGD) r.ns = combo.ns;
            r.eps = cfg.effective_epsilon();
            r.target_label = cfg.target_label;
            r.seed = seed;
            std::snprintf(buf, sizeof(buf), "%s/%s/%06d.ppm", base.split.c_str(), r.category_name.c_str(),
                          base.source_id);
            r.path = buf;
            try {
                const Checkpoint& net = combo.network == Network::NetA ? net_a : net_b;
                AttackResult res = run_attack(net, img, cfg);
                save_image(res.adversarial, (fs::path(root) / r.path).string());
            } catch (const std::runtime_error& e) {
                std::fprintf(stderr, "build_dataset: attack failed for source %d (%s): %s -- record skipped\n",
                             base.source_id, r.category_name.c_str(), e.what());
                job.failed = true;
            }
        }
        job.record = std::move(r);
    });

    DatasetManifest manifest;
    for (Job& job : jobs) {
        if (!job.failed) manifest.records.push_back(std::move(job.record));
    }
    save_manifest(manifest, (fs::path(root) / "manifest.jsonl").string());
    if (opt.verbose) {
        std::fprintf(stderr, "build_dataset: %zu records (%zu skipped)\n", manifest.records.size(),
                     jobs.size() - manifest.records.size());
    }
    return manifest;
}

// --------------------------------------------------------------------------

namespace {

// Preloads a split's images once; loaders then work from memory.
struct SplitCache {
    std::vector<Image> images;
    std::vector<int> labels;
};

std::shared_ptr<SplitCache> load_split(const std::string& root, const DatasetManifest& m, const std::string& split,
                                       bool detector_labels) {
    auto cache = std::make_shared<SplitCache>();
    for (int idx : m.split_indices(split)) {
        const ManifestRecord& r = m.records[static_cast<size_t>(idx)];
        int label = detector_labels ? r.catalog_id : r.base_label;
        if (detector_labels && label < 0) {
            throw std::invalid_argument("detector training split contains a non-catalog category: " +
                                        r.category_name);
        }
        cache->images.push_back(load_image((fs::path(root) / r.path).string()));
        cache->labels.push_back(label);
    }
    return cache;
}

}  // namespace

TrainSet target_train_set(const std::string& root, const DatasetManifest& m, const std::string& split) {
    auto cache = load_split(root, m, split, false);
    TrainSet set;
    set.count = static_cast<int>(cache->images.size());
    set.input = [cache](int i) { return target_input(cache->images[static_cast<size_t>(i)]); };
    set.label = [cache](int i) { return cache->labels[static_cast<size_t>(i)]; };
    return set;
}

TrainSet detector_train_set(const std::string& root, const DatasetManifest& m, const std::string& split,
                            FeatureMode mode) {
    auto cache = load_split(root, m, split, true);
    TrainSet set;
    set.count = static_cast<int>(cache->images.size());
    set.input = [cache, mode](int i) { return preprocess(cache->images[static_cast<size_t>(i)], mode).t; };
    set.label = [cache](int i) { return cache->labels[static_cast<size_t>(i)]; };
    return set;
}

double prediction_disagreement(const Checkpoint& a, const Checkpoint& b, const std::string& root,
                               const DatasetManifest& m, const std::string& split, int threads) {
    std::vector<int> idxs = m.split_indices(split);
    if (idxs.empty()) throw std::invalid_argument("prediction_disagreement: empty split");
    std::vector<uint8_t> differ(idxs.size(), 0);
    parallel_for(static_cast<int>(idxs.size()), threads, [&](int i) {
        const ManifestRecord& r = m.records[static_cast<size_t>(idxs[static_cast<size_t>(i)])];
        Tensor input = target_input(load_image((fs::path(root) / r.path).string()));
        differ[static_cast<size_t>(i)] = argmax(predict(a, input)) != argmax(predict(b, input)) ? 1 : 0;
    });
    int64_t n = 0;
    for (uint8_t d : differ) n += d;
    return static_cast<double>(n) / static_cast<double>(idxs.size());
}

}  // namespace advf
