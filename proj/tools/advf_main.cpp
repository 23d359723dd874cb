// advf: generate gradient-sign adversarial images against built-in target
// networks, then detect, attribute, and estimate the parameters of those
// attacks from pixels alone.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "advf/attacks.hpp"
#include "advf/dataset.hpp"
#include "advf/metrics.hpp"
#include "advf/model.hpp"
#include "advf/pipeline.hpp"
#include "advf/rng.hpp"
#include "advf/serialize.hpp"
#include "advf/train.hpp"

namespace fs = std::filesystem;
using namespace advf;

namespace {

struct Options {
    std::string root;
    std::string mode = "co-occur";
    std::string arch = "net-A";
    std::string checkpoint;
    std::string net_a_checkpoint;
    std::string net_b_checkpoint;
    std::string report_out;
    std::string image_path;
    std::string requests_path;
    std::string ingest_dir;
    std::string split = "test";
    std::string out_path;
    uint64_t seed = 42;
    int image_size = 64;
    int base_count = 2000;
    int epochs = 20;
    int batch_size = 32;
    double lr = 1e-3;
    int threads = 0;
    bool overwrite = false;

    // attack flags for single-shot generation via attack-batch
    std::string attack = "PGD";
    int ss = 1;
    int ns = 8;
    double eps = -1.0;
    int target_label = 0;

    std::string base_root() const { return (fs::path(root) / "base").string(); }
    std::string base_manifest_path() const { return (fs::path(root) / "base" / "base_manifest.jsonl").string(); }
    std::string attacked_root() const { return (fs::path(root) / "attacked").string(); }
    std::string attacked_manifest_path() const {
        return (fs::path(root) / "attacked" / "manifest.jsonl").string();
    }
    std::string default_target_ckpt(const std::string& a) const {
        return (fs::path(root) / "checkpoints" / (a + ".advf")).string();
    }
    std::string default_detector_ckpt() const {
        return (fs::path(root) / "checkpoints" / ("detector-" + mode + ".advf")).string();
    }
};

void require_absent_or_overwrite(const std::string& path, bool overwrite) {
    if (!overwrite && fs::exists(path)) {
        throw std::runtime_error("'" + path + "' already exists; pass --overwrite to replace it");
    }
}

void require_artifact(const std::string& path, const std::string& producing_cmd) {
    if (!fs::exists(path)) {
        throw std::runtime_error("missing prerequisite '" + path + "'; run `advf " + producing_cmd + "` first");
    }
}

Json options_echo(const Options& o, const std::string& subcommand) {
    Json j;
    j["subcommand"] = subcommand;
    j["dataset_root"] = o.root;
    j["mode"] = o.mode;
    j["seed"] = o.seed;
    j["image_size"] = o.image_size;
    j["base_count"] = o.base_count;
    j["epochs"] = o.epochs;
    j["batch_size"] = o.batch_size;
    j["lr"] = o.lr;
    j["threads"] = o.threads;
    return j;
}

void write_runlog(const Options& o, const std::string& subcommand, double wall_seconds) {
    fs::create_directories(fs::path(o.root) / "logs");
    Json j = options_echo(o, subcommand);
    j["wall_seconds"] = wall_seconds;
    write_text_file((fs::path(o.root) / "logs" / (subcommand + ".runlog")).string(), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_train_target(Options& o) {
    if (o.root.empty()) throw std::runtime_error("--dataset-root (or ADVF_ROOT) is required");
    DatasetManifest base_manifest;
    if (fs::exists(o.base_manifest_path())) {
        base_manifest = load_manifest(o.base_manifest_path());
        std::fprintf(stderr, "reusing base set at %s (%zu images)\n", o.base_root().c_str(),
                     base_manifest.records.size());
    } else {
        std::fprintf(stderr, "generating base set: %d images of %dx%d (seed %llu)\n", o.base_count, o.image_size,
                     o.image_size, static_cast<unsigned long long>(o.seed));
        BaseDataset base = o.ingest_dir.empty() ? generate_base_images(o.base_count, o.image_size, o.seed)
                                                : ingest_base_images(o.ingest_dir, o.image_size);
        base_manifest = write_base_dataset(base, o.base_root());
        save_manifest(base_manifest, o.base_manifest_path());
    }

    std::string ckpt_path = o.checkpoint.empty() ? o.default_target_ckpt(o.arch) : o.checkpoint;
    require_absent_or_overwrite(ckpt_path, o.overwrite);
    fs::create_directories(fs::path(ckpt_path).parent_path());

    ArchId arch = arch_from_name(o.arch);
    ModelSpec spec = arch == ArchId::NetA ? ModelSpec::net_a(o.image_size) : ModelSpec::net_b(o.image_size);
    TrainOptions topt;
    topt.epochs = o.epochs;
    topt.batch_size = o.batch_size;
    topt.lr = static_cast<float>(o.lr);
    topt.seed = derive_seed(o.seed, arch == ArchId::NetA ? 0xAAu : 0xBBu);
    topt.threads = o.threads;
    topt.verbose = true;

    TrainSet tr = target_train_set(o.base_root(), base_manifest, "train");
    TrainSet va = target_train_set(o.base_root(), base_manifest, "val");
    TrainResult result = train(spec, tr, va, topt);
    save_checkpoint(result.best, ckpt_path);
    write_train_log(result.log, ckpt_path + ".log");

    TrainSet te = target_train_set(o.base_root(), base_manifest, "test");
    auto [test_loss, test_acc] = evaluate_loss_acc(spec, result.best.weights, te, o.threads);
    std::fprintf(stderr, "%s: best epoch %d, val_loss %.4f, clean test accuracy %.4f\n", o.arch.c_str(),
                 result.best.meta.epoch, result.best.meta.val_loss, test_acc);
    std::printf("checkpoint %s\ntest_accuracy %.4f\ntest_loss %.4f\n", ckpt_path.c_str(), test_acc, test_loss);
    return 0;
}

int cmd_build_dataset(Options& o) {
    require_artifact(o.base_manifest_path(), "train-target");
    std::string a_path = o.net_a_checkpoint.empty() ? o.default_target_ckpt("net-A") : o.net_a_checkpoint;
    std::string b_path = o.net_b_checkpoint.empty() ? o.default_target_ckpt("net-B") : o.net_b_checkpoint;
    require_artifact(a_path, "train-target --arch net-A");
    require_artifact(b_path, "train-target --arch net-B");
    require_absent_or_overwrite(o.attacked_manifest_path(), o.overwrite);

    DatasetManifest base_manifest = load_manifest(o.base_manifest_path());
    Checkpoint net_a = load_checkpoint(a_path);
    Checkpoint net_b = load_checkpoint(b_path);

    double disagreement = prediction_disagreement(net_a, net_b, o.base_root(), base_manifest, "test", o.threads);
    std::fprintf(stderr, "target nets disagree on %.2f%% of clean test images\n", 100.0 * disagreement);
    if (disagreement < 0.01) {
        std::fprintf(stderr,
                     "warning: target nets disagree on <1%% of clean inputs; attribution between them is ill-posed\n");
    }

    BuildOptions bopt;
    bopt.seed = o.seed;
    bopt.threads = o.threads;
    bopt.verbose = true;
    DatasetManifest manifest = build_dataset(o.attacked_root(), o.base_root(), base_manifest, net_a, net_b, bopt);
    std::printf("manifest %s\nrecords %zu\n", o.attacked_manifest_path().c_str(), manifest.records.size());
    return 0;
}

int cmd_train_detector(Options& o) {
    require_artifact(o.attacked_manifest_path(), "build-dataset");
    std::string ckpt_path = o.checkpoint.empty() ? o.default_detector_ckpt() : o.checkpoint;
    require_absent_or_overwrite(ckpt_path, o.overwrite);
    fs::create_directories(fs::path(ckpt_path).parent_path());

    FeatureMode mode = feature_mode_from_name(o.mode);
    DatasetManifest manifest = load_manifest(o.attacked_manifest_path());
    LabelCatalog catalog = LabelCatalog::default_catalog();

    ModelSpec spec = ModelSpec::detector(mode, o.image_size, catalog.size());
    TrainOptions topt;
    topt.epochs = o.epochs;
    topt.batch_size = o.batch_size;
    topt.lr = static_cast<float>(o.lr);
    topt.seed = derive_seed(o.seed, 0xDE7EC7u + static_cast<uint64_t>(mode));
    topt.threads = o.threads;
    topt.verbose = true;

    TrainSet tr = detector_train_set(o.attacked_root(), manifest, "train", mode);
    TrainSet va = detector_train_set(o.attacked_root(), manifest, "val", mode);
    TrainResult result = train(spec, tr, va, topt);
    result.best.mode = mode;
    result.best.catalog = catalog;
    save_checkpoint(result.best, ckpt_path);
    write_train_log(result.log, ckpt_path + ".log");
    std::printf("checkpoint %s\nbest_epoch %d\nval_loss %.4f\n", ckpt_path.c_str(), result.best.meta.epoch,
                result.best.meta.val_loss);
    return 0;
}

int cmd_evaluate(Options& o) {
    require_artifact(o.attacked_manifest_path(), "build-dataset");
    std::string ckpt_path = o.checkpoint.empty() ? o.default_detector_ckpt() : o.checkpoint;
    require_artifact(ckpt_path, "train-detector --mode " + o.mode);
    std::string report_path = o.report_out.empty()
                                  ? (fs::path(o.root) / "reports" / ("eval-" + o.mode + ".json")).string()
                                  : o.report_out;
    require_absent_or_overwrite(report_path, o.overwrite);
    fs::create_directories(fs::path(report_path).parent_path());

    Checkpoint detector = load_checkpoint(ckpt_path);
    DatasetManifest manifest = load_manifest(o.attacked_manifest_path());
    DetectorEvaluation ev = evaluate_detector(detector, o.attacked_root(), manifest, o.split, o.threads);

    Json report = report_to_json(ev);
    report["seed"] = o.seed;
    write_text_file(report_path, report.dump(2) + "\n");
    write_text_file(report_path + ".confusion.tsv", confusion_tsv(ev.confusion13));
    std::cout << report_human(ev);
    std::fprintf(stderr, "report written to %s\n", report_path.c_str());
    return 0;
}

int cmd_infer(Options& o) {
    std::string ckpt_path = o.checkpoint.empty() ? o.default_detector_ckpt() : o.checkpoint;
    require_artifact(ckpt_path, "train-detector");
    if (o.image_path.empty()) throw std::runtime_error("--image is required");

    Checkpoint detector = load_checkpoint(ckpt_path);
    if (!detector.catalog) throw std::runtime_error("checkpoint has no label catalog; not a detector checkpoint");
    Image img = load_image(o.image_path);
    Verdict v = full_verdict(detector, img, *detector.catalog);
    Json record = verdict_to_json(v, *detector.catalog);
    record["image"] = o.image_path;
    std::cout << record.dump() << "\n";
    if (!o.report_out.empty()) {
        require_absent_or_overwrite(o.report_out, o.overwrite);
        write_text_file(o.report_out, record.dump() + "\n");
    }
    return 0;
}

int cmd_export_features(Options& o) {
    require_artifact(o.attacked_manifest_path(), "build-dataset");
    std::string ckpt_path = o.checkpoint.empty() ? o.default_detector_ckpt() : o.checkpoint;
    require_artifact(ckpt_path, "train-detector --mode " + o.mode);
    std::string out = o.out_path.empty()
                          ? (fs::path(o.root) / "reports" / ("features-" + o.mode + "-" + o.split + ".jsonl")).string()
                          : o.out_path;
    require_absent_or_overwrite(out, o.overwrite);
    fs::create_directories(fs::path(out).parent_path());

    Checkpoint detector = load_checkpoint(ckpt_path);
    if (!detector.mode) throw std::runtime_error("checkpoint carries no preprocessing mode");
    DatasetManifest manifest = load_manifest(o.attacked_manifest_path());
    std::vector<int> idxs = manifest.split_indices(o.split);
    if (idxs.empty()) throw std::runtime_error("split '" + o.split + "' is empty");

    std::string body;
    for (int idx : idxs) {
        const ManifestRecord& r = manifest.records[static_cast<size_t>(idx)];
        Image img = load_image((fs::path(o.attacked_root()) / r.path).string());
        std::vector<float> feat = penultimate_features(detector, preprocess(img, *detector.mode).t);
        Json j;
        j["path"] = r.path;
        j["category"] = r.category_name;
        j["features"] = feat;
        body += j.dump();
        body += '\n';
    }
    write_text_file(out, body);
    std::printf("features %s\nrecords %zu\n", out.c_str(), idxs.size());
    return 0;
}

int cmd_attack_batch(Options& o) {
    std::string ckpt_path = o.checkpoint.empty() ? o.default_target_ckpt(o.arch) : o.checkpoint;
    require_artifact(ckpt_path, "train-target --arch " + o.arch);
    Checkpoint target_net = load_checkpoint(ckpt_path);
    std::vector<AttackRequest> requests;
    if (!o.requests_path.empty()) {
        requests = parse_attack_requests(read_text_file(o.requests_path));
    } else {
        if (o.image_path.empty() || o.out_path.empty()) {
            throw std::runtime_error("pass --requests, or --image and --out with --attack/--ss/--ns/--eps");
        }
        AttackRequest req;
        req.input_path = o.image_path;
        req.output_path = o.out_path;
        req.config.family = family_from_name(o.attack);
        req.config.step_size = o.ss;
        req.config.num_steps = req.config.family == AttackFamily::FGSM ? 1 : o.ns;
        req.config.epsilon = o.eps;
        req.config.target_label = o.target_label;
        req.config.seed = o.seed;
        req.config.validate();
        requests.push_back(std::move(req));
    }
    std::vector<AttackResult> results = run_attack_batch(target_net, requests, o.threads);
    int successes = 0;
    for (size_t i = 0; i < results.size(); ++i) {
        successes += results[i].target_success ? 1 : 0;
        std::printf("%s\tlinf=%d\titers=%d\tsuccess=%d\n", requests[i].output_path.c_str(),
                    results[i].achieved_linf, results[i].iterations, results[i].target_success ? 1 : 0);
    }
    std::fprintf(stderr, "%d/%zu attacks reached their target label\n", successes, results.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial-attack generation, detection, attribution and parameter estimation"};
    app.set_config("--config");
    Options o;
    if (const char* env_root = std::getenv("ADVF_ROOT")) o.root = env_root;

    app.add_option("--dataset-root", o.root, "workspace root (env ADVF_ROOT)")->envname("ADVF_ROOT");
    app.add_option("--seed", o.seed, "run seed; recorded in every artifact");
    app.add_option("--threads", o.threads, "worker threads (0 = auto)");
    app.add_flag("--overwrite", o.overwrite, "allow replacing existing artifacts");

    auto add_train_flags = [&](CLI::App* c) {
        c->add_option("--epochs", o.epochs, "training epochs");
        c->add_option("--batch-size", o.batch_size, "batch size");
        c->add_option("--lr", o.lr, "Adam learning rate");
        c->add_option("--image-size", o.image_size, "base image side length");
    };

    CLI::App* t = app.add_subcommand("train-target", "generate the base set if needed and train a target network");
    t->add_option("--arch", o.arch, "net-A | net-B")->check(CLI::IsMember({"net-A", "net-B"}));
    t->add_option("--checkpoint", o.checkpoint, "output checkpoint path");
    t->add_option("--base-count", o.base_count, "number of base images to generate");
    t->add_option("--ingest-dir", o.ingest_dir, "labeled image directory to ingest instead of synthesizing");
    add_train_flags(t);

    CLI::App* b = app.add_subcommand("build-dataset", "attack the base set per the parameter grid");
    b->add_option("--net-a-checkpoint", o.net_a_checkpoint, "net-A checkpoint");
    b->add_option("--net-b-checkpoint", o.net_b_checkpoint, "net-B checkpoint");

    CLI::App* d = app.add_subcommand("train-detector", "train the 13-way detector on one preprocessing mode");
    d->add_option("--mode", o.mode, "direct | laplace | co-occur");
    d->add_option("--checkpoint", o.checkpoint, "output checkpoint path");
    add_train_flags(d);

    CLI::App* e = app.add_subcommand("evaluate", "metrics over a dataset split");
    e->add_option("--mode", o.mode, "detector mode (picks the default checkpoint)");
    e->add_option("--checkpoint", o.checkpoint, "detector checkpoint");
    e->add_option("--split", o.split, "train | val | test");
    e->add_option("--report-out", o.report_out, "metrics report path");

    CLI::App* i = app.add_subcommand("infer", "verdict for a single image");
    i->add_option("--mode", o.mode, "detector mode (picks the default checkpoint)");
    i->add_option("--checkpoint", o.checkpoint, "detector checkpoint");
    i->add_option("--image", o.image_path, "input image (.ppm)")->required();
    i->add_option("--report-out", o.report_out, "also write the verdict record here");

    CLI::App* x = app.add_subcommand("export-features", "dump penultimate-layer features for offline analysis");
    x->add_option("--mode", o.mode, "detector mode (picks the default checkpoint)");
    x->add_option("--checkpoint", o.checkpoint, "detector checkpoint");
    x->add_option("--split", o.split, "dataset split");
    x->add_option("--out", o.out_path, "output JSONL path");

    CLI::App* ab = app.add_subcommand("attack-batch", "run an attack request file, or one attack from flags");
    ab->add_option("--checkpoint", o.checkpoint, "target network checkpoint");
    ab->add_option("--arch", o.arch, "target architecture for the default checkpoint path");
    ab->add_option("--requests", o.requests_path, "request file (line-delimited)");
    ab->add_option("--image", o.image_path, "single input image (used when --requests is absent)");
    ab->add_option("--out", o.out_path, "single output image path");
    ab->add_option("--attack", o.attack, "FGSM | PGD");
    ab->add_option("--ss", o.ss, "step size in pixel units");
    ab->add_option("--ns", o.ns, "step count (PGD)");
    ab->add_option("--eps", o.eps, "L-inf budget; negative = non-binding ss*ns default");
    ab->add_option("--target", o.target_label, "target label for the single-shot attack");

    app.require_subcommand(1);
    for (CLI::App* sub : {t, b, d, e, i, x, ab}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    const auto started = std::chrono::steady_clock::now();
    std::string name;
    int rc = 1;
    try {
        if (t->parsed()) rc = cmd_train_target(o), name = "train-target";
        else if (b->parsed()) rc = cmd_build_dataset(o), name = "build-dataset";
        else if (d->parsed()) rc = cmd_train_detector(o), name = "train-detector";
        else if (e->parsed()) rc = cmd_evaluate(o), name = "evaluate";
        else if (i->parsed()) rc = cmd_infer(o), name = "infer";
        else if (x->parsed()) rc = cmd_export_features(o), name = "export-features";
        else if (ab->parsed()) rc = cmd_attack_batch(o), name = "attack-batch";
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    if (!name.empty() && !o.root.empty()) {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        try {
            write_runlog(o, name, wall);
        } catch (const std::exception& err) {
            std::fprintf(stderr, "warning: could not write run log: %s\n", err.what());
        }
    }
    return rc;
}
