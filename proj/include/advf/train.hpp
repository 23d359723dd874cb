#pragma once

#include <functional>
#include <string>
#include <vector>

#include "advf/model.hpp"

namespace advf {

// A labelled sample source. Loaders must be pure and thread-safe: batch
// assembly runs in parallel, with results reduced in sample-index order so
// the outcome is independent of the thread count.
struct TrainSet {
    int count = 0;
    std::function<Tensor(int)> input;
    std::function<int(int)> label;
};

struct TrainOptions {
    int epochs = 20;
    int batch_size = 32;
    float lr = 1e-3f;
    uint64_t seed = 0;
    int threads = 0;  // 0 = auto
    bool verbose = false;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
};

struct TrainResult {
    Checkpoint best;            // weights of the lowest-validation-loss epoch
    std::vector<EpochLog> log;  // one record per epoch
};

// Adam + cross-entropy training with per-epoch validation and
// best-validation checkpointing. Data order reshuffles every epoch from the
// run seed.
TrainResult train(const ModelSpec& spec, const TrainSet& train_set, const TrainSet& val_set,
                  const TrainOptions& opt);

// Mean cross-entropy loss and top-1 accuracy over a sample set.
std::pair<double, double> evaluate_loss_acc(const ModelSpec& spec, const std::vector<Tensor>& weights,
                                            const TrainSet& set, int threads = 0);

// Line-delimited records: epoch, train_loss, val_loss, val_acc.
std::string format_train_log(const std::vector<EpochLog>& log);
void write_train_log(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace advf
