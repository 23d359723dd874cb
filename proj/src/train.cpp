#include "advf/train.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "advf/adam.hpp"
#include "advf/parallel.hpp"
#include "advf/rng.hpp"
#include "advf/serialize.hpp"

namespace advf {

namespace {

struct Workers {
    std::vector<std::unique_ptr<NetGraph>> graphs;

    Workers(const ModelSpec& spec, const std::vector<Tensor>* weights, int threads) {
        for (int t = 0; t < threads; ++t) {
            graphs.push_back(std::make_unique<NetGraph>(spec, weights));
            graphs.back()->g.set_input_needs_grad(false);
        }
    }
};

// Runs fn(worker, i) for i in [0, n) over fixed contiguous chunks, one worker
// graph per chunk.
void chunked_run(Workers& workers, int n, const std::function<void(NetGraph&, int)>& fn) {
    const int threads = static_cast<int>(workers.graphs.size());
    const int chunk = (n + threads - 1) / threads;
    parallel_for(threads, threads, [&](int t) {
        const int lo = t * chunk, hi = std::min(n, lo + chunk);
        for (int i = lo; i < hi; ++i) fn(*workers.graphs[static_cast<size_t>(t)], i);
    });
}

}  // namespace

std::pair<double, double> evaluate_loss_acc(const ModelSpec& spec, const std::vector<Tensor>& weights,
                                            const TrainSet& set, int threads) {
    if (set.count <= 0) throw std::invalid_argument("evaluate: empty sample set");
    if (threads <= 0) threads = default_threads();
    threads = std::min(threads, set.count);
    Workers workers(spec, &weights, threads);
    std::vector<double> losses(static_cast<size_t>(set.count));
    std::vector<uint8_t> correct(static_cast<size_t>(set.count));
    chunked_run(workers, set.count, [&](NetGraph& net, int i) {
        const int label = set.label(i);
        net.g.set_input(net.input, set.input(i));
        net.g.set_ce_target(net.loss, label);
        net.g.forward(net.loss);
        losses[static_cast<size_t>(i)] = net.g.value(net.loss).v[0];
        correct[static_cast<size_t>(i)] = argmax(net.g.value(net.logits).v) == label ? 1 : 0;
    });
    double loss_sum = 0.0;
    int64_t n_correct = 0;
    for (int i = 0; i < set.count; ++i) {
        loss_sum += losses[static_cast<size_t>(i)];
        n_correct += correct[static_cast<size_t>(i)];
    }
    return {loss_sum / set.count, static_cast<double>(n_correct) / set.count};
}

TrainResult train(const ModelSpec& spec, const TrainSet& train_set, const TrainSet& val_set,
                  const TrainOptions& opt) {
    if (train_set.count <= 0) throw std::invalid_argument("train: empty training split");
    if (val_set.count <= 0) throw std::invalid_argument("train: empty validation split");
    if (opt.epochs < 1 || opt.batch_size < 1) throw std::invalid_argument("train: bad epochs/batch size");

    Checkpoint model = build_model(spec, opt.seed);
    const int threads = opt.threads > 0 ? opt.threads : default_threads();
    Workers workers(spec, &model.weights, threads);
    AdamState adam = AdamState::init(model.weights);
    AdamOptions adam_opt;
    adam_opt.lr = opt.lr;

    const int B = std::min(opt.batch_size, train_set.count);
    // per-sample gradient slots; reduced in index order so results do not
    // depend on the thread count
    std::vector<std::vector<Tensor>> grad_slots(static_cast<size_t>(B));
    for (auto& slot : grad_slots) {
        for (const Tensor& w : model.weights) slot.emplace_back(w.shape);
    }
    std::vector<double> loss_slots(static_cast<size_t>(B));
    std::vector<Tensor> batch_grad;
    for (const Tensor& w : model.weights) batch_grad.emplace_back(w.shape);

    TrainResult result;
    result.best = model;  // lr = 0 or no improvement keeps the initialization
    result.best.meta.epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<int> order(static_cast<size_t>(train_set.count));
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(opt.seed, 0x5u * 0x10000u + static_cast<uint64_t>(epoch)));
        for (int i = train_set.count - 1; i > 0; --i) {
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);
        }

        double epoch_loss = 0.0;
        for (int start = 0; start < train_set.count; start += B) {
            const int m = std::min(B, train_set.count - start);
            chunked_run(workers, m, [&](NetGraph& net, int p) {
                const int sample = order[static_cast<size_t>(start + p)];
                net.g.set_input(net.input, train_set.input(sample));
                net.g.set_ce_target(net.loss, train_set.label(sample));
                net.g.forward(net.loss);
                net.g.backward(net.loss);
                loss_slots[static_cast<size_t>(p)] = net.g.value(net.loss).v[0];
                for (size_t k = 0; k < model.weights.size(); ++k) {
                    grad_slots[static_cast<size_t>(p)][k].v = net.g.grad(net.param_nodes[k]).v;
                }
            });
            for (auto& g : batch_grad) g.zero();
            for (int p = 0; p < m; ++p) {
                epoch_loss += loss_slots[static_cast<size_t>(p)];
                for (size_t k = 0; k < batch_grad.size(); ++k) {
                    const auto& src = grad_slots[static_cast<size_t>(p)][k].v;
                    auto& dst = batch_grad[k].v;
                    for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
                }
            }
            const float inv_m = 1.0f / static_cast<float>(m);
            for (auto& g : batch_grad) {
                for (float& x : g.v) x *= inv_m;
            }
            adam_step(model.weights, batch_grad, adam, adam_opt);
        }

        auto [val_loss, val_acc] = evaluate_loss_acc(spec, model.weights, val_set, threads);
        EpochLog entry{epoch, epoch_loss / train_set.count, val_loss, val_acc};
        result.log.push_back(entry);
        if (opt.verbose) {
            std::fprintf(stderr, "epoch %d  train_loss %.4f  val_loss %.4f  val_acc %.4f\n", entry.epoch,
                         entry.train_loss, entry.val_loss, entry.val_acc);
        }
        if (val_loss < best_val) {
            best_val = val_loss;
            result.best.weights = model.weights;
            result.best.meta.epoch = epoch;
            result.best.meta.val_loss = val_loss;
        }
    }
    result.best.meta.seed = opt.seed;
    return result;
}

std::string format_train_log(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << "epoch\ttrain_loss\tval_loss\tval_acc\n";
    char buf[128];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\n", e.epoch, e.train_loss, e.val_loss, e.val_acc);
        os << buf;
    }
    return os.str();
}

void write_train_log(const std::vector<EpochLog>& log, const std::string& path) {
    write_text_file(path, format_train_log(log));
}

}  // namespace advf
