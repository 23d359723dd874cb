#pragma once

#include <optional>
#include <string>
#include <vector>

#include "advf/catalog.hpp"
#include "advf/forensics.hpp"
#include "advf/graph.hpp"
#include "advf/serialize.hpp"
#include "advf/tensor.hpp"

namespace advf {

enum class ArchId { NetA, NetB, Detector };

const char* arch_name(ArchId a);
ArchId arch_from_name(const std::string& name);

struct LayerDef {
    enum class Kind { Conv, Relu, MaxPool, Dense, Flatten, Save, AddSaved };
    Kind kind;
    int out_ch = 0;  // Conv/Dense
    int k = 0;       // Conv kernel / MaxPool window
    int stride = 1;
    int pad = 0;
};

// Architecture description. net-A is a plain conv stack (no skips), net-B a
// residual design with elementwise-add skip connections; the detector adapts
// its input layer to the preprocessing mode's channel count.
struct ModelSpec {
    ArchId arch = ArchId::NetA;
    Shape input_shape;  // {H, W, C}
    int num_categories = 0;
    std::vector<LayerDef> layers;

    static ModelSpec net_a(int image_size, int categories = 10);
    static ModelSpec net_b(int image_size, int categories = 10);
    static ModelSpec detector(FeatureMode mode, int image_size, int categories = 13);

    int skip_connection_count() const;
    void validate() const;

    Json to_json() const;
    static ModelSpec from_json(const Json& j);
};

struct TrainMeta {
    int epoch = -1;        // epoch of the saved weights (-1 = initialization)
    double val_loss = 0.0; // minimum validation loss over recorded epochs
    uint64_t seed = 0;
};

// Model spec + flat weights + training metadata. Detector checkpoints also
// carry their preprocessing mode and label catalog.
struct Checkpoint {
    ModelSpec spec;
    std::vector<Tensor> weights;
    TrainMeta meta;
    std::optional<FeatureMode> mode;
    std::optional<LabelCatalog> catalog;
};

// Deterministic He-style fan-in initialization from the seed.
Checkpoint build_model(const ModelSpec& spec, uint64_t seed);

// Executable tape for one model; binds an externally owned weight list so
// several instances (one per worker thread) can share read-only weights.
struct NetGraph {
    Graph g;
    int input = -1;
    int logits = -1;
    int loss = -1;         // softmax-cross-entropy node
    int penultimate = -1;  // input of the final dense layer
    std::vector<int> param_nodes;  // node id per weight index

    NetGraph(const ModelSpec& spec, const std::vector<Tensor>* weights);
};

// Pixels scaled to [0,1]; the target networks' input convention.
Tensor target_input(const Image& img);

// Softmax probabilities for a prepared network input tensor.
std::vector<float> predict(const Checkpoint& ckpt, const Tensor& input);

// Activation vector feeding the final dense layer.
std::vector<float> penultimate_features(const Checkpoint& ckpt, const Tensor& input);

int argmax(const std::vector<float>& v);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace advf
