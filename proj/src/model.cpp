#include "advf/model.hpp"

#include <cmath>
#include <stdexcept>

#include "advf/rng.hpp"

namespace advf {

const char* arch_name(ArchId a) {
    switch (a) {
        case ArchId::NetA: return "net-A";
        case ArchId::NetB: return "net-B";
        case ArchId::Detector: return "detector";
    }
    return "?";
}

ArchId arch_from_name(const std::string& name) {
    if (name == "net-A" || name == "netA" || name == "net-a") return ArchId::NetA;
    if (name == "net-B" || name == "netB" || name == "net-b") return ArchId::NetB;
    if (name == "detector") return ArchId::Detector;
    throw std::invalid_argument("unknown architecture '" + name + "'");
}

namespace {

const char* layer_kind_name(LayerDef::Kind k) {
    switch (k) {
        case LayerDef::Kind::Conv: return "conv";
        case LayerDef::Kind::Relu: return "relu";
        case LayerDef::Kind::MaxPool: return "maxpool";
        case LayerDef::Kind::Dense: return "dense";
        case LayerDef::Kind::Flatten: return "flatten";
        case LayerDef::Kind::Save: return "save";
        case LayerDef::Kind::AddSaved: return "add_saved";
    }
    return "?";
}

LayerDef::Kind layer_kind_from_name(const std::string& name) {
    if (name == "conv") return LayerDef::Kind::Conv;
    if (name == "relu") return LayerDef::Kind::Relu;
    if (name == "maxpool") return LayerDef::Kind::MaxPool;
    if (name == "dense") return LayerDef::Kind::Dense;
    if (name == "flatten") return LayerDef::Kind::Flatten;
    if (name == "save") return LayerDef::Kind::Save;
    if (name == "add_saved") return LayerDef::Kind::AddSaved;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

}  // namespace

ModelSpec ModelSpec::net_a(int image_size, int categories) {
    using K = LayerDef::Kind;
    ModelSpec s;
    s.arch = ArchId::NetA;
    s.input_shape = {image_size, image_size, 3};
    s.num_categories = categories;
    for (int ch : {8, 16, 32, 32}) {
        s.layers.push_back({K::Conv, ch, 3, 1, 1});
        s.layers.push_back({K::Relu});
        s.layers.push_back({K::MaxPool, 0, 2});
    }
    s.layers.push_back({K::Flatten});
    s.layers.push_back({K::Dense, 64});
    s.layers.push_back({K::Relu});
    s.layers.push_back({K::Dense, categories});
    s.validate();
    return s;
}

ModelSpec ModelSpec::net_b(int image_size, int categories) {
    using K = LayerDef::Kind;
    ModelSpec s;
    s.arch = ArchId::NetB;
    s.input_shape = {image_size, image_size, 3};
    s.num_categories = categories;
    s.layers.push_back({K::Conv, 16, 3, 2, 1});  // stem
    s.layers.push_back({K::Relu});
    for (int block = 0; block < 3; ++block) {
        s.layers.push_back({K::Save});
        s.layers.push_back({K::Conv, 16, 3, 1, 1});
        s.layers.push_back({K::Relu});
        s.layers.push_back({K::Conv, 16, 3, 1, 1});
        s.layers.push_back({K::AddSaved});
        s.layers.push_back({K::Relu});
        s.layers.push_back({K::MaxPool, 0, 2});
    }
    s.layers.push_back({K::Flatten});
    s.layers.push_back({K::Dense, categories});
    s.validate();
    return s;
}

ModelSpec ModelSpec::detector(FeatureMode mode, int image_size, int categories) {
    using K = LayerDef::Kind;
    ModelSpec s;
    s.arch = ArchId::Detector;
    int side = feature_side(mode, image_size);
    s.input_shape = {side, side, feature_channels(mode)};
    s.num_categories = categories;
    s.layers.push_back({K::Conv, 8, 3, 2, 1});  // stride-2 stem keeps the co-occur grid affordable
    s.layers.push_back({K::Relu});
    s.layers.push_back({K::MaxPool, 0, 2});
    for (int ch : {16, 32, 32}) {
        s.layers.push_back({K::Conv, ch, 3, 1, 1});
        s.layers.push_back({K::Relu});
        s.layers.push_back({K::MaxPool, 0, 2});
    }
    s.layers.push_back({K::Flatten});
    s.layers.push_back({K::Dense, 64});
    s.layers.push_back({K::Relu});
    s.layers.push_back({K::Dense, categories});
    s.validate();
    return s;
}

int ModelSpec::skip_connection_count() const {
    int n = 0;
    for (const LayerDef& l : layers) {
        if (l.kind == LayerDef::Kind::AddSaved) ++n;
    }
    return n;
}

void ModelSpec::validate() const {
    if (input_shape.size() != 3) throw std::invalid_argument("model spec: input shape must be HxWxC");
    for (int d : input_shape) {
        if (d <= 0) throw std::invalid_argument("model spec: non-positive input dimension");
    }
    if (layers.empty()) throw std::invalid_argument("model spec: empty layer list");
    if (num_categories < 2) throw std::invalid_argument("model spec: need at least 2 categories");
    if (arch == ArchId::NetA && skip_connection_count() != 0) {
        throw std::invalid_argument("model spec: net-A must not contain skip connections");
    }
    if (arch == ArchId::NetB && skip_connection_count() < 1) {
        throw std::invalid_argument("model spec: net-B must contain at least one skip connection");
    }
    if ((arch == ArchId::NetA || arch == ArchId::NetB) && num_categories != 10) {
        throw std::invalid_argument("model spec: target networks classify 10 categories");
    }
    int depth = 0;
    for (const LayerDef& l : layers) {
        if (l.kind == LayerDef::Kind::Save) ++depth;
        if (l.kind == LayerDef::Kind::AddSaved && depth-- <= 0) {
            throw std::invalid_argument("model spec: add_saved without matching save");
        }
    }
    const LayerDef& last = layers.back();
    if (last.kind != LayerDef::Kind::Dense || last.out_ch != num_categories) {
        throw std::invalid_argument("model spec: final layer must be a dense over the categories");
    }
}

Json ModelSpec::to_json() const {
    Json j;
    j["arch"] = arch_name(arch);
    j["input_shape"] = input_shape;
    j["categories"] = num_categories;
    Json arr = Json::array();
    for (const LayerDef& l : layers) {
        Json jl;
        jl["kind"] = layer_kind_name(l.kind);
        if (l.kind == LayerDef::Kind::Conv) {
            jl["out"] = l.out_ch;
            jl["k"] = l.k;
            jl["stride"] = l.stride;
            jl["pad"] = l.pad;
        } else if (l.kind == LayerDef::Kind::Dense) {
            jl["out"] = l.out_ch;
        } else if (l.kind == LayerDef::Kind::MaxPool) {
            jl["k"] = l.k;
        }
        arr.push_back(jl);
    }
    j["layers"] = arr;
    return j;
}

ModelSpec ModelSpec::from_json(const Json& j) {
    ModelSpec s;
    s.arch = arch_from_name(j.at("arch").get<std::string>());
    s.input_shape = j.at("input_shape").get<Shape>();
    s.num_categories = j.at("categories").get<int>();
    for (const auto& jl : j.at("layers")) {
        LayerDef l;
        l.kind = layer_kind_from_name(jl.at("kind").get<std::string>());
        if (l.kind == LayerDef::Kind::Conv) {
            l.out_ch = jl.at("out").get<int>();
            l.k = jl.at("k").get<int>();
            l.stride = jl.at("stride").get<int>();
            l.pad = jl.at("pad").get<int>();
        } else if (l.kind == LayerDef::Kind::Dense) {
            l.out_ch = jl.at("out").get<int>();
        } else if (l.kind == LayerDef::Kind::MaxPool) {
            l.k = jl.at("k").get<int>();
        }
        s.layers.push_back(l);
    }
    s.validate();
    return s;
}

// --------------------------------------------------------------------------

namespace {

// Walks the layer list computing activation shapes, reporting each weight
// tensor's shape through the callback; shared by init and graph construction.
template <typename OnConv, typename OnDense>
void walk_layers(const ModelSpec& spec, OnConv on_conv, OnDense on_dense) {
    Shape cur = spec.input_shape;
    std::vector<Shape> saved;
    for (const LayerDef& l : spec.layers) {
        switch (l.kind) {
            case LayerDef::Kind::Conv: {
                if (cur.size() != 3) throw std::invalid_argument("model spec: conv over non-image activation");
                on_conv(l, cur);
                int oh = (cur[0] + 2 * l.pad - l.k) / l.stride + 1;
                int ow = (cur[1] + 2 * l.pad - l.k) / l.stride + 1;
                if (oh < 1 || ow < 1) throw std::invalid_argument("model spec: conv output below 1x1");
                cur = {oh, ow, l.out_ch};
                break;
            }
            case LayerDef::Kind::Dense: {
                if (cur.size() != 1) throw std::invalid_argument("model spec: dense requires flattened input");
                on_dense(l, cur);
                cur = {l.out_ch};
                break;
            }
            case LayerDef::Kind::MaxPool:
                if (cur.size() != 3 || cur[0] / l.k < 1 || cur[1] / l.k < 1) {
                    throw std::invalid_argument("model spec: pooling below 1x1; input image too small");
                }
                cur = {cur[0] / l.k, cur[1] / l.k, cur[2]};
                break;
            case LayerDef::Kind::Flatten:
                cur = {static_cast<int>(shape_numel(cur))};
                break;
            case LayerDef::Kind::Save:
                saved.push_back(cur);
                break;
            case LayerDef::Kind::AddSaved:
                if (saved.empty() || saved.back() != cur) {
                    throw std::invalid_argument("model spec: skip connection shape mismatch");
                }
                saved.pop_back();
                break;
            case LayerDef::Kind::Relu:
                break;
        }
    }
}

}  // namespace

Checkpoint build_model(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    Checkpoint ckpt;
    ckpt.spec = spec;
    ckpt.meta.seed = seed;
    Rng rng(seed);
    auto he_fill = [&rng](Tensor& t, int fan_in) {
        const double std_dev = std::sqrt(2.0 / fan_in);
        for (float& x : t.v) x = static_cast<float>(rng.normal(0.0, std_dev));
    };
    walk_layers(
        spec,
        [&](const LayerDef& l, const Shape& in) {
            Tensor w({l.k, l.k, in[2], l.out_ch});
            he_fill(w, l.k * l.k * in[2]);
            ckpt.weights.push_back(std::move(w));
            ckpt.weights.emplace_back(Shape{l.out_ch});  // zero bias
        },
        [&](const LayerDef& l, const Shape& in) {
            Tensor w({in[0], l.out_ch});
            he_fill(w, in[0]);
            ckpt.weights.push_back(std::move(w));
            ckpt.weights.emplace_back(Shape{l.out_ch});
        });
    return ckpt;
}

NetGraph::NetGraph(const ModelSpec& spec, const std::vector<Tensor>* weights) : g(weights) {
    spec.validate();
    input = g.input("image", spec.input_shape);
    int cur = input;
    int widx = 0;
    std::vector<int> saved;
    int last_dense_input = -1;
    for (const LayerDef& l : spec.layers) {
        switch (l.kind) {
            case LayerDef::Kind::Conv: {
                int w = g.param(widx++);
                int b = g.param(widx++);
                param_nodes.push_back(w);
                param_nodes.push_back(b);
                cur = g.conv2d(cur, w, b, l.stride, l.pad);
                break;
            }
            case LayerDef::Kind::Dense: {
                last_dense_input = cur;
                int w = g.param(widx++);
                int b = g.param(widx++);
                param_nodes.push_back(w);
                param_nodes.push_back(b);
                cur = g.dense(cur, w, b);
                break;
            }
            case LayerDef::Kind::Relu:
                cur = g.relu(cur);
                break;
            case LayerDef::Kind::MaxPool:
                cur = g.maxpool(cur, l.k);
                break;
            case LayerDef::Kind::Flatten:
                cur = g.flatten(cur);
                break;
            case LayerDef::Kind::Save:
                saved.push_back(cur);
                break;
            case LayerDef::Kind::AddSaved:
                cur = g.add(cur, saved.back());
                saved.pop_back();
                break;
        }
    }
    if (widx != static_cast<int>(weights->size())) {
        throw std::invalid_argument("net graph: weight count does not match the model spec");
    }
    logits = cur;
    penultimate = last_dense_input;
    loss = g.softmax_ce(logits, 0);
}

Tensor target_input(const Image& img) {
    Tensor t = image_to_tensor(img);
    for (float& x : t.v) x /= 255.0f;
    return t;
}

std::vector<float> predict(const Checkpoint& ckpt, const Tensor& input) {
    NetGraph net(ckpt.spec, &ckpt.weights);
    net.g.set_input(net.input, input);
    const Tensor& z = net.g.forward(net.logits);
    return softmax(z.v);
}

std::vector<float> penultimate_features(const Checkpoint& ckpt, const Tensor& input) {
    NetGraph net(ckpt.spec, &ckpt.weights);
    net.g.set_input(net.input, input);
    net.g.forward(net.penultimate);
    return net.g.value(net.penultimate).v;
}

int argmax(const std::vector<float>& v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty vector");
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(best)]) best = i;
    }
    return best;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    Json header;
    header["kind"] = "checkpoint";
    header["spec"] = ckpt.spec.to_json();
    Json meta;
    meta["epoch"] = ckpt.meta.epoch;
    meta["val_loss"] = ckpt.meta.val_loss;
    meta["seed"] = ckpt.meta.seed;
    header["meta"] = meta;
    if (ckpt.mode) header["mode"] = feature_mode_name(*ckpt.mode);
    if (ckpt.catalog) header["catalog"] = ckpt.catalog->to_json();
    write_container(path, header, ckpt.weights);
}

Checkpoint load_checkpoint(const std::string& path) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "checkpoint") {
        throw std::runtime_error("load_checkpoint: '" + path + "' is not a checkpoint");
    }
    Checkpoint ckpt;
    ckpt.spec = ModelSpec::from_json(c.header.at("spec"));
    ckpt.weights = std::move(c.payload);
    ckpt.meta.epoch = c.header.at("meta").at("epoch").get<int>();
    ckpt.meta.val_loss = c.header.at("meta").at("val_loss").get<double>();
    ckpt.meta.seed = c.header.at("meta").at("seed").get<uint64_t>();
    if (c.header.contains("mode")) ckpt.mode = feature_mode_from_name(c.header.at("mode").get<std::string>());
    if (c.header.contains("catalog")) ckpt.catalog = LabelCatalog::from_json(c.header.at("catalog"));

    // weight tensor shapes must match the spec exactly
    Checkpoint ref = build_model(ckpt.spec, 0);
    if (ref.weights.size() != ckpt.weights.size()) {
        throw std::runtime_error("load_checkpoint: weight count does not match the spec");
    }
    for (size_t i = 0; i < ref.weights.size(); ++i) {
        if (ref.weights[i].shape != ckpt.weights[i].shape) {
            throw std::runtime_error("load_checkpoint: weight " + std::to_string(i) + " shape mismatch");
        }
    }
    return ckpt;
}

}  // namespace advf
