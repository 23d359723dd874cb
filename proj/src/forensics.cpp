#include "advf/forensics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "advf/serialize.hpp"

namespace advf {

const char* feature_mode_name(FeatureMode m) {
    switch (m) {
        case FeatureMode::Direct: return "direct";
        case FeatureMode::Laplace: return "laplace";
        case FeatureMode::CoOccur: return "co-occur";
    }
    return "?";
}

FeatureMode feature_mode_from_name(const std::string& name) {
    if (name == "direct") return FeatureMode::Direct;
    if (name == "laplace") return FeatureMode::Laplace;
    if (name == "co-occur" || name == "cooccur" || name == "co_occur") return FeatureMode::CoOccur;
    throw std::invalid_argument("unknown preprocessing mode '" + name + "' (direct|laplace|co-occur)");
}

FeatureTensor laplacian_residual(const Image& img) {
    if (img.height < 3 || img.width < 3) {
        throw std::invalid_argument("laplacian_residual: image must be at least 3x3");
    }
    const int H = img.height, W = img.width;
    static constexpr float kKernel[3][3] = {{1, 1, 1}, {1, -8, 1}, {1, 1, 1}};
    FeatureTensor f{FeatureMode::Laplace, Tensor({H, W, 3})};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                float acc = 0.0f;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = y + ky - 1;
                    if (iy < 0 || iy >= H) continue;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = x + kx - 1;
                        if (ix < 0 || ix >= W) continue;
                        acc += kKernel[ky][kx] * static_cast<float>(img.at(iy, ix, c));
                    }
                }
                f.t.v[static_cast<size_t>(f.t.at3(y, x, c))] = acc;
            }
        }
    }
    return f;
}

FeatureTensor co_occurrence(const Image& img) {
    const int H = img.height, W = img.width;
    if (H < 1 || W < 2) throw std::invalid_argument("co_occurrence: image must be at least 1x2");
    FeatureTensor f{FeatureMode::CoOccur, Tensor({kCoOccurBins, kCoOccurBins, kCoOccurChannels})};
    Tensor& t = f.t;
    // horizontal pairs: channels 0..2
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x + 1 < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int i = img.at(y, x, c);
                const int j = img.at(y, x + 1, c);
                t.v[static_cast<size_t>(t.at3(i, j, c))] += 1.0f;
            }
        }
    }
    // vertical pairs (horizontal pairs of the transpose): channels 3..5
    for (int y = 0; y + 1 < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int i = img.at(y, x, c);
                const int j = img.at(y + 1, x, c);
                t.v[static_cast<size_t>(t.at3(i, j, 3 + c))] += 1.0f;
            }
        }
    }
    return f;
}

FeatureTensor normalize_features(const FeatureTensor& raw) {
    FeatureTensor out{raw.mode, Tensor(raw.t.shape)};
    switch (raw.mode) {
        case FeatureMode::Direct: {
            for (size_t i = 0; i < raw.t.v.size(); ++i) out.t.v[i] = raw.t.v[i] / 255.0f;
            break;
        }
        case FeatureMode::Laplace: {
            for (size_t i = 0; i < raw.t.v.size(); ++i) out.t.v[i] = raw.t.v[i] / (8.0f * 255.0f);
            break;
        }
        case FeatureMode::CoOccur: {
            const int bins = raw.t.shape[0];
            const int ch = raw.t.shape[2];
            // per-channel pair count = channel mass; counts are small integers,
            // so a log table over [0, P] replaces per-cell std::log calls
            for (int c = 0; c < ch; ++c) {
                double mass = 0.0;
                for (int i = 0; i < bins; ++i) {
                    for (int j = 0; j < bins; ++j) {
                        mass += raw.t.v[static_cast<size_t>(raw.t.at3(i, j, c))];
                    }
                }
                const int64_t pair_count = static_cast<int64_t>(std::llround(mass));
                const double denom = std::log1p(static_cast<double>(pair_count));
                std::vector<float> lut(static_cast<size_t>(pair_count) + 1);
                for (int64_t v = 0; v <= pair_count; ++v) {
                    lut[static_cast<size_t>(v)] =
                        denom > 0.0 ? static_cast<float>(std::log1p(static_cast<double>(v)) / denom) : 0.0f;
                }
                for (int i = 0; i < bins; ++i) {
                    for (int j = 0; j < bins; ++j) {
                        const size_t idx = static_cast<size_t>(raw.t.at3(i, j, c));
                        out.t.v[idx] = lut[static_cast<size_t>(std::llround(raw.t.v[idx]))];
                    }
                }
            }
            break;
        }
    }
    return out;
}

FeatureTensor preprocess(const Image& img, FeatureMode mode) {
    switch (mode) {
        case FeatureMode::Direct:
            return normalize_features(FeatureTensor{FeatureMode::Direct, image_to_tensor(img)});
        case FeatureMode::Laplace:
            return normalize_features(laplacian_residual(img));
        case FeatureMode::CoOccur:
            return normalize_features(co_occurrence(img));
    }
    throw std::invalid_argument("preprocess: unknown mode");
}

int feature_channels(FeatureMode mode) { return mode == FeatureMode::CoOccur ? kCoOccurChannels : 3; }

int feature_side(FeatureMode mode, int image_size) {
    return mode == FeatureMode::CoOccur ? kCoOccurBins : image_size;
}

void save_feature_tensor(const FeatureTensor& f, const std::string& path) {
    Json header;
    header["kind"] = "feature_tensor";
    header["mode"] = feature_mode_name(f.mode);
    write_container(path, header, {f.t});
}

FeatureTensor load_feature_tensor(const std::string& path) {
    Container c = read_container(path);
    if (c.header.value("kind", "") != "feature_tensor") {
        throw std::runtime_error("load_feature_tensor: '" + path + "' is not a feature tensor dump");
    }
    if (c.payload.size() != 1) throw std::runtime_error("load_feature_tensor: unexpected payload count");
    return FeatureTensor{feature_mode_from_name(c.header.at("mode").get<std::string>()), std::move(c.payload[0])};
}

double off_diagonal_mass(const FeatureTensor& raw_cooc, int band) {
    if (raw_cooc.mode != FeatureMode::CoOccur) {
        throw std::invalid_argument("off_diagonal_mass: expects a co-occurrence tensor");
    }
    const Tensor& t = raw_cooc.t;
    const int bins = t.shape[0], ch = t.shape[2];
    double mass = 0.0;
    for (int i = 0; i < bins; ++i) {
        for (int j = 0; j < bins; ++j) {
            if (std::abs(i - j) <= band) continue;
            for (int c = 0; c < ch; ++c) mass += t.v[static_cast<size_t>(t.at3(i, j, c))];
        }
    }
    return mass;
}

}  // namespace advf
