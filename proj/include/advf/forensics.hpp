#pragma once

#include <string>

#include "advf/image_io.hpp"
#include "advf/tensor.hpp"

namespace advf {

enum class FeatureMode { Direct, Laplace, CoOccur };

const char* feature_mode_name(FeatureMode m);
FeatureMode feature_mode_from_name(const std::string& name);

// Preprocessed detector input. Shapes: direct/laplace HxWx3, co-occur 256x256x6.
struct FeatureTensor {
    FeatureMode mode;
    Tensor t;
};

inline constexpr int kCoOccurBins = 256;
inline constexpr int kCoOccurChannels = 6;  // (R-h, G-h, B-h, R-v, G-v, B-v)

// 3x3 high-pass residual [[1,1,1],[1,-8,1],[1,1,1]] correlated with each RGB
// channel, zero-padded to preserve HxW. Real-valued, unnormalized.
FeatureTensor laplacian_residual(const Image& img);

// Raw adjacent-pair histograms: per channel, horizontal C[i,j] counts pairs
// (X[m,n]=i, X[m,n+1]=j); vertical is the same applied to the transpose.
// Value at (i, j, ch) with ch in catalog order (R-h, G-h, B-h, R-v, G-v, B-v).
FeatureTensor co_occurrence(const Image& img);

// direct: pixel/255 -> [0,1]; laplace: value/(8*255) -> [-1,1];
// co-occur: v -> ln(1+v)/ln(1+P) with P the channel's pair count -> [0,1].
FeatureTensor normalize_features(const FeatureTensor& raw);

// Dispatches to identity / laplacian / co-occurrence, then normalizes.
FeatureTensor preprocess(const Image& img, FeatureMode mode);

// Channel count of the detector input for a mode.
int feature_channels(FeatureMode mode);
// Spatial size of the detector input (co-occur is always 256 regardless of
// the image size; direct/laplace follow the image).
int feature_side(FeatureMode mode, int image_size);

// Optional dump in the shared ADVF container framing, with a mode tag.
void save_feature_tensor(const FeatureTensor& f, const std::string& path);
FeatureTensor load_feature_tensor(const std::string& path);

// Sum of counts at |i-j| > band over all six channels of a raw co-occurrence
// tensor; the Fig. 3-style diagonal-spread statistic.
double off_diagonal_mass(const FeatureTensor& raw_cooc, int band = 2);

}  // namespace advf
