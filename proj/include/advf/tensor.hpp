#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace advf {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major float32 tensor. The substrate for images, activations,
// gradients and weights.
struct Tensor {
    Shape shape;
    std::vector<float> v;

    Tensor() = default;
    explicit Tensor(Shape s);
    Tensor(Shape s, std::vector<float> values);

    static Tensor zeros(const Shape& s) { return Tensor(s); }
    static Tensor full(const Shape& s, float value);
    static Tensor scalar(float value) { return Tensor({1}, {value}); }

    int64_t numel() const { return static_cast<int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float& operator[](int64_t i) { return v[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return v[static_cast<size_t>(i)]; }

    // index helpers for the two layouts used throughout: HWC activations and
    // [kh, kw, in_c, out_c] convolution kernels
    int64_t at3(int y, int x, int c) const {
        return (static_cast<int64_t>(y) * shape[1] + x) * shape[2] + c;
    }
    int64_t at4(int a, int b, int c, int d) const {
        return ((static_cast<int64_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d;
    }

    void fill(float value);
    void zero() { fill(0.0f); }
};

bool same_shape(const Tensor& a, const Tensor& b);

// Throws std::runtime_error naming `what` if any value is NaN or Inf.
void check_finite(const Tensor& t, const char* what);
bool all_finite(const Tensor& t);

// Numerically stable softmax (double accumulation, float32 output).
std::vector<float> softmax(const std::vector<float>& logits);

}  // namespace advf
