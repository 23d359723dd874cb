#include "advf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace advf {

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in shape " + shape_str(shape));
    }
    v.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
}

Tensor::Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), v(std::move(values)) {
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in shape " + shape_str(shape));
    }
    if (static_cast<int64_t>(v.size()) != shape_numel(shape)) {
        throw std::invalid_argument("Tensor: value count " + std::to_string(v.size()) +
                                    " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::full(const Shape& s, float value) {
    Tensor t(s);
    t.fill(value);
    return t;
}

void Tensor::fill(float value) { std::fill(v.begin(), v.end(), value); }

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

bool all_finite(const Tensor& t) {
    for (float x : t.v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void check_finite(const Tensor& t, const char* what) {
    if (!all_finite(t)) {
        throw std::runtime_error(std::string("non-finite value in ") + what);
    }
}

std::vector<float> softmax(const std::vector<float>& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    float m = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    std::vector<double> e(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        e[i] = std::exp(static_cast<double>(logits[i]) - static_cast<double>(m));
        denom += e[i];
    }
    std::vector<float> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(e[i] / denom);
    return out;
}

}  // namespace advf
