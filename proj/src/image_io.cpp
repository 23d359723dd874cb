#include "advf/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace advf {

Image::Image(int h, int w) : height(h), width(w) {
    if (h <= 0 || w <= 0) throw std::invalid_argument("Image: non-positive dimensions");
    pix.assign(static_cast<size_t>(h) * w * 3, 0);
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({img.height, img.width, 3});
    for (size_t i = 0; i < img.pix.size(); ++i) t.v[i] = static_cast<float>(img.pix[i]);
    return t;
}

Image tensor_to_image(const Tensor& t) {
    if (t.shape.size() != 3 || t.shape[2] != 3) {
        throw std::invalid_argument("tensor_to_image: expected HxWx3, got " + shape_str(t.shape));
    }
    Image img(t.shape[0], t.shape[1]);
    for (size_t i = 0; i < t.v.size(); ++i) {
        long q = std::lround(static_cast<double>(t.v[i]));
        img.pix[i] = static_cast<uint8_t>(std::clamp(q, 0l, 255l));
    }
    return img;
}

namespace {

std::string lower_ext(const std::string& path) {
    size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

// Reads one PNM token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

}  // namespace

void save_image(const Image& img, const std::string& path) {
    std::string ext = lower_ext(path);
    if (ext == ".jpg" || ext == ".jpeg") {
        throw std::invalid_argument("save_image: lossy format refused for '" + path + "'");
    }
    if (ext != ".ppm") {
        throw std::invalid_argument("save_image: unsupported extension '" + ext + "' (use .ppm)");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_image: cannot open '" + path + "' for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pix.data()), static_cast<std::streamsize>(img.pix.size()));
    if (!out) throw std::runtime_error("save_image: write failed for '" + path + "'");
}

Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_image: cannot open '" + path + "'");
    std::string magic = next_token(in);
    if (magic != "P6") throw std::runtime_error("load_image: '" + path + "' is not a binary PPM (P6)");
    std::string ws = next_token(in), hs = next_token(in), ms = next_token(in);
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        maxval = std::stoi(ms);
    } catch (const std::exception&) {
        throw std::runtime_error("load_image: malformed PPM header in '" + path + "'");
    }
    if (w <= 0 || h <= 0) throw std::runtime_error("load_image: bad dimensions in '" + path + "'");
    if (maxval != 255) throw std::runtime_error("load_image: '" + path + "' is not 8-bit (maxval != 255)");
    Image img(h, w);
    in.read(reinterpret_cast<char*>(img.pix.data()), static_cast<std::streamsize>(img.pix.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pix.size())) {
        throw std::runtime_error("load_image: truncated pixel data in '" + path + "'");
    }
    return img;
}

Image bilinear_resize(const Image& src, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("bilinear_resize: bad output size");
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y1 = std::min(y0 + 1, src.height - 1);
        y0 = std::clamp(y0, 0, src.height - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x1 = std::min(x0 + 1, src.width - 1);
            x0 = std::clamp(x0, 0, src.width - 1);
            for (int c = 0; c < 3; ++c) {
                double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                double val = (1.0 - wy) * top + wy * bot;
                dst.at(y, x, c) = static_cast<uint8_t>(std::clamp(std::lround(val), 0l, 255l));
            }
        }
    }
    return dst;
}

int linf_distance(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width) {
        throw std::invalid_argument("linf_distance: image dimensions differ");
    }
    int best = 0;
    for (size_t i = 0; i < a.pix.size(); ++i) {
        best = std::max(best, std::abs(static_cast<int>(a.pix[i]) - static_cast<int>(b.pix[i])));
    }
    return best;
}

}  // namespace advf
