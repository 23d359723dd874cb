#include "advf/serialize.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace advf {

static_assert(std::endian::native == std::endian::little, "container format assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'D', 'V', 'F'};

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in.gcount() != sizeof(T)) throw std::runtime_error("container: truncated file '" + path + "'");
    return value;
}

}  // namespace

void write_container(const std::string& path, const Json& header, const std::vector<Tensor>& payload) {
    Json full = header;
    Json shapes = Json::array();
    for (const Tensor& t : payload) shapes.push_back(t.shape);
    full["payload_shapes"] = shapes;
    const std::string hs = full.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("container: cannot open '" + path + "' for writing");
    out.write(kMagic, 4);
    write_pod<uint32_t>(out, kContainerVersion);
    write_pod<uint64_t>(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const Tensor& t : payload) {
        out.write(reinterpret_cast<const char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("container: write failed for '" + path + "'");
}

Container read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("container: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("container: '" + path + "' has no ADVF magic");
    }
    uint32_t version = read_pod<uint32_t>(in, path);
    if (version != kContainerVersion) {
        throw std::runtime_error("container: unsupported format version " + std::to_string(version));
    }
    uint64_t hlen = read_pod<uint64_t>(in, path);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (in.gcount() != static_cast<std::streamsize>(hlen)) {
        throw std::runtime_error("container: truncated header in '" + path + "'");
    }
    Container c;
    try {
        c.header = Json::parse(hs);
    } catch (const std::exception& e) {
        throw std::runtime_error("container: bad JSON header in '" + path + "': " + e.what());
    }
    if (!c.header.contains("payload_shapes")) {
        throw std::runtime_error("container: header missing payload_shapes in '" + path + "'");
    }
    for (const auto& js : c.header["payload_shapes"]) {
        Shape s = js.get<Shape>();
        Tensor t(s);
        in.read(reinterpret_cast<char*>(t.v.data()), static_cast<std::streamsize>(t.v.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(t.v.size() * sizeof(float))) {
            throw std::runtime_error("container: truncated payload in '" + path + "'");
        }
        c.payload.push_back(std::move(t));
    }
    return c;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace advf
