#include "ram/formats.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

namespace ram {
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string(), path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string(), path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string(), path.string());
}

class Reader {
public:
    Reader(std::vector<std::uint8_t> bytes, const fs::path& path) : bytes_(std::move(bytes)), path_(path.string()) {}

    void magic(std::string_view expected) {
        need(expected.size());
        if (std::memcmp(bytes_.data() + pos_, expected.data(), expected.size()) != 0) {
            throw Error(ErrorCode::BadMagic, path_ + ": expected magic " + std::string(expected), path_);
        }
        pos_ += expected.size();
    }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return f;
    }
    const std::uint8_t* raw(std::size_t n) {
        need(n);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    /// Validates the remaining payload length before a bulk read.
    void expect_payload(std::uint64_t n) const {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorCode::TruncatedFile,
                        path_ + ": payload has " + std::to_string(bytes_.size() - pos_) + " bytes, header implies " +
                            std::to_string(n),
                        path_);
        }
        if (bytes_.size() - pos_ > n) {
            throw Error(ErrorCode::DimensionMismatch, path_ + ": trailing bytes after the payload", path_);
        }
    }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, path_ + ": unexpected end of file", path_);
    }

    std::vector<std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string path_;
};

class Writer {
public:
    void magic(std::string_view m) { bytes.insert(bytes.end(), m.begin(), m.end()); }
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float f) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof f);
        u32(bits);
    }

    std::vector<std::uint8_t> bytes;
};

std::uint32_t checked_u32(long long v, const char* what) {
    if (v < 0 || v > 0xFFFFFFFFll) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " out of range");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

DepthImage load_depth(const fs::path& path) {
    Reader r(read_all(path), path);
    r.magic("DPT1");
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    if (h == 0 || w == 0) throw Error(ErrorCode::DimensionMismatch, path.string() + ": empty depth image", path.string());
    r.expect_payload(std::uint64_t(h) * w * 4);
    DepthImage depth(static_cast<int>(h), static_cast<int>(w));
    for (std::uint32_t v = 0; v < h; ++v)
        for (std::uint32_t u = 0; u < w; ++u) depth.values(v, u) = r.f32();
    return depth;
}

void save_depth(const DepthImage& depth, const fs::path& path) {
    Writer w;
    w.magic("DPT1");
    w.u32(checked_u32(depth.height(), "height"));
    w.u32(checked_u32(depth.width(), "width"));
    for (int v = 0; v < depth.height(); ++v)
        for (int u = 0; u < depth.width(); ++u) w.f32(depth(u, v));
    write_all(path, w.bytes);
}

DenseFeatureMap load_feature_map(const fs::path& path) {
    Reader r(read_all(path), path);
    r.magic("DFM1");
    const std::uint32_t gh = r.u32();
    const std::uint32_t gw = r.u32();
    const std::uint32_t c = r.u32();
    const std::uint32_t ih = r.u32();
    const std::uint32_t iw = r.u32();
    const std::uint8_t flags = r.u8();
    if (gh == 0 || gw == 0 || c == 0 || ih == 0 || iw == 0) {
        throw Error(ErrorCode::DimensionMismatch, path.string() + ": zero dimension in header", path.string());
    }
    r.expect_payload(std::uint64_t(gh) * gw * c * 4);
    DenseFeatureMap map(static_cast<int>(gh), static_cast<int>(gw), static_cast<int>(c), static_cast<int>(ih),
                        static_cast<int>(iw));
    map.normalized = (flags & 1u) != 0;
    float* dst = map.data.data();
    for (std::uint64_t i = 0, n = std::uint64_t(gh) * gw * c; i < n; ++i) dst[i] = r.f32();
    return map;
}

void save_feature_map(const DenseFeatureMap& map, const fs::path& path) {
    Writer w;
    w.magic("DFM1");
    w.u32(checked_u32(map.gridHeight, "gridHeight"));
    w.u32(checked_u32(map.gridWidth, "gridWidth"));
    w.u32(checked_u32(map.channels(), "channels"));
    w.u32(checked_u32(map.imageHeight, "imageHeight"));
    w.u32(checked_u32(map.imageWidth, "imageWidth"));
    w.u8(map.normalized ? 1 : 0);
    const float* src = map.data.data();
    for (Eigen::Index i = 0; i < map.data.size(); ++i) w.f32(src[i]);
    write_all(path, w.bytes);
}

Embedding load_embedding(const fs::path& path) {
    Reader r(read_all(path), path);
    r.magic("EMB1");
    const std::uint8_t kind = r.u8();
    if (kind > 1) throw Error(ErrorCode::DimensionMismatch, path.string() + ": unknown embedding kind", path.string());
    const std::uint32_t dim = r.u32();
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, path.string() + ": zero-dimensional embedding", path.string());
    r.expect_payload(std::uint64_t(dim) * 4);
    Embedding e;
    e.kind = static_cast<EmbeddingKind>(kind);
    e.values.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) e.values[i] = r.f32();
    return e;
}

void save_embedding(const Embedding& embedding, const fs::path& path) {
    Writer w;
    w.magic("EMB1");
    w.u8(static_cast<std::uint8_t>(embedding.kind));
    w.u32(checked_u32(embedding.values.size(), "dim"));
    for (Eigen::Index i = 0; i < embedding.values.size(); ++i) w.f32(embedding.values[i]);
    write_all(path, w.bytes);
}

PixelMask load_mask(const fs::path& path) {
    Reader r(read_all(path), path);
    r.magic("MSK1");
    const std::uint32_t h = r.u32();
    const std::uint32_t w = r.u32();
    if (h == 0 || w == 0) throw Error(ErrorCode::DimensionMismatch, path.string() + ": empty mask", path.string());
    const std::uint64_t n = std::uint64_t(h) * w;
    r.expect_payload((n + 7) / 8);
    const std::uint8_t* bits = r.raw((n + 7) / 8);
    PixelMask mask(static_cast<int>(h), static_cast<int>(w));
    for (std::uint64_t i = 0; i < n; ++i) {
        mask.bits(static_cast<Eigen::Index>(i / w), static_cast<Eigen::Index>(i % w)) = (bits[i / 8] >> (7 - i % 8)) & 1u;
    }
    return mask;
}

void save_mask(const PixelMask& mask, const fs::path& path) {
    Writer w;
    w.magic("MSK1");
    w.u32(checked_u32(mask.height(), "height"));
    w.u32(checked_u32(mask.width(), "width"));
    const std::uint64_t n = std::uint64_t(mask.height()) * static_cast<std::uint64_t>(mask.width());
    std::vector<std::uint8_t> packed((n + 7) / 8, 0);
    for (std::uint64_t i = 0; i < n; ++i) {
        if (mask.bits(static_cast<Eigen::Index>(i / mask.width()), static_cast<Eigen::Index>(i % mask.width()))) {
            packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
        }
    }
    w.bytes.insert(w.bytes.end(), packed.begin(), packed.end());
    write_all(path, w.bytes);
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string(), tmp.string());
        out << contents;
        if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string(), tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message(), path.string());
}

}  // namespace ram
