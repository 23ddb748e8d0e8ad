// Copyright (C) 2026 The depthdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "depthdiff/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

namespace depthdiff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    require(f != nullptr, ErrorCode::kIo, "cannot open " + path.string());
    return f;
}

[[noreturn]] void png_error_cb(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    png_longjmp(png, 1);
}

void png_warning_cb(png_structp, png_const_charp) {}

// bit_depth 8 or 16; channels 1 or 3. Samples are big-endian for 16 bit.
void write_png_raw(const fs::path& path, const std::vector<std::uint8_t>& bytes, int height,
                   int width, int bit_depth, int channels) {
    FilePtr f = open_file(path, "wb");
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb,
                                              png_warning_cb);
    require(png != nullptr, ErrorCode::kIo, "png: cannot create writer");
    png_infop info = png_create_info_struct(png);
    const std::size_t row_bytes =
        static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        rows[static_cast<std::size_t>(y)] =
            const_cast<png_bytep>(bytes.data() + row_bytes * static_cast<std::size_t>(y));
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::kIo, "png write failed for " + path.string() + ": " + err);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png_raw(const fs::path& path, int& height, int& width,
                                       int& bit_depth, int& channels) {
    require(fs::exists(path), ErrorCode::kIo, "missing file: " + path.string());
    FilePtr f = open_file(path, "rb");
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_cb,
                                             png_warning_cb);
    require(png != nullptr, ErrorCode::kIo, "png: cannot create reader");
    png_infop info = png_create_info_struct(png);
    std::vector<std::uint8_t> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::kFormat, "png read failed for " + path.string() + ": " + err);
    }
    png_init_io(png, f.get());
    png_read_png(png, info, PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND, nullptr);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    bit_depth = png_get_bit_depth(png, info);
    channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    png_bytepp rows = png_get_rows(png, info);
    out.resize(row_bytes * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        std::copy(rows[y], rows[y] + row_bytes, out.begin() + static_cast<std::ptrdiff_t>(row_bytes * y));
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::kIo, "missing file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::kFormat, "invalid JSON in " + path.string() + ": " + e.what());
    }
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

void write_png16(const fs::path& path, const std::vector<std::uint16_t>& pixels, int height,
                 int width) {
    require(pixels.size() == static_cast<std::size_t>(height) * width,
            ErrorCode::kShapeMismatch, "write_png16: pixel count mismatch");
    std::vector<std::uint8_t> bytes(pixels.size() * 2);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        bytes[2 * i] = static_cast<std::uint8_t>(pixels[i] >> 8);
        bytes[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] & 0xFF);
    }
    write_png_raw(path, bytes, height, width, 16, 1);
}

std::vector<std::uint16_t> read_png16(const fs::path& path, int& height, int& width) {
    int bit_depth = 0, channels = 0;
    const auto bytes = read_png_raw(path, height, width, bit_depth, channels);
    require(bit_depth == 16 && channels == 1, ErrorCode::kFormat,
            path.string() + " is not a 16-bit grayscale image");
    std::vector<std::uint16_t> px(static_cast<std::size_t>(height) * width);
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    }
    return px;
}

void write_png_rgb(const fs::path& path, const Tensor& image) {
    const Shape s = image.shape();
    require(s.n == 1 && s.c == 3, ErrorCode::kShapeMismatch, "write_png_rgb: need (1,3,H,W)");
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(s.h) * s.w * 3);
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(0, c, y, x), 0.0, 1.0);
                bytes[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    write_png_raw(path, bytes, s.h, s.w, 8, 3);
}

Tensor read_png_rgb(const fs::path& path) {
    int h = 0, w = 0, bit_depth = 0, channels = 0;
    const auto bytes = read_png_raw(path, h, w, bit_depth, channels);
    require(bit_depth == 8 && (channels == 3 || channels == 4), ErrorCode::kFormat,
            path.string() + " is not an 8-bit RGB image");
    Tensor img(Shape{1, 3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(0, c, y, x) =
                    bytes[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
            }
        }
    }
    return img;
}

fs::path sidecar_path(const fs::path& depth_path) {
    fs::path p = depth_path;
    p.replace_extension(".json");
    return p;
}

void save_depth(const DepthMap& depth, const fs::path& path, const DepthMeta& meta) {
    require_same_shape(depth.depth.shape(), depth.mask.shape(), "save_depth");
    require(meta.scale_mm_per_unit > 0.0, ErrorCode::kInvalidArgument,
            "save_depth: scale must be positive");
    const int h = depth.height(), w = depth.width();
    std::vector<std::uint16_t> px(static_cast<std::size_t>(h) * w, 0);
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (depth.mask[i] <= 0.5) continue;
        const double units = std::round(depth.depth[i] / meta.scale_mm_per_unit);
        px[i] = static_cast<std::uint16_t>(std::clamp(units, 1.0, 65535.0));
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_png16(path, px, h, w);

    json side;
    side["scale_mm_per_unit"] = meta.scale_mm_per_unit;
    side["d_min_mm"] = meta.range.d_min;
    side["d_max_mm"] = meta.range.d_max;
    try {
        side["provenance"] = json::parse(meta.extra_json);
    } catch (const json::exception&) {
        fail(ErrorCode::kInvalidArgument, "save_depth: provenance is not valid JSON");
    }
    std::ofstream out(sidecar_path(path));
    require(out.good(), ErrorCode::kIo, "cannot write " + sidecar_path(path).string());
    out << side.dump(2) << "\n";
}

DepthMap load_depth(const fs::path& path, DepthMeta* meta) {
    require(fs::exists(path), ErrorCode::kIo, "missing file: " + path.string());
    const fs::path side_path = sidecar_path(path);
    require(fs::exists(side_path), ErrorCode::kFormat,
            "missing scale metadata " + side_path.string());
    const json side = read_json(side_path);
    require(side.contains("scale_mm_per_unit") && side["scale_mm_per_unit"].is_number(),
            ErrorCode::kFormat, "scale_mm_per_unit absent in " + side_path.string());
    DepthMeta m;
    m.scale_mm_per_unit = side["scale_mm_per_unit"].get<double>();
    require(m.scale_mm_per_unit > 0.0, ErrorCode::kFormat,
            "non-positive depth scale in " + side_path.string());
    m.range.d_min = side.value("d_min_mm", m.range.d_min);
    m.range.d_max = side.value("d_max_mm", m.range.d_max);
    if (side.contains("provenance")) m.extra_json = side["provenance"].dump();

    int h = 0, w = 0;
    const auto px = read_png16(path, h, w);
    DepthMap d{Tensor(Shape{1, 1, h, w}, 0.0), Tensor(Shape{1, 1, h, w}, 0.0)};
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (px[i] == 0) continue;
        d.depth[i] = px[i] * m.scale_mm_per_unit;
        d.mask[i] = 1.0;
    }
    if (meta) *meta = m;
    return d;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::kIo, "missing manifest: " + path.string());
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        require(cols.size() == 3, ErrorCode::kFormat,
                path.string() + ":" + std::to_string(line_no) +
                    ": expected id<TAB>image<TAB>depth");
        auto resolve = [&](const std::string& p) {
            fs::path q(p);
            return q.is_absolute() ? q : base / q;
        };
        entries.push_back({cols[0], resolve(cols[1]), resolve(cols[2])});
    }
    return entries;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    const fs::path base = fs::absolute(path).parent_path();
    fs::create_directories(base);
    std::ofstream out(path);
    require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
    auto rel = [&](const fs::path& p) {
        const fs::path r = fs::absolute(p).lexically_relative(base);
        return r.empty() ? p.string() : r.generic_string();
    };
    for (const auto& e : entries) {
        out << e.id << '\t' << rel(e.image) << '\t' << rel(e.depth) << '\n';
    }
}

Sample load_sample(const ManifestEntry& entry) {
    Sample s;
    s.id = entry.id;
    s.image = read_png_rgb(entry.image);
    s.depth = load_depth(entry.depth);
    require(s.image.shape().h == s.depth.height() && s.image.shape().w == s.depth.width(),
            ErrorCode::kShapeMismatch,
            "sample " + entry.id + ": image is " + std::to_string(s.image.shape().h) + "x" +
                std::to_string(s.image.shape().w) + " but depth is " +
                std::to_string(s.depth.height()) + "x" + std::to_string(s.depth.width()));
    s.sparse = SparseDepth{Tensor(s.depth.depth.shape(), 0.0), Tensor(s.depth.depth.shape(), 0.0), 0};
    return s;
}

std::vector<Sample> load_split(const fs::path& manifest) {
    const auto entries = read_manifest(manifest);
    std::set<std::string> ids;
    for (const auto& e : entries) {
        require(ids.insert(e.id).second, ErrorCode::kFormat,
                manifest.string() + ": duplicate id " + e.id);
        require(fs::exists(e.image), ErrorCode::kIo, "missing file: " + e.image.string());
        require(fs::exists(e.depth), ErrorCode::kIo, "missing file: " + e.depth.string());
    }
    std::vector<Sample> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(load_sample(e));
    return out;
}

}  // namespace depthdiff
