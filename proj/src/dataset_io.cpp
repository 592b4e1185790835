#include "lbaug/dataset_io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace lbaug {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_png(const Image& img, const fs::path& file) {
    FilePtr fp(std::fopen(file.c_str(), "wb"));
    if (!fp) throw DataError("cannot open '" + file.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng initialisation failed");
    }
    std::vector<png_byte> row(static_cast<std::size_t>(img.width) * 3);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode '" + file.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(x) * 3 + c] = quantize(img.at(y, x, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const fs::path& file) {
    FilePtr fp(std::fopen(file.c_str(), "rb"));
    if (!fp) throw DataError("cannot open '" + file.string() + "'");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw DataError("'" + file.string() + "' is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng initialisation failed");
    }
    Image img;
    std::vector<png_byte> row;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode '" + file.string() + "'");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("'" + file.string() + "' could not be converted to RGB");
    }
    img = Image(h, w);
    row.resize(png_get_rowbytes(png, info));
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
    ds.validate();
    fs::create_directories(dir / "images");
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw DataError("cannot write manifest in '" + dir.string() + "'");
    manifest << "id";
    for (const auto& name : ds.label_names) manifest << ',' << name;
    manifest << '\n';
    for (const auto& inst : ds.instances) {
        if (inst.id.find_first_of(",/\\\n") != std::string::npos)
            throw DataError("instance id '" + inst.id + "' contains a reserved character");
        manifest << inst.id;
        for (auto b : inst.labels) manifest << ',' << (b ? '1' : '0');
        manifest << '\n';
        write_png(inst.image, dir / "images" / (inst.id + ".png"));
    }
    if (!manifest) throw DataError("failed writing manifest in '" + dir.string() + "'");
}

Dataset load_dataset(const fs::path& dir, Split split) {
    std::ifstream manifest(dir / "manifest.csv");
    if (!manifest) throw DataError("missing manifest: '" + (dir / "manifest.csv").string() + "'");
    std::string line;
    if (!std::getline(manifest, line)) throw DataError("empty manifest in '" + dir.string() + "'");
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "id") throw DataError("manifest header must start with 'id'");
    Dataset ds;
    ds.split = split;
    ds.label_names.assign(header.begin() + 1, header.end());
    const std::size_t L = ds.label_names.size();
    while (std::getline(manifest, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        const std::string id = cells.empty() ? std::string() : cells[0];
        if (cells.size() != L + 1)
            throw DataError("instance '" + id + "': expected " + std::to_string(L) + " label columns, found " +
                            std::to_string(cells.size() - 1));
        Instance inst;
        inst.id = id;
        inst.labels.resize(L);
        for (std::size_t l = 0; l < L; ++l) {
            if (cells[l + 1] != "0" && cells[l + 1] != "1")
                throw DataError("instance '" + id + "': label value '" + cells[l + 1] + "' is not 0/1");
            inst.labels[l] = cells[l + 1] == "1";
        }
        const fs::path img_path = dir / "images" / (id + ".png");
        if (!fs::exists(img_path)) throw DataError("instance '" + id + "': missing image file '" + img_path.string() + "'");
        try {
            inst.image = read_png(img_path);
        } catch (const DataError& e) {
            throw DataError("instance '" + id + "': " + e.what());
        }
        ds.instances.push_back(std::move(inst));
    }
    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    return ds;
}

}  // namespace lbaug
