#pragma once

#include <filesystem>

#include "lbaug/image.hpp"

namespace lbaug {

// Layout: <dir>/manifest.csv with header `id,<label_name>*` and one 0/1 row per
// instance, plus <dir>/images/<id>.png as 8-bit RGB.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir, Split split = Split::train);

void write_png(const Image& img, const std::filesystem::path& file);
Image read_png(const std::filesystem::path& file);

}  // namespace lbaug
