/* Copyright 2026 The cseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "cseg/taskbench/dataset_io.h"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <vector>

#include "cseg/common.h"

namespace fs = std::filesystem;

namespace cseg {
namespace {

void write_raw(const fs::path& path, int height, int width, png_uint_32 format,
               const std::uint8_t* pixels) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, pixels, 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + img.message);
  }
}

std::vector<std::uint8_t> read_raw(const fs::path& path, png_uint_32 format, bool require_gray,
                                   int& height, int& width) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("cannot read " + path.string() + ": " + img.message);
  }
  if (require_gray && ((img.format & PNG_FORMAT_FLAG_COLOR) != 0 ||
                       (img.format & PNG_FORMAT_FLAG_LINEAR) != 0)) {
    png_image_free(&img);
    throw IoError(path.string() + " is not a single-channel 8-bit label raster");
  }
  img.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    throw IoError("cannot decode " + path.string() + ": " + img.message);
  }
  height = static_cast<int>(img.height);
  width = static_cast<int>(img.width);
  return buffer;
}

std::string pairing_stem(const fs::path& path) {
  std::string stem = path.stem().string();
  for (const std::string suffix : {"_leftImg8bit", "_gtFine_labelTrainIds", "_labelTrainIds"}) {
    if (stem.size() > suffix.size() && stem.ends_with(suffix)) {
      stem.resize(stem.size() - suffix.size());
      break;
    }
  }
  return stem;
}

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = pairing_stem(entry.path());
    if (!files.emplace(stem, entry.path()).second) {
      throw IoError("two files in " + dir.string() + " pair as '" + stem + "'");
    }
  }
  return files;
}

}  // namespace

void write_png(const fs::path& path, const Image& image) {
  if (image.channels() != 3) throw InvalidArgument("write_png expects an RGB image");
  write_raw(path, image.height(), image.width(), PNG_FORMAT_RGB, image.values().data());
}

void write_png(const fs::path& path, const LabelMap& label) {
  std::vector<std::uint8_t> bytes(label.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const int v = label.values()[i];
    if (v < 0 || v > 255) throw InvalidArgument("label value does not fit in 8 bits");
    bytes[i] = static_cast<std::uint8_t>(v);
  }
  write_raw(path, label.height(), label.width(), PNG_FORMAT_GRAY, bytes.data());
}

Image read_image_png(const fs::path& path) {
  int h = 0, w = 0;
  auto bytes = read_raw(path, PNG_FORMAT_RGB, false, h, w);
  Image image(h, w, 3);
  image.values() = std::move(bytes);
  return image;
}

LabelMap read_label_png(const fs::path& path) {
  int h = 0, w = 0;
  auto bytes = read_raw(path, PNG_FORMAT_GRAY, true, h, w);
  LabelMap label(h, w, 1);
  std::copy(bytes.begin(), bytes.end(), label.values().begin());
  return label;
}

void write_dataset_split(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  for (const auto& s : dataset.samples) {
    write_png(dir / "images" / (s.source_id + ".png"), s.image);
    write_png(dir / "labels" / (s.source_id + ".png"), s.label);
  }
}

Dataset read_dataset_split(const fs::path& dir, int num_classes, const std::string& name,
                           int ignore_id) {
  const auto images = list_pngs(dir / "images");
  const auto labels = list_pngs(dir / "labels");
  Dataset dataset;
  dataset.name = name;
  dataset.num_classes = num_classes;
  dataset.ignore_id = ignore_id;
  for (const auto& [stem, image_path] : images) {
    auto it = labels.find(stem);
    if (it == labels.end()) throw IoError("no label for image " + image_path.string());
    LabeledSample s;
    s.image = read_image_png(image_path);
    s.label = read_label_png(it->second);
    s.ignore_id = ignore_id;
    s.source_id = stem;
    validate_sample(s, num_classes);
    dataset.samples.push_back(std::move(s));
  }
  if (labels.size() != images.size()) {
    throw IoError(dir.string() + ": " + std::to_string(labels.size()) + " labels for " +
                  std::to_string(images.size()) + " images");
  }
  return dataset;
}

}  // namespace cseg
