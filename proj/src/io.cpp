/*
 * Copyright 2026 The densattn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "densattn/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace densattn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw InputError(fmt::format("truncated file while reading {}", what));
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw InputError(fmt::format("bad magic, expected \"{}\"", magic));
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot open {} for writing", path.string()));
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  return in;
}

std::string slurp(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void keep_in_bounds(AnnotationLoad& load, std::vector<Point> points) {
  auto& ann = load.annotation;
  for (const Point& p : points) {
    const bool ok = std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
                    p.x < static_cast<double>(ann.width) && p.y < static_cast<double>(ann.height);
    if (ok) {
      ann.points.push_back(p);
    } else {
      ++load.rejected;
    }
  }
}

}  // namespace

AnnotationLoad parse_annotation_json(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(fmt::format("{}: invalid JSON: {}", source, e.what()));
  }
  AnnotationLoad load;
  std::vector<Point> points;
  try {
    auto& ann = load.annotation;
    ann.image_id = doc.at("image_id").get<std::string>();
    ann.width = doc.at("width").get<Index>();
    ann.height = doc.at("height").get<Index>();
    if (ann.width <= 0 || ann.height <= 0) throw InputError(fmt::format("{}: image size must be positive", source));
    for (const auto& p : doc.at("points")) {
      if (!p.is_array() || p.size() != 2) throw InputError(fmt::format("{}: each point must be [x, y]", source));
      points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
  } catch (const json::exception& e) {
    throw InputError(fmt::format("{}: malformed annotation: {}", source, e.what()));
  }
  keep_in_bounds(load, std::move(points));
  return load;
}

AnnotationLoad load_annotation_json(const fs::path& path) {
  return parse_annotation_json(slurp(path), path.string());
}

AnnotationLoad load_annotation_csv(const fs::path& path, Index width, Index height,
                                   std::string image_id) {
  if (width <= 0 || height <= 0) throw InputError(fmt::format("{}: image size must be positive", path.string()));
  auto in = open_in(path);
  AnnotationLoad load;
  load.annotation.image_id = std::move(image_id);
  load.annotation.width = width;
  load.annotation.height = height;
  std::vector<Point> points;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      std::size_t used = 0;
      const double x = std::stod(line.substr(0, comma));
      const std::string rest = line.substr(comma + 1);
      const double y = std::stod(rest, &used);
      if (rest.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument("trailing text");
      points.push_back({x, y});
    } catch (const std::exception&) {
      throw InputError(fmt::format("{}:{}: expected \"x,y\"", path.string(), lineno));
    }
  }
  keep_in_bounds(load, std::move(points));
  return load;
}

AnnotationLoad load_annotation(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".json") return load_annotation_json(path);
  if (ext == ".csv") {
    fs::path sidecar = path;
    sidecar.replace_extension(".size");
    auto in = open_in(sidecar);
    Index width = 0;
    Index height = 0;
    if (!(in >> width >> height)) {
      throw InputError(fmt::format("{}: expected \"width height\"", sidecar.string()));
    }
    return load_annotation_csv(path, width, height, path.stem().string());
  }
  throw InputError(fmt::format("{}: unsupported annotation format", path.string()));
}

void write_dmap(std::ostream& out, const DensityMap& map) {
  out.write("DMAP", 4);
  put_le(out, static_cast<std::uint32_t>(map.height()));
  put_le(out, static_cast<std::uint32_t>(map.width()));
  for (Index i = 0; i < map.height(); ++i) {
    for (Index j = 0; j < map.width(); ++j) {
      put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(map.values(i, j))));
    }
  }
}

void write_dmap(const fs::path& path, const DensityMap& map) {
  auto out = open_out(path);
  write_dmap(out, map);
}

DensityMap read_dmap(std::istream& in) {
  expect_magic(in, "DMAP");
  const auto h = get_le<std::uint32_t>(in, "height");
  const auto w = get_le<std::uint32_t>(in, "width");
  DensityMap map(h, w);
  for (Index i = 0; i < map.height(); ++i) {
    for (Index j = 0; j < map.width(); ++j) {
      map.values(i, j) = std::bit_cast<float>(get_le<std::uint32_t>(in, "density values"));
    }
  }
  return map;
}

DensityMap read_dmap(const fs::path& path) {
  auto in = open_in(path);
  return read_dmap(in);
}

void write_dmap_text(std::ostream& out, const DensityMap& map) {
  for (Index i = 0; i < map.height(); ++i) {
    for (Index j = 0; j < map.width(); ++j) {
      out << (j ? "," : "") << fmt::format("{:.9g}", static_cast<float>(map.values(i, j)));
    }
    out << '\n';
  }
}

void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& entries) {
  out.write("WTS1", 4);
  put_le(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw InputError("tensor name too long for checkpoint");
    if (e.dims.size() > 0xFF) throw InputError("tensor rank too large for checkpoint");
    put_le(out, static_cast<std::uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_le(out, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put_le(out, d);
    for (double v : e.values) put_le(out, std::bit_cast<std::uint64_t>(v));
  }
}

void write_checkpoint(const fs::path& path, const std::vector<NamedArray>& entries) {
  auto out = open_out(path);
  write_checkpoint(out, entries);
}

std::vector<NamedArray> read_checkpoint(std::istream& in) {
  expect_magic(in, "WTS1");
  const auto count = get_le<std::uint32_t>(in, "entry count");
  std::vector<NamedArray> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray e;
    e.name.resize(get_le<std::uint16_t>(in, "name length"));
    if (!in.read(e.name.data(), static_cast<std::streamsize>(e.name.size()))) throw InputError("truncated tensor name");
    const auto rank = get_le<std::uint8_t>(in, "rank");
    std::size_t total = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      e.dims.push_back(get_le<std::uint32_t>(in, "dims"));
      total *= e.dims.back();
    }
    e.values.resize(total);
    for (double& v : e.values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "payload"));
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<NamedArray> read_checkpoint(const fs::path& path) {
  auto in = open_in(path);
  return read_checkpoint(in);
}

TensorD read_pnm(const fs::path& path) {
  auto in = open_in(path);
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw InputError(fmt::format("{}: not a binary PPM/PGM", path.string()));
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    Index v = -1;
    if (!(in >> v)) throw InputError(fmt::format("{}: bad header", path.string()));
    return v;
  };
  const Index w = next_int();
  const Index h = next_int();
  const Index maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw InputError(fmt::format("{}: unsupported size or depth", path.string()));
  }
  in.get();
  const Index channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(w * h * channels));
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw InputError(fmt::format("{}: truncated pixel data", path.string()));
  }
  TensorD image({1, channels, h, w});
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (Index c = 0; c < channels; ++c) {
        image.at(0, c, y, x) = raw[static_cast<std::size_t>((y * w + x) * channels + c)] / static_cast<double>(maxval);
      }
    }
  }
  return image;
}

void write_ppm(const fs::path& path, const TensorD& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 3 && s.c != 1)) throw ShapeError("write_ppm expects [1, 3|1, H, W]");
  auto out = open_out(path);
  out << (s.c == 3 ? "P6" : "P5") << '\n' << s.w << ' ' << s.h << "\n255\n";
  for (Index y = 0; y < s.h; ++y) {
    for (Index x = 0; x < s.w; ++x) {
      for (Index c = 0; c < s.c; ++c) {
        const double v = std::clamp(image(0, c, y, x), 0.0, 1.0);
        out.put(static_cast<char>(std::lround(v * 255.0)));
      }
    }
  }
}

}  // namespace densattn
