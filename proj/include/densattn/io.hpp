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

#ifndef DENSATTN_IO_HPP
#define DENSATTN_IO_HPP

#include "densattn/density.hpp"
#include "densattn/init.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace densattn {

/// Unreadable or malformed input file. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AnnotationLoad {
  PointAnnotation annotation;
  std::size_t rejected = 0;  // out-of-bounds points dropped
};

/// {"image_id": str, "width": int, "height": int, "points": [[x, y], ...]}
AnnotationLoad parse_annotation_json(const std::string& text, const std::string& source = "<memory>");
AnnotationLoad load_annotation_json(const std::filesystem::path& path);

/// One "x,y" pair per line; blank lines and '#' comments ignored.
AnnotationLoad load_annotation_csv(const std::filesystem::path& path, Index width, Index height,
                                   std::string image_id);

/// Dispatches on extension. For .csv the image size comes from a sidecar
/// "<stem>.size" file holding "width height".
AnnotationLoad load_annotation(const std::filesystem::path& path);

// DMAP: "DMAP", u32 height, u32 width (little-endian), then height*width
// little-endian float32 values, row-major.
void write_dmap(std::ostream& out, const DensityMap& map);
void write_dmap(const std::filesystem::path& path, const DensityMap& map);
DensityMap read_dmap(std::istream& in);
DensityMap read_dmap(const std::filesystem::path& path);
void write_dmap_text(std::ostream& out, const DensityMap& map);

// WTS1: "WTS1", u32 entry count, then per entry: u16 name length, name
// bytes, u8 rank, rank x u32 dims, float64 payload (all little-endian).
struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedArray>& entries);
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& entries);
std::vector<NamedArray> read_checkpoint(std::istream& in);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
std::vector<NamedArray> to_named_arrays(const ParamStore<Scalar>& store) {
  std::vector<NamedArray> out;
  for (const auto& [name, t] : store) {
    NamedArray e;
    e.name = name;
    for (Index d : t.shape().dims()) e.dims.push_back(static_cast<std::uint32_t>(d));
    e.values.assign(t.data().data(), t.data().data() + t.size());
    out.push_back(std::move(e));
  }
  return out;
}

/// Copies checkpoint values into same-named, same-shaped parameters.
template <typename Scalar>
void load_named_arrays(ParamStore<Scalar>& store, const std::vector<NamedArray>& entries) {
  if (entries.size() != store.entries()) {
    throw InputError("checkpoint has " + std::to_string(entries.size()) + " tensors, model has " +
                     std::to_string(store.entries()));
  }
  for (const auto& e : entries) {
    if (!store.contains(e.name)) throw InputError("checkpoint tensor '" + e.name + "' not in model");
    auto& t = store.get(e.name);
    Index expected = 1;
    for (auto d : e.dims) expected *= d;
    if (expected != t.size() || static_cast<Index>(e.values.size()) != t.size()) {
      throw InputError("checkpoint tensor '" + e.name + "' has the wrong size");
    }
    for (Index i = 0; i < t.size(); ++i) t.mutable_data()(i) = static_cast<Scalar>(e.values[static_cast<std::size_t>(i)]);
  }
}

/// Binary PPM (P6) or PGM (P5), 8-bit, scaled to [0, 1] as [1, C, H, W].
TensorD read_pnm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const TensorD& image);

}  // namespace densattn

#endif  // DENSATTN_IO_HPP
