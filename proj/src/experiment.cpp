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

#include "densattn/experiment.hpp"

#include "densattn/io.hpp"
#include "densattn/parallel.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace densattn {

namespace {

using Json = nlohmann::json;
namespace fs = std::filesystem;

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw InputError(fmt::format("config: '{}' must be an object", where));
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw InputError(fmt::format("config: unknown key '{}' in '{}'", key, where));
    }
  }
}

template <typename T>
void read_into(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw InputError(fmt::format("config: '{}.{}' has the wrong type ({})", where, key, e.what()));
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

AttentionConfig parse_attention_entry(const Json& entry) {
  if (entry.is_string()) return AttentionConfig::parse(entry.get<std::string>());
  check_keys(entry, "attention[]", {"kind", "lambda", "r", "act"});
  if (!entry.contains("kind") || !entry["kind"].is_string()) {
    throw InputError("config: attention entries need a string 'kind'");
  }
  std::string text = entry["kind"].get<std::string>();
  std::vector<std::string> opts;
  if (entry.contains("lambda")) opts.push_back(fmt::format("lambda={}", entry["lambda"].get<double>()));
  if (entry.contains("r")) opts.push_back(fmt::format("r={}", entry["r"].get<int>()));
  if (entry.contains("act")) opts.push_back("act=" + entry["act"].get<std::string>());
  if (!opts.empty()) text += ":" + fmt::format("{}", fmt::join(opts, ","));
  return AttentionConfig::parse(text);
}

std::vector<fs::path> annotation_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".json" || ext == ".csv")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

fs::path image_for(const fs::path& dir, const fs::path& annotation) {
  for (const char* ext : {".ppm", ".pgm"}) {
    fs::path p = dir / annotation.stem();
    p += ext;
    if (fs::exists(p)) return p;
  }
  throw InputError(fmt::format("no .ppm/.pgm image for annotation {} in {}", annotation.string(), dir.string()));
}

TensorD pad_image(const TensorD& image, Index height, Index width) {
  const Shape s = image.shape();
  if (s.h == height && s.w == width) return image;
  TensorD out({s.n, s.c, height, width});
  for (Index n = 0; n < s.n; ++n) {
    for (Index c = 0; c < s.c; ++c) {
      for (Index y = 0; y < s.h; ++y) {
        for (Index x = 0; x < s.w; ++x) out.at(n, c, y, x) = image(n, c, y, x);
      }
    }
  }
  return out;
}

DensityMap pad_density(const DensityMap& map, Index height, Index width) {
  if (map.height() == height && map.width() == width) return map;
  DensityMap out(height, width);
  out.values.topLeftCorner(map.height(), map.width()) = map.values;
  return out;
}

Index round_up(Index v, Index m) { return (v + m - 1) / m * m; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const fs::path& base_dir) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(fmt::format("config: invalid JSON ({})", e.what()));
  }
  check_keys(doc, "<root>", {"output_dir", "data", "model", "train", "attention", "eval", "log_wall_time"});

  ExperimentConfig cfg;
  if (doc.contains("output_dir")) cfg.output_dir = resolve(base_dir, doc["output_dir"].get<std::string>());
  else cfg.output_dir = base_dir / cfg.output_dir;
  read_into(doc, "log_wall_time", cfg.log_wall_time, "<root>");

  if (doc.contains("data")) {
    const Json& data = doc["data"];
    check_keys(data, "data", {"synthetic", "annotations", "images"});
    if (data.contains("synthetic")) {
      if (data.contains("annotations") || data.contains("images")) {
        throw InputError("config: 'data' takes either 'synthetic' or 'annotations'+'images', not both");
      }
      const Json& s = data["synthetic"];
      check_keys(s, "data.synthetic", {"images", "height", "width", "count_bins", "head_radius", "margin", "seed"});
      SyntheticSpec spec;
      read_into(s, "images", spec.images, "data.synthetic");
      read_into(s, "height", spec.height, "data.synthetic");
      read_into(s, "width", spec.width, "data.synthetic");
      read_into(s, "count_bins", spec.count_bins, "data.synthetic");
      read_into(s, "head_radius", spec.head_radius, "data.synthetic");
      read_into(s, "margin", spec.margin, "data.synthetic");
      read_into(s, "seed", spec.seed, "data.synthetic");
      cfg.data = spec;
    } else {
      if (!data.contains("annotations") || !data.contains("images")) {
        throw InputError("config: 'data' needs both 'annotations' and 'images' directories");
      }
      cfg.data = DatasetDirs{resolve(base_dir, data["annotations"].get<std::string>()),
                             resolve(base_dir, data["images"].get<std::string>())};
    }
  }

  if (doc.contains("model")) {
    const Json& m = doc["model"];
    check_keys(m, "model", {"width_scale", "seed", "init"});
    double scale = cfg.model.width_scale;
    read_into(m, "width_scale", scale, "model");
    cfg.model = ModelConfig::csrnet(scale);
    read_into(m, "seed", cfg.model.seed, "model");
    if (m.contains("init")) cfg.model.init = parse_init_scheme(m["init"].get<std::string>());
  }

  if (doc.contains("train")) {
    const Json& t = doc["train"];
    check_keys(t, "train", {"lr", "momentum", "weight_decay", "epochs", "batch_size", "seed", "kernel",
                            "val_fraction", "augment", "restore_best"});
    read_into(t, "lr", cfg.train.lr, "train");
    read_into(t, "momentum", cfg.train.momentum, "train");
    read_into(t, "weight_decay", cfg.train.weight_decay, "train");
    read_into(t, "epochs", cfg.train.epochs, "train");
    read_into(t, "batch_size", cfg.train.batch_size, "train");
    read_into(t, "seed", cfg.train.seed, "train");
    read_into(t, "val_fraction", cfg.train.val_fraction, "train");
    read_into(t, "augment", cfg.train.augment, "train");
    read_into(t, "restore_best", cfg.train.restore_best, "train");
    if (t.contains("kernel")) cfg.train.kernel = KernelSpec::parse(t["kernel"].get<std::string>());
  }

  if (doc.contains("attention")) {
    const Json& list = doc["attention"];
    if (!list.is_array() || list.empty()) throw InputError("config: 'attention' must be a non-empty array");
    cfg.attention.clear();
    for (const auto& entry : list) cfg.attention.push_back(parse_attention_entry(entry));
  }

  if (doc.contains("eval")) {
    const Json& e = doc["eval"];
    check_keys(e, "eval", {"bin_width", "max_bin"});
    read_into(e, "bin_width", cfg.bin_width, "eval");
    read_into(e, "max_bin", cfg.max_bin, "eval");
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void ExperimentConfig::validate() const {
  if (attention.empty()) throw InputError("config: no attention configurations to run");
  const Index channels = model.frontend_channels();
  std::set<std::string> slugs;
  for (const auto& a : attention) {
    try {
      a.validate(channels);
    } catch (const std::exception& e) {
      throw InputError(fmt::format("config: attention '{}' is invalid: {}", a.label(), e.what()));
    }
    if (!slugs.insert(a.slug()).second) throw InputError(fmt::format("config: attention '{}' listed twice", a.label()));
  }
  if (!(model.width_scale > 0.0)) throw InputError("config: model.width_scale must be > 0");
  train.validate();
  if (!(bin_width > 0.0) || !(max_bin > 0.0)) throw InputError("config: eval bin_width and max_bin must be > 0");
  if (const auto* spec = std::get_if<SyntheticSpec>(&data)) {
    spec->validate();
  } else {
    const auto& dirs = std::get<DatasetDirs>(data);
    if (!fs::is_directory(dirs.annotations)) throw InputError("config: annotations directory not found: " + dirs.annotations.string());
    if (!fs::is_directory(dirs.images)) throw InputError("config: images directory not found: " + dirs.images.string());
  }
}

std::vector<Sample<double>> load_dataset(const ExperimentConfig& cfg) {
  const Index stride = cfg.model.output_stride();
  std::vector<Sample<double>> samples;
  if (const auto* spec = std::get_if<SyntheticSpec>(&cfg.data)) {
    for (auto& img : make_synthetic(*spec)) {
      DensityMap map = generate_density_map(img.annotation, cfg.train.kernel);
      const Index h = round_up(img.annotation.height, stride);
      const Index w = round_up(img.annotation.width, stride);
      samples.push_back({img.id, pad_image(img.image, h, w), pad_density(map, h, w)});
    }
    return samples;
  }
  const auto& dirs = std::get<DatasetDirs>(cfg.data);
  for (const auto& ann_path : annotation_files(dirs.annotations)) {
    const AnnotationLoad load = load_annotation(ann_path);
    TensorD image = read_pnm(image_for(dirs.images, ann_path));
    const Shape s = image.shape();
    if (s.h != load.annotation.height || s.w != load.annotation.width) {
      throw InputError(fmt::format("{}: annotation size {}x{} does not match image {}x{}", ann_path.string(),
                                   load.annotation.width, load.annotation.height, s.w, s.h));
    }
    DensityMap map = generate_density_map(load.annotation, cfg.train.kernel);
    const Index h = round_up(s.h, stride);
    const Index w = round_up(s.w, stride);
    std::string id = load.annotation.image_id.empty() ? ann_path.stem().string() : load.annotation.image_id;
    samples.push_back({std::move(id), pad_image(image, h, w), pad_density(map, h, w)});
  }
  if (samples.empty()) throw InputError("no annotations found in " + dirs.annotations.string());
  return samples;
}

AblationResult run_ablation(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::vector<Sample<double>> data = load_dataset(cfg);
  fs::create_directories(cfg.output_dir);

  AblationResult result;
  result.runs.resize(cfg.attention.size());
  parallel_for(cfg.attention.size(), [&](std::size_t i) {
    const AttentionConfig& attn = cfg.attention[i];
    ModelConfig mc = cfg.model;
    mc.attention = attn;
    Model<double> model = Model<double>::build(mc);

    const std::string slug = attn.slug();
    TrainOutputs outputs;
    outputs.log_csv = cfg.output_dir / ("log_" + slug + ".csv");
    outputs.checkpoint = cfg.output_dir / (slug + ".wts");
    outputs.record_wall_time = cfg.log_wall_time;
    TrainingLog log = train_loop(model, std::span<const Sample<double>>(data), cfg.train, outputs);

    std::vector<Sample<double>> eval_set;
    for (std::size_t idx : (log.val_indices.empty() ? log.train_indices : log.val_indices)) eval_set.push_back(data[idx]);
    MetricsReport report = make_report(evaluate_model<double>(model, eval_set), cfg.bin_width, cfg.max_bin);

    write_text(cfg.output_dir / ("metrics_" + slug + ".json"), to_json(report) + "\n");
    std::ostringstream per_image;
    write_per_image_csv(per_image, report);
    write_text(cfg.output_dir / ("per_image_" + slug + ".csv"), per_image.str());

    AblationRun& run = result.runs[i];
    run.attention = attn;
    run.row = ComparisonRow{attn.label(), std::move(report), model.count_params(),
                            param_count(attn, mc.frontend_channels()) > 0};
    run.log = std::move(log);
  });

  std::vector<ComparisonRow> rows;
  for (const auto& run : result.runs) rows.push_back(run.row);
  std::ostringstream comparison;
  write_comparison_csv(comparison, rows);
  result.comparison_csv = cfg.output_dir / "comparison.csv";
  write_text(result.comparison_csv, comparison.str());
  std::ostringstream bins;
  write_bins_csv(bins, rows);
  result.bins_csv = cfg.output_dir / "bins.csv";
  write_text(result.bins_csv, bins.str());
  return result;
}

}  // namespace densattn
