#include "recd/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "recd/microtask.hpp"

namespace recd {

using nlohmann::json;

KittiParseError::KittiParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

LabeledObject make_box_record(std::string class_name, const BBox& box,
                              std::optional<double> score) {
  return LabeledObject{std::move(class_name),
                       -1.0,
                       -1,
                       -10.0,
                       box,
                       {-1.0, -1.0, -1.0},
                       {-1000.0, -1000.0, -1000.0},
                       -10.0,
                       score};
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
T parse_field(std::string_view token, std::size_t line, const char* name) {
  T value{};
  // from_chars rejects a leading '+', which some writers emit.
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw NumericParseError(line, std::string("cannot parse ") + name + " from '" +
                                      std::string(token) + "'");
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw NumericParseError(line, std::string(name) + " is not finite");
    }
  }
  return value;
}

}  // namespace

std::vector<LabeledObject> parse_kitti_labels(std::istream& in) {
  std::vector<LabeledObject> objects;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto f = split_fields(raw);
    if (f.empty()) continue;
    if (f.size() != 15 && f.size() != 16) {
      throw FieldCountError(line_no, "expected 15 or 16 fields, found " +
                                         std::to_string(f.size()));
    }
    const auto num = [&](std::size_t i, const char* name) {
      return parse_field<double>(f[i], line_no, name);
    };
    const double left = num(4, "bbox_left");
    const double top = num(5, "bbox_top");
    const double right = num(6, "bbox_right");
    const double bottom = num(7, "bbox_bottom");
    std::optional<BBox> box;
    try {
      box.emplace(left, top, right, bottom);
    } catch (const InvalidBox& e) {
      throw InvalidBoxError(line_no, e.what());
    }
    LabeledObject obj{std::string(f[0]),
                      num(1, "truncated"),
                      parse_field<int>(f[2], line_no, "occluded"),
                      num(3, "alpha"),
                      *box,
                      {num(8, "height"), num(9, "width"), num(10, "length")},
                      {num(11, "x"), num(12, "y"), num(13, "z")},
                      num(14, "rotation_y"),
                      std::nullopt};
    if (f.size() == 16) obj.score = num(15, "score");
    objects.push_back(std::move(obj));
  }
  return objects;
}

std::vector<LabeledObject> parse_kitti_labels(const std::string& text) {
  std::istringstream in(text);
  return parse_kitti_labels(in);
}

std::string format_number(double value) {
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_kitti_labels(std::ostream& out, std::span<const LabeledObject> objects) {
  for (const auto& o : objects) {
    out << o.class_name << ' ' << format_number(o.truncated) << ' ' << o.occluded << ' '
        << format_number(o.alpha) << ' ' << format_number(o.bbox.left()) << ' '
        << format_number(o.bbox.top()) << ' ' << format_number(o.bbox.right()) << ' '
        << format_number(o.bbox.bottom());
    for (double d : o.dimensions) out << ' ' << format_number(d);
    for (double l : o.location) out << ' ' << format_number(l);
    out << ' ' << format_number(o.rotation_y);
    if (o.score) out << ' ' << format_number(*o.score);
    out << '\n';
  }
}

LabelSet read_label_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a label directory: " + dir.string());
  }
  LabelSet labels;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    try {
      labels[entry.path().stem().string()] = parse_kitti_labels(in);
    } catch (const KittiParseError& e) {
      throw std::runtime_error(entry.path().string() + ": " + e.what());
    }
  }
  return labels;
}

void write_label_dir(const std::filesystem::path& dir, const LabelSet& labels) {
  std::filesystem::create_directories(dir);
  for (const auto& [image_id, objects] : labels) {
    std::ofstream out(dir / (image_id + ".txt"));
    if (!out) throw std::runtime_error("cannot write " + (dir / image_id).string());
    write_kitti_labels(out, objects);
  }
}

std::vector<BBox> boxes_of_class(std::span<const LabeledObject> objects,
                                 std::string_view class_name) {
  std::vector<BBox> boxes;
  for (const auto& o : objects) {
    if (o.class_name == class_name) boxes.push_back(o.bbox);
  }
  return boxes;
}

void write_softlabel_sidecar(std::ostream& out, std::span<const SoftLabeledObject> objects) {
  for (const auto& o : objects) {
    json counts = json::object();
    for (const auto& [option, n] : o.label.counts) counts[option] = n;
    const json record = {
        {"image_id", o.image_id},
        {"group_id", o.group_id},
        {"bbox", {o.bbox.left(), o.bbox.top(), o.bbox.right(), o.bbox.bottom()}},
        {"p", o.label.p_hat},
        {"ci_low", o.label.ci_low},
        {"ci_high", o.label.ci_high},
        {"n_responses", o.label.n_responses()},
        {"counts", counts},
        {"tasks", o.tasks},
        {"refined", o.label.refined},
    };
    out << record.dump() << '\n';
  }
}

std::vector<SoftLabeledObject> read_softlabel_sidecar(std::istream& in) {
  std::vector<SoftLabeledObject> objects;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json r = json::parse(line);
      const auto& b = r.at("bbox");
      SoftLabel label;
      label.p_hat = r.at("p").get<double>();
      label.ci_low = r.at("ci_low").get<double>();
      label.ci_high = r.at("ci_high").get<double>();
      label.refined = r.value("refined", false);
      int invalid = 0;
      for (const auto& [option, n] : r.at("counts").items()) {
        label.counts[option] = n.get<int>();
        const std::string_view opt = option;
        if (opt.size() >= options::kCantSolve.size() &&
            opt.substr(opt.size() - options::kCantSolve.size()) == options::kCantSolve) {
          invalid += n.get<int>();
        }
        if (opt.find(':') != std::string_view::npos) label.composite = true;
      }
      label.n_valid = label.n_responses() - invalid;
      label.resolvable = label.n_valid > 0 || label.counts.empty();
      if (!label.composite) {
        label.positives = static_cast<int>(std::lround(label.p_hat * label.n_valid));
      }
      SoftLabeledObject obj{r.at("image_id").get<std::string>(),
                            r.at("group_id").get<std::string>(),
                            BBox(b.at(0).get<double>(), b.at(1).get<double>(),
                                 b.at(2).get<double>(), b.at(3).get<double>()),
                            std::move(label),
                            r.value("tasks", std::vector<std::string>{}),
                            1,
                            {}};
      objects.push_back(std::move(obj));
    } catch (const std::exception& e) {
      throw std::runtime_error("sidecar line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return objects;
}

std::vector<ImagePedestrianCount> pedestrian_counts(const LabelSet& labels) {
  std::vector<ImagePedestrianCount> counts;
  counts.reserve(labels.size());
  for (const auto& [image_id, objects] : labels) {
    const auto n = std::count_if(objects.begin(), objects.end(), [](const LabeledObject& o) {
      return o.class_name == kPedestrianClass;
    });
    counts.push_back({image_id, static_cast<int>(n)});
  }
  return counts;
}

DatasetSplit stratified_split(std::span<const ImagePedestrianCount> images,
                              const SplitConfig& config) {
  if (!(config.target_fraction > 0.0 && config.target_fraction < 1.0)) {
    throw std::invalid_argument("target_fraction must lie in (0, 1)");
  }
  long total = 0;
  for (const auto& img : images) {
    if (img.pedestrians < 0) throw std::invalid_argument("negative pedestrian count");
    total += img.pedestrians;
  }
  if (total == 0) throw std::invalid_argument("split needs at least one pedestrian");

  const auto n_train = static_cast<std::size_t>(
      std::floor(config.target_fraction * static_cast<double>(images.size()) + 1e-9));
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);

  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    std::shuffle(order.begin(), order.end(), rng);
    long in_train = 0;
    for (std::size_t i = 0; i < n_train; ++i) in_train += images[order[i]].pedestrians;
    const double fraction = static_cast<double>(in_train) / static_cast<double>(total);
    if (std::abs(fraction - config.target_fraction) <= config.tolerance + 1e-12) {
      DatasetSplit split;
      split.seed = config.seed;
      split.pedestrian_fraction_train = fraction;
      split.attempts = attempt;
      std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
      std::vector<std::size_t> val(order.begin() + n_train, order.end());
      std::sort(train.begin(), train.end());
      std::sort(val.begin(), val.end());
      for (auto i : train) split.train_images.push_back(images[i].image_id);
      for (auto i : val) split.val_images.push_back(images[i].image_id);
      return split;
    }
  }
  throw UnsatisfiableSplit("no split within tolerance after " +
                           std::to_string(config.max_attempts) + " attempts");
}

SplitSummary summarize_split(const DatasetSplit& split,
                             std::span<const ImagePedestrianCount> images) {
  std::unordered_map<std::string, int> by_id;
  for (const auto& img : images) by_id[img.image_id] = img.pedestrians;
  SplitSummary s;
  s.train_images = split.train_images.size();
  s.val_images = split.val_images.size();
  const auto lookup = [&](const std::string& id) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw std::runtime_error("manifest image not in dataset: " + id);
    return it->second;
  };
  for (const auto& id : split.train_images) s.train_pedestrians += lookup(id);
  for (const auto& id : split.val_images) s.val_pedestrians += lookup(id);
  return s;
}

void write_split_manifest(std::ostream& out, const DatasetSplit& split) {
  const json manifest = {
      {"seed", split.seed}, {"train", split.train_images}, {"val", split.val_images}};
  out << manifest.dump(2) << '\n';
}

DatasetSplit read_split_manifest(std::istream& in) {
  const json manifest = json::parse(in);
  DatasetSplit split;
  split.seed = manifest.value("seed", std::uint64_t{0});
  split.train_images = manifest.at("train").get<std::vector<std::string>>();
  split.val_images = manifest.at("val").get<std::vector<std::string>>();
  return split;
}

}  // namespace recd
