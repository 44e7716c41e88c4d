#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ucad/grid.hpp"
#include "ucad/pgm.hpp"
#include "ucad/rng.hpp"

namespace ucad {

// Background sits mid-scale so blurred blob boundaries do not mimic another
// class's mean intensity; foreground classes alternate dark/bright around it.
inline std::vector<double> default_class_means(int c) {
  std::vector<double> m(c);
  m[0] = 0.5;
  for (int k = 1; k < c; ++k) {
    int level = (k + 1) / 2;
    double offset = 0.4 * level / std::max(1, c / 2);
    m[k] = k % 2 ? 0.5 - offset : 0.5 + offset;
  }
  return m;
}

struct DatasetSpec {
  int height = 64;
  int width = 64;
  int num_classes = 3;
  int blobs_min = 2;
  int blobs_max = 4;
  double radius_min = 8.0;
  double radius_max = 16.0;
  double waviness = 3.0;       // boundary amplitude in pixels
  std::vector<double> class_mean = default_class_means(3);
  double class_std = 0.05;     // per-blob intensity jitter
  double noise_std = 0.15;     // per-pixel noise
  int n_labeled = 2;
  int n_unlabeled = 38;
  int n_val = 10;
  std::uint64_t seed = 1;

  void validate() const {
    if (height < 1 || width < 1) throw config_error("dataset: size must be >= 1");
    if (num_classes < 2) throw config_error("dataset: classes must be >= 2");
    if (static_cast<int>(class_mean.size()) < num_classes)
      throw config_error("dataset: class_mean missing entries");
    if (n_labeled < 0 || n_unlabeled < 0 || n_val < 0)
      throw config_error("dataset: counts must be >= 0");
    if (blobs_min < 0 || blobs_max < blobs_min)
      throw config_error("dataset: bad blob count range");
    if (radius_min <= 0 || radius_max < radius_min ||
        radius_max >= std::min(height, width) / 2.0)
      throw config_error("dataset: radii must satisfy 0 < min <= max < min(H,W)/2");
  }
};

// Unlabeled split: ground truth is retained for evaluation oracles only and is
// reachable solely through the eval accessor.
class UnlabeledSet {
 public:
  void add(Grid2D img, LabelMap gt) {
    images_.push_back(std::move(img));
    hidden_gt_.push_back(std::move(gt));
  }
  std::size_t size() const { return images_.size(); }
  const Grid2D& image(std::size_t i) const { return images_[i]; }
  const LabelMap& eval_only_ground_truth(std::size_t i) const { return hidden_gt_[i]; }

 private:
  std::vector<Grid2D> images_;
  std::vector<LabelMap> hidden_gt_;
};

struct Dataset {
  std::vector<std::pair<Grid2D, LabelMap>> labeled;
  UnlabeledSet unlabeled;
  std::vector<std::pair<Grid2D, LabelMap>> validation;
};

// Star-convex wavy blob: inside iff dist <= r0*(1 + a*sin(k*theta + phi)).
inline std::pair<Grid2D, LabelMap> generate_sample(const DatasetSpec& spec, RngStream& rng) {
  spec.validate();
  const int H = spec.height, W = spec.width, C = spec.num_classes;
  LabelMap y(H, W, C, 0);
  Grid2D blob_mean(H, W, spec.class_mean[0] + rng.next_gaussian() * spec.class_std);

  int nblobs = spec.blobs_min + rng.next_int(spec.blobs_max - spec.blobs_min + 1);
  for (int b = 0; b < nblobs; ++b) {
    int cls = 1 + rng.next_int(C - 1);
    double r0 = spec.radius_min + rng.next_double() * (spec.radius_max - spec.radius_min);
    double margin = r0 * (1.0 + spec.waviness / std::max(r0, 1.0));
    double cy = margin + rng.next_double() * std::max(1.0, H - 2.0 * margin);
    double cx = margin + rng.next_double() * std::max(1.0, W - 2.0 * margin);
    double a = spec.waviness / r0;
    int k = 2 + rng.next_int(4);
    double phi = rng.next_double() * 6.283185307179586;
    double mean = spec.class_mean[cls] + rng.next_gaussian() * spec.class_std;
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        double dy = r - cy, dx = c - cx;
        double dist = std::sqrt(dy * dy + dx * dx);
        double theta = std::atan2(dy, dx);
        double rad = r0 * (1.0 + a * std::sin(k * theta + phi));
        if (dist <= rad) {
          y.at(r, c) = cls;  // later blobs overwrite earlier
          blob_mean.at(r, c) = mean;
        }
      }
    }
  }
  Grid2D img(H, W);
  for (std::size_t px = 0; px < img.size(); ++px) {
    double v = blob_mean.values[px] + rng.next_gaussian() * spec.noise_std;
    img.values[px] = std::min(1.0, std::max(0.0, v));
  }
  return {std::move(img), std::move(y)};
}

inline Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  RngStream master(spec.seed);
  std::uint64_t idx = 0;
  for (int i = 0; i < spec.n_labeled; ++i) {
    RngStream r = master.fork(idx++);
    ds.labeled.push_back(generate_sample(spec, r));
  }
  for (int i = 0; i < spec.n_unlabeled; ++i) {
    RngStream r = master.fork(idx++);
    auto [img, gt] = generate_sample(spec, r);
    ds.unlabeled.add(std::move(img), std::move(gt));
  }
  for (int i = 0; i < spec.n_val; ++i) {
    RngStream r = master.fork(idx++);
    ds.validation.push_back(generate_sample(spec, r));
  }
  return ds;
}

namespace detail {
inline std::string sample_path(const std::string& dir, const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d.pgm", prefix, i);
  return dir + "/" + buf;
}
}  // namespace detail

// Layout: <root>/{labeled,unlabeled,val}/img_%04d.pgm + lab_%04d.pgm,
// plus manifest.txt with counts, spec values, and seed.
inline void save_dataset(const std::string& root, const Dataset& ds, const DatasetSpec& spec) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"labeled", "unlabeled", "val"}) {
    fs::create_directories(fs::path(root) / sub, ec);
    if (ec) throw data_error("save_dataset: cannot create " + root + "/" + sub);
  }
  for (std::size_t i = 0; i < ds.labeled.size(); ++i) {
    save_grid(detail::sample_path(root + "/labeled", "img", static_cast<int>(i)), ds.labeled[i].first);
    save_labels(detail::sample_path(root + "/labeled", "lab", static_cast<int>(i)), ds.labeled[i].second);
  }
  for (std::size_t i = 0; i < ds.unlabeled.size(); ++i) {
    save_grid(detail::sample_path(root + "/unlabeled", "img", static_cast<int>(i)), ds.unlabeled.image(i));
    save_labels(detail::sample_path(root + "/unlabeled", "lab", static_cast<int>(i)),
                ds.unlabeled.eval_only_ground_truth(i));
  }
  for (std::size_t i = 0; i < ds.validation.size(); ++i) {
    save_grid(detail::sample_path(root + "/val", "img", static_cast<int>(i)), ds.validation[i].first);
    save_labels(detail::sample_path(root + "/val", "lab", static_cast<int>(i)), ds.validation[i].second);
  }
  std::ofstream mf(root + "/manifest.txt");
  if (!mf) throw data_error("save_dataset: cannot write manifest");
  mf << "n_labeled=" << spec.n_labeled << '\n'
     << "n_unlabeled=" << spec.n_unlabeled << '\n'
     << "n_val=" << spec.n_val << '\n'
     << "height=" << spec.height << '\n'
     << "width=" << spec.width << '\n'
     << "num_classes=" << spec.num_classes << '\n'
     << "blobs_min=" << spec.blobs_min << '\n'
     << "blobs_max=" << spec.blobs_max << '\n'
     << "radius_min=" << spec.radius_min << '\n'
     << "radius_max=" << spec.radius_max << '\n'
     << "waviness=" << spec.waviness << '\n'
     << "class_std=" << spec.class_std << '\n'
     << "noise_std=" << spec.noise_std << '\n'
     << "seed=" << spec.seed << '\n';
}

inline DatasetSpec load_manifest(const std::string& root) {
  std::ifstream mf(root + "/manifest.txt");
  if (!mf) throw data_error("load_manifest: missing " + root + "/manifest.txt");
  DatasetSpec spec;
  std::string line;
  while (std::getline(mf, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key == "n_labeled") spec.n_labeled = std::stoi(val);
    else if (key == "n_unlabeled") spec.n_unlabeled = std::stoi(val);
    else if (key == "n_val") spec.n_val = std::stoi(val);
    else if (key == "height") spec.height = std::stoi(val);
    else if (key == "width") spec.width = std::stoi(val);
    else if (key == "num_classes") spec.num_classes = std::stoi(val);
    else if (key == "blobs_min") spec.blobs_min = std::stoi(val);
    else if (key == "blobs_max") spec.blobs_max = std::stoi(val);
    else if (key == "radius_min") spec.radius_min = std::stod(val);
    else if (key == "radius_max") spec.radius_max = std::stod(val);
    else if (key == "waviness") spec.waviness = std::stod(val);
    else if (key == "class_std") spec.class_std = std::stod(val);
    else if (key == "noise_std") spec.noise_std = std::stod(val);
    else if (key == "seed") spec.seed = std::stoull(val);
  }
  return spec;
}

inline Dataset load_dataset(const std::string& root) {
  DatasetSpec spec = load_manifest(root);
  Dataset ds;
  for (int i = 0; i < spec.n_labeled; ++i)
    ds.labeled.emplace_back(load_grid(detail::sample_path(root + "/labeled", "img", i)),
                            load_labels(detail::sample_path(root + "/labeled", "lab", i),
                                        spec.num_classes));
  for (int i = 0; i < spec.n_unlabeled; ++i)
    ds.unlabeled.add(load_grid(detail::sample_path(root + "/unlabeled", "img", i)),
                     load_labels(detail::sample_path(root + "/unlabeled", "lab", i),
                                 spec.num_classes));
  for (int i = 0; i < spec.n_val; ++i)
    ds.validation.emplace_back(load_grid(detail::sample_path(root + "/val", "img", i)),
                               load_labels(detail::sample_path(root + "/val", "lab", i),
                                           spec.num_classes));
  return ds;
}

}  // namespace ucad
