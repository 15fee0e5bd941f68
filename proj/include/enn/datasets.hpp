#pragma once
// Deterministic dataset generators and loaders. Every generator is a pure
// function of its seed and produces bytewise-identical output across runs
// and platforms.

#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "enn/common.hpp"
#include "enn/rng.hpp"

namespace enn {

struct LabeledDataset {
  Matrix x;
  std::vector<std::size_t> y;
  std::vector<std::string> class_names;
  struct Meta {
    std::string generator;
    std::uint64_t seed = 0;
    std::string split;
  } meta;

  std::size_t size() const { return x.rows(); }
  std::size_t dim() const { return x.cols(); }

  void validate() const {
    require(x.rows() == y.size(), "LabeledDataset: |X| != |y|");
    require(all_finite(x.data()), "LabeledDataset: non-finite features");
    for (std::size_t c : y)
      require(c < class_names.size(), "LabeledDataset: label out of range");
  }

  std::vector<std::vector<std::size_t>> indices_by_class() const {
    std::vector<std::vector<std::size_t>> out(class_names.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[y[i]].push_back(i);
    return out;
  }
};

inline constexpr std::size_t kImageSide = 28;

// ---------------------------------------------------------------------------
// Rectangles: 28x28 black images, one filled white axis-aligned non-square
// rectangle each; label is the orientation (wider = horizontal).

inline LabeledDataset gen_rectangles(std::size_t n, std::uint64_t seed,
                                     const std::string& split) {
  LabeledDataset ds;
  ds.x = Matrix(n, kImageSide * kImageSide);
  ds.y.resize(n);
  ds.class_names = {"horizontal", "vertical"};
  ds.meta = {"rectangles", seed, split};
  Rng rng(derive_seed(seed, "rectangles", split == "test" ? 1 : 0));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t label = i % 2;  // exact class balance
    // Side lengths uniform on [3, 26], re-drawn while equal; the larger side
    // runs along the labeled orientation.
    std::size_t a, b;
    do {
      a = 3 + rng.below(24);
      b = 3 + rng.below(24);
    } while (a == b);
    std::size_t w = std::max(a, b), h = std::min(a, b);
    if (label == 1) std::swap(w, h);
    std::size_t x0 = rng.below(kImageSide - w + 1);
    std::size_t y0 = rng.below(kImageSide - h + 1);
    auto img = ds.x.row(i);
    for (std::size_t r = y0; r < y0 + h; ++r)
      for (std::size_t c = x0; c < x0 + w; ++c) img[r * kImageSide + c] = 1.0;
    ds.y[i] = label;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Orientation: train = all 56 one-pixel-wide full stripes. Test sets come
// from randomly placed non-square rectangles: their outlines (boxes), one of
// their two diagonals (diagonals), and the width-1 diagonal subset (lines).

struct OrientationData {
  LabeledDataset train;
  LabeledDataset lines;
  LabeledDataset diagonals;
  LabeledDataset boxes;
};

namespace detail {

inline void draw_line(std::span<double> img, int x0, int y0, int x1, int y1) {
  // Bresenham; endpoints inclusive.
  int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    img[static_cast<std::size_t>(y0) * kImageSide + static_cast<std::size_t>(x0)] = 1.0;
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace detail

inline OrientationData gen_orientation(std::uint64_t seed) {
  OrientationData data;
  auto init = [seed](LabeledDataset& ds, const std::string& split) {
    ds.x = Matrix(0, kImageSide * kImageSide);
    ds.class_names = {"horizontal", "vertical"};
    ds.meta = {"orientation", seed, split};
  };
  init(data.train, "train");
  init(data.lines, "lines");
  init(data.diagonals, "diagonals");
  init(data.boxes, "boxes");

  std::vector<double> img(kImageSide * kImageSide);
  for (std::size_t r = 0; r < kImageSide; ++r) {
    std::fill(img.begin(), img.end(), 0.0);
    for (std::size_t c = 0; c < kImageSide; ++c) img[r * kImageSide + c] = 1.0;
    data.train.x.append_row(img);
    data.train.y.push_back(0);
  }
  for (std::size_t c = 0; c < kImageSide; ++c) {
    std::fill(img.begin(), img.end(), 0.0);
    for (std::size_t r = 0; r < kImageSide; ++r) img[r * kImageSide + c] = 1.0;
    data.train.x.append_row(img);
    data.train.y.push_back(1);
  }

  // For every non-square (w, h) shape, at most 50 unique placements.
  for (std::size_t h = 1; h <= kImageSide; ++h) {
    for (std::size_t w = 1; w <= kImageSide; ++w) {
      if (w == h) continue;
      Rng rng(derive_seed(seed, "orientation-shape", w, h));
      std::size_t nx = kImageSide - w + 1, ny = kImageSide - h + 1;
      std::size_t total = nx * ny;
      auto picks = rng.sample_without_replacement(total, std::min<std::size_t>(50, total));
      std::size_t label = w > h ? 0 : 1;
      for (std::size_t p : picks) {
        std::size_t x0 = p % nx, y0 = p / nx;
        int xl = static_cast<int>(x0), xr = static_cast<int>(x0 + w - 1);
        int yt = static_cast<int>(y0), yb = static_cast<int>(y0 + h - 1);

        std::fill(img.begin(), img.end(), 0.0);
        for (int c = xl; c <= xr; ++c) {
          img[static_cast<std::size_t>(yt) * kImageSide + c] = 1.0;
          img[static_cast<std::size_t>(yb) * kImageSide + c] = 1.0;
        }
        for (int r = yt; r <= yb; ++r) {
          img[static_cast<std::size_t>(r) * kImageSide + xl] = 1.0;
          img[static_cast<std::size_t>(r) * kImageSide + xr] = 1.0;
        }
        data.boxes.x.append_row(img);
        data.boxes.y.push_back(label);

        std::fill(img.begin(), img.end(), 0.0);
        if (rng.below(2) == 0)
          detail::draw_line(img, xl, yt, xr, yb);
        else
          detail::draw_line(img, xl, yb, xr, yt);
        data.diagonals.x.append_row(img);
        data.diagonals.y.push_back(label);
        if (w == 1 || h == 1) {
          data.lines.x.append_row(img);
          data.lines.y.push_back(label);
        }
      }
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// Boolean logic: all 16 two-input functions x 4 input pairs = 64 samples.
// Features: the two function inputs encoded as +-1 and scaled by 2, then a
// 16-wide one-hot of the function index. Function index f encodes the truth
// table: output(a, b) = bit (2a + b) of f.

inline bool logic_function_value(std::size_t f, bool a, bool b) {
  std::size_t bit = (a ? 2u : 0u) + (b ? 1u : 0u);
  return ((f >> bit) & 1u) != 0;
}

inline LabeledDataset gen_logic() {
  LabeledDataset ds;
  ds.x = Matrix(64, 18);
  ds.y.resize(64);
  ds.class_names = {"false", "true"};
  ds.meta = {"logic", 0, "train"};
  std::size_t i = 0;
  for (std::size_t f = 0; f < 16; ++f) {
    for (std::size_t pair = 0; pair < 4; ++pair, ++i) {
      bool a = (pair & 2u) != 0, b = (pair & 1u) != 0;
      auto row = ds.x.row(i);
      row[0] = a ? 2.0 : -2.0;
      row[1] = b ? 2.0 : -2.0;
      row[2 + f] = 1.0;
      ds.y[i] = logic_function_value(f, a, b) ? 1 : 0;
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Traveling salesman problem. Samples have 55 features: the 45 entries of the
// upper triangle of the 10-city distance matrix (visited cities' distances
// set to 10), then a 10-wide one-hot of the current city scaled by 10.

inline constexpr std::size_t kTspCities = 10;
inline constexpr std::size_t kTspFeatures = 55;
inline constexpr double kTspVisitedDistance = 10.0;
inline constexpr double kTspOneHotScale = 10.0;

inline std::size_t tsp_pair_index(std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return i * (2 * kTspCities - i - 1) / 2 + (j - i - 1);
}

struct TspInstance {
  std::vector<std::pair<double, double>> coords;  // empty for training stubs
  std::vector<bool> visited;                      // departed cities, excludes current
  std::size_t current = 0;

  double distance(std::size_t i, std::size_t j) const {
    double dx = coords[i].first - coords[j].first;
    double dy = coords[i].second - coords[j].second;
    return std::sqrt(dx * dx + dy * dy);
  }

  // Feature encoding of the current state.
  std::vector<double> encode() const {
    std::vector<double> f(kTspFeatures, 0.0);
    for (std::size_t i = 0; i < kTspCities; ++i)
      for (std::size_t j = i + 1; j < kTspCities; ++j)
        f[tsp_pair_index(i, j)] =
            (visited[i] || visited[j]) ? kTspVisitedDistance : distance(i, j);
    f[45 + current] = kTspOneHotScale;
    return f;
  }
};

struct TspData {
  LabeledDataset train;
  std::vector<TspInstance> test_instances;
};

inline TspData gen_tsp(std::size_t n_test, std::uint64_t seed) {
  TspData data;
  data.train.x = Matrix(90, kTspFeatures);
  data.train.y.resize(90);
  for (std::size_t c = 0; c < kTspCities; ++c)
    data.train.class_names.push_back(std::to_string(c));
  data.train.meta = {"tsp", seed, "train"};
  // One sample per (current city, remaining city): every distance is 10
  // except the current-to-target pair, which is 0.
  std::size_t i = 0;
  for (std::size_t c = 0; c < kTspCities; ++c) {
    for (std::size_t t = 0; t < kTspCities; ++t) {
      if (t == c) continue;
      auto row = data.train.x.row(i);
      for (std::size_t f = 0; f < 45; ++f) row[f] = kTspVisitedDistance;
      row[tsp_pair_index(c, t)] = 0.0;
      row[45 + c] = kTspOneHotScale;
      data.train.y[i] = t;
      ++i;
    }
  }

  Rng rng(derive_seed(seed, "tsp-test"));
  data.test_instances.reserve(n_test);
  for (std::size_t m = 0; m < n_test; ++m) {
    TspInstance inst;
    inst.coords.resize(kTspCities);
    for (auto& c : inst.coords) c = {rng.uniform(), rng.uniform()};
    inst.visited.assign(kTspCities, false);
    inst.current = 0;  // routes start at city 0
    data.test_instances.push_back(std::move(inst));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Binary decision trees over 10-feature truth tables. A sample is the
// 1024-entry label vector; assignment t has feature f value (t >> f) & 1.

inline constexpr std::size_t kBdtFeatures = 10;
inline constexpr std::size_t kBdtEntries = 1024;

struct TruthTable {
  std::vector<std::uint8_t> labels;  // kBdtEntries entries in {0, 1}
};

struct BdtData {
  LabeledDataset train;
  std::vector<TruthTable> test_tables;
};

namespace detail {

struct RandomBdtNode {
  int feature = -1;  // -1: leaf
  std::uint8_t leaf_label = 0;
  std::unique_ptr<RandomBdtNode> lo, hi;
};

inline std::unique_ptr<RandomBdtNode> gen_random_bdt(Rng& rng, std::size_t depth,
                                                     std::vector<std::size_t>& unused) {
  auto node = std::make_unique<RandomBdtNode>();
  bool branch = depth < 7 && !unused.empty() && rng.uniform() < 0.7;
  if (!branch) {
    node->leaf_label = static_cast<std::uint8_t>(rng.below(2));
    return node;
  }
  std::size_t pick = rng.below(unused.size());
  node->feature = static_cast<int>(unused[pick]);
  std::swap(unused[pick], unused.back());
  unused.pop_back();
  node->lo = gen_random_bdt(rng, depth + 1, unused);
  node->hi = gen_random_bdt(rng, depth + 1, unused);
  unused.push_back(static_cast<std::size_t>(node->feature));
  std::swap(unused[pick], unused.back());
  return node;
}

inline std::uint8_t eval_random_bdt(const RandomBdtNode* node, std::size_t assignment) {
  while (node->feature >= 0)
    node = ((assignment >> node->feature) & 1u) ? node->hi.get() : node->lo.get();
  return node->leaf_label;
}

}  // namespace detail

inline BdtData gen_bdt(std::size_t n_test, std::uint64_t seed) {
  BdtData data;
  data.train.x = Matrix(20, kBdtEntries);
  data.train.y.resize(20);
  for (std::size_t f = 0; f < kBdtFeatures; ++f)
    data.train.class_names.push_back(std::to_string(f));
  data.train.meta = {"bdt", seed, "train"};
  // All truth tables whose optimal tree has a single branch node: for each
  // feature, both label polarities.
  std::size_t i = 0;
  for (std::size_t f = 0; f < kBdtFeatures; ++f) {
    for (std::size_t polarity = 0; polarity < 2; ++polarity, ++i) {
      auto row = data.train.x.row(i);
      for (std::size_t t = 0; t < kBdtEntries; ++t)
        row[t] = (((t >> f) & 1u) == polarity) ? 1.0 : 0.0;
      data.train.y[i] = f;
    }
  }

  Rng rng(derive_seed(seed, "bdt-test"));
  std::set<std::vector<std::uint8_t>> seen;
  while (data.test_tables.size() < n_test) {
    std::vector<std::size_t> unused(kBdtFeatures);
    std::iota(unused.begin(), unused.end(), 0);
    auto tree = detail::gen_random_bdt(rng, 0, unused);
    TruthTable table;
    table.labels.resize(kBdtEntries);
    for (std::size_t t = 0; t < kBdtEntries; ++t)
      table.labels[t] = detail::eval_random_bdt(tree.get(), t);
    if (seen.insert(table.labels).second) data.test_tables.push_back(std::move(table));
  }
  return data;
}

inline std::vector<double> bdt_features(const TruthTable& table) {
  std::vector<double> f(kBdtEntries);
  for (std::size_t t = 0; t < kBdtEntries; ++t) f[t] = table.labels[t];
  return f;
}

// ---------------------------------------------------------------------------
// MNIST in bit-exact IDX format.

namespace detail {

inline std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in)
    throw std::runtime_error(path + ": truncated header (expected 4 more bytes)");
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace detail

inline LabeledDataset load_mnist_idx(const std::string& image_path,
                                     const std::string& label_path) {
  std::ifstream imgs(image_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("cannot open " + image_path);
  std::uint32_t magic = detail::read_be32(imgs, image_path);
  if (magic != 2051)
    throw std::runtime_error(image_path + ": bad magic " + std::to_string(magic) +
                             " at offset 0 (expected 2051)");
  std::uint32_t n = detail::read_be32(imgs, image_path);
  std::uint32_t rows = detail::read_be32(imgs, image_path);
  std::uint32_t cols = detail::read_be32(imgs, image_path);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * rows * cols);
  imgs.read(reinterpret_cast<char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  std::size_t got = static_cast<std::size_t>(imgs.gcount());
  if (got != pixels.size())
    throw std::runtime_error(image_path + ": truncated pixel data (expected " +
                             std::to_string(pixels.size()) + " bytes after header, got " +
                             std::to_string(got) + ")");

  std::ifstream labs(label_path, std::ios::binary);
  if (!labs) throw std::runtime_error("cannot open " + label_path);
  std::uint32_t lmagic = detail::read_be32(labs, label_path);
  if (lmagic != 2049)
    throw std::runtime_error(label_path + ": bad magic " + std::to_string(lmagic) +
                             " at offset 0 (expected 2049)");
  std::uint32_t ln = detail::read_be32(labs, label_path);
  if (ln != n)
    throw std::runtime_error(label_path + ": label count " + std::to_string(ln) +
                             " != image count " + std::to_string(n));
  std::vector<unsigned char> labels(ln);
  labs.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(ln));
  if (static_cast<std::size_t>(labs.gcount()) != labels.size())
    throw std::runtime_error(label_path + ": truncated label data");

  LabeledDataset ds;
  ds.x = Matrix(n, static_cast<std::size_t>(rows) * cols);
  ds.y.resize(n);
  for (std::size_t c = 0; c < 10; ++c) ds.class_names.push_back(std::to_string(c));
  ds.meta = {"mnist", 0, ""};
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.x.row(i);
    const unsigned char* src = pixels.data() + i * rows * cols;
    for (std::size_t p = 0; p < static_cast<std::size_t>(rows) * cols; ++p)
      row[p] = src[p] / 255.0;
    std::size_t lab = labels[i];
    require(lab < 10, label_path + ": label out of range");
    ds.y[i] = lab;
  }
  return ds;
}

struct MnistData {
  LabeledDataset train;
  LabeledDataset test;
};

// Searches ENN_DATA_DIR, ./data/mnist and ~/data/mnist for the IDX files.
inline std::string find_mnist_dir() {
  std::vector<std::string> candidates;
  if (const char* env = std::getenv("ENN_DATA_DIR")) {
    candidates.push_back(std::string(env));
    candidates.push_back(std::string(env) + "/mnist");
  }
  candidates.push_back("data/mnist");
  if (const char* home = std::getenv("HOME"))
    candidates.push_back(std::string(home) + "/data/mnist");
  for (const auto& dir : candidates)
    if (std::filesystem::exists(dir + "/train-images-idx3-ubyte")) return dir;
  throw std::runtime_error(
      "MNIST IDX files not found; set ENN_DATA_DIR or place them in "
      "./data/mnist (see README)");
}

inline MnistData load_mnist(const std::string& dir) {
  MnistData data;
  data.train = load_mnist_idx(dir + "/train-images-idx3-ubyte",
                              dir + "/train-labels-idx1-ubyte");
  data.train.meta.split = "train";
  data.test =
      load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  data.test.meta.split = "test";
  return data;
}

// ---------------------------------------------------------------------------

inline LabeledDataset balanced_subsample(const LabeledDataset& ds,
                                         std::size_t n_per_class, std::uint64_t seed) {
  auto by_class = ds.indices_by_class();
  for (std::size_t c = 0; c < by_class.size(); ++c)
    require(by_class[c].size() >= n_per_class,
            "balanced_subsample: class " + std::to_string(c) + " has only " +
                std::to_string(by_class[c].size()) + " samples, need " +
                std::to_string(n_per_class));
  LabeledDataset out;
  out.class_names = ds.class_names;
  out.meta = ds.meta;
  out.meta.generator += "-subsample";
  out.meta.seed = seed;
  out.x = Matrix(0, ds.dim());
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    Rng rng(derive_seed(seed, "balanced-subsample", c));
    auto picks = rng.sample_without_replacement(by_class[c].size(), n_per_class);
    std::sort(picks.begin(), picks.end());
    for (std::size_t p : picks) {
      out.x.append_row(ds.x.row(by_class[c][p]));
      out.y.push_back(c);
    }
  }
  return out;
}

}  // namespace enn
