// csrestore: patch-based compressed-sensing image capture, network training,
// and end-to-end restoration from the command line.
//
// Subcommands: gen-phi, make-dataset, train, measure, restore, deblock, eval.
// Exit codes: 0 success, 2 configuration/usage, 3 numerical abort,
// 4 I/O or format error.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csr/binio.hpp"
#include "csr/dataset.hpp"
#include "csr/image.hpp"
#include "csr/model_io.hpp"
#include "csr/pipeline.hpp"
#include "csr/train.hpp"

namespace fs = std::filesystem;
using namespace csr;

namespace {

// Sub-seed fan-out offsets: every run takes one --seed and derives stream
// seeds from it by fixed offsets, so runs are reproducible end to end.
constexpr std::uint64_t kSeedPhi = 0;
constexpr std::uint64_t kSeedInit = 1;
constexpr std::uint64_t kSeedShuffle = 2;

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, v);
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  const std::vector<std::uint8_t> data = read_file_bytes(path);
  return fnv1a64(data.data(), data.size());
}

// Reproducibility record embedded in binary outputs and written as a
// ".manifest" sidecar next to fixed-format outputs (PGM, CSV). Holds flags,
// seeds and input hashes; never wall-clock data, so reruns match bit-exactly.
// --threads is omitted because outputs are independent of it.
class Manifest {
 public:
  explicit Manifest(const std::string& command) {
    lines_.push_back("tool=csrestore");
    lines_.push_back("format=1");
    lines_.push_back("command=" + command);
  }
  void flag(const std::string& key, const std::string& value) {
    lines_.push_back("flag." + key + "=" + value);
  }
  void flag(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    flag(key, std::string(buf));
  }
  void flag(const std::string& key, std::uint64_t value) {
    flag(key, std::to_string(value));
  }
  void flag(const std::string& key, int value) {
    flag(key, std::to_string(value));
  }
  void input(const std::string& label, const std::string& path) {
    lines_.push_back("input." + label + "=" + path + "#fnv1a64:" +
                     hex64(hash_file(path)));
  }
  std::string text() const {
    std::string out;
    for (const std::string& l : lines_) out += l + "\n";
    return out;
  }
  void sidecar(const std::string& artifact_path) const {
    const std::string path = artifact_path + ".manifest";
    std::ofstream out(path);
    if (!out) throw FormatError(path + ": cannot open file for writing");
    out << text();
    if (!out) throw FormatError(path + ": short write");
  }

 private:
  std::vector<std::string> lines_;
};

// Expands a mix of files and directories into a sorted (name, path) list.
// Directories contribute their *.pgm / *.ppm entries in lexicographic order.
std::vector<std::pair<std::string, std::string>> collect_images(
    const std::vector<std::string>& inputs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& input : inputs) {
    if (fs::is_directory(input)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".pgm" || ext == ".ppm") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      for (const fs::path& p : found)
        out.emplace_back(p.filename().string(), p.string());
    } else if (fs::is_regular_file(input)) {
      out.emplace_back(fs::path(input).filename().string(), input);
    } else {
      throw ConfigError(input + ": no such file or directory");
    }
  }
  if (out.empty()) throw ConfigError("no input images found");
  return out;
}

std::vector<GrayImage> load_images(
    const std::vector<std::pair<std::string, std::string>>& named) {
  std::vector<GrayImage> images;
  images.reserve(named.size());
  for (const auto& [name, path] : named) images.push_back(load_image(path));
  return images;
}

std::string fmt_psnr(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void print_aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c)
      widths[c] = std::max(widths[c], row[c].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string cell = row[c];
      cell.resize(widths[c], ' ');
      line += cell;
      if (c + 1 < row.size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    std::cout << line << "\n";
  }
}

void emit_csv(const std::vector<std::string>& lines, const std::string& path) {
  if (path.empty()) {
    for (const std::string& l : lines) std::cout << l << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open file for writing");
  for (const std::string& l : lines) out << l << "\n";
  if (!out) throw FormatError(path + ": short write");
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// gen-phi

struct GenPhiOpts {
  int n = 32;
  double mr = 0.25;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_phi(const GenPhiOpts& o) {
  MeasurementMatrix phi = gen_measurement_matrix(o.n, o.mr, o.seed + kSeedPhi);
  Manifest man("gen-phi");
  man.flag("n", o.n);
  man.flag("mr", o.mr);
  man.flag("seed", o.seed);
  man.flag("out", o.out);
  save_phi(phi, o.out, man.text());
  std::printf("m=%d\nresidual=%.3e\nhash=%s\n", phi.m,
              phi.max_orthonormality_residual(),
              hex64(phi.content_hash()).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// make-dataset

struct MakeDatasetOpts {
  std::string stage = "recon";
  std::vector<std::string> images;
  std::vector<std::string> degraded;
  std::string phi_path;
  std::string recon_model;
  int stride = 14;
  int threads = 1;
};

int run_make_dataset(const MakeDatasetOpts& o) {
  const auto named = collect_images(o.images);
  const std::vector<GrayImage> imgs = load_images(named);
  PatchDataset ds;
  if (o.stage == "recon") {
    if (o.phi_path.empty())
      throw ConfigError("make-dataset --stage recon requires --phi");
    const PhiFile phi = load_phi(o.phi_path);
    ds = build_recon_dataset(imgs, phi.phi, phi.phi.patch_size, o.stride);
  } else if (o.stage == "deblock") {
    if (o.recon_model.empty())
      throw ConfigError("make-dataset --stage deblock requires --recon-model");
    const ModelFile model = load_model(o.recon_model);
    if (!model.net.phi)
      throw ConfigError("reconstruction model has no embedded measurement "
                        "matrix");
    ds = build_blocky_dataset(imgs, model.net, *model.net.phi, o.stride,
                              o.threads);
  } else if (o.stage == "jpeg-deblock") {
    if (o.degraded.empty())
      throw ConfigError("make-dataset --stage jpeg-deblock requires "
                        "--degraded");
    const auto degraded_named = collect_images(o.degraded);
    if (degraded_named.size() != named.size())
      throw ConfigError("degraded/clean image counts differ");
    const std::vector<GrayImage> degraded = load_images(degraded_named);
    ds = build_pair_dataset(degraded, imgs, 32, o.stride);
  } else {
    throw ConfigError("unknown --stage: " + o.stage);
  }
  std::printf("stage=%s\nsamples=%zu\npatch=%d\nstride=%d\n", o.stage.c_str(),
              ds.size(), ds.patch_size, o.stride);
  if (ds.kind == DatasetKind::Reconstruction)
    std::printf("m=%zu\nmr=%s\n", ds.vec_inputs[0].values.size(),
                fmt_g(ds.mr).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string stage = "recon";
  std::string kind;  // empty = auto
  int n = 32;
  double mr = 0.25;
  std::vector<std::string> images;
  std::vector<std::string> val_images;
  std::vector<std::string> degraded;
  std::vector<std::string> val_degraded;
  std::string phi_path;
  std::string recon_model;
  std::string out;
  std::string log_path;
  int stride = 14;
  int val_stride = 21;
  std::uint64_t seed = 0;
  int threads = 1;
  // schedule overrides (<0 = use stage defaults)
  int batch = -1;
  int epochs = -1;
  double momentum = -1.0;
  double lr_front = -1.0;
  double lr_last = -1.0;
  double lr_fc = -1.0;
  int val_interval = -1;
  double init_fc_std = -1.0;
  double init_conv_std = -1.0;
};

// The measurement rate decides the depth on auto-selection: two cascaded
// residual modules for very low rates, one otherwise.
NetworkKind pick_kind(const TrainOpts& o, double mr) {
  if (!o.kind.empty()) return parse_network_kind(o.kind);
  if (o.stage != "recon") return NetworkKind::DeblockResConv;
  return mr <= 0.01 ? NetworkKind::FC2ResConv : NetworkKind::FC1ResConv;
}

int run_train(const TrainOpts& o) {
  if (o.stage != "recon" && o.stage != "deblock" && o.stage != "jpeg-deblock")
    throw ConfigError("unknown --stage: " + o.stage);
  const bool recon_stage = o.stage == "recon";
  if (!o.kind.empty() &&
      recon_stage != network_kind_has_fc(parse_network_kind(o.kind)))
    throw ConfigError("--kind " + o.kind + " does not fit --stage " + o.stage);

  Manifest man("train");
  man.flag("stage", o.stage);
  man.flag("n", o.n);
  man.flag("seed", o.seed);
  man.flag("stride", o.stride);
  man.flag("val-stride", o.val_stride);

  // Assemble datasets.
  PatchDataset train_ds, val_ds;
  std::optional<MeasurementMatrix> phi;
  double mr = o.mr;
  const auto train_named = collect_images(o.images);
  const auto val_named = collect_images(o.val_images);
  const std::vector<GrayImage> train_imgs = load_images(train_named);
  const std::vector<GrayImage> val_imgs = load_images(val_named);
  for (std::size_t i = 0; i < train_named.size(); ++i)
    man.input("train[" + std::to_string(i) + "]", train_named[i].second);
  for (std::size_t i = 0; i < val_named.size(); ++i)
    man.input("val[" + std::to_string(i) + "]", val_named[i].second);

  std::optional<Network> recon_net;
  if (recon_stage) {
    if (o.phi_path.empty())
      throw ConfigError("train --stage recon requires --phi");
    man.input("phi", o.phi_path);
    PhiFile phi_file = load_phi(o.phi_path);
    phi = std::move(phi_file.phi);
    if (phi->patch_size != o.n)
      throw ConfigError("--n does not match the measurement matrix");
    mr = phi->mr;
    train_ds = build_recon_dataset(train_imgs, *phi, o.n, o.stride);
    val_ds = build_recon_dataset(val_imgs, *phi, o.n, o.val_stride);
  } else if (o.stage == "deblock") {
    if (o.recon_model.empty())
      throw ConfigError("train --stage deblock requires --recon-model");
    man.input("recon-model", o.recon_model);
    ModelFile model = load_model(o.recon_model);
    if (!model.net.phi)
      throw ConfigError("reconstruction model has no embedded measurement "
                        "matrix");
    recon_net = std::move(model.net);
    mr = recon_net->desc.mr;
    train_ds = build_blocky_dataset(train_imgs, *recon_net, *recon_net->phi,
                                    o.stride, o.threads);
    val_ds = build_blocky_dataset(val_imgs, *recon_net, *recon_net->phi,
                                  o.val_stride, o.threads);
  } else {  // jpeg-deblock: --images carries the clean set
    if (o.degraded.empty() || o.val_degraded.empty())
      throw ConfigError("train --stage jpeg-deblock requires --degraded and "
                        "--val-degraded");
    const auto dtrain_named = collect_images(o.degraded);
    const auto dval_named = collect_images(o.val_degraded);
    for (std::size_t i = 0; i < dtrain_named.size(); ++i)
      man.input("degraded[" + std::to_string(i) + "]", dtrain_named[i].second);
    for (std::size_t i = 0; i < dval_named.size(); ++i)
      man.input("val-degraded[" + std::to_string(i) + "]",
                dval_named[i].second);
    train_ds = build_pair_dataset(load_images(dtrain_named), train_imgs, o.n,
                                  o.stride);
    val_ds = build_pair_dataset(load_images(dval_named), val_imgs, o.n,
                                o.val_stride);
    mr = 0.0;
  }
  man.flag("mr", mr);

  const NetworkKind kind = pick_kind(o, mr);
  man.flag("kind", network_kind_name(kind));

  // Schedule: stage defaults plus explicit overrides.
  TrainSchedule sched =
      recon_stage ? recon_schedule_defaults() : deblock_schedule_defaults();
  if (o.batch > 0) sched.batch_size = o.batch;
  if (o.epochs > 0) sched.epochs = o.epochs;
  if (o.momentum >= 0.0) sched.momentum = o.momentum;
  if (o.lr_front > 0.0) sched.lr_front = o.lr_front;
  if (o.lr_last > 0.0) sched.lr_last = o.lr_last;
  if (o.lr_fc > 0.0) sched.lr_fc = o.lr_fc;
  if (o.val_interval > 0) sched.val_interval = o.val_interval;
  sched.shuffle_seed = o.seed + kSeedShuffle;
  man.flag("batch", sched.batch_size);
  man.flag("epochs", sched.epochs);
  man.flag("momentum", sched.momentum);
  man.flag("lr-front", sched.lr_front);
  man.flag("lr-last", sched.lr_last);
  if (recon_stage) man.flag("lr-fc", sched.lr_fc);
  man.flag("val-interval", sched.val_interval);

  // Network and initialization.
  Network net = make_network(build_descriptor(kind, o.n, mr));
  InitSpec init = default_init_spec(net.desc, o.seed + kSeedInit);
  if (o.init_fc_std > 0.0) init.fc_std = o.init_fc_std;
  if (o.init_conv_std > 0.0)
    init.conv_stds.assign(init.conv_stds.size(), o.init_conv_std);
  init_weights(net, init);
  man.flag("init-fc-std", net.desc.has_fc ? init.fc_std : 0.0);
  man.flag("init-conv-std", init.conv_stds[0]);
  if (phi) net.phi = std::move(*phi);

  TrainLog log = train(net, train_ds, sched, val_ds, o.threads);

  char history[256];
  std::snprintf(history, sizeof history,
                "stage=%s samples=%zu epochs=%d best_epoch=%d best_psnr=%.4f",
                o.stage.c_str(), train_ds.size(), sched.epochs, log.best_epoch,
                log.best_psnr);
  net.history = history;

  save_model(net, o.out, man.text());
  if (!o.log_path.empty()) {
    save_train_log(log, o.log_path);
    man.sidecar(o.log_path);
  }
  std::printf("samples=%zu\nval_samples=%zu\nbest_epoch=%d\nbest_psnr=%s\n",
              train_ds.size(), val_ds.size(), log.best_epoch,
              fmt_psnr(log.best_psnr).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// measure

struct MeasureOpts {
  std::string image;
  std::string phi_path;
  std::string out;
};

int run_measure(const MeasureOpts& o) {
  const PhiFile phi = load_phi(o.phi_path);
  const GrayImage img = load_image(o.image);
  const PaddedImage padded = pad_to_multiple(img, phi.phi.patch_size);
  MeasurementGrid grid = measure_image(padded.image, phi.phi);
  grid.orig_height = padded.orig_height;
  grid.orig_width = padded.orig_width;
  Manifest man("measure");
  man.flag("out", o.out);
  man.input("image", o.image);
  man.input("phi", o.phi_path);
  save_grid(grid, o.out, man.text());
  std::printf("grid=%dx%d\nm=%d\ncells=%zu\n", grid.rows, grid.cols, grid.m,
              grid.cells.size());
  return 0;
}

// ---------------------------------------------------------------------------
// restore

struct RestoreOpts {
  std::vector<std::string> images;
  std::string grid_path;
  std::vector<std::string> truth;
  std::string recon_model;
  std::string deblock_model;
  std::string out_dir = ".";
  std::string csv;
  bool skip_deblock = false;
  int threads = 1;
};

int run_restore(const RestoreOpts& o) {
  const ModelFile recon = load_model(o.recon_model);
  if (!recon.net.phi)
    throw ConfigError("reconstruction model has no embedded measurement "
                      "matrix");
  ModelFile deblock;
  if (!o.skip_deblock) {
    if (o.deblock_model.empty())
      throw ConfigError("restore requires --deblock-model (or "
                        "--skip-deblock)");
    deblock = load_model(o.deblock_model);
  }
  fs::create_directories(o.out_dir);

  Manifest base("restore");
  base.flag("skip-deblock", o.skip_deblock ? "true" : "false");
  base.input("recon-model", o.recon_model);
  if (!o.skip_deblock) base.input("deblock-model", o.deblock_model);

  struct Row {
    std::string name;
    RestoreResult result;
  };
  std::vector<Row> rows;

  if (!o.grid_path.empty()) {
    if (!o.images.empty())
      throw ConfigError("give either --grid or --image inputs, not both");
    const GridFile grid = load_grid(o.grid_path);
    Row row;
    row.name = fs::path(o.grid_path).stem().string();
    row.result = restore_from_grid(grid.grid, recon.net, deblock.net,
                                   o.threads, o.skip_deblock);
    rows.push_back(std::move(row));
    base.input("grid", o.grid_path);
  } else {
    const auto named = collect_images(o.images);
    for (const auto& [name, path] : named) {
      Row row;
      row.name = fs::path(name).stem().string();
      row.result = restore(load_image(path), recon.net, deblock.net,
                           o.threads, o.skip_deblock);
      rows.push_back(std::move(row));
      base.input(row.name, path);
    }
  }

  std::vector<GrayImage> truths;
  if (!o.truth.empty()) {
    const auto truth_named = collect_images(o.truth);
    if (truth_named.size() != rows.size())
      throw ConfigError("ground-truth count does not match input count");
    truths = load_images(truth_named);
  }

  for (const Row& row : rows) {
    const std::string blocky_path =
        (fs::path(o.out_dir) / (row.name + ".blocky.pgm")).string();
    save_image(row.result.blocky, blocky_path);
    base.sidecar(blocky_path);
    if (!o.skip_deblock) {
      const std::string restored_path =
          (fs::path(o.out_dir) / (row.name + ".restored.pgm")).string();
      save_image(row.result.restored, restored_path);
      base.sidecar(restored_path);
    }
  }

  // Report: Reconstruct / Block Remove PSNR columns (when truth is given)
  // plus per-stage wall-clock seconds, one row per image and a mean row.
  std::vector<std::string> csv_lines;
  std::vector<std::vector<std::string>> table;
  const bool with_psnr = !truths.empty();
  if (with_psnr) {
    csv_lines.push_back(
        "image,reconstruct_psnr,block_remove_psnr,reconstruct_seconds,"
        "block_remove_seconds");
    table.push_back(
        {"image", "Reconstruct", "Block Remove", "Recon-s", "Deblock-s"});
  } else {
    csv_lines.push_back("image,reconstruct_seconds,block_remove_seconds");
    table.push_back({"image", "Recon-s", "Deblock-s"});
  }
  std::vector<double> recon_psnrs, deblock_psnrs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const RestoreResult& r = rows[i].result;
    if (with_psnr) {
      const double pb = psnr(truths[i], r.blocky);
      const double pr = o.skip_deblock ? pb : psnr(truths[i], r.restored);
      recon_psnrs.push_back(pb);
      deblock_psnrs.push_back(pr);
      csv_lines.push_back(rows[i].name + "," + fmt_g(pb) + "," + fmt_g(pr) +
                          "," + fmt_g(r.recon_seconds) + "," +
                          fmt_g(r.deblock_seconds));
      table.push_back({rows[i].name, fmt_psnr(pb), fmt_psnr(pr),
                       fmt_g(r.recon_seconds), fmt_g(r.deblock_seconds)});
    } else {
      csv_lines.push_back(rows[i].name + "," + fmt_g(r.recon_seconds) + "," +
                          fmt_g(r.deblock_seconds));
      table.push_back({rows[i].name, fmt_g(r.recon_seconds),
                       fmt_g(r.deblock_seconds)});
    }
  }
  if (with_psnr) {
    const double mb = mean_of(recon_psnrs), mr_ = mean_of(deblock_psnrs);
    csv_lines.push_back("mean," + fmt_g(mb) + "," + fmt_g(mr_) + ",,");
    table.push_back({"mean", fmt_psnr(mb), fmt_psnr(mr_), "", ""});
  }
  emit_csv(csv_lines, o.csv);
  if (!o.csv.empty()) base.sidecar(o.csv);
  print_aligned(table);
  return 0;
}

// ---------------------------------------------------------------------------
// deblock

struct DeblockOpts {
  std::string image;
  std::string model;
  std::string out;
  std::string truth;
  int threads = 1;
};

int run_deblock(const DeblockOpts& o) {
  const ModelFile model = load_model(o.model);
  const GrayImage input = load_image(o.image);
  const GrayImage output = deblock_image(input, model.net, o.threads);
  save_image(output, o.out);
  Manifest man("deblock");
  man.flag("out", o.out);
  man.input("image", o.image);
  man.input("model", o.model);
  man.sidecar(o.out);
  if (!o.truth.empty()) {
    const GrayImage truth = load_image(o.truth);
    std::printf("input_psnr=%s\noutput_psnr=%s\n",
                fmt_psnr(psnr(truth, input)).c_str(),
                fmt_psnr(psnr(truth, output)).c_str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::vector<std::string> images;
  std::vector<std::string> ref;
  std::string csv;
};

int run_eval(const EvalOpts& o) {
  const auto a_named = collect_images(o.images);
  const auto b_named = collect_images(o.ref);
  if (a_named.size() != b_named.size())
    throw ConfigError("eval: image and reference counts differ (" +
                      std::to_string(a_named.size()) + " vs " +
                      std::to_string(b_named.size()) + ")");
  std::vector<std::string> csv_lines = {"image,psnr"};
  std::vector<std::vector<std::string>> table = {{"image", "PSNR"}};
  std::vector<double> scores;
  for (std::size_t i = 0; i < a_named.size(); ++i) {
    const GrayImage a = load_image(a_named[i].second);
    const GrayImage b = load_image(b_named[i].second);
    const double p = psnr(a, b);
    scores.push_back(p);
    csv_lines.push_back(a_named[i].first + "," + fmt_g(p));
    table.push_back({a_named[i].first, fmt_psnr(p)});
  }
  const double mean = mean_of(scores);
  csv_lines.push_back("mean," + fmt_g(mean));
  table.push_back({"mean", fmt_psnr(mean)});
  emit_csv(csv_lines, o.csv);
  if (!o.csv.empty()) {
    Manifest man("eval");
    for (std::size_t i = 0; i < a_named.size(); ++i) {
      man.input("images[" + std::to_string(i) + "]", a_named[i].second);
      man.input("ref[" + std::to_string(i) + "]", b_named[i].second);
    }
    man.sidecar(o.csv);
  }
  print_aligned(table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Patch-based compressed-sensing capture, training and "
               "restoration"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value config file");
  app.fallthrough();

  GenPhiOpts gen_phi_opts;
  auto* gen_phi = app.add_subcommand(
      "gen-phi", "Generate a row-orthonormal Gaussian measurement matrix");
  gen_phi->add_option("--n", gen_phi_opts.n, "Patch size")
      ->check(CLI::Range(8, 4096));
  gen_phi->add_option("--mr", gen_phi_opts.mr, "Measurement rate in (0,1]")
      ->check(CLI::Range(1e-9, 1.0));
  gen_phi->add_option("--seed", gen_phi_opts.seed, "Random seed");
  gen_phi->add_option("--out", gen_phi_opts.out, "Output matrix file")
      ->required();

  MakeDatasetOpts mk_opts;
  auto* mk = app.add_subcommand("make-dataset",
                                "Build a training dataset and report counts");
  mk->add_option("--stage", mk_opts.stage, "recon | deblock | jpeg-deblock");
  mk->add_option("--images", mk_opts.images, "Image files or directories")
      ->required();
  mk->add_option("--degraded", mk_opts.degraded,
                 "Degraded image files or directories (jpeg-deblock)");
  mk->add_option("--phi", mk_opts.phi_path, "Measurement matrix file")
      ->check(CLI::ExistingFile);
  mk->add_option("--recon-model", mk_opts.recon_model,
                 "Trained reconstruction model (deblock stage)")
      ->check(CLI::ExistingFile);
  mk->add_option("--stride", mk_opts.stride, "Patch extraction stride")
      ->check(CLI::Range(1, 4096));
  mk->add_option("--threads", mk_opts.threads, "Worker thread cap")
      ->check(CLI::Range(1, 256));

  TrainOpts train_opts;
  auto* tr = app.add_subcommand("train", "Train a network");
  tr->add_option("--stage", train_opts.stage, "recon | deblock | jpeg-deblock");
  tr->add_option("--kind", train_opts.kind,
                 "fc1-resconv | fc2-resconv | deblock-resconv | reconnet | "
                 "half-reconnet (default: auto)");
  tr->add_option("--n", train_opts.n, "Patch size")->check(CLI::Range(8, 4096));
  tr->add_option("--mr", train_opts.mr, "Measurement rate (auto kind choice)")
      ->check(CLI::Range(1e-9, 1.0));
  tr->add_option("--images", train_opts.images,
                 "Training images (clean set)")->required();
  tr->add_option("--val-images", train_opts.val_images, "Validation images")
      ->required();
  tr->add_option("--degraded", train_opts.degraded,
                 "Degraded training images (jpeg-deblock)");
  tr->add_option("--val-degraded", train_opts.val_degraded,
                 "Degraded validation images (jpeg-deblock)");
  tr->add_option("--phi", train_opts.phi_path, "Measurement matrix file")
      ->check(CLI::ExistingFile);
  tr->add_option("--recon-model", train_opts.recon_model,
                 "Trained reconstruction model (deblock stage)")
      ->check(CLI::ExistingFile);
  tr->add_option("--out", train_opts.out, "Output model file")->required();
  tr->add_option("--log", train_opts.log_path, "Training log CSV");
  tr->add_option("--stride", train_opts.stride, "Training extraction stride")
      ->check(CLI::Range(1, 4096));
  tr->add_option("--val-stride", train_opts.val_stride,
                 "Validation extraction stride")
      ->check(CLI::Range(1, 4096));
  tr->add_option("--seed", train_opts.seed, "Random seed");
  tr->add_option("--threads", train_opts.threads, "Worker thread cap")
      ->check(CLI::Range(1, 256));
  tr->add_option("--batch", train_opts.batch, "Mini-batch size")
      ->check(CLI::Range(1, 1 << 20));
  tr->add_option("--epochs", train_opts.epochs, "Epoch budget")
      ->check(CLI::Range(1, 1 << 20));
  tr->add_option("--momentum", train_opts.momentum, "SGD momentum")
      ->check(CLI::Range(0.0, 0.999999));
  tr->add_option("--lr-front", train_opts.lr_front,
                 "Learning rate, front conv layers");
  tr->add_option("--lr-last", train_opts.lr_last,
                 "Learning rate, module-final conv layers");
  tr->add_option("--lr-fc", train_opts.lr_fc, "Learning rate, FC layer");
  tr->add_option("--val-interval", train_opts.val_interval,
                 "Epochs between validations")
      ->check(CLI::Range(1, 1 << 20));
  tr->add_option("--init-fc-std", train_opts.init_fc_std,
                 "Override FC init standard deviation");
  tr->add_option("--init-conv-std", train_opts.init_conv_std,
                 "Override conv init standard deviation (all stages)");

  MeasureOpts measure_opts;
  auto* ms = app.add_subcommand("measure",
                                "Capture an image as patch measurements");
  ms->add_option("--image", measure_opts.image, "Input image")
      ->required()
      ->check(CLI::ExistingFile);
  ms->add_option("--phi", measure_opts.phi_path, "Measurement matrix file")
      ->required()
      ->check(CLI::ExistingFile);
  ms->add_option("--out", measure_opts.out, "Output grid file")->required();

  RestoreOpts restore_opts;
  auto* rs = app.add_subcommand("restore",
                                "Reconstruct and de-block captured images");
  rs->add_option("--image", restore_opts.images,
                 "Input images (files or directories)");
  rs->add_option("--grid", restore_opts.grid_path, "Captured measurement grid")
      ->check(CLI::ExistingFile);
  rs->add_option("--truth", restore_opts.truth,
                 "Ground-truth images for PSNR reporting");
  rs->add_option("--recon-model", restore_opts.recon_model,
                 "Reconstruction model")
      ->required()
      ->check(CLI::ExistingFile);
  rs->add_option("--deblock-model", restore_opts.deblock_model,
                 "De-block model")
      ->check(CLI::ExistingFile);
  rs->add_option("--out-dir", restore_opts.out_dir, "Output directory");
  rs->add_option("--csv", restore_opts.csv, "Write the report CSV here");
  rs->add_flag("--skip-deblock", restore_opts.skip_deblock,
               "Stop after the reconstruction stage");
  rs->add_option("--threads", restore_opts.threads, "Worker thread cap")
      ->check(CLI::Range(1, 256));

  DeblockOpts deblock_opts;
  auto* db = app.add_subcommand("deblock", "De-block a single image");
  db->add_option("--image", deblock_opts.image, "Input image")
      ->required()
      ->check(CLI::ExistingFile);
  db->add_option("--model", deblock_opts.model, "De-block model")
      ->required()
      ->check(CLI::ExistingFile);
  db->add_option("--out", deblock_opts.out, "Output image")->required();
  db->add_option("--truth", deblock_opts.truth,
                 "Ground truth for PSNR reporting")
      ->check(CLI::ExistingFile);
  db->add_option("--threads", deblock_opts.threads, "Worker thread cap")
      ->check(CLI::Range(1, 256));

  EvalOpts eval_opts;
  auto* ev = app.add_subcommand("eval", "PSNR of paired image lists");
  ev->add_option("--images", eval_opts.images, "Images (files or directories)")
      ->required();
  ev->add_option("--ref", eval_opts.ref, "Reference images")->required();
  ev->add_option("--csv", eval_opts.csv, "Write the report CSV here");

  try {
    app.parse(argc, argv);
    if (gen_phi->parsed()) return run_gen_phi(gen_phi_opts);
    if (mk->parsed()) return run_make_dataset(mk_opts);
    if (tr->parsed()) return run_train(train_opts);
    if (ms->parsed()) return run_measure(measure_opts);
    if (rs->parsed()) return run_restore(restore_opts);
    if (db->parsed()) return run_deblock(deblock_opts);
    if (ev->parsed()) return run_eval(eval_opts);
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
